//! Mixed quantum-classical dynamics of a molecule near a metal surface,
//! modelled by the Anderson-Holstein impurity in the classical master
//! equation limit.
//!
//! Ehrenfest dynamics is corrected by Markovian or exponentially correlated
//! random forces and compared against electronic-friction Langevin dynamics
//! and master-equation surface hopping.

// Range checks are written `!(v > 0.0)` so that NaN fails them too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod model;
pub mod noise;
pub mod table;

pub use dynamics::{Electronic, Method, MethodConfig, Stepper, TrajectoryState};
pub use ensemble::{run_ensemble, EnsembleConfig, ObservableFrame};
pub use error::{Error, Result};
pub use model::{BathSpec, Lead, ModelParams, SurfaceIndex, System};
pub use noise::{AmplitudeSource, NoiseAmplitude};
pub use table::Observable;
