//! Plain CSV rendering of ensemble time series and sampled curves.
//!
//! Numbers use Rust's shortest round-trip formatting, which never depends on
//! the process locale, so equal inputs give equal bytes.

use std::fmt::Write as _;

use crate::ensemble::ObservableFrame;
use crate::error::{invalid, Result};

/// Ensemble observable written as a `t,mean,sem` series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Observable {
    KineticEnergy,
    Population,
    Current,
}

impl Observable {
    pub const ALL: [Observable; 3] = [
        Observable::KineticEnergy,
        Observable::Population,
        Observable::Current,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Observable::KineticEnergy => "ke",
            Observable::Population => "pop",
            Observable::Current => "current",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|o| o.name() == name)
    }

    /// `(mean, sem)` of this observable in `frame`, `None` for a current
    /// that was not recorded.
    pub fn select(self, frame: &ObservableFrame) -> Option<(f64, f64)> {
        match self {
            Observable::KineticEnergy => Some((frame.mean_ke, frame.sem_ke)),
            Observable::Population => Some((frame.mean_pop, frame.sem_pop)),
            Observable::Current => frame.mean_current.zip(frame.sem_current),
        }
    }
}

/// Renders `frames` as `t,mean,sem` rows for one observable.
pub fn frames_csv(frames: &[ObservableFrame], observable: Observable) -> Result<String> {
    let mut out = String::from("t,mean,sem\n");
    for f in frames {
        let (mean, sem) = observable
            .select(f)
            .ok_or_else(|| invalid("observable", "current is only recorded for two-lead baths"))?;
        writeln!(out, "{},{},{}", f.t, mean, sem).expect("writing to a String");
    }
    Ok(out)
}

/// Renders equal-length columns under `header`.
pub fn columns_csv(header: &[&str], columns: &[&[f64]]) -> Result<String> {
    if header.len() != columns.len() {
        return Err(invalid(
            "header",
            format!("{} names for {} columns", header.len(), columns.len()),
        ));
    }
    let rows = columns.first().map_or(0, |c| c.len());
    if columns.iter().any(|c| c.len() != rows) {
        return Err(invalid("columns", "columns differ in length"));
    }
    let mut out = header.join(",");
    out.push('\n');
    for i in 0..rows {
        for (j, c) in columns.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{}", c[i]).expect("writing to a String");
        }
        out.push('\n');
    }
    Ok(out)
}
