//! Per-iteration history of a solve and the empirical convergence order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Converged,
    Diverged,
    MaxIterations,
}

/// One step of a fixed-point iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iterate {
    pub lambda: C64,
    /// `|λ_j − λ_{j−1}|`; zero for the starting estimate.
    pub step: f64,
    pub residual: f64,
    /// Participation ratio of the current recovered vectors; absent when
    /// infinite or not computed.
    pub rho: Option<C64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub iterates: Vec<Iterate>,
    pub order_fit: Option<f64>,
    pub status: Status,
}

pub const DEFAULT_ORDER_WINDOW: usize = 4;

impl ConvergenceReport {
    pub fn new() -> Self {
        ConvergenceReport { iterates: Vec::new(), order_fit: None, status: Status::MaxIterations }
    }

    pub fn push(&mut self, it: Iterate) {
        self.iterates.push(it);
    }

    pub fn last_lambda(&self) -> Option<C64> {
        self.iterates.last().map(|i| i.lambda)
    }

    /// Number of iterations after the starting estimate.
    pub fn iterations(&self) -> usize {
        self.iterates.len().saturating_sub(1)
    }

    /// Closes the report, attaching an order fit when the data allow one.
    pub fn finish(mut self, status: Status) -> Self {
        self.status = status;
        self.order_fit = convergence_order_estimate(&self).ok();
        self
    }

    /// Step sizes `|Δλ_j|` for `j ≥ 1`.
    pub fn steps(&self) -> Vec<f64> {
        self.iterates.iter().skip(1).map(|i| i.step).collect()
    }
}

impl Default for ConvergenceReport {
    fn default() -> Self {
        Self::new()
    }
}

/// Order fit on the report's `|Δλ|` sequence with entries at the roundoff
/// floor of the final eigenvalue removed.
pub fn convergence_order_estimate(report: &ConvergenceReport) -> Result<f64> {
    let scale = 1.0 + report.last_lambda().map(|l| l.norm()).unwrap_or(0.0);
    let floor = 64.0 * f64::EPSILON * scale;
    let mut steps = report.steps();
    while steps.last().is_some_and(|&s| s <= floor) {
        steps.pop();
    }
    order_fit(&steps, DEFAULT_ORDER_WINDOW)
}

/// Least-squares slope of `log e_{j+1}` against `log e_j` over the last
/// `window` entries, which must be positive and strictly decreasing.
pub fn order_fit(errors: &[f64], window: usize) -> Result<f64> {
    if window < 3 {
        return Err(Error::InsufficientData(format!("window {window} below 3")));
    }
    if errors.len() < window {
        return Err(Error::InsufficientData(format!("{} error entries, need {window}", errors.len())));
    }
    let tail = &errors[errors.len() - window..];
    if tail.iter().any(|&e| !(e > 0.0) || !e.is_finite()) || tail.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InsufficientData("final window not strictly decreasing".into()));
    }
    let logs: Vec<f64> = tail.iter().map(|e| e.ln()).collect();
    let xs = &logs[..window - 1];
    let ys = &logs[1..];
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}
