//! Log-log least-squares rate fits.

use serde::Serialize;
use ski_core::Error;

/// Values below this are treated as exact zeros and left out of a fit.
pub const ZERO_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `(log x, log y)` pairs actually used.
    pub points: Vec<(f64, f64)>,
    pub notes: Vec<String>,
}

/// Least-squares line through `(log x, log y)`.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit, Error> {
    let mut notes = Vec::new();
    let mut logs = Vec::with_capacity(points.len());
    for &(x, y) in points {
        if !(x > 0.0 && x.is_finite()) || !y.is_finite() || y < 0.0 {
            return Err(Error::InvalidArgument(format!("rate fit needs positive pairs, got ({x}, {y})")));
        }
        if y < ZERO_FLOOR {
            notes.push(format!("excluded x = {x}: y = {y:e} is below {ZERO_FLOOR:e}"));
            continue;
        }
        logs.push((x.ln(), y.ln()));
    }
    if logs.len() < 3 {
        return Err(Error::InsufficientData(format!("{} usable points, need at least 3", logs.len())));
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all x values coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    Ok(RateFit { slope, intercept, r_squared, points: logs, notes })
}
