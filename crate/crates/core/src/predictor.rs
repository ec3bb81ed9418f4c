//! Link-bandwidth extrapolation from the last three changes.
//!
//! The saved samples `(t0, B0), (t1, B1), (t2, B2)` define the Newton form
//! of their interpolating polynomial,
//!
//! ```text
//! B(tp) = a0 + a1 (tp - t0) + a2 (tp - t1)(tp - t0)
//! ```
//!
//! where `a0 = B0`, `a1 = [B0, B1]` and `a2 = [B0, B1, B2]` are divided
//! differences. Shorter histories drop the missing terms, giving constant or
//! linear extrapolation.

use crate::error::{Error, Result};
use crate::network::History3;

/// Newton-form coefficients plus the anchor times of its basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub alpha0: f64,
    pub alpha1: Option<f64>,
    pub alpha2: Option<f64>,
    pub t0: f64,
    pub t1: Option<f64>,
}

impl Coefficients {
    /// Evaluates the polynomial at `t_p` without clamping.
    pub fn evaluate(&self, t_p: f64) -> f64 {
        let mut value = self.alpha0;
        if let Some(a1) = self.alpha1 {
            value += a1 * (t_p - self.t0);
        }
        if let (Some(a2), Some(t1)) = (self.alpha2, self.t1) {
            value += a2 * (t_p - t1) * (t_p - self.t0);
        }
        value
    }
}

pub fn divided_coefficients(history: &History3) -> Result<Coefficients> {
    let samples = history.to_vec();
    let first = samples.first().ok_or(Error::EmptyHistory)?;
    for w in samples.windows(2) {
        if w[1].t <= w[0].t {
            return Err(Error::DuplicateTimestamps(w[1].t, w[0].t));
        }
    }

    let mut c = Coefficients { alpha0: first.b, alpha1: None, alpha2: None, t0: first.t, t1: None };
    if let Some(second) = samples.get(1) {
        let d01 = (second.b - first.b) / (second.t - first.t);
        c.alpha1 = Some(d01);
        c.t1 = Some(second.t);
        if let Some(third) = samples.get(2) {
            let d12 = (third.b - second.b) / (third.t - second.t);
            c.alpha2 = Some((d12 - d01) / (third.t - first.t));
        }
    }
    Ok(c)
}

/// The extrapolated value before the non-negativity clamp.
pub fn extrapolate(history: &History3, t_p: f64) -> Result<f64> {
    let newest = history.newest().ok_or(Error::EmptyHistory)?;
    if t_p.is_nan() || t_p < newest.t {
        return Err(Error::TimeInPast { requested: t_p, newest: newest.t });
    }
    Ok(divided_coefficients(history)?.evaluate(t_p))
}

/// Predicted bandwidth of a link at `t_p`, floored at zero.
pub fn predict_bandwidth(history: &History3, t_p: f64) -> Result<f64> {
    Ok(extrapolate(history, t_p)?.max(0.0))
}
