//! Value-at-Risk under a Pareto loss tail, and its empirical counterpart.
//!
//! With `P(X >= s) = (s / x_min)^-m` the loss level exceeded with probability
//! `1 - alpha` is `x* = x_min (1 - alpha)^(-1/m)`. Because `x*` falls as `m`
//! grows, the exponent band `[M_MIN, M_MAX]` brackets every VaR estimate
//! between the value at `M_MAX` and the value at `M_MIN`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tails::{quantile_sorted, M_MAX, M_MIN};

/// Fewest losses [`empirical_var`] accepts.
pub const MIN_EMPIRICAL_SAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VaRQuery {
    pub alpha: f64,
    /// Steps per loss observation. Carried along for reporting; no time
    /// scaling is applied.
    pub horizon: usize,
    pub x_min: f64,
}

impl VaRQuery {
    pub fn new(alpha: f64, horizon: usize, x_min: f64) -> Result<Self> {
        let q = Self { alpha, horizon, x_min };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if self.horizon == 0 {
            return Err(Error::config("horizon", "must be at least 1"));
        }
        if !(self.x_min > 0.0 && self.x_min.is_finite()) {
            return Err(Error::config("x_min", "must be a finite value > 0"));
        }
        Ok(())
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::config("alpha", format!("{alpha} is outside (0, 1)")))
    }
}

/// Pareto VaR `x_min (1 - alpha)^(-1/m)`.
pub fn pareto_var(m: f64, query: &VaRQuery) -> Result<f64> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::Domain(format!("tail exponent must be positive, got {m}")));
    }
    query.validate()?;
    Ok(query.x_min * (1.0 - query.alpha).powf(-1.0 / m))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaREnvelope {
    /// VaR at the steepest admissible tail, `M_MAX`.
    pub var_lower: f64,
    /// VaR at the heaviest admissible tail, `M_MIN`.
    pub var_upper: f64,
    pub m_hat: Option<f64>,
    pub var_point: Option<f64>,
    pub notes: Vec<String>,
}

pub fn var_envelope(query: &VaRQuery, m_hat: Option<f64>) -> Result<VaREnvelope> {
    let var_upper = pareto_var(M_MIN, query)?;
    let var_lower = pareto_var(M_MAX, query)?;
    let var_point = m_hat.map(|m| pareto_var(m, query)).transpose()?;
    let mut notes = Vec::new();
    if let (Some(m), Some(v)) = (m_hat, var_point) {
        if m < M_MIN {
            notes.push(format!(
                "m_hat = {m} lies below m_min = {M_MIN}; var_point {v} exceeds var_upper"
            ));
        } else if m > M_MAX {
            notes.push(format!(
                "m_hat = {m} lies above m_max = {M_MAX}; var_point {v} falls below var_lower"
            ));
        }
    }
    Ok(VaREnvelope {
        var_lower,
        var_upper,
        m_hat,
        var_point,
        notes,
    })
}

/// The `alpha`-quantile of the losses, interpolating between order
/// statistics at `h = (n - 1) alpha`.
pub fn empirical_var(losses: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if losses.len() < MIN_EMPIRICAL_SAMPLES {
        return Err(Error::InsufficientData {
            needed: MIN_EMPIRICAL_SAMPLES,
            got: losses.len(),
        });
    }
    if let Some(bad) = losses.iter().find(|x| !x.is_finite()) {
        return Err(Error::Domain(format!("loss sample contains {bad}")));
    }
    let mut sorted = losses.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&sorted, alpha))
}

/// Losses from a return series: `-r` for every negative return. Gaps, gains
/// and flat steps contribute nothing.
pub fn losses_from_returns(returns: &[Option<f64>]) -> Vec<f64> {
    returns.iter().flatten().filter(|r| **r < 0.0).map(|r| -r).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(alpha: f64, x_min: f64) -> VaRQuery {
        VaRQuery::new(alpha, 1, x_min).unwrap()
    }

    #[test]
    fn closed_form() {
        let v = pareto_var(2.0, &q(0.99, 0.01)).unwrap();
        assert!((v - 0.1).abs() < 1e-15);
    }

    #[test]
    fn small_alpha_tends_to_x_min() {
        let v = pareto_var(2.0, &q(1e-12, 3.0)).unwrap();
        assert!((v - 3.0).abs() < 1e-10);
    }

    #[test]
    fn query_validation() {
        for a in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(
                VaRQuery::new(a, 1, 1.0),
                Err(Error::Config { ref key, .. }) if key == "alpha"
            ));
        }
        assert!(VaRQuery::new(0.9, 0, 1.0).is_err());
        assert!(VaRQuery::new(0.9, 1, 0.0).is_err());
        assert!(pareto_var(0.0, &q(0.9, 1.0)).is_err());
        assert!(pareto_var(-2.0, &q(0.9, 1.0)).is_err());
    }

    #[test]
    fn envelope_closed_form() {
        let e = var_envelope(&q(0.99, 0.01), None).unwrap();
        assert!((e.var_upper - 0.1).abs() < 1e-15);
        assert!((e.var_lower - 0.01 * 100f64.powf(2.0 / 7.0)).abs() < 1e-15);
        assert!((e.var_lower - 0.03728).abs() < 1e-5);
        assert_eq!(e.var_point, None);
        assert!(e.notes.is_empty());
    }

    #[test]
    fn envelope_point_inside_and_outside() {
        let e = var_envelope(&q(0.99, 0.01), Some(2.5)).unwrap();
        let p = e.var_point.unwrap();
        assert!(e.var_lower < p && p < e.var_upper);
        let e = var_envelope(&q(0.99, 0.01), Some(4.0)).unwrap();
        assert!(e.var_point.unwrap() < e.var_lower);
        assert_eq!(e.notes.len(), 1);
        let e = var_envelope(&q(0.99, 0.01), Some(1.5)).unwrap();
        assert!(e.var_point.unwrap() > e.var_upper);
        assert!(e.notes[0].contains("below"));
    }

    #[test]
    fn empirical_examples() {
        let losses: Vec<f64> = (1..=100).map(f64::from).collect();
        assert!((empirical_var(&losses, 0.95).unwrap() - 95.05).abs() < 1e-12);
        assert_eq!(empirical_var(&[0.25; 150], 0.3).unwrap(), 0.25);
        assert!(matches!(
            empirical_var(&[1.0; 99], 0.5),
            Err(Error::InsufficientData { needed: 100, got: 99 })
        ));
        assert!(empirical_var(&losses, 1.0).is_err());
    }

    #[test]
    fn losses_keep_only_drops() {
        let r = [Some(0.1), None, Some(-0.2), Some(0.0), Some(-0.05)];
        assert_eq!(losses_from_returns(&r), vec![0.2, 0.05]);
    }
}
