//! Heavy-tail exponent estimation and the degree/return exponent bridge.
//!
//! Exponents here are CCDF exponents: `P(X >= s) ~ s^-m`. A density
//! exponent `gamma` corresponds to a CCDF exponent `gamma - 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower end of the return-tail exponent band.
pub const M_MIN: f64 = 2.0;
/// Upper end of the return-tail exponent band.
pub const M_MAX: f64 = 3.5;

/// Fewest points a CCDF regression accepts.
pub const MIN_REGRESSION_POINTS: usize = 10;
/// Fewest order statistics the Hill estimator accepts.
pub const MIN_HILL_TAIL: usize = 20;
/// Below this many distinct values a fit carries a discreteness note.
pub const DISCRETE_SUPPORT_NOTE: usize = 30;

/// Empirical complementary CDF at the distinct sample values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcdfPoints {
    /// `(s, P(X >= s))`, with `s` strictly increasing.
    pub points: Vec<(f64, f64)>,
    /// Number of samples the CCDF was built from.
    pub n: usize,
}

impl CcdfPoints {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMethod {
    Regression,
    Hill,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    /// CCDF exponent.
    pub m_hat: f64,
    pub s_min: f64,
    pub stderr: f64,
    pub n_tail: usize,
    pub method: FitMethod,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

pub fn ccdf(samples: &[f64]) -> Result<CcdfPoints> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("ccdf needs at least one sample"));
    }
    if let Some(bad) = samples.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
        return Err(Error::Domain(format!(
            "ccdf sample {bad} is not a positive finite value"
        )));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut points = Vec::new();
    let mut i = 0;
    while i < n {
        let s = sorted[i];
        points.push((s, (n - i) as f64 / n as f64));
        while i < n && sorted[i] == s {
            i += 1;
        }
    }
    Ok(CcdfPoints { points, n })
}

/// Least squares on `(ln s, ln P)` over the points with `s >= s_min`;
/// `m_hat` is the negated slope.
pub fn fit_ccdf_regression(points: &CcdfPoints, s_min: f64) -> Result<TailFit> {
    let tail: Vec<(f64, f64)> = points
        .points
        .iter()
        .filter(|(s, _)| *s >= s_min)
        .map(|&(s, p)| (s.ln(), p.ln()))
        .collect();
    if tail.len() < MIN_REGRESSION_POINTS {
        return Err(Error::InsufficientTail {
            needed: MIN_REGRESSION_POINTS,
            got: tail.len(),
        });
    }
    let line = least_squares(&tail).ok_or(Error::Domain("all tail points share one abscissa".to_string()))?;
    let mut notes = Vec::new();
    if tail.len() < DISCRETE_SUPPORT_NOTE {
        notes.push(discrete_note(tail.len()));
    }
    if -line.slope <= 0.0 {
        notes.push("CCDF is not decreasing over the fitted range".to_string());
    }
    Ok(TailFit {
        m_hat: -line.slope,
        s_min,
        stderr: line.slope_stderr,
        n_tail: tail.len(),
        method: FitMethod::Regression,
        notes,
    })
}

/// CCDF regression straight from samples. `s_min = None` uses
/// [`default_s_min`].
pub fn fit_samples(samples: &[f64], s_min: Option<f64>) -> Result<TailFit> {
    let cut = match s_min {
        Some(s) => s,
        None => default_s_min(samples)?,
    };
    fit_ccdf_regression(&ccdf(samples)?, cut)
}

/// Hill estimator on the largest `floor(n * tail_fraction)` order statistics,
/// measured against the next order statistic. Standard error is
/// `m_hat / sqrt(n_tail)`.
pub fn hill(samples: &[f64], tail_fraction: f64) -> Result<TailFit> {
    if !(tail_fraction > 0.0 && tail_fraction < 1.0) {
        return Err(Error::Domain(format!("tail fraction {tail_fraction} outside (0, 1)")));
    }
    if let Some(bad) = samples.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
        return Err(Error::Domain(format!(
            "hill sample {bad} is not a positive finite value"
        )));
    }
    let k = (samples.len() as f64 * tail_fraction).floor() as usize;
    if k < MIN_HILL_TAIL || k >= samples.len() {
        return Err(Error::InsufficientTail {
            needed: MIN_HILL_TAIL,
            got: k.min(samples.len().saturating_sub(1)),
        });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let threshold = sorted[k];
    let mean_log_excess = sorted[..k].iter().map(|x| (x / threshold).ln()).sum::<f64>() / k as f64;
    if mean_log_excess <= 0.0 {
        return Err(Error::Domain(
            "top order statistics are all equal to the threshold".to_string(),
        ));
    }
    let m_hat = 1.0 / mean_log_excess;
    let mut notes = Vec::new();
    let distinct = count_distinct(&sorted[..=k]);
    if distinct < DISCRETE_SUPPORT_NOTE {
        notes.push(discrete_note(distinct));
    }
    Ok(TailFit {
        m_hat,
        s_min: threshold,
        stderr: m_hat / (k as f64).sqrt(),
        n_tail: k,
        method: FitMethod::Hill,
        notes,
    })
}

/// Hill estimates over a sequence of tail fractions. For a true power law
/// the estimates are flat; a systematic upward drift as the fraction shrinks
/// indicates a lighter-than-power-law tail.
pub fn hill_profile(samples: &[f64], fractions: &[f64]) -> Result<Vec<TailFit>> {
    fractions.iter().map(|&f| hill(samples, f)).collect()
}

/// True when `profile` (ordered by decreasing tail fraction) rises
/// monotonically and by more than `rel` of its first value overall.
pub fn drifts_upward(profile: &[TailFit], rel: f64) -> bool {
    if profile.len() < 2 {
        return false;
    }
    let monotone = profile.windows(2).all(|w| w[1].m_hat >= w[0].m_hat);
    let first = profile[0].m_hat;
    let last = profile[profile.len() - 1].m_hat;
    monotone && last > first * (1.0 + rel)
}

/// `q`-quantile by linear interpolation between order statistics
/// (`h = (n - 1) q`).
pub fn quantile(samples: &[f64], q: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("quantile of an empty sample"));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Domain(format!("quantile level {q} outside [0, 1]")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&sorted, q))
}

pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Default regression cutoff: the 90th percentile of the sample.
pub fn default_s_min(samples: &[f64]) -> Result<f64> {
    quantile(samples, 0.9)
}

/// Return-tail exponent implied by a degree exponent: `3 gamma / 2 - 1`.
pub fn m_from_gamma(gamma: f64) -> f64 {
    1.5 * gamma - 1.0
}

/// Inverse of [`m_from_gamma`]: `2 (m + 1) / 3`.
pub fn gamma_from_m(m: f64) -> f64 {
    2.0 * (m + 1.0) / 3.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundClass {
    Below,
    Within,
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub class: BoundClass,
    pub note: String,
}

/// Places `m_hat` against the closed band `[M_MIN, M_MAX]` and notes whether
/// the `±2 stderr` interval reaches across either bound.
pub fn classify_bounds(m_hat: f64, stderr: f64) -> BoundCheck {
    let class = if m_hat < M_MIN {
        BoundClass::Below
    } else if m_hat > M_MAX {
        BoundClass::Above
    } else {
        BoundClass::Within
    };
    let lo = m_hat - 2.0 * stderr;
    let hi = m_hat + 2.0 * stderr;
    let mut crossed = Vec::new();
    if lo < M_MIN && hi > M_MIN {
        crossed.push("m_min");
    }
    if lo < M_MAX && hi > M_MAX {
        crossed.push("m_max");
    }
    let note = if crossed.is_empty() {
        format!("2-sigma interval [{lo:.4}, {hi:.4}] crosses no bound")
    } else {
        format!("2-sigma interval [{lo:.4}, {hi:.4}] crosses {}", crossed.join(" and "))
    };
    BoundCheck { class, note }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Line {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub r2: f64,
}

/// Ordinary least squares. `None` when all abscissae coincide.
pub(crate) fn least_squares(xy: &[(f64, f64)]) -> Option<Line> {
    let n = xy.len() as f64;
    if xy.len() < 2 {
        return None;
    }
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = xy.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xy.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let slope_stderr = if xy.len() > 2 {
        (ssr / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    let r2 = if syy > 0.0 { 1.0 - ssr / syy } else { 1.0 };
    Some(Line {
        slope,
        intercept,
        slope_stderr,
        r2,
    })
}

fn count_distinct(sorted: &[f64]) -> usize {
    let mut n = 0;
    let mut last = None;
    for &x in sorted {
        if last != Some(x) {
            n += 1;
            last = Some(x);
        }
    }
    n
}

fn discrete_note(distinct: usize) -> String {
    format!("tail support has only {distinct} distinct values; continuous estimator applied to discrete data")
}
