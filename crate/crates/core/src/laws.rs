//! Closed-form scaling laws and the exponent-fitting oracle.
//!
//! Every law is a unit-constant order-of-growth form. Simulation results are
//! compared against these through fitted exponents only.

use crate::error::invalid;
use crate::topology::Dim;
use crate::Result;

/// Per-flow capacity with uniformly random pairings: `n^(-1/2)` in the plane,
/// `n^(-1/3)` in space.
pub fn law_unicast(n: usize, dim: Dim) -> f64 {
    let n = n as f64;
    match dim {
        Dim::Two => 1.0 / n.sqrt(),
        Dim::Three => 1.0 / n.cbrt(),
    }
}

/// Every node sending to one common destination: `1/n`.
pub fn law_receiver_bottleneck(n: usize) -> f64 {
    1.0 / n as f64
}

/// `min(1, B / (f n))`.
pub fn law_topological_bottleneck(n: usize, bridges: usize, fraction: f64) -> Result<f64> {
    if bridges == 0 {
        return Err(invalid("bridge count must be at least 1"));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(invalid("crossing fraction must lie in (0, 1]"));
    }
    Ok((bridges as f64 / (fraction * n as f64)).min(1.0))
}

/// `n^(-(1+g)/2)`.
pub fn law_cluster(n: usize, g: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&g) {
        return Err(invalid(format!("g = {g} outside [0, 1]")));
    }
    // The endpoints go through the dedicated laws so the limiting cases are
    // bit-for-bit equal rather than equal up to powf rounding.
    Ok(if g == 0.0 {
        law_unicast(n, Dim::Two)
    } else if g == 1.0 {
        law_receiver_bottleneck(n)
    } else {
        (n as f64).powf(-(1.0 + g) / 2.0)
    })
}

fn check_p(p: f64) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(invalid(format!("erasure probability {p} outside [0, 1)")));
    }
    Ok(())
}

/// `n^(-1/2) (1-p)^(C sqrt(n))`.
pub fn law_e2e_erasure(n: usize, p: f64, c: f64) -> Result<f64> {
    check_p(p)?;
    if !(c > 0.0) {
        return Err(invalid("hop constant C must be positive"));
    }
    let root = (n as f64).sqrt();
    Ok((c * root * (-p).ln_1p()).exp() / root)
}

/// `(1-p) n^(-1/2)`.
pub fn law_hop_by_hop(n: usize, p: f64) -> Result<f64> {
    check_p(p)?;
    Ok((1.0 - p) * law_unicast(n, Dim::Two))
}

/// Channel states to track (`n^2`) per parallel communication (`n`).
pub fn csi_overhead_ratio(n: usize) -> f64 {
    let n = n as f64;
    n * n / n
}

/// A labelled set of `(n, value)` samples.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalingSeries {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl ScalingSeries {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            points: Vec::new(),
        }
    }

    pub fn push(&mut self, n: f64, value: f64) {
        self.points.push((n, value));
    }

    pub fn from_fn(label: impl Into<String>, ns: &[usize], f: impl Fn(usize) -> f64) -> Self {
        Self {
            label: label.into(),
            points: ns.iter().map(|&n| (n as f64, f(n))).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExponentFit {
    pub exponent: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub r_squared: f64,
}

/// Ordinary least squares of `ln value` on `ln n`.
pub fn fit_exponent(series: &ScalingSeries) -> Result<ExponentFit> {
    validate(series, true)?;
    let xs: Vec<f64> = series.points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = series.points.iter().map(|p| p.1.ln()).collect();
    Ok(ols(&xs, &ys))
}

/// Ordinary least squares of `ln value` on `x` (not logged). The slope is the
/// per-unit exponential rate, `ln(1-p)` for a `(1-p)^x` series.
pub fn fit_log_linear(series: &ScalingSeries) -> Result<ExponentFit> {
    validate(series, true)?;
    let xs: Vec<f64> = series.points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = series.points.iter().map(|p| p.1.ln()).collect();
    Ok(ols(&xs, &ys))
}

/// Ordinary least squares of `value` on `x`, both unlogged. Values may be
/// any finite number.
pub fn fit_linear(series: &ScalingSeries) -> Result<ExponentFit> {
    validate(series, false)?;
    let xs: Vec<f64> = series.points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = series.points.iter().map(|p| p.1).collect();
    Ok(ols(&xs, &ys))
}

fn validate(series: &ScalingSeries, positive: bool) -> Result<()> {
    let pts = &series.points;
    if pts.len() < 3 {
        return Err(invalid(format!(
            "series '{}' has {} points, need at least 3",
            series.label,
            pts.len()
        )));
    }
    let mut xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    if xs.windows(2).any(|w| w[0] == w[1]) {
        return Err(invalid(format!("series '{}' repeats an x value", series.label)));
    }
    for &(x, y) in pts {
        if !x.is_finite() || !y.is_finite() || (positive && (x <= 0.0 || y <= 0.0)) {
            return Err(invalid(format!(
                "series '{}' has an unusable point ({x}, {y})",
                series.label
            )));
        }
    }
    Ok(())
}

fn ols(xs: &[f64], ys: &[f64]) -> ExponentFit {
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let stderr = (sse / (m - 2.0) / sxx).sqrt();
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (1.0 - sse / syy).clamp(0.0, 1.0)
    };
    ExponentFit {
        exponent: slope,
        intercept,
        stderr,
        r_squared,
    }
}
