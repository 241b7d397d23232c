//! Łojasiewicz–Simon measurements on flow traces: the ratio
//! `|𝓔_λ − 𝓔_λ(f_∞)|^{1−θ} / ‖∇𝓔_λ‖`, a fitted exponent θ, and the
//! exponential versus polynomial decay of distances to the limit.

use std::path::PathBuf;

use serde::Serialize;

use crate::energy::EnergyReport;
use crate::error::{Error, Result};
use crate::flow::FlowTrace;

/// Gradient norms below this are treated as exact equilibria and skipped.
pub const GRAD_FLOOR: f64 = 1e-14;
/// Slack allowed below the energy floor before the trace is rejected.
pub const FLOOR_SLACK: f64 = 1e-12;
/// The θ fit uses samples whose energy gap lies in `[LOW, HIGH]` times the
/// initial gap.
pub const WINDOW_HIGH: f64 = 1e-2;
pub const WINDOW_LOW: f64 = 1e-10;
/// Fewest samples either fit accepts.
pub const MIN_SAMPLES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioSeries {
    /// Trace sample of each ratio.
    pub samples: Vec<usize>,
    pub ratios: Vec<f64>,
    /// Samples skipped because their gradient norm was below [`GRAD_FLOOR`].
    pub excluded: usize,
}

/// `|𝓔_λ − floor|^{1−θ} / ‖∇𝓔_λ‖` at every sample with a nonzero gradient.
pub fn ls_ratio_series(trace: &FlowTrace, limit: &EnergyReport, theta: f64) -> Result<RatioSeries> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Precondition(format!("theta must lie in (0, 1), got {theta}")));
    }
    check_floor(trace, limit)?;
    let mut out = RatioSeries { samples: Vec::new(), ratios: Vec::new(), excluded: 0 };
    for (k, (e, g)) in trace.energies.iter().zip(&trace.grad_norms).enumerate() {
        if *g < GRAD_FLOOR {
            out.excluded += 1;
            continue;
        }
        let gap = (e.total - limit.total).max(0.0);
        out.samples.push(k);
        out.ratios.push(gap.powf(1.0 - theta) / g);
    }
    Ok(out)
}

fn check_floor(trace: &FlowTrace, limit: &EnergyReport) -> Result<()> {
    if let Some((k, e)) = trace.energies.iter().enumerate().find(|(_, e)| e.total < limit.total - FLOOR_SLACK) {
        return Err(Error::Floor(format!("sample {k} has energy {:e} below the floor {:e}", e.total, limit.total)));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LSEstimate {
    pub theta: f64,
    /// Geometric mean of the ratio series over the window at the reported θ,
    /// or its largest value when θ was clamped (the ratio then drifts across
    /// the window and only its maximum makes the inequality hold).
    pub c1: f64,
    /// First and last trace sample of the fit window.
    pub window: (usize, usize),
    /// Number of samples inside the window that were fitted.
    pub samples: usize,
    pub r_squared: f64,
    pub energy_floor: f64,
    /// The fitted θ exceeded ½ and was lowered to ½.
    pub clamped: bool,
}

/// Least-squares line `y = a + b x`; returns `(a, b, r², residual sum)`.
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(u, v)| (u - mx) * (v - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let sse: f64 = x.iter().zip(y).map(|(u, v)| (v - a - b * u).powi(2)).sum();
    let r2 = if syy > 0.0 { (1.0 - sse / syy).clamp(0.0, 1.0) } else { 1.0 };
    (a, b, r2, sse)
}

/// Fits `log ‖∇𝓔_λ‖ = a + (1 − θ) log(𝓔_λ − floor)` over the trailing
/// window where the gap has fallen to `[10⁻¹⁰, 10⁻²]` of its initial value.
pub fn estimate_theta(trace: &FlowTrace, limit: &EnergyReport) -> Result<LSEstimate> {
    check_floor(trace, limit)?;
    let gap0 = trace.energies.first().map_or(0.0, |e| e.total - limit.total);
    if !(gap0 > 0.0) {
        return Err(Error::InsufficientData("initial energy is at the floor".into()));
    }
    let (lo, hi) = (WINDOW_LOW * gap0, WINDOW_HIGH * gap0);
    let mut idx = Vec::new();
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (k, (e, g)) in trace.energies.iter().zip(&trace.grad_norms).enumerate() {
        let gap = e.total - limit.total;
        if gap >= lo && gap <= hi && *g >= GRAD_FLOOR {
            idx.push(k);
            x.push(gap.ln());
            y.push(g.ln());
        }
    }
    if idx.len() < MIN_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "{} samples with energy gap in [{lo:e}, {hi:e}], need {MIN_SAMPLES}",
            idx.len()
        )));
    }
    if x.iter().all(|v| *v == x[0]) {
        return Err(Error::InsufficientData("energy gap is constant over the window".into()));
    }
    let (_, slope, r_squared, _) = linear_fit(&x, &y);
    let fitted = 1.0 - slope;
    if !(fitted > 0.0 && fitted < 1.0) {
        return Err(Error::InsufficientData(format!("fitted exponent {fitted} outside (0, 1)")));
    }
    let clamped = fitted > 0.5;
    let theta = fitted.min(0.5);
    let log_ratios = x.iter().zip(&y).map(|(gx, gy)| (1.0 - theta) * gx - gy);
    let log_c1 = if clamped {
        log_ratios.fold(f64::NEG_INFINITY, f64::max)
    } else {
        log_ratios.sum::<f64>() / x.len() as f64
    };
    Ok(LSEstimate {
        theta,
        c1: log_c1.exp(),
        window: (idx[0], idx[idx.len() - 1]),
        samples: idx.len(),
        r_squared,
        energy_floor: limit.total,
        clamped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateKind {
    /// `A e^{−ct}`
    Exponential,
    /// `A t^{−α}`
    Polynomial,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub kind: RateKind,
    /// `c` or `α` of the selected model.
    pub c_or_alpha: f64,
    pub prefactor: f64,
    pub r_squared: f64,
    pub r_squared_exponential: f64,
    pub r_squared_polynomial: f64,
    /// First and last input sample used.
    pub window: (usize, usize),
}

/// Chooses between `A e^{−ct}` and `A t^{−α}` by the residual of the
/// log-linear and log-log least-squares fits. Samples with `t ≤ 0` or a
/// non-positive distance are skipped.
pub fn fit_rate(times: &[f64], distances: &[f64]) -> Result<RateFit> {
    if times.len() != distances.len() {
        return Err(Error::DimensionMismatch(format!("{} times, {} distances", times.len(), distances.len())));
    }
    let idx: Vec<usize> = (0..times.len())
        .filter(|&k| times[k] > 0.0 && distances[k] > 0.0 && times[k].is_finite() && distances[k].is_finite())
        .collect();
    if idx.len() < MIN_SAMPLES {
        return Err(Error::InsufficientData(format!("{} usable samples, need {MIN_SAMPLES}", idx.len())));
    }
    let t: Vec<f64> = idx.iter().map(|&k| times[k]).collect();
    let lt: Vec<f64> = t.iter().map(|v| v.ln()).collect();
    let ld: Vec<f64> = idx.iter().map(|&k| distances[k].ln()).collect();
    if ld.iter().all(|v| (v - ld[0]).abs() < 1e-12) {
        return Err(Error::InsufficientData("distances do not change".into()));
    }
    let (ae, be, r2e, sse_e) = linear_fit(&t, &ld);
    let (ap, bp, r2p, sse_p) = linear_fit(&lt, &ld);
    let (kind, a, b, r2) = if sse_e <= sse_p {
        (RateKind::Exponential, ae, be, r2e)
    } else {
        (RateKind::Polynomial, ap, bp, r2p)
    };
    if !(b < 0.0) {
        return Err(Error::InsufficientData(format!("distances do not decay (slope {b})")));
    }
    Ok(RateFit {
        kind,
        c_or_alpha: -b,
        prefactor: a.exp(),
        r_squared: r2,
        r_squared_exponential: r2e,
        r_squared_polynomial: r2p,
        window: (idx[0], idx[idx.len() - 1]),
    })
}

/// `∫_{t_k}^{t_last} ‖∂_t f‖ dτ` at every sample, by the trapezoid rule over
/// the recorded speeds.
pub fn velocity_integral(trace: &FlowTrace) -> Vec<f64> {
    let n = trace.len();
    let mut tail = vec![0.0; n];
    for k in (0..n.saturating_sub(1)).rev() {
        let dt = trace.times[k + 1] - trace.times[k];
        tail[k] = tail[k + 1] + 0.5 * dt * (trace.velocity_norms[k] + trace.velocity_norms[k + 1]);
    }
    tail
}

/// Everything `diagnose` reports about one trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnoseReport {
    pub trace: PathBuf,
    pub samples: usize,
    pub ls: LSEstimate,
    /// Ratio series at the fitted θ over the fit window.
    pub ratio_max: f64,
    pub ratio_min: f64,
    pub excluded: usize,
    /// Decay of the graph distance to the final snapshot, when snapshots
    /// were available.
    pub rate: Option<RateFit>,
}

impl DiagnoseReport {
    /// The LS estimate with the final sample as floor, plus a rate fit of
    /// `(times, distances)` when given.
    pub fn build(trace_path: PathBuf, trace: &FlowTrace, distances: Option<(&[f64], &[f64])>) -> Result<Self> {
        let limit = *trace.energies.last().ok_or_else(|| Error::InsufficientData("empty trace".into()))?;
        let ls = estimate_theta(trace, &limit)?;
        let series = ls_ratio_series(trace, &limit, ls.theta)?;
        let window: Vec<f64> = series
            .samples
            .iter()
            .zip(&series.ratios)
            .filter(|(k, _)| **k >= ls.window.0 && **k <= ls.window.1)
            .map(|(_, r)| *r)
            .collect();
        let rate = distances.map(|(t, d)| fit_rate(t, d)).transpose()?;
        Ok(DiagnoseReport {
            trace: trace_path,
            samples: trace.len(),
            ratio_max: window.iter().copied().fold(0.0, f64::max),
            ratio_min: window.iter().copied().fold(f64::INFINITY, f64::min),
            excluded: series.excluded,
            ls,
            rate,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
