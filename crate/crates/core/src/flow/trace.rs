//! Recorded flow history and the energy-monotonicity check.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::energy::EnergyReport;
use crate::error::{Error, Result};
use crate::geometry::{format_sig17, DiscreteCurve};

/// Allowed relative energy increase between consecutive samples.
pub const MONOTONE_TOL: f64 = 1e-10;
/// The same on samples taken right after an arc-length resampling.
pub const MONOTONE_TOL_RESAMPLED: f64 = 1e-6;
/// Energies below this are compared in absolute terms, so that roundoff
/// on an energy-free straight segment does not count as an increase.
pub const ENERGY_FLOOR: f64 = 1e-12;

/// `(new − old) / max(|old|, ENERGY_FLOOR)`.
pub fn relative_increase(old: f64, new: f64) -> f64 {
    (new - old) / old.abs().max(ENERGY_FLOOR)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Interior residual fell below the tolerance.
    Stationary,
    /// Reached `t_end`.
    Horizon,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::Stationary => "stationary",
            Termination::Horizon => "horizon",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    /// Index of the trace sample this curve belongs to.
    pub sample: usize,
    pub time: f64,
    pub curve: DiscreteCurve,
}

/// Per-sample history of a run. Sample 0 is the initial curve; every later
/// sample follows an accepted step. `velocity_norms[k]` is `‖Δf/dt‖_{L²(ds)}`
/// of the step that produced sample k, and the gradient norm at k = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrace {
    pub times: Vec<f64>,
    pub energies: Vec<EnergyReport>,
    /// `‖∇𝓔_λ‖_{L²(ds)}` over the nodes not pinned by the clamps.
    pub grad_norms: Vec<f64>,
    pub velocity_norms: Vec<f64>,
    /// Whether the sample was resampled after its step.
    pub resampled: Vec<bool>,
    pub snapshots: Vec<Snapshot>,
    pub termination: Option<Termination>,
}

pub const TRACE_HEADER: &str = "t,bending,length,total,grad_norm,velocity_norm";

impl FlowTrace {
    pub fn new() -> Self {
        FlowTrace {
            times: Vec::new(),
            energies: Vec::new(),
            grad_norms: Vec::new(),
            velocity_norms: Vec::new(),
            resampled: Vec::new(),
            snapshots: Vec::new(),
            termination: None,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, t: f64, energy: EnergyReport, grad_norm: f64, velocity_norm: f64, resampled: bool) {
        self.times.push(t);
        self.energies.push(energy);
        self.grad_norms.push(grad_norm);
        self.velocity_norms.push(velocity_norm);
        self.resampled.push(resampled);
    }

    pub fn final_curve(&self) -> Option<&DiscreteCurve> {
        self.snapshots.last().map(|s| &s.curve)
    }

    /// CSV with a `# lambda=…` comment line and the columns of [`TRACE_HEADER`].
    pub fn to_csv(&self) -> String {
        let lambda = self.energies.first().map_or(0.0, |e| e.lambda);
        let mut out = format!("# lambda={}\n{TRACE_HEADER}\n", format_sig17(lambda));
        for k in 0..self.len() {
            let e = &self.energies[k];
            let row = [self.times[k], e.bending, e.length, e.total, self.grad_norms[k], self.velocity_norms[k]];
            let cells: Vec<String> = row.iter().map(|v| format_sig17(*v)).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }

    /// Reads the CSV written by [`FlowTrace::to_csv`]. Snapshots and
    /// resampling flags are not part of the file.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut trace = FlowTrace::new();
        let mut lambda = None;
        let mut header = false;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(c) = line.strip_prefix('#') {
                if let Some(v) = c.trim().strip_prefix("lambda=") {
                    lambda = Some(v.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad lambda {v:?}")))?);
                }
                continue;
            }
            if !header {
                if line.replace(' ', "") != TRACE_HEADER {
                    return Err(Error::Parse(format!("expected header {TRACE_HEADER:?}, got {line:?}")));
                }
                header = true;
                continue;
            }
            let v: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Parse(format!("line {}: not a number row", lineno + 1)))?;
            if v.len() != 6 {
                return Err(Error::Parse(format!("line {}: expected 6 columns, got {}", lineno + 1, v.len())));
            }
            let lam = lambda.unwrap_or(if v[2] != 0.0 { (v[3] - v[1]) / v[2] } else { 0.0 });
            let energy = EnergyReport { bending: v[1], length: v[2], lambda: lam, total: v[3] };
            trace.push(v[0], energy, v[4], v[5], false);
        }
        if !header {
            return Err(Error::Parse("missing trace header".into()));
        }
        Ok(trace)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?)
    }
}

impl Default for FlowTrace {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovReport {
    /// Largest relative increase `(E_k − E_{k−1}) / |E_{k−1}|`, or 0.
    pub max_increase: f64,
    /// Sample `k` where it occurred.
    pub index: Option<usize>,
    pub passed: bool,
}

/// Checks that the total energy never increases along the trace beyond
/// [`MONOTONE_TOL`] (or [`MONOTONE_TOL_RESAMPLED`] on resampled samples).
pub fn lyapunov_check(trace: &FlowTrace) -> LyapunovReport {
    let mut report = LyapunovReport { max_increase: 0.0, index: None, passed: true };
    for k in 1..trace.len() {
        let rise = relative_increase(trace.energies[k - 1].total, trace.energies[k].total);
        let tol = if trace.resampled.get(k).copied().unwrap_or(false) { MONOTONE_TOL_RESAMPLED } else { MONOTONE_TOL };
        if rise > tol {
            report.passed = false;
        }
        if rise > report.max_increase {
            report.max_increase = rise;
            report.index = Some(k);
        }
    }
    report
}
