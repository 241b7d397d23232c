//! Flow parameters and the `key=value` run configuration format.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::{norm, DiscreteCurve};

/// Clamped end data: positions and unit tangent directions.
#[derive(Debug, Clone, PartialEq)]
pub struct ClampedBoundary {
    pub f_minus: Vec<f64>,
    pub f_plus: Vec<f64>,
    pub t_minus: Vec<f64>,
    pub t_plus: Vec<f64>,
}

fn unit(v: Vec<f64>, name: &str) -> Result<Vec<f64>> {
    let l = norm(&v);
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::Precondition(format!("{name} must be a nonzero finite vector")));
    }
    Ok(v.into_iter().map(|x| x / l).collect())
}

impl ClampedBoundary {
    /// Tangent directions are normalized.
    pub fn new(f_minus: Vec<f64>, f_plus: Vec<f64>, t_minus: Vec<f64>, t_plus: Vec<f64>) -> Result<Self> {
        let d = f_minus.len();
        if [f_plus.len(), t_minus.len(), t_plus.len()].iter().any(|&l| l != d) || d < 2 {
            return Err(Error::DimensionMismatch("clamp vectors must share a dimension ≥ 2".into()));
        }
        if f_minus == f_plus {
            return Err(Error::Precondition("clamped end points coincide".into()));
        }
        let t_minus = unit(t_minus, "t_minus")?;
        let t_plus = unit(t_plus, "t_plus")?;
        Ok(ClampedBoundary { f_minus, f_plus, t_minus, t_plus })
    }

    /// End points and end-edge directions of `curve`.
    pub fn from_curve(curve: &DiscreteCurve) -> Result<Self> {
        let n = curve.n_nodes();
        let diff = |a: usize, b: usize| -> Vec<f64> { curve.node(b).iter().zip(curve.node(a)).map(|(x, y)| x - y).collect() };
        Self::new(curve.node(0).to_vec(), curve.node(n - 1).to_vec(), diff(0, 1), diff(n - 2, n - 1))
    }

    pub fn dim(&self) -> usize {
        self.f_minus.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    pub lambda: f64,
    /// Initial (and largest) time step.
    pub dt: f64,
    pub t_end: f64,
    /// Interior arc-length resampling every this many accepted steps; 0 = never.
    pub reparam_every: usize,
    pub graph_mode: bool,
    /// Step reduction factor after a rejected step, in (0, 1).
    pub dt_shrink: f64,
    /// Stop once the interior residual drops below this.
    pub tol_stationary: f64,
    /// Keep a curve snapshot every this many accepted steps; 0 = first and last only.
    pub snapshot_every: usize,
    pub max_steps: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            lambda: 0.0,
            dt: 1e-4,
            t_end: 1.0,
            reparam_every: 0,
            graph_mode: false,
            dt_shrink: 0.5,
            tol_stationary: 1e-6,
            snapshot_every: 0,
            max_steps: 100_000,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Precondition(format!("flow config: {what}")));
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return bad("lambda must be finite and ≥ 0");
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad("dt must be positive");
        }
        if !(self.t_end > 0.0) {
            return bad("t_end must be positive");
        }
        if !(self.dt_shrink > 0.0 && self.dt_shrink < 1.0) {
            return bad("dt_shrink must lie in (0, 1)");
        }
        if !(self.tol_stationary > 0.0) {
            return bad("tol_stationary must be positive");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive");
        }
        Ok(())
    }
}

/// Everything a run config file can hold.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub flow: FlowConfig,
    pub out_dir: Option<PathBuf>,
    /// Expected spatial dimension of the curve, if stated.
    pub dim: Option<usize>,
    /// Clamps, if stated; otherwise taken from the initial curve.
    pub f_minus: Option<Vec<f64>>,
    pub f_plus: Option<Vec<f64>>,
    pub t_minus: Option<Vec<f64>>,
    pub t_plus: Option<Vec<f64>>,
    pub seed: Option<u64>,
}

fn parse_value<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Parse(format!("bad value for {key}: {v:?}")))
}

fn parse_vector(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|x| parse_value(key, x.trim())).collect()
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Parse(format!("bad value for {key}: {v:?}"))),
    }
}

impl RunConfig {
    /// Parses `key=value` lines; `#` starts a comment, blank lines are
    /// ignored, unknown keys are errors. Vectors are comma separated.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key=value, got {raw:?}", lineno + 1)))?;
            let (key, v) = (key.trim(), value.trim());
            let f = &mut cfg.flow;
            match key {
                "lambda" => f.lambda = parse_value(key, v)?,
                "dt" => f.dt = parse_value(key, v)?,
                "t_end" => f.t_end = parse_value(key, v)?,
                "reparam_every" => f.reparam_every = parse_value(key, v)?,
                "graph_mode" => f.graph_mode = parse_bool(key, v)?,
                "dt_shrink" => f.dt_shrink = parse_value(key, v)?,
                "tol_stationary" => f.tol_stationary = parse_value(key, v)?,
                "snapshot_every" => f.snapshot_every = parse_value(key, v)?,
                "max_steps" => f.max_steps = parse_value(key, v)?,
                "out_dir" => cfg.out_dir = Some(PathBuf::from(v)),
                "dim" => cfg.dim = Some(parse_value(key, v)?),
                "f_minus" => cfg.f_minus = Some(parse_vector(key, v)?),
                "f_plus" => cfg.f_plus = Some(parse_vector(key, v)?),
                "t_minus" => cfg.t_minus = Some(parse_vector(key, v)?),
                "t_plus" => cfg.t_plus = Some(parse_vector(key, v)?),
                "seed" => cfg.seed = Some(parse_value(key, v)?),
                _ => return Err(Error::Parse(format!("line {}: unknown key {key:?}", lineno + 1))),
            }
        }
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?)
    }

    /// The clamps for `curve`: stated values where given, the curve's own
    /// end data otherwise.
    pub fn boundary_for(&self, curve: &DiscreteCurve) -> Result<ClampedBoundary> {
        if let Some(d) = self.dim {
            if d != curve.dim() {
                return Err(Error::DimensionMismatch(format!("config says d = {d}, curve has d = {}", curve.dim())));
            }
        }
        let own = ClampedBoundary::from_curve(curve)?;
        ClampedBoundary::new(
            self.f_minus.clone().unwrap_or(own.f_minus),
            self.f_plus.clone().unwrap_or(own.f_plus),
            self.t_minus.clone().unwrap_or(own.t_minus),
            self.t_plus.clone().unwrap_or(own.t_plus),
        )
    }
}
