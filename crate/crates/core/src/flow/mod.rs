//! The clamped L²-gradient flow `∂_t f = −∇_s²κ⃗ − ½|κ⃗|²κ⃗ + λκ⃗`.
//!
//! A step freezes the leading fourth-order part as a symmetric banded
//! operator `A = Lᵀ diag(ĥ⁻⁴) L` (L the second difference, ĥ the local arc
//! spacing) and solves `(I + dt A) Δf = −dt ∇𝓔_λ(f)` on the nodes `2..=N−2`.
//! The end nodes and their neighbours are pinned, so each end edge keeps
//! its length and its clamp direction.
//! Steps that raise the energy are rejected and retried with a smaller step.

mod config;
mod graph;
mod trace;

pub use config::{ClampedBoundary, FlowConfig, RunConfig};
pub use graph::{graph_dt_bound, graph_step, GraphState, FRAME_GRAM_FLOOR};
pub use trace::{
    lyapunov_check, relative_increase, FlowTrace, LyapunovReport, Snapshot, Termination, ENERGY_FLOOR,
    MONOTONE_TOL, MONOTONE_TOL_RESAMPLED, TRACE_HEADER,
};

use crate::banded::BandedLdl;
use crate::energy::{gradient_full, residual_of, total_energy, EnergyReport};
use crate::error::{Error, Result};
use crate::geometry::{dot, norm, norm_ds, stencil, DiscreteCurve, VectorField};
use crate::reparam::arclength_resample_interior;

/// Largest angle (radians) between an end edge and its clamp tangent that
/// the initial curve may have; the first step aligns the edge exactly.
pub const CLAMP_TANGENT_TOL: f64 = 0.05;
/// Smallest step relative to the configured one before a run gives up.
pub const DT_FLOOR: f64 = 1e-6;
/// Accepted steps in a row before the step grows back.
const REGROW_AFTER: usize = 5;

/// Puts nodes 1 and N−1 on the clamp rays, keeping the end edge lengths.
fn align_ends(mut coords: Vec<f64>, d: usize, bc: &ClampedBoundary) -> Result<DiscreteCurve> {
    let n = coords.len() / d;
    for (end, next, tangent, sign) in [(0, 1, &bc.t_minus, 1.0), (n - 1, n - 2, &bc.t_plus, -1.0)] {
        let edge: Vec<f64> = (0..d).map(|c| coords[next * d + c] - coords[end * d + c]).collect();
        let h = norm(&edge);
        for c in 0..d {
            coords[next * d + c] = coords[end * d + c] + sign * h * tangent[c];
        }
    }
    DiscreteCurve::new(d, coords)
}

/// Checks the clamp preconditions and returns the curve with its end nodes
/// set to the clamp positions and the end edges turned onto the clamp
/// tangents.
pub fn clamp_to(curve: &DiscreteCurve, bc: &ClampedBoundary) -> Result<DiscreteCurve> {
    if curve.dim() != bc.dim() {
        return Err(Error::DimensionMismatch(format!("curve has d = {}, clamps have d = {}", curve.dim(), bc.dim())));
    }
    let n = curve.n_nodes();
    let d = curve.dim();
    let scale = 1.0 + norm(&bc.f_minus).max(norm(&bc.f_plus));
    let mut coords = curve.coords().to_vec();
    for (node, next, target, t) in [(0, 1, &bc.f_minus, &bc.t_minus), (n - 1, n - 2, &bc.f_plus, &bc.t_plus)] {
        let p = curve.node(node);
        let gap: Vec<f64> = p.iter().zip(target.iter()).map(|(a, b)| a - b).collect();
        if norm(&gap) > 1e-12 * scale {
            return Err(Error::Precondition(format!("node {node} is not at its clamp position")));
        }
        let edge: Vec<f64> = curve.node(next).iter().zip(p).map(|(a, b)| a - b).collect();
        let sign = if node == 0 { 1.0 } else { -1.0 };
        let cos = sign * dot(&edge, t) / norm(&edge);
        if cos < CLAMP_TANGENT_TOL.cos() {
            return Err(Error::Precondition(format!(
                "tangent at node {node} is {:.3e} rad off its clamp tangent",
                cos.clamp(-1.0, 1.0).acos()
            )));
        }
        coords[node * d..(node + 1) * d].copy_from_slice(target);
    }
    align_ends(coords, d, bc)
}

/// `‖∇𝓔_λ‖_{L²(ds)}` with the clamp rows left out.
pub fn interior_gradient_norm(curve: &DiscreteCurve, g: &VectorField) -> f64 {
    let n = curve.n_nodes();
    let mut inner = g.clone();
    for j in [0, 1, n - 2, n - 1] {
        inner.get_mut(j).iter_mut().for_each(|x| *x = 0.0);
    }
    norm_ds(curve, &inner)
}

/// `I + dt A` on the nodes `2..=N−2`, factored. Nodes 0, 1, N−1 and N do
/// not move.
fn implicit_matrix(curve: &DiscreteCurve, dt: f64) -> Result<BandedLdl> {
    let n = curve.n_nodes();
    let m = n - 4;
    let s = stencil::cumulative(&stencil::arc_increments(curve)?);
    // second difference centered at node i, in terms of the unknowns
    // (unknown r is node r + 2)
    let row = |i: usize| -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(4);
        let mut add = |node: usize, c: f64| {
            let r = node - 2;
            match out.iter_mut().find(|(q, _)| *q == r) {
                Some(e) => e.1 += c,
                None => out.push((r, c)),
            }
        };
        for (node, c) in [(i - 1, 1.0), (i, -2.0), (i + 1, 1.0)] {
            if node >= 2 && node <= n - 3 {
                add(node, c);
            }
        }
        out
    };
    let mut band = vec![[0.0f64; 3]; m];
    for i in 1..n - 1 {
        let h = 0.5 * (s[i + 1] - s[i - 1]);
        let weight = 1.0 / (h * h * h * h);
        let r = row(i);
        for &(u, a) in &r {
            for &(v, b) in &r {
                if u >= v {
                    band[u][u - v] += weight * a * b;
                }
            }
        }
    }
    BandedLdl::factor(m, 2, |r, k| dt * band[r][k] + if k == 0 { 1.0 } else { 0.0 })
}

/// Outcome of one step attempt.
#[derive(Debug, Clone)]
pub struct StepResult {
    /// The advanced curve, or the (clamp-aligned) input when rejected.
    pub curve: DiscreteCurve,
    pub accepted: bool,
    /// The step taken when accepted; the reduced step to retry with otherwise.
    pub dt_used: f64,
    pub energy: EnergyReport,
    /// `‖Δf/dt‖_{L²(ds)}` of the attempted update.
    pub velocity_norm: f64,
}

fn attempt(
    curve: &DiscreteCurve,
    e0: EnergyReport,
    g: &VectorField,
    lambda: f64,
    dt: f64,
    shrink: f64,
) -> StepResult {
    let rejected = |v: f64| StepResult { curve: curve.clone(), accepted: false, dt_used: dt * shrink, energy: e0, velocity_norm: v };
    let n = curve.n_nodes();
    let d = curve.dim();
    let Ok(system) = implicit_matrix(curve, dt) else {
        return rejected(f64::NAN);
    };
    let mut delta = vec![0.0; n * d];
    let mut rhs = vec![0.0; n - 4];
    for c in 0..d {
        for (r, x) in rhs.iter_mut().enumerate() {
            *x = -dt * g.get(r + 2)[c];
        }
        system.solve(&mut rhs);
        for (r, x) in rhs.iter().enumerate() {
            delta[(r + 2) * d + c] = *x;
        }
    }
    let coords: Vec<f64> = curve.coords().iter().zip(&delta).map(|(x, y)| x + y).collect();
    let Ok(next) = DiscreteCurve::new(d, coords) else {
        return rejected(f64::NAN);
    };
    let velocity =
        VectorField::new(d, next.coords().iter().zip(curve.coords()).map(|(a, b)| (a - b) / dt).collect());
    let v = norm_ds(curve, &velocity);
    let Ok(e1) = total_energy(&next, lambda) else {
        return rejected(v);
    };
    if !e1.total.is_finite() || relative_increase(e0.total, e1.total) > MONOTONE_TOL {
        return rejected(v);
    }
    StepResult { curve: next, accepted: true, dt_used: dt, energy: e1, velocity_norm: v }
}

/// One linearly implicit step of size `cfg.dt`. The curve is first aligned
/// with the clamps (see [`clamp_to`]).
pub fn step(curve: &DiscreteCurve, bc: &ClampedBoundary, cfg: &FlowConfig) -> Result<StepResult> {
    cfg.validate()?;
    let start = clamp_to(curve, bc)?;
    let e0 = total_energy(&start, cfg.lambda)?;
    let g = gradient_full(&start, cfg.lambda)?;
    Ok(attempt(&start, e0, &g, cfg.lambda, cfg.dt, cfg.dt_shrink))
}

/// Mutable bookkeeping shared by the parametric and graph runs.
pub(crate) struct Recorder<'a> {
    pub cfg: &'a FlowConfig,
    pub trace: FlowTrace,
    pub accepted: usize,
}

impl<'a> Recorder<'a> {
    pub fn start(cfg: &'a FlowConfig, curve: &DiscreteCurve, e: EnergyReport, g: &VectorField) -> Self {
        let mut trace = FlowTrace::new();
        let gn = interior_gradient_norm(curve, g);
        trace.push(0.0, e, gn, gn, false);
        trace.snapshots.push(Snapshot { sample: 0, time: 0.0, curve: curve.clone() });
        Recorder { cfg, trace, accepted: 0 }
    }

    pub fn record(&mut self, t: f64, curve: &DiscreteCurve, e: EnergyReport, g: &VectorField, v: f64, resampled: bool) {
        self.accepted += 1;
        self.trace.push(t, e, interior_gradient_norm(curve, g), v, resampled);
        let every = self.cfg.snapshot_every;
        if every > 0 && self.accepted.is_multiple_of(every) {
            let sample = self.trace.len() - 1;
            self.trace.snapshots.push(Snapshot { sample, time: t, curve: curve.clone() });
        }
    }

    pub fn finish(mut self, curve: &DiscreteCurve, termination: Termination) -> FlowTrace {
        let sample = self.trace.len() - 1;
        if self.trace.snapshots.last().map(|s| s.sample) != Some(sample) {
            let time = self.trace.times[sample];
            self.trace.snapshots.push(Snapshot { sample, time, curve: curve.clone() });
        }
        self.trace.termination = Some(termination);
        self.trace
    }
}

/// Integrates the flow from `initial` until the interior residual drops
/// below `cfg.tol_stationary` or `t_end` is reached.
///
/// After a rejection the step shrinks by `dt_shrink`; after a run of
/// accepted steps it grows back towards `cfg.dt`. A step below
/// `cfg.dt · DT_FLOOR` is an error.
pub fn run_flow(initial: &DiscreteCurve, bc: &ClampedBoundary, cfg: &FlowConfig) -> Result<FlowTrace> {
    cfg.validate()?;
    let curve = clamp_to(initial, bc)?;
    if cfg.graph_mode {
        return graph::run_graph(curve, cfg);
    }
    let lambda = cfg.lambda;
    let mut curve = curve;
    let mut e = total_energy(&curve, lambda)?;
    let mut g = gradient_full(&curve, lambda)?;
    let mut rec = Recorder::start(cfg, &curve, e, &g);
    let (mut t, mut dt, mut streak, mut steps) = (0.0, cfg.dt, 0, 0);
    let termination = loop {
        if residual_of(&curve, &g) < cfg.tol_stationary {
            break Termination::Stationary;
        }
        if t >= cfg.t_end * (1.0 - 1e-12) {
            break Termination::Horizon;
        }
        if steps >= cfg.max_steps {
            return Err(Error::MaxSteps(format!(
                "{steps} steps reached at t = {t:e}, residual {:e}",
                residual_of(&curve, &g)
            )));
        }
        steps += 1;
        let h = dt.min(cfg.t_end - t);
        let r = attempt(&curve, e, &g, lambda, h, cfg.dt_shrink);
        if !r.accepted {
            log::debug!("step rejected at t = {t:e}, dt = {h:e}");
            dt = r.dt_used;
            streak = 0;
            if dt < cfg.dt * DT_FLOOR {
                return Err(Error::Convergence(format!("step size fell below {:e} at t = {t:e}", cfg.dt * DT_FLOOR)));
            }
            continue;
        }
        t += h;
        curve = r.curve;
        e = r.energy;
        let resample = cfg.reparam_every > 0 && (rec.accepted + 1).is_multiple_of(cfg.reparam_every);
        if resample {
            let resampled = arclength_resample_interior(&curve)?;
            curve = align_ends(resampled.into_coords(), curve.dim(), bc)?;
            e = total_energy(&curve, lambda)?;
        }
        g = gradient_full(&curve, lambda)?;
        rec.record(t, &curve, e, &g, r.velocity_norm, resample);
        streak += 1;
        if streak >= REGROW_AFTER && dt < cfg.dt {
            dt = (dt / cfg.dt_shrink).min(cfg.dt);
            streak = 0;
        }
    };
    log::info!("flow finished ({termination}) at t = {t:e} after {steps} steps");
    Ok(rec.finish(&curve, termination))
}

#[cfg(test)]
mod tests;
