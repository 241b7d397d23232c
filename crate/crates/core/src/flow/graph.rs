//! The flow written as a normal graph over a fixed reference curve:
//! `f̃ = f_ref + Σ φ^i N_i` with an orthonormal normal frame `N_i` of the
//! reference. The coefficients move so that the normal part of `∂_t f̃`
//! (normal to `f̃`) equals `−∇𝓔_λ(f̃)`.

use nalgebra::{DMatrix, DVector};

use super::{relative_increase, FlowConfig, FlowTrace, Recorder, Termination, DT_FLOOR, MONOTONE_TOL};
use crate::energy::{gradient_full, residual_of, total_energy};
use crate::error::{Error, Result};
use crate::geometry::{dot, norm_ds, unit_tangent, DiscreteCurve, NormalField, VectorField};
use crate::reparam::normal_frame;

/// Smallest admissible eigenvalue of the Gram matrix of the frame fields
/// projected onto the normal space of the moving curve. The unprojected
/// Gram matrix is the identity, so this bounds its condition number by 10⁴.
pub const FRAME_GRAM_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct GraphState {
    pub reference: DiscreteCurve,
    pub frame: Vec<NormalField>,
    /// Node-major, `d − 1` coefficients per node.
    pub coeffs: Vec<f64>,
}

impl GraphState {
    /// Zero graph over `reference`.
    pub fn new(reference: DiscreteCurve) -> Result<Self> {
        let frame = normal_frame(&reference)?;
        let coeffs = vec![0.0; reference.n_nodes() * frame.len()];
        Ok(GraphState { reference, frame, coeffs })
    }

    /// Graph with the given coefficients; those of the two nodes at each
    /// end must vanish.
    pub fn with_coeffs(reference: DiscreteCurve, coeffs: Vec<f64>) -> Result<Self> {
        let mut state = Self::new(reference)?;
        if coeffs.len() != state.coeffs.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} coefficients, got {}",
                state.coeffs.len(),
                coeffs.len()
            )));
        }
        let m = state.codim();
        let n = state.reference.n_nodes();
        for j in [0, 1, n - 2, n - 1] {
            if coeffs[j * m..(j + 1) * m].iter().any(|c| *c != 0.0) {
                return Err(Error::Boundary(format!("graph coefficient at clamped node {j} is nonzero")));
            }
        }
        state.coeffs = coeffs;
        Ok(state)
    }

    pub fn codim(&self) -> usize {
        self.frame.len()
    }

    /// `Σ φ^i N_i` as a field on the reference.
    pub fn displacement(&self) -> VectorField {
        let m = self.codim();
        let mut field = VectorField::zeros(self.reference.n_nodes(), self.reference.dim());
        for j in 0..self.reference.n_nodes() {
            let v = field.get_mut(j);
            for a in 0..m {
                let c = self.coeffs[j * m + a];
                for (x, e) in v.iter_mut().zip(self.frame[a].get(j)) {
                    *x += c * e;
                }
            }
        }
        field
    }

    pub fn reconstruct(&self) -> Result<DiscreteCurve> {
        self.reference.displaced(&self.displacement(), 1.0)
    }
}

/// Explicit stability bound for [`graph_step`]: `h_min⁴ / 32`.
pub fn graph_dt_bound(reference: &DiscreteCurve) -> f64 {
    let h = (0..reference.n_edges()).map(|j| reference.edge_length(j)).fold(f64::INFINITY, f64::min);
    h.powi(4) / 32.0
}

/// One explicit Euler step of the graph flow. At each node `2..=N−2` the
/// coefficient velocity `a` solves `Γ a = −(⟨N_i^⊥, ∇𝓔_λ⟩)_i` with `N_i^⊥`
/// the frame field projected normal to the current curve and `Γ` their
/// Gram matrix.
pub fn graph_step(state: &GraphState, lambda: f64, dt: f64) -> Result<GraphState> {
    let curve = state.reconstruct()?;
    let g = gradient_full(&curve, lambda)?;
    let tangent = unit_tangent(&curve);
    let m = state.codim();
    let n = curve.n_nodes();
    let mut next = state.clone();
    for j in 2..n - 2 {
        let t = tangent.get(j);
        let projected: Vec<Vec<f64>> = state
            .frame
            .iter()
            .map(|f| {
                let e = f.get(j);
                let a = dot(e, t);
                e.iter().zip(t).map(|(x, y)| x - a * y).collect()
            })
            .collect();
        let gram = DMatrix::from_fn(m, m, |a, b| dot(&projected[a], &projected[b]));
        let rhs = DVector::from_fn(m, |a, _| -dot(&projected[a], g.get(j)));
        let low = gram.clone().symmetric_eigenvalues().min();
        if low < FRAME_GRAM_FLOOR {
            return Err(Error::FrameDegeneracy(format!(
                "node {j}: projected frame Gram eigenvalue {low:e} below {FRAME_GRAM_FLOOR:e}"
            )));
        }
        let a = gram
            .cholesky()
            .ok_or_else(|| Error::FrameDegeneracy(format!("node {j}: projected frame Gram not definite")))?
            .solve(&rhs);
        for b in 0..m {
            next.coeffs[j * m + b] += dt * a[b];
        }
    }
    Ok(next)
}

/// The graph-mode run loop. Explicit steps are capped by
/// [`graph_dt_bound`]; when the frame degenerates the current curve becomes
/// the new reference.
pub(super) fn run_graph(initial: DiscreteCurve, cfg: &FlowConfig) -> Result<FlowTrace> {
    let lambda = cfg.lambda;
    let mut state = GraphState::new(initial.clone())?;
    let mut curve = initial;
    let mut e = total_energy(&curve, lambda)?;
    let mut g = gradient_full(&curve, lambda)?;
    let mut rec = Recorder::start(cfg, &curve, e, &g);
    let cap = cfg.dt.min(graph_dt_bound(&state.reference));
    let (mut t, mut dt, mut steps) = (0.0, cap, 0);
    let termination = loop {
        if residual_of(&curve, &g) < cfg.tol_stationary {
            break Termination::Stationary;
        }
        if t >= cfg.t_end * (1.0 - 1e-12) {
            break Termination::Horizon;
        }
        if steps >= cfg.max_steps {
            return Err(Error::MaxSteps(format!("{steps} graph steps reached at t = {t:e}")));
        }
        steps += 1;
        let h = dt.min(cfg.t_end - t);
        let next = match graph_step(&state, lambda, h) {
            Ok(s) => s,
            Err(Error::FrameDegeneracy(msg)) => {
                log::info!("re-anchoring graph at t = {t:e}: {msg}");
                state = GraphState::new(curve.clone())?;
                continue;
            }
            Err(err) => return Err(err),
        };
        let candidate = next.reconstruct().and_then(|c| Ok((total_energy(&c, lambda)?, c)));
        match candidate {
            Ok((e1, c)) if e1.total.is_finite() && relative_increase(e.total, e1.total) <= MONOTONE_TOL => {
                let v = VectorField::new(c.dim(), c.coords().iter().zip(curve.coords()).map(|(a, b)| (a - b) / h).collect());
                let vn = norm_ds(&curve, &v);
                t += h;
                state = next;
                curve = c;
                e = e1;
                g = gradient_full(&curve, lambda)?;
                rec.record(t, &curve, e, &g, vn, false);
            }
            _ => {
                dt *= cfg.dt_shrink;
                if dt < cap * DT_FLOOR {
                    return Err(Error::Convergence(format!("graph step size fell below {:e}", cap * DT_FLOOR)));
                }
            }
        }
    };
    Ok(rec.finish(&curve, termination))
}
