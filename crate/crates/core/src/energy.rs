//! Elastic energy `½∫|κ⃗|² ds`, the length penalty and their L²(ds) gradients.
//!
//! The gradient is the strong form `∇_s²κ⃗ + ½|κ⃗|²κ⃗ − λκ⃗` evaluated with
//! the arc-length stencils, not the exact gradient of the discrete energy;
//! the two agree to discretization accuracy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{curvature, dot, integrate_ds, edge_lengths, CurveJets, DiscreteCurve, NormalField, VectorField};

/// Smallest N for which the fourth-order gradient stencils are trusted.
pub const MIN_EDGES_GRADIENT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub bending: f64,
    pub length: f64,
    pub lambda: f64,
    pub total: f64,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Precondition(format!("penalty weight must be finite and ≥ 0, got {lambda}")));
    }
    Ok(())
}

/// `½ ∫ |κ⃗|² ds`, see [`integrate_ds`].
pub fn bending_energy(curve: &DiscreteCurve) -> f64 {
    let k = curvature(curve);
    let density: Vec<f64> = (0..curve.n_nodes()).map(|j| dot(k.get(j), k.get(j))).collect();
    0.5 * integrate_ds(curve, &density)
}

pub fn total_energy(curve: &DiscreteCurve, lambda: f64) -> Result<EnergyReport> {
    check_lambda(lambda)?;
    let bending = bending_energy(curve);
    let length = edge_lengths(curve).total;
    Ok(EnergyReport { bending, length, lambda, total: bending + lambda * length })
}

/// The L²(ds) gradient from precomputed jets (position order ≥ 4).
pub fn gradient_from_jets(jets: &CurveJets, lambda: f64) -> VectorField {
    let dim = jets.dim();
    let nk = jets.nabla_powers(&jets.curvature, 2);
    let mut values = vec![0.0; jets.n_nodes() * dim];
    for j in 0..jets.n_nodes() {
        let k = jets.curvature.at(j, 0);
        let k2 = dot(k, k);
        let lap = nk[2].at(j, 0);
        for c in 0..dim {
            values[j * dim + c] = lap[c] + (0.5 * k2 - lambda) * k[c];
        }
    }
    VectorField::new(dim, values)
}

fn check_gradient_size(curve: &DiscreteCurve) -> Result<()> {
    if curve.n_edges() < MIN_EDGES_GRADIENT {
        return Err(Error::Stencil(format!(
            "gradient needs N ≥ {MIN_EDGES_GRADIENT}, curve has N = {}",
            curve.n_edges()
        )));
    }
    Ok(())
}

/// `∇_{L²} 𝓔_λ = ∇_s²κ⃗ + ½|κ⃗|²κ⃗ − λκ⃗` at every node. End values use
/// one-sided stencils; the flow replaces them by its boundary rows.
pub fn gradient_full(curve: &DiscreteCurve, lambda: f64) -> Result<VectorField> {
    check_lambda(lambda)?;
    check_gradient_size(curve)?;
    let jets = CurveJets::new(curve, 4)?;
    Ok(gradient_from_jets(&jets, lambda))
}

/// The gradient with its component along the base tangent removed.
pub fn gradient_normal_projected(curve: &DiscreteCurve, base: &DiscreteCurve, lambda: f64) -> Result<NormalField> {
    if curve.n_nodes() != base.n_nodes() || curve.dim() != base.dim() {
        return Err(Error::DimensionMismatch(format!(
            "curve has {}x{} nodes, base has {}x{}",
            curve.n_nodes(),
            curve.dim(),
            base.n_nodes(),
            base.dim()
        )));
    }
    Ok(NormalField::project(gradient_full(curve, lambda)?, base))
}

/// Indices of the nodes not pinned by the clamped boundary rows.
pub fn interior_nodes(curve: &DiscreteCurve) -> std::ops::Range<usize> {
    2..curve.n_nodes() - 2
}

/// Sup-norm of the gradient over the interior nodes `2..=N−2`.
pub fn elastica_residual(curve: &DiscreteCurve, lambda: f64) -> Result<f64> {
    let g = gradient_full(curve, lambda)?;
    Ok(residual_of(curve, &g))
}

pub(crate) fn residual_of(curve: &DiscreteCurve, g: &VectorField) -> f64 {
    interior_nodes(curve)
        .map(|j| dot(g.get(j), g.get(j)).sqrt())
        .fold(0.0, f64::max)
}
