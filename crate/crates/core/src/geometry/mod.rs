//! Discrete differential geometry of open curves.
//!
//! Derivatives are taken in arc length on the grid of cumulative chord
//! lengths with second-order stencils (see [`stencil`]); composite
//! operators are assembled node-wise from derivative jets (see [`jet`]).

mod curve;
pub mod jet;
pub mod stencil;

pub use curve::{
    format_sig17, parse_curve_csv, DiscreteCurve, NormalField, VectorField, MIN_EDGES,
    NORMALITY_TOL, SMOOTH_NORMALITY_TOL,
};
pub(crate) use curve::{dot, norm};

use crate::error::{Error, Result};
use jet::Jet;
use stencil::ArcStencils;

/// Edge lengths `|f_{j+1} − f_j|` and their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeLengths {
    pub edges: Vec<f64>,
    pub total: f64,
}

pub fn edge_lengths(curve: &DiscreteCurve) -> EdgeLengths {
    let edges: Vec<f64> = (0..curve.n_edges()).map(|j| curve.edge_length(j)).collect();
    let total = edges.iter().sum();
    EdgeLengths { edges, total }
}

/// Trapezoidal quadrature weights for `∫ · ds` at the nodes, on the
/// curvature-corrected arc-length increments.
pub fn arc_weights(curve: &DiscreteCurve) -> Vec<f64> {
    let e = stencil::arc_increments(curve).expect("a valid curve has enough nodes");
    let n = curve.n_nodes();
    let mut w = vec![0.0; n];
    for (j, h) in e.iter().enumerate() {
        w[j] += 0.5 * h;
        w[j + 1] += 0.5 * h;
    }
    w
}

/// `∫ g ds` of nodal samples: trapezoidal rule with the per-edge slope
/// correction `−h²/12 (g'_{j+1} − g'_j)`. On a graded grid the plain rule's
/// O(h²) error does not telescope to the ends, the corrected one is O(h⁴).
pub fn integrate_ds(curve: &DiscreteCurve, density: &[f64]) -> f64 {
    let steps = stencil::arc_increments(curve).expect("a valid curve has enough nodes");
    let st = ArcStencils::from_grid(stencil::cumulative(&steps), 1).expect("a valid curve has enough nodes");
    let slope = st.apply(density, 1, 1);
    let mut acc = 0.0;
    for (j, h) in steps.iter().enumerate() {
        acc += 0.5 * h * (density[j] + density[j + 1]) - h * h / 12.0 * (slope[j + 1] - slope[j]);
    }
    acc
}

/// `⟨a, b⟩_{L²(ds)}`, see [`integrate_ds`].
pub fn inner_ds(curve: &DiscreteCurve, a: &VectorField, b: &VectorField) -> f64 {
    let g: Vec<f64> = (0..curve.n_nodes()).map(|j| dot(a.get(j), b.get(j))).collect();
    integrate_ds(curve, &g)
}

pub fn norm_ds(curve: &DiscreteCurve, a: &VectorField) -> f64 {
    inner_ds(curve, a, a).max(0.0).sqrt()
}

/// Derivative jets of a curve: position, unit tangent and curvature.
///
/// The tangent jet carries the renormalized unit tangent at value level and
/// raw higher derivatives `∂_s^{m+1} f`; the curvature is `∂_s² f`.
#[derive(Debug, Clone)]
pub struct CurveJets {
    pub stencils: ArcStencils,
    pub position: Jet,
    pub tangent: Jet,
    pub curvature: Jet,
}

impl CurveJets {
    /// Jets with position derivatives up to `order` (at least 2).
    pub fn new(curve: &DiscreteCurve, order: usize) -> Result<Self> {
        assert!(order >= 2);
        let stencils = ArcStencils::new(curve, order)?;
        Self::with_stencils(curve, stencils, order)
    }

    pub fn with_stencils(curve: &DiscreteCurve, stencils: ArcStencils, order: usize) -> Result<Self> {
        let dim = curve.dim();
        let position = Jet::from_samples(curve.coords(), dim, &stencils, order);
        let raw = position.derivative();
        let mut unit = raw.values();
        for t in unit.chunks_mut(dim) {
            let l = norm(t);
            if !(l > 0.0) {
                return Err(Error::Regularity("vanishing discrete tangent".into()));
            }
            t.iter_mut().for_each(|x| *x /= l);
        }
        let tangent = raw.with_values(&unit);
        let curvature = position.derivative().derivative();
        Ok(CurveJets { stencils, position, tangent, curvature })
    }

    pub fn dim(&self) -> usize {
        self.position.dim()
    }

    pub fn n_nodes(&self) -> usize {
        self.position.n_nodes()
    }

    /// Jet of a node-major field on this curve.
    pub fn field_jet(&self, values: &[f64], order: usize) -> Jet {
        Jet::from_samples(values, self.dim(), &self.stencils, order)
    }

    /// `[ψ, ∇_s ψ, …, ∇_s^k ψ]` as jets.
    pub fn nabla_powers(&self, psi: &Jet, k: usize) -> Vec<Jet> {
        let mut out = vec![psi.clone()];
        for i in 0..k {
            let next = out[i].nabla(&self.tangent);
            out.push(next);
        }
        out
    }
}

fn jet_field(jet: &Jet, m: usize) -> VectorField {
    VectorField::new(jet.dim(), jet.component(m))
}

fn check_field(curve: &DiscreteCurve, field: &VectorField) -> Result<()> {
    if field.dim() != curve.dim() || field.n_nodes() != curve.n_nodes() {
        return Err(Error::DimensionMismatch(format!(
            "field has {}x{} values, curve has {}x{}",
            field.n_nodes(),
            field.dim(),
            curve.n_nodes(),
            curve.dim()
        )));
    }
    Ok(())
}

/// Unit tangent `∂_s f`, renormalized at every node.
pub fn unit_tangent(curve: &DiscreteCurve) -> VectorField {
    // Two nodes per stencil side always exist (N ≥ 8).
    let jets = CurveJets::new(curve, 2).expect("regular curve has nonzero tangents");
    jet_field(&jets.tangent, 0)
}

/// Curvature vector `κ⃗ = ∂_s ∂_s f`.
pub fn curvature(curve: &DiscreteCurve) -> VectorField {
    let jets = CurveJets::new(curve, 2).expect("regular curve has nonzero tangents");
    jet_field(&jets.curvature, 0)
}

/// Plain arc-length derivative `∂_s^order` of a field.
pub fn arc_derivative(field: &VectorField, curve: &DiscreteCurve, order: usize) -> Result<VectorField> {
    check_field(curve, field)?;
    if order == 0 {
        return Ok(field.clone());
    }
    let st = ArcStencils::new(curve, order)?;
    Ok(VectorField::new(field.dim(), st.apply(field.values(), field.dim(), order)))
}

fn check_nabla_order(curve: &DiscreteCurve, order: usize) -> Result<()> {
    if !(1..=4).contains(&order) {
        return Err(Error::Stencil(format!("order {order} outside 1..=4")));
    }
    if curve.n_edges() < 2 * order + 4 {
        return Err(Error::Stencil(format!(
            "order {order} needs N ≥ {}, curve has N = {}",
            2 * order + 4,
            curve.n_edges()
        )));
    }
    Ok(())
}

/// Iterated normal connection `∇_s^order φ`, `order ∈ 1..=4`.
pub fn nabla_s(field: &VectorField, curve: &DiscreteCurve, order: usize) -> Result<VectorField> {
    check_field(curve, field)?;
    check_nabla_order(curve, order)?;
    let jets = CurveJets::new(curve, order.max(2))?;
    let psi = jets.field_jet(field.values(), order);
    let pw = jets.nabla_powers(&psi, order);
    Ok(jet_field(&pw[order], 0))
}

/// Right-hand side of the frame identities expressing `∂_s^k φ` of a normal
/// field through `∇_s^j φ`, `κ⃗`, its derivatives and `∂_s f`, `k ∈ 1..=4`.
pub fn normal_derivative_expansion(curve: &DiscreteCurve, phi: &NormalField, order: usize) -> Result<VectorField> {
    check_field(curve, phi)?;
    check_nabla_order(curve, order)?;
    let k = order;
    let jets = CurveJets::new(curve, (k + 1).max(2))?;
    let dim = curve.dim();
    let pj = jets.field_jet(phi.values(), k);
    let np = jets.nabla_powers(&pj, k);
    // ∇^i κ up to i = k − 1
    let nk = jets.nabla_powers(&jets.curvature, k - 1);
    let mut out = VectorField::zeros(curve.n_nodes(), dim);
    for j in 0..curve.n_nodes() {
        let tau = jets.tangent.at(j, 0);
        let kap = jets.curvature.at(j, 0);
        let phi_v = np[0].at(j, 0);
        let d = |i: usize| np[i].at(j, 0);
        let dk = |i: usize| nk[i].at(j, 0);
        let dkap = |m: usize| jets.curvature.at(j, m);
        let mut terms: Vec<(f64, &[f64])> = vec![(1.0, d(k))];
        match k {
            1 => {
                terms.push((-dot(phi_v, kap), tau));
            }
            2 => {
                terms.push((-2.0 * dot(d(1), kap) - dot(phi_v, dk(1)), tau));
                terms.push((-dot(phi_v, kap), kap));
            }
            3 => {
                let t = -3.0 * dot(d(2), kap) - 3.0 * dot(d(1), dk(1)) - dot(phi_v, dk(2));
                terms.push((t, tau));
                terms.push((-3.0 * dot(d(1), kap) - 2.0 * dot(phi_v, dk(1)), kap));
                terms.push((-dot(phi_v, kap), dkap(1)));
            }
            _ => {
                let t = -4.0 * dot(d(3), kap)
                    - 6.0 * dot(d(2), dk(1))
                    - 4.0 * dot(d(1), dk(2))
                    - dot(phi_v, dk(3));
                terms.push((t, tau));
                let c = -6.0 * dot(d(2), kap) - 8.0 * dot(d(1), dk(1)) - 3.0 * dot(phi_v, dk(2));
                terms.push((c, kap));
                terms.push((-4.0 * dot(d(1), kap) - 3.0 * dot(phi_v, dk(1)), dkap(1)));
                terms.push((-dot(phi_v, kap), dkap(2)));
            }
        }
        let o = out.get_mut(j);
        for (c, v) in terms {
            for (oi, vi) in o.iter_mut().zip(v) {
                *oi += c * vi;
            }
        }
    }
    Ok(out)
}
