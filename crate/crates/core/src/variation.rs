//! Second variation of the elastic energy at a base curve, the linearized
//! operator it induces on clamped normal fields, and its spectrum.
//!
//! The matrix is assembled from the second-variation form itself, which
//! keeps it symmetric with a positive leading part; the operator in strong
//! form is available separately. Coefficients live on the nodes `2..=N−2`
//! in an orthonormal normal frame, `d − 1` numbers per node. Node 0 is pinned to zero and node 1 is slaved
//! to nodes 2 and 3 so that the one-sided derivative at the end vanishes,
//! which is the discrete form of a clamped field.

use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::stencil::{stencil_widths, ArcStencils};
use crate::geometry::{arc_weights, dot, integrate_ds, norm, CurveJets, DiscreteCurve, NormalField, VectorField};
use crate::reparam::normal_frame;

/// Smallest N for which the operator is assembled.
pub const MIN_EDGES_OPERATOR: usize = 16;

fn check_field_shape(base: &DiscreteCurve, f: &VectorField) -> Result<()> {
    if f.dim() != base.dim() || f.n_nodes() != base.n_nodes() {
        return Err(Error::DimensionMismatch(format!(
            "field has {}x{} values, base has {}x{}",
            f.n_nodes(),
            f.dim(),
            base.n_nodes(),
            base.dim()
        )));
    }
    Ok(())
}

/// Clamped means zero at the end node and no linear departure from it. A
/// linear start has equal first differences and an end slope (one-sided
/// 4-point derivative in index space) equal to them; the field is rejected
/// only when both show. The difference ratio alone misreads an amplitude that
/// changes sign next to the end, the slope alone misreads starts of order ≥ 4
/// where its truncation error dominates the tiny differences.
fn check_clamped(f: &VectorField, name: &str) -> Result<()> {
    let scale = f.sup_norm();
    if scale == 0.0 {
        return Ok(());
    }
    let n = f.n_nodes();
    let diff = |a: usize, b: usize| {
        let d: Vec<f64> = f.get(a).iter().zip(f.get(b)).map(|(x, y)| x - y).collect();
        norm(&d)
    };
    for (e, step) in [(0usize, 1isize), (n - 1, -1)] {
        let at = |k: isize| (e as isize + step * k) as usize;
        let v0 = norm(f.get(e));
        if v0 > 1e-9 * scale {
            return Err(Error::Boundary(format!("{name} does not vanish at node {e}: |value| = {v0:e}")));
        }
        let slope: Vec<f64> = (0..f.dim())
            .map(|c| (-11.0 * f.get(at(0))[c] + 18.0 * f.get(at(1))[c] - 9.0 * f.get(at(2))[c] + 2.0 * f.get(at(3))[c]) / 6.0)
            .collect();
        let slope = norm(&slope);
        let (d1, d2, d3) = (diff(at(1), at(0)), diff(at(2), at(1)), diff(at(3), at(2)));
        let reference = d1.max(d2).max(d3);
        let tiny = 1e-12 * scale;
        if d1 > 0.5 * d2 + tiny && slope > 0.5 * reference + tiny {
            return Err(Error::Boundary(format!(
                "{name} leaves node {e} with nonzero slope: end slope {slope:e} per node, first differences up to {reference:e}"
            )));
        }
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::Precondition(format!("penalty weight must be finite and ≥ 0, got {lambda}")));
    }
    Ok(())
}

/// Node values of `[ψ, ∇_sψ, ∇_s²ψ]`.
fn nabla_values(jets: &CurveJets, f: &VectorField, k: usize) -> Vec<Vec<f64>> {
    let jet = jets.field_jet(f.values(), k);
    jets.nabla_powers(&jet, k).iter().map(|j| j.component(0)).collect()
}

/// Node values of `[ψ, ∇_sψ, ∇_s²ψ]`, one slice per level.
type Levels<'a> = [&'a [f64]; 3];

/// Second-variation density at one node, split as
/// `(everything but the λ term, ⟨∇φ,∇ψ⟩, ⟨∇²φ,∇²ψ⟩)`.
/// Swapping `p` and `q` swaps the summands of every pair, so the value is
/// symmetric bit for bit.
fn density(k: &[f64], dk: &[f64], p: Levels, q: Levels) -> (f64, f64, f64) {
    let [p0, p1, p2] = p;
    let [q0, q1, q2] = q;
    let k2 = dot(k, k);
    let g = dot(p1, q1);
    let lead = dot(p2, q2);
    let rest = lead + (dot(p2, k) * dot(q0, k) + dot(q2, k) * dot(p0, k)) - 1.5 * k2 * g + dot(q1, k) * dot(p1, k)
        - (dot(q1, dk) * dot(p0, k) + dot(p1, dk) * dot(q0, k))
        + k2 * (dot(k, q0) * dot(k, p0));
    (rest, g, lead)
}

fn node_levels(v: &[Vec<f64>], j: usize, dim: usize) -> Levels<'_> {
    let r = j * dim..(j + 1) * dim;
    [&v[0][r.clone()], &v[1][r.clone()], &v[2][r]]
}

/// Curvature and its normal derivative at every node.
fn curvature_levels(jets: &CurveJets) -> (Vec<f64>, Vec<f64>) {
    let nk = jets.nabla_powers(&jets.curvature, 1);
    (nk[0].component(0), nk[1].component(0))
}

struct FormDensities {
    rest: Vec<f64>,
    gradient_pairing: Vec<f64>,
    leading: Vec<f64>,
}

fn form_densities(base: &DiscreteCurve, phi: &VectorField, psi: &VectorField) -> Result<FormDensities> {
    let jets = CurveJets::new(base, 3)?;
    let dim = base.dim();
    let (k, dk) = curvature_levels(&jets);
    let p = nabla_values(&jets, phi, 2);
    let q = nabla_values(&jets, psi, 2);
    let n = base.n_nodes();
    let mut out = FormDensities { rest: vec![0.0; n], gradient_pairing: vec![0.0; n], leading: vec![0.0; n] };
    for j in 0..n {
        let r = j * dim..(j + 1) * dim;
        let (rest, g, lead) = density(&k[r.clone()], &dk[r.clone()], node_levels(&p, j, dim), node_levels(&q, j, dim));
        out.rest[j] = rest;
        out.gradient_pairing[j] = g;
        out.leading[j] = lead;
    }
    Ok(out)
}

fn check_form_inputs(base: &DiscreteCurve, phi: &NormalField, psi: &NormalField) -> Result<()> {
    check_field_shape(base, phi)?;
    check_field_shape(base, psi)?;
    check_clamped(phi, "first field")?;
    check_clamped(psi, "second field")
}

/// The second variation of `𝓔_λ` at `base` in the directions `phi`, `psi`:
///
/// ```text
/// ∫ ⟨∇²φ,∇²ψ⟩ + ⟨∇²φ,κ⟩⟨ψ,κ⟩ + ⟨∇²ψ,κ⟩⟨φ,κ⟩ + (λ − 3/2|κ|²)⟨∇φ,∇ψ⟩
///   + ⟨∇ψ,κ⟩⟨∇φ,κ⟩ − ⟨∇ψ,∇κ⟩⟨φ,κ⟩ − ⟨∇φ,∇κ⟩⟨ψ,κ⟩ + |κ|²⟨κ,ψ⟩⟨κ,φ⟩ ds
/// ```
///
/// with `∇ = ∇_s`. Both fields must be clamped at the ends.
pub fn second_variation_form(base: &DiscreteCurve, phi: &NormalField, psi: &NormalField, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    check_form_inputs(base, phi, psi)?;
    let d = form_densities(base, phi, psi)?;
    let density: Vec<f64> = d.rest.iter().zip(&d.gradient_pairing).map(|(r, g)| r + lambda * g).collect();
    Ok(integrate_ds(base, &density))
}

/// `∫⟨∇_sφ, ∇_sψ⟩ ds`, the coefficient of λ in the second variation.
pub fn gradient_pairing(base: &DiscreteCurve, phi: &NormalField, psi: &NormalField) -> Result<f64> {
    check_form_inputs(base, phi, psi)?;
    Ok(integrate_ds(base, &form_densities(base, phi, psi)?.gradient_pairing))
}

/// The leading part `∫⟨∇_s²φ, ∇_s²ψ⟩ ds`.
pub fn leading_form(base: &DiscreteCurve, phi: &NormalField, psi: &NormalField) -> Result<f64> {
    check_form_inputs(base, phi, psi)?;
    Ok(integrate_ds(base, &form_densities(base, phi, psi)?.leading))
}

/// First variation of the curvature vector at fixed parameter:
/// `∇_s²φ − ⟨∇_sφ, κ⃗⟩ τ + ⟨φ, κ⃗⟩ κ⃗`.
pub fn curvature_variation(base: &DiscreteCurve, phi: &NormalField) -> Result<VectorField> {
    check_field_shape(base, phi)?;
    let jets = CurveJets::new(base, 3)?;
    let dim = base.dim();
    let p = nabla_values(&jets, phi, 2);
    let k = jets.curvature.component(0);
    let t = jets.tangent.component(0);
    let mut out = vec![0.0; base.n_nodes() * dim];
    for j in 0..base.n_nodes() {
        let r = j * dim..(j + 1) * dim;
        let a = dot(&p[1][r.clone()], &k[r.clone()]);
        let b = dot(&p[0][r.clone()], &k[r.clone()]);
        for c in r {
            out[c] = p[2][c] - a * t[c] + b * k[c];
        }
    }
    Ok(VectorField::new(dim, out))
}

/// The linearized operator per unit arc length, applied to `phi`:
///
/// ```text
/// ∇⁴φ + ⟨∇²φ,κ⟩κ + 3/2|κ|²∇²φ + 3⟨κ,∇κ⟩∇φ + 2⟨∇φ,κ⟩∇κ + 2⟨φ,κ⟩∇²κ
///   + 3⟨φ,∇κ⟩∇κ + ⟨φ,∇²κ⟩κ + |κ|²⟨κ,φ⟩κ − λ∇²φ
/// ```
///
/// For clamped `phi` and `psi`, `∫⟨𝔏φ, ψ⟩ ds` is the second variation.
/// End values come from one-sided stencils and are not meaningful.
pub fn linearized_operator(base: &DiscreteCurve, phi: &NormalField, lambda: f64) -> Result<VectorField> {
    check_lambda(lambda)?;
    check_field_shape(base, phi)?;
    if base.n_edges() < MIN_EDGES_OPERATOR {
        return Err(Error::Stencil(format!(
            "operator needs N ≥ {MIN_EDGES_OPERATOR}, curve has N = {}",
            base.n_edges()
        )));
    }
    let jets = CurveJets::new(base, 4)?;
    let dim = base.dim();
    let nk = jets.nabla_powers(&jets.curvature, 2);
    let (k, dk, ddk) = (nk[0].component(0), nk[1].component(0), nk[2].component(0));
    let p = nabla_values(&jets, phi, 4);
    let mut out = vec![0.0; phi.values().len()];
    for j in 0..base.n_nodes() {
        let r = j * dim..(j + 1) * dim;
        let (k, dk, ddk) = (&k[r.clone()], &dk[r.clone()], &ddk[r.clone()]);
        let (p0, p1, p2) = (&p[0][r.clone()], &p[1][r.clone()], &p[2][r.clone()]);
        let k2 = dot(k, k);
        let ck = dot(p2, k) + dot(p0, ddk) + k2 * dot(k, p0);
        let cdk = 2.0 * dot(p1, k) + 3.0 * dot(p0, dk);
        let cddk = 2.0 * dot(p0, k);
        let cp1 = 3.0 * dot(k, dk);
        let cp2 = 1.5 * k2 - lambda;
        for c in 0..dim {
            let i = j * dim + c;
            out[i] = p[4][i] + ck * k[c] + cdk * dk[c] + cddk * ddk[c] + cp1 * p1[c] + cp2 * p2[c];
        }
    }
    Ok(VectorField::new(dim, out))
}

/// The second variation as a matrix on normal-frame coefficients at the
/// nodes `2..=N−2`. Unknown `(i − 2)(d − 1) + a` is the coefficient of the
/// `a`-th frame field at node `i`.
///
/// `cψᵀ M cφ` is the second variation of the fields with those coefficients
/// under the trapezoid rule, so `M c = μ W c` (with `W` = `mass`) is the
/// eigenproblem of the linearized operator per unit arc length.
#[derive(Debug, Clone)]
pub struct SecondVariationOperator {
    pub matrix: DMatrix<f64>,
    pub base: DiscreteCurve,
    pub lambda: f64,
    /// Trapezoid weights in arc length, one per unknown.
    pub mass: Vec<f64>,
    /// `‖M − Mᵀ‖_∞ / ‖M‖_∞` before the final symmetrization.
    pub asymmetry: f64,
    frame: Vec<NormalField>,
    // node 1 = a·node 2 + b·node 3, and the mirror image at the far end
    slave: [(f64, f64); 2],
}

impl SecondVariationOperator {
    pub fn n_unknowns(&self) -> usize {
        self.matrix.nrows()
    }

    fn codim(&self) -> usize {
        self.frame.len()
    }

    /// Frame coefficients of a field at the unknown nodes.
    pub fn coefficients(&self, field: &VectorField) -> Vec<f64> {
        let m = self.codim();
        let n = self.base.n_nodes();
        let mut c = vec![0.0; self.n_unknowns()];
        for i in 2..n - 2 {
            for a in 0..m {
                c[(i - 2) * m + a] = dot(field.get(i), self.frame[a].get(i));
            }
        }
        c
    }

    fn field_values(&self, coeffs: &[f64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.n_unknowns());
        let m = self.codim();
        let n = self.base.n_nodes();
        let dim = self.base.dim();
        let mut node_coeffs = vec![0.0; n * m];
        node_coeffs[2 * m..(n - 2) * m].copy_from_slice(coeffs);
        let [(a0, b0), (a1, b1)] = self.slave;
        for a in 0..m {
            node_coeffs[m + a] = a0 * node_coeffs[2 * m + a] + b0 * node_coeffs[3 * m + a];
            node_coeffs[(n - 2) * m + a] = a1 * node_coeffs[(n - 3) * m + a] + b1 * node_coeffs[(n - 4) * m + a];
        }
        let mut values = vec![0.0; n * dim];
        for j in 1..n - 1 {
            for a in 0..m {
                let c = node_coeffs[j * m + a];
                if c != 0.0 {
                    for (v, e) in values[j * dim..(j + 1) * dim].iter_mut().zip(self.frame[a].get(j)) {
                        *v += c * e;
                    }
                }
            }
        }
        values
    }

    /// The clamped normal field with the given coefficients.
    pub fn field(&self, coeffs: &[f64]) -> NormalField {
        let values = self.field_values(coeffs);
        NormalField::project(VectorField::new(self.base.dim(), values), &self.base)
    }

    /// `cψᵀ M cφ`.
    pub fn bilinear(&self, phi: &[f64], psi: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (i, q) in psi.iter().enumerate() {
            acc += q * self.matrix.row(i).iter().zip(phi).map(|(m, p)| m * p).sum::<f64>();
        }
        acc
    }
}

fn slave_weights(weights: &[f64]) -> (f64, f64) {
    (-weights[2] / weights[1], -weights[3] / weights[1])
}

/// `[ψ, ∇ψ, ∇²ψ]` of one basis field on the nodes `first..first + len`,
/// outside of which all three vanish.
struct BasisLevels {
    first: usize,
    len: usize,
    levels: [Vec<f64>; 3],
}

impl BasisLevels {
    fn at(&self, j: usize, dim: usize) -> Levels<'_> {
        node_levels(&self.levels, j - self.first, dim)
    }
}

/// Assembles the second variation of `𝓔_λ` at `base` on clamped normal
/// fields.
pub fn assemble_operator(base: &DiscreteCurve, lambda: f64) -> Result<SecondVariationOperator> {
    check_lambda(lambda)?;
    if base.n_edges() < MIN_EDGES_OPERATOR {
        return Err(Error::Stencil(format!(
            "operator needs N ≥ {MIN_EDGES_OPERATOR}, curve has N = {}",
            base.n_edges()
        )));
    }
    let jets = CurveJets::new(base, 3)?;
    let (k, dk) = curvature_levels(&jets);
    let frame = normal_frame(base)?;
    let n = base.n_nodes();
    let dim = base.dim();
    let m = dim - 1;
    let size = (n - 4) * m;

    let (_, w_head) = jets.stencils.weights(1, 0);
    let slave_head = slave_weights(w_head);
    let (_, w_tail) = jets.stencils.weights(1, n - 1);
    let w_rev: Vec<f64> = w_tail.iter().rev().copied().collect();
    let slave_tail = slave_weights(&w_rev);

    let weights = arc_weights(base);
    let mass: Vec<f64> = (2..n - 2).flat_map(|i| std::iter::repeat_n(weights[i], m)).collect();

    let mut op = SecondVariationOperator {
        matrix: DMatrix::zeros(size, size),
        base: base.clone(),
        lambda,
        mass,
        asymmetry: 0.0,
        frame,
        slave: [slave_head, slave_tail],
    };

    // The wider one-sided stencils used elsewhere let the discrete form
    // undercharge a boundary layer at the clamped ends: eigenvalues then
    // converge only linearly in h.
    let short = ArcStencils::from_grid_with(jets.stencils.arc().to_vec(), 2, |o| (stencil_widths(o).0, o + 2))?;
    let basis_jets = CurveJets::with_stencils(base, short, 2)?;
    let mut unit = vec![0.0; size];
    let mut basis = Vec::with_capacity(size);
    for col in 0..size {
        unit[col] = 1.0;
        let values = op.field_values(&unit);
        unit[col] = 0.0;
        let levels = nabla_values(&basis_jets, &VectorField::new(dim, values), 2);
        let touched = |j: usize| (0..3).any(|l| levels[l][j * dim..(j + 1) * dim].iter().any(|x| *x != 0.0));
        let first = (0..n).find(|&j| touched(j)).unwrap_or(0);
        let last = (0..n).rev().find(|&j| touched(j)).unwrap_or(0);
        let len = last + 1 - first;
        let cut = |v: &Vec<f64>| v[first * dim..(first + len) * dim].to_vec();
        basis.push(BasisLevels { first, len, levels: [cut(&levels[0]), cut(&levels[1]), cut(&levels[2])] });
    }

    let mut active: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (col, b) in basis.iter().enumerate() {
        for j in b.first..b.first + b.len {
            active[j].push(col);
        }
    }
    for (j, cols) in active.iter().enumerate() {
        let r = j * dim..(j + 1) * dim;
        for &c1 in cols {
            for &c2 in cols {
                let (rest, g, _) = density(&k[r.clone()], &dk[r.clone()], basis[c1].at(j, dim), basis[c2].at(j, dim));
                op.matrix[(c2, c1)] += weights[j] * (rest + lambda * g);
            }
        }
    }

    let inf_norm = |a: &DMatrix<f64>| a.row_iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
    let skew = &op.matrix - op.matrix.transpose();
    op.asymmetry = inf_norm(&skew) / inf_norm(&op.matrix);
    op.matrix = (&op.matrix + op.matrix.transpose()) * 0.5;
    Ok(op)
}

/// Smallest eigenpairs of `M c = μ W c`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Mass-orthonormal eigenfields, in the order of `eigenvalues`.
    pub eigenfields: Vec<NormalField>,
    pub lambda: f64,
}

#[derive(Serialize)]
struct SpectrumJson<'a> {
    lambda: f64,
    n_edges: usize,
    eigenvalues: &'a [f64],
    eigenfields: Vec<String>,
}

impl Spectrum {
    /// Writes `spectrum.json` and one `eigenfield_<k>.csv` per eigenfield into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        let mut names = Vec::new();
        for (k, f) in self.eigenfields.iter().enumerate() {
            let name = format!("eigenfield_{k}.csv");
            f.write_csv(&dir.join(&name))?;
            names.push(name);
        }
        let n_edges = self.eigenfields.first().map_or(0, |f| f.n_nodes() - 1);
        let json = SpectrumJson { lambda: self.lambda, n_edges, eigenvalues: &self.eigenvalues, eigenfields: names };
        let text = serde_json::to_string_pretty(&json).map_err(|e| Error::Io(e.to_string()))?;
        let path = dir.join("spectrum.json");
        std::fs::write(&path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }
}

/// The `count` smallest eigenvalues of the operator against its mass
/// weights, ascending.
pub fn spectrum(op: &SecondVariationOperator, count: usize) -> Result<Spectrum> {
    let size = op.n_unknowns();
    let inv_sqrt: Vec<f64> = op.mass.iter().map(|w| 1.0 / w.sqrt()).collect();
    let scaled = DMatrix::from_fn(size, size, |i, j| inv_sqrt[i] * op.matrix[(i, j)] * inv_sqrt[j]);
    let eig = SymmetricEigen::try_new(scaled, 1e-14, 0)
        .ok_or_else(|| Error::Convergence("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..size).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let count = count.min(size);
    let mut eigenvalues = Vec::with_capacity(count);
    let mut eigenfields = Vec::with_capacity(count);
    for &k in &order[..count] {
        eigenvalues.push(eig.eigenvalues[k]);
        let c: Vec<f64> = eig.eigenvectors.column(k).iter().zip(&inv_sqrt).map(|(v, s)| v * s).collect();
        eigenfields.push(op.field(&c));
    }
    Ok(Spectrum { eigenvalues, eigenfields, lambda: op.lambda })
}
