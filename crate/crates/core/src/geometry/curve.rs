use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Tangential part (relative to the field's sup-norm) tolerated by
/// [`NormalField::from_smooth`].
pub const SMOOTH_NORMALITY_TOL: f64 = 1e-2;

/// Smallest number of edges a curve may have; fourth-order stencils need the width.
pub const MIN_EDGES: usize = 8;

/// Tangential part (relative to the node value) tolerated by [`NormalField::new`].
pub const NORMALITY_TOL: f64 = 1e-8;

/// Ordered nodes `f(x_j)`, `x_j = j/N`, of an open immersed curve in ℝ^d.
///
/// Construction validates the invariants (N ≥ 8, finite coordinates, every
/// edge of positive length), so every value of this type is a regular curve.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteCurve {
    dim: usize,
    coords: Vec<f64>,
}

impl DiscreteCurve {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::DimensionMismatch(format!(
                "spatial dimension must be at least 2, got {dim}"
            )));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch(format!(
                "{} coordinates do not split into {dim}-vectors",
                coords.len()
            )));
        }
        let n_nodes = coords.len() / dim;
        if n_nodes < MIN_EDGES + 1 {
            return Err(Error::Stencil(format!(
                "a curve needs at least {} nodes, got {n_nodes}",
                MIN_EDGES + 1
            )));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::Regularity(format!(
                "non-finite coordinate at node {}",
                i / dim
            )));
        }
        let curve = DiscreteCurve { dim, coords };
        let edges: Vec<f64> = (0..n_nodes - 1).map(|j| curve.edge_length(j)).collect();
        let max = edges.iter().cloned().fold(0.0, f64::max);
        if let Some(j) = edges.iter().position(|&e| !(e > 1e-14 * max) || e == 0.0) {
            return Err(Error::Regularity(format!("degenerate edge {j} (length {})", edges[j])));
        }
        Ok(curve)
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map(|p| p.len()).unwrap_or(0);
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch("points of unequal dimension".into()));
        }
        Self::new(dim, points.iter().flatten().copied().collect())
    }

    /// Samples `f` at `x_j = j / n_edges`.
    pub fn from_fn(n_edges: usize, dim: usize, f: impl Fn(f64) -> Vec<f64>) -> Result<Self> {
        let mut coords = Vec::with_capacity((n_edges + 1) * dim);
        for j in 0..=n_edges {
            let p = f(j as f64 / n_edges as f64);
            if p.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "generator returned {} coordinates, expected {dim}",
                    p.len()
                )));
            }
            coords.extend_from_slice(&p);
        }
        Self::new(dim, coords)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len() / self.dim
    }

    /// N, the number of edges.
    pub fn n_edges(&self) -> usize {
        self.n_nodes() - 1
    }

    pub fn node(&self, j: usize) -> &[f64] {
        &self.coords[j * self.dim..(j + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn edge_length(&self, j: usize) -> f64 {
        let a = self.node(j);
        let b = self.node(j + 1);
        a.iter().zip(b).map(|(x, y)| (y - x) * (y - x)).sum::<f64>().sqrt()
    }

    /// Applies `f` to every node and revalidates.
    pub fn map_nodes(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        let pts: Vec<Vec<f64>> = (0..self.n_nodes()).map(|j| f(self.node(j))).collect();
        Self::from_points(&pts)
    }

    /// `self + eps * field`, node by node.
    pub fn displaced(&self, field: &VectorField, eps: f64) -> Result<Self> {
        check_len(self, field)?;
        let coords = self
            .coords
            .iter()
            .zip(field.values())
            .map(|(x, v)| x + eps * v)
            .collect();
        Self::new(self.dim, coords)
    }

    /// Serializes in the curve CSV format (`# d=<dim> n=<nodes>` header,
    /// 17 significant digits per field).
    pub fn to_csv(&self) -> String {
        rows_to_csv(self.dim, &self.coords)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let (dim, rows) = parse_curve_csv(text)?;
        Self::new(dim, rows)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_csv(&text)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

fn rows_to_csv(dim: usize, values: &[f64]) -> String {
    let mut out = format!("# d={dim} n={}\n", values.len() / dim);
    for row in values.chunks(dim) {
        let line: Vec<String> = row.iter().map(|v| format_sig17(*v)).collect();
        let _ = writeln!(out, "{}", line.join(","));
    }
    out
}

/// Formats with 17 significant digits, which round-trips every f64.
pub fn format_sig17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Parses the curve CSV format into `(dim, flat coordinates)`.
pub fn parse_curve_csv(text: &str) -> Result<(usize, Vec<f64>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty curve file".into()))?;
    let header = header
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| Error::Parse(format!("missing '# d=.. n=..' header, got {header:?}")))?;
    let mut dim = None;
    let mut n = None;
    for tok in header.split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("bad header token {tok:?}")))?;
        let v: usize = v
            .parse()
            .map_err(|_| Error::Parse(format!("bad header value {tok:?}")))?;
        match k {
            "d" => dim = Some(v),
            "n" => n = Some(v),
            _ => return Err(Error::Parse(format!("unknown header key {k:?}"))),
        }
    }
    let dim = dim.ok_or_else(|| Error::Parse("header lacks d=".into()))?;
    let n = n.ok_or_else(|| Error::Parse("header lacks n=".into()))?;
    let mut coords = Vec::with_capacity(n * dim);
    let mut rows = 0;
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != dim {
            return Err(Error::Parse(format!(
                "row {} has {} fields, expected {dim}",
                i + 1,
                fields.len()
            )));
        }
        for f in fields {
            coords.push(
                f.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("row {}: bad number {f:?}", i + 1)))?,
            );
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::Parse(format!("header announces {n} rows, found {rows}")));
    }
    Ok((dim, coords))
}

fn check_len(curve: &DiscreteCurve, field: &VectorField) -> Result<()> {
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

/// One d-vector per node of some base curve.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    dim: usize,
    values: Vec<f64>,
}

impl VectorField {
    pub fn new(dim: usize, values: Vec<f64>) -> Self {
        assert!(dim > 0 && values.len().is_multiple_of(dim), "ragged vector field");
        VectorField { dim, values }
    }

    pub fn zeros(n_nodes: usize, dim: usize) -> Self {
        VectorField { dim, values: vec![0.0; n_nodes * dim] }
    }

    /// Field on `curve` given node-wise by `f(x_j, node_j)`.
    pub fn from_fn(curve: &DiscreteCurve, f: impl Fn(f64, &[f64]) -> Vec<f64>) -> Self {
        let n = curve.n_edges();
        let mut values = Vec::with_capacity(curve.coords().len());
        for j in 0..curve.n_nodes() {
            let v = f(j as f64 / n as f64, curve.node(j));
            assert_eq!(v.len(), curve.dim(), "field generator returned wrong dimension");
            values.extend(v);
        }
        VectorField { dim: curve.dim(), values }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_nodes(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn get(&self, j: usize) -> &[f64] {
        &self.values[j * self.dim..(j + 1) * self.dim]
    }

    pub fn get_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.values[j * self.dim..(j + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Same format as [`DiscreteCurve::to_csv`].
    pub fn to_csv(&self) -> String {
        rows_to_csv(self.dim, &self.values)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let (dim, values) = parse_curve_csv(text)?;
        Ok(Self::new(dim, values))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn sup_norm(&self) -> f64 {
        (0..self.n_nodes()).map(|j| norm(self.get(j))).fold(0.0, f64::max)
    }

    pub fn scaled(&self, a: f64) -> Self {
        VectorField { dim: self.dim, values: self.values.iter().map(|v| a * v).collect() }
    }

    pub fn sub(&self, other: &VectorField) -> Self {
        assert_eq!(self.values.len(), other.values.len());
        VectorField {
            dim: self.dim,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn add(&self, other: &VectorField) -> Self {
        assert_eq!(self.values.len(), other.values.len());
        VectorField {
            dim: self.dim,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        }
    }
}

/// A vector field orthogonal to the (discrete) unit tangent of its base curve.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalField(VectorField);

impl NormalField {
    /// Strict constructor: rejects values whose tangential part exceeds
    /// [`NORMALITY_TOL`] relative to the node value, then removes the
    /// remaining roundoff-level tangential part.
    pub fn new(field: VectorField, base: &DiscreteCurve) -> Result<Self> {
        check_len(base, &field)?;
        let tangent = super::unit_tangent(base);
        let scale = field.sup_norm();
        for j in 0..base.n_nodes() {
            let v = field.get(j);
            let t = dot(v, tangent.get(j)).abs();
            if t > NORMALITY_TOL * norm(v).max(1e-300) && t > 1e-14 * scale {
                return Err(Error::Normality(format!(
                    "node {j}: tangential component {t:e} of |v| = {:e}",
                    norm(v)
                )));
            }
        }
        Ok(Self::project(field, base))
    }

    /// Orthogonal projection of an arbitrary field onto the normal bundle.
    pub fn project(mut field: VectorField, base: &DiscreteCurve) -> Self {
        let tangent = super::unit_tangent(base);
        for j in 0..base.n_nodes() {
            let t = tangent.get(j).to_vec();
            let v = field.get_mut(j);
            let a = dot(v, &t);
            for (vi, ti) in v.iter_mut().zip(&t) {
                *vi -= a * ti;
            }
        }
        NormalField(field)
    }

    /// Accepts samples of a smooth field that is normal to the underlying
    /// smooth curve, keeping the values as given. The discrete tangent
    /// differs from the exact one by O(h²) with a different constant at the
    /// one-sided end stencils, so projecting such a field would plant a
    /// non-smooth O(h²) defect at the ends that higher derivatives amplify.
    /// Rejects fields whose tangential part exceeds [`SMOOTH_NORMALITY_TOL`]
    /// of the field's sup-norm.
    pub fn from_smooth(field: VectorField, base: &DiscreteCurve) -> Result<Self> {
        check_len(base, &field)?;
        let tangent = super::unit_tangent(base);
        let scale = field.sup_norm();
        for j in 0..base.n_nodes() {
            let t = dot(field.get(j), tangent.get(j)).abs();
            if t > SMOOTH_NORMALITY_TOL * scale {
                return Err(Error::Normality(format!(
                    "node {j}: tangential component {t:e} of sup-norm {scale:e}"
                )));
            }
        }
        Ok(NormalField(field))
    }

    pub fn field(&self) -> &VectorField {
        &self.0
    }

    pub fn into_field(self) -> VectorField {
        self.0
    }
}

impl std::ops::Deref for NormalField {
    type Target = VectorField;
    fn deref(&self) -> &VectorField {
        &self.0
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn segment(n: usize) -> DiscreteCurve {
        DiscreteCurve::from_fn(n, 2, |x| vec![x, 0.0]).unwrap()
    }

    #[test]
    fn rejects_short_and_degenerate_curves() {
        assert!(matches!(
            DiscreteCurve::from_fn(4, 2, |x| vec![x, 0.0]),
            Err(Error::Stencil(_))
        ));
        let mut pts: Vec<Vec<f64>> = (0..=10).map(|j| vec![j as f64, 0.0]).collect();
        pts[4] = pts[3].clone();
        assert!(matches!(DiscreteCurve::from_points(&pts), Err(Error::Regularity(_))));
        let mut pts: Vec<Vec<f64>> = (0..=10).map(|j| vec![j as f64, 0.0]).collect();
        pts[2][1] = f64::NAN;
        assert!(matches!(DiscreteCurve::from_points(&pts), Err(Error::Regularity(_))));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let c = DiscreteCurve::from_fn(12, 3, |x| vec![x.sin(), (3.0 * x).cos() / 7.0, x * x])
            .unwrap();
        let text = c.to_csv();
        assert!(text.starts_with("# d=3 n=13\n"));
        assert_eq!(DiscreteCurve::from_csv(&text).unwrap(), c);
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(DiscreteCurve::from_csv(""), Err(Error::Parse(_))));
        assert!(matches!(DiscreteCurve::from_csv("0,1\n"), Err(Error::Parse(_))));
        assert!(matches!(
            DiscreteCurve::from_csv("# d=2 n=2\n0,0\n1\n"),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            DiscreteCurve::from_csv("# d=2 n=3\n0,0\n1,0\n"),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            DiscreteCurve::from_csv("# d=2 n=1\nx,0\n"),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn normal_field_strict_constructor() {
        let c = segment(10);
        let ok = VectorField::from_fn(&c, |x, _| vec![0.0, x]);
        assert!(NormalField::new(ok, &c).is_ok());
        let bad = VectorField::from_fn(&c, |x, _| vec![1e-3, x + 1.0]);
        assert!(matches!(NormalField::new(bad.clone(), &c), Err(Error::Normality(_))));
        let p = NormalField::project(bad, &c);
        assert!(p.get(3)[0].abs() < 1e-15);
    }
}
