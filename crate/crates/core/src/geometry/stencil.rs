//! Finite-difference weights on the non-uniform arc-length grid.

use crate::error::{Error, Result};

use super::DiscreteCurve;

/// Fornberg's recursion: `w[i][m]` is the weight of sample `x[i]` in the
/// m-th derivative at `z`, for `m = 0..=max_order`.
pub fn fornberg_weights(z: f64, x: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; max_order + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c
}

/// Number of samples used for a derivative of `order` away from the ends
/// (centered, odd width) and at the ends (one-sided, `order + 3` samples).
///
/// The narrowest centered stencils are only second order through a
/// cancellation that needs a locally uniform grid; two extra samples keep
/// every stencil at least third order on graded chord-length grids.
pub fn stencil_widths(order: usize) -> (usize, usize) {
    (2 * order.div_ceil(2) + 3, order + 3)
}

/// Nodes needed before a derivative of `order` can be formed everywhere.
pub fn min_nodes(order: usize) -> usize {
    let (c, b) = stencil_widths(order);
    c.max(b)
}

pub(crate) fn cumulative(increments: &[f64]) -> Vec<f64> {
    let mut s = Vec::with_capacity(increments.len() + 1);
    s.push(0.0);
    for (j, d) in increments.iter().enumerate() {
        s.push(s[j] + d);
    }
    s
}

/// Arc-length increments along the edges.
///
/// A chord of length `c` under curvature `κ` subtends an arc of length
/// `c (1 + c²|κ|²/24 + O(c⁴))`. The chord-length grid alone would put an
/// O(h²) defect into every derivative, so the edge curvature is estimated
/// from a first pass on the chord grid and the increments are corrected.
pub fn arc_increments(curve: &DiscreteCurve) -> Result<Vec<f64>> {
    let dim = curve.dim();
    let chords: Vec<f64> = (0..curve.n_edges()).map(|j| curve.edge_length(j)).collect();
    let first = ArcStencils::from_grid(cumulative(&chords), 2)?;
    let kappa = first.apply(curve.coords(), dim, 2);
    let k2 = |j: usize| kappa[j * dim..(j + 1) * dim].iter().map(|x| x * x).sum::<f64>();
    Ok(chords
        .iter()
        .enumerate()
        .map(|(j, c)| c * (1.0 + c * c * (k2(j) + k2(j + 1)) / 48.0))
        .collect())
}

#[derive(Debug, Clone)]
struct Stencil {
    start: usize,
    weights: Vec<f64>,
}

/// Derivative stencils in arc length for every node and order `1..=max_order`.
///
/// The arc-length coordinate of node j is the cumulative chord length.
#[derive(Debug, Clone)]
pub struct ArcStencils {
    s: Vec<f64>,
    max_order: usize,
    // stencils[(order - 1) * n + j]
    stencils: Vec<Stencil>,
}

impl ArcStencils {
    pub fn new(curve: &DiscreteCurve, max_order: usize) -> Result<Self> {
        Self::from_grid(cumulative(&arc_increments(curve)?), max_order)
    }

    pub fn from_grid(s: Vec<f64>, max_order: usize) -> Result<Self> {
        Self::from_grid_with(s, max_order, stencil_widths)
    }

    /// Like [`ArcStencils::from_grid`] with `widths(order)` giving the
    /// (centered, one-sided) stencil widths.
    pub fn from_grid_with(s: Vec<f64>, max_order: usize, widths: impl Fn(usize) -> (usize, usize)) -> Result<Self> {
        let n = s.len();
        if n < min_nodes(max_order) {
            return Err(Error::Stencil(format!(
                "derivative of order {max_order} needs {} nodes, curve has {n}",
                min_nodes(max_order)
            )));
        }
        let mut stencils = Vec::with_capacity(max_order * n);
        for order in 1..=max_order {
            let (wc, wb) = widths(order);
            let half = wc / 2;
            for j in 0..n {
                let (start, width) = if j >= half && j + half < n {
                    (j - half, wc)
                } else if j < half {
                    (0, wb)
                } else {
                    (n - wb, wb)
                };
                let w = fornberg_weights(s[j], &s[start..start + width], order);
                stencils.push(Stencil { start, weights: w.iter().map(|r| r[order]).collect() });
            }
        }
        Ok(ArcStencils { s, max_order, stencils })
    }

    pub fn n_nodes(&self) -> usize {
        self.s.len()
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// First sample index and weights of the `order` stencil at node `j`.
    pub fn weights(&self, order: usize, j: usize) -> (usize, &[f64]) {
        let st = &self.stencils[(order - 1) * self.s.len() + j];
        (st.start, &st.weights)
    }

    /// Arc-length coordinate at every node.
    pub fn arc(&self) -> &[f64] {
        &self.s
    }

    /// Writes `∂_s^order` of the node-major samples `values` (stride `dim`)
    /// at node `j` into `out`. Samples are taken relative to node j, which
    /// keeps cancellation error proportional to the stencil extent.
    pub fn apply_at(&self, values: &[f64], dim: usize, order: usize, j: usize, out: &mut [f64]) {
        debug_assert!(order >= 1 && order <= self.max_order);
        let st = &self.stencils[(order - 1) * self.s.len() + j];
        for c in 0..dim {
            let center = values[j * dim + c];
            let mut acc = 0.0;
            for (i, w) in st.weights.iter().enumerate() {
                acc += w * (values[(st.start + i) * dim + c] - center);
            }
            out[c] = acc;
        }
    }

    pub fn apply(&self, values: &[f64], dim: usize, order: usize) -> Vec<f64> {
        let n = self.s.len();
        let mut out = vec![0.0; n * dim];
        for j in 0..n {
            self.apply_at(values, dim, order, j, &mut out[j * dim..(j + 1) * dim]);
        }
        out
    }
}
