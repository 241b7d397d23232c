//! Centripetal Catmull-Rom interpolation of a polyline, written as cubic
//! Hermite pieces so each segment is cheap to evaluate and differentiate.

use crate::geometry::DiscreteCurve;

/// Interpolating cubic through all nodes of a curve, parametrized by
/// `σ ∈ [0, 1]` with node `j` at `σ = j / N`.
#[derive(Debug, Clone)]
pub struct CurveSpline {
    dim: usize,
    points: Vec<f64>,
    // per segment: outgoing tangent at its start, incoming at its end (in u)
    tangents: Vec<f64>,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

impl CurveSpline {
    pub fn new(curve: &DiscreteCurve) -> Self {
        let dim = curve.dim();
        let n = curve.n_nodes();
        // phantom end points by quadratic extrapolation
        let extrapolate = |a: usize, b: usize, c: usize| -> Vec<f64> {
            (0..dim)
                .map(|k| 3.0 * curve.node(a)[k] - 3.0 * curve.node(b)[k] + curve.node(c)[k])
                .collect()
        };
        let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 2);
        pts.push(extrapolate(0, 1, 2));
        pts.extend((0..n).map(|j| curve.node(j).to_vec()));
        pts.push(extrapolate(n - 1, n - 2, n - 3));
        let knots: Vec<f64> = pts.windows(2).map(|w| dist(&w[0], &w[1]).sqrt()).collect();

        // derivative at pts[i] of the quadratic through pts[i-1..=i+1] in knot time
        let slope = |i: usize, k: usize| -> f64 {
            let (d0, d1) = (knots[i - 1], knots[i]);
            let (p0, p1, p2) = (pts[i - 1][k], pts[i][k], pts[i + 1][k]);
            (p1 - p0) / d0 - (p2 - p0) / (d0 + d1) + (p2 - p1) / d1
        };
        let mut tangents = Vec::with_capacity((n - 1) * 2 * dim);
        for seg in 0..n - 1 {
            let i = seg + 1;
            let span = knots[i];
            for k in 0..dim {
                tangents.push(slope(i, k) * span);
            }
            for k in 0..dim {
                tangents.push(slope(i + 1, k) * span);
            }
        }
        CurveSpline { dim, points: curve.coords().to_vec(), tangents }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_segments(&self) -> usize {
        self.points.len() / self.dim - 1
    }

    pub fn node(&self, j: usize) -> &[f64] {
        &self.points[j * self.dim..(j + 1) * self.dim]
    }

    fn locate(&self, sigma: f64) -> (usize, f64) {
        let m = self.n_segments();
        let x = sigma.clamp(0.0, 1.0) * m as f64;
        let seg = (x.floor() as usize).min(m - 1);
        (seg, x - seg as f64)
    }

    /// Position and first two σ-derivatives.
    pub fn eval(&self, sigma: f64, pos: &mut [f64], d1: &mut [f64], d2: &mut [f64]) {
        let (seg, u) = self.locate(sigma);
        let m = self.n_segments() as f64;
        let d = self.dim;
        let p0 = self.node(seg);
        let p1 = self.node(seg + 1);
        let t0 = &self.tangents[2 * seg * d..(2 * seg + 1) * d];
        let t1 = &self.tangents[(2 * seg + 1) * d..(2 * seg + 2) * d];
        let (u2, u3) = (u * u, u * u * u);
        let h = [2.0 * u3 - 3.0 * u2 + 1.0, u3 - 2.0 * u2 + u, -2.0 * u3 + 3.0 * u2, u3 - u2];
        let dh = [6.0 * u2 - 6.0 * u, 3.0 * u2 - 4.0 * u + 1.0, -6.0 * u2 + 6.0 * u, 3.0 * u2 - 2.0 * u];
        let ddh = [12.0 * u - 6.0, 6.0 * u - 4.0, -12.0 * u + 6.0, 6.0 * u - 2.0];
        for k in 0..d {
            let c = [p0[k], t0[k], p1[k], t1[k]];
            pos[k] = (0..4).map(|i| h[i] * c[i]).sum();
            d1[k] = m * (0..4).map(|i| dh[i] * c[i]).sum::<f64>();
            d2[k] = m * m * (0..4).map(|i| ddh[i] * c[i]).sum::<f64>();
        }
    }

    pub fn point(&self, sigma: f64) -> Vec<f64> {
        let d = self.dim;
        let (mut p, mut a, mut b) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
        self.eval(sigma, &mut p, &mut a, &mut b);
        p
    }

    /// σ of node j.
    pub fn node_param(&self, j: usize) -> f64 {
        j as f64 / self.n_segments() as f64
    }
}

/// Safeguarded Newton for an increasing-through-the-root scalar function on
/// a bracket `[lo, hi]` with `f(lo) ≤ 0 ≤ f(hi)`. Falls back to bisection
/// whenever a Newton step leaves the bracket or stalls. Returns the root
/// and the iteration count, or `None` if `max_iter` is exhausted.
pub(crate) fn safe_newton(
    f: impl Fn(f64) -> (f64, f64),
    mut lo: f64,
    mut hi: f64,
    x0: f64,
    tol: f64,
    max_iter: usize,
) -> Option<(f64, usize)> {
    let mut x = x0.clamp(lo, hi);
    let mut step_old = hi - lo;
    let mut step = step_old;
    let (mut fx, mut dfx) = f(x);
    for it in 1..=max_iter {
        if fx == 0.0 {
            return Some((x, it));
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let leaves = ((x - hi) * dfx - fx) * ((x - lo) * dfx - fx) > 0.0;
        if dfx <= 0.0 || leaves || (2.0 * fx).abs() > (step_old * dfx).abs() {
            step_old = step;
            step = 0.5 * (hi - lo);
            x = lo + step;
        } else {
            step_old = step;
            step = fx / dfx;
            x -= step;
        }
        let ulps = 4.0 * f64::EPSILON * lo.abs().max(hi.abs());
        if step.abs() <= tol || hi - lo <= ulps {
            return Some((x, it));
        }
        (fx, dfx) = f(x);
    }
    None
}
