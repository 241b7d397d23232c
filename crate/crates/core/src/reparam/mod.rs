//! Arc-length resampling, normal frames and the normal-graph projection of
//! a nearby curve over a base curve.
//!
//! Both resampling and projection read the input curve through a
//! centripetal Catmull-Rom interpolant ([`CurveSpline`]), which is third
//! order in position.

mod frame;
mod spline;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use frame::normal_frame;
pub(crate) use spline::safe_newton;
pub use spline::CurveSpline;

use crate::error::{Error, Result};
use crate::geometry::{dot, edge_lengths, unit_tangent, DiscreteCurve, NormalField, VectorField};
use crate::par::Exec;

const MARCH_TOL: f64 = 1e-14;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// The point at chord distance `chord` from `spline(from)` met first when
/// moving forward from `from`, searched no further than `limit`.
fn next_at_chord(spline: &CurveSpline, from: f64, limit: f64, chord: f64) -> Option<f64> {
    let d = spline.dim();
    let origin = spline.point(from);
    let m = spline.n_segments() as f64;
    let gap = |s: f64| dist(&spline.point(s), &origin) - chord;
    // first node parameter past `from` whose distance exceeds the chord
    let mut lo = from;
    let mut k = (from * m).floor() + 1.0;
    let hi = loop {
        let s = (k / m).min(limit);
        if gap(s) >= 0.0 {
            break s;
        }
        if s >= limit {
            return None;
        }
        lo = s;
        k += 1.0;
    };
    let f = |s: f64| {
        let (mut q, mut dq, mut ddq) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
        spline.eval(s, &mut q, &mut dq, &mut ddq);
        let diff: Vec<f64> = q.iter().zip(&origin).map(|(a, b)| a - b).collect();
        (dot(&diff, &diff) - chord * chord, 2.0 * dot(&diff, &dq))
    };
    safe_newton(f, lo, hi, 0.5 * (lo + hi), MARCH_TOL * (hi - lo), 200).map(|(s, _)| s)
}

/// Places `edges − 1` points on the spline between `from` and `to` so that
/// all `edges` chords are equal. Returns the parameters of the interior points.
fn equal_chords(spline: &CurveSpline, from: f64, to: f64, edges: usize) -> Result<Vec<f64>> {
    let end = spline.point(to);
    // overshoot of the last chord for a trial chord length; positive while
    // the trial is too short
    let shoot = |c: f64| -> (f64, Vec<f64>) {
        let mut params = Vec::with_capacity(edges - 1);
        let mut s = from;
        for i in 0..edges - 1 {
            match next_at_chord(spline, s, to, c) {
                Some(next) => {
                    params.push(next);
                    s = next;
                }
                None => return (-c * (edges - i) as f64, params),
            }
        }
        (dist(&spline.point(s), &end) - c, params)
    };
    let mut polyline = 0.0;
    let m = spline.n_segments();
    let first = (from * m as f64).round() as usize;
    let last = (to * m as f64).round() as usize;
    for j in first..last {
        polyline += dist(spline.node(j), spline.node(j + 1));
    }
    let guess = polyline / edges as f64;
    let (mut lo, mut hi) = (0.5 * guess, 1.5 * guess);
    let (mut flo, _) = shoot(lo);
    let (mut fhi, _) = shoot(hi);
    if !(flo > 0.0 && fhi < 0.0) {
        return Err(Error::Regularity("equal-chord resampling could not bracket the chord length".into()));
    }
    // Illinois variant of regula falsi, bisection when the trial runs off the end
    let mut side = 0;
    for _ in 0..200 {
        let c = if fhi <= -hi { 0.5 * (lo + hi) } else { (lo * fhi - hi * flo) / (fhi - flo) };
        let (fc, params) = shoot(c);
        if fc.abs() <= 1e-13 * c || (hi - lo) <= 1e-15 * c {
            return Ok(params);
        }
        if fc > 0.0 {
            lo = c;
            flo = fc;
            if side == 1 {
                fhi *= 0.5;
            }
            side = 1;
        } else {
            hi = c;
            fhi = fc;
            if side == -1 {
                flo *= 0.5;
            }
            side = -1;
        }
    }
    Err(Error::Regularity("equal-chord resampling did not converge".into()))
}

/// Replaces nodes `offset..offset + params.len()` by spline points.
fn rebuild(curve: &DiscreteCurve, spline: &CurveSpline, params: &[f64], offset: usize) -> Result<DiscreteCurve> {
    let mut coords = curve.coords().to_vec();
    let d = curve.dim();
    for (i, s) in params.iter().enumerate() {
        let j = offset + i;
        coords[j * d..(j + 1) * d].copy_from_slice(&spline.point(*s));
    }
    DiscreteCurve::new(d, coords)
}

/// Moves the nodes to equal chord lengths along the interpolated curve,
/// keeping both end nodes bit-exact.
pub fn arclength_resample(curve: &DiscreteCurve) -> Result<DiscreteCurve> {
    let spline = CurveSpline::new(curve);
    let n = curve.n_edges();
    let params = equal_chords(&spline, 0.0, 1.0, n)?;
    rebuild(curve, &spline, &params, 1)
}

/// Like [`arclength_resample`] but also keeps the first and last edge, so
/// that clamped end data (position and end-edge direction) are untouched.
pub fn arclength_resample_interior(curve: &DiscreteCurve) -> Result<DiscreteCurve> {
    let spline = CurveSpline::new(curve);
    let n = curve.n_edges();
    let params = equal_chords(&spline, spline.node_param(1), spline.node_param(n - 1), n - 2)?;
    rebuild(curve, &spline, &params, 2)
}

/// A curve written as a normal graph `f̄ + φ` over a base, together with the
/// parameters `σ` at which the base normals meet the interpolated curve.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphProjection {
    pub phi: NormalField,
    pub sigma: Vec<f64>,
    /// Largest `|⟨φ_j, τ̄_j⟩|` relative to the base length.
    pub residual: f64,
    /// Largest Newton iteration count over the nodes.
    pub iterations: usize,
}

#[derive(Serialize, Deserialize)]
struct ProjectionSidecar {
    residual: f64,
    sigma: Vec<f64>,
}

impl GraphProjection {
    /// The graph curve `f̄ + φ`.
    pub fn reconstruct(&self, base: &DiscreteCurve) -> Result<DiscreteCurve> {
        base.displaced(&self.phi, 1.0)
    }

    /// Writes `φ` in the curve CSV format and `{residual, sigma}` next to it
    /// with a `.json` extension.
    pub fn write(&self, csv_path: &Path) -> Result<()> {
        let (dim, values) = (self.phi.dim(), self.phi.values());
        let mut out = format!("# d={} n={}\n", dim, self.phi.n_nodes());
        for row in values.chunks(dim) {
            let fields: Vec<String> = row.iter().map(|v| crate::geometry::format_sig17(*v)).collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        std::fs::write(csv_path, out)?;
        let sidecar = ProjectionSidecar { residual: self.residual, sigma: self.sigma.clone() };
        let json = serde_json::to_string_pretty(&sidecar).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(csv_path.with_extension("json"), json)?;
        Ok(())
    }
}

/// Newton iterations allowed per node before the projection gives up.
pub const PROJECTION_MAX_ITER: usize = 25;

/// Writes `curve` as a normal graph over `base`, see [`normal_graph_project_with`].
pub fn normal_graph_project(base: &DiscreteCurve, curve: &DiscreteCurve) -> Result<GraphProjection> {
    normal_graph_project_with(base, curve, Exec::default())
}

/// For every base node, finds where the base normal plane meets the
/// interpolated `curve`: a scalar root of `⟨S(σ) − f̄_j, τ̄_j⟩` started at
/// the node's arc-length fraction. Nodes are independent and run under
/// `exec`.
pub fn normal_graph_project_with(base: &DiscreteCurve, curve: &DiscreteCurve, exec: Exec) -> Result<GraphProjection> {
    let d = base.dim();
    let n = base.n_nodes();
    if curve.dim() != d {
        return Err(Error::DimensionMismatch(format!("base has d = {d}, curve has d = {}", curve.dim())));
    }
    let length = edge_lengths(base).total;
    let last = base.n_edges();
    if dist(base.node(0), curve.node(0)) > 1e-12 * length
        || dist(base.node(last), curve.node(curve.n_edges())) > 1e-12 * length
    {
        return Err(Error::Precondition("base and curve must share their end points".into()));
    }
    let spline = CurveSpline::new(curve);
    let m = spline.n_segments();
    let tangent = unit_tangent(base);
    // arc-length fractions of both node sets, for initial guesses
    let fractions = |c: &DiscreteCurve| {
        let e = edge_lengths(c);
        let mut acc = vec![0.0];
        for (j, h) in e.edges.iter().enumerate() {
            acc.push(acc[j] + h / e.total);
        }
        acc
    };
    let base_frac = fractions(base);
    let curve_frac = fractions(curve);
    let guess = |t: f64| -> f64 {
        let k = curve_frac.partition_point(|&f| f <= t).clamp(1, m) - 1;
        let u = (t - curve_frac[k]) / (curve_frac[k + 1] - curve_frac[k]);
        (k as f64 + u.clamp(0.0, 1.0)) / m as f64
    };

    let solve = |j: usize| -> Result<(f64, usize)> {
        if j == 0 {
            return Ok((0.0, 0));
        }
        if j == n - 1 {
            return Ok((1.0, 0));
        }
        let x = base.node(j);
        let t = tangent.get(j);
        let f = |s: f64| {
            let (mut p, mut dp, mut ddp) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
            spline.eval(s, &mut p, &mut dp, &mut ddp);
            let diff: Vec<f64> = p.iter().zip(x).map(|(a, b)| a - b).collect();
            (dot(&diff, t), dot(&dp, t))
        };
        let s0 = guess(base_frac[j]);
        // bracket the root by walking out node by node, at most a few segments
        let step = 1.0 / m as f64;
        let (mut lo, mut hi) = (s0, s0);
        let mut found = f(s0).0 == 0.0;
        for _ in 0..8 {
            if f(lo).0 <= 0.0 && f(hi).0 >= 0.0 {
                found = true;
                break;
            }
            if f(lo).0 > 0.0 {
                lo = (lo - step).max(0.0);
            }
            if f(hi).0 < 0.0 {
                hi = (hi + step).min(1.0);
            }
        }
        if !found {
            return Err(Error::Projection(format!(
                "node {j}: base normal does not meet the curve near the initial guess"
            )));
        }
        match safe_newton(f, lo, hi, s0, 1e-15, PROJECTION_MAX_ITER) {
            Some((s, it)) => {
                if f(s).1 <= 0.0 {
                    return Err(Error::Projection(format!("node {j}: curve folds back over the base normal")));
                }
                Ok((s, it))
            }
            None => Err(Error::Projection(format!(
                "node {j}: Newton did not converge in {PROJECTION_MAX_ITER} iterations"
            ))),
        }
    };
    let solved = exec.map_range(n, solve);
    let mut sigma = Vec::with_capacity(n);
    let mut iterations = 0;
    for r in solved {
        let (s, it) = r?;
        sigma.push(s);
        iterations = iterations.max(it);
    }
    if sigma.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Projection("projection parameters are not strictly increasing".into()));
    }
    let mut phi = VectorField::zeros(n, d);
    let mut residual: f64 = 0.0;
    for j in 1..n - 1 {
        let p = spline.point(sigma[j]);
        let v: Vec<f64> = p.iter().zip(base.node(j)).map(|(a, b)| a - b).collect();
        residual = residual.max(dot(&v, tangent.get(j)).abs() / length);
        phi.get_mut(j).copy_from_slice(&v);
    }
    Ok(GraphProjection { phi: NormalField::project(phi, base), sigma, residual, iterations })
}

/// `‖φ‖_{L²(dx)}` of the normal graph of `curve` over `base`, trapezoidal
/// in the base parameter `x_j = j/N`.
pub fn graph_distance(base: &DiscreteCurve, curve: &DiscreteCurve) -> Result<f64> {
    let proj = normal_graph_project(base, curve)?;
    Ok(l2_dx(&proj.phi))
}

pub(crate) fn l2_dx(field: &VectorField) -> f64 {
    let n = field.n_nodes() - 1;
    let h = 1.0 / n as f64;
    let mut acc = 0.0;
    for j in 0..=n {
        let w = if j == 0 || j == n { 0.5 * h } else { h };
        acc += w * dot(field.get(j), field.get(j));
    }
    acc.sqrt()
}
