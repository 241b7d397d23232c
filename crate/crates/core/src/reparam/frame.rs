//! Continuous orthonormal frames of the normal bundle.

use crate::error::Result;
use crate::geometry::{dot, norm, unit_tangent, DiscreteCurve, NormalField, VectorField};

fn reflect(v: &mut [f64], axis: &[f64], axis2: f64) {
    let c = 2.0 * dot(axis, v) / axis2;
    for (vi, ai) in v.iter_mut().zip(axis) {
        *vi -= c * ai;
    }
}

/// Gram-Schmidt of `vs` against `t` and each other, in place.
fn orthonormalize(t: &[f64], vs: &mut [Vec<f64>]) {
    for i in 0..vs.len() {
        let (done, rest) = vs.split_at_mut(i);
        let v = &mut rest[0];
        for _ in 0..2 {
            let a = dot(v, t);
            v.iter_mut().zip(t).for_each(|(x, y)| *x -= a * y);
            for u in done.iter() {
                let a = dot(v, u);
                v.iter_mut().zip(u).for_each(|(x, y)| *x -= a * y);
            }
        }
        let l = norm(v);
        v.iter_mut().for_each(|x| *x /= l);
    }
}

/// `d − 1` orthonormal normal fields along the curve.
///
/// In the plane the single field is the tangent turned by +90°. In higher
/// dimensions an initial frame at node 0 is transported along the polygon
/// by the double-reflection rule, which approximates the rotation-minimizing
/// (parallel) frame to second order.
pub fn normal_frame(base: &DiscreteCurve) -> Result<Vec<NormalField>> {
    let dim = base.dim();
    let n = base.n_nodes();
    let tangent = unit_tangent(base);
    let mut fields = vec![VectorField::zeros(n, dim); dim - 1];
    if dim == 2 {
        for j in 0..n {
            let t = tangent.get(j);
            fields[0].get_mut(j).copy_from_slice(&[-t[1], t[0]]);
        }
    } else {
        // start from the coordinate axes least aligned with the first tangent
        let t0 = tangent.get(0);
        let mut axes: Vec<usize> = (0..dim).collect();
        axes.sort_by(|&a, &b| t0[a].abs().total_cmp(&t0[b].abs()));
        let mut frame: Vec<Vec<f64>> = axes[..dim - 1]
            .iter()
            .map(|&a| {
                let mut e = vec![0.0; dim];
                e[a] = 1.0;
                e
            })
            .collect();
        orthonormalize(t0, &mut frame);
        for j in 0..n {
            if j > 0 {
                let v1: Vec<f64> = base.node(j).iter().zip(base.node(j - 1)).map(|(a, b)| a - b).collect();
                let c1 = dot(&v1, &v1);
                let mut tl = tangent.get(j - 1).to_vec();
                reflect(&mut tl, &v1, c1);
                let t = tangent.get(j);
                let v2: Vec<f64> = t.iter().zip(&tl).map(|(a, b)| a - b).collect();
                let c2 = dot(&v2, &v2);
                for r in frame.iter_mut() {
                    reflect(r, &v1, c1);
                    if c2 > 1e-30 {
                        reflect(r, &v2, c2);
                    }
                }
                orthonormalize(t, &mut frame);
            }
            for (f, r) in fields.iter_mut().zip(&frame) {
                f.get_mut(j).copy_from_slice(r);
            }
        }
    }
    Ok(fields.into_iter().map(|f| NormalField::project(f, base)).collect())
}
