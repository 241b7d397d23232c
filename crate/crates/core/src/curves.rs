//! Test curves: straight segment, circular arc, randomly perturbed or
//! bumped clamped segment, and helix.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::geometry::DiscreteCurve;

/// `(x, 0, …, 0)` for `x ∈ [0, 1]`.
pub fn segment(n_edges: usize, dim: usize) -> Result<DiscreteCurve> {
    DiscreteCurve::from_fn(n_edges, dim, |x| {
        let mut p = vec![0.0; dim];
        p[0] = x;
        p
    })
}

/// Arc of a circle of the given radius centered at the origin, from angle 0
/// to `angle`, in the first two coordinates.
pub fn circle_arc(n_edges: usize, dim: usize, radius: f64, angle: f64) -> Result<DiscreteCurve> {
    DiscreteCurve::from_fn(n_edges, dim, |x| {
        let mut p = vec![0.0; dim];
        p[0] = radius * (angle * x).cos();
        p[1] = radius * (angle * x).sin();
        p
    })
}

/// The unit segment displaced transversally by
/// `amplitude · 16x²(1−x)² · Σ_{k≤3} c_k sin(kπx)/k` in each transverse
/// coordinate, with `c_k` uniform in `[−1, 1]` drawn from `seed`. Ends and
/// end tangents match the straight segment.
pub fn perturbed_segment(n_edges: usize, dim: usize, amplitude: f64, seed: u64) -> Result<DiscreteCurve> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coef: Vec<[f64; 3]> = (1..dim).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
    DiscreteCurve::from_fn(n_edges, dim, |x| {
        let bump = 16.0 * x * x * (1.0 - x) * (1.0 - x);
        let mut p = vec![0.0; dim];
        p[0] = x;
        for (c, q) in coef.iter().zip(p.iter_mut().skip(1)) {
            let modes: f64 = c.iter().enumerate().map(|(k, ck)| ck * ((k + 1) as f64 * PI * x).sin() / (k + 1) as f64).sum();
            *q = amplitude * bump * modes;
        }
        p
    })
}

/// The unit segment with a `sin⁸` bump of height `amplitude` over `[a, b]`
/// in the second coordinate; straight outside, so the clamps see no
/// curvature.
pub fn bumped_segment(n_edges: usize, dim: usize, amplitude: f64, a: f64, b: f64) -> Result<DiscreteCurve> {
    if dim < 2 || !(0.0 <= a && a < b && b <= 1.0) {
        return Err(crate::Error::Precondition(format!("bump needs d ≥ 2 and 0 ≤ a < b ≤ 1, got d = {dim}, [{a}, {b}]")));
    }
    DiscreteCurve::from_fn(n_edges, dim, |x| {
        let mut p = vec![0.0; dim];
        p[0] = x;
        if x > a && x < b {
            p[1] = amplitude * (PI * (x - a) / (b - a)).sin().powi(8);
        }
        p
    })
}

/// `(r cos θ, r sin θ, pitch · θ / 2π)` for `θ ∈ [0, 2π·turns]`; needs `d ≥ 3`.
pub fn helix(n_edges: usize, dim: usize, radius: f64, pitch: f64, turns: f64) -> Result<DiscreteCurve> {
    if dim < 3 {
        return Err(crate::Error::DimensionMismatch(format!("a helix needs d ≥ 3, got {dim}")));
    }
    DiscreteCurve::from_fn(n_edges, dim, |x| {
        let th = 2.0 * PI * turns * x;
        let mut p = vec![0.0; dim];
        p[0] = radius * th.cos();
        p[1] = radius * th.sin();
        p[2] = pitch * th / (2.0 * PI);
        p
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perturbed_segment_is_seeded_and_clamped() {
        let a = perturbed_segment(50, 3, 0.1, 9).unwrap();
        let b = perturbed_segment(50, 3, 0.1, 9).unwrap();
        let c = perturbed_segment(50, 3, 0.1, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.node(0), &[0.0, 0.0, 0.0]);
        assert_eq!(a.node(50), &[1.0, 0.0, 0.0]);
        // transverse offset of node 1 is second order in h
        assert!(a.node(1)[1].abs() < 0.1 * 16.0 * 0.02f64.powi(2) * 2.0);
    }

    #[test]
    fn bump_is_straight_near_the_ends() {
        let c = bumped_segment(40, 2, 0.05, 0.25, 0.75).unwrap();
        assert!((0..=10).chain(30..=40).all(|j| c.node(j)[1] == 0.0));
        assert!((c.node(20)[1] - 0.05).abs() < 1e-15);
        assert!(bumped_segment(40, 2, 0.05, 0.5, 0.5).is_err());
        assert!(bumped_segment(40, 1, 0.05, 0.2, 0.5).is_err());
    }

    #[test]
    fn helix_needs_space() {
        assert!(helix(40, 2, 1.0, 1.0, 1.0).is_err());
        let h = helix(40, 3, 1.0, 2.0, 1.0).unwrap();
        assert!((h.node(40)[2] - 2.0).abs() < 1e-12);
    }
}
