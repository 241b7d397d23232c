//! Shared fixtures for unit tests.

use std::f64::consts::PI;

use rand::Rng;

use crate::geometry::{DiscreteCurve, NormalField, VectorField};

/// A planar segment bent by three random modes, amplitudes decaying like 1/k².
pub fn random_curve(n: usize, rng: &mut impl Rng) -> DiscreteCurve {
    let a: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.15..0.15)).collect();
    let b: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.15..0.15)).collect();
    DiscreteCurve::from_fn(n, 2, |x| vec![x + modes(&b, x), modes(&a, x)]).unwrap()
}

pub fn modes(c: &[f64], x: f64) -> f64 {
    c.iter().enumerate().map(|(i, ci)| ci * ((i + 1) as f64 * PI * x).sin() / ((i + 1) * (i + 1)) as f64).sum()
}

/// Random coefficients for [`clamped_direction_with`].
pub fn random_coefficients(rng: &mut impl Rng) -> Vec<f64> {
    (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// `x²(1−x)² Σ c_k sin(kπx) · (1, 0.3, 0, …)` projected to the normal bundle.
pub fn clamped_direction_with(curve: &DiscreteCurve, coef: &[f64]) -> NormalField {
    let dim = curve.dim();
    let g = VectorField::from_fn(curve, |x, _| {
        let b: f64 = coef.iter().enumerate().map(|(i, a)| a * ((i + 1) as f64 * PI * x).sin()).sum();
        let w = x * x * (1.0 - x) * (1.0 - x) * b;
        let mut v = vec![0.0; dim];
        v[0] = w;
        v[1] = 0.3 * w;
        v
    });
    NormalField::project(g, curve)
}

pub fn clamped_direction(curve: &DiscreteCurve, rng: &mut impl Rng) -> NormalField {
    let coef = random_coefficients(rng);
    clamped_direction_with(curve, &coef)
}

pub fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}
