//! Symmetric positive definite banded systems, factored once and solved
//! for several right-hand sides.

use crate::error::{Error, Result};

/// `L D Lᵀ` factors of a symmetric banded matrix with `bw` off-diagonals.
#[derive(Debug, Clone)]
pub struct BandedLdl {
    n: usize,
    bw: usize,
    // l[i * bw + (k - 1)] = L[i][i - k]
    l: Vec<f64>,
    d: Vec<f64>,
}

impl BandedLdl {
    /// `lower(i, k)` returns `A[i][i − k]` for `k = 0..=bw` and `k ≤ i`.
    pub fn factor(n: usize, bw: usize, lower: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut l = vec![0.0; n * bw];
        let mut d = vec![0.0; n];
        for i in 0..n {
            for k in (1..=bw.min(i)).rev() {
                let j = i - k;
                // A[i][j] − Σ_m L[i][m] D[m] L[j][m] over m < j in both bands
                let mut acc = lower(i, k);
                for m in j.saturating_sub(bw)..j {
                    if i - m <= bw {
                        acc -= l[i * bw + (i - m - 1)] * d[m] * l[j * bw + (j - m - 1)];
                    }
                }
                l[i * bw + (k - 1)] = acc / d[j];
            }
            let mut acc = lower(i, 0);
            for m in i.saturating_sub(bw)..i {
                let lim = l[i * bw + (i - m - 1)];
                acc -= lim * lim * d[m];
            }
            if !(acc > 0.0) {
                return Err(Error::Convergence(format!("banded factorization lost definiteness at row {i}")));
            }
            d[i] = acc;
        }
        Ok(BandedLdl { n, bw, l, d })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Solves in place.
    pub fn solve(&self, rhs: &mut [f64]) {
        assert_eq!(rhs.len(), self.n);
        let bw = self.bw;
        for i in 0..self.n {
            for m in i.saturating_sub(bw)..i {
                rhs[i] -= self.l[i * bw + (i - m - 1)] * rhs[m];
            }
        }
        for (r, d) in rhs.iter_mut().zip(&self.d) {
            *r /= d;
        }
        for i in (0..self.n).rev() {
            for m in i + 1..(i + bw + 1).min(self.n) {
                rhs[i] -= self.l[m * bw + (m - i - 1)] * rhs[m];
            }
        }
    }
}
