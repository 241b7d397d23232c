//! Per-node Taylor jets in arc length.
//!
//! A jet stores a field together with its first `order` arc-length
//! derivatives at every node. Derivatives of the raw samples come from the
//! stencils once; every composite quantity (projections, products, ∇_s)
//! is then formed node by node with the Leibniz rule, so nothing is
//! differentiated numerically twice.

use super::stencil::ArcStencils;

#[derive(Debug, Clone)]
pub struct Jet {
    n: usize,
    dim: usize,
    order: usize,
    data: Vec<f64>,
}

fn binom(n: usize, k: usize) -> f64 {
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

impl Jet {
    pub fn zeros(n: usize, dim: usize, order: usize) -> Self {
        Jet { n, dim, order, data: vec![0.0; n * (order + 1) * dim] }
    }

    /// Differentiates node-major samples up to `order`.
    pub fn from_samples(values: &[f64], dim: usize, st: &ArcStencils, order: usize) -> Self {
        let n = st.n_nodes();
        assert_eq!(values.len(), n * dim);
        assert!(order <= st.max_order(), "stencils built only to order {}", st.max_order());
        let mut jet = Jet::zeros(n, dim, order);
        let mut buf = vec![0.0; dim];
        for j in 0..n {
            jet.at_mut(j, 0).copy_from_slice(&values[j * dim..(j + 1) * dim]);
            for m in 1..=order {
                st.apply_at(values, dim, m, j, &mut buf);
                jet.at_mut(j, m).copy_from_slice(&buf);
            }
        }
        jet
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, j: usize, m: usize) -> usize {
        (j * (self.order + 1) + m) * self.dim
    }

    pub fn at(&self, j: usize, m: usize) -> &[f64] {
        let i = self.idx(j, m);
        &self.data[i..i + self.dim]
    }

    pub fn at_mut(&mut self, j: usize, m: usize) -> &mut [f64] {
        let i = self.idx(j, m);
        &mut self.data[i..i + self.dim]
    }

    /// Node-major copy of the m-th derivative.
    pub fn component(&self, m: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * self.dim);
        for j in 0..self.n {
            out.extend_from_slice(self.at(j, m));
        }
        out
    }

    pub fn values(&self) -> Vec<f64> {
        self.component(0)
    }

    pub fn truncate(&self, order: usize) -> Jet {
        assert!(order <= self.order);
        if order == self.order {
            return self.clone();
        }
        let mut out = Jet::zeros(self.n, self.dim, order);
        for j in 0..self.n {
            for m in 0..=order {
                out.at_mut(j, m).copy_from_slice(self.at(j, m));
            }
        }
        out
    }

    /// The jet of the first derivative (one order shorter).
    pub fn derivative(&self) -> Jet {
        assert!(self.order >= 1);
        let mut out = Jet::zeros(self.n, self.dim, self.order - 1);
        for j in 0..self.n {
            for m in 0..self.order {
                out.at_mut(j, m).copy_from_slice(self.at(j, m + 1));
            }
        }
        out
    }

    /// Replaces the value level, keeping derivatives.
    pub fn with_values(mut self, values: &[f64]) -> Jet {
        for j in 0..self.n {
            let v = values[j * self.dim..(j + 1) * self.dim].to_vec();
            self.at_mut(j, 0).copy_from_slice(&v);
        }
        self
    }

    /// Euclidean product, a scalar jet.
    pub fn dot(&self, other: &Jet) -> Jet {
        assert_eq!(self.dim, other.dim);
        let order = self.order.min(other.order);
        let mut out = Jet::zeros(self.n, 1, order);
        for j in 0..self.n {
            for m in 0..=order {
                let mut acc = 0.0;
                for i in 0..=m {
                    let a = self.at(j, i);
                    let b = other.at(j, m - i);
                    let p: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                    acc += binom(m, i) * p;
                }
                out.at_mut(j, m)[0] = acc;
            }
        }
        out
    }

    /// Product of a scalar jet with this jet.
    pub fn scale_by(&self, s: &Jet) -> Jet {
        assert_eq!(s.dim, 1);
        let order = self.order.min(s.order);
        let mut out = Jet::zeros(self.n, self.dim, order);
        for j in 0..self.n {
            for m in 0..=order {
                for i in 0..=m {
                    let c = binom(m, i) * s.at(j, i)[0];
                    let v = self.at(j, m - i).to_vec();
                    for (o, x) in out.at_mut(j, m).iter_mut().zip(v) {
                        *o += c * x;
                    }
                }
            }
        }
        out
    }

    /// `a * self + b * other`, truncated to the common order.
    pub fn lin(&self, a: f64, other: &Jet, b: f64) -> Jet {
        assert_eq!(self.dim, other.dim);
        let order = self.order.min(other.order);
        let mut out = Jet::zeros(self.n, self.dim, order);
        for j in 0..self.n {
            for m in 0..=order {
                let x = self.at(j, m);
                let y = other.at(j, m);
                let o: Vec<f64> = x.iter().zip(y).map(|(p, q)| a * p + b * q).collect();
                out.at_mut(j, m).copy_from_slice(&o);
            }
        }
        out
    }

    pub fn scale(&self, a: f64) -> Jet {
        Jet { n: self.n, dim: self.dim, order: self.order, data: self.data.iter().map(|x| a * x).collect() }
    }

    /// Normal connection: `∇_s ψ = ∂_s ψ − ⟨∂_s ψ, τ⟩ τ` as a jet, given the
    /// tangent jet `tau`.
    pub fn nabla(&self, tau: &Jet) -> Jet {
        let d = self.derivative();
        let t = tau.truncate(tau.order.min(d.order));
        let p = d.dot(&t);
        d.lin(1.0, &t.scale_by(&p), -1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leibniz_products_match_direct_differentiation() {
        let n = 81;
        let s: Vec<f64> = (0..n).map(|j| j as f64 / (n - 1) as f64).collect();
        let st = ArcStencils::from_grid(s.clone(), 3).unwrap();
        let a: Vec<f64> = s.iter().flat_map(|t| [t.sin(), t * t]).collect();
        let b: Vec<f64> = s.iter().flat_map(|t| [t.cos(), 1.0 + t]).collect();
        let ja = Jet::from_samples(&a, 2, &st, 3);
        let jb = Jet::from_samples(&b, 2, &st, 3);
        let p = ja.dot(&jb);
        // a·b = sin t cos t + t^2 (1 + t) = sin(2t)/2 + t^2 + t^3
        let j = 40;
        let t = s[j];
        let exact = [
            (2.0 * t).sin() / 2.0 + t * t + t * t * t,
            (2.0 * t).cos() + 2.0 * t + 3.0 * t * t,
            -2.0 * (2.0 * t).sin() + 2.0 + 6.0 * t,
            -4.0 * (2.0 * t).cos() + 6.0,
        ];
        for m in 0..=3 {
            assert!((p.at(j, m)[0] - exact[m]).abs() < 1e-3, "m={m}");
        }
        let sc = ja.scale_by(&p);
        assert_eq!(sc.order(), 3);
        assert!((sc.at(j, 0)[0] - t.sin() * exact[0]).abs() < 1e-12);
    }
}
