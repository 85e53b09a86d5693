//! Radial grids on [0, R] with quadrature against the measure r dr.

use crate::real::Real;

/// Nodes 0 = r_0 < r_1 < ... < r_N = R with weights w_i such that
/// sum w_i g(r_i) approximates the integral of g(r) r dr over [0, R].
/// The weights integrate the piecewise-quadratic interpolant exactly,
/// so the rule is exact for polynomials of degree <= 2 on each cell pair.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid<T: Real> {
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> RadialGrid<T> {
    /// Uniform grid with n cells on [0, radius].
    pub fn uniform(radius: T, n: usize) -> Self {
        assert!(n >= 2, "need at least two cells");
        assert!(radius > T::zero());
        let h = radius / T::of_usize(n);
        let nodes: Vec<T> = (0..=n).map(|i| h * T::of_usize(i)).collect();
        Self::from_nodes(nodes)
    }

    /// Cell-centered grid on (0, radius]: nodes (i + 1/2) h, h = radius/n,
    /// with exact cell weights h * r_i for the r dr measure. The cells tile
    /// [0, radius], so `integrate` covers the whole interval even though no
    /// node sits at r = 0.
    pub fn staggered(radius: T, n: usize) -> Self {
        assert!(n >= 2 && radius > T::zero());
        let h = radius / T::of_usize(n);
        let half = T::of(0.5);
        let nodes: Vec<T> = (0..n).map(|i| h * (T::of_usize(i) + half)).collect();
        let weights: Vec<T> = nodes.iter().map(|&r| h * r).collect();
        Self { nodes, weights }
    }

    /// Build from explicit nodes; r_0 must be exactly zero, nodes strictly increasing.
    pub fn from_nodes(nodes: Vec<T>) -> Self {
        assert!(nodes.len() >= 3);
        assert!(nodes[0] == T::zero(), "grid must start at r = 0");
        for w in nodes.windows(2) {
            assert!(w[1] > w[0], "nodes must be strictly increasing");
        }
        let weights = quadratic_weights(&nodes);
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn radius(&self) -> T {
        *self.nodes.last().unwrap()
    }

    /// Integral of g(r) r dr over [0, R] from nodal samples.
    pub fn integrate(&self, g: &[T]) -> T {
        assert_eq!(g.len(), self.nodes.len());
        g.iter().zip(&self.weights).map(|(&gi, &wi)| gi * wi).sum()
    }

    /// Weighted L2 inner product: integral of f g r dr.
    pub fn inner(&self, f: &[T], g: &[T]) -> T {
        f.iter()
            .zip(g)
            .zip(&self.weights)
            .map(|((&fi, &gi), &wi)| fi * gi * wi)
            .sum()
    }

    pub fn norm(&self, f: &[T]) -> T {
        self.inner(f, f).sqrt()
    }
}

/// Weights integrating the piecewise-quadratic interpolant against r dr.
/// Cells are consumed in pairs; an odd trailing cell reuses the last triple.
fn quadratic_weights<T: Real>(nodes: &[T]) -> Vec<T> {
    let n = nodes.len();
    let mut w = vec![T::zero(); n];
    let mut i = 0;
    while i + 2 < n {
        add_triple(nodes, i, nodes[i], nodes[i + 2], &mut w);
        i += 2;
    }
    if i + 1 < n {
        // one cell left: integrate the quadratic through the last three nodes
        add_triple(nodes, n - 3, nodes[n - 2], nodes[n - 1], &mut w);
    }
    w
}

/// Add to w the exact integrals of l_j(r) r dr over [lo, hi], where l_j are
/// the Lagrange basis quadratics on nodes r_i, r_{i+1}, r_{i+2}.
fn add_triple<T: Real>(nodes: &[T], i: usize, lo: T, hi: T, w: &mut [T]) {
    let pts = [nodes[i], nodes[i + 1], nodes[i + 2]];
    for j in 0..3 {
        let (a, b) = (pts[(j + 1) % 3], pts[(j + 2) % 3]);
        let denom = (pts[j] - a) * (pts[j] - b);
        // l_j(r) * r = (r - a)(r - b) r / denom: integrate the cubic exactly
        let quarter = T::of(0.25);
        let third = T::of(1.0 / 3.0);
        let half = T::of(0.5);
        let prim = |r: T| {
            quarter * r.powi(4) - third * (a + b) * r.powi(3) + half * a * b * r.powi(2)
        };
        w[i + j] = w[i + j] + (prim(hi) - prim(lo)) / denom;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_low_degree() {
        let g = RadialGrid::<f64>::uniform(2.0, 17); // odd cell count on purpose
        for k in 0..=2u32 {
            let samples: Vec<f64> = g.nodes().iter().map(|r| r.powi(k as i32)).collect();
            let exact = 2.0f64.powi(k as i32 + 2) / (k as f64 + 2.0);
            assert!(
                (g.integrate(&samples) - exact).abs() < 1e-12,
                "degree {k} not exact"
            );
        }
    }

    #[test]
    fn smooth_convergence() {
        let f = |r: f64| (3.0 * r).sin();
        let exact = {
            // integral of sin(3r) r dr on [0,1]
            let (s, c) = (3.0f64.sin(), 3.0f64.cos());
            s / 9.0 - c / 3.0
        };
        let coarse = {
            let g = RadialGrid::<f64>::uniform(1.0, 32);
            let v: Vec<f64> = g.nodes().iter().map(|&r| f(r)).collect();
            (g.integrate(&v) - exact).abs()
        };
        let fine = {
            let g = RadialGrid::<f64>::uniform(1.0, 64);
            let v: Vec<f64> = g.nodes().iter().map(|&r| f(r)).collect();
            (g.integrate(&v) - exact).abs()
        };
        assert!(fine < coarse / 8.0, "coarse {coarse:.3e} fine {fine:.3e}");
    }
}
