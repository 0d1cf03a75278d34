//! Quadrature rules shared by the chart builder and the moment integrals.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;

/// Gauss–Legendre nodes and weights on the reference interval `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    /// `n`-point rule; panics only for `n == 0`.
    pub fn new(n: usize) -> Self {
        let rule = GaussLegendre::new(NonZeroUsize::new(n).expect("rule needs at least one node"));
        let mut pairs = rule.as_node_weight_pairs().to_vec();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (nodes, weights) = pairs.into_iter().unzip();
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped onto `[a, b]`, in increasing order of node.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// Periodic trapezoid rule for `∫₀^{2π} f(θ) dθ` on `n` equispaced angles.
pub fn periodic_trapezoid(n: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    let step = std::f64::consts::TAU / n as f64;
    (0..n).map(|i| f(step * i as f64)).sum::<f64>() * step
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn gauss_is_exact_for_polynomials() {
        let rule = GaussRule::new(5);
        // degree 9 is the exactness limit
        let got = rule.integrate(-1.0, 2.0, |x| x.powi(9) - 3.0 * x.powi(4) + 1.0);
        let exact = (2f64.powi(10) - 1.0) / 10.0 - 3.0 * (32.0 + 1.0) / 5.0 + 3.0;
        assert!((got - exact).abs() < 1e-12);
        let total: f64 = rule.mapped(0.0, 1.0).map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mapped_nodes_are_sorted() {
        let rule = GaussRule::new(128);
        let xs: Vec<f64> = rule.mapped(-3.0, 3.0).map(|(x, _)| x).collect();
        assert!(xs.windows(2).all(|w| w[0] < w[1]));
        assert!(xs[0] > -3.0 && xs[127] < 3.0);
    }

    #[test]
    fn trapezoid_is_spectral_for_periodic_integrands() {
        // ∫ 1/(2 - cos θ) dθ = 2π/√3
        let exact = TAU / 3f64.sqrt();
        let coarse = periodic_trapezoid(16, |t| 1.0 / (2.0 - t.cos()));
        let fine = periodic_trapezoid(48, |t| 1.0 / (2.0 - t.cos()));
        assert!((coarse - exact).abs() < 1e-8);
        assert!((fine - exact).abs() < 1e-14);
        assert!((periodic_trapezoid(8, |t| t.sin().powi(2)) - PI).abs() < 1e-14);
    }
}
