//! Gauss-Legendre rules on `[0, 1]`.

use crate::scalar::Real;

/// Nodes and weights of the `n`-point rule on `[0, 1]`; weights sum to one.
#[derive(Clone, Debug)]
pub struct GaussLegendre<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> GaussLegendre<T> {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "quadrature order must be positive");
        let mut nodes = vec![T::zero(); n];
        let mut weights = vec![T::zero(); n];
        let nt = T::from_u64_exact(n as u64);
        let two = T::of(2.0);
        for i in 0..n.div_ceil(2) {
            // Chebyshev-like initial guess, then Newton on P_n
            let guess_turns = (T::from_u64_exact(i as u64) + T::of(0.75))
                / (two * nt + T::one());
            let (_, mut x) = guess_turns.sin_cos_turns();
            let mut dp = T::one();
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= T::epsilon() * T::of(4.0) {
                    let (_, d) = legendre(n, x);
                    dp = d;
                    break;
                }
            }
            let w = two / ((T::one() - x * x) * dp * dp);
            // map [-1, 1] -> [0, 1]
            let half = T::half();
            nodes[i] = half - half * x;
            nodes[n - 1 - i] = half + half * x;
            weights[i] = half * w;
            weights[n - 1 - i] = half * w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre<T: Real>(n: usize, x: T) -> (T, T) {
    let mut p0 = T::one();
    let mut p1 = x;
    for k in 2..=n {
        let k = T::from_u64_exact(k as u64);
        let p2 = ((T::of(2.0) * k - T::one()) * x * p1 - (k - T::one()) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (T::one(), T::zero());
    }
    let nt = T::from_u64_exact(n as u64);
    (p1, nt * (x * p1 - p0) / (x * x - T::one()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dd::DoubleDouble;

    #[test]
    fn integrates_polynomials_exactly() {
        for n in 1..=12 {
            let g = GaussLegendre::<f64>::new(n);
            for k in 0..(2 * n) {
                let s: f64 = g
                    .nodes
                    .iter()
                    .zip(&g.weights)
                    .map(|(x, w)| w * x.powi(k as i32))
                    .sum();
                assert!((s - 1.0 / (k as f64 + 1.0)).abs() < 1e-13, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn double_double_rule_is_accurate() {
        let g = GaussLegendre::<DoubleDouble>::new(8);
        let mut s = DoubleDouble::ZERO;
        for (x, w) in g.nodes.iter().zip(&g.weights) {
            s += *w * x.powi(15);
        }
        assert!((s - DoubleDouble::ratio(1, 16)).hi().abs() < 1e-30);
    }
}
