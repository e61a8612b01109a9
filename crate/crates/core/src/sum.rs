//! Deterministic summation: Neumaier's compensated accumulator and a
//! pairwise tree reduction with fixed split points.

use crate::scalar::Real;

/// Running compensated sum (Neumaier's variant of Kahan summation).
#[derive(Clone, Copy, Debug)]
pub struct Neumaier<T> {
    sum: T,
    comp: T,
}

impl<T: Real> Default for Neumaier<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Neumaier<T> {
    pub fn new() -> Self {
        Self {
            sum: T::zero(),
            comp: T::zero(),
        }
    }

    #[inline]
    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> T {
        self.sum + self.comp
    }
}

impl<T: Real> Extend<T> for Neumaier<T> {
    fn extend<I: IntoIterator<Item = T>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

pub fn neumaier_sum<T: Real>(xs: &[T]) -> T {
    let mut acc = Neumaier::new();
    acc.extend(xs.iter().copied());
    acc.value()
}

const PAIRWISE_LEAF: usize = 16;

/// Pairwise sum; the tree shape depends only on `xs.len()`.
pub fn pairwise_sum<T: Real>(xs: &[T]) -> T {
    if xs.len() <= PAIRWISE_LEAF {
        let mut s = T::zero();
        for &x in xs {
            s += x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Streaming pairwise summation for sequences too long to buffer.
///
/// Leaves of `PAIRWISE_LEAF` terms are combined like a binary counter, so the
/// reduction tree depends only on the number of terms pushed.
#[derive(Clone, Debug)]
pub struct StreamingPairwise<T> {
    leaf: T,
    leaf_len: usize,
    // (subtree size in leaves, partial sum)
    stack: Vec<(u64, T)>,
}

impl<T: Real> Default for StreamingPairwise<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> StreamingPairwise<T> {
    pub fn new() -> Self {
        Self {
            leaf: T::zero(),
            leaf_len: 0,
            stack: Vec::new(),
        }
    }

    #[inline]
    pub fn add(&mut self, x: T) {
        self.leaf += x;
        self.leaf_len += 1;
        if self.leaf_len == PAIRWISE_LEAF {
            let mut node = (1u64, self.leaf);
            while let Some(&(size, s)) = self.stack.last() {
                if size != node.0 {
                    break;
                }
                self.stack.pop();
                node = (size * 2, s + node.1);
            }
            self.stack.push(node);
            self.leaf = T::zero();
            self.leaf_len = 0;
        }
    }

    pub fn value(&self) -> T {
        let mut s = self.leaf;
        for &(_, v) in self.stack.iter().rev() {
            s += v;
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neumaier_recovers_cancelled_terms() {
        let xs = [1.0f64, 1e100, 1.0, -1e100];
        assert_eq!(neumaier_sum(&xs), 2.0);
    }

    #[test]
    fn pairwise_matches_exact_integer_sum() {
        let xs: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&xs), 500_500.0);
        assert_eq!(pairwise_sum::<f64>(&[]), 0.0);
    }

    #[test]
    fn streaming_pairwise_is_accurate() {
        let mut acc = StreamingPairwise::new();
        let mut nm = Neumaier::new();
        for k in 0..100_000u32 {
            let x = 0.1f64 + f64::from(k % 7) * 1e-3;
            acc.add(x);
            nm.add(x);
        }
        assert!((acc.value() - nm.value()).abs() < 1e-9);
    }
}
