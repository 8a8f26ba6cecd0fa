//! Classification losses over class-probability vectors.

use crate::scalar::Real;

/// Clamp applied to probabilities before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Loss {
    /// Log-softmax of the probability vector (probabilities used as logits), then NLL.
    CrossEntropy,
    /// `−Σ y_i log(max(ŷ_i, floor))` on the raw probabilities.
    Nll,
}

impl Loss {
    pub fn value<T: Real>(self, y_onehot: &[T], probs: &[T]) -> T {
        match self {
            Loss::CrossEntropy => loss_cross_entropy(y_onehot, probs),
            Loss::Nll => loss_nll(y_onehot, probs),
        }
    }

    /// `∂loss/∂probs`.
    pub fn grad<T: Real>(self, y_onehot: &[T], probs: &[T]) -> Vec<T> {
        match self {
            Loss::CrossEntropy => {
                let sm = softmax(probs);
                let total: T = y_onehot.iter().copied().sum();
                sm.iter().zip(y_onehot).map(|(&s, &y)| s * total - y).collect()
            }
            Loss::Nll => {
                let floor = T::lit(PROB_FLOOR);
                y_onehot
                    .iter()
                    .zip(probs)
                    .map(|(&y, &p)| if p > floor { -y / p } else { T::zero() })
                    .collect()
            }
        }
    }

    /// Value and gradient for the class index `label`.
    pub fn value_and_grad<T: Real>(self, label: usize, probs: &[T]) -> (T, Vec<T>) {
        let y = one_hot(label, probs.len());
        (self.value(&y, probs), self.grad(&y, probs))
    }
}

pub fn one_hot<T: Real>(label: usize, n_classes: usize) -> Vec<T> {
    let mut y = vec![T::zero(); n_classes];
    y[label] = T::one();
    y
}

pub fn loss_nll<T: Real>(y_onehot: &[T], probs: &[T]) -> T {
    let floor = T::lit(PROB_FLOOR);
    -y_onehot
        .iter()
        .zip(probs)
        .map(|(&y, &p)| if y == T::zero() { T::zero() } else { y * p.max(floor).ln() })
        .sum::<T>()
}

pub fn loss_cross_entropy<T: Real>(y_onehot: &[T], probs: &[T]) -> T {
    let lse = log_sum_exp(probs);
    -y_onehot
        .iter()
        .zip(probs)
        .map(|(&y, &p)| y * (p - lse))
        .sum::<T>()
}

fn log_sum_exp<T: Real>(v: &[T]) -> T {
    let m = v.iter().copied().fold(T::neg_infinity(), T::max);
    m + v.iter().map(|&x| (x - m).exp()).sum::<T>().ln()
}

fn softmax<T: Real>(v: &[T]) -> Vec<T> {
    let lse = log_sum_exp(v);
    v.iter().map(|&x| (x - lse).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn nll_values() {
        assert_eq!(loss_nll(&[0.0, 1.0], &[0.0, 1.0]), 0.0);
        let l = loss_nll(&[0.0, 0.0, 1.0, 0.0], &[0.25; 4]);
        assert!((l - 4f64.ln()).abs() < 1e-15);
        let l: f64 = loss_nll(&[1.0, 0.0], &[0.0, 1.0]);
        assert!((l - 27.631021115928547).abs() < 1e-9);
        assert!(l.is_finite());
    }

    #[test]
    fn cross_entropy_values() {
        assert!((loss_cross_entropy(&[1.0, 0.0], &[0.5, 0.5]) - 2f64.ln()).abs() < 1e-15);
        let expected = (1.0 + (-1.0f64).exp()).ln();
        assert!((loss_cross_entropy(&[1.0, 0.0], &[1.0, 0.0]) - expected).abs() < 1e-15);
        assert!((expected - 0.3133).abs() < 1e-4);
    }

    #[test]
    fn cross_entropy_shift_invariance() {
        let p = [0.2, 0.5, 0.3];
        let shifted: Vec<f64> = p.iter().map(|v| v + 7.25).collect();
        let y = [0.0, 0.0, 1.0];
        assert!((loss_cross_entropy(&y, &p) - loss_cross_entropy(&y, &shifted)).abs() < 1e-12);
    }

    fn fd_check(loss: Loss, probs: &[f64], label: usize) {
        let (_, g) = loss.value_and_grad(label, probs);
        let y = one_hot(label, probs.len());
        for j in 0..probs.len() {
            let h = 1e-6;
            let mut up = probs.to_vec();
            let mut dn = probs.to_vec();
            up[j] += h;
            dn[j] -= h;
            let fd = (loss.value(&y, &up) - loss.value(&y, &dn)) / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-6 * (1.0 + fd.abs()), "{loss:?} j={j}: {fd} vs {}", g[j]);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        fd_check(Loss::CrossEntropy, &[0.1, 0.6, 0.3], 1);
        fd_check(Loss::Nll, &[0.1, 0.6, 0.3], 2);
        fd_check(Loss::Nll, &[0.7, 0.3], 0);
    }

    proptest! {
        #[test]
        fn losses_are_finite(raw in proptest::collection::vec(0.0f64..1.0, 2..8), label in 0usize..8) {
            let label = label % raw.len();
            let s: f64 = raw.iter().sum::<f64>().max(1e-300);
            let probs: Vec<f64> = raw.iter().map(|v| v / s).collect();
            let y = one_hot(label, probs.len());
            prop_assert!(loss_nll(&y, &probs).is_finite());
            prop_assert!(loss_nll(&y, &probs) >= 0.0);
            prop_assert!(loss_cross_entropy(&y, &probs).is_finite());
        }
    }
}
