use crate::error::{argument, dimension, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    /// Mean over pixels of squared error against a target map.
    PixelwiseMse,
    /// Mean squared error over a short output vector (usually one value).
    ScalarMse,
    /// Softmax over the outputs followed by negative log-likelihood.
    SoftmaxCrossEntropy,
}

/// What a prediction is compared against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target<'a> {
    Values(&'a [f64]),
    Class(usize),
}

impl LossKind {
    pub fn is_classification(self) -> bool {
        matches!(self, LossKind::SoftmaxCrossEntropy)
    }
}

/// Loss value and its gradient with respect to `prediction`.
pub fn loss(kind: LossKind, prediction: &[f64], target: Target<'_>) -> Result<(f64, Vec<f64>)> {
    if prediction.is_empty() {
        return Err(dimension("empty prediction"));
    }
    match (kind, target) {
        (LossKind::PixelwiseMse | LossKind::ScalarMse, Target::Values(t)) => {
            if t.len() != prediction.len() {
                return Err(dimension(format!("prediction has {} values, target {}", prediction.len(), t.len())));
            }
            let n = prediction.len() as f64;
            let mut value = 0.0;
            let grad = prediction
                .iter()
                .zip(t)
                .map(|(p, y)| {
                    let d = p - y;
                    value += d * d;
                    2.0 * d / n
                })
                .collect();
            Ok((value / n, grad))
        }
        (LossKind::SoftmaxCrossEntropy, Target::Class(c)) => {
            if c >= prediction.len() {
                return Err(argument(format!("class {c} out of range for {} outputs", prediction.len())));
            }
            let max = prediction.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = prediction.iter().map(|z| (z - max).exp()).sum();
            let log_z = max + sum.ln();
            let grad = prediction
                .iter()
                .enumerate()
                .map(|(i, z)| (z - log_z).exp() - if i == c { 1.0 } else { 0.0 })
                .collect();
            Ok((log_z - prediction[c], grad))
        }
        (kind, target) => Err(argument(format!("{kind:?} cannot score target {target:?}"))),
    }
}

/// Index of the largest output; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mse_of_identical_is_zero() {
        let x = [0.3, -1.0, 2.5];
        let (v, g) = loss(LossKind::PixelwiseMse, &x, Target::Values(&x)).unwrap();
        assert_eq!(v, 0.0);
        assert!(g.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn uniform_logits_give_log_three() {
        for c in 0..3 {
            let (v, _) = loss(LossKind::SoftmaxCrossEntropy, &[0.7; 3], Target::Class(c)).unwrap();
            assert!((v - 3.0f64.ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn cross_entropy_is_stable_for_large_logits() {
        let (v, g) = loss(LossKind::SoftmaxCrossEntropy, &[1000.0, -1000.0, 0.0], Target::Class(0)).unwrap();
        assert!(v.abs() < 1e-12 && g.iter().all(|d| d.is_finite()));
    }

    #[test]
    fn shape_and_class_errors() {
        assert!(loss(LossKind::ScalarMse, &[1.0], Target::Values(&[1.0, 2.0])).is_err());
        assert!(loss(LossKind::SoftmaxCrossEntropy, &[1.0, 2.0], Target::Class(2)).is_err());
        assert!(loss(LossKind::SoftmaxCrossEntropy, &[1.0], Target::Values(&[1.0])).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = 1e-6;
        for _ in 0..20 {
            let p: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let t: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let cases = [
                (LossKind::PixelwiseMse, Target::Values(&t)),
                (LossKind::ScalarMse, Target::Values(&t)),
                (LossKind::SoftmaxCrossEntropy, Target::Class(rng.gen_range(0..4))),
            ];
            for (kind, target) in cases {
                let (_, g) = loss(kind, &p, target).unwrap();
                for i in 0..4 {
                    let mut up = p.clone();
                    up[i] += h;
                    let mut down = p.clone();
                    down[i] -= h;
                    let fd = (loss(kind, &up, target).unwrap().0 - loss(kind, &down, target).unwrap().0) / (2.0 * h);
                    let rel = (fd - g[i]).abs() / g[i].abs().max(fd.abs()).max(1e-3);
                    assert!(rel < 1e-6, "{kind:?}: {} vs {fd}", g[i]);
                }
            }
        }
    }
}
