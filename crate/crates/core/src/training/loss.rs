use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::corpus::Label;
use crate::model::Distribution;

/// Lower clamp applied to probabilities before taking logs.
pub const EPSILON: f64 = 1e-12;

const NORMALIZATION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub ce: f64,
    pub kl: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(ce: f64, kl: f64, alpha: f64) -> Self {
        LossBreakdown {
            ce,
            kl,
            total: if alpha == 0.0 { ce } else { ce + alpha * kl },
        }
    }

    pub fn is_finite(&self) -> bool {
        self.ce.is_finite() && self.kl.is_finite() && self.total.is_finite()
    }
}

/// `-½·ln(p1·p2)` on the true-label probabilities of the two passes.
pub fn ce_loss(p1: f64, p2: f64) -> f64 {
    -0.5 * (p1.max(EPSILON).ln() + p2.max(EPSILON).ln())
}

fn kl(p: &[f64; 2], q: &[f64; 2]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(a, b)| {
            let (a, b) = (a.max(EPSILON), b.max(EPSILON));
            a * (a / b).ln()
        })
        .sum()
}

/// Symmetric KL: `½·(KL(P1‖P2) + KL(P2‖P1))`.
pub fn bidirectional_kl(p1: &Distribution, p2: &Distribution) -> Result<f64, TrainError> {
    for d in [p1, p2] {
        let s = d.0[0] + d.0[1];
        if !((s - 1.0).abs() <= NORMALIZATION_TOLERANCE && d.0.iter().all(|x| *x >= 0.0)) {
            return Err(TrainError::NotNormalized(d.0));
        }
    }
    Ok(0.5 * (kl(&p1.0, &p2.0) + kl(&p2.0, &p1.0)))
}

/// Loss of two passes plus d(total)/d(logits) for each pass.
///
/// The gradients ignore the clamp, which only matters for probabilities
/// below [`EPSILON`].
pub(crate) fn loss_and_logit_grads(
    p: &Distribution,
    q: &Distribution,
    label: Label,
    alpha: f64,
) -> Result<(LossBreakdown, [[f64; 2]; 2]), TrainError> {
    let y = label.index();
    let ce = ce_loss(p.0[y], q.0[y]);
    let kl_value = bidirectional_kl(p, q)?;
    let breakdown = LossBreakdown::new(ce, kl_value, alpha);

    let (pc, qc) = (p.0.map(|v| v.max(EPSILON)), q.0.map(|v| v.max(EPSILON)));
    let mut out = [[0.0; 2]; 2];
    for (k, (dist, own, other)) in [(p, pc, qc), (q, qc, pc)].into_iter().enumerate() {
        // d/d(prob) of the symmetric KL; the constant term cancels below.
        let g: [f64; 2] = std::array::from_fn(|c| 0.5 * ((own[c] / other[c]).ln() - other[c] / own[c]));
        let mean = dist.0[0] * g[0] + dist.0[1] * g[1];
        for c in 0..2 {
            let ce_grad = 0.5 * (dist.0[c] - if c == y { 1.0 } else { 0.0 });
            let kl_grad = dist.0[c] * (g[c] - mean);
            out[k][c] = ce_grad + alpha * kl_grad;
        }
    }
    Ok((breakdown, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ce_hand_values() {
        assert_eq!(ce_loss(1.0, 1.0), 0.0);
        assert!((ce_loss(0.5, 0.5) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((ce_loss(0.9, 0.8) - 0.164_252).abs() < 1e-6);
        assert!(ce_loss(0.0, 0.0).is_finite());
    }

    #[test]
    fn kl_hand_values() {
        let a = Distribution([0.9, 0.1]);
        let b = Distribution([0.6, 0.4]);
        // 0.9 ln 1.5 + 0.1 ln 0.25 and 0.6 ln(2/3) + 0.4 ln 4
        let forward = 0.9 * 1.5f64.ln() + 0.1 * 0.25f64.ln();
        let backward = 0.6 * (2.0f64 / 3.0).ln() + 0.4 * 4f64.ln();
        let v = bidirectional_kl(&a, &b).unwrap();
        assert!((v - 0.5 * (forward + backward)).abs() < 1e-12);
        assert!((v - 0.26876).abs() < 1e-5);
        assert_eq!(bidirectional_kl(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn kl_rejects_unnormalized() {
        assert!(bidirectional_kl(&Distribution([0.7, 0.7]), &Distribution([0.5, 0.5])).is_err());
        assert!(bidirectional_kl(&Distribution([1.1, -0.1]), &Distribution([0.5, 0.5])).is_err());
    }

    #[test]
    fn uniform_twins_total_is_ln2() {
        let u = Distribution([0.5, 0.5]);
        for label in [Label::Negative, Label::Positive] {
            let (b, _) = loss_and_logit_grads(&u, &u, label, 1.0).unwrap();
            assert!((b.total - std::f64::consts::LN_2).abs() < 1e-12);
        }
    }

    fn dist(z: f64) -> Distribution {
        Distribution::from_logits([0.0, z])
    }

    proptest! {
        #[test]
        fn ce_is_mean_of_single_view_ce(a in 1e-6f64..1.0, b in 1e-6f64..1.0) {
            prop_assert!((ce_loss(a, b) - 0.5 * (-a.ln() - b.ln())).abs() < 1e-9);
        }

        #[test]
        fn kl_symmetric_and_nonnegative(z1 in -8.0f64..8.0, z2 in -8.0f64..8.0) {
            let (p, q) = (dist(z1), dist(z2));
            let a = bidirectional_kl(&p, &q).unwrap();
            prop_assert!(a >= 0.0);
            prop_assert!((a - bidirectional_kl(&q, &p).unwrap()).abs() < 1e-15);
        }

        #[test]
        fn logit_grads_match_finite_differences(
            z1 in -4.0f64..4.0, z2 in -4.0f64..4.0, alpha in 0.0f64..5.0, pos in any::<bool>(),
        ) {
            let label = Label::from(pos);
            let total = |a: f64, b: f64| {
                loss_and_logit_grads(&dist(a), &dist(b), label, alpha).unwrap().0.total
            };
            let (_, g) = loss_and_logit_grads(&dist(z1), &dist(z2), label, alpha).unwrap();
            let h = 1e-5;
            // Only the second logit moves, so its gradient is the directional one.
            let n1 = (total(z1 + h, z2) - total(z1 - h, z2)) / (2.0 * h);
            let n2 = (total(z1, z2 + h) - total(z1, z2 - h)) / (2.0 * h);
            prop_assert!((g[0][1] - n1).abs() < 1e-6);
            prop_assert!((g[1][1] - n2).abs() < 1e-6);
            prop_assert!((g[0][0] + g[0][1]).abs() < 1e-12);
        }
    }
}
