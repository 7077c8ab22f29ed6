use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{ClassifierModel, Gradients};

/// AdamW with decoupled weight decay and a linear warmup/decay schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Not applied to biases.
    pub weight_decay: f64,
    /// Share of total steps spent warming up.
    pub warmup_fraction: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
            warmup_fraction: 0.1,
        }
    }
}

/// Learning rate at zero-based `step` out of `total` steps: linear ramp up
/// over the warmup steps, then linear decay towards zero.
pub fn scheduled_lr(base: f64, step: usize, total: usize, warmup_fraction: f64) -> f64 {
    let warmup = (warmup_fraction * total as f64).ceil() as usize;
    if step < warmup {
        base * (step + 1) as f64 / warmup as f64
    } else {
        let remaining = total.saturating_sub(step) as f64;
        base * remaining / (total - warmup).max(1) as f64
    }
}

#[derive(Debug, Clone)]
pub struct AdamW {
    cfg: OptimizerConfig,
    moments: BTreeMap<String, (Vec<f64>, Vec<f64>)>,
    step: i32,
}

impl AdamW {
    pub fn new(cfg: OptimizerConfig) -> Self {
        AdamW {
            cfg,
            moments: BTreeMap::new(),
            step: 0,
        }
    }

    pub fn step(&mut self, model: &mut ClassifierModel, grads: &Gradients, lr: f64) {
        self.step += 1;
        let c = &self.cfg;
        let bc1 = 1.0 - c.beta1.powi(self.step);
        let bc2 = 1.0 - c.beta2.powi(self.step);
        let moments = &mut self.moments;
        model.for_each_param_mut(|name, values| {
            let Some(g) = grads.get(name) else { return };
            let (m, v) = moments
                .entry(name.to_string())
                .or_insert_with(|| (vec![0.0; values.len()], vec![0.0; values.len()]));
            let decay = if name.ends_with("bias") { 0.0 } else { c.weight_decay };
            for i in 0..values.len() {
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
                let update = (m[i] / bc1) / ((v[i] / bc2).sqrt() + c.eps);
                values[i] -= lr * (update + decay * values[i]);
            }
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_shape() {
        let lrs: Vec<f64> = (0..20).map(|s| scheduled_lr(1.0, s, 20, 0.1)).collect();
        assert_eq!(lrs[0], 0.5);
        assert_eq!(lrs[1], 1.0);
        assert!(lrs[2..].windows(2).all(|w| w[1] < w[0]));
        assert!(lrs[19] > 0.0);
        assert_eq!(scheduled_lr(2.0, 0, 1, 0.1), 2.0);
    }
}
