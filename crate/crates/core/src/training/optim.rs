use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::encoder::{EncoderModel, Gradients};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    Adamw,
    Sgd,
}

/// Linear warmup from 0 to `base_lr` over `warmup_ratio * total` steps, then
/// constant.
pub fn lr_at(step: usize, total: usize, cfg: &TrainConfig) -> f64 {
    let warm = cfg.warmup_ratio * total as f64;
    if warm > 0.0 && (step as f64) < warm {
        cfg.base_lr * step as f64 / warm
    } else {
        cfg.base_lr
    }
}

/// AdamW with decoupled weight decay, or plain SGD with L2 decay. Biases are
/// never decayed.
#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    moments: Vec<(Vec<f64>, Vec<f64>)>,
    t: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, model: &EncoderModel) -> Self {
        let grads = model.zero_gradients();
        let moments = match kind {
            OptimizerKind::Adamw => grads
                .blocks()
                .iter()
                .map(|b| (vec![0.0; b.len()], vec![0.0; b.len()]))
                .collect(),
            OptimizerKind::Sgd => Vec::new(),
        };
        Self { kind, moments, t: 0 }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, model: &mut EncoderModel, grads: &Gradients, lr: f64, cfg: &TrainConfig) {
        self.t += 1;
        let t = self.t as i32;
        let (b1, b2) = (cfg.beta1, cfg.beta2);
        let (c1, c2) = (1.0 - b1.powi(t), 1.0 - b2.powi(t));
        let gblocks = grads.blocks();
        for (i, block) in model.blocks_mut().into_iter().enumerate() {
            let g = gblocks[i];
            let wd = if block.decay { cfg.weight_decay } else { 0.0 };
            match self.kind {
                OptimizerKind::Sgd => {
                    for (p, g) in block.values.iter_mut().zip(g) {
                        *p -= lr * (g + wd * *p);
                    }
                }
                OptimizerKind::Adamw => {
                    let (m, v) = &mut self.moments[i];
                    for (k, p) in block.values.iter_mut().enumerate() {
                        *p -= lr * wd * *p;
                        m[k] = b1 * m[k] + (1.0 - b1) * g[k];
                        v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
                        let (mh, vh) = (m[k] / c1, v[k] / c2);
                        *p -= lr * mh / (vh.sqrt() + cfg.eps);
                    }
                }
            }
        }
    }
}
