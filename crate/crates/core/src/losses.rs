//! Training objectives over embeddings, with exact gradients.
//!
//! Cosine-based objectives work on the cosine distance `d = 1 - cos(u, v)`.
//! Label 1 marks a matching pair.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("cosine is undefined for a zero vector")]
    ZeroVector,
    #[error("shape mismatch: {0} vs {1}")]
    ShapeMismatch(usize, usize),
    #[error("empty batch")]
    EmptyBatch,
    #[error("margin must be positive and finite, got {0}")]
    BadMargin(f64),
    #[error("objective {0:?} does not apply to this kind of batch")]
    WrongObjective(Objective),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Cosine,
    Contrastive,
    OnlineContrastive,
    Triplet,
}

impl Objective {
    pub fn default_margin(self) -> f64 {
        match self {
            Objective::Triplet => 5.0,
            _ => 0.5,
        }
    }

    pub fn uses_triplets(self) -> bool {
        self == Objective::Triplet
    }
}

/// Which contrastive formula to use.
///
/// `Standard`: `½·y·d² + ½·(1−y)·max(0, m−d)²`.
/// `Inverted`: `½·(1−y)·d² + ½·y·max(0, m−d²)`, which with label 1 for
/// matching pairs pushes matches apart; kept for comparison runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContrastiveForm {
    #[default]
    Standard,
    Inverted,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripletDistance {
    #[default]
    SquaredEuclidean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    pub objective: Objective,
    pub margin: f64,
    #[serde(default)]
    pub contrastive_form: ContrastiveForm,
    #[serde(default)]
    pub triplet_distance: TripletDistance,
}

impl LossConfig {
    pub fn new(objective: Objective) -> Self {
        Self {
            objective,
            margin: objective.default_margin(),
            contrastive_form: ContrastiveForm::Standard,
            triplet_distance: TripletDistance::SquaredEuclidean,
        }
    }

    pub fn with_margin(mut self, margin: f64) -> Self {
        self.margin = margin;
        self
    }

    pub fn validate(&self) -> Result<(), LossError> {
        if self.margin > 0.0 && self.margin.is_finite() {
            Ok(())
        } else {
            Err(LossError::BadMargin(self.margin))
        }
    }
}

/// Loss of a single pair and its gradients w.r.t. both inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct PairLoss {
    pub value: f64,
    pub grad_u: Vec<f64>,
    pub grad_v: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TripletLoss {
    pub value: f64,
    pub grad_a: Vec<f64>,
    pub grad_p: Vec<f64>,
    pub grad_n: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct PairInput<'a> {
    pub u: &'a [f64],
    pub v: &'a [f64],
    pub y: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct TripletInput<'a> {
    pub anchor: &'a [f64],
    pub positive: &'a [f64],
    pub negative: &'a [f64],
}

/// Loss over a batch. `value` is the mean over selected examples and
/// `grads[i]` holds the gradient of `value` w.r.t. each input of example `i`
/// (`[u, v]` or `[anchor, positive, negative]`); unselected examples get
/// zero gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchLoss {
    pub value: f64,
    pub per_example: Vec<f64>,
    pub grads: Vec<Vec<Vec<f64>>>,
    /// Present for online contrastive only.
    pub selected: Option<Vec<bool>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn same_len(a: &[f64], b: &[f64]) -> Result<(), LossError> {
    if a.len() == b.len() {
        Ok(())
    } else {
        Err(LossError::ShapeMismatch(a.len(), b.len()))
    }
}

/// Cosine similarity with its gradients w.r.t. `u` and `v`.
pub fn cosine_with_grad(u: &[f64], v: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>), LossError> {
    same_len(u, v)?;
    let (nu, nv) = (dot(u, u).sqrt(), dot(v, v).sqrt());
    if nu == 0.0 || nv == 0.0 {
        return Err(LossError::ZeroVector);
    }
    let c = dot(u, v) / (nu * nv);
    let gu = u
        .iter()
        .zip(v)
        .map(|(x, y)| y / (nu * nv) - c * x / (nu * nu))
        .collect();
    let gv = v
        .iter()
        .zip(u)
        .map(|(x, y)| y / (nu * nv) - c * x / (nv * nv))
        .collect();
    Ok((c, gu, gv))
}

/// Cosine distance `1 - cos(u, v)`.
pub fn cosine_distance(u: &[f64], v: &[f64]) -> Result<f64, LossError> {
    cosine_with_grad(u, v).map(|(c, _, _)| 1.0 - c)
}

fn through_cosine(u: &[f64], v: &[f64], f: impl Fn(f64) -> (f64, f64)) -> Result<PairLoss, LossError> {
    let (c, gu, gv) = cosine_with_grad(u, v)?;
    let (value, dl_dc) = f(c);
    Ok(PairLoss {
        value,
        grad_u: gu.into_iter().map(|g| g * dl_dc).collect(),
        grad_v: gv.into_iter().map(|g| g * dl_dc).collect(),
    })
}

/// `(y − cos(u, v))²`.
pub fn cosine_loss(u: &[f64], v: &[f64], y: f64) -> Result<PairLoss, LossError> {
    through_cosine(u, v, |c| ((y - c).powi(2), -2.0 * (y - c)))
}

/// Contrastive loss on cosine distance with margin `m`.
pub fn contrastive_loss(u: &[f64], v: &[f64], y: f64, m: f64, form: ContrastiveForm) -> Result<PairLoss, LossError> {
    through_cosine(u, v, |c| {
        let d = 1.0 - c;
        // (value, dL/dd); dd/dc = -1.
        let (value, dl_dd) = match form {
            ContrastiveForm::Standard => {
                let h = (m - d).max(0.0);
                (0.5 * y * d * d + 0.5 * (1.0 - y) * h * h, y * d - (1.0 - y) * h)
            }
            ContrastiveForm::Inverted => {
                let inner = m - d * d;
                let (h, dh) = if inner > 0.0 { (inner, -2.0 * d) } else { (0.0, 0.0) };
                (0.5 * (1.0 - y) * d * d + 0.5 * y * h, (1.0 - y) * d + 0.5 * y * dh)
            }
        };
        (value, -dl_dd)
    })
}

/// `max(‖a−p‖² − ‖a−n‖² + m, 0)`; the subgradient at the kink is zero.
pub fn triplet_loss(a: &[f64], p: &[f64], n: &[f64], m: f64) -> Result<TripletLoss, LossError> {
    same_len(a, p)?;
    same_len(a, n)?;
    let sq = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(s, t)| (s - t).powi(2)).sum::<f64>();
    let inner = sq(a, p) - sq(a, n) + m;
    let dim = a.len();
    if inner <= 0.0 {
        return Ok(TripletLoss {
            value: 0.0,
            grad_a: vec![0.0; dim],
            grad_p: vec![0.0; dim],
            grad_n: vec![0.0; dim],
        });
    }
    Ok(TripletLoss {
        value: inner,
        grad_a: (0..dim).map(|i| 2.0 * (n[i] - p[i])).collect(),
        grad_p: (0..dim).map(|i| -2.0 * (a[i] - p[i])).collect(),
        grad_n: (0..dim).map(|i| 2.0 * (a[i] - n[i])).collect(),
    })
}

/// Online contrastive selection over cosine distances. Returns `None` when
/// the batch lacks a positive or a negative.
pub fn online_selection(distances: &[f64], labels: &[f64]) -> Option<Vec<bool>> {
    let is_pos = |y: f64| y >= 0.5;
    let pos = || {
        distances
            .iter()
            .zip(labels)
            .filter(|(_, &y)| is_pos(y))
            .map(|(d, _)| *d)
    };
    let neg = || {
        distances
            .iter()
            .zip(labels)
            .filter(|(_, &y)| !is_pos(y))
            .map(|(d, _)| *d)
    };
    let pos_max = pos().reduce(f64::max)?;
    let neg_min = neg().reduce(f64::min)?;
    Some(
        distances
            .iter()
            .zip(labels)
            .map(|(&d, &y)| if is_pos(y) { d > neg_min } else { d < pos_max })
            .collect(),
    )
}

fn mean_selected(per: Vec<PairLoss>, selected: &[bool], mask: Option<Vec<bool>>) -> BatchLoss {
    let k = selected.iter().filter(|&&s| s).count();
    let scale = if k == 0 { 0.0 } else { 1.0 / k as f64 };
    let value = per
        .iter()
        .zip(selected)
        .filter(|(_, &s)| s)
        .map(|(l, _)| l.value)
        .sum::<f64>()
        * scale;
    let grads = per
        .iter()
        .zip(selected)
        .map(|(l, &s)| {
            let w = if s { scale } else { 0.0 };
            vec![
                l.grad_u.iter().map(|g| g * w).collect(),
                l.grad_v.iter().map(|g| g * w).collect(),
            ]
        })
        .collect();
    BatchLoss {
        value,
        per_example: per.iter().map(|l| l.value).collect(),
        grads,
        selected: mask,
    }
}

/// Batch loss for the pair objectives. Labels are 1 for a match, 0 otherwise.
pub fn pair_batch_loss(cfg: &LossConfig, batch: &[PairInput<'_>]) -> Result<BatchLoss, LossError> {
    cfg.validate()?;
    if batch.is_empty() {
        return Err(LossError::EmptyBatch);
    }
    let contrastive = |p: &PairInput<'_>| contrastive_loss(p.u, p.v, p.y, cfg.margin, cfg.contrastive_form);
    let all = vec![true; batch.len()];
    match cfg.objective {
        Objective::Cosine => {
            let per = batch
                .iter()
                .map(|p| cosine_loss(p.u, p.v, p.y))
                .collect::<Result<_, _>>()?;
            Ok(mean_selected(per, &all, None))
        }
        Objective::Contrastive => {
            let per = batch.iter().map(contrastive).collect::<Result<_, _>>()?;
            Ok(mean_selected(per, &all, None))
        }
        Objective::OnlineContrastive => {
            let per: Vec<PairLoss> = batch.iter().map(contrastive).collect::<Result<_, _>>()?;
            let distances: Vec<f64> = batch
                .iter()
                .map(|p| cosine_distance(p.u, p.v))
                .collect::<Result<_, _>>()?;
            let labels: Vec<f64> = batch.iter().map(|p| p.y).collect();
            let mask = online_selection(&distances, &labels).unwrap_or(all);
            Ok(mean_selected(per, &mask.clone(), Some(mask)))
        }
        Objective::Triplet => Err(LossError::WrongObjective(cfg.objective)),
    }
}

/// Mean triplet loss over a batch.
pub fn triplet_batch_loss(cfg: &LossConfig, batch: &[TripletInput<'_>]) -> Result<BatchLoss, LossError> {
    cfg.validate()?;
    if cfg.objective != Objective::Triplet {
        return Err(LossError::WrongObjective(cfg.objective));
    }
    if batch.is_empty() {
        return Err(LossError::EmptyBatch);
    }
    let per: Vec<TripletLoss> = batch
        .iter()
        .map(|t| triplet_loss(t.anchor, t.positive, t.negative, cfg.margin))
        .collect::<Result<_, _>>()?;
    let scale = 1.0 / batch.len() as f64;
    let scaled = |g: &[f64]| g.iter().map(|x| x * scale).collect::<Vec<f64>>();
    Ok(BatchLoss {
        value: per.iter().map(|l| l.value).sum::<f64>() * scale,
        per_example: per.iter().map(|l| l.value).collect(),
        grads: per
            .iter()
            .map(|l| vec![scaled(&l.grad_a), scaled(&l.grad_p), scaled(&l.grad_n)])
            .collect(),
        selected: None,
    })
}
