//! Small trainable sentence encoder: token embeddings, mean pooling and an
//! optional dense projection.
//!
//! Mean pooling ignores token order, so two permutations of the same bag of
//! tokens always encode identically. Everything downstream only sees
//! [`Embedding`]s, so a stronger encoder can be dropped in behind the same
//! interface.

mod checkpoint;
mod vocab;

use std::ops::Deref;
use std::path::PathBuf;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use vocab::{TokenId, Vocabulary};

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("cannot encode an empty token sequence")]
    EmptyInput,
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("token id {0} is outside the vocabulary")]
    UnknownToken(TokenId),
    #[error("embedding dimension must be at least 2, got {0}")]
    BadDimension(usize),
    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// A fixed-width dense vector produced by the encoder.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding(pub Vec<f64>);

impl Deref for Embedding {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl Embedding {
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub dim: usize,
    pub projection: bool,
    /// Minimum occurrences for a token to enter the vocabulary.
    pub min_count: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            projection: true,
            min_count: 1,
        }
    }
}

/// Dense `d x d` projection applied after pooling. `weight` is row-major,
/// row `i` producing output coordinate `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderModel {
    vocab: Vocabulary,
    dim: usize,
    seed: u64,
    /// `vocab.len() x dim`, row-major.
    pub embeddings: Vec<f64>,
    pub projection: Option<Projection>,
}

/// Gradient of one encode call. `rows` holds only touched embedding rows,
/// sorted by token id.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderGrad {
    pub rows: Vec<(TokenId, Vec<f64>)>,
    pub weight: Option<Vec<f64>>,
    pub bias: Option<Vec<f64>>,
}

/// Dense gradient accumulator with the same layout as the model parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub embeddings: Vec<f64>,
    pub weight: Option<Vec<f64>>,
    pub bias: Option<Vec<f64>>,
}

/// A named view of one parameter block, as seen by optimizers.
pub struct ParamBlock<'a> {
    pub name: &'static str,
    pub values: &'a mut [f64],
    /// Whether weight decay applies; biases are exempt.
    pub decay: bool,
}

impl EncoderModel {
    /// Initializes parameters uniformly in `[-1/sqrt(d), 1/sqrt(d)]`, with a
    /// zero bias.
    pub fn new(vocab: Vocabulary, dim: usize, projection: bool, seed: u64) -> Result<Self, EncoderError> {
        if dim < 2 {
            return Err(EncoderError::BadDimension(dim));
        }
        let bound = 1.0 / (dim as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let embeddings = (0..vocab.len() * dim).map(|_| dist.sample(&mut rng)).collect();
        let projection = projection.then(|| Projection {
            weight: (0..dim * dim).map(|_| dist.sample(&mut rng)).collect(),
            bias: vec![0.0; dim],
        });
        Ok(Self {
            vocab,
            dim,
            seed,
            embeddings,
            projection,
        })
    }

    pub fn from_config(vocab: Vocabulary, cfg: &EncoderConfig, seed: u64) -> Result<Self, EncoderError> {
        Self::new(vocab, cfg.dim, cfg.projection, seed)
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_parameters(&self) -> usize {
        self.embeddings.len() + self.projection.as_ref().map_or(0, |p| p.weight.len() + p.bias.len())
    }

    pub fn row(&self, id: TokenId) -> &[f64] {
        let at = id as usize * self.dim;
        &self.embeddings[at..at + self.dim]
    }

    fn check_ids(&self, ids: &[TokenId]) -> Result<(), EncoderError> {
        if ids.is_empty() {
            return Err(EncoderError::EmptyInput);
        }
        match ids.iter().find(|&&i| i as usize >= self.vocab.len()) {
            Some(&bad) => Err(EncoderError::UnknownToken(bad)),
            None => Ok(()),
        }
    }

    fn pool(&self, ids: &[TokenId]) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim];
        for &id in ids {
            for (m, e) in mean.iter_mut().zip(self.row(id)) {
                *m += e;
            }
        }
        let inv = 1.0 / ids.len() as f64;
        mean.iter_mut().for_each(|m| *m *= inv);
        mean
    }

    pub fn encode(&self, ids: &[TokenId]) -> Result<Embedding, EncoderError> {
        self.check_ids(ids)?;
        let mean = self.pool(ids);
        let out = match &self.projection {
            None => mean,
            Some(p) => (0..self.dim)
                .map(|i| {
                    let row = &p.weight[i * self.dim..(i + 1) * self.dim];
                    row.iter().zip(&mean).map(|(w, m)| w * m).sum::<f64>() + p.bias[i]
                })
                .collect(),
        };
        Ok(Embedding(out))
    }

    pub fn encode_text(&self, text: &crate::datasets::WeakText) -> Result<Embedding, EncoderError> {
        self.encode(&self.vocab.tokenize(text))
    }

    /// Gradients of a scalar loss w.r.t. the parameters, given `dL/du` for
    /// the output of `encode(ids)`.
    pub fn encode_backward(&self, ids: &[TokenId], upstream: &[f64]) -> Result<EncoderGrad, EncoderError> {
        self.check_ids(ids)?;
        if upstream.len() != self.dim {
            return Err(EncoderError::ShapeMismatch {
                expected: self.dim,
                got: upstream.len(),
            });
        }
        let (dmean, weight, bias) = match &self.projection {
            None => (upstream.to_vec(), None, None),
            Some(p) => {
                let mean = self.pool(ids);
                let mut dw = vec![0.0; self.dim * self.dim];
                let mut dm = vec![0.0; self.dim];
                for (i, &g) in upstream.iter().enumerate() {
                    let row = &p.weight[i * self.dim..(i + 1) * self.dim];
                    for j in 0..self.dim {
                        dw[i * self.dim + j] = g * mean[j];
                        dm[j] += row[j] * g;
                    }
                }
                (dm, Some(dw), Some(upstream.to_vec()))
            }
        };
        let mut sorted = ids.to_vec();
        sorted.sort_unstable();
        let inv = 1.0 / ids.len() as f64;
        let rows = sorted
            .chunk_by(|a, b| a == b)
            .map(|run| {
                let scale = run.len() as f64 * inv;
                (run[0], dmean.iter().map(|g| g * scale).collect())
            })
            .collect();
        Ok(EncoderGrad { rows, weight, bias })
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            embeddings: vec![0.0; self.embeddings.len()],
            weight: self.projection.as_ref().map(|p| vec![0.0; p.weight.len()]),
            bias: self.projection.as_ref().map(|p| vec![0.0; p.bias.len()]),
        }
    }

    /// Parameter blocks in a fixed order matching [`Gradients::blocks`].
    pub fn blocks_mut(&mut self) -> Vec<ParamBlock<'_>> {
        let mut out = vec![ParamBlock {
            name: "embeddings",
            values: &mut self.embeddings,
            decay: true,
        }];
        if let Some(p) = &mut self.projection {
            out.push(ParamBlock {
                name: "weight",
                values: &mut p.weight,
                decay: true,
            });
            out.push(ParamBlock {
                name: "bias",
                values: &mut p.bias,
                decay: false,
            });
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.embeddings.iter().all(|x| x.is_finite())
            && self
                .projection
                .as_ref()
                .is_none_or(|p| p.weight.iter().chain(&p.bias).all(|x| x.is_finite()))
    }
}

impl Gradients {
    pub fn add(&mut self, dim: usize, grad: &EncoderGrad) {
        for (id, row) in &grad.rows {
            let at = *id as usize * dim;
            for (acc, g) in self.embeddings[at..at + dim].iter_mut().zip(row) {
                *acc += g;
            }
        }
        for (acc, g) in [(&mut self.weight, &grad.weight), (&mut self.bias, &grad.bias)] {
            if let (Some(acc), Some(g)) = (acc.as_mut(), g) {
                acc.iter_mut().zip(g).for_each(|(a, b)| *a += b);
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for block in self.blocks_mut() {
            block.iter_mut().for_each(|g| *g *= factor);
        }
    }

    pub fn blocks(&self) -> Vec<&[f64]> {
        let mut out = vec![self.embeddings.as_slice()];
        out.extend(self.weight.as_deref());
        out.extend(self.bias.as_deref());
        out
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = vec![self.embeddings.as_mut_slice()];
        out.extend(self.weight.as_deref_mut());
        out.extend(self.bias.as_deref_mut());
        out
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.iter().all(|x| x.is_finite()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(dim: usize, projection: bool) -> EncoderModel {
        let vocab = Vocabulary::build(["w", "x", "y", "z"], 1);
        EncoderModel::new(vocab, dim, projection, 7).unwrap()
    }

    #[test]
    fn mean_pooling() {
        let m = model(4, false);
        let (a, b) = (m.vocab().id("w"), m.vocab().id("x"));
        let u = m.encode(&[a, b]).unwrap();
        for k in 0..4 {
            assert!((u[k] - (m.row(a)[k] + m.row(b)[k]) / 2.0).abs() < 1e-15);
        }
        let rep = m.encode(&[a, a, a]).unwrap();
        assert!(rep.iter().zip(m.row(a)).all(|(x, y)| (x - y).abs() < 1e-15));
        assert!(matches!(m.encode(&[]), Err(EncoderError::EmptyInput)));
    }

    #[test]
    fn identity_projection_matches_plain_pooling() {
        let mut m = model(3, true);
        let p = m.projection.as_mut().unwrap();
        p.weight = vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let ids = [4, 5, 4];
        let mut plain = m.clone();
        plain.projection = None;
        assert_eq!(m.encode(&ids).unwrap(), plain.encode(&ids).unwrap());
    }

    #[test]
    fn backward_row_shares() {
        let m = model(2, false);
        let g = [1.0, -2.0];
        let single = m.encode_backward(&[5], &g).unwrap();
        assert_eq!(single.rows, vec![(5, g.to_vec())]);
        let pair = m.encode_backward(&[6, 5], &g).unwrap();
        assert_eq!(pair.rows, vec![(5, vec![0.5, -1.0]), (6, vec![0.5, -1.0])]);
        assert!(matches!(
            m.encode_backward(&[5], &[1.0]),
            Err(EncoderError::ShapeMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = model(16, true);
        let b = model(16, true);
        assert_eq!(a, b);
        let bound = 0.25;
        assert!(a.embeddings.iter().all(|x| x.abs() <= bound));
        assert!(a.projection.unwrap().bias.iter().all(|&x| x == 0.0));
        assert!(matches!(
            EncoderModel::new(Vocabulary::default(), 1, false, 0),
            Err(EncoderError::BadDimension(1))
        ));
    }
}
