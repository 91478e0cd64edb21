use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{EncoderError, EncoderModel, Projection, Vocabulary};

const MAGIC: &[u8; 8] = b"WSDENC\0\x01";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    version: u32,
    dim: usize,
    projection: bool,
    seed: u64,
    vocab: Vec<String>,
    blocks: Vec<BlockInfo>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockInfo {
    name: String,
    len: usize,
}

fn bad(msg: impl Into<String>) -> EncoderError {
    EncoderError::Checkpoint(msg.into())
}

impl EncoderModel {
    /// Serializes to the checkpoint container: magic, u64 LE header length,
    /// JSON header, then the parameter blocks as LE binary64.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut blocks: Vec<(&str, &[f64])> = vec![("embeddings", &self.embeddings)];
        if let Some(p) = &self.projection {
            blocks.push(("weight", &p.weight));
            blocks.push(("bias", &p.bias));
        }
        let header = Header {
            version: VERSION,
            dim: self.dim,
            projection: self.projection.is_some(),
            seed: self.seed,
            vocab: self.vocab.tokens().to_vec(),
            blocks: blocks
                .iter()
                .map(|(n, b)| BlockInfo {
                    name: n.to_string(),
                    len: b.len(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(16 + json.len() + 8 * self.num_parameters());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, b) in blocks {
            for x in b {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EncoderError> {
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(bad("missing magic bytes"));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let body = &bytes[16..];
        if body.len() < hlen {
            return Err(bad("truncated header"));
        }
        let header: Header = serde_json::from_slice(&body[..hlen]).map_err(|e| bad(format!("header: {e}")))?;
        if header.version != VERSION {
            return Err(bad(format!("unsupported version {}", header.version)));
        }
        let vocab = Vocabulary::from_tokens(header.vocab).map_err(bad)?;
        let d = header.dim;
        let mut expected = vec![("embeddings", vocab.len() * d)];
        if header.projection {
            expected.push(("weight", d * d));
            expected.push(("bias", d));
        }
        let listed: Vec<(&str, usize)> = header.blocks.iter().map(|b| (b.name.as_str(), b.len)).collect();
        if listed != expected {
            return Err(bad("block layout does not match the header"));
        }
        let data = &body[hlen..];
        let total: usize = expected.iter().map(|(_, n)| n).sum();
        if data.len() != total * 8 {
            return Err(bad(format!(
                "expected {} parameter bytes, found {}",
                total * 8,
                data.len()
            )));
        }
        let mut values = data.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let mut take = |n: usize| values.by_ref().take(n).collect::<Vec<f64>>();
        let mut model = EncoderModel::new(vocab, d, false, header.seed)?;
        model.embeddings = take(expected[0].1);
        if header.projection {
            let weight = take(d * d);
            let bias = take(d);
            model.projection = Some(Projection { weight, bias });
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), EncoderError> {
        fs::write(path, self.to_bytes()).map_err(|source| EncoderError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, EncoderError> {
        let bytes = fs::read(path).map_err(|source| EncoderError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }

    /// SHA-256 of the checkpoint bytes, hex encoded.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_byte_stable() {
        let vocab = Vocabulary::build(["a", "b", "c"], 1);
        for projection in [false, true] {
            let m = EncoderModel::new(vocab.clone(), 5, projection, 3).unwrap();
            let bytes = m.to_bytes();
            let back = EncoderModel::from_bytes(&bytes).unwrap();
            assert_eq!(back, m);
            assert_eq!(back.to_bytes(), bytes);
            assert_eq!(back.fingerprint(), m.fingerprint());
        }
    }

    #[test]
    fn fingerprint_tracks_parameters() {
        let m = EncoderModel::new(Vocabulary::default(), 4, true, 1).unwrap();
        let mut n = m.clone();
        n.embeddings[0] += 1e-12;
        assert_ne!(m.fingerprint(), n.fingerprint());
        assert_eq!(m.fingerprint().len(), 64);
    }

    #[test]
    fn corrupt_input_is_rejected() {
        let m = EncoderModel::new(Vocabulary::default(), 4, true, 1).unwrap();
        let bytes = m.to_bytes();
        assert!(EncoderModel::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(EncoderModel::from_bytes(b"not a checkpoint").is_err());
    }
}
