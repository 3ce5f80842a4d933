use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ids::NodeId;
use crate::text::tokenize;

/// Source of text embeddings. Implementations must be deterministic.
pub trait EmbeddingProvider: Send + Sync {
    fn id(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f64>>;

    /// Tokens used for leave-one-out attribution. Removing a token and
    /// re-joining the rest with spaces must embed as the remaining text.
    fn tokens(&self, text: &str) -> Vec<String> {
        tokenize(text)
    }
}

pub const HASHED_PROVIDER_ID: &str = "hashed-token-v1";
pub const HASHED_DIM: usize = 64;

/// Sum of per-token pseudorandom Gaussian vectors, L2-normalized.
///
/// Each token's vector is drawn from a ChaCha stream seeded by
/// SHA-256(seed ‖ token), so the same token embeds identically in any text or
/// language, which makes code-mixed utterances share components.
#[derive(Clone, Debug)]
pub struct HashedTokenProvider {
    id: String,
    dim: usize,
    seed: u64,
}

impl Default for HashedTokenProvider {
    fn default() -> Self {
        Self::new(HASHED_PROVIDER_ID, HASHED_DIM, 0x5eed)
    }
}

impl HashedTokenProvider {
    pub fn new(id: impl Into<String>, dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { id: id.into(), dim, seed }
    }

    pub fn token_vector(&self, token: &str) -> Vec<f64> {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(token.as_bytes());
        let digest: [u8; 32] = h.finalize().into();
        let mut rng = ChaCha8Rng::from_seed(digest);
        (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect()
    }
}

impl EmbeddingProvider for HashedTokenProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(Error::Validation(format!("no tokens to embed in {text:?}")));
        }
        let mut acc = vec![0.0; self.dim];
        for t in &tokens {
            for (a, x) in acc.iter_mut().zip(self.token_vector(t)) {
                *a += x;
            }
        }
        let norm = l2(&acc);
        if norm == 0.0 {
            return Err(Error::Validation(format!("{text:?} embeds to the zero vector")));
        }
        acc.iter_mut().for_each(|x| *x /= norm);
        Ok(acc)
    }
}

pub(crate) fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_vector(v: &[f64]) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::validation("vector has non-finite components"));
    }
    if v.iter().all(|&x| x == 0.0) {
        return Err(Error::validation("zero vector"));
    }
    Ok(())
}

/// Cosine similarity, clamped to [-1, 1].
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Validation(format!("dimension mismatch ({} vs {})", u.len(), v.len())));
    }
    check_vector(u)?;
    check_vector(v)?;
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((dot / (l2(u) * l2(v))).clamp(-1.0, 1.0))
}

/// Maps cosine onto the [0, 1] confidence scale.
pub fn normalized_score(cos: f64) -> f64 {
    ((cos + 1.0) / 2.0).clamp(0.0, 1.0)
}

/// One line of the embedding import format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub node_id: NodeId,
    pub vector: Vec<f64>,
    pub dim: usize,
    pub provider_id: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProviderSpace {
    pub dim: usize,
    pub vectors: BTreeMap<NodeId, Vec<f64>>,
}

/// Registered vectors per provider. The first registration fixes a provider's dimension.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingStore {
    spaces: BTreeMap<String, ProviderSpace>,
}

impl EmbeddingStore {
    pub fn check(&self, record: &EmbeddingRecord) -> Result<()> {
        if record.provider_id.trim().is_empty() {
            return Err(Error::validation("provider_id is empty"));
        }
        if record.vector.len() != record.dim {
            return Err(Error::Validation(format!(
                "vector length {} does not match declared dim {}",
                record.vector.len(),
                record.dim
            )));
        }
        check_vector(&record.vector)?;
        if let Some(space) = self.spaces.get(&record.provider_id) {
            if space.dim != record.dim {
                return Err(Error::Validation(format!(
                    "provider {} has dim {}, got {}",
                    record.provider_id, space.dim, record.dim
                )));
            }
        }
        Ok(())
    }

    /// Re-registration overwrites.
    pub fn register(&mut self, record: EmbeddingRecord) -> Result<()> {
        self.check(&record)?;
        let space = self
            .spaces
            .entry(record.provider_id)
            .or_insert_with(|| ProviderSpace { dim: record.dim, vectors: BTreeMap::new() });
        space.vectors.insert(record.node_id, record.vector);
        Ok(())
    }

    pub fn get(&self, provider_id: &str, node: &NodeId) -> Option<&[f64]> {
        self.spaces.get(provider_id)?.vectors.get(node).map(Vec::as_slice)
    }

    pub fn dim(&self, provider_id: &str) -> Option<usize> {
        self.spaces.get(provider_id).map(|s| s.dim)
    }

    pub fn space(&self, provider_id: &str) -> Option<&ProviderSpace> {
        self.spaces.get(provider_id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(node: &str, vector: Vec<f64>) -> EmbeddingRecord {
        EmbeddingRecord { node_id: node.into(), dim: vector.len(), vector, provider_id: "p".into() }
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let c = cosine(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
    }

    #[test]
    fn cosine_errors() {
        assert!(cosine(&[1.0], &[1.0, 0.0]).is_err());
        assert!(cosine(&[0.0, 0.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn first_registration_fixes_dim() {
        let mut s = EmbeddingStore::default();
        s.register(rec("n1", vec![1.0; 64])).unwrap();
        assert_eq!(s.dim("p"), Some(64));
        let err = s.register(rec("n2", vec![1.0; 32])).unwrap_err();
        assert!(err.to_string().contains("dim"));
        assert!(s.register(rec("n3", vec![0.0; 64])).is_err());
        s.register(rec("n1", vec![2.0; 64])).unwrap();
        assert_eq!(s.get("p", &"n1".into()).unwrap()[0], 2.0);
    }

    #[test]
    fn hashed_provider_is_deterministic_and_unit() {
        let p = HashedTokenProvider::default();
        let a = p.embed("man ka bhoj").unwrap();
        assert_eq!(a, p.embed("Man  ka bhoj!").unwrap());
        assert_eq!(a.len(), HASHED_DIM);
        assert!((l2(&a) - 1.0).abs() < 1e-12);
        assert!(p.embed(" ,. ").is_err());
    }

    #[test]
    fn shared_tokens_raise_similarity() {
        let p = HashedTokenProvider::default();
        let base = p.embed("mujhe ghabraahat mehsoos ho rhi hai").unwrap();
        let near = p.embed("mujhe ghabraahat mehsoos ho rahi hai").unwrap();
        let far = p.embed("sab kuch samne hai par khushi nahi").unwrap();
        assert!(cosine(&base, &near).unwrap() > cosine(&base, &far).unwrap());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn nonzero() -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(-10.0f64..10.0, 1..16)
                .prop_filter("non-zero", |v| v.iter().any(|x| x.abs() > 1e-6))
        }

        proptest! {
            #[test]
            fn self_and_opposite(u in nonzero()) {
                let neg: Vec<f64> = u.iter().map(|x| -x).collect();
                prop_assert!((cosine(&u, &u).unwrap() - 1.0).abs() < 1e-12);
                prop_assert!((cosine(&u, &neg).unwrap() + 1.0).abs() < 1e-12);
            }
        }
    }
}
