//! Candidate-edge generation: embedding similarity for lingual links and
//! proposer-driven expression → concept mappings.

mod embedding;
mod lexicon;
mod propose;

pub use embedding::{
    cosine, normalized_score, EmbeddingProvider, EmbeddingRecord, EmbeddingStore, HashedTokenProvider, ProviderSpace,
    HASHED_DIM, HASHED_PROVIDER_ID,
};
pub(crate) use lexicon::{placeholders, render};
pub use lexicon::{LexiconEntry, LexiconProposer, MappingProposer};
pub use propose::{propose_cross_lingual, propose_intra_lingual, CandidateEdge, SimilarityParams};

#[cfg(test)]
mod tests;
