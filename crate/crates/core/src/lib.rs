//! Unsupervised news-source embeddings learned from how sources agree with
//! each other: copied articles, word usage, and how they cite science.

pub mod copy;
pub mod corpus;
pub mod embedder;
pub mod eval;
pub mod indicator;
pub mod refs;
pub mod sampler;
pub mod seed;
pub mod pipeline;
pub mod shift;
pub mod source;
pub mod synth;

#[cfg(test)]
pub(crate) mod testutil;
