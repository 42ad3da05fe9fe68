//! Frozen deterministic language encoder.
//!
//! Stands in for a pretrained text encoder while keeping its contract:
//! the encoder is frozen during training (checksummed to prove it), the
//! sentence-level feature is the final end-of-sequence token, and a
//! separate trainable projection downstream maps into model width.
//! Tokens are hashed into a fixed seeded embedding table, so identical
//! strings always embed identically.

use crate::seeds;
use crate::tensor::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LangError {
    #[error("embed_text: empty instruction")]
    EmptyInstruction,
}

/// Token embeddings for one instruction: `count` x `dim`, the last row
/// being the end-of-sequence token whose embedding doubles as the
/// sentence feature.
#[derive(Debug, Clone)]
pub struct TextTokens {
    pub token_embeddings: Tensor,
    pub sentence_feature: Tensor,
    pub count: usize,
}

/// Hash-tokenizing embedder with fixed random tables. Never trained.
#[derive(Debug, Clone)]
pub struct LangEmbedder {
    vocab: usize,
    dim: usize,
    max_tokens: usize,
    table: Tensor,      // vocab x dim
    positional: Tensor, // max_tokens x dim
}

impl LangEmbedder {
    /// Build the frozen tables from a seed. The last vocabulary row is
    /// reserved for the end-of-sequence token.
    pub fn new(vocab: usize, dim: usize, max_tokens: usize, seed: u64) -> LangEmbedder {
        assert!(vocab >= 2 && max_tokens >= 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seeds::mix(seed, &[seeds::tag("lang-tables")]));
        let std = 1.0 / (dim as f64).sqrt();
        let mut draw = |n: usize| {
            Tensor::from_fn(&[n, dim], |_| {
                let g: f64 = StandardNormal.sample(&mut rng);
                g * std
            })
        };
        let table = draw(vocab);
        let positional = draw(max_tokens);
        LangEmbedder {
            vocab,
            dim,
            max_tokens,
            table,
            positional,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_tokens(&self) -> usize {
        self.max_tokens
    }

    fn eos_row(&self) -> usize {
        self.vocab - 1
    }

    /// Lowercased alphanumeric runs; punctuation splits tokens.
    fn tokenize(text: &str) -> Vec<String> {
        text.to_lowercase()
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(str::to_owned)
            .collect()
    }

    fn row_of(&self, token: &str) -> usize {
        (seeds::tag(token) % (self.vocab as u64 - 1)) as usize
    }

    /// Embed an instruction: hashed table rows plus positional rows, an
    /// end-of-sequence token appended, truncated to the table's capacity.
    pub fn embed(&self, instruction: &str) -> Result<TextTokens, LangError> {
        let words = Self::tokenize(instruction);
        if words.is_empty() {
            return Err(LangError::EmptyInstruction);
        }
        let kept = words.len().min(self.max_tokens - 1);
        let count = kept + 1;
        let mut data = Vec::with_capacity(count * self.dim);
        let table = self.table.data();
        let pos = self.positional.data();
        for (p, w) in words.iter().take(kept).enumerate() {
            let row = self.row_of(w);
            for j in 0..self.dim {
                data.push(table[row * self.dim + j] + pos[p * self.dim + j]);
            }
        }
        let eos = self.eos_row();
        for j in 0..self.dim {
            data.push(table[eos * self.dim + j] + pos[kept * self.dim + j]);
        }
        let token_embeddings =
            Tensor::new(vec![count, self.dim], data).expect("sized by construction");
        let last = token_embeddings.data()[(count - 1) * self.dim..].to_vec();
        let sentence_feature = Tensor::new(vec![self.dim], last).expect("row sized");
        Ok(TextTokens {
            token_embeddings,
            sentence_feature,
            count,
        })
    }

    /// FNV-1a over both tables' raw bytes; constant across training by
    /// construction, checked by the trainer before and after runs.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for t in [&self.table, &self.positional] {
            for v in t.data() {
                for b in v.to_le_bytes() {
                    h ^= b as u64;
                    h = h.wrapping_mul(0x100000001b3);
                }
            }
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn embedder() -> LangEmbedder {
        LangEmbedder::new(256, 16, 12, 7)
    }

    #[test]
    fn identical_strings_embed_identically() {
        let e = embedder();
        let a = e.embed("push the red block to the green target").unwrap();
        let b = e.embed("push the red block to the green target").unwrap();
        assert_eq!(a.token_embeddings, b.token_embeddings);
        assert_eq!(a.count, b.count);
    }

    #[test]
    fn color_swap_changes_the_color_rows() {
        let e = embedder();
        let red = e.embed("push the red block to the green target").unwrap();
        let blue = e.embed("push the blue block to the green target").unwrap();
        assert_eq!(red.count, blue.count);
        let d = e.dim();
        let differing: Vec<usize> = (0..red.count)
            .filter(|&t| {
                red.token_embeddings.data()[t * d..(t + 1) * d]
                    != blue.token_embeddings.data()[t * d..(t + 1) * d]
            })
            .collect();
        // Token 2 is the color word; only it may differ (barring a hash
        // collision, which these words do not have).
        assert_eq!(differing, vec![2]);
    }

    #[test]
    fn sentence_feature_is_last_row() {
        let e = embedder();
        let t = e.embed("press the blue button").unwrap();
        let d = e.dim();
        let last = &t.token_embeddings.data()[(t.count - 1) * d..];
        assert_eq!(t.sentence_feature.data(), last);
    }

    #[test]
    fn empty_instruction_rejected() {
        let e = embedder();
        assert!(matches!(e.embed("   "), Err(LangError::EmptyInstruction)));
    }

    #[test]
    fn checksum_is_stable_and_seed_dependent() {
        let a = LangEmbedder::new(256, 16, 12, 7);
        let b = LangEmbedder::new(256, 16, 12, 7);
        let c = LangEmbedder::new(256, 16, 12, 8);
        assert_eq!(a.checksum(), b.checksum());
        assert_ne!(a.checksum(), c.checksum());
    }

    #[test]
    fn long_instructions_truncate_to_capacity() {
        let e = LangEmbedder::new(256, 8, 4, 1);
        let t = e.embed("one two three four five six seven").unwrap();
        assert_eq!(t.count, 4);
    }
}
