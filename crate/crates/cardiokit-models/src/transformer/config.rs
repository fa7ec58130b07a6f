//! Transformer hyperparameters shared by the autoregressive and
//! bidirectional models.

#[derive(Debug, Clone, PartialEq)]
pub struct TransformerConfig {
    pub n_blocks: usize,
    pub n_heads: usize,
    pub d_model: usize,
    /// Sequence length including [CLS] and [EOS] slots.
    pub block_size: usize,
    pub dropout: f64,
    pub vocab_size: usize,
    pub n_properties: usize,
    /// Feed-forward inner width as a multiple of d_model.
    pub ffn_mult: usize,
}

impl TransformerConfig {
    /// Full-scale defaults: 8 blocks, 8 heads, 256-d embeddings, 135-slot
    /// sequences, 10% dropout.
    pub fn full(vocab_size: usize) -> TransformerConfig {
        TransformerConfig {
            n_blocks: 8,
            n_heads: 8,
            d_model: 256,
            block_size: 135,
            dropout: 0.10,
            vocab_size,
            n_properties: 10,
            ffn_mult: 4,
        }
    }

    /// Desk-scale configuration for tests and demos.
    pub fn toy(vocab_size: usize, block_size: usize) -> TransformerConfig {
        TransformerConfig {
            n_blocks: 2,
            n_heads: 4,
            d_model: 64,
            block_size,
            dropout: 0.10,
            vocab_size,
            n_properties: 10,
            ffn_mult: 4,
        }
    }

    pub fn head_dim(&self) -> usize {
        debug_assert_eq!(self.d_model % self.n_heads, 0);
        self.d_model / self.n_heads
    }

    pub fn ffn_dim(&self) -> usize {
        self.d_model * self.ffn_mult
    }

    pub fn validate(&self) {
        assert!(self.d_model % self.n_heads == 0, "d_model divisible by heads");
        assert!((0.0..1.0).contains(&self.dropout), "dropout in [0,1)");
        assert!(self.block_size >= 2);
        assert!(self.vocab_size > 4, "vocabulary must extend the specials");
    }

    /// Closed-form parameter count for the conditioned autoregressive model;
    /// the bidirectional model omits the scaffold table and property
    /// projection.
    pub fn param_count(&self, conditioned: bool) -> usize {
        let d = self.d_model;
        let v = self.vocab_size;
        let f = self.ffn_dim();
        let embeddings = v * d + self.block_size * d;
        let conditioning = if conditioned {
            v * d + self.n_properties * d + d
        } else {
            0
        };
        let per_block = 2 * d            // ln1
            + 4 * (d * d + d)            // q, k, v, out projections
            + 2 * d                      // ln2
            + (d * f + f) + (f * d + d); // ffn
        let final_parts = 2 * d + d * v + v; // final ln + vocab head
        embeddings + conditioning + self.n_blocks * per_block + final_parts
    }
}
