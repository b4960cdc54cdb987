#pragma once

#include "isa/encoders.hpp"
#include "isa/graph.hpp"
#include "isa/params.hpp"

namespace isa {

class Rng;

struct TokenLearnerConfig {
    int tokens = 6;        // L
    int channels = 16;     // C, must match the incoming feature map
    int ff_refine = 256;   // hidden width of the self-attention feed-forward
    int ff_cross = 512;    // hidden width of the cross-attention feed-forward
    int word_dim = 16;     // d_w of the output sentence tokens
    bool scaled_attention = false;  // optional 1/sqrt(C) logit scaling
};

/// Parameters "tok.group_w" (spatial grouping), "tok.self_{q,k,v,ff1,ff2}",
/// "tok.cross_{q,k,v,ff1,ff2}" and the word-space projection "tok.proj".
ParamSet init_token_learner_params(const TokenLearnerConfig& cfg, Rng& rng);

/// Per-pixel softmax over the L semantic groups: (h*w) x L, rows sum to 1.
NodeId spatial_attention(Graph& g, NodeId fmap_flat, NodeId group_w);

/// Attention-mass weighted mean of pixels per group: L x C visual tokens.
/// Every output coordinate lies in the convex hull of the pixel features.
NodeId aggregate_tokens(Graph& g, NodeId fmap_flat, NodeId attention);

/// Self-attention refinement with residuals:
///   Z_out = Z + softmax((Z K)(Z Q)^T) Z V,  Z_r = Z_out + gelu(Z_out W1) W2.
NodeId refine_tokens(Graph& g, NodeId z, const ParamBinding& p, bool scaled);

/// Cross-attention selection over the flattened map, then projection into
/// word space: U = [Z_c + gelu(Z_c W1) W2] W_p with
///   Z_c = Z_r + A^T (F V),  A = softmax_L((F K)(Z_r Q)^T) in HW x L.
NodeId cross_attend(Graph& g, NodeId z_r, NodeId fmap_flat, const ParamBinding& p, bool scaled);

struct TokenForward {
    NodeId sentence_tokens;  // L x word_dim
    NodeId attention;        // (h*w) x L spatial attention, rows sum to 1
};

TokenForward token_learner_forward(Graph& g, NodeId fmap_flat, const ParamBinding& p,
                                   const TokenLearnerConfig& cfg);

/// Value-level forward for inference and inspection.
struct TokenLearnerOutput {
    Array2 sentence_tokens;  // L x word_dim
    Array2 attention;        // (h*w) x L
};

TokenLearnerOutput token_learner_forward(const FeatureMap& fmap, const ParamSet& params,
                                         const TokenLearnerConfig& cfg);

/// Attention maps as written by export-attention: one row per token,
/// h*w columns; column p sums to 1 across tokens.
Array2 attention_rows(const Array2& attention);

}  // namespace isa
