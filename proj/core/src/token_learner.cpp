#include "isa/token_learner.hpp"

#include <cmath>

#include "isa/rng.hpp"

namespace isa {

ParamSet init_token_learner_params(const TokenLearnerConfig& cfg, Rng& rng) {
    const int c = cfg.channels;
    ParamSet p;
    p["tok.group_w"] = init_matrix(cfg.tokens, c, c, rng);
    p["tok.self_q"] = init_matrix(c, c, c, rng);
    p["tok.self_k"] = init_matrix(c, c, c, rng);
    p["tok.self_v"] = init_matrix(c, c, c, rng);
    p["tok.self_ff1"] = init_matrix(c, cfg.ff_refine, c, rng);
    p["tok.self_ff2"] = init_matrix(cfg.ff_refine, c, cfg.ff_refine, rng);
    p["tok.cross_q"] = init_matrix(c, c, c, rng);
    p["tok.cross_k"] = init_matrix(c, c, c, rng);
    p["tok.cross_v"] = init_matrix(c, c, c, rng);
    p["tok.cross_ff1"] = init_matrix(c, cfg.ff_cross, c, rng);
    p["tok.cross_ff2"] = init_matrix(cfg.ff_cross, c, cfg.ff_cross, rng);
    p["tok.proj"] = init_matrix(c, cfg.word_dim, c, rng);
    return p;
}

NodeId spatial_attention(Graph& g, NodeId fmap_flat, NodeId group_w) {
    const Array2& f = g.value(fmap_flat);
    const Array2& w = g.value(group_w);
    if (f.cols != w.cols)
        throw DimensionError("spatial_attention: fmap channels " + shape_str(f) +
                             " vs group weights " + shape_str(w));
    NodeId logits = g.matmul(fmap_flat, g.transpose(group_w));  // HW x L
    return g.softmax_over(logits, Axis::cols);
}

NodeId aggregate_tokens(Graph& g, NodeId fmap_flat, NodeId attention) {
    // rows of A^T are per-group masses over pixels; dividing by the row sum
    // realizes the 1/rho(a) normalization
    NodeId weights = g.l1_normalize_rows(g.transpose(attention));  // L x HW
    return g.matmul(weights, fmap_flat);                           // L x C
}

namespace {

NodeId attention_block(Graph& g, NodeId queries_from, NodeId keys_from, NodeId residual,
                       NodeId values_from, NodeId q_w, NodeId k_w, NodeId v_w, NodeId ff1,
                       NodeId ff2, bool transpose_mix, bool scaled) {
    // logits in the literal (K-projected)(Q-projected)^T order
    NodeId logits = g.matmul(g.matmul(keys_from, k_w),
                             g.transpose(g.matmul(queries_from, q_w)));
    if (scaled) {
        int c = g.value(q_w).rows;
        logits = g.scale(logits, 1.0 / std::sqrt(static_cast<double>(c)));
    }
    NodeId attn = g.softmax_over(logits, Axis::cols);
    NodeId mixed = g.matmul(values_from, v_w);
    NodeId delta = transpose_mix ? g.matmul(g.transpose(attn), mixed) : g.matmul(attn, mixed);
    NodeId out = g.add(residual, delta);
    NodeId ff = g.matmul(g.activation(g.matmul(out, ff1)), ff2);
    return g.add(out, ff);
}

}  // namespace

NodeId refine_tokens(Graph& g, NodeId z, const ParamBinding& p, bool scaled) {
    return attention_block(g, z, z, z, z, p["tok.self_q"], p["tok.self_k"], p["tok.self_v"],
                           p["tok.self_ff1"], p["tok.self_ff2"], /*transpose_mix=*/false, scaled);
}

NodeId cross_attend(Graph& g, NodeId z_r, NodeId fmap_flat, const ParamBinding& p, bool scaled) {
    // A is HW x L, normalized over the L tokens; A^T (F V) keeps the residual
    // with Z_r well-typed at L x C
    NodeId body = attention_block(g, z_r, fmap_flat, z_r, fmap_flat, p["tok.cross_q"],
                                  p["tok.cross_k"], p["tok.cross_v"], p["tok.cross_ff1"],
                                  p["tok.cross_ff2"], /*transpose_mix=*/true, scaled);
    return g.matmul(body, p["tok.proj"]);
}

TokenForward token_learner_forward(Graph& g, NodeId fmap_flat, const ParamBinding& p,
                                   const TokenLearnerConfig& cfg) {
    NodeId attn = spatial_attention(g, fmap_flat, p["tok.group_w"]);
    NodeId z = aggregate_tokens(g, fmap_flat, attn);
    NodeId z_r = refine_tokens(g, z, p, cfg.scaled_attention);
    NodeId u = cross_attend(g, z_r, fmap_flat, p, cfg.scaled_attention);
    return {u, attn};
}

TokenLearnerOutput token_learner_forward(const FeatureMap& fmap, const ParamSet& params,
                                         const TokenLearnerConfig& cfg) {
    Graph g;
    ParamBinding bind(g, params);
    NodeId input = g.constant(fmap.flat);
    TokenForward fwd = token_learner_forward(g, input, bind, cfg);
    return {g.value(fwd.sentence_tokens), g.value(fwd.attention)};
}

Array2 attention_rows(const Array2& attention) {
    return transpose(attention);
}

}  // namespace isa
