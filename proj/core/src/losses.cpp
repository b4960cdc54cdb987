#include "isa/losses.hpp"

#include <cmath>

#include "isa/rng.hpp"

namespace isa {

void LossConfig::validate() const {
    if (tau <= 0.0) throw ConfigError("loss: temperature must be positive");
    if (gcd_weight < 0.0 || lar_weight < 0.0) throw ConfigError("loss: negative loss weight");
}

LossConfig::NegativePolicy negative_policy_from_string(const std::string& s) {
    if (s == "uniform") return LossConfig::NegativePolicy::uniform;
    if (s == "hardest") return LossConfig::NegativePolicy::hardest;
    throw ConfigError("unknown negative policy '" + s + "'");
}

NodeId gcd_loss(Graph& g, NodeId t_stack, const Array2& v, double tau) {
    if (tau <= 0.0) throw ConfigError("gcd_loss: temperature must be positive");
    const Array2& t = g.value(t_stack);
    if (t.rows != v.rows || t.cols != v.cols)
        throw DimensionError("gcd_loss: " + shape_str(t) + " vs " + shape_str(v));
    int b = v.rows;
    Array2 eye = Array2::identity(b);
    NodeId vc = g.constant(v);
    NodeId i2t = g.softmax_over(g.scale(g.matmul(vc, g.transpose(t_stack)), 1.0 / tau), Axis::cols);
    NodeId t2i = g.softmax_over(g.scale(g.matmul(t_stack, g.transpose(vc)), 1.0 / tau), Axis::cols);
    NodeId h1 = g.cross_entropy(i2t, eye);
    NodeId h2 = g.cross_entropy(t2i, eye);
    return g.scale(g.add(h1, h2), 0.5);
}

double gcd_loss(const Array2& v, const Array2& t, double tau) {
    Graph g;
    NodeId tc = g.constant(t);
    return g.scalar_value(gcd_loss(g, tc, v, tau));
}

std::vector<int> pick_negatives(LossConfig::NegativePolicy policy, const Array2& v,
                                const Array2& t, Rng& rng) {
    int b = v.rows;
    if (b < 2) throw ConfigError("in-batch negatives need batch size >= 2");
    std::vector<int> out(static_cast<size_t>(b));
    if (policy == LossConfig::NegativePolicy::uniform) {
        for (int i = 0; i < b; ++i) {
            int j = rng.uniform_int(0, b - 2);
            out[static_cast<size_t>(i)] = j >= i ? j + 1 : j;
        }
    } else {
        // hardest: j maximizing v_j . t_i
        for (int i = 0; i < b; ++i) {
            int best = i == 0 ? 1 : 0;
            double best_score = 0.0;
            for (int j = 0; j < b; ++j) {
                if (j == i) continue;
                double s = 0.0;
                for (int k = 0; k < v.cols; ++k) s += v.at(j, k) * t.at(i, k);
                if (j == (i == 0 ? 1 : 0) || s > best_score) {
                    best = j;
                    best_score = s;
                }
            }
            out[static_cast<size_t>(i)] = best;
        }
    }
    return out;
}

namespace {

Array2 lar_labels(int b) {
    Array2 y(2 * b, 1);
    for (int i = 0; i < b; ++i) y.at(i, 0) = 1.0;
    return y;
}

}  // namespace

NodeId lar_loss(Graph& g, const std::vector<NodeId>& tokens, const std::vector<FeatureMap>& maps,
                const TeacherBundle& teacher, const std::vector<int>& negative_of) {
    int b = static_cast<int>(tokens.size());
    if (b < 1) throw ConfigError("lar_loss: empty batch");
    if (maps.size() != tokens.size() || negative_of.size() != tokens.size())
        throw DimensionError("lar_loss: batch arrays disagree");
    NodeId logits = -1;
    for (int i = 0; i < b; ++i) {
        NodeId pos = teacher.match_logit(g, tokens[static_cast<size_t>(i)],
                                         maps[static_cast<size_t>(i)]);
        logits = i == 0 ? pos : g.vcat(logits, pos);
    }
    for (int i = 0; i < b; ++i) {
        int j = negative_of[static_cast<size_t>(i)];
        if (j == i || j < 0 || j >= b) throw ConfigError("lar_loss: bad negative index");
        NodeId neg = teacher.match_logit(g, tokens[static_cast<size_t>(i)],
                                         maps[static_cast<size_t>(j)]);
        logits = g.vcat(logits, neg);
    }
    return g.binary_cross_entropy(g.sigmoid(logits), lar_labels(b));
}

double lar_loss(const std::vector<Array2>& tokens, const std::vector<FeatureMap>& maps,
                const TeacherBundle& teacher, const std::vector<int>& negative_of) {
    Graph g;
    std::vector<NodeId> nodes;
    nodes.reserve(tokens.size());
    for (const auto& u : tokens) nodes.push_back(g.constant(u));
    return g.scalar_value(lar_loss(g, nodes, maps, teacher, negative_of));
}

TotalLossResult total_loss(const std::vector<const SyntheticImage*>& batch,
                           const ParamSet& params, const ModelConfig& cfg,
                           const TeacherBundle& teacher, const LossConfig& loss_cfg,
                           Rng& negative_rng, const std::vector<Array2>* inputs) {
    loss_cfg.validate();
    int b = static_cast<int>(batch.size());
    if (b < 1) throw ConfigError("total_loss: empty batch");
    if (inputs && inputs->size() != batch.size())
        throw DimensionError("total_loss: inputs size mismatch");
    bool use_lar = loss_cfg.lar_weight > 0.0;
    if (use_lar && b < 2)
        throw ConfigError("total_loss: LAR with in-batch negatives needs batch size >= 2");

    Graph g;
    ParamBinding bind(g, params);

    Array2 v(b, teacher.config().feat_dim);
    std::vector<NodeId> token_nodes;
    std::vector<FeatureMap> maps;
    token_nodes.reserve(static_cast<size_t>(b));
    NodeId t_stack = -1;
    for (int i = 0; i < b; ++i) {
        const SyntheticImage& img = *batch[static_cast<size_t>(i)];
        Array2 vin = inputs ? (*inputs)[static_cast<size_t>(i)] : query_input(img, teacher, cfg);
        NodeId input = g.constant(std::move(vin));
        QueryForward fwd = query_forward(g, input, bind, cfg, img.h, img.w);
        token_nodes.push_back(fwd.sentence_tokens);
        NodeId t_i = teacher.text_feature(g, training_sentence(g, fwd.sentence_tokens, teacher));
        t_stack = i == 0 ? t_i : g.vcat(t_stack, t_i);
        Array2 vi = teacher.visual_feature(img);
        for (int k = 0; k < vi.cols; ++k) v.at(i, k) = vi.at(0, k);
        if (use_lar) maps.push_back(teacher.visual_map(img));
    }

    NodeId loss = -1;
    TotalLossResult res;
    if (loss_cfg.gcd_weight > 0.0) {
        NodeId gcd = gcd_loss(g, t_stack, v, loss_cfg.tau);
        res.gcd = g.scalar_value(gcd);
        loss = g.scale(gcd, loss_cfg.gcd_weight);
    }
    if (use_lar) {
        auto negatives = pick_negatives(loss_cfg.policy, v, g.value(t_stack), negative_rng);
        NodeId lar = lar_loss(g, token_nodes, maps, teacher, negatives);
        res.lar = g.scalar_value(lar);
        NodeId weighted = g.scale(lar, loss_cfg.lar_weight);
        loss = loss < 0 ? weighted : g.add(loss, weighted);
    }
    if (loss < 0) throw ConfigError("total_loss: both loss weights are zero");
    res.total = g.scalar_value(loss);
    g.backward(loss);
    res.grads = g.parameter_grads();
    return res;
}

}  // namespace isa
