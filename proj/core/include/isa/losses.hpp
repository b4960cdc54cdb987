#pragma once

#include <vector>

#include "isa/model.hpp"

namespace isa {

class Rng;

struct LossConfig {
    double tau = 0.07;
    enum class NegativePolicy { uniform, hardest };
    NegativePolicy policy = NegativePolicy::uniform;
    double gcd_weight = 1.0;
    double lar_weight = 1.0;

    void validate() const;  // throws ConfigError
};

LossConfig::NegativePolicy negative_policy_from_string(const std::string& s);

/// Symmetric contrastive distillation over a batch: mean cross entropy of the
/// image-to-text and text-to-image softmax rows against the diagonal, halved.
/// t_stack is the differentiable B x d stack of text features; v holds the
/// frozen teacher image features, unit rows.
NodeId gcd_loss(Graph& g, NodeId t_stack, const Array2& v, double tau);

/// Value-level variant over precomputed unit feature stacks.
double gcd_loss(const Array2& v, const Array2& t, double tau);

/// In-batch negative index per item: negative_of[i] = j != i.
std::vector<int> pick_negatives(LossConfig::NegativePolicy policy, const Array2& v,
                                const Array2& t, Rng& rng);

/// Binary matching loss: one positive pair (tokens_i, map_i) and one negative
/// pair (tokens_i, map_{negative_of[i]}) per item; mean BCE over the 2B terms.
NodeId lar_loss(Graph& g, const std::vector<NodeId>& tokens, const std::vector<FeatureMap>& maps,
                const TeacherBundle& teacher, const std::vector<int>& negative_of);

double lar_loss(const std::vector<Array2>& tokens, const std::vector<FeatureMap>& maps,
                const TeacherBundle& teacher, const std::vector<int>& negative_of);

struct TotalLossResult {
    double total = 0.0;
    double gcd = 0.0;
    double lar = 0.0;
    Gradients grads;
};

/// Full training objective over a batch of images: query branch forward,
/// teacher text encoding, weighted GCD + LAR, gradients for every trainable
/// parameter. The teacher enters only through constants, so no gradient can
/// reach it. `inputs` optionally supplies pre-augmented query-branch grids
/// (parallel to batch); defaults to clean query_input.
TotalLossResult total_loss(const std::vector<const SyntheticImage*>& batch,
                           const ParamSet& params, const ModelConfig& cfg,
                           const TeacherBundle& teacher, const LossConfig& loss_cfg,
                           Rng& negative_rng, const std::vector<Array2>* inputs = nullptr);

}  // namespace isa
