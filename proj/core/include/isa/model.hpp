#pragma once

#include "isa/encoders.hpp"
#include "isa/token_learner.hpp"

namespace isa {

/// asymmetric: trainable light encoder feeds the token learner.
/// symmetric: the frozen teacher feature map feeds the token learner directly.
enum class Mode { asymmetric, symmetric };

Mode mode_from_string(const std::string& s);
std::string to_string(Mode m);

struct ModelConfig {
    int n_concepts = 6;
    Mode mode = Mode::asymmetric;
    LightEncoderConfig light;
    TokenLearnerConfig tok;
};

/// Trainable parameters for the configured mode ("light.*" and/or "tok.*"),
/// drawn from the "init" sub-stream of the run seed.
ParamSet init_model_params(const ModelConfig& cfg, uint64_t seed);

/// Query-branch input grid: one-hot concept channels in asymmetric mode, the
/// teacher feature map in symmetric mode.
Array2 query_input(const SyntheticImage& img, const TeacherBundle& teacher,
                   const ModelConfig& cfg);

struct QueryForward {
    NodeId sentence_tokens;  // L x word_dim
    NodeId attention;        // HW x L
};

/// input -> (light encoder) -> token learner. `input` is a constant node of
/// the shape produced by query_input.
QueryForward query_forward(Graph& g, NodeId input, const ParamBinding& params,
                           const ModelConfig& cfg, int h, int w);

/// Training-time sentence: frozen prompt rows followed by the sentence tokens.
NodeId training_sentence(Graph& g, NodeId sentence_tokens, const TeacherBundle& teacher);

/// Value-level end to end: image -> sentence tokens (+ attention), no grads.
TokenLearnerOutput run_query_model(const SyntheticImage& img, const ParamSet& params,
                                   const ModelConfig& cfg, const TeacherBundle& teacher);

}  // namespace isa
