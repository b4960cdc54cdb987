#include "isa/model.hpp"

#include "isa/rng.hpp"

namespace isa {

Mode mode_from_string(const std::string& s) {
    if (s == "asymmetric") return Mode::asymmetric;
    if (s == "symmetric") return Mode::symmetric;
    throw ConfigError("unknown mode '" + s + "'");
}

std::string to_string(Mode m) {
    return m == Mode::asymmetric ? "asymmetric" : "symmetric";
}

ParamSet init_model_params(const ModelConfig& cfg, uint64_t seed) {
    ParamSet p;
    if (cfg.mode == Mode::asymmetric) {
        Rng light_rng = Rng::stream(seed, "init.light");
        ParamSet lp = init_light_params(cfg.light, light_rng);
        p.insert(lp.begin(), lp.end());
    }
    Rng tok_rng = Rng::stream(seed, "init.tok");
    ParamSet tp = init_token_learner_params(cfg.tok, tok_rng);
    p.insert(tp.begin(), tp.end());
    return p;
}

Array2 query_input(const SyntheticImage& img, const TeacherBundle& teacher,
                   const ModelConfig& cfg) {
    if (cfg.mode == Mode::asymmetric) return image_channels(img, cfg.n_concepts);
    return teacher.visual_map(img).flat;
}

QueryForward query_forward(Graph& g, NodeId input, const ParamBinding& params,
                           const ModelConfig& cfg, int h, int w) {
    NodeId fmap = cfg.mode == Mode::asymmetric ? light_encode(g, input, params, h, w) : input;
    if (g.value(fmap).cols != cfg.tok.channels)
        throw DimensionError("query_forward: feature channels " +
                             std::to_string(g.value(fmap).cols) + " vs token learner " +
                             std::to_string(cfg.tok.channels));
    TokenForward fwd = token_learner_forward(g, fmap, params, cfg.tok);
    return {fwd.sentence_tokens, fwd.attention};
}

NodeId training_sentence(Graph& g, NodeId sentence_tokens, const TeacherBundle& teacher) {
    NodeId prompt = g.constant(teacher.table().embed(prompt_words()));
    return g.vcat(prompt, sentence_tokens);
}

TokenLearnerOutput run_query_model(const SyntheticImage& img, const ParamSet& params,
                                   const ModelConfig& cfg, const TeacherBundle& teacher) {
    Graph g;
    ParamBinding bind(g, params);
    NodeId input = g.constant(query_input(img, teacher, cfg));
    QueryForward fwd = query_forward(g, input, bind, cfg, img.h, img.w);
    return {g.value(fwd.sentence_tokens), g.value(fwd.attention)};
}

}  // namespace isa
