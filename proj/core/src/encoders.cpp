#include "isa/encoders.hpp"

#include <cmath>
#include <cstring>

#include "isa/rng.hpp"

namespace isa {

const std::vector<std::string>& prompt_words() {
    static const std::vector<std::string> kPrompt = {"a", "photo", "of"};
    return kPrompt;
}

Vocabulary Vocabulary::build(int n_concepts) {
    Vocabulary v;
    for (int i = 0; i < n_concepts; ++i) v.words.push_back(concept_word(i));
    for (const auto& w : prompt_words()) v.words.push_back(w);
    v.words.push_back(kThatWord);
    v.words.push_back(kBackgroundWord);
    for (const char* w : {"add", "remove", "replace", "with"}) v.words.push_back(w);
    for (int i = 0; i < static_cast<int>(v.words.size()); ++i) v.index[v.words[i]] = i;
    return v;
}

int Vocabulary::id(const std::string& word) const {
    auto it = index.find(word);
    if (it == index.end()) throw VocabError("unknown word '" + word + "'");
    return it->second;
}

namespace {

// Rows of `m` orthonormalized in place by modified Gram-Schmidt. Rows past
// the column rank are left as normalized residual-free random directions.
void orthonormalize_rows(Array2& m, Rng& rng) {
    for (int i = 0; i < m.rows; ++i) {
        for (int attempt = 0; attempt < 16; ++attempt) {
            for (int k = 0; k < i && k < m.cols; ++k) {
                double d = 0.0;
                for (int j = 0; j < m.cols; ++j) d += m.at(i, j) * m.at(k, j);
                for (int j = 0; j < m.cols; ++j) m.at(i, j) -= d * m.at(k, j);
            }
            double n = 0.0;
            for (int j = 0; j < m.cols; ++j) n += m.at(i, j) * m.at(i, j);
            n = std::sqrt(n);
            if (n > 1e-8) {
                for (int j = 0; j < m.cols; ++j) m.at(i, j) /= n;
                break;
            }
            for (int j = 0; j < m.cols; ++j) m.at(i, j) = rng.normal();
        }
    }
}

Array2 orthonormal_rows(int r, int c, Rng& rng) {
    Array2 m = random_normal(r, c, 1.0, rng);
    orthonormalize_rows(m, rng);
    return m;
}

}  // namespace

WordEmbeddingTable WordEmbeddingTable::create(int n_concepts, int word_dim,
                                              double function_word_bias, uint64_t seed) {
    Vocabulary vocab = Vocabulary::build(n_concepts);
    int n_content = n_concepts + static_cast<int>(prompt_words().size()) + 2;  // + that + bg
    int n_function = vocab.size() - n_content;
    if (word_dim < vocab.size())
        throw ConfigError("word_dim must be >= vocabulary size (" +
                          std::to_string(vocab.size()) + ")");
    if (std::abs(function_word_bias) >= 1.0)
        throw ConfigError("function_word_bias must lie in (-1, 1)");

    Rng rng = Rng::stream(seed, "teacher.embed");
    // one orthonormal axis per word; function words then get tilted
    Array2 basis = orthonormal_rows(vocab.size(), word_dim, rng);

    WordEmbeddingTable t;
    t.vocab = vocab;
    t.rows = Array2(vocab.size(), word_dim);
    Array2 cmean(1, word_dim);
    for (int i = 0; i < n_concepts; ++i)
        for (int j = 0; j < word_dim; ++j) cmean.at(0, j) += basis.at(i, j);
    double cn = frobenius_norm(cmean);
    for (int j = 0; j < word_dim; ++j) cmean.at(0, j) /= cn;

    for (int i = 0; i < vocab.size(); ++i) {
        bool function_word = i >= n_content;
        double mu = function_word ? function_word_bias : 0.0;
        double res = std::sqrt(1.0 - mu * mu);
        for (int j = 0; j < word_dim; ++j)
            t.rows.at(i, j) = mu * cmean.at(0, j) + res * basis.at(i, j);
    }
    (void)n_function;
    return t;
}

Array2 WordEmbeddingTable::embed(const std::vector<std::string>& words) const {
    Array2 out(static_cast<int>(words.size()), word_dim());
    for (int i = 0; i < out.rows; ++i) {
        int id = vocab.id(words[static_cast<size_t>(i)]);
        for (int j = 0; j < out.cols; ++j) out.at(i, j) = rows.at(id, j);
    }
    return out;
}

TeacherBundle TeacherBundle::create(int n_concepts, const TeacherConfig& cfg, uint64_t seed) {
    if (cfg.feat_dim < cfg.word_dim)
        throw ConfigError("teacher feat_dim must be >= word_dim for an isometric text projection");
    TeacherBundle t;
    t.n_concepts_ = n_concepts;
    t.cfg_ = cfg;
    t.table_ = WordEmbeddingTable::create(n_concepts, cfg.word_dim, cfg.function_word_bias, seed);
    Rng text_rng = Rng::stream(seed, "teacher.text");
    t.text_proj_ = orthonormal_rows(cfg.word_dim, cfg.feat_dim, text_rng);
    Rng map_rng = Rng::stream(seed, "teacher.map");
    t.map_proj_ = scale(orthonormal_rows(cfg.word_dim, cfg.map_channels, map_rng), cfg.map_gain);
    // the matching head scores tokens against cells in the shared embedding
    // space with the common concept component removed, at a fixed gain that
    // puts mean-pooled logits in the active range of the logistic
    Array2 cmean(1, cfg.word_dim);
    for (int c = 0; c < n_concepts; ++c) {
        int id = t.table_.vocab.id(concept_word(c));
        for (int j = 0; j < cfg.word_dim; ++j) cmean.at(0, j) += t.table_.rows.at(id, j);
    }
    cmean = l2_normalize(cmean);
    // centered = (I - cmean^T cmean) * map_proj
    Array2 centered = t.map_proj_;
    Array2 proj_c = matmul(cmean, t.map_proj_);  // 1 x C_t
    for (int i = 0; i < cfg.word_dim; ++i)
        for (int j = 0; j < cfg.map_channels; ++j)
            centered.at(i, j) -= cmean.at(0, i) * proj_c.at(0, j);
    // the map gain cancels inside the bilinear so match logits do not depend on it
    t.match_bilinear_ = scale(centered, cfg.match_scale / (cfg.map_gain * cfg.map_gain));
    return t;
}

Array2 TeacherBundle::visual_feature(const SyntheticImage& img) const {
    Array2 acc(1, cfg_.word_dim);
    int fg = 0;
    for (int c : img.cells) {
        if (c < 0) continue;
        ++fg;
        int id = table_.vocab.id(concept_word(c));
        for (int j = 0; j < cfg_.word_dim; ++j) acc.at(0, j) += table_.rows.at(id, j);
    }
    if (fg == 0) throw DegenerateInputError("teacher_visual: image has no foreground concepts");
    return l2_normalize(matmul(acc, text_proj_));
}

FeatureMap TeacherBundle::visual_map(const SyntheticImage& img) const {
    Array2 embeds(static_cast<int>(img.cells.size()), cfg_.word_dim);
    for (size_t i = 0; i < img.cells.size(); ++i) {
        int id = img.cells[i] < 0 ? table_.vocab.id(kBackgroundWord)
                                  : table_.vocab.id(concept_word(img.cells[i]));
        for (int j = 0; j < cfg_.word_dim; ++j)
            embeds.at(static_cast<int>(i), j) = table_.rows.at(id, j);
    }
    FeatureMap out;
    out.h = img.h;
    out.w = img.w;
    out.flat = matmul(embeds, map_proj_);
    return out;
}

Array2 TeacherBundle::text_feature(const Array2& tokens) const {
    if (tokens.rows < 1) throw DegenerateInputError("teacher_text: empty token sequence");
    return l2_normalize(matmul(mean_rows(tokens), text_proj_));
}

NodeId TeacherBundle::text_feature(Graph& g, NodeId tokens) const {
    if (g.value(tokens).rows < 1) throw DegenerateInputError("teacher_text: empty token sequence");
    NodeId proj = g.constant(text_proj_);
    return g.l2_normalize(g.matmul(g.mean_rows(tokens), proj));
}

double TeacherBundle::match_probability(const Array2& tokens, const FeatureMap& fv) const {
    Array2 pooled = mean_rows(fv.flat);  // 1 x C_t
    Array2 score = matmul(matmul(mean_rows(tokens), match_bilinear_), transpose(pooled));
    return 1.0 / (1.0 + std::exp(-score.at(0, 0)));
}

NodeId TeacherBundle::match_logit(Graph& g, NodeId tokens, const FeatureMap& fv) const {
    NodeId bilinear = g.constant(match_bilinear_);
    NodeId pooled_t = g.constant(transpose(mean_rows(fv.flat)));
    return g.matmul(g.matmul(g.mean_rows(tokens), bilinear), pooled_t);
}

uint64_t TeacherBundle::fingerprint() const {
    auto bytes = serialize();
    return fnv1a(bytes.data(), bytes.size());
}

namespace {
void append_array(std::vector<unsigned char>& out, const Array2& a) {
    auto push_u32 = [&](uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
    };
    push_u32(static_cast<uint32_t>(a.rows));
    push_u32(static_cast<uint32_t>(a.cols));
    size_t off = out.size();
    out.resize(off + a.data.size() * sizeof(double));
    std::memcpy(out.data() + off, a.data.data(), a.data.size() * sizeof(double));
}
}  // namespace

std::vector<unsigned char> TeacherBundle::serialize() const {
    std::vector<unsigned char> out;
    out.push_back(static_cast<unsigned char>(n_concepts_));
    out.push_back(static_cast<unsigned char>(cfg_.word_dim));
    out.push_back(static_cast<unsigned char>(cfg_.feat_dim));
    out.push_back(static_cast<unsigned char>(cfg_.map_channels));
    append_array(out, table_.rows);
    append_array(out, text_proj_);
    append_array(out, map_proj_);
    append_array(out, match_bilinear_);
    return out;
}

// ---- light encoder ----

Array2 init_matrix(int rows, int cols, int fan_in, Rng& rng) {
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    return random_uniform(rows, cols, -bound, bound, rng);
}

ParamSet init_light_params(const LightEncoderConfig& cfg, Rng& rng) {
    ParamSet p;
    p["light.w1"] = init_matrix(cfg.in_channels, cfg.channels, cfg.in_channels, rng);
    p["light.b1"] = Array2::zeros(1, cfg.channels);
    p["light.w2"] = init_matrix(9 * cfg.channels, cfg.channels, 9 * cfg.channels, rng);
    p["light.b2"] = Array2::zeros(1, cfg.channels);
    return p;
}

Array2 image_channels(const SyntheticImage& img, int n_concepts) {
    Array2 x(static_cast<int>(img.cells.size()), n_concepts + 1);
    for (size_t i = 0; i < img.cells.size(); ++i) {
        int ch = img.cells[i] < 0 ? n_concepts : img.cells[i];
        x.at(static_cast<int>(i), ch) = 1.0;
    }
    return x;
}

NodeId light_encode(Graph& g, NodeId input, const ParamBinding& params, int h, int w) {
    NodeId y1 = g.activation(g.add_row(g.matmul(input, params["light.w1"]), params["light.b1"]));
    NodeId patches = g.im2col3x3(y1, h, w);
    return g.add_row(g.matmul(patches, params["light.w2"]), params["light.b2"]);
}

FeatureMap light_encode(const SyntheticImage& img, const ParamSet& params,
                        const LightEncoderConfig& cfg) {
    Graph g;
    ParamBinding bind(g, params);
    NodeId input = g.constant(image_channels(img, cfg.in_channels - 1));
    NodeId out = light_encode(g, input, bind, img.h, img.w);
    FeatureMap fm;
    fm.h = img.h;
    fm.w = img.w;
    fm.flat = g.value(out);
    return fm;
}

}  // namespace isa
