#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "isa/dataset.hpp"
#include "isa/graph.hpp"
#include "isa/params.hpp"

namespace isa {

/// H x W x C feature map, stored pixel-major: flat row (r*w + c) holds the
/// channel vector of grid cell (r, c).
struct FeatureMap {
    int h = 0;
    int w = 0;
    Array2 flat;  // (h*w) x channels

    int channels() const { return flat.cols; }
};

const std::vector<std::string>& prompt_words();  // "a photo of"
inline const char* kThatWord = "that";
inline const char* kBackgroundWord = "bg";

struct Vocabulary {
    std::vector<std::string> words;
    std::map<std::string, int> index;

    static Vocabulary build(int n_concepts);
    int id(const std::string& word) const;  // throws VocabError
    int size() const { return static_cast<int>(words.size()); }
};

/// Frozen word-embedding table shared by the text and matching encoders.
///
/// Construction: concept words, prompt words, "that" and "bg" are mutually
/// orthonormal; the template verbs (add/remove/replace/with) are unit rows
/// carrying a fixed component `function_word_bias` along the mean concept
/// direction, the remainder on their own orthonormal axes.
struct WordEmbeddingTable {
    Vocabulary vocab;
    Array2 rows;  // V x word_dim, unit rows

    static WordEmbeddingTable create(int n_concepts, int word_dim, double function_word_bias,
                                     uint64_t seed);

    Array2 embed(const std::vector<std::string>& words) const;  // k x word_dim
    int word_dim() const { return rows.cols; }
};

struct TeacherConfig {
    int word_dim = 16;
    int feat_dim = 32;      // retrieval feature dimension d
    int map_channels = 16;  // C_t, channels of the teacher feature map
    double function_word_bias = -0.55;
    double match_scale = 24.0;  // gain of the constructed matching bilinear
    double map_gain = 0.4;      // output scale of the teacher feature map
};

/// Frozen deterministic stand-in for the large vision-language model: a
/// visual encoder (global feature + feature map), a text encoder, and a
/// bilinear matching head, all sharing one word-embedding table. Every
/// parameter is a pure function of (n_concepts, config, seed) and is never
/// touched by training.
class TeacherBundle {
public:
    static TeacherBundle create(int n_concepts, const TeacherConfig& cfg, uint64_t seed);

    /// Unit-norm 1 x feat_dim vector: normalized sum of per-cell concept
    /// embeddings mapped through the frozen text projection.
    Array2 visual_feature(const SyntheticImage& img) const;

    /// Per-cell embeddings through the frozen map projection, (h*w) x C_t.
    FeatureMap visual_map(const SyntheticImage& img) const;

    /// l2(mean(tokens) * T). tokens is k x word_dim, k >= 1.
    Array2 text_feature(const Array2& tokens) const;
    NodeId text_feature(Graph& g, NodeId tokens) const;

    /// Bilinear match score of sentence tokens against a mean-pooled map.
    double match_probability(const Array2& tokens, const FeatureMap& fv) const;
    NodeId match_logit(Graph& g, NodeId tokens, const FeatureMap& fv) const;

    const WordEmbeddingTable& table() const { return table_; }
    const Vocabulary& vocab() const { return table_.vocab; }
    const TeacherConfig& config() const { return cfg_; }
    int n_concepts() const { return n_concepts_; }

    uint64_t fingerprint() const;
    std::vector<unsigned char> serialize() const;

private:
    TeacherBundle() = default;

    int n_concepts_ = 0;
    TeacherConfig cfg_;
    WordEmbeddingTable table_;
    Array2 text_proj_;      // word_dim x feat_dim, orthonormal rows
    Array2 map_proj_;       // word_dim x map_channels
    Array2 match_bilinear_; // word_dim x map_channels, constructed equal to map_proj_
};

// ---- trainable lightweight query-side encoder ----

struct LightEncoderConfig {
    int in_channels = 7;  // n_concepts + 1 background channel
    int channels = 16;    // C
};

/// Parameters "light.w1", "light.b1" (1x1 conv) and "light.w2", "light.b2"
/// (3x3 same-padded conv via patch gather).
ParamSet init_light_params(const LightEncoderConfig& cfg, Rng& rng);

/// One-hot channel grid of an image, (h*w) x (n_concepts+1), bg channel last.
Array2 image_channels(const SyntheticImage& img, int n_concepts);

NodeId light_encode(Graph& g, NodeId input, const ParamBinding& params, int h, int w);
FeatureMap light_encode(const SyntheticImage& img, const ParamSet& params,
                        const LightEncoderConfig& cfg);

}  // namespace isa
