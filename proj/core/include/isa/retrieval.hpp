#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "isa/dataset.hpp"
#include "isa/model.hpp"
#include "isa/trainer.hpp"

namespace isa {

/// Offline gallery side: one unit-norm teacher feature per image, searched
/// exhaustively by inner product. Vectors are held in the 32-bit precision of
/// the embedding file so that build -> save -> load -> search and
/// load -> search agree exactly.
struct GalleryIndex {
    std::vector<std::string> ids;
    std::vector<std::vector<float>> vectors;
    int dim = 0;
    uint64_t seed = 0;
    uint64_t teacher_fingerprint = 0;

    static GalleryIndex build(const std::vector<SyntheticImage>& gallery,
                              const TeacherBundle& teacher, uint64_t seed);
    int size() const { return static_cast<int>(ids.size()); }
};

/// Embedding file: magic "ISAE", format version u16, N u32, d u32, then N
/// records of (u16 id length, ASCII id, d little-endian f32). The sidecar
/// "<path>.meta.json" carries seed, teacher fingerprint and the config echo.
void save_index(const GalleryIndex& index, const std::string& path,
                const std::string& config_echo);
GalleryIndex load_index(const std::string& path);

/// Numeric-aware id order used for deterministic tie-breaks: shorter decimal
/// strings sort first, equal lengths lexicographically.
bool id_less(const std::string& a, const std::string& b);

struct RankedHit {
    std::string id;
    double score = 0.0;
};

struct RankedList {
    std::vector<RankedHit> hits;  // scores non-increasing, ties by ascending id
    bool truncated = false;       // k exceeded the index size
};

/// Exhaustive top-k scan. Throws Error if expected_fingerprint does not match
/// the index (gallery embedded by a different teacher).
RankedList search(const GalleryIndex& index, const Array2& query, int k,
                  uint64_t expected_fingerprint);

/// Fraction of triplets with at least one target id inside the top k hits.
double recall_at_k(const std::vector<RankedList>& results,
                   const std::vector<TripletRecord>& triplets, int k);

/// Mean AP@k with the multi-target normalizer min(k, #targets).
double map_at_k(const std::vector<RankedList>& results,
                const std::vector<TripletRecord>& triplets, int k);

/// Query tokens in the inference order: prompt, sentence tokens, "that",
/// modifier words.
struct ComposedQuery {
    Array2 tokens;
    int prompt_len = 0;
    int sentence_len = 0;
    int modifier_len = 0;
};

ComposedQuery compose_query(const Array2& sentence_tokens,
                            const std::vector<std::string>& modifier,
                            const WordEmbeddingTable& table);

/// Full online path: reference image -> sentence tokens -> composed query ->
/// teacher text feature (1 x d unit row).
Array2 compose_and_encode(const SyntheticImage& reference,
                          const std::vector<std::string>& modifier, const ParamSet& params,
                          const ModelConfig& cfg, const TeacherBundle& teacher);

// ---- naive baselines ----

Array2 baseline_image_only(const SyntheticImage& reference, const TeacherBundle& teacher);
Array2 baseline_text_only(const std::vector<std::string>& modifier, const TeacherBundle& teacher);
Array2 baseline_image_text(const SyntheticImage& reference,
                           const std::vector<std::string>& modifier, const TeacherBundle& teacher);

inline const std::vector<int>& recall_ks() {
    static const std::vector<int> ks = {1, 5, 10, 50};
    return ks;
}
inline const std::vector<int>& map_ks() {
    static const std::vector<int> ks = {5, 10, 25, 50};
    return ks;
}

/// recall_at_K / map_at_K entries plus avg_recall (of 1,5,10,50),
/// avg_recall_1_5_10 and avg_map under the given key prefix.
void add_ranking_metrics(std::map<std::string, double>& metrics, const std::string& prefix,
                         const std::vector<RankedList>& results,
                         const std::vector<TripletRecord>& triplets);

/// Key-value metrics document: "# isa metrics v1", config echo comments,
/// then "key = value" lines in key order.
void write_metrics_doc(const std::map<std::string, double>& metrics, const std::string& path,
                       const std::string& config_echo);
std::string format_metrics_doc(const std::map<std::string, double>& metrics,
                               const std::string& config_echo);

}  // namespace isa
