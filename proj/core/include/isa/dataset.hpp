#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "isa/errors.hpp"

namespace isa {

class Rng;

/// Semantically invalid edit (e.g. adding a concept the image already has).
/// The generator rejects and resamples; callers of oracle_targets see it as
/// a format-level failure of the (reference, modifier) pair.
struct InvalidEditError : FormatError {
    using FormatError::FormatError;
};

std::string concept_word(int concept_id);

/// Grid of cells, each holding a concept id or -1 for background.
struct SyntheticImage {
    int id = 0;
    int h = 0;
    int w = 0;
    std::vector<int> cells;

    /// Sorted distinct foreground concepts.
    std::vector<int> concept_set() const;
    /// Occurrences per concept id (foreground cells only).
    std::map<int, int> concept_counts() const;
};

struct Modifier {
    enum class Kind { add, remove, replace };
    Kind kind = Kind::add;
    int a = -1;  // operand: added / removed / replaced concept
    int b = -1;  // replacement concept (replace only)

    /// Parses "add cX" | "remove cX" | "replace cX with cY" token lists.
    /// Throws FormatError on anything else.
    static Modifier parse(const std::vector<std::string>& tokens, int n_concepts);
    std::vector<std::string> words() const;
};

/// Edited concept set; throws InvalidEditError if the edit does not apply
/// cleanly to the given set (duplicate add, absent remove, empty result,
/// result larger than the 4-concept image cap).
std::set<int> apply_edit(const std::set<int>& concepts, const Modifier& m);

struct TripletRecord {
    int reference_id = 0;
    std::vector<std::string> modifier;
    std::vector<int> target_ids;  // gallery ids, sorted ascending
};

struct DatagenParams {
    int n_concepts = 6;
    int grid_h = 8;
    int grid_w = 8;
    int n_train = 2000;
    int n_gallery = 128;
    int n_refs = 60;
    int n_queries = 500;
    double bg_prob = 0.35;
    int dup_cap = 3;  // max gallery images sharing one concept set
    double w_add = 0.90;
    double w_replace = 0.05;
    double w_remove = 0.05;
    uint64_t seed = 0;
    int max_attempts = 200000;

    void validate() const;  // throws ConfigError
};

/// Training pool, gallery, held-out query references, and evaluation triplets.
///
/// Query references are 3-concept images whose concept sets are withheld from
/// the gallery (the twenty 3-sets are split between the two pools), so a
/// query can never be answered by an exact copy of its reference. Gallery
/// sets of sizes 1, 2 and 4 are all eligible; duplicates up to dup_cap give
/// the multi-target cases needed by mAP.
struct Dataset {
    std::vector<SyntheticImage> train;
    std::vector<SyntheticImage> gallery;
    std::vector<SyntheticImage> refs;
    std::vector<TripletRecord> queries;
};

Dataset gen_dataset(const DatagenParams& params);

/// Single random grid image over the given concepts (each appears at least
/// once); used by gen_dataset and by small fixtures.
SyntheticImage random_image(int id, const std::vector<int>& concepts, const DatagenParams& p,
                            Rng& rng);

/// Exact set of gallery ids whose concept set equals the edited reference
/// set. Independent of how triplets were generated; excludes ref.id.
std::vector<int> oracle_targets(const SyntheticImage& ref,
                                const std::vector<std::string>& modifier_tokens,
                                const std::vector<SyntheticImage>& gallery,
                                int n_concepts);

// ---- line-delimited JSON persistence ----

void save_images_jsonl(const std::string& path, const std::vector<SyntheticImage>& images,
                       const std::string& config_echo);
std::vector<SyntheticImage> load_images_jsonl(const std::string& path);
void save_triplets_jsonl(const std::string& path, const std::vector<TripletRecord>& triplets,
                         const std::string& config_echo);
std::vector<TripletRecord> load_triplets_jsonl(const std::string& path);

}  // namespace isa
