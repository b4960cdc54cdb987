#include "isa/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

namespace isa {

GalleryIndex GalleryIndex::build(const std::vector<SyntheticImage>& gallery,
                                 const TeacherBundle& teacher, uint64_t seed) {
    if (gallery.empty()) throw DegenerateInputError("build_index: empty gallery");
    GalleryIndex index;
    index.dim = teacher.config().feat_dim;
    index.seed = seed;
    index.teacher_fingerprint = teacher.fingerprint();
    std::set<std::string> seen;
    for (const auto& img : gallery) {
        std::string id = std::to_string(img.id);
        if (!seen.insert(id).second) throw Error("build_index: duplicate id " + id);
        Array2 v = teacher.visual_feature(img);
        std::vector<float> row(static_cast<size_t>(index.dim));
        for (int j = 0; j < index.dim; ++j) row[static_cast<size_t>(j)] = static_cast<float>(v.at(0, j));
        index.ids.push_back(std::move(id));
        index.vectors.push_back(std::move(row));
    }
    return index;
}

namespace {

void put_u16(std::string& out, uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}
void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_f32(std::string& out, float f) {
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
}

}  // namespace

void save_index(const GalleryIndex& index, const std::string& path,
                const std::string& config_echo) {
    std::string out;
    out += "ISAE";
    put_u16(out, 1);
    put_u32(out, static_cast<uint32_t>(index.ids.size()));
    put_u32(out, static_cast<uint32_t>(index.dim));
    for (size_t i = 0; i < index.ids.size(); ++i) {
        const std::string& id = index.ids[i];
        if (id.size() > 0xffff) throw FormatError("save_index: id too long");
        put_u16(out, static_cast<uint16_t>(id.size()));
        out += id;
        for (float f : index.vectors[i]) put_f32(out, f);
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for write: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("write failed: " + path);

    nlohmann::ordered_json meta;
    meta["seed"] = index.seed;
    meta["teacher_fingerprint"] = index.teacher_fingerprint;
    meta["n"] = index.ids.size();
    meta["dim"] = index.dim;
    meta["config"] = config_echo;
    std::ofstream mf(path + ".meta.json", std::ios::binary);
    if (!mf) throw IoError("cannot open for write: " + path + ".meta.json");
    mf << meta.dump(2) << "\n";
}

GalleryIndex load_index(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for read: " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (buf.size() < 14 || buf.compare(0, 4, "ISAE") != 0)
        throw FormatError("embedding file: bad magic in " + path);
    size_t pos = 4;
    auto u16 = [&]() {
        if (pos + 2 > buf.size()) throw FormatError("embedding file: truncated");
        uint16_t v = static_cast<uint8_t>(buf[pos]) |
                     (static_cast<uint16_t>(static_cast<uint8_t>(buf[pos + 1])) << 8);
        pos += 2;
        return v;
    };
    auto u32 = [&]() {
        if (pos + 4 > buf.size()) throw FormatError("embedding file: truncated");
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<uint32_t>(static_cast<uint8_t>(buf[pos + i])) << (8 * i);
        pos += 4;
        return v;
    };
    uint16_t version = u16();
    if (version != 1) throw FormatError("embedding file: unsupported version");
    uint32_t n = u32();
    uint32_t d = u32();
    GalleryIndex index;
    index.dim = static_cast<int>(d);
    for (uint32_t i = 0; i < n; ++i) {
        uint16_t len = u16();
        if (pos + len > buf.size()) throw FormatError("embedding file: truncated id");
        index.ids.push_back(buf.substr(pos, len));
        pos += len;
        std::vector<float> row(d);
        for (uint32_t j = 0; j < d; ++j) {
            uint32_t bits = u32();
            float fl;
            std::memcpy(&fl, &bits, 4);
            row[j] = fl;
        }
        index.vectors.push_back(std::move(row));
    }

    std::ifstream mf(path + ".meta.json", std::ios::binary);
    if (mf) {
        nlohmann::json meta = nlohmann::json::parse(mf, nullptr, true);
        index.seed = meta.value("seed", 0ull);
        index.teacher_fingerprint = meta.value("teacher_fingerprint", 0ull);
    }
    return index;
}

bool id_less(const std::string& a, const std::string& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
}

RankedList search(const GalleryIndex& index, const Array2& query, int k,
                  uint64_t expected_fingerprint) {
    if (expected_fingerprint != 0 && index.teacher_fingerprint != 0 &&
        expected_fingerprint != index.teacher_fingerprint)
        throw Error("search: index fingerprint does not match the query-side teacher");
    if (query.rows != 1 || query.cols != index.dim)
        throw DimensionError("search: query is " + shape_str(query) + ", index dim " +
                             std::to_string(index.dim));
    RankedList out;
    if (k > index.size()) {
        out.truncated = true;
        k = index.size();
    }
    if (k <= 0) return out;

    std::vector<int> order(index.vectors.size());
    std::vector<double> scores(index.vectors.size());
    for (size_t i = 0; i < index.vectors.size(); ++i) {
        double s = 0.0;
        const auto& row = index.vectors[i];
        for (int j = 0; j < index.dim; ++j) s += static_cast<double>(row[static_cast<size_t>(j)]) * query.at(0, j);
        scores[i] = s;
        order[i] = static_cast<int>(i);
    }
    auto better = [&](int a, int b) {
        if (scores[static_cast<size_t>(a)] != scores[static_cast<size_t>(b)])
            return scores[static_cast<size_t>(a)] > scores[static_cast<size_t>(b)];
        return id_less(index.ids[static_cast<size_t>(a)], index.ids[static_cast<size_t>(b)]);
    };
    std::partial_sort(order.begin(), order.begin() + k, order.end(), better);
    out.hits.reserve(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) {
        int idx = order[static_cast<size_t>(i)];
        out.hits.push_back({index.ids[static_cast<size_t>(idx)], scores[static_cast<size_t>(idx)]});
    }
    return out;
}

namespace {

std::set<std::string> target_id_set(const TripletRecord& t) {
    std::set<std::string> s;
    for (int id : t.target_ids) s.insert(std::to_string(id));
    return s;
}

}  // namespace

double recall_at_k(const std::vector<RankedList>& results,
                   const std::vector<TripletRecord>& triplets, int k) {
    if (results.size() != triplets.size())
        throw DimensionError("recall_at_k: results/triplets size mismatch");
    if (triplets.empty()) return 0.0;
    int hits = 0;
    for (size_t q = 0; q < triplets.size(); ++q) {
        auto targets = target_id_set(triplets[q]);
        const auto& list = results[q].hits;
        int limit = std::min<int>(k, static_cast<int>(list.size()));
        for (int i = 0; i < limit; ++i) {
            if (targets.count(list[static_cast<size_t>(i)].id)) {
                ++hits;
                break;
            }
        }
    }
    return static_cast<double>(hits) / static_cast<double>(triplets.size());
}

double map_at_k(const std::vector<RankedList>& results,
                const std::vector<TripletRecord>& triplets, int k) {
    if (results.size() != triplets.size())
        throw DimensionError("map_at_k: results/triplets size mismatch");
    if (triplets.empty()) return 0.0;
    double sum = 0.0;
    for (size_t q = 0; q < triplets.size(); ++q) {
        auto targets = target_id_set(triplets[q]);
        const auto& list = results[q].hits;
        int limit = std::min<int>(k, static_cast<int>(list.size()));
        int rel = 0;
        double ap = 0.0;
        for (int i = 0; i < limit; ++i) {
            if (targets.count(list[static_cast<size_t>(i)].id)) {
                ++rel;
                ap += static_cast<double>(rel) / static_cast<double>(i + 1);
            }
        }
        int denom = std::min<int>(k, static_cast<int>(targets.size()));
        if (denom > 0) sum += ap / denom;
    }
    return sum / static_cast<double>(triplets.size());
}

ComposedQuery compose_query(const Array2& sentence_tokens,
                            const std::vector<std::string>& modifier,
                            const WordEmbeddingTable& table) {
    ComposedQuery q;
    q.prompt_len = static_cast<int>(prompt_words().size());
    q.sentence_len = sentence_tokens.rows;
    q.modifier_len = static_cast<int>(modifier.size());
    Array2 tokens = vcat(table.embed(prompt_words()), sentence_tokens);
    tokens = vcat(tokens, table.embed({kThatWord}));
    if (!modifier.empty()) tokens = vcat(tokens, table.embed(modifier));
    q.tokens = std::move(tokens);
    return q;
}

Array2 compose_and_encode(const SyntheticImage& reference,
                          const std::vector<std::string>& modifier, const ParamSet& params,
                          const ModelConfig& cfg, const TeacherBundle& teacher) {
    TokenLearnerOutput out = run_query_model(reference, params, cfg, teacher);
    ComposedQuery q = compose_query(out.sentence_tokens, modifier, teacher.table());
    return teacher.text_feature(q.tokens);
}

Array2 baseline_image_only(const SyntheticImage& reference, const TeacherBundle& teacher) {
    return teacher.visual_feature(reference);
}

Array2 baseline_text_only(const std::vector<std::string>& modifier, const TeacherBundle& teacher) {
    if (modifier.empty()) throw DegenerateInputError("text-only baseline: empty modifier");
    return teacher.text_feature(teacher.table().embed(modifier));
}

Array2 baseline_image_text(const SyntheticImage& reference,
                           const std::vector<std::string>& modifier,
                           const TeacherBundle& teacher) {
    Array2 v = baseline_image_only(reference, teacher);
    Array2 t = baseline_text_only(modifier, teacher);
    return l2_normalize(add(v, t));
}

void add_ranking_metrics(std::map<std::string, double>& metrics, const std::string& prefix,
                         const std::vector<RankedList>& results,
                         const std::vector<TripletRecord>& triplets) {
    double avg_all = 0.0, avg_small = 0.0;
    for (int k : recall_ks()) {
        double r = recall_at_k(results, triplets, k);
        metrics[prefix + "recall_at_" + std::to_string(k)] = r;
        avg_all += r;
        if (k <= 10) avg_small += r;
    }
    metrics[prefix + "avg_recall"] = avg_all / static_cast<double>(recall_ks().size());
    metrics[prefix + "avg_recall_1_5_10"] = avg_small / 3.0;
    double avg_map = 0.0;
    for (int k : map_ks()) {
        double m = map_at_k(results, triplets, k);
        metrics[prefix + "map_at_" + std::to_string(k)] = m;
        avg_map += m;
    }
    metrics[prefix + "avg_map"] = avg_map / static_cast<double>(map_ks().size());
}

std::string format_metrics_doc(const std::map<std::string, double>& metrics,
                               const std::string& config_echo) {
    std::ostringstream out;
    out << "# isa metrics v1\n";
    std::istringstream echo(config_echo);
    std::string line;
    while (std::getline(echo, line)) out << "# " << line << "\n";
    char buf[96];
    for (const auto& [key, value] : metrics) {
        std::snprintf(buf, sizeof(buf), "%.10g", value);
        out << key << " = " << buf << "\n";
    }
    return out.str();
}

void write_metrics_doc(const std::map<std::string, double>& metrics, const std::string& path,
                       const std::string& config_echo) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for write: " + path);
    f << format_metrics_doc(metrics, config_echo);
    if (!f) throw IoError("write failed: " + path);
}

}  // namespace isa
