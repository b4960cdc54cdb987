#include "isa/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>

#include "isa/rng.hpp"

namespace isa {

using json = nlohmann::ordered_json;

std::string concept_word(int concept_id) {
    return "c" + std::to_string(concept_id);
}

std::vector<int> SyntheticImage::concept_set() const {
    std::set<int> s;
    for (int c : cells)
        if (c >= 0) s.insert(c);
    return {s.begin(), s.end()};
}

std::map<int, int> SyntheticImage::concept_counts() const {
    std::map<int, int> m;
    for (int c : cells)
        if (c >= 0) ++m[c];
    return m;
}

namespace {

int parse_concept(const std::string& tok, int n_concepts) {
    if (tok.size() < 2 || tok[0] != 'c') throw FormatError("modifier: bad concept token '" + tok + "'");
    int id = 0;
    for (size_t i = 1; i < tok.size(); ++i) {
        if (tok[i] < '0' || tok[i] > '9') throw FormatError("modifier: bad concept token '" + tok + "'");
        id = id * 10 + (tok[i] - '0');
    }
    if (id >= n_concepts) throw FormatError("modifier: concept out of range '" + tok + "'");
    return id;
}

}  // namespace

Modifier Modifier::parse(const std::vector<std::string>& tokens, int n_concepts) {
    Modifier m;
    if (tokens.size() == 2 && tokens[0] == "add") {
        m.kind = Kind::add;
        m.a = parse_concept(tokens[1], n_concepts);
    } else if (tokens.size() == 2 && tokens[0] == "remove") {
        m.kind = Kind::remove;
        m.a = parse_concept(tokens[1], n_concepts);
    } else if (tokens.size() == 4 && tokens[0] == "replace" && tokens[2] == "with") {
        m.kind = Kind::replace;
        m.a = parse_concept(tokens[1], n_concepts);
        m.b = parse_concept(tokens[3], n_concepts);
    } else {
        throw FormatError("modifier: unparseable token list");
    }
    return m;
}

std::vector<std::string> Modifier::words() const {
    switch (kind) {
        case Kind::add:
            return {"add", concept_word(a)};
        case Kind::remove:
            return {"remove", concept_word(a)};
        case Kind::replace:
            return {"replace", concept_word(a), "with", concept_word(b)};
    }
    throw FormatError("modifier: bad kind");
}

std::set<int> apply_edit(const std::set<int>& concepts, const Modifier& m) {
    std::set<int> out = concepts;
    switch (m.kind) {
        case Modifier::Kind::add:
            if (out.count(m.a)) throw InvalidEditError("add: concept already present");
            if (out.size() >= 4) throw InvalidEditError("add: image concept cap reached");
            out.insert(m.a);
            break;
        case Modifier::Kind::remove:
            if (!out.count(m.a)) throw InvalidEditError("remove: concept not present");
            if (out.size() <= 1) throw InvalidEditError("remove: would empty the image");
            out.erase(m.a);
            break;
        case Modifier::Kind::replace:
            if (!out.count(m.a)) throw InvalidEditError("replace: concept not present");
            if (m.b == m.a || out.count(m.b)) throw InvalidEditError("replace: replacement already present");
            out.erase(m.a);
            out.insert(m.b);
            break;
    }
    return out;
}

void DatagenParams::validate() const {
    if (n_concepts < 4) throw ConfigError("datagen: n_concepts must be >= 4");
    if (grid_h < 2 || grid_w < 2) throw ConfigError("datagen: grid too small");
    if (n_gallery < 1) throw ConfigError("datagen: n_gallery must be >= 1");
    if (dup_cap < 1) throw ConfigError("datagen: dup_cap must be >= 1");
    if (bg_prob < 0.0 || bg_prob > 0.95) throw ConfigError("datagen: bg_prob out of range");
    double w = w_add + w_replace + w_remove;
    if (w <= 0.0 || w_add < 0 || w_replace < 0 || w_remove < 0)
        throw ConfigError("datagen: bad template weights");
    // grid must fit one cell per concept of a 4-concept image
    if (grid_h * grid_w < 8) throw ConfigError("datagen: grid too small for 4 concepts");
}

SyntheticImage random_image(int id, const std::vector<int>& concepts, const DatagenParams& p,
                            Rng& rng) {
    SyntheticImage img;
    img.id = id;
    img.h = p.grid_h;
    img.w = p.grid_w;
    img.cells.resize(static_cast<size_t>(p.grid_h) * p.grid_w, -1);
    int k = static_cast<int>(concepts.size());
    for (auto& cell : img.cells) {
        if (rng.uniform() < p.bg_prob) continue;
        cell = concepts[static_cast<size_t>(rng.uniform_int(0, k - 1))];
    }
    // every listed concept appears at least once
    for (int c : concepts) {
        if (std::find(img.cells.begin(), img.cells.end(), c) == img.cells.end())
            img.cells[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(img.cells.size()) - 1))] = c;
    }
    return img;
}

namespace {

std::vector<int> sample_distinct(int n, int k, Rng& rng) {
    std::vector<int> pool(n);
    for (int i = 0; i < n; ++i) pool[i] = i;
    rng.shuffle(pool);
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
}

std::vector<std::vector<int>> subsets_of_size(int n, int k) {
    std::vector<std::vector<int>> out;
    std::vector<int> idx(k);
    for (int i = 0; i < k; ++i) idx[i] = i;
    while (true) {
        out.push_back(idx);
        int i = k - 1;
        while (i >= 0 && idx[i] == n - k + i) --i;
        if (i < 0) break;
        ++idx[i];
        for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
    return out;
}

}  // namespace

Dataset gen_dataset(const DatagenParams& p) {
    p.validate();
    Dataset ds;

    // Partition the 3-concept sets: half become query references, half stay
    // gallery-eligible. References therefore never have an exact-set copy in
    // the gallery and composed retrieval cannot degenerate to image matching.
    auto trisets = subsets_of_size(p.n_concepts, 3);
    Rng part_rng = Rng::stream(p.seed, "data.partition");
    part_rng.shuffle(trisets);
    size_t half = trisets.size() / 2;
    std::vector<std::vector<int>> ref_sets(trisets.begin(), trisets.begin() + half);
    std::vector<std::vector<int>> gallery_pool;
    for (int k : {1, 2, 4})
        for (auto& s : subsets_of_size(p.n_concepts, k)) gallery_pool.push_back(s);
    gallery_pool.insert(gallery_pool.end(), trisets.begin() + half, trisets.end());
    std::sort(gallery_pool.begin(), gallery_pool.end());
    std::sort(ref_sets.begin(), ref_sets.end());

    if (static_cast<size_t>(p.n_gallery) > gallery_pool.size() * p.dup_cap)
        throw GenerationError("datagen: gallery pool too small for n_gallery at dup_cap");

    Rng gal_rng = Rng::stream(p.seed, "data.gallery");
    std::map<std::vector<int>, int> dup_count;
    std::map<std::vector<int>, std::vector<int>> set_to_ids;
    int attempts = 0;
    while (static_cast<int>(ds.gallery.size()) < p.n_gallery) {
        if (++attempts > p.max_attempts) throw GenerationError("datagen: gallery sampling stalled");
        const auto& s = gallery_pool[static_cast<size_t>(gal_rng.uniform_int(0, static_cast<int>(gallery_pool.size()) - 1))];
        if (dup_count[s] >= p.dup_cap) continue;
        ++dup_count[s];
        int id = static_cast<int>(ds.gallery.size());
        ds.gallery.push_back(random_image(id, s, p, gal_rng));
        set_to_ids[s].push_back(id);
    }

    Rng ref_rng = Rng::stream(p.seed, "data.refs");
    for (int i = 0; i < p.n_refs; ++i) {
        const auto& s = ref_sets[static_cast<size_t>(ref_rng.uniform_int(0, static_cast<int>(ref_sets.size()) - 1))];
        ds.refs.push_back(random_image(i, s, p, ref_rng));
    }

    Rng train_rng = Rng::stream(p.seed, "data.train");
    for (int i = 0; i < p.n_train; ++i) {
        int k = train_rng.uniform_int(1, 4);
        auto s = sample_distinct(p.n_concepts, k, train_rng);
        ds.train.push_back(random_image(i, s, p, train_rng));
    }

    Rng q_rng = Rng::stream(p.seed, "data.queries");
    double wsum = p.w_add + p.w_replace + p.w_remove;
    attempts = 0;
    while (static_cast<int>(ds.queries.size()) < p.n_queries) {
        if (++attempts > p.max_attempts)
            throw GenerationError("datagen: could not realize requested triplets");
        double pick = q_rng.uniform() * wsum;
        Modifier m;
        int ref_idx = q_rng.uniform_int(0, static_cast<int>(ds.refs.size()) - 1);
        const SyntheticImage& ref = ds.refs[static_cast<size_t>(ref_idx)];
        auto cs = ref.concept_set();
        std::set<int> sset(cs.begin(), cs.end());
        std::vector<int> absent;
        for (int c = 0; c < p.n_concepts; ++c)
            if (!sset.count(c)) absent.push_back(c);
        if (pick < p.w_add) {
            if (absent.empty() || sset.size() >= 4) continue;
            m.kind = Modifier::Kind::add;
            m.a = absent[static_cast<size_t>(q_rng.uniform_int(0, static_cast<int>(absent.size()) - 1))];
        } else if (pick < p.w_add + p.w_replace) {
            if (absent.empty()) continue;
            m.kind = Modifier::Kind::replace;
            m.a = cs[static_cast<size_t>(q_rng.uniform_int(0, static_cast<int>(cs.size()) - 1))];
            m.b = absent[static_cast<size_t>(q_rng.uniform_int(0, static_cast<int>(absent.size()) - 1))];
        } else {
            if (cs.size() < 2) continue;
            m.kind = Modifier::Kind::remove;
            m.a = cs[static_cast<size_t>(q_rng.uniform_int(0, static_cast<int>(cs.size()) - 1))];
        }
        std::set<int> edited;
        try {
            edited = apply_edit(sset, m);
        } catch (const InvalidEditError&) {
            continue;
        }
        std::vector<int> key(edited.begin(), edited.end());
        auto it = set_to_ids.find(key);
        if (it == set_to_ids.end() || it->second.empty()) continue;
        TripletRecord t;
        t.reference_id = ref.id;
        t.modifier = m.words();
        t.target_ids = it->second;
        ds.queries.push_back(std::move(t));
    }

    bool multi = std::any_of(ds.queries.begin(), ds.queries.end(),
                             [](const TripletRecord& t) { return t.target_ids.size() > 1; });
    if (p.n_queries > 0 && !multi)
        throw GenerationError("datagen: no multi-target triplet realized");
    return ds;
}

std::vector<int> oracle_targets(const SyntheticImage& ref,
                                const std::vector<std::string>& modifier_tokens,
                                const std::vector<SyntheticImage>& gallery,
                                int n_concepts) {
    Modifier m = Modifier::parse(modifier_tokens, n_concepts);
    auto cs = ref.concept_set();
    std::set<int> edited = apply_edit({cs.begin(), cs.end()}, m);
    std::vector<int> want(edited.begin(), edited.end());
    std::vector<int> out;
    for (const auto& g : gallery) {
        if (g.id == ref.id) continue;
        if (g.concept_set() == want) out.push_back(g.id);
    }
    std::sort(out.begin(), out.end());
    return out;
}

// ---- persistence ----

namespace {

void write_lines(const std::string& path, const std::vector<json>& lines) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for write: " + path);
    for (const auto& j : lines) f << j.dump() << "\n";
    if (!f) throw IoError("write failed: " + path);
}

std::vector<json> read_lines(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for read: " + path);
    std::vector<json> out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        out.push_back(json::parse(line, nullptr, true));
    }
    return out;
}

json header_line(const std::string& config_echo) {
    json h;
    h["kind"] = "header";
    h["format"] = 1;
    h["config"] = config_echo;
    return h;
}

}  // namespace

void save_images_jsonl(const std::string& path, const std::vector<SyntheticImage>& images,
                       const std::string& config_echo) {
    std::vector<json> lines;
    lines.push_back(header_line(config_echo));
    for (const auto& img : images) {
        json j;
        j["kind"] = "image";
        j["id"] = img.id;
        j["h"] = img.h;
        j["w"] = img.w;
        j["cells"] = img.cells;
        lines.push_back(std::move(j));
    }
    write_lines(path, lines);
}

std::vector<SyntheticImage> load_images_jsonl(const std::string& path) {
    std::vector<SyntheticImage> out;
    for (const auto& j : read_lines(path)) {
        if (j.value("kind", "") != "image") continue;
        SyntheticImage img;
        img.id = j.at("id").get<int>();
        img.h = j.at("h").get<int>();
        img.w = j.at("w").get<int>();
        img.cells = j.at("cells").get<std::vector<int>>();
        if (img.cells.size() != static_cast<size_t>(img.h) * img.w)
            throw FormatError("image record: cell count mismatch in " + path);
        out.push_back(std::move(img));
    }
    return out;
}

void save_triplets_jsonl(const std::string& path, const std::vector<TripletRecord>& triplets,
                         const std::string& config_echo) {
    std::vector<json> lines;
    lines.push_back(header_line(config_echo));
    for (const auto& t : triplets) {
        json j;
        j["kind"] = "triplet";
        j["ref"] = t.reference_id;
        j["modifier"] = t.modifier;
        j["targets"] = t.target_ids;
        lines.push_back(std::move(j));
    }
    write_lines(path, lines);
}

std::vector<TripletRecord> load_triplets_jsonl(const std::string& path) {
    std::vector<TripletRecord> out;
    for (const auto& j : read_lines(path)) {
        if (j.value("kind", "") != "triplet") continue;
        TripletRecord t;
        t.reference_id = j.at("ref").get<int>();
        t.modifier = j.at("modifier").get<std::vector<std::string>>();
        t.target_ids = j.at("targets").get<std::vector<int>>();
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace isa
