#include "isa/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace isa {

std::string RunConfig::checkpoint_path() const { return out_dir + "/model.isck"; }
std::string RunConfig::index_path() const { return out_dir + "/gallery.isae"; }
std::string RunConfig::metrics_path() const { return out_dir + "/metrics.txt"; }

void RunConfig::apply_profile(const std::string& name) {
    if (name.empty() || name == "default") {
        profile = "default";
        return;
    }
    if (name == "toy") {
        profile = "toy";
        data.n_train = 512;
        grad_clip = 5.0;
        tau = 0.0125;
        return;
    }
    throw ConfigError("unknown profile '" + name + "'");
}

namespace {

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "on") return true;
    if (v == "false" || v == "0" || v == "off") return false;
    throw ConfigError("config: bad boolean for " + key + ": '" + v + "'");
}

int parse_int(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        int r = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("config: bad integer for " + key + ": '" + v + "'");
    }
}

uint64_t parse_u64(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        unsigned long long r = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("config: bad integer for " + key + ": '" + v + "'");
    }
}

double parse_double(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("config: bad number for " + key + ": '" + v + "'");
    }
}

}  // namespace

void RunConfig::apply(const std::string& key, const std::string& value) {
    if (key == "seed") seed = parse_u64(value, key);
    else if (key == "out") out_dir = value;
    else if (key == "data_dir") data_dir = value;
    else if (key == "profile") apply_profile(value);
    else if (key == "n_concepts") data.n_concepts = parse_int(value, key);
    else if (key == "grid_h") data.grid_h = parse_int(value, key);
    else if (key == "grid_w") data.grid_w = parse_int(value, key);
    else if (key == "n_train") data.n_train = parse_int(value, key);
    else if (key == "n_gallery") data.n_gallery = parse_int(value, key);
    else if (key == "n_refs") data.n_refs = parse_int(value, key);
    else if (key == "n_queries") data.n_queries = parse_int(value, key);
    else if (key == "bg_prob") data.bg_prob = parse_double(value, key);
    else if (key == "dup_cap") data.dup_cap = parse_int(value, key);
    else if (key == "w_add") data.w_add = parse_double(value, key);
    else if (key == "w_replace") data.w_replace = parse_double(value, key);
    else if (key == "w_remove") data.w_remove = parse_double(value, key);
    else if (key == "channels") channels = parse_int(value, key);
    else if (key == "tokens") tokens = parse_int(value, key);
    else if (key == "word_dim") word_dim = parse_int(value, key);
    else if (key == "ff_refine") ff_refine = parse_int(value, key);
    else if (key == "ff_cross") ff_cross = parse_int(value, key);
    else if (key == "scaled_attention") scaled_attention = parse_bool(value, key);
    else if (key == "mode") mode = value;
    else if (key == "teacher_dim") teacher_dim = parse_int(value, key);
    else if (key == "function_word_bias") function_word_bias = parse_double(value, key);
    else if (key == "match_scale") match_scale = parse_double(value, key);
    else if (key == "map_gain") map_gain = parse_double(value, key);
    else if (key == "lr") lr = parse_double(value, key);
    else if (key == "epochs") epochs = parse_int(value, key);
    else if (key == "warmup_epochs") warmup_epochs = parse_int(value, key);
    else if (key == "batch_size") batch_size = parse_int(value, key);
    else if (key == "weight_decay") weight_decay = parse_double(value, key);
    else if (key == "noise_sigma") noise_sigma = parse_double(value, key);
    else if (key == "flip_augment") flip_augment = parse_bool(value, key);
    else if (key == "grad_clip") grad_clip = parse_double(value, key);
    else if (key == "tau") tau = parse_double(value, key);
    else if (key == "lar_policy") lar_policy = value;
    else if (key == "loss_variant") loss_variant = value;
    else if (key == "baselines") baselines = parse_bool(value, key);
    else if (key == "sweep") sweep = value;
    else if (key == "sweep_seeds") sweep_seeds = parse_int(value, key);
    else if (key == "image_id") image_id = parse_int(value, key);
    else if (key == "image_file") image_file = value;
    else throw ConfigError("config: unknown key '" + key + "'");
}

void RunConfig::apply_all(const std::map<std::string, std::string>& kv) {
    for (const auto& [k, v] : kv)
        if (k != "profile") apply(k, v);
}

std::string RunConfig::echo() const {
    std::map<std::string, std::string> kv;
    char buf[64];
    auto put_d = [&](const std::string& k, double v) {
        std::snprintf(buf, sizeof(buf), "%.10g", v);
        kv[k] = buf;
    };
    kv["seed"] = std::to_string(seed);
    kv["out"] = out_dir;
    kv["data_dir"] = resolved_data_dir();
    kv["profile"] = profile.empty() ? "default" : profile;
    kv["n_concepts"] = std::to_string(data.n_concepts);
    kv["grid_h"] = std::to_string(data.grid_h);
    kv["grid_w"] = std::to_string(data.grid_w);
    kv["n_train"] = std::to_string(data.n_train);
    kv["n_gallery"] = std::to_string(data.n_gallery);
    kv["n_refs"] = std::to_string(data.n_refs);
    kv["n_queries"] = std::to_string(data.n_queries);
    put_d("bg_prob", data.bg_prob);
    kv["dup_cap"] = std::to_string(data.dup_cap);
    put_d("w_add", data.w_add);
    put_d("w_replace", data.w_replace);
    put_d("w_remove", data.w_remove);
    kv["channels"] = std::to_string(channels);
    kv["tokens"] = std::to_string(tokens);
    kv["word_dim"] = std::to_string(word_dim);
    kv["ff_refine"] = std::to_string(ff_refine);
    kv["ff_cross"] = std::to_string(ff_cross);
    kv["scaled_attention"] = scaled_attention ? "true" : "false";
    kv["mode"] = mode;
    kv["teacher_dim"] = std::to_string(teacher_dim);
    put_d("function_word_bias", function_word_bias);
    put_d("match_scale", match_scale);
    put_d("map_gain", map_gain);
    put_d("lr", lr);
    kv["epochs"] = std::to_string(epochs);
    kv["warmup_epochs"] = std::to_string(warmup_epochs);
    kv["batch_size"] = std::to_string(batch_size);
    put_d("weight_decay", weight_decay);
    put_d("noise_sigma", noise_sigma);
    kv["flip_augment"] = flip_augment ? "true" : "false";
    put_d("grad_clip", grad_clip);
    put_d("tau", tau);
    kv["lar_policy"] = lar_policy;
    kv["loss_variant"] = loss_variant;
    kv["baselines"] = baselines ? "true" : "false";
    kv["sweep"] = sweep;
    kv["sweep_seeds"] = std::to_string(sweep_seeds);
    std::ostringstream out;
    for (const auto& [k, v] : kv) out << k << " = " << v << "\n";
    return out.str();
}

DatagenParams RunConfig::datagen_params() const {
    DatagenParams p = data;
    p.seed = seed;
    return p;
}

ModelConfig RunConfig::model_config() const {
    ModelConfig m;
    m.n_concepts = data.n_concepts;
    m.mode = mode_from_string(mode);
    m.light.in_channels = data.n_concepts + 1;
    m.light.channels = channels;
    m.tok.tokens = tokens;
    m.tok.channels = channels;
    m.tok.ff_refine = ff_refine;
    m.tok.ff_cross = ff_cross;
    m.tok.word_dim = word_dim;
    m.tok.scaled_attention = scaled_attention;
    return m;
}

TeacherConfig RunConfig::teacher_config() const {
    TeacherConfig t;
    t.word_dim = word_dim;
    t.feat_dim = teacher_dim;
    t.map_channels = channels;  // C_t defaults to C
    t.function_word_bias = function_word_bias;
    t.match_scale = match_scale;
    t.map_gain = map_gain;
    return t;
}

TrainConfig RunConfig::train_config() const {
    TrainConfig t;
    t.lr = lr;
    t.epochs = epochs;
    t.warmup_epochs = warmup_epochs;
    t.batch_size = batch_size;
    t.weight_decay = weight_decay;
    t.seed = seed;
    t.noise_sigma = noise_sigma;
    t.flip_augment = flip_augment;
    t.grad_clip = grad_clip;
    t.loss = loss_config();
    return t;
}

LossConfig RunConfig::loss_config() const {
    LossConfig l;
    l.tau = tau;
    l.policy = negative_policy_from_string(lar_policy);
    if (loss_variant == "both") {
        l.gcd_weight = 1.0;
        l.lar_weight = 1.0;
    } else if (loss_variant == "gcd-only") {
        l.gcd_weight = 1.0;
        l.lar_weight = 0.0;
    } else if (loss_variant == "lar-only") {
        l.gcd_weight = 0.0;
        l.lar_weight = 1.0;
    } else {
        throw ConfigError("unknown loss variant '" + loss_variant + "'");
    }
    return l;
}

void RunConfig::validate() const {
    data.validate();
    loss_config();
    train_config().validate();
    mode_from_string(mode);
    if (tokens < 1) throw ConfigError("tokens must be >= 1");
    if (channels < 1 || word_dim < 1) throw ConfigError("bad model dimensions");
    if (sweep_seeds < 1) throw ConfigError("sweep_seeds must be >= 1");
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config file: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto ltrim = line.find_first_not_of(" \t\r\n");
        if (ltrim == std::string::npos) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: missing '=' at " + path + ":" + std::to_string(lineno));
        auto trim = [](std::string s) {
            size_t a = s.find_first_not_of(" \t\r\n");
            size_t b = s.find_last_not_of(" \t\r\n");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("config: empty key at " + path + ":" + std::to_string(lineno));
        kv[key] = value;
    }
    return kv;
}

RunConfig resolve_config(const std::string& config_file,
                         const std::map<std::string, std::string>& cli) {
    std::map<std::string, std::string> file_kv;
    if (!config_file.empty()) file_kv = parse_config_file(config_file);

    RunConfig cfg;
    std::string profile;
    if (auto it = file_kv.find("profile"); it != file_kv.end()) profile = it->second;
    if (auto it = cli.find("profile"); it != cli.end()) profile = it->second;
    if (!profile.empty()) cfg.apply_profile(profile);
    cfg.apply_all(file_kv);
    cfg.apply_all(cli);
    return cfg;
}

}  // namespace isa
