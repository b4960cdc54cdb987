#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "isa/dataset.hpp"
#include "isa/losses.hpp"
#include "isa/trainer.hpp"

namespace isa {

/// Fully resolved run configuration. Precedence: built-in defaults, then the
/// named profile, then the config file, then command-line overrides.
struct RunConfig {
    uint64_t seed = 0;
    std::string out_dir = "out";
    std::string data_dir;  // defaults to out_dir when empty
    std::string profile;

    // datagen
    DatagenParams data;

    // model
    int channels = 16;
    int tokens = 6;
    int word_dim = 16;
    int ff_refine = 256;
    int ff_cross = 512;
    bool scaled_attention = false;
    std::string mode = "asymmetric";

    // teacher
    int teacher_dim = 32;
    double function_word_bias = -0.55;
    double match_scale = 24.0;
    double map_gain = 0.4;

    // training
    double lr = 3e-4;
    int epochs = 20;
    int warmup_epochs = 5;
    int batch_size = 32;
    double weight_decay = 0.01;
    double noise_sigma = 0.05;
    bool flip_augment = true;
    double grad_clip = 0.0;
    double tau = 0.07;
    std::string lar_policy = "uniform";
    std::string loss_variant = "both";  // both | gcd-only | lar-only

    // eval
    bool baselines = false;
    std::string sweep;  // comma list of token lengths, empty disables
    int sweep_seeds = 3;

    // command specifics
    int image_id = -1;
    std::string image_file;  // refs.jsonl | gallery.jsonl (export-attention)

    std::string checkpoint_path() const;
    std::string index_path() const;
    std::string metrics_path() const;
    std::string resolved_data_dir() const { return data_dir.empty() ? out_dir : data_dir; }

    void apply_profile(const std::string& name);          // throws ConfigError
    void apply(const std::string& key, const std::string& value);
    void apply_all(const std::map<std::string, std::string>& kv);
    std::string echo() const;  // "key = value" lines, key-sorted

    DatagenParams datagen_params() const;
    ModelConfig model_config() const;
    TeacherConfig teacher_config() const;
    TrainConfig train_config() const;
    LossConfig loss_config() const;
    void validate() const;
};

/// "key = value" lines, '#' comments, blank lines ignored.
std::map<std::string, std::string> parse_config_file(const std::string& path);

/// defaults -> profile -> file keys -> cli keys. The profile may come from
/// either source; the cli wins.
RunConfig resolve_config(const std::string& config_file,
                         const std::map<std::string, std::string>& cli);

}  // namespace isa
