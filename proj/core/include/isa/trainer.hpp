#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "isa/losses.hpp"

namespace isa {

struct TrainConfig {
    double lr = 3e-4;
    int epochs = 20;
    int warmup_epochs = 5;
    int batch_size = 32;
    double weight_decay = 0.01;
    uint64_t seed = 0;
    double noise_sigma = 0.05;  // additive jitter on the query-branch input
    bool flip_augment = true;   // random horizontal grid flip
    double grad_clip = 0.0;     // global-norm clip, 0 disables
    LossConfig loss;

    void validate() const;  // throws ConfigError
};

/// Linear warmup to lr over warmup_steps, then cosine decay reaching exactly
/// zero at the final step (total_steps - 1).
double lr_at(int step, int total_steps, int warmup_steps, double lr);

/// Decoupled-weight-decay Adam, beta = (0.9, 0.999), eps = 1e-8.
class AdamW {
public:
    AdamW(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    /// Throws Error on non-finite gradients.
    void step(ParamSet& params, const Gradients& grads, double lr, double weight_decay);

    int steps_taken() const { return t_; }

private:
    double beta1_, beta2_, eps_;
    int t_ = 0;
    ParamSet m_, v_;
};

struct EpochStats {
    int epoch = 0;
    double gcd = 0.0;
    double lar = 0.0;
    double total = 0.0;
    double lr = 0.0;
};

struct Checkpoint {
    static constexpr uint16_t kFormatVersion = 1;
    std::string config_echo;
    uint64_t seed = 0;
    ModelConfig model;
    TeacherConfig teacher;
    ParamSet params;
    std::vector<EpochStats> history;
    uint64_t teacher_fingerprint = 0;
    bool aborted = false;
    std::string abort_reason;
};

/// Optimizes the query-side parameters against the frozen teacher.
/// Deterministic in (train set, configs, seed). On divergence the checkpoint
/// of the last completed epoch is returned with aborted = true.
Checkpoint train(const std::vector<SyntheticImage>& train_images, const TeacherBundle& teacher,
                 const ModelConfig& model_cfg, const TrainConfig& cfg,
                 const std::string& config_echo);

/// Bit-exact binary round trip.
void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

void save_loss_table(const std::vector<EpochStats>& history, const std::string& path,
                     const std::string& config_echo);

/// Horizontal flip and per-cell jitter on a query-branch input grid.
Array2 augment_input(const Array2& input, int h, int w, double sigma, bool allow_flip, Rng& rng);

}  // namespace isa
