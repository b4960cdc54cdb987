#include "isa/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "isa/rng.hpp"

namespace isa {

void TrainConfig::validate() const {
    if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
    if (epochs > 0 && warmup_epochs >= epochs)
        throw ConfigError("train: warmup_epochs must be < epochs");
    if (batch_size < 2) throw ConfigError("train: batch_size must be >= 2");
    if (lr <= 0.0) throw ConfigError("train: lr must be positive");
    if (weight_decay < 0.0) throw ConfigError("train: weight_decay must be >= 0");
    if (noise_sigma < 0.0) throw ConfigError("train: noise_sigma must be >= 0");
    loss.validate();
}

double lr_at(int step, int total_steps, int warmup_steps, double lr) {
    if (total_steps <= 0) return 0.0;
    step = std::clamp(step, 0, total_steps - 1);
    if (warmup_steps > 0 && step < warmup_steps)
        return lr * static_cast<double>(step) / warmup_steps;
    int decay_span = std::max(1, total_steps - 1 - warmup_steps);
    double progress = static_cast<double>(step - warmup_steps) / decay_span;
    progress = std::clamp(progress, 0.0, 1.0);
    return lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

AdamW::AdamW(double beta1, double beta2, double eps) : beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamW::step(ParamSet& params, const Gradients& grads, double lr, double weight_decay) {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, t_);
    double bc2 = 1.0 - std::pow(beta2_, t_);
    for (auto& [name, p] : params) {
        auto git = grads.find(name);
        if (git == grads.end()) throw Error("optimizer: missing gradient for " + name);
        const Array2& g = git->second;
        if (!g.same_shape(p)) throw DimensionError("optimizer: gradient shape mismatch for " + name);
        if (!g.all_finite()) throw Error("optimizer: non-finite gradient in " + name);
        Array2& m = m_.try_emplace(name, Array2::zeros(p.rows, p.cols)).first->second;
        Array2& v = v_.try_emplace(name, Array2::zeros(p.rows, p.cols)).first->second;
        for (size_t i = 0; i < p.data.size(); ++i) {
            m.data[i] = beta1_ * m.data[i] + (1.0 - beta1_) * g.data[i];
            v.data[i] = beta2_ * v.data[i] + (1.0 - beta2_) * g.data[i] * g.data[i];
            double mhat = m.data[i] / bc1;
            double vhat = v.data[i] / bc2;
            p.data[i] -= lr * (mhat / (std::sqrt(vhat) + eps_) + weight_decay * p.data[i]);
        }
    }
}

Array2 augment_input(const Array2& input, int h, int w, double sigma, bool allow_flip, Rng& rng) {
    Array2 out = input;
    bool flip = allow_flip && rng.uniform() < 0.5;
    if (flip) {
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c)
                for (int k = 0; k < input.cols; ++k)
                    out.at(r * w + c, k) = input.at(r * w + (w - 1 - c), k);
    }
    if (sigma > 0.0)
        for (double& v : out.data) v += sigma * rng.normal();
    return out;
}

namespace {

double clip_gradients(Gradients& grads, double max_norm) {
    double sq = 0.0;
    for (const auto& [name, g] : grads)
        for (double v : g.data) sq += v * v;
    double norm = std::sqrt(sq);
    if (max_norm <= 0.0 || norm <= max_norm) return norm;
    double s = max_norm / norm;
    for (auto& [name, g] : grads)
        for (double& v : g.data) v *= s;
    return norm;
}

}  // namespace

Checkpoint train(const std::vector<SyntheticImage>& train_images, const TeacherBundle& teacher,
                 const ModelConfig& model_cfg, const TrainConfig& cfg,
                 const std::string& config_echo) {
    cfg.validate();
    if (train_images.empty()) throw ConfigError("train: empty training set");

    Checkpoint ck;
    ck.config_echo = config_echo;
    ck.seed = cfg.seed;
    ck.model = model_cfg;
    ck.teacher = teacher.config();
    ck.teacher_fingerprint = teacher.fingerprint();
    ck.params = init_model_params(model_cfg, cfg.seed);
    if (cfg.epochs == 0) return ck;

    Rng data_rng = Rng::stream(cfg.seed, "data.order");
    Rng aug_rng = Rng::stream(cfg.seed, "augment");
    Rng neg_rng = Rng::stream(cfg.seed, "negatives");

    int n = static_cast<int>(train_images.size());
    int batches = n / cfg.batch_size;
    if (batches == 0)
        throw ConfigError("train: fewer training images than one batch");
    int total_steps = cfg.epochs * batches;
    int warmup_steps = cfg.warmup_epochs * batches;

    AdamW opt;
    std::vector<int> order(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;

    ParamSet last_good = ck.params;
    int step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        data_rng.shuffle(order);
        double sum_gcd = 0.0, sum_lar = 0.0, sum_total = 0.0, sum_lr = 0.0;
        for (int b = 0; b < batches; ++b) {
            std::vector<const SyntheticImage*> batch;
            std::vector<Array2> inputs;
            batch.reserve(static_cast<size_t>(cfg.batch_size));
            for (int k = 0; k < cfg.batch_size; ++k) {
                const SyntheticImage& img =
                    train_images[static_cast<size_t>(order[static_cast<size_t>(b * cfg.batch_size + k)])];
                batch.push_back(&img);
                inputs.push_back(augment_input(query_input(img, teacher, model_cfg), img.h, img.w,
                                               cfg.noise_sigma, cfg.flip_augment, aug_rng));
            }
            TotalLossResult loss;
            try {
                loss = total_loss(batch, ck.params, model_cfg, teacher, cfg.loss, neg_rng, &inputs);
            } catch (const Error& e) {
                ck.params = last_good;
                ck.aborted = true;
                ck.abort_reason = e.what();
                return ck;
            }
            if (!std::isfinite(loss.total)) {
                ck.params = last_good;
                ck.aborted = true;
                ck.abort_reason = "non-finite loss at step " + std::to_string(step);
                return ck;
            }
            clip_gradients(loss.grads, cfg.grad_clip);
            double lr = lr_at(step, total_steps, warmup_steps, cfg.lr);
            try {
                opt.step(ck.params, loss.grads, lr, cfg.weight_decay);
            } catch (const Error& e) {
                ck.params = last_good;
                ck.aborted = true;
                ck.abort_reason = e.what();
                return ck;
            }
            sum_gcd += loss.gcd;
            sum_lar += loss.lar;
            sum_total += loss.total;
            sum_lr += lr;
            ++step;
        }
        EpochStats s;
        s.epoch = epoch;
        s.gcd = sum_gcd / batches;
        s.lar = sum_lar / batches;
        s.total = sum_total / batches;
        s.lr = sum_lr / batches;
        ck.history.push_back(s);
        last_good = ck.params;
    }
    return ck;
}

// ---- checkpoint format ----
//
// magic "ISCK", u16 version, then little-endian fields in fixed order.
// Doubles are stored as raw IEEE-754 bytes so the round trip is bit exact.

namespace {

void put_u16(std::string& out, uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}
void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_f64(std::string& out, double d) {
    uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put_u64(out, bits);
}
void put_str(std::string& out, const std::string& s) {
    put_u32(out, static_cast<uint32_t>(s.size()));
    out += s;
}
void put_array(std::string& out, const Array2& a) {
    put_u32(out, static_cast<uint32_t>(a.rows));
    put_u32(out, static_cast<uint32_t>(a.cols));
    for (double d : a.data) put_f64(out, d);
}

struct Reader {
    const std::string& buf;
    size_t pos = 0;
    explicit Reader(const std::string& b) : buf(b) {}
    void need(size_t n) const {
        if (pos + n > buf.size()) throw FormatError("checkpoint: truncated file");
    }
    uint16_t u16() {
        need(2);
        uint16_t v = static_cast<uint8_t>(buf[pos]) | (static_cast<uint16_t>(static_cast<uint8_t>(buf[pos + 1])) << 8);
        pos += 2;
        return v;
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(buf[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(buf[pos + i])) << (8 * i);
        pos += 8;
        return v;
    }
    double f64() {
        uint64_t bits = u64();
        double d;
        std::memcpy(&d, &bits, 8);
        return d;
    }
    std::string str() {
        uint32_t n = u32();
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
    Array2 array() {
        uint32_t r = u32(), c = u32();
        Array2 a(static_cast<int>(r), static_cast<int>(c));
        for (auto& d : a.data) d = f64();
        return a;
    }
};

}  // namespace

void save_checkpoint(const Checkpoint& c, const std::string& path) {
    std::string out;
    out += "ISCK";
    put_u16(out, Checkpoint::kFormatVersion);
    put_str(out, c.config_echo);
    put_u64(out, c.seed);
    put_u64(out, c.teacher_fingerprint);
    put_u32(out, static_cast<uint32_t>(c.model.n_concepts));
    put_u32(out, c.model.mode == Mode::asymmetric ? 0u : 1u);
    put_u32(out, static_cast<uint32_t>(c.model.light.in_channels));
    put_u32(out, static_cast<uint32_t>(c.model.light.channels));
    put_u32(out, static_cast<uint32_t>(c.model.tok.tokens));
    put_u32(out, static_cast<uint32_t>(c.model.tok.channels));
    put_u32(out, static_cast<uint32_t>(c.model.tok.ff_refine));
    put_u32(out, static_cast<uint32_t>(c.model.tok.ff_cross));
    put_u32(out, static_cast<uint32_t>(c.model.tok.word_dim));
    put_u32(out, c.model.tok.scaled_attention ? 1u : 0u);
    put_u32(out, static_cast<uint32_t>(c.teacher.word_dim));
    put_u32(out, static_cast<uint32_t>(c.teacher.feat_dim));
    put_u32(out, static_cast<uint32_t>(c.teacher.map_channels));
    put_f64(out, c.teacher.function_word_bias);
    put_f64(out, c.teacher.match_scale);
    put_f64(out, c.teacher.map_gain);
    put_u32(out, static_cast<uint32_t>(c.params.size()));
    for (const auto& [name, a] : c.params) {
        put_str(out, name);
        put_array(out, a);
    }
    put_u32(out, static_cast<uint32_t>(c.history.size()));
    for (const auto& h : c.history) {
        put_u32(out, static_cast<uint32_t>(h.epoch));
        put_f64(out, h.gcd);
        put_f64(out, h.lar);
        put_f64(out, h.total);
        put_f64(out, h.lr);
    }
    out.push_back(c.aborted ? 1 : 0);
    put_str(out, c.abort_reason);

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for write: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for read: " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (buf.size() < 6 || buf.compare(0, 4, "ISCK") != 0)
        throw FormatError("checkpoint: bad magic in " + path);
    Reader r(buf);
    r.pos = 4;
    uint16_t version = r.u16();
    if (version != Checkpoint::kFormatVersion)
        throw FormatError("checkpoint: unsupported version " + std::to_string(version));
    Checkpoint c;
    c.config_echo = r.str();
    c.seed = r.u64();
    c.teacher_fingerprint = r.u64();
    c.model.n_concepts = static_cast<int>(r.u32());
    c.model.mode = r.u32() == 0 ? Mode::asymmetric : Mode::symmetric;
    c.model.light.in_channels = static_cast<int>(r.u32());
    c.model.light.channels = static_cast<int>(r.u32());
    c.model.tok.tokens = static_cast<int>(r.u32());
    c.model.tok.channels = static_cast<int>(r.u32());
    c.model.tok.ff_refine = static_cast<int>(r.u32());
    c.model.tok.ff_cross = static_cast<int>(r.u32());
    c.model.tok.word_dim = static_cast<int>(r.u32());
    c.model.tok.scaled_attention = r.u32() != 0;
    c.teacher.word_dim = static_cast<int>(r.u32());
    c.teacher.feat_dim = static_cast<int>(r.u32());
    c.teacher.map_channels = static_cast<int>(r.u32());
    c.teacher.function_word_bias = r.f64();
    c.teacher.match_scale = r.f64();
    c.teacher.map_gain = r.f64();
    uint32_t n_params = r.u32();
    for (uint32_t i = 0; i < n_params; ++i) {
        std::string name = r.str();
        c.params[name] = r.array();
    }
    uint32_t n_hist = r.u32();
    for (uint32_t i = 0; i < n_hist; ++i) {
        EpochStats h;
        h.epoch = static_cast<int>(r.u32());
        h.gcd = r.f64();
        h.lar = r.f64();
        h.total = r.f64();
        h.lr = r.f64();
        c.history.push_back(h);
    }
    r.need(1);
    c.aborted = buf[r.pos++] != 0;
    c.abort_reason = r.str();
    return c;
}

void save_loss_table(const std::vector<EpochStats>& history, const std::string& path,
                     const std::string& config_echo) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for write: " + path);
    std::istringstream echo(config_echo);
    std::string line;
    while (std::getline(echo, line)) f << "# " << line << "\n";
    f << "epoch,gcd,lar,total,lr\n";
    char buf[160];
    for (const auto& h : history) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g\n", h.epoch, h.gcd, h.lar,
                      h.total, h.lr);
        f << buf;
    }
    if (!f) throw IoError("write failed: " + path);
}

}  // namespace isa
