#include "isa/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "isa/gradcheck.hpp"
#include "isa/rng.hpp"

namespace isa {

namespace fs = std::filesystem;

namespace {

void ensure_out_dir(const RunConfig& cfg) {
    if (!cfg.out_dir.empty()) fs::create_directories(cfg.out_dir);
}

TeacherBundle make_teacher(const RunConfig& cfg) {
    return TeacherBundle::create(cfg.data.n_concepts, cfg.teacher_config(), cfg.seed);
}

std::vector<RankedList> search_all(const GalleryIndex& index,
                                   const std::vector<Array2>& queries, int k,
                                   uint64_t fingerprint) {
    std::vector<RankedList> out;
    out.reserve(queries.size());
    for (const auto& q : queries) out.push_back(search(index, q, k, fingerprint));
    return out;
}

int max_recall_k() {
    int k = 0;
    for (int v : recall_ks()) k = std::max(k, v);
    for (int v : map_ks()) k = std::max(k, v);
    return k;
}

const SyntheticImage& image_by_id(const std::vector<SyntheticImage>& pool, int id,
                                  const std::string& what) {
    for (const auto& img : pool)
        if (img.id == id) return img;
    throw LookupError(what + ": no image with id " + std::to_string(id));
}

}  // namespace

int cmd_gen_data(const RunConfig& cfg) {
    cfg.validate();
    ensure_out_dir(cfg);
    Dataset ds = gen_dataset(cfg.datagen_params());
    const std::string echo = cfg.echo();
    const std::string dir = cfg.out_dir;
    save_images_jsonl(dir + "/train.jsonl", ds.train, echo);
    save_images_jsonl(dir + "/gallery.jsonl", ds.gallery, echo);
    save_images_jsonl(dir + "/refs.jsonl", ds.refs, echo);
    save_triplets_jsonl(dir + "/queries.jsonl", ds.queries, echo);
    std::cout << "gen-data: " << ds.train.size() << " train, " << ds.gallery.size()
              << " gallery, " << ds.refs.size() << " refs, " << ds.queries.size()
              << " queries -> " << dir << "\n";
    return 0;
}

int cmd_train(const RunConfig& cfg) {
    cfg.validate();
    ensure_out_dir(cfg);
    auto train_images = load_images_jsonl(cfg.resolved_data_dir() + "/train.jsonl");
    TeacherBundle teacher = make_teacher(cfg);
    Checkpoint ck = train(train_images, teacher, cfg.model_config(), cfg.train_config(), cfg.echo());
    save_checkpoint(ck, cfg.checkpoint_path());
    save_loss_table(ck.history, cfg.out_dir + "/loss_history.csv", cfg.echo());
    if (ck.aborted) {
        std::cerr << "train: aborted (" << ck.abort_reason << "); last good checkpoint written\n";
        return 1;
    }
    double first = ck.history.empty() ? 0.0 : ck.history.front().total;
    double last = ck.history.empty() ? 0.0 : ck.history.back().total;
    std::cout << "train: " << ck.history.size() << " epochs, loss " << first << " -> " << last
              << ", checkpoint " << cfg.checkpoint_path() << "\n";
    return 0;
}

int cmd_embed_gallery(const RunConfig& cfg) {
    cfg.validate();
    ensure_out_dir(cfg);
    auto gallery = load_images_jsonl(cfg.resolved_data_dir() + "/gallery.jsonl");
    TeacherBundle teacher = make_teacher(cfg);
    GalleryIndex index = GalleryIndex::build(gallery, teacher, cfg.seed);
    save_index(index, cfg.index_path(), cfg.echo());
    std::cout << "embed-gallery: " << index.size() << " vectors, dim " << index.dim << " -> "
              << cfg.index_path() << "\n";
    return 0;
}

namespace {

struct LoadedEval {
    Checkpoint ck;
    TeacherBundle teacher;
    GalleryIndex index;
    std::vector<SyntheticImage> refs;
    std::vector<TripletRecord> queries;
};

LoadedEval load_eval_inputs(const RunConfig& cfg) {
    Checkpoint ck = load_checkpoint(cfg.checkpoint_path());
    TeacherBundle teacher = TeacherBundle::create(ck.model.n_concepts, ck.teacher, ck.seed);
    if (teacher.fingerprint() != ck.teacher_fingerprint)
        throw Error("eval: teacher reconstruction does not match checkpoint fingerprint");
    GalleryIndex index = load_index(cfg.index_path());
    auto refs = load_images_jsonl(cfg.resolved_data_dir() + "/refs.jsonl");
    auto queries = load_triplets_jsonl(cfg.resolved_data_dir() + "/queries.jsonl");
    return {std::move(ck), std::move(teacher), std::move(index), std::move(refs),
            std::move(queries)};
}

void eval_model_and_baselines(const Checkpoint& ck, const TeacherBundle& teacher,
                              const GalleryIndex& index,
                              const std::vector<SyntheticImage>& refs,
                              const std::vector<TripletRecord>& queries, bool with_baselines,
                              std::map<std::string, double>& metrics) {
    int k = max_recall_k();
    uint64_t fp = teacher.fingerprint();
    std::vector<Array2> model_q, img_q, txt_q, it_q;
    for (const auto& t : queries) {
        const SyntheticImage& ref = image_by_id(refs, t.reference_id, "eval");
        model_q.push_back(compose_and_encode(ref, t.modifier, ck.params, ck.model, teacher));
        if (with_baselines) {
            img_q.push_back(baseline_image_only(ref, teacher));
            txt_q.push_back(baseline_text_only(t.modifier, teacher));
            it_q.push_back(baseline_image_text(ref, t.modifier, teacher));
        }
    }
    add_ranking_metrics(metrics, "metric.", search_all(index, model_q, k, fp), queries);
    if (with_baselines) {
        add_ranking_metrics(metrics, "baseline.image_only.", search_all(index, img_q, k, fp), queries);
        add_ranking_metrics(metrics, "baseline.text_only.", search_all(index, txt_q, k, fp), queries);
        add_ranking_metrics(metrics, "baseline.image_text.", search_all(index, it_q, k, fp), queries);
    }
    metrics["metric.n_queries"] = static_cast<double>(queries.size());
    metrics["metric.gallery_size"] = static_cast<double>(index.size());
}

std::vector<int> parse_sweep_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        try {
            out.push_back(std::stoi(tok));
        } catch (const std::exception&) {
            throw ConfigError("bad token length list '" + s + "'");
        }
    }
    if (out.empty()) throw ConfigError("empty token length list");
    return out;
}

}  // namespace

PipelineResult run_pipeline(const RunConfig& cfg) {
    cfg.validate();
    Dataset ds = gen_dataset(cfg.datagen_params());
    TeacherBundle teacher = make_teacher(cfg);
    Checkpoint ck = train(ds.train, teacher, cfg.model_config(), cfg.train_config(), cfg.echo());
    if (ck.aborted) throw Error("pipeline: training aborted: " + ck.abort_reason);
    GalleryIndex index = GalleryIndex::build(ds.gallery, teacher, cfg.seed);
    PipelineResult res;
    eval_model_and_baselines(ck, teacher, index, ds.refs, ds.queries, /*with_baselines=*/true,
                             res.metrics);
    res.checkpoint = std::move(ck);
    return res;
}

int cmd_eval(const RunConfig& cfg) {
    cfg.validate();
    ensure_out_dir(cfg);
    std::map<std::string, double> metrics;

    if (!cfg.sweep.empty()) {
        // Fig. 3 style sweep: full pipeline per (token length, seed),
        // mean and standard deviation across seeds.
        auto lengths = parse_sweep_list(cfg.sweep);
        for (int length : lengths) {
            std::vector<double> avg_recalls, r1s;
            for (int s = 0; s < cfg.sweep_seeds; ++s) {
                RunConfig sub = cfg;
                sub.sweep.clear();
                sub.tokens = length;
                sub.seed = cfg.seed + static_cast<uint64_t>(s);
                PipelineResult r = run_pipeline(sub);
                avg_recalls.push_back(r.metrics.at("metric.avg_recall_1_5_10"));
                r1s.push_back(r.metrics.at("metric.recall_at_1"));
            }
            auto mean_std = [](const std::vector<double>& xs) {
                double m = 0.0;
                for (double x : xs) m += x;
                m /= static_cast<double>(xs.size());
                double v = 0.0;
                for (double x : xs) v += (x - m) * (x - m);
                return std::make_pair(m, std::sqrt(v / static_cast<double>(xs.size())));
            };
            auto [am, as] = mean_std(avg_recalls);
            auto [rm, rs] = mean_std(r1s);
            std::string prefix = "sweep.L" + std::to_string(length) + ".";
            metrics[prefix + "avg_recall_1_5_10.mean"] = am;
            metrics[prefix + "avg_recall_1_5_10.std"] = as;
            metrics[prefix + "recall_at_1.mean"] = rm;
            metrics[prefix + "recall_at_1.std"] = rs;
        }
        metrics["sweep.n_seeds"] = cfg.sweep_seeds;
    } else {
        LoadedEval in = load_eval_inputs(cfg);
        eval_model_and_baselines(in.ck, in.teacher, in.index, in.refs, in.queries,
                                 cfg.baselines, metrics);
    }

    write_metrics_doc(metrics, cfg.metrics_path(), cfg.echo());
    std::cout << "eval: " << metrics.size() << " metrics -> " << cfg.metrics_path() << "\n";
    if (metrics.count("metric.recall_at_1")) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.4f", metrics["metric.recall_at_1"]);
        std::cout << "eval: recall@1 = " << buf << "\n";
    }
    return 0;
}

GradCheckSummary run_loss_gradchecks(uint64_t seed, bool inject_error) {
    // small shapes: 8x8 grid, 8 channels, L=6, word_dim 16, batch 4
    RunConfig cfg;
    cfg.seed = seed;
    cfg.channels = 8;
    cfg.word_dim = 16;
    cfg.teacher_dim = 16;
    cfg.tokens = 6;
    cfg.data.n_concepts = 6;
    cfg.data.grid_h = 8;
    cfg.data.grid_w = 8;

    TeacherBundle teacher = make_teacher(cfg);
    ModelConfig model_cfg = cfg.model_config();
    ParamSet params = init_model_params(model_cfg, seed);

    Rng img_rng = Rng::stream(seed, "gradcheck.images");
    DatagenParams dp = cfg.datagen_params();
    std::vector<SyntheticImage> images;
    for (int i = 0; i < 4; ++i) {
        int k = img_rng.uniform_int(1, 4);
        std::vector<int> concepts;
        for (int c = 0; c < dp.n_concepts && static_cast<int>(concepts.size()) < k; ++c)
            if (img_rng.uniform() < 0.5 || dp.n_concepts - c <= k - static_cast<int>(concepts.size()))
                concepts.push_back(c);
        images.push_back(random_image(i, concepts, dp, img_rng));
    }
    std::vector<const SyntheticImage*> batch;
    for (const auto& img : images) batch.push_back(&img);

    GradCheckSummary summary;
    std::ostringstream report;
    summary.pass = true;
    struct Variant {
        const char* name;
        double gcd_w, lar_w;
    };
    for (const Variant& var : {Variant{"gcd", 1.0, 0.0}, Variant{"lar", 0.0, 1.0},
                               Variant{"total", 1.0, 1.0}}) {
        LossConfig loss_cfg;
        loss_cfg.gcd_weight = var.gcd_w;
        loss_cfg.lar_weight = var.lar_w;
        bool first_call = true;
        LossFn fn = [&](const ParamSet& p) {
            Rng neg_rng = Rng::stream(seed, "gradcheck.neg");  // frozen per evaluation
            TotalLossResult r = total_loss(batch, p, model_cfg, teacher, loss_cfg, neg_rng);
            if (inject_error && first_call) {
                first_call = false;
                if (!r.grads.empty()) r.grads.begin()->second.data[0] += 0.5;
            }
            return LossEval{r.total, r.grads};
        };
        GradCheckReport rep = grad_check(fn, params, 1e-5);
        report << "loss " << var.name << ": max relative error " << rep.max_rel_error
               << " (worst parameter " << rep.worst_param << ")\n";
        for (const auto& e : rep.per_param)
            report << "  " << e.param << " worst coord " << e.index << ": analytic " << e.analytic
                   << " numeric " << e.numeric << " rel " << e.rel_error << "\n";
        summary.max_rel_error = std::max(summary.max_rel_error, rep.max_rel_error);
        if (rep.max_rel_error > 1e-3) summary.pass = false;
    }
    summary.report_text = report.str();
    return summary;
}

int cmd_gradcheck(const RunConfig& cfg, bool inject_error) {
    GradCheckSummary s = run_loss_gradchecks(cfg.seed, inject_error);
    std::cout << s.report_text;
    std::cout << "gradcheck: max relative error " << s.max_rel_error << " -> "
              << (s.pass ? "ok" : "FAIL") << "\n";
    return s.pass ? 0 : 1;
}

int cmd_export_attention(const RunConfig& cfg) {
    ensure_out_dir(cfg);
    if (cfg.image_id < 0) throw ConfigError("export-attention: --image-id is required");
    Checkpoint ck = load_checkpoint(cfg.checkpoint_path());
    TeacherBundle teacher = TeacherBundle::create(ck.model.n_concepts, ck.teacher, ck.seed);
    std::string file = cfg.image_file.empty() ? "refs.jsonl" : cfg.image_file;
    auto pool = load_images_jsonl(cfg.resolved_data_dir() + "/" + file);
    const SyntheticImage& img = image_by_id(pool, cfg.image_id, "export-attention");

    TokenLearnerOutput out = run_query_model(img, ck.params, ck.model, teacher);
    Array2 rows = attention_rows(out.attention);  // L x HW

    std::string path = cfg.out_dir + "/attention_" + std::to_string(cfg.image_id) + ".txt";
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for write: " + path);
    std::istringstream echo(cfg.echo());
    std::string line;
    while (std::getline(echo, line)) f << "# " << line << "\n";
    f << "# rows = tokens (" << rows.rows << "), cols = pixels (" << img.h << "x" << img.w
      << ")\n";
    char buf[48];
    for (int i = 0; i < rows.rows; ++i) {
        for (int j = 0; j < rows.cols; ++j) {
            std::snprintf(buf, sizeof(buf), "%.10g", rows.at(i, j));
            f << (j ? " " : "") << buf;
        }
        f << "\n";
    }
    if (!f) throw IoError("write failed: " + path);
    std::cout << "export-attention: " << rows.rows << " x " << rows.cols << " -> " << path << "\n";
    return 0;
}

}  // namespace isa
