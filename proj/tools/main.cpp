// Command-line front end: gen-data, train, embed-gallery, eval, gradcheck,
// export-attention. Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <CLI11.hpp>
#include <iostream>
#include <map>
#include <string>

#include "isa/commands.hpp"

namespace {

struct CliState {
    std::string config_file;
    std::map<std::string, std::string> overrides;
};

// Registers an option that lands in the override map under `key`.
void add_kv(CLI::App* cmd, CliState& state, const std::string& flag, const std::string& key,
            const std::string& help) {
    cmd->add_option_function<std::string>(
        flag, [&state, key](const std::string& v) { state.overrides[key] = v; }, help);
}

void add_common(CLI::App* cmd, CliState& state) {
    cmd->add_option("--config", state.config_file, "key = value configuration file");
    add_kv(cmd, state, "--seed", "seed", "run seed (all randomness derives from it)");
    add_kv(cmd, state, "--out", "out", "output directory");
    add_kv(cmd, state, "--data-dir", "data_dir", "directory holding dataset files");
    add_kv(cmd, state, "--profile", "profile", "named parameter bundle (default, toy)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"image-to-sentence asymmetric composed retrieval"};
    app.require_subcommand(1);
    CliState state;

    CLI::App* gen = app.add_subcommand("gen-data", "generate the synthetic benchmark");
    add_common(gen, state);
    add_kv(gen, state, "--n-train", "n_train", "training image count");
    add_kv(gen, state, "--n-gallery", "n_gallery", "gallery image count");
    add_kv(gen, state, "--n-queries", "n_queries", "evaluation triplet count");

    CLI::App* tr = app.add_subcommand("train", "train the query-side model");
    add_common(tr, state);
    add_kv(tr, state, "--mode", "mode", "asymmetric | symmetric");
    add_kv(tr, state, "--loss", "loss_variant", "both | gcd-only | lar-only");
    add_kv(tr, state, "--epochs", "epochs", "training epochs");
    add_kv(tr, state, "--tokens", "tokens", "sentence token count L");

    CLI::App* emb = app.add_subcommand("embed-gallery", "embed gallery images offline");
    add_common(emb, state);

    CLI::App* ev = app.add_subcommand("eval", "run retrieval evaluation");
    add_common(ev, state);
    bool baselines = false;
    ev->add_flag("--baselines", baselines, "also score image-only / text-only / image+text");
    add_kv(ev, state, "--token-length-sweep", "sweep", "comma list of L values, e.g. 1,2,4,6,8,10");
    add_kv(ev, state, "--sweep-seeds", "sweep_seeds", "seeds per sweep point");

    CLI::App* gc = app.add_subcommand("gradcheck", "finite-difference check of all loss gradients");
    add_common(gc, state);
    bool inject = false;
    gc->add_flag("--inject-error", inject, "corrupt one analytic gradient (negative control)");

    CLI::App* ex = app.add_subcommand("export-attention", "write spatial attention maps as text");
    add_common(ex, state);
    add_kv(ex, state, "--image-id", "image_id", "image id to export");
    add_kv(ex, state, "--image-file", "image_file", "refs.jsonl (default) or gallery.jsonl");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (ev->parsed() && baselines) state.overrides["baselines"] = "true";
        isa::RunConfig cfg = isa::resolve_config(state.config_file, state.overrides);
        if (gen->parsed()) return isa::cmd_gen_data(cfg);
        if (tr->parsed()) return isa::cmd_train(cfg);
        if (emb->parsed()) return isa::cmd_embed_gallery(cfg);
        if (ev->parsed()) return isa::cmd_eval(cfg);
        if (gc->parsed()) return isa::cmd_gradcheck(cfg, inject);
        if (ex->parsed()) return isa::cmd_export_attention(cfg);
    } catch (const isa::ConfigError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const isa::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
