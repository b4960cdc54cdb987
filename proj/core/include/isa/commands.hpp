#pragma once

#include <map>
#include <string>

#include "isa/config.hpp"
#include "isa/retrieval.hpp"

namespace isa {

/// Commands print a short summary to stdout and return a process exit code
/// (0 success). Configuration problems throw ConfigError, runtime failures
/// other isa::Error subclasses; the CLI maps those to exit codes 2 and 1.

int cmd_gen_data(const RunConfig& cfg);
int cmd_train(const RunConfig& cfg);
int cmd_embed_gallery(const RunConfig& cfg);
int cmd_eval(const RunConfig& cfg);
int cmd_gradcheck(const RunConfig& cfg, bool inject_error = false);
int cmd_export_attention(const RunConfig& cfg);

/// gen -> train -> embed -> eval in memory, no files. Used by the
/// token-length sweep and by the acceptance suite.
struct PipelineResult {
    std::map<std::string, double> metrics;  // model + baseline ranking metrics
    Checkpoint checkpoint;
};
PipelineResult run_pipeline(const RunConfig& cfg);

/// Gradient checks of the training losses through the full query branch at
/// small shapes; returns max relative error across the three loss variants.
struct GradCheckSummary {
    double max_rel_error = 0.0;
    bool pass = false;
    std::string report_text;
};
GradCheckSummary run_loss_gradchecks(uint64_t seed, bool inject_error = false);

}  // namespace isa
