#pragma once

#include <functional>
#include <string>

#include "isa/graph.hpp"

namespace isa {

/// One loss evaluation: scalar value plus analytic gradients per parameter.
struct LossEval {
    double value = 0.0;
    Gradients grads;
};

using LossFn = std::function<LossEval(const ParamSet&)>;

struct GradCheckEntry {
    std::string param;
    int index = -1;          // worst flat index within the parameter
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_error = 0.0;  // |a-n| / max(|a|, |n|, 1e-8)
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst_param;
    std::vector<GradCheckEntry> per_param;  // worst coordinate of each parameter
};

/// Central finite differences (f(x+eps) - f(x-eps)) / (2 eps) for every
/// coordinate of every parameter, compared against the analytic gradient
/// returned by fn at the unperturbed point.
GradCheckReport grad_check(const LossFn& fn, const ParamSet& params, double eps = 1e-5);

}  // namespace isa
