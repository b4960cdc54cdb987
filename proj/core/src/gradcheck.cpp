#include "isa/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "isa/errors.hpp"

namespace isa {

GradCheckReport grad_check(const LossFn& fn, const ParamSet& params, double eps) {
    if (eps <= 0.0) throw ConfigError("grad_check: eps must be positive");
    LossEval base = fn(params);
    if (!std::isfinite(base.value)) throw Error("grad_check: non-finite function value");

    GradCheckReport report;
    ParamSet work = params;
    for (const auto& [name, values] : params) {
        const Array2* analytic = nullptr;
        auto it = base.grads.find(name);
        if (it != base.grads.end()) analytic = &it->second;

        GradCheckEntry worst;
        worst.param = name;
        Array2& slot = work[name];
        for (size_t i = 0; i < values.data.size(); ++i) {
            double saved = slot.data[i];
            slot.data[i] = saved + eps;
            double up = fn(work).value;
            slot.data[i] = saved - eps;
            double down = fn(work).value;
            slot.data[i] = saved;
            if (!std::isfinite(up) || !std::isfinite(down))
                throw Error("grad_check: non-finite function value at " + name);
            double numeric = (up - down) / (2.0 * eps);
            double a = analytic ? analytic->data[i] : 0.0;
            double rel = std::abs(a - numeric) /
                         std::max({std::abs(a), std::abs(numeric), 1e-8});
            if (rel >= worst.rel_error) {
                worst.index = static_cast<int>(i);
                worst.analytic = a;
                worst.numeric = numeric;
                worst.rel_error = rel;
            }
        }
        if (worst.rel_error >= report.max_rel_error) {
            report.max_rel_error = worst.rel_error;
            report.worst_param = name;
        }
        report.per_param.push_back(worst);
    }
    return report;
}

}  // namespace isa
