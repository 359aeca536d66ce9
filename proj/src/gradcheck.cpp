#include "sadga/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "sadga/errors.hpp"

namespace sadga::ad {

GradcheckReport gradcheck(const ScalarFn& f, ParameterStore& params, const GradcheckOptions& opts) {
    std::vector<std::pair<std::string, Tensor>> inputs(params.all().begin(), params.all().end());
    return gradcheck(f, std::move(inputs), opts);
}

GradcheckReport gradcheck(const ScalarFn& f, std::vector<std::pair<std::string, Tensor>> inputs,
                          const GradcheckOptions& opts) {
    for (auto& [_, t] : inputs) {
        t.set_requires_grad(true);
        t.clear_grad();
    }
    double first = 0.0, second = 0.0;
    {
        NoGradGuard guard;
        first = f().item();
        second = f().item();
    }
    if (first != second) {
        throw NondeterminismError("gradcheck: two forward passes disagree (" + std::to_string(first) +
                                  " vs " + std::to_string(second) + ")");
    }

    Tensor loss = f();
    backward(loss);

    GradcheckReport report;
    NoGradGuard guard;
    for (auto& [name, t] : inputs) {
        GradcheckEntry entry;
        entry.name = name;
        std::vector<double> analytic(t.numel(), 0.0);
        if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), analytic.begin());
        auto w = t.mutable_values();
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double saved = w[i];
            w[i] = saved + opts.h;
            const double up = f().item();
            w[i] = saved - opts.h;
            const double down = f().item();
            w[i] = saved;
            const double numeric = (up - down) / (2.0 * opts.h);
            const double denom =
                std::max({std::abs(analytic[i]), std::abs(numeric), opts.denominator_floor});
            const double rel = std::abs(analytic[i] - numeric) / denom;
            if (rel > entry.max_rel_error || !std::isfinite(rel)) {
                entry.max_rel_error = rel;
                entry.worst_index = i;
                entry.analytic = analytic[i];
                entry.numeric = numeric;
            }
        }
        entry.passed = std::isfinite(entry.max_rel_error) && entry.max_rel_error <= opts.tol;
        report.checked_elements += w.size();
        report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
        report.passed = report.passed && entry.passed;
        report.entries.push_back(std::move(entry));
        t.clear_grad();
    }
    return report;
}

}  // namespace sadga::ad
