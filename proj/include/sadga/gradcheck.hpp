#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "sadga/parameters.hpp"

namespace sadga::ad {

struct GradcheckEntry {
    std::string name;
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    bool passed = true;
};

struct GradcheckReport {
    std::vector<GradcheckEntry> entries;
    double max_rel_error = 0.0;
    std::size_t checked_elements = 0;
    bool passed = true;
};

struct GradcheckOptions {
    double h = 1e-5;
    double tol = 1e-4;
    // Relative error is |a - n| / max(|a|, |n|, denominator_floor).
    double denominator_floor = 1e-6;
};

using ScalarFn = std::function<Tensor()>;

// Central differences (f(θ+h) − f(θ−h)) / 2h against the recorded gradients.
// f is evaluated twice up front; differing values raise NondeterminismError.
GradcheckReport gradcheck(const ScalarFn& f, ParameterStore& params, const GradcheckOptions& opts = {});
GradcheckReport gradcheck(const ScalarFn& f, std::vector<std::pair<std::string, Tensor>> inputs,
                          const GradcheckOptions& opts = {});

}  // namespace sadga::ad
