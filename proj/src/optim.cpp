#include "sadga/optim.hpp"

#include <cmath>
#include <iostream>

#include "sadga/errors.hpp"

namespace sadga::ad {

void adam_step(ParameterStore& store, OptimizerState& opt, double lr_t) {
    for (const auto& [name, t] : store.all()) {
        if (!t.has_grad()) throw ContractError("adam_step: parameter without gradient: " + name);
    }
    ++opt.step;
    const auto& cfg = opt.config;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(opt.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(opt.step));
    for (const auto& [name, param] : store.all()) {
        Tensor t = param;
        auto& m = opt.first_moment[name];
        auto& v = opt.second_moment[name];
        if (m.empty()) {
            m.assign(t.numel(), 0.0);
            v.assign(t.numel(), 0.0);
        }
        auto g = t.grad();
        auto w = t.mutable_values();
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            w[i] -= lr_t * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
        }
        t.clear_grad();
    }
}

double lr_schedule(std::int64_t step, double base_lr, std::int64_t warmup_steps,
                   std::int64_t max_steps, double power) {
    if (warmup_steps >= max_steps) {
        throw ContractError("lr_schedule: warmup_steps must be below max_steps");
    }
    if (step < 0) throw ContractError("lr_schedule: negative step");
    if (step > max_steps) {
        std::cerr << "warning: lr_schedule step " << step << " beyond max_steps " << max_steps
                  << ", clamping rate to 0\n";
        return 0.0;
    }
    if (step < warmup_steps) {
        return base_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
    }
    const double frac = static_cast<double>(max_steps - step) / static_cast<double>(max_steps - warmup_steps);
    return base_lr * std::pow(frac, power);
}

}  // namespace sadga::ad
