#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sadga/parameters.hpp"

namespace sadga::ad {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct OptimizerState {
    AdamConfig config;
    std::uint64_t step = 0;
    std::map<std::string, std::vector<double>> first_moment;
    std::map<std::string, std::vector<double>> second_moment;
};

// Bias-corrected Adam update with effective rate lr_t, then clears all grads.
// Throws ContractError if any parameter lacks a gradient buffer.
void adam_step(ParameterStore& store, OptimizerState& opt, double lr_t);

// Linear warmup from 0 to base_lr, then base_lr·((max-step)/(max-warmup))^power.
// Steps past max_steps clamp to 0 with a warning on stderr.
double lr_schedule(std::int64_t step, double base_lr, std::int64_t warmup_steps,
                   std::int64_t max_steps, double power = 0.5);

}  // namespace sadga::ad
