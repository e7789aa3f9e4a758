#pragma once

#include <cstdint>
#include <functional>

#include "semcom/autodiff.hpp"

namespace semcom {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update; `step` counts from 1. Moments live in the
// parameters themselves.
void adam_step(ParameterSet& params, const AdamConfig& cfg, std::uint64_t step);

// Builds a scalar loss on the given tape from parameters captured by the
// closure. Must be deterministic: grad_check calls it many times.
using LossClosure = std::function<ad::Var(ad::Tape&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  // Coordinates whose +/- perturbation crossed a ReLU kink.
  std::size_t skipped = 0;
};

// Compares reverse-mode gradients with central differences on a seeded
// subsample of parameter coordinates. Relative error is
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-6).
GradCheckResult grad_check(ParameterSet& params, const LossClosure& loss, std::uint64_t seed,
                           std::size_t samples = 64, double step = 1e-4);

}  // namespace semcom
