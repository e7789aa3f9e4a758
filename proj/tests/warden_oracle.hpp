#pragma once

// Monte-Carlo warden, written from the timeline rather than the closed form:
// the warden samples the channel at t = 0, 1/f_w, 2/f_w, ... and each sample
// that falls inside the transmission window [0, T) detects it with
// probability 1 - xi. A session goes undetected when no sample fires.

#include <cmath>
#include <cstdint>

#include "semcom/rng.hpp"

namespace oracle {

struct McEstimate {
  double dfp = 0.0;
  double std_error = 0.0;
  std::uint64_t samples_in_window = 0;
};

inline std::uint64_t samples_in_window(double airtime_s, double warden_hz) {
  std::uint64_t k = 0;
  while (static_cast<double>(k) / warden_hz < airtime_s) ++k;
  return k;
}

inline McEstimate monte_carlo_dfp(std::uint64_t symbols, std::uint64_t bits_per_symbol, std::uint64_t messages,
                                  double rate_bps_hz, double bandwidth_hz, double warden_hz, double xi,
                                  std::uint64_t trials, std::uint64_t seed) {
  const double bits = static_cast<double>(symbols) * static_cast<double>(bits_per_symbol) * static_cast<double>(messages);
  const double airtime = bits / (rate_bps_hz * bandwidth_hz);
  McEstimate e;
  e.samples_in_window = samples_in_window(airtime, warden_hz);
  semcom::Rng rng(seed, "oracle/warden");
  std::uint64_t missed = 0;
  for (std::uint64_t t = 0; t < trials; ++t) {
    bool detected = false;
    for (std::uint64_t k = 0; k < e.samples_in_window && !detected; ++k) detected = rng.uniform() >= xi;
    missed += detected ? 0 : 1;
  }
  e.dfp = static_cast<double>(missed) / static_cast<double>(trials);
  e.std_error = std::sqrt(std::max(e.dfp * (1.0 - e.dfp), 1e-12) / static_cast<double>(trials));
  return e;
}

}  // namespace oracle
