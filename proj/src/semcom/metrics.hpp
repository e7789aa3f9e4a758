#pragma once

#include <cstdint>
#include <string>

namespace semcom {

// One line of experiment output.
struct MetricRow {
  std::string scenario;
  std::string expert_set;
  double snr_db = 0.0;
  std::string metric;  // accuracy | eavesdropper_accuracy | dfp | mse
  double value = 0.0;
  std::uint64_t seed = 0;
};

}  // namespace semcom
