#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "semcom/covert.hpp"
#include "semcom/gate.hpp"
#include "semcom/training.hpp"

namespace semcom {

// Attack budgets used by the scenario runner.
struct AttackBudgets {
  double source_epsilon = 8.0 / 255.0;
  int source_steps = 10;
  double channel_epsilon = 0.5;
  int channel_steps = 10;
  std::size_t query_budget = 500;
  // Black-box evaluation is per message; it runs on this many test images.
  std::size_t blackbox_messages = 200;
};

struct EavesdropperOptions {
  int epochs = 20;
};

// Everything a run depends on besides the master seed. JSON schema (all
// keys optional, unknown keys rejected):
//   seed, snr_grid, combined_rho,
//   dataset    {num_classes, n_train, n_test, noise_sigma, max_shift_px,
//               scale_jitter, background, foreground, image_folder}
//   training   {epochs, batch_size, lr, snr_min_db, snr_max_db}
//   sdm        {epsilon, pgd_steps, step_size, beta, random_start,
//               channel_epsilon, channel_steps, channel_warmup_epochs}
//   private    {secret_seed, confusion_weight, reconstruction_weight}
//   covert     {xi, warden_hz, rate_bps_hz, bandwidth_hz, bits_per_symbol,
//               session_messages, epochs, channel_epochs, task_weight,
//               rho_grid}
//   gate       {samples, penalty, epochs, batch_size, lr}
//   attacks    {source_epsilon, source_steps, channel_epsilon,
//               channel_steps, query_budget, blackbox_messages}
//   eavesdropper {epochs}
struct ExperimentConfig {
  std::uint64_t seed = 42;
  SynthSignsOptions dataset;
  std::optional<std::filesystem::path> image_folder;
  TrainOptions training;
  SdmOptions sdm;
  PrivateOptions privacy;
  CovertConfig warden;
  CovertOptions covert_training;
  std::vector<double> rho_grid{1.0, 1.33, 2.0, 4.0};
  double combined_rho = 2.0;
  GateTrainOptions gate;
  AttackBudgets attacks;
  EavesdropperOptions eavesdropper;
  std::vector<double> snr_grid{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};

  void validate() const;
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& file);
nlohmann::json to_json(const ExperimentConfig& cfg);

}  // namespace semcom
