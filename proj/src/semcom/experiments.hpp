#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "semcom/attacks.hpp"
#include "semcom/checkpoint.hpp"
#include "semcom/config.hpp"

namespace semcom {

// Replaces the master seed everywhere it is copied into the config.
void set_master_seed(ExperimentConfig& cfg, std::uint64_t seed);

// SynthSigns from the config, or the image folder when one is configured.
DatasetSplit make_dataset(const ExperimentConfig& cfg);

// Trains one expert into the checkpoint (replacing a previous one in the
// same slot). Covert needs rho; the other kinds reject it.
const TrainedExpert& train_expert(Checkpoint& ck, const ExperimentConfig& cfg, const DatasetSplit& data,
                                  ExpertKind kind, std::optional<double> rho = std::nullopt);
void train_gate(Checkpoint& ck, const ExperimentConfig& cfg, const DatasetSplit& data);

// Scenario matrix. Each binds a PSR to the attacks it faces:
//   a {robust} source PGD        e {robust, covert} source PGD + warden
//   b {robust} channel PGD       f {robust, covert} channel PGD + warden
//   c {covert} rho sweep, warden g {covert, confidential} warden + eavesdropper
//   d {confidential} eavesdropper h {robust, confidential} channel PGD + eavesdropper
struct ScenarioSpec {
  char id = 'a';
  std::vector<SecurityRequirement> requirements;  // one entry except for the rho sweep
  std::optional<AttackSurface> tamper;
  bool warden = false;
  bool eavesdropper = false;
  std::vector<double> snr_grid;
};

ScenarioSpec scenario_spec(char id, const ExperimentConfig& cfg);
std::string expert_set_label(const CodecPipeline& p);

// Missing experts or gate raise kMissingExpert before anything is evaluated.
std::vector<MetricRow> run_scenario(char id, const ExperimentConfig& cfg, const DatasetSplit& data,
                                    const Checkpoint& ck);
std::vector<MetricRow> run_all_scenarios(const ExperimentConfig& cfg, const DatasetSplit& data, const Checkpoint& ck);

// Ad-hoc evaluation described by JSON:
//   {"surface": "source"|"channel", "mode": "whitebox"|"blackbox",
//    "epsilon", "steps", "step_size", "query_budget", "seed",
//    "experts": ["robust", "private", "covert@2.00", ...], "snr_grid": [...],
//    "messages": n}
// Unknown keys are rejected.
std::vector<MetricRow> attack_eval(const nlohmann::json& spec, const ExperimentConfig& cfg, const DatasetSplit& data,
                                   const Checkpoint& ck);

// Sorted by (scenario, expert_set, snr_db, metric), LF endings, header
// `scenario,expert_set,snr_db,metric,value,seed`, values to 6 decimals.
std::string format_csv(std::vector<MetricRow> rows);
void write_csv(const std::vector<MetricRow>& rows, const std::filesystem::path& path);

// Sizes, per-class counts and an FNV-1a digest of the float32 pixels and labels.
nlohmann::json dataset_summary(const DatasetSplit& data);
// One row per image: split,label,p0..p255.
void write_dataset_csv(const DatasetSplit& data, const std::filesystem::path& path);

}  // namespace semcom
