#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "semcom/codec.hpp"
#include "semcom/optim.hpp"

namespace semcom {

inline constexpr std::array<double, 3> kCovertLevels = {1.33, 2.0, 4.0};
inline constexpr std::size_t kPsrWidth = 4;
inline constexpr std::size_t kMessageFeatureWidth = 16;
inline constexpr std::size_t kGateInputWidth = kPsrWidth + kMessageFeatureWidth;
inline constexpr std::size_t kGateHidden = 32;

struct SecurityRequirement {
  bool robustness = false;
  bool confidentiality = false;
  std::optional<int> covert_level;  // index into kCovertLevels; set iff covertness requested

  bool covertness() const noexcept { return covert_level.has_value(); }
  bool any() const noexcept { return robustness || confidentiality || covertness(); }
  void validate() const;
  friend bool operator==(const SecurityRequirement&, const SecurityRequirement&) = default;
};

// The 8 flag combinations with every covert level: 4 + 4*3 = 16 entries.
std::vector<SecurityRequirement> requirement_grid();

// [robust, covert, (level+1)/3 or 0, confidential] ++ 4x4 mean-pooled image.
Tensor encode_requirements(const SecurityRequirement& psr, std::span<const double> image);

struct GatingDecision {
  std::array<double, kExpertKindCount> scores{};  // by ExpertKind; 0 for kinds the gate lacks
  std::vector<ExpertKind> selected;               // canonical order
  std::optional<double> rho;

  bool has(ExpertKind k) const noexcept;
};

// Multi-label targets, indexed by ExpertKind. Flags whose expert is not in
// `available` are treated as unset.
std::array<double, kExpertKindCount> requirement_label(const SecurityRequirement& psr,
                                                       std::span<const ExpertKind> available);
std::array<double, kExpertKindCount> requirement_label(const SecurityRequirement& psr);
std::vector<ExpertKind> label_set(const SecurityRequirement& psr, std::span<const ExpertKind> available);

struct GateModel {
  ParameterSet params;              // gate.0 (20 -> 32), gate.1 (32 -> outputs.size())
  std::vector<ExpertKind> outputs;  // kind scored by each output column

  static GateModel init(std::vector<ExpertKind> outputs, std::uint64_t seed);
  bool scores_kind(ExpertKind k) const noexcept;
};

GatingDecision gate_forward(const GateModel& model, std::span<const double> input);
// rho is taken from the requirement rather than learned.
GatingDecision gate_decide(const GateModel& model, const SecurityRequirement& psr, std::span<const double> image);

struct GateTrainOptions {
  std::size_t samples = 4096;
  double penalty = 0.01;
  int epochs = 60;
  std::size_t batch_size = 64;
  AdamConfig adam{.lr = 1e-2};
};

struct GateEval {
  double exact_match = 0.0;
  double mean_selected = 0.0;
  std::vector<SecurityRequirement> mismatches;
};

// Uniform PSRs (flags, then level) paired with images drawn from `images`.
std::vector<SecurityRequirement> sample_requirements(std::size_t n, Rng& rng);

// Trains the gate over the kinds present in `registry`; raises
// kInvariantViolation if any expert's parameters change meanwhile.
GateModel train_gate(const ExpertRegistry& registry, const Tensor& images, const GateTrainOptions& opts,
                     std::uint64_t seed);
GateEval evaluate_gate(const GateModel& model, const Tensor& images, std::size_t n, std::uint64_t seed);

// Widens the output layer by one zero-initialised column (bias -2) for
// `kind`; decisions for existing kinds are unchanged until fine-tuning.
GateModel extend_gate(const GateModel& model, ExpertKind kind);
GateModel register_expert_and_finetune(const GateModel& model, ExpertRegistry& registry, TrainedExpert expert,
                                       const Tensor& images, const GateTrainOptions& opts, std::uint64_t seed);

// Pipeline built from a decision, canonical order, robust replacing normal.
CodecPipeline compose_pipeline(const GatingDecision& d, const ExpertRegistry& registry,
                               std::optional<std::uint64_t> secret_seed);

}  // namespace semcom
