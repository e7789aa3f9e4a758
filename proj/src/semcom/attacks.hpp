#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "semcom/codec.hpp"
#include "semcom/metrics.hpp"

namespace semcom {

enum class AttackSurface { kSource, kChannel };
enum class AttackMode { kWhitebox, kBlackbox };

// epsilon is an L-inf pixel budget for source attacks and an L2 budget
// relative to unit symbol power for channel attacks (||delta||_2 <=
// epsilon * sqrt(m)). step_size uses the same units; <= 0 selects epsilon/4.
struct AttackSpec {
  AttackSurface surface = AttackSurface::kSource;
  AttackMode mode = AttackMode::kWhitebox;
  double epsilon = 8.0 / 255.0;
  int steps = 10;
  double step_size = 0.0;
  std::size_t query_budget = 0;
  std::uint64_t seed = 0;

  void validate() const;
  double effective_step() const noexcept { return step_size > 0.0 ? step_size : epsilon / 4.0; }
};

// Projected gradient ascent on cross-entropy w.r.t. input pixels through a
// route. `noise` (optional) is added to the channel symbols; `start` draws a
// uniform random start inside the ball when given.
Tensor pgd_linf(const Route& route, const Tensor& images, std::span<const int> labels, const Tensor& keys,
                double epsilon, int steps, double step, const Tensor* noise, Rng* start);

// White-box source attack; crafted against the noise-free channel.
Tensor pgd_source(const Tensor& images, std::span<const int> labels, const CodecPipeline& p,
                  const AttackSpec& spec, std::span<const std::uint64_t> msg);

// Only sees posteriors; never gradients.
using PosteriorOracle = std::function<Tensor(const Tensor& image)>;

// Random sign search in the L-inf ball: square windows of the perturbation
// are resampled to +/-epsilon and a candidate is kept when it raises the
// cross-entropy reported by the oracle. At most spec.query_budget calls.
Tensor blackbox_source(const Tensor& image, int label, const PosteriorOracle& oracle, const AttackSpec& spec);

// Runs blackbox_source per message against the pipeline's posterior
// oracle; message i uses seed stream_seed(spec.seed, i).
Tensor blackbox_source_batch(const Tensor& images, std::span<const int> labels, const CodecPipeline& p,
                             const AttackSpec& spec, std::span<const std::uint64_t> msg);

// Per-row L2 PGD on received symbols through a route's receiver; returns
// the perturbation delta with ||delta_row||_2 <= radius.
Tensor pgd_l2_symbols(const Route& route, const Tensor& symbols, std::span<const int> labels, const Tensor& keys,
                      double radius, int steps, double step);

// White-box L2 attack on transmitted symbols, gradients through the receiver.
Tensor pgd_channel(const Tensor& symbols, std::span<const int> labels, const CodecPipeline& p,
                   const AttackSpec& spec, std::span<const std::uint64_t> msg);

struct Traffic {
  Tensor received;
  std::vector<int> labels;
};

// Records noisy symbols of `set` sent through the live pipeline.
Traffic intercept(const CodecPipeline& p, const LabeledSet& set, std::uint64_t first_message, double snr_db,
                  Rng& noise);

// Clone of the legitimate receiver (channel decoder, decompressor, keyed
// decoder, classifier head) starting from its weights, with the key input
// held at zero, then trained on labelled intercepts.
class Eavesdropper {
 public:
  Tensor posteriors(const Tensor& received) const;
  const ParameterSet& semantic_params() const noexcept { return semantic_; }

 private:
  friend Eavesdropper train_eavesdropper(const Traffic&, const CodecPipeline&, int, std::uint64_t);
  Route route(bool trainable);
  Route route() const;

  ParameterSet semantic_;
  std::optional<ParameterSet> privacy_;
  std::optional<ParameterSet> covert_;
  std::size_t key_len_ = 0;
};

Eavesdropper train_eavesdropper(const Traffic& traffic, const CodecPipeline& p, int epochs, std::uint64_t seed);

struct EvalContext {
  std::string scenario;
  std::string expert_set;
  std::uint64_t seed = 0;
};

struct EvalResult {
  double accuracy = 0.0;
  std::optional<double> eavesdropper_accuracy;
  std::vector<MetricRow> rows(const EvalContext& ctx, double snr_db) const;
};

// Full transmit -> attack -> AWGN -> receive loop over `set`. Source attacks
// may be passed pre-crafted in `adversarial_images` to reuse them across SNRs.
EvalResult evaluate_under_attack(const CodecPipeline& p, const LabeledSet& set, const std::optional<AttackSpec>& spec,
                                 const ChannelConfig& cfg, std::uint64_t seed, const Eavesdropper* eve = nullptr,
                                 const Tensor* adversarial_images = nullptr);

}  // namespace semcom
