#pragma once

#include "semcom/codec.hpp"
#include "semcom/optim.hpp"

namespace semcom {

struct TrainOptions {
  int epochs = 30;
  std::size_t batch_size = 64;
  AdamConfig adam;
  // Per-batch SNR is drawn uniformly from the integers in [min, max].
  int snr_min_db = 0;
  int snr_max_db = 12;
  CodecDims dims;
};

// Semantic distance minimisation: per batch an L-inf PGD example is crafted
// against the current codec, and the loss is
//   CE(x) + CE(x_adv) + beta * mean ||f(x) - f(x_adv)||^2
// with f the semantic encoder. steps == 0 turns the adversarial terms off.
// A channel-side term CE(x; s + n + delta) is added when channel_steps > 0,
// delta being an L2 PGD perturbation of the symbols (radius
// channel_epsilon * sqrt(m)) crafted on the same batch.
struct SdmOptions {
  double epsilon = 8.0 / 255.0;
  int pgd_steps = 5;
  double step_size = 0.0;  // <= 0 selects epsilon / 4
  double beta = 1.0;
  bool random_start = true;
  double channel_epsilon = 0.5;
  int channel_steps = 5;
  // channel_epsilon ramps linearly from channel_epsilon / warmup_epochs up to
  // its full value over this many epochs.
  int channel_warmup_epochs = 10;
};

struct PrivateOptions {
  std::uint64_t secret_seed = 0x5EC2E7;
  // Weight of the term pushing the simulated eavesdropper's posterior
  // towards uniform; 0 trains the legitimate pair on its own loss only.
  double confusion_weight = 0.0;
  // Weight of ||keyed_decode(keyed_encode(y)) - y||^2 keeping the stage
  // transparent to whichever semantic codec it wraps.
  double reconstruction_weight = 1.0;
};

struct CovertOptions {
  int epochs = 30;
  int channel_epochs = 30;
  // Cross-entropy through the robust receiver on adversarial symbols, added
  // to the bottleneck channel codec's loss when a robust codec is registered.
  double task_weight = 1.0;
};

TrainedExpert train_normal(const DatasetSplit& data, const TrainOptions& opts, std::uint64_t seed);
TrainedExpert train_robust_sdm(const DatasetSplit& data, const TrainOptions& opts, const SdmOptions& sdm,
                               std::uint64_t seed);
// Needs the normal codec; alternates with the robust codec when registered.
TrainedExpert train_private(const DatasetSplit& data, const ExpertRegistry& registry, const TrainOptions& opts,
                            const PrivateOptions& priv, std::uint64_t seed);
// Autoencoder on frozen semantic vectors, then a channel codec for the
// bottleneck. Reports the clean reconstruction MSE on normal-codec test
// features in manifest["mse"].
TrainedExpert train_covert_compressor(const DatasetSplit& data, const ExpertRegistry& registry, double rho,
                                      const TrainOptions& opts, const CovertOptions& cov, std::uint64_t seed);

// Clean reconstruction MSE of a covert stage on the given semantic vectors.
double covert_reconstruction_mse(const TrainedExpert& covert, const Tensor& features);

}  // namespace semcom
