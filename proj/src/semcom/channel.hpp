#pragma once

#include "semcom/rng.hpp"
#include "semcom/tensor.hpp"

namespace semcom {

// Real-valued AWGN; SNR is defined per real symbol with unit signal power.
struct ChannelConfig {
  double snr_db = 12.0;
};

struct SymbolBlock {
  Tensor symbols;
  double power() const noexcept;
};

SymbolBlock power_normalize(const Tensor& x);
double noise_variance(double snr_db) noexcept;
SymbolBlock apply_awgn(const SymbolBlock& block, const ChannelConfig& cfg, Rng& stream);
// Noise matrix for a batch of blocks, drawn row-major from the stream.
Tensor awgn_noise(std::size_t rows, std::size_t cols, double snr_db, Rng& stream);

}  // namespace semcom
