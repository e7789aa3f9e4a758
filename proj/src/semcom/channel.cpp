#include "semcom/channel.hpp"

#include <cmath>

#include "semcom/error.hpp"

namespace semcom {

double SymbolBlock::power() const noexcept {
  double e = 0.0;
  for (double v : symbols.data()) e += v * v;
  return symbols.empty() ? 0.0 : e / static_cast<double>(symbols.size());
}

SymbolBlock power_normalize(const Tensor& x) {
  double e = 0.0;
  for (double v : x.data()) e += v * v;
  require(e > 0.0, ErrorCode::kInvalidArgument, "power_normalize: all-zero input");
  const double s = std::sqrt(static_cast<double>(x.size()) / e);
  SymbolBlock out{x};
  for (double& v : out.symbols.data()) v *= s;
  return out;
}

double noise_variance(double snr_db) noexcept { return std::pow(10.0, -snr_db / 10.0); }

Tensor awgn_noise(std::size_t rows, std::size_t cols, double snr_db, Rng& stream) {
  const double sigma = std::sqrt(noise_variance(snr_db));
  Tensor n({rows, cols});
  for (double& v : n.data()) v = sigma * stream.normal();
  return n;
}

SymbolBlock apply_awgn(const SymbolBlock& block, const ChannelConfig& cfg, Rng& stream) {
  const double sigma = std::sqrt(noise_variance(cfg.snr_db));
  SymbolBlock out = block;
  if (sigma == 0.0) return out;
  for (double& v : out.symbols.data()) v += sigma * stream.normal();
  return out;
}

}  // namespace semcom
