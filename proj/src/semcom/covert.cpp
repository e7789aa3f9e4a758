#include "semcom/covert.hpp"

#include <cmath>

#include "semcom/error.hpp"

namespace semcom {

void validate(const CovertConfig& c) {
  require(c.xi >= 0.0 && c.xi <= 1.0, ErrorCode::kInvalidArgument, "covert: xi must lie in [0,1]");
  require(c.warden_hz > 0 && c.rate_bps_hz > 0 && c.bandwidth_hz > 0 && c.bits_per_symbol > 0 &&
              c.session_messages > 0,
          ErrorCode::kInvalidArgument, "covert: f_w, R, B, q and M must be positive");
}

std::uint64_t payload_bits(std::uint64_t symbols, std::uint64_t bits_per_symbol, std::uint64_t messages) {
  return symbols * bits_per_symbol * messages;
}

double transmission_time(double bits, const CovertConfig& cfg) {
  require(bits >= 0.0, ErrorCode::kInvalidArgument, "covert: negative payload");
  return bits / (cfg.rate_bps_hz * cfg.bandwidth_hz);
}

std::uint64_t detection_opportunities(double seconds, double warden_hz) {
  require(seconds >= 0.0, ErrorCode::kInvalidArgument, "covert: negative duration");
  if (seconds == 0.0) return 0;
  return static_cast<std::uint64_t>(std::ceil(warden_hz * seconds));
}

double dfp(std::uint64_t opportunities, double xi) {
  require(xi >= 0.0 && xi <= 1.0, ErrorCode::kInvalidArgument, "covert: xi must lie in [0,1]");
  if (opportunities == 0) return 1.0;
  return std::pow(xi, static_cast<double>(opportunities));
}

double session_dfp(std::uint64_t symbols, const CovertConfig& cfg) {
  validate(cfg);
  const auto bits = payload_bits(symbols, cfg.bits_per_symbol, cfg.session_messages);
  const double t = transmission_time(static_cast<double>(bits), cfg);
  return dfp(detection_opportunities(t, cfg.warden_hz), cfg.xi);
}

}  // namespace semcom
