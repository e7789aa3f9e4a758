#pragma once

#include <cstdint>

namespace semcom {

// Warden model: the session occupies the channel for T = bits / (R * B)
// seconds, the warden samples it n = ceil(f_w * T) times, and each sample
// independently misses the transmission with probability xi.
struct CovertConfig {
  double xi = 0.95;            // per-observation detection error probability
  double warden_hz = 2.0;      // f_w
  double rate_bps_hz = 100.0;  // R
  double bandwidth_hz = 5e6;   // B
  std::uint64_t bits_per_symbol = 8;
  std::uint64_t session_messages = 5'000'000;
};

void validate(const CovertConfig& cfg);

std::uint64_t payload_bits(std::uint64_t symbols, std::uint64_t bits_per_symbol, std::uint64_t messages);
double transmission_time(double bits, const CovertConfig& cfg);
std::uint64_t detection_opportunities(double seconds, double warden_hz);
double dfp(std::uint64_t opportunities, double xi);

// Session DFP for a block of `symbols` transmitted symbols per message.
double session_dfp(std::uint64_t symbols, const CovertConfig& cfg);

}  // namespace semcom
