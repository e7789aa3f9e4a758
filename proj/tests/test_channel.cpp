#include <cmath>

#include "doctest.h"
#include "semcom/channel.hpp"
#include "semcom/error.hpp"

using namespace semcom;

TEST_CASE("noise variance from SNR") {
  CHECK(noise_variance(0.0) == doctest::Approx(1.0));
  CHECK(noise_variance(10.0) == doctest::Approx(0.1));
  CHECK(noise_variance(12.0) == doctest::Approx(std::pow(10.0, -1.2)));
  CHECK(noise_variance(-3.0) == doctest::Approx(std::pow(10.0, 0.3)));
}

TEST_CASE("power normalisation gives unit mean power and keeps direction") {
  Tensor x = Tensor::matrix(2, 3, {1, -2, 3, 0.5, 0, 4});
  const SymbolBlock b = power_normalize(x);
  CHECK(b.power() == doctest::Approx(1.0).epsilon(1e-12));
  const double ratio = b.symbols[0] / x[0];
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(b.symbols[i] == doctest::Approx(ratio * x[i]));
  CHECK_THROWS_AS(power_normalize(Tensor({4})), Error);
}

TEST_CASE("empirical SNR within 0.1 dB over 1e5 symbols") {
  Rng sig(1, "signal");
  Tensor x({1, 100000});
  for (double& v : x.data()) v = sig.normal();
  const SymbolBlock s = power_normalize(x);
  for (double snr : {0.0, 3.0, 6.0, 9.0, 12.0}) {
    Rng stream(7, "awgn");
    const SymbolBlock y = apply_awgn(s, ChannelConfig{snr}, stream);
    double np = 0.0;
    for (std::size_t i = 0; i < y.symbols.size(); ++i) {
      const double n = y.symbols[i] - s.symbols[i];
      np += n * n;
    }
    np /= static_cast<double>(y.symbols.size());
    const double measured = 10.0 * std::log10(s.power() / np);
    CAPTURE(snr);
    CHECK(std::abs(measured - snr) < 0.1);
  }
}

TEST_CASE("awgn is reproducible per stream and matches the batch noise helper") {
  const SymbolBlock s = power_normalize(Tensor::matrix(2, 4, {1, 2, 3, 4, 5, 6, 7, 8}));
  Rng a(3, "n"), b(3, "n"), c(3, "n");
  const SymbolBlock ya = apply_awgn(s, ChannelConfig{6.0}, a);
  const SymbolBlock yb = apply_awgn(s, ChannelConfig{6.0}, b);
  CHECK(ya.symbols == yb.symbols);
  const Tensor n = awgn_noise(2, 4, 6.0, c);
  for (std::size_t i = 0; i < n.size(); ++i) CHECK(ya.symbols[i] == doctest::Approx(s.symbols[i] + n[i]).epsilon(1e-14));
}
