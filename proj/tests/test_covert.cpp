#include <cmath>

#include "doctest.h"
#include "semcom/codec.hpp"
#include "semcom/covert.hpp"
#include "semcom/error.hpp"
#include "warden_oracle.hpp"

using namespace semcom;

TEST_CASE("payload bits") {
  CHECK(payload_bits(32, 8, 1) == 256);
  CHECK(payload_bits(16, 8, 50000) == 6'400'000);
  CHECK(payload_bits(16, 8, 7) * 2 == payload_bits(32, 8, 7));
}

TEST_CASE("transmission time") {
  CovertConfig c;
  CHECK(transmission_time(5e8, c) == doctest::Approx(1.0));
  CHECK(transmission_time(0.0, c) == 0.0);
  CHECK(transmission_time(2.5e8, c) == doctest::Approx(transmission_time(5e8, c) / 2));
  CHECK_THROWS_AS(transmission_time(-1.0, c), Error);
}

TEST_CASE("detection opportunities") {
  CHECK(detection_opportunities(1.0, 2.0) == 2);
  CHECK(detection_opportunities(0.4, 2.0) == 1);
  CHECK(detection_opportunities(0.0, 2.0) == 0);
  CHECK(detection_opportunities(1.01, 2.0) == 3);
}

TEST_CASE("dfp closed form and edges") {
  CHECK(dfp(2, 0.95) == doctest::Approx(0.9025));
  CHECK(dfp(0, 0.3) == 1.0);
  CHECK(dfp(1, 0.95) > dfp(2, 0.95));
  for (std::uint64_t n = 0; n < 20; ++n) {
    CHECK(dfp(n, 1.0) == 1.0);
    if (n >= 1) CHECK(dfp(n, 0.0) == 0.0);
    CHECK(dfp(n + 1, 0.9) <= dfp(n, 0.9));
  }
  CHECK_THROWS_AS(dfp(1, 1.5), Error);
}

TEST_CASE("session DFP is non-decreasing in rho over the grid") {
  CovertConfig c;
  double prev = -1.0;
  for (double rho : {1.0, 1.33, 2.0, 4.0}) {
    const double v = session_dfp(compressed_dim(32, rho), c);
    CHECK(v >= prev);
    prev = v;
  }
  // Defaults: n = 6, 4, 3, 2 detection chances.
  CHECK(session_dfp(32, c) == doctest::Approx(std::pow(0.95, 6)));
  CHECK(session_dfp(24, c) == doctest::Approx(std::pow(0.95, 4)));
  CHECK(session_dfp(16, c) == doctest::Approx(std::pow(0.95, 3)));
  CHECK(session_dfp(8, c) == doctest::Approx(std::pow(0.95, 2)));
}

TEST_CASE("analytic DFP agrees with the Monte-Carlo warden") {
  CovertConfig c;
  for (std::uint64_t d : {32, 24, 16, 8}) {
    const auto mc = oracle::monte_carlo_dfp(d, c.bits_per_symbol, c.session_messages, c.rate_bps_hz,
                                            c.bandwidth_hz, c.warden_hz, c.xi, 200000, d);
    CAPTURE(d);
    CHECK(std::abs(mc.dfp - session_dfp(d, c)) <= 3 * mc.std_error);
  }
  // Sample counting from the timeline equals ceil(f_w T).
  for (double t : {0.0, 0.1, 0.5, 1.0, 1.2, 2.0, 3.3})
    CHECK(oracle::samples_in_window(t, 2.0) == detection_opportunities(t, 2.0));
}

TEST_CASE("config validation") {
  CovertConfig c;
  c.xi = -0.1;
  CHECK_THROWS_AS(validate(c), Error);
  c = CovertConfig{};
  c.session_messages = 0;
  CHECK_THROWS_AS(validate(c), Error);
}
