#include <cmath>

#include "doctest.h"
#include "semcom/codec.hpp"
#include "semcom/error.hpp"

using namespace semcom;

namespace {

using Vec = std::vector<double>;

// Plain-loop forward pass over raw parameter tensors.
Vec dense_ref(const ParameterSet& ps, const std::string& p, const Vec& x) {
  const Tensor& w = ps.at(p + ".W").value;
  const Tensor& b = ps.at(p + ".b").value;
  REQUIRE(w.rows() == x.size());
  Vec y(w.cols());
  for (std::size_t j = 0; j < w.cols(); ++j) {
    double s = b[j];
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * w.at(i, j);
    y[j] = s;
  }
  return y;
}

Vec mlp_ref(const ParameterSet& ps, const std::string& p, Vec x) {
  for (int i = 0;; ++i) {
    const std::string layer = p + "." + std::to_string(i);
    x = dense_ref(ps, layer, x);
    if (!ps.contains(p + "." + std::to_string(i + 1) + ".W")) return x;
    for (double& v : x) v = std::max(v, 0.0);
  }
}

Vec normalize_ref(Vec s) {
  double e = 0;
  for (double v : s) e += v * v;
  const double k = std::sqrt(static_cast<double>(s.size()) / e);
  for (double& v : s) v *= k;
  return s;
}

Vec concat(Vec a, std::span<const double> b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// y = M x, or M^T x.
Vec matvec(const Tensor& m, const Vec& x, bool transpose) {
  Vec y(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) y[i] += (transpose ? m.at(j, i) : m.at(i, j)) * x[j];
  return y;
}

struct Experts {
  TrainedExpert normal, robust, priv, cov;
};

Experts random_experts(std::uint64_t seed, double rho = 2.0) {
  CodecDims d;
  Rng r(seed, "test/experts");
  Experts e;
  e.normal = {ExpertKind::kNormal, "normal", 1.0, init_semantic_codec(d, r), {}};
  e.robust = {ExpertKind::kRobust, "robust", 1.0, init_semantic_codec(d, r), {}};
  e.priv = {ExpertKind::kPrivate, "private", 1.0, init_privacy_stage(d, r), {}};
  e.cov = {ExpertKind::kCovert, covert_slot(rho), rho, init_covert_stage(d, rho, r), {}};
  return e;
}

Tensor images(std::size_t n, std::uint64_t seed) {
  Rng r(seed, "test/images");
  Tensor x({n, kImagePixels});
  for (double& v : x.data()) v = r.uniform();
  return x;
}

}  // namespace

TEST_CASE("expert kind names round trip") {
  for (std::size_t i = 0; i < kExpertKindCount; ++i) {
    const auto k = static_cast<ExpertKind>(i);
    CHECK(parse_expert_kind(to_string(k)) == k);
  }
  CHECK_THROWS_AS(parse_expert_kind("stealthy"), Error);
}

TEST_CASE("compressed dimension and slot names") {
  CHECK(compressed_dim(32, 1.0) == 32);
  CHECK(compressed_dim(32, 1.33) == 24);
  CHECK(compressed_dim(32, 2.0) == 16);
  CHECK(compressed_dim(32, 4.0) == 8);
  CHECK_THROWS_AS(compressed_dim(32, 0.5), Error);
  CHECK(compressed_dim(32, 16.0) == 2);
  CHECK_THROWS_AS(compressed_dim(32, 40.0), Error);
  CHECK(covert_slot(1.33) == "covert@1.33");
  CHECK(covert_slot(2.0) == "covert@2.00");
}

TEST_CASE("registry lookups") {
  const Experts e = random_experts(1);
  ExpertRegistry reg;
  reg.put(e.normal);
  reg.put(e.cov);
  CHECK(reg.has("normal"));
  CHECK(reg.require_kind(ExpertKind::kCovert, 2.0).slot == "covert@2.00");
  try {
    reg.require_kind(ExpertKind::kPrivate);
    FAIL("missing expert not reported");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::kMissingExpert);
    CHECK(std::string(err.what()).find("private") != std::string::npos);
  }
  CHECK_THROWS_AS(reg.require_kind(ExpertKind::kCovert, 4.0), Error);
  CHECK(reg.hashes().at("normal") == e.normal.hash());
  TrainedExpert replaced = e.robust;
  replaced.kind = ExpertKind::kNormal;
  replaced.slot = "normal";
  reg.put(replaced);
  CHECK(reg.size() == 2);
  CHECK(reg.at("normal").hash() == e.robust.hash());
}

TEST_CASE("session keys are +/-1 and deterministic per message") {
  const Tensor a = session_key(99, 5), b = session_key(99, 5), c = session_key(99, 6), d = session_key(98, 5);
  CHECK(a.size() == 16);
  for (double v : a.data()) CHECK(std::abs(v) == 1.0);
  CHECK(a == b);
  CHECK(!(a == c));
  CHECK(!(a == d));
  const std::uint64_t idx[] = {5, 6};
  const Tensor ks = session_keys(99, idx);
  CHECK(ks.rows() == 2);
  for (std::size_t j = 0; j < 16; ++j) CHECK(ks.at(1, j) == c[j]);
}

TEST_CASE("key scrambler is orthogonal and key dependent") {
  for (std::size_t m : {8, 16, 32}) {
    const Tensor k = session_key(3, m);
    const Tensor q = key_scrambler(k.data(), m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        double s = 0;
        for (std::size_t c = 0; c < m; ++c) s += q.at(i, c) * q.at(j, c);
        CHECK(s == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-10).scale(1.0));
      }
    CHECK(key_scrambler(k.data(), m) == q);
    const Tensor other = key_scrambler(session_key(4, m).data(), m);
    CHECK(!(other == q));
  }
}

TEST_CASE("transmitter and receiver follow the documented stage order") {
  const Experts e = random_experts(2);
  const Tensor x = images(3, 2);
  const std::uint64_t secret = 1234;
  const auto msg = message_range(kEvalMessageBase, 3);

  SUBCASE("normal codec") {
    CodecPipeline p{&e.normal, nullptr, nullptr, std::nullopt};
    const Tensor s = encode_batch(x, p, msg);
    const Tensor post = decode_batch(s, p, msg);
    for (std::size_t i = 0; i < 3; ++i) {
      const Vec ref = normalize_ref(
          dense_ref(e.normal.params, "channel.tx", mlp_ref(e.normal.params, "encoder", Vec(x.row(i).begin(), x.row(i).end()))));
      for (std::size_t j = 0; j < ref.size(); ++j) CHECK(s.at(i, j) == doctest::Approx(ref[j]).epsilon(1e-10));
      const Vec logits = mlp_ref(e.normal.params, "head", dense_ref(e.normal.params, "channel.rx", ref));
      double z = 0, mx = *std::max_element(logits.begin(), logits.end());
      for (double l : logits) z += std::exp(l - mx);
      for (std::size_t k = 0; k < logits.size(); ++k)
        CHECK(post.at(i, k) == doctest::Approx(std::exp(logits[k] - mx) / z).epsilon(1e-10));
    }
  }

  SUBCASE("robust + private + covert") {
    CodecPipeline p{&e.robust, &e.priv, &e.cov, secret};
    CHECK(p.symbol_count() == 16);
    CHECK(p.label() == "robust+private+covert@2.00");
    const Tensor s = encode_batch(x, p, msg);
    const Tensor post = decode_batch(s, p, msg);
    for (std::size_t i = 0; i < 3; ++i) {
      const Tensor key = session_key(secret, msg[i]);
      const Tensor q = key_scrambler(key.data(), 16);
      Vec y = mlp_ref(e.robust.params, "encoder", Vec(x.row(i).begin(), x.row(i).end()));
      y = mlp_ref(e.priv.params, "keyed_encoder", concat(y, key.data()));
      Vec sym = normalize_ref(dense_ref(e.cov.params, "channel.tx", dense_ref(e.cov.params, "compressor", y)));
      sym = matvec(q, sym, false);
      for (std::size_t j = 0; j < 16; ++j) CHECK(s.at(i, j) == doctest::Approx(sym[j]).epsilon(1e-10));

      Vec r = matvec(q, sym, true);
      Vec back = dense_ref(e.cov.params, "decompressor", dense_ref(e.cov.params, "channel.rx", r));
      back = dense_ref(e.robust.params, "channel.rx", normalize_ref(dense_ref(e.robust.params, "channel.tx", back)));
      back = mlp_ref(e.priv.params, "keyed_decoder", concat(back, key.data()));
      const Vec logits = mlp_ref(e.robust.params, "head", back);
      const auto best = std::max_element(logits.begin(), logits.end()) - logits.begin();
      CHECK(argmax(post.row(i)) == static_cast<std::size_t>(best));
    }
  }
}

TEST_CASE("every pipeline emits unit-power blocks of the right width") {
  const Experts e = random_experts(3, 4.0);
  const Tensor x = images(5, 3);
  const auto msg = message_range(0, 5);
  for (const CodecPipeline& p : {CodecPipeline{&e.normal, nullptr, nullptr, std::nullopt},
                                 CodecPipeline{&e.normal, &e.priv, nullptr, 7},
                                 CodecPipeline{&e.normal, nullptr, &e.cov, std::nullopt},
                                 CodecPipeline{&e.robust, &e.priv, &e.cov, 7}}) {
    CAPTURE(p.label());
    const Tensor s = encode_batch(x, p, msg);
    CHECK(s.cols() == p.symbol_count());
    for (std::size_t i = 0; i < 5; ++i) {
      double e2 = 0;
      for (double v : s.row(i)) e2 += v * v;
      CHECK(e2 / static_cast<double>(s.cols()) == doctest::Approx(1.0).epsilon(1e-12));
    }
    const Tensor post = decode_batch(s, p, msg);
    for (std::size_t i = 0; i < 5; ++i) {
      double sum = 0;
      for (double v : post.row(i)) sum += v;
      CHECK(sum == doctest::Approx(1.0));
    }
  }
}

TEST_CASE("single-message encode/decode agree with the batch path") {
  const Experts e = random_experts(4);
  CodecPipeline p{&e.normal, &e.priv, nullptr, 11};
  const Tensor x = images(2, 4);
  const auto msg = message_range(40, 2);
  const Tensor s = encode_batch(x, p, msg);
  const SymbolBlock b = encode(x.row(1), p, 41);
  for (std::size_t j = 0; j < b.symbols.size(); ++j) CHECK(b.symbols[j] == s.at(1, j));
  const Tensor post = decode(b, p, 41);
  CHECK(post.size() == 8);
}

TEST_CASE("pipeline validation") {
  const Experts e = random_experts(5);
  CHECK_THROWS_AS((CodecPipeline{nullptr, nullptr, nullptr, std::nullopt}.validate()), Error);
  CHECK_THROWS_AS((CodecPipeline{&e.priv, nullptr, nullptr, std::nullopt}.validate()), Error);
  CHECK_THROWS_AS((CodecPipeline{&e.normal, &e.priv, nullptr, std::nullopt}.validate()), Error);
  CHECK_THROWS_AS((CodecPipeline{&e.normal, nullptr, &e.priv, std::nullopt}.validate()), Error);
  CodecPipeline p{&e.normal, nullptr, &e.cov, std::nullopt};
  const auto msg = message_range(0, 1);
  try {
    decode_batch(Tensor({1, 32}), p, msg);
    FAIL("wrong block width accepted");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::kShapeMismatch);
  }
}

TEST_CASE("accuracy helper") {
  const Tensor s = Tensor::matrix(3, 2, {0.9, 0.1, 0.2, 0.8, 0.6, 0.4});
  const int y[] = {0, 1, 1};
  CHECK(accuracy(s, y) == doctest::Approx(2.0 / 3.0));
  const int bad[] = {0};
  CHECK_THROWS_AS(accuracy(s, bad), Error);
}
