#include <cmath>

#include "doctest.h"
#include "semcom/attacks.hpp"
#include "semcom/error.hpp"
#include "small_system.hpp"

using namespace semcom;

namespace {

double clean_accuracy(const CodecPipeline& p, double snr = 12.0) {
  return evaluate_under_attack(p, fixture::small_data().test, std::nullopt, ChannelConfig{snr}, 17).accuracy;
}

}  // namespace

TEST_CASE("normal codec learns the task and is reproducible") {
  const TrainedExpert& a = fixture::small_normal();
  CHECK(a.kind == ExpertKind::kNormal);
  CHECK(a.slot == "normal");
  const auto& losses = a.manifest.at("epoch_loss");
  REQUIRE(losses.size() == 15);
  CHECK(losses.back().get<double>() < losses.front().get<double>());
  CHECK(clean_accuracy(CodecPipeline{&a, nullptr, nullptr, std::nullopt}) > 0.85);

  const TrainedExpert b = train_normal(fixture::small_data(), fixture::small_train_options(), 3);
  CHECK(b.hash() == a.hash());
  const TrainedExpert c = train_normal(fixture::small_data(), fixture::small_train_options(1), 4);
  CHECK(c.hash() != a.hash());
}

TEST_CASE("weights are stored at float precision") {
  for (const Parameter& p : fixture::small_normal().params)
    for (double v : p.value.data()) REQUIRE(v == static_cast<double>(static_cast<float>(v)));
}

TEST_CASE("SDM with every adversarial term off reduces to the normal codec") {
  SdmOptions off;
  off.pgd_steps = 0;
  off.channel_steps = 0;
  const TrainedExpert r = train_robust_sdm(fixture::small_data(), fixture::small_train_options(2), off, 8);
  const TrainedExpert n = train_normal(fixture::small_data(), fixture::small_train_options(2), 8);
  CHECK(r.kind == ExpertKind::kRobust);
  CHECK(r.hash() == n.hash());
  CHECK(r.manifest.at("sdm").at("pgd_steps") == 0);

  SdmOptions bad;
  bad.epsilon = 0.0;
  CHECK_THROWS_AS(train_robust_sdm(fixture::small_data(), fixture::small_train_options(1), bad, 8), Error);
}

TEST_CASE("SDM training raises robustness to source PGD") {
  SdmOptions sdm;
  sdm.channel_steps = 0;
  sdm.pgd_steps = 3;
  const TrainedExpert robust = train_robust_sdm(fixture::small_data(), fixture::small_train_options(), sdm, 3);
  AttackSpec spec;
  const LabeledSet& test = fixture::small_data().test;
  const double n = evaluate_under_attack(CodecPipeline{&fixture::small_normal(), nullptr, nullptr, std::nullopt}, test,
                                         spec, ChannelConfig{12}, 1)
                       .accuracy;
  const double r =
      evaluate_under_attack(CodecPipeline{&robust, nullptr, nullptr, std::nullopt}, test, spec, ChannelConfig{12}, 1)
          .accuracy;
  CHECK(r > n + 0.1);
}

TEST_CASE("private stage: needs a normal codec, and decoding needs the key") {
  ExpertRegistry empty;
  CHECK_THROWS_AS(train_private(fixture::small_data(), empty, fixture::small_train_options(1), PrivateOptions{}, 1),
                  Error);

  ExpertRegistry reg;
  reg.put(fixture::small_normal());
  PrivateOptions po;
  const TrainedExpert priv = train_private(fixture::small_data(), reg, fixture::small_train_options(6), po, 2);
  CHECK(priv.kind == ExpertKind::kPrivate);
  CHECK(priv.manifest.at("bases").size() == 1);
  CHECK(priv.manifest.at("secret_seed").get<std::uint64_t>() == po.secret_seed);
  const CodecPipeline legit{&fixture::small_normal(), &priv, nullptr, po.secret_seed};
  const CodecPipeline wrong{&fixture::small_normal(), &priv, nullptr, po.secret_seed + 1};
  CHECK(clean_accuracy(legit) > 0.8);
  // Sent with one secret, decoded with another.
  const LabeledSet& test = fixture::small_data().test;
  const auto msg = message_range(kEvalMessageBase, test.size());
  const Tensor sym = encode_batch(test.images, legit, msg);
  CHECK(accuracy(decode_batch(sym, legit, msg), test.labels) > 0.8);
  CHECK(accuracy(decode_batch(sym, wrong, msg), test.labels) < 0.4);
}

TEST_CASE("covert compressor: bottleneck width, reported MSE and pipeline accuracy") {
  ExpertRegistry reg;
  reg.put(fixture::small_normal());
  CovertOptions co;
  co.epochs = 40;
  co.channel_epochs = 20;
  const TrainedExpert cov = train_covert_compressor(fixture::small_data(), reg, 2.0, fixture::small_train_options(), co, 4);
  CHECK(cov.slot == "covert@2.00");
  CHECK(cov.rho == 2.0);
  CHECK(cov.params.at("compressor.W").value.cols() == 16);
  CHECK(cov.manifest.at("bottleneck") == 16);

  // Reported MSE against a plain-loop reconstruction.
  const Tensor y = semantic_batch(fixture::small_data().test.images, fixture::small_normal());
  const Tensor& wc = cov.params.at("compressor.W").value;
  const Tensor& bc = cov.params.at("compressor.b").value;
  const Tensor& wd = cov.params.at("decompressor.W").value;
  const Tensor& bd = cov.params.at("decompressor.b").value;
  double se = 0;
  for (std::size_t r = 0; r < y.rows(); ++r) {
    std::vector<double> z(16);
    for (std::size_t j = 0; j < 16; ++j) {
      z[j] = bc[j];
      for (std::size_t i = 0; i < 32; ++i) z[j] += y.at(r, i) * wc.at(i, j);
    }
    for (std::size_t j = 0; j < 32; ++j) {
      double v = bd[j];
      for (std::size_t i = 0; i < 16; ++i) v += z[i] * wd.at(i, j);
      se += (v - y.at(r, j)) * (v - y.at(r, j));
    }
  }
  CHECK(cov.manifest.at("mse").get<double>() == doctest::Approx(se / static_cast<double>(y.size())).epsilon(1e-9));
  CHECK(covert_reconstruction_mse(cov, y) == doctest::Approx(se / static_cast<double>(y.size())).epsilon(1e-9));

  const double acc = clean_accuracy(CodecPipeline{&fixture::small_normal(), nullptr, &cov, std::nullopt});
  CHECK(acc > 0.5);
  CHECK_THROWS_AS(train_covert_compressor(fixture::small_data(), reg, 0.5, fixture::small_train_options(1), co, 4),
                  Error);
}
