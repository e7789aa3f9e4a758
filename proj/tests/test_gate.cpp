#include <set>

#include "doctest.h"
#include "semcom/error.hpp"
#include "semcom/gate.hpp"

using namespace semcom;

namespace {

ExpertRegistry dummy_registry(bool with_private = true) {
  CodecDims d;
  Rng r(1, "test/gate/experts");
  ExpertRegistry reg;
  reg.put({ExpertKind::kNormal, "normal", 1.0, init_semantic_codec(d, r), {}});
  reg.put({ExpertKind::kRobust, "robust", 1.0, init_semantic_codec(d, r), {}});
  if (with_private) reg.put({ExpertKind::kPrivate, "private", 1.0, init_privacy_stage(d, r), {}});
  for (double rho : kCovertLevels) reg.put({ExpertKind::kCovert, covert_slot(rho), rho, init_covert_stage(d, rho, r), {}});
  return reg;
}

const Tensor& images() {
  static const Tensor t = [] {
    SynthSignsOptions o;
    o.n_train = 200;
    o.n_test = 16;
    return generate_synthsigns(o).train.images;
  }();
  return t;
}

}  // namespace

TEST_CASE("requirement grid covers every flag combination and level") {
  const auto g = requirement_grid();
  CHECK(g.size() == 16);
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = i + 1; j < g.size(); ++j) CHECK(!(g[i] == g[j]));
  std::size_t covert = 0;
  for (const auto& p : g) covert += p.covertness();
  CHECK(covert == 12);
}

TEST_CASE("label rules") {
  using K = ExpertKind;
  auto lab = [](bool r, bool c, std::optional<int> lvl) {
    SecurityRequirement p;
    p.robustness = r;
    p.confidentiality = c;
    p.covert_level = lvl;
    return requirement_label(p);
  };
  auto at = [](const std::array<double, kExpertKindCount>& y, K k) { return y[static_cast<std::size_t>(k)]; };
  const auto none = lab(false, false, std::nullopt);
  CHECK(at(none, K::kNormal) == 1.0);
  CHECK(at(none, K::kRobust) + at(none, K::kPrivate) + at(none, K::kCovert) == 0.0);
  const auto all = lab(true, true, 2);
  CHECK(at(all, K::kNormal) == 0.0);
  CHECK(at(all, K::kRobust) == 1.0);
  CHECK(at(all, K::kPrivate) == 1.0);
  CHECK(at(all, K::kCovert) == 1.0);

  // A flag whose expert is missing counts as unset.
  SecurityRequirement p;
  p.confidentiality = true;
  const std::vector<K> avail{K::kNormal, K::kRobust};
  CHECK(label_set(p, avail) == std::vector<K>{K::kNormal});

  SecurityRequirement bad;
  bad.covert_level = 3;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("gate input encoding") {
  SecurityRequirement p;
  p.robustness = true;
  p.covert_level = 1;
  std::vector<double> img(kImagePixels);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<double>(i % 16) / 15.0;  // depends on x only
  const Tensor v = encode_requirements(p, img);
  CHECK(v.size() == kGateInputWidth);
  CHECK(v[0] == 1.0);
  CHECK(v[1] == 1.0);
  CHECK(v[2] == doctest::Approx(2.0 / 3.0));
  CHECK(v[3] == 0.0);
  for (std::size_t by = 0; by < 4; ++by)
    for (std::size_t bx = 0; bx < 4; ++bx) {
      const double mean_x = (4.0 * static_cast<double>(bx) + 1.5) / 15.0;
      CHECK(v[4 + by * 4 + bx] == doctest::Approx(mean_x));
    }
  CHECK_THROWS_AS(encode_requirements(p, std::vector<double>(10)), Error);
}

TEST_CASE("trained gate matches the label rule and leaves experts untouched") {
  const ExpertRegistry reg = dummy_registry();
  const auto before = reg.hashes();
  const GateModel gate = train_gate(reg, images(), GateTrainOptions{}, 42);
  CHECK(reg.hashes() == before);
  CHECK(gate.outputs.size() == 4);
  const GateEval ev = evaluate_gate(gate, images(), 1000, 7);
  CHECK(ev.exact_match >= 0.95);
  for (const auto& p : requirement_grid()) {
    const GatingDecision d = gate_decide(gate, p, images().row(0));
    if (d.has(ExpertKind::kCovert) && p.covertness())
      CHECK(*d.rho == kCovertLevels[static_cast<std::size_t>(*p.covert_level)]);
  }
  CHECK(train_gate(reg, images(), GateTrainOptions{}, 42).params.hash() == gate.params.hash());

  ExpertRegistry empty;
  CHECK_THROWS_AS(train_gate(empty, images(), GateTrainOptions{}, 1), Error);
}

TEST_CASE("zero-column extension keeps existing decisions bit-identical") {
  ExpertRegistry reg = dummy_registry(false);
  GateTrainOptions o;
  o.epochs = 20;
  const GateModel gate = train_gate(reg, images(), o, 3);
  CHECK(!gate.scores_kind(ExpertKind::kPrivate));
  const GateModel ext = extend_gate(gate, ExpertKind::kPrivate);
  CHECK(ext.outputs.size() == gate.outputs.size() + 1);
  for (const auto& p : requirement_grid())
    for (std::size_t i = 0; i < 20; ++i) {
      const GatingDecision a = gate_decide(gate, p, images().row(i));
      const GatingDecision b = gate_decide(ext, p, images().row(i));
      CHECK(a.selected == b.selected);
      for (ExpertKind k : gate.outputs)
        CHECK(a.scores[static_cast<std::size_t>(k)] == b.scores[static_cast<std::size_t>(k)]);
      CHECK(!b.has(ExpertKind::kPrivate));
    }
  CHECK_THROWS_AS(extend_gate(ext, ExpertKind::kPrivate), Error);

  // Fine-tuning after registration learns the new column; old experts keep their hashes.
  const auto before = reg.hashes();
  CodecDims d;
  Rng r(9, "test/gate/private");
  const GateModel tuned = register_expert_and_finetune(
      gate, reg, {ExpertKind::kPrivate, "private", 1.0, init_privacy_stage(d, r), {}}, images(), GateTrainOptions{}, 5);
  for (const auto& [slot, h] : before) CHECK(reg.hashes().at(slot) == h);
  CHECK(evaluate_gate(tuned, images(), 500, 8).exact_match >= 0.95);
  CHECK_THROWS_AS(register_expert_and_finetune(tuned, reg, reg.at("private"), images(), o, 5), Error);
}

TEST_CASE("composing a pipeline from a decision") {
  const ExpertRegistry reg = dummy_registry();
  GatingDecision d;
  d.selected = {ExpertKind::kRobust, ExpertKind::kPrivate, ExpertKind::kCovert};
  d.rho = 4.0;
  const CodecPipeline p = compose_pipeline(d, reg, 77);
  CHECK(p.semantic->kind == ExpertKind::kRobust);
  CHECK(p.privacy != nullptr);
  CHECK(p.covert->slot == "covert@4.00");
  CHECK(*p.secret_seed == 77);
  d.rho.reset();
  CHECK_THROWS_AS(compose_pipeline(d, reg, 77), Error);
  d.rho = 1.0;
  try {
    compose_pipeline(d, reg, 77);
    FAIL("missing covert slot accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kMissingExpert);
  }
  GatingDecision plain;
  plain.selected = {ExpertKind::kNormal};
  CHECK(compose_pipeline(plain, reg, std::nullopt).label() == "normal");
}
