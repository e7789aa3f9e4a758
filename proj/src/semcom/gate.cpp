#include "semcom/gate.hpp"

#include <algorithm>

#include "semcom/error.hpp"

namespace semcom {

namespace {

constexpr std::size_t idx(ExpertKind k) { return static_cast<std::size_t>(k); }

std::vector<ExpertKind> registered_kinds(const ExpertRegistry& registry) {
  std::vector<ExpertKind> kinds;
  for (const auto& [slot, ex] : registry)
    if (std::find(kinds.begin(), kinds.end(), ex.kind) == kinds.end()) kinds.push_back(ex.kind);
  std::sort(kinds.begin(), kinds.end());
  return kinds;
}

bool contains(std::span<const ExpertKind> kinds, ExpertKind k) {
  return std::find(kinds.begin(), kinds.end(), k) != kinds.end();
}

struct GateBatch {
  Tensor inputs;
  Tensor targets;
};

GateBatch make_examples(const GateModel& model, const Tensor& images, std::size_t n, Rng& rng) {
  require(images.rows() > 0 && images.cols() == kImagePixels, ErrorCode::kInvalidArgument,
          "gate training needs a non-empty 16x16 image set");
  const std::vector<SecurityRequirement> psrs = sample_requirements(n, rng);
  GateBatch b{Tensor({n, kGateInputWidth}), Tensor({n, model.outputs.size()})};
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t pick = static_cast<std::size_t>(rng.below(images.rows()));
    const Tensor in = encode_requirements(psrs[i], images.row(pick));
    std::copy(in.data().begin(), in.data().end(), b.inputs.row(i).begin());
    const auto label = requirement_label(psrs[i], model.outputs);
    for (std::size_t j = 0; j < model.outputs.size(); ++j) b.targets.at(i, j) = label[idx(model.outputs[j])];
  }
  return b;
}

ad::Var gate_logits(ad::Tape& t, const Binding& b, ad::Var x) { return mlp(t, b, "gate", x); }

void fit(GateModel& model, const GateBatch& data, const GateTrainOptions& o, std::uint64_t seed) {
  Batcher batches(data.inputs.rows(), o.batch_size, Rng(seed, "gate/batches"));
  std::uint64_t step = 0;
  for (int e = 0; e < o.epochs; ++e) {
    for (const auto& rows : batches.next_epoch()) {
      model.params.zero_grad();
      ad::Tape t;
      ad::Var logits = gate_logits(t, Binding::trainable(model.params), t.constant(gather_rows(data.inputs, rows)));
      ad::Var loss = ad::bce_with_logits(logits, gather_rows(data.targets, rows));
      if (o.penalty != 0.0) {
        const double per_row = 1.0 / static_cast<double>(rows.size());
        loss = ad::add(loss, ad::scale(ad::sum(ad::sigmoid(logits)), o.penalty * per_row));
      }
      t.backward(loss);
      adam_step(model.params, o.adam, ++step);
    }
  }
  model.params.round_to_float();
}

void check_frozen(const std::map<std::string, std::uint64_t>& before, const ExpertRegistry& registry) {
  const auto after = registry.hashes();
  for (const auto& [slot, h] : before) {
    auto it = after.find(slot);
    if (it == after.end() || it->second != h)
      fail(ErrorCode::kInvariantViolation, "expert parameters changed during gate training: " + slot);
  }
}

}  // namespace

void SecurityRequirement::validate() const {
  if (covert_level)
    require(*covert_level >= 0 && *covert_level < static_cast<int>(kCovertLevels.size()),
            ErrorCode::kInvalidArgument, "covert level index out of range: " + std::to_string(*covert_level));
}

std::vector<SecurityRequirement> requirement_grid() {
  std::vector<SecurityRequirement> out;
  for (int flags = 0; flags < 8; ++flags) {
    SecurityRequirement p;
    p.robustness = flags & 1;
    p.confidentiality = flags & 4;
    if (!(flags & 2)) {
      out.push_back(p);
      continue;
    }
    for (int l = 0; l < static_cast<int>(kCovertLevels.size()); ++l) {
      p.covert_level = l;
      out.push_back(p);
    }
  }
  return out;
}

Tensor encode_requirements(const SecurityRequirement& psr, std::span<const double> image) {
  psr.validate();
  require(image.size() == kImagePixels, ErrorCode::kShapeMismatch,
          "gate input image must have " + std::to_string(kImagePixels) + " pixels");
  Tensor v({1, kGateInputWidth});
  v[0] = psr.robustness ? 1.0 : 0.0;
  v[1] = psr.covertness() ? 1.0 : 0.0;
  v[2] = psr.covertness() ? static_cast<double>(*psr.covert_level + 1) / static_cast<double>(kCovertLevels.size())
                          : 0.0;
  v[3] = psr.confidentiality ? 1.0 : 0.0;
  constexpr std::size_t cell = kImageSide / 4;
  for (std::size_t by = 0; by < 4; ++by) {
    for (std::size_t bx = 0; bx < 4; ++bx) {
      double s = 0.0;
      for (std::size_t y = 0; y < cell; ++y)
        for (std::size_t x = 0; x < cell; ++x) s += image[(by * cell + y) * kImageSide + bx * cell + x];
      v[kPsrWidth + by * 4 + bx] = s / static_cast<double>(cell * cell);
    }
  }
  return v;
}

bool GatingDecision::has(ExpertKind k) const noexcept {
  return std::find(selected.begin(), selected.end(), k) != selected.end();
}

std::array<double, kExpertKindCount> requirement_label(const SecurityRequirement& psr,
                                                       std::span<const ExpertKind> available) {
  std::array<double, kExpertKindCount> y{};
  const bool robust = psr.robustness && contains(available, ExpertKind::kRobust);
  const bool priv = psr.confidentiality && contains(available, ExpertKind::kPrivate);
  const bool covert = psr.covertness() && contains(available, ExpertKind::kCovert);
  y[idx(ExpertKind::kRobust)] = robust;
  y[idx(ExpertKind::kPrivate)] = priv;
  y[idx(ExpertKind::kCovert)] = covert;
  y[idx(ExpertKind::kNormal)] = !(robust || priv || covert);
  return y;
}

std::array<double, kExpertKindCount> requirement_label(const SecurityRequirement& psr) {
  static constexpr std::array<ExpertKind, kExpertKindCount> all = {ExpertKind::kNormal, ExpertKind::kRobust,
                                                                   ExpertKind::kPrivate, ExpertKind::kCovert};
  return requirement_label(psr, all);
}

std::vector<ExpertKind> label_set(const SecurityRequirement& psr, std::span<const ExpertKind> available) {
  const auto y = requirement_label(psr, available);
  std::vector<ExpertKind> out;
  for (std::size_t k = 0; k < kExpertKindCount; ++k)
    if (y[k] > 0.5) out.push_back(static_cast<ExpertKind>(k));
  return out;
}

GateModel GateModel::init(std::vector<ExpertKind> outputs, std::uint64_t seed) {
  require(!outputs.empty(), ErrorCode::kInvalidArgument, "gate needs at least one output");
  GateModel m;
  m.outputs = std::move(outputs);
  Rng rng(seed, "gate/init");
  add_mlp(m.params, "gate", {kGateInputWidth, kGateHidden, m.outputs.size()}, rng);
  return m;
}

bool GateModel::scores_kind(ExpertKind k) const noexcept { return contains(outputs, k); }

GatingDecision gate_forward(const GateModel& model, std::span<const double> input) {
  require(input.size() == kGateInputWidth, ErrorCode::kShapeMismatch,
          "gate input has " + std::to_string(input.size()) + " entries, expected " + std::to_string(kGateInputWidth));
  ad::Tape t;
  const Tensor x({1, kGateInputWidth}, std::vector<double>(input.begin(), input.end()));
  const Tensor s = ad::sigmoid(gate_logits(t, Binding::frozen(model.params), t.constant(x))).value();
  GatingDecision d;
  for (std::size_t j = 0; j < model.outputs.size(); ++j) d.scores[idx(model.outputs[j])] = s[j];
  // Canonical order: semantic codec, private stage, covert stage.
  const bool robust = model.scores_kind(ExpertKind::kRobust) && d.scores[idx(ExpertKind::kRobust)] >= 0.5;
  if (robust)
    d.selected.push_back(ExpertKind::kRobust);
  else if (model.scores_kind(ExpertKind::kNormal) && d.scores[idx(ExpertKind::kNormal)] >= 0.5)
    d.selected.push_back(ExpertKind::kNormal);
  for (ExpertKind k : {ExpertKind::kPrivate, ExpertKind::kCovert})
    if (model.scores_kind(k) && d.scores[idx(k)] >= 0.5) d.selected.push_back(k);
  return d;
}

GatingDecision gate_decide(const GateModel& model, const SecurityRequirement& psr, std::span<const double> image) {
  const Tensor in = encode_requirements(psr, image);
  GatingDecision d = gate_forward(model, in.data());
  if (d.has(ExpertKind::kCovert) && psr.covertness()) d.rho = kCovertLevels[static_cast<std::size_t>(*psr.covert_level)];
  return d;
}

std::vector<SecurityRequirement> sample_requirements(std::size_t n, Rng& rng) {
  std::vector<SecurityRequirement> out(n);
  for (auto& p : out) {
    const auto flags = rng.below(8);
    p.robustness = flags & 1;
    p.confidentiality = flags & 4;
    if (flags & 2) p.covert_level = static_cast<int>(rng.below(kCovertLevels.size()));
  }
  return out;
}

GateModel train_gate(const ExpertRegistry& registry, const Tensor& images, const GateTrainOptions& o,
                     std::uint64_t seed) {
  require(o.samples > 0, ErrorCode::kInvalidArgument, "gate training needs samples > 0");
  require(o.penalty >= 0.0, ErrorCode::kInvalidArgument, "selection penalty must be non-negative");
  registry.require_kind(ExpertKind::kNormal);
  const auto before = registry.hashes();
  GateModel model = GateModel::init(registered_kinds(registry), seed);
  Rng rng(seed, "gate/data");
  fit(model, make_examples(model, images, o.samples, rng), o, seed);
  check_frozen(before, registry);
  return model;
}

GateEval evaluate_gate(const GateModel& model, const Tensor& images, std::size_t n, std::uint64_t seed) {
  require(n > 0, ErrorCode::kInvalidArgument, "gate evaluation needs n > 0");
  Rng rng(seed, "gate/heldout");
  const std::vector<SecurityRequirement> psrs = sample_requirements(n, rng);
  GateEval ev;
  std::size_t hits = 0, selected = 0;
  for (const auto& p : psrs) {
    const std::size_t pick = static_cast<std::size_t>(rng.below(images.rows()));
    const GatingDecision d = gate_decide(model, p, images.row(pick));
    std::vector<ExpertKind> got = d.selected;
    std::sort(got.begin(), got.end());
    selected += got.size();
    if (got == label_set(p, model.outputs))
      ++hits;
    else
      ev.mismatches.push_back(p);
  }
  ev.exact_match = static_cast<double>(hits) / static_cast<double>(n);
  ev.mean_selected = static_cast<double>(selected) / static_cast<double>(n);
  return ev;
}

GateModel extend_gate(const GateModel& model, ExpertKind kind) {
  require(!model.scores_kind(kind), ErrorCode::kInvalidArgument,
          "gate already scores expert kind " + std::string(to_string(kind)));
  GateModel out;
  out.outputs = model.outputs;
  out.outputs.push_back(kind);
  for (const Parameter& p : model.params) {
    if (p.name == "gate.1.W") {
      const std::size_t rows = p.value.rows(), cols = p.value.cols();
      Tensor w({rows, cols + 1});
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) w.at(r, c) = p.value.at(r, c);
      out.params.add(p.name, std::move(w));
    } else if (p.name == "gate.1.b") {
      std::vector<double> b(p.value.data().begin(), p.value.data().end());
      b.push_back(-2.0);
      const std::size_t n = b.size();
      out.params.add(p.name, Tensor({n}, std::move(b)));
    } else {
      out.params.add(p.name, p.value);
    }
  }
  return out;
}

GateModel register_expert_and_finetune(const GateModel& model, ExpertRegistry& registry, TrainedExpert expert,
                                       const Tensor& images, const GateTrainOptions& o, std::uint64_t seed) {
  const ExpertKind kind = expert.kind;
  for (const auto& [slot, ex] : registry)
    require(ex.kind != kind, ErrorCode::kInvalidArgument,
            "expert kind already registered: " + std::string(to_string(kind)));
  const auto before = registry.hashes();
  registry.put(std::move(expert));
  GateModel out = extend_gate(model, kind);
  Rng rng(seed, "gate/finetune");
  fit(out, make_examples(out, images, o.samples, rng), o, stream_seed(seed, "finetune"));
  check_frozen(before, registry);
  return out;
}

CodecPipeline compose_pipeline(const GatingDecision& d, const ExpertRegistry& registry,
                               std::optional<std::uint64_t> secret_seed) {
  CodecPipeline p;
  p.semantic = &registry.require_kind(d.has(ExpertKind::kRobust) ? ExpertKind::kRobust : ExpertKind::kNormal);
  if (d.has(ExpertKind::kPrivate)) {
    p.privacy = &registry.require_kind(ExpertKind::kPrivate);
    p.secret_seed = secret_seed;
  }
  if (d.has(ExpertKind::kCovert)) {
    require(d.rho.has_value(), ErrorCode::kInvalidArgument, "covert stage selected without a compression ratio");
    p.covert = &registry.require_kind(ExpertKind::kCovert, *d.rho);
  }
  p.validate();
  return p;
}

}  // namespace semcom
