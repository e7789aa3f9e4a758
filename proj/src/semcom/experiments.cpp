#include "semcom/experiments.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <tuple>

#include "semcom/error.hpp"

namespace semcom {

namespace {

using nlohmann::json;

// Eavesdropper training traffic uses its own message-index range.
constexpr std::uint64_t kInterceptMessageBase = 1ULL << 39;

std::string snr_key(double snr) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", snr);
  return buf;
}

std::uint64_t expert_seed(const ExperimentConfig& cfg, std::string_view slot) {
  return stream_seed(cfg.seed, "train/" + std::string(slot));
}

AttackSpec tamper_spec(AttackSurface surface, const ExperimentConfig& cfg, std::uint64_t seed) {
  AttackSpec s;
  s.surface = surface;
  s.seed = seed;
  if (surface == AttackSurface::kSource) {
    s.epsilon = cfg.attacks.source_epsilon;
    s.steps = cfg.attacks.source_steps;
  } else {
    s.epsilon = cfg.attacks.channel_epsilon;
    s.steps = cfg.attacks.channel_steps;
  }
  return s;
}

struct Counts {
  double correct = 0.0;
  double eve_correct = 0.0;
  bool has_eve = false;
};

// Evaluates one pipeline on `test` at every SNR of the scenario.
std::vector<Counts> evaluate_pipeline(const CodecPipeline& p, const LabeledSet& test, const LabeledSet& train,
                                      const ScenarioSpec& s, const ExperimentConfig& cfg, std::uint64_t seed) {
  std::optional<AttackSpec> spec;
  if (s.tamper) spec = tamper_spec(*s.tamper, cfg, stream_seed(seed, "attack"));
  Tensor adv;
  if (spec && spec->surface == AttackSurface::kSource)
    adv = pgd_source(test.images, test.labels, p, *spec, message_range(kEvalMessageBase, test.size()));

  std::vector<Counts> out;
  for (double snr : s.snr_grid) {
    const std::uint64_t point = stream_seed(seed, "snr/" + snr_key(snr));
    std::optional<Eavesdropper> eve;
    if (s.eavesdropper) {
      Rng noise(point, "intercept");
      const Traffic traffic = intercept(p, train, kInterceptMessageBase, snr, noise);
      eve = train_eavesdropper(traffic, p, cfg.eavesdropper.epochs, stream_seed(point, "eavesdropper"));
    }
    const EvalResult r = evaluate_under_attack(p, test, spec, ChannelConfig{snr}, stream_seed(point, "channel"),
                                               eve ? &*eve : nullptr, adv.empty() ? nullptr : &adv);
    Counts c;
    c.correct = r.accuracy * static_cast<double>(test.size());
    if (r.eavesdropper_accuracy) {
      c.has_eve = true;
      c.eve_correct = *r.eavesdropper_accuracy * static_cast<double>(test.size());
    }
    out.push_back(c);
  }
  return out;
}

struct Group {
  CodecPipeline pipeline;
  std::vector<std::size_t> rows;
};

// Per-message gating; messages with the same decision share a pipeline.
std::vector<Group> gate_messages(const GateModel& gate, const SecurityRequirement& psr, const LabeledSet& test,
                                 const Checkpoint& ck, const ExperimentConfig& cfg) {
  std::map<std::string, Group> groups;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const GatingDecision d = gate_decide(gate, psr, test.images.row(i));
    CodecPipeline p = compose_pipeline(d, ck.registry, cfg.privacy.secret_seed);
    const std::string key = p.label();
    auto it = groups.find(key);
    if (it == groups.end()) it = groups.emplace(key, Group{p, {}}).first;
    it->second.rows.push_back(i);
  }
  std::vector<Group> out;
  for (auto& [k, g] : groups) out.push_back(std::move(g));
  std::stable_sort(out.begin(), out.end(), [](const Group& a, const Group& b) { return a.rows.size() > b.rows.size(); });
  return out;
}

void require_experts(const ScenarioSpec& s, const Checkpoint& ck) {
  ck.registry.require_kind(ExpertKind::kNormal);
  for (const auto& psr : s.requirements) {
    if (psr.robustness) ck.registry.require_kind(ExpertKind::kRobust);
    if (psr.confidentiality) ck.registry.require_kind(ExpertKind::kPrivate);
    if (psr.covertness())
      ck.registry.require_kind(ExpertKind::kCovert, kCovertLevels[static_cast<std::size_t>(*psr.covert_level)]);
  }
  require(ck.gate.has_value(), ErrorCode::kMissingExpert, "missing gating network: run train-gate first");
  for (const auto& psr : s.requirements)
    for (ExpertKind k : label_set(psr, std::vector<ExpertKind>{ExpertKind::kNormal, ExpertKind::kRobust,
                                                               ExpertKind::kPrivate, ExpertKind::kCovert}))
      require(ck.gate->scores_kind(k), ErrorCode::kMissingExpert,
              "gating network has no output for " + std::string(to_string(k)) + ": retrain or extend the gate");
}

int covert_level_index(double rho) {
  for (std::size_t i = 0; i < kCovertLevels.size(); ++i)
    if (std::abs(kCovertLevels[i] - rho) < 1e-9) return static_cast<int>(i);
  fail(ErrorCode::kConfig, "combined_rho must be one of the covert levels 1.33, 2.0, 4.0");
}

void emit(std::vector<MetricRow>& rows, char id, const std::string& set, double snr, const char* metric, double v,
          std::uint64_t seed) {
  rows.push_back({std::string(1, id), set, snr, metric, v, seed});
}

}  // namespace

void set_master_seed(ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.seed = seed;
  cfg.dataset.seed = seed;
}

DatasetSplit make_dataset(const ExperimentConfig& cfg) {
  if (cfg.image_folder) return load_image_folder(*cfg.image_folder);
  SynthSignsOptions o = cfg.dataset;
  o.seed = cfg.seed;
  return generate_synthsigns(o);
}

const TrainedExpert& train_expert(Checkpoint& ck, const ExperimentConfig& cfg, const DatasetSplit& data,
                                  ExpertKind kind, std::optional<double> rho) {
  require(kind == ExpertKind::kCovert || !rho, ErrorCode::kInvalidArgument, "--rho applies to the covert expert only");
  TrainOptions o = cfg.training;
  o.dims.classes = data.num_classes;
  TrainedExpert ex;
  switch (kind) {
    case ExpertKind::kNormal: ex = train_normal(data, o, expert_seed(cfg, "normal")); break;
    case ExpertKind::kRobust: ex = train_robust_sdm(data, o, cfg.sdm, expert_seed(cfg, "robust")); break;
    case ExpertKind::kPrivate:
      ex = train_private(data, ck.registry, o, cfg.privacy, expert_seed(cfg, "private"));
      break;
    case ExpertKind::kCovert:
      require(rho.has_value(), ErrorCode::kInvalidArgument, "covert expert needs a compression ratio");
      ex = train_covert_compressor(data, ck.registry, *rho, o, cfg.covert_training,
                                   expert_seed(cfg, covert_slot(*rho)));
      break;
  }
  const std::string slot = ex.slot;
  ck.registry.put(std::move(ex));
  ck.meta["seed"] = cfg.seed;
  return ck.registry.at(slot);
}

void train_gate(Checkpoint& ck, const ExperimentConfig& cfg, const DatasetSplit& data) {
  ck.gate = semcom::train_gate(ck.registry, data.train.images, cfg.gate, stream_seed(cfg.seed, "train/gate"));
}

ScenarioSpec scenario_spec(char id, const ExperimentConfig& cfg) {
  ScenarioSpec s;
  s.id = id;
  s.snr_grid = cfg.snr_grid;
  SecurityRequirement psr;
  const int combined = covert_level_index(cfg.combined_rho);
  switch (id) {
    case 'a': psr.robustness = true; s.tamper = AttackSurface::kSource; break;
    case 'b': psr.robustness = true; s.tamper = AttackSurface::kChannel; break;
    case 'c':
      s.warden = true;
      s.snr_grid = {12.0};
      for (int l = 0; l < static_cast<int>(kCovertLevels.size()); ++l) {
        SecurityRequirement p;
        p.covert_level = l;
        s.requirements.push_back(p);
      }
      return s;
    case 'd': psr.confidentiality = true; s.eavesdropper = true; break;
    case 'e':
      psr.robustness = true;
      psr.covert_level = combined;
      s.tamper = AttackSurface::kSource;
      s.warden = true;
      break;
    case 'f':
      psr.robustness = true;
      psr.covert_level = combined;
      s.tamper = AttackSurface::kChannel;
      s.warden = true;
      break;
    case 'g':
      psr.covert_level = combined;
      psr.confidentiality = true;
      s.warden = true;
      s.eavesdropper = true;
      break;
    case 'h':
      psr.robustness = true;
      psr.confidentiality = true;
      s.tamper = AttackSurface::kChannel;
      s.eavesdropper = true;
      break;
    default: fail(ErrorCode::kInvalidArgument, std::string("unknown scenario id '") + id + "' (expected a..h)");
  }
  s.requirements.push_back(psr);
  return s;
}

std::string expert_set_label(const CodecPipeline& p) { return "moe:" + p.label(); }

std::vector<MetricRow> run_scenario(char id, const ExperimentConfig& cfg, const DatasetSplit& data,
                                    const Checkpoint& ck) {
  const ScenarioSpec s = scenario_spec(id, cfg);
  require_experts(s, ck);
  const std::uint64_t base = stream_seed(cfg.seed, std::string("scenario/") + id);
  std::vector<MetricRow> rows;

  // Normal-codec comparator facing the same attacks.
  CodecPipeline normal;
  normal.semantic = &ck.registry.require_kind(ExpertKind::kNormal);
  const auto baseline = evaluate_pipeline(normal, data.test, data.train, s, cfg, base);
  const double n = static_cast<double>(data.test.size());
  for (std::size_t i = 0; i < s.snr_grid.size(); ++i) {
    emit(rows, id, "normal", s.snr_grid[i], "accuracy", baseline[i].correct / n, cfg.seed);
    if (baseline[i].has_eve)
      emit(rows, id, "normal", s.snr_grid[i], "eavesdropper_accuracy", baseline[i].eve_correct / n, cfg.seed);
    if (s.warden)
      emit(rows, id, "normal", s.snr_grid[i], "dfp", session_dfp(normal.symbol_count(), cfg.warden), cfg.seed);
  }

  for (const auto& psr : s.requirements) {
    const auto groups = gate_messages(*ck.gate, psr, data.test, ck, cfg);
    std::vector<Counts> total(s.snr_grid.size());
    for (const Group& g : groups) {
      const auto part = evaluate_pipeline(g.pipeline, data.test.subset(g.rows), data.train, s, cfg, base);
      for (std::size_t i = 0; i < part.size(); ++i) {
        total[i].correct += part[i].correct;
        total[i].eve_correct += part[i].eve_correct;
        total[i].has_eve = total[i].has_eve || part[i].has_eve;
      }
    }
    // The most common decision names the row set.
    const CodecPipeline& main = groups.front().pipeline;
    const std::string set = expert_set_label(main);
    for (std::size_t i = 0; i < s.snr_grid.size(); ++i) {
      const double snr = s.snr_grid[i];
      emit(rows, id, set, snr, "accuracy", total[i].correct / n, cfg.seed);
      if (total[i].has_eve) emit(rows, id, set, snr, "eavesdropper_accuracy", total[i].eve_correct / n, cfg.seed);
      if (s.warden) emit(rows, id, set, snr, "dfp", session_dfp(main.symbol_count(), cfg.warden), cfg.seed);
      if (id == 'c' && main.covert)
        emit(rows, id, set, snr, "mse",
             covert_reconstruction_mse(*main.covert, semantic_batch(data.test.images, *normal.semantic)), cfg.seed);
    }
  }
  return rows;
}

std::vector<MetricRow> run_all_scenarios(const ExperimentConfig& cfg, const DatasetSplit& data, const Checkpoint& ck) {
  const std::string ids = "abcdefgh";
  for (char id : ids) require_experts(scenario_spec(id, cfg), ck);
  std::vector<MetricRow> rows;
  for (char id : ids) {
    auto part = run_scenario(id, cfg, data, ck);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  return rows;
}

std::vector<MetricRow> attack_eval(const json& j, const ExperimentConfig& cfg, const DatasetSplit& data,
                                   const Checkpoint& ck) {
  static const std::set<std::string> known = {"surface", "mode",    "epsilon",  "steps",   "step_size",
                                              "query_budget", "seed", "experts", "snr_grid", "messages"};
  if (!j.is_object()) fail(ErrorCode::kConfig, "attack spec must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) fail(ErrorCode::kConfig, "attack spec: unknown key " + k);

  AttackSpec spec;
  std::vector<std::string> experts;
  std::vector<double> snrs = cfg.snr_grid;
  std::size_t messages = data.test.size();
  try {
    const std::string surface = j.value("surface", std::string("source"));
    const std::string mode = j.value("mode", std::string("whitebox"));
    if (surface == "source") {
      spec.surface = AttackSurface::kSource;
    } else if (surface == "channel") {
      spec.surface = AttackSurface::kChannel;
      spec.epsilon = cfg.attacks.channel_epsilon;
    } else {
      fail(ErrorCode::kConfig, "attack spec: surface must be source or channel");
    }
    if (mode == "whitebox") {
      spec.mode = AttackMode::kWhitebox;
    } else if (mode == "blackbox") {
      spec.mode = AttackMode::kBlackbox;
      spec.query_budget = cfg.attacks.query_budget;
      messages = std::min(messages, cfg.attacks.blackbox_messages);
    } else {
      fail(ErrorCode::kConfig, "attack spec: mode must be whitebox or blackbox");
    }
    spec.epsilon = j.value("epsilon", spec.epsilon);
    spec.steps = j.value("steps", spec.steps);
    spec.step_size = j.value("step_size", spec.step_size);
    spec.query_budget = j.value("query_budget", spec.query_budget);
    spec.seed = j.value("seed", cfg.seed);
    experts = j.value("experts", std::vector<std::string>{"normal"});
    snrs = j.value("snr_grid", snrs);
    messages = std::min<std::size_t>(j.value("messages", messages), data.test.size());
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, std::string("attack spec: ") + e.what());
  }
  require(messages > 0, ErrorCode::kConfig, "attack spec: messages must be positive");
  spec.validate();

  CodecPipeline p;
  for (const std::string& name : experts) {
    if (name == "normal" || name == "robust") {
      require(p.semantic == nullptr, ErrorCode::kInvalidArgument, "attack spec: normal and robust are exclusive");
      p.semantic = &ck.registry.require_kind(parse_expert_kind(name));
    } else if (name == "private") {
      p.privacy = &ck.registry.require_kind(ExpertKind::kPrivate);
      p.secret_seed = cfg.privacy.secret_seed;
    } else {
      p.covert = &ck.registry.at(name);
    }
  }
  if (!p.semantic) p.semantic = &ck.registry.require_kind(ExpertKind::kNormal);
  p.validate();

  std::vector<std::size_t> idx(messages);
  for (std::size_t i = 0; i < messages; ++i) idx[i] = i;
  const LabeledSet test = data.test.subset(idx);
  Tensor adv;
  if (spec.surface == AttackSurface::kSource && spec.mode == AttackMode::kWhitebox)
    adv = pgd_source(test.images, test.labels, p, spec, message_range(kEvalMessageBase, test.size()));
  else if (spec.mode == AttackMode::kBlackbox)
    adv = blackbox_source_batch(test.images, test.labels, p, spec, message_range(kEvalMessageBase, test.size()));

  std::vector<MetricRow> rows;
  const std::string set = p.label();
  for (double snr : snrs) {
    const EvalResult r = evaluate_under_attack(p, test, spec, ChannelConfig{snr},
                                               stream_seed(spec.seed, "snr/" + snr_key(snr)), nullptr,
                                               adv.empty() ? nullptr : &adv);
    rows.push_back({"attack-eval", set, snr, "accuracy", r.accuracy, spec.seed});
  }
  return rows;
}

std::string format_csv(std::vector<MetricRow> rows) {
  std::sort(rows.begin(), rows.end(), [](const MetricRow& a, const MetricRow& b) {
    return std::tie(a.scenario, a.expert_set, a.snr_db, a.metric) <
           std::tie(b.scenario, b.expert_set, b.snr_db, b.metric);
  });
  std::string out = "scenario,expert_set,snr_db,metric,value,seed\n";
  char buf[64];
  for (const MetricRow& r : rows) {
    out += r.scenario + "," + r.expert_set + "," + snr_key(r.snr_db) + "," + r.metric + ",";
    std::snprintf(buf, sizeof buf, "%.6f", r.value);
    out += buf;
    out += "," + std::to_string(r.seed) + "\n";
  }
  return out;
}

void write_csv(const std::vector<MetricRow>& rows, const std::filesystem::path& path) {
  const std::string text = format_csv(rows);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write CSV: " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) fail(ErrorCode::kIo, "failed writing CSV: " + path.string());
}

json dataset_summary(const DatasetSplit& data) {
  auto describe = [&](const LabeledSet& set) {
    std::vector<std::size_t> counts(static_cast<std::size_t>(data.num_classes));
    for (int y : set.labels) ++counts[static_cast<std::size_t>(y)];
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (double v : set.images.data()) {
      const auto bits = std::bit_cast<std::array<unsigned char, 4>>(static_cast<float>(v));
      h = fnv1a64(bits, h);
    }
    for (int y : set.labels) {
      const auto b = static_cast<unsigned char>(y);
      h = fnv1a64(std::span(&b, 1), h);
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    return json{{"size", set.size()}, {"class_counts", counts}, {"fnv1a64", hex}};
  };
  return {{"num_classes", data.num_classes},
          {"seed", data.seed},
          {"image_side", 16},
          {"train", describe(data.train)},
          {"test", describe(data.test)}};
}

void write_dataset_csv(const DatasetSplit& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write dataset: " + path.string());
  out << "split,label";
  for (std::size_t j = 0; j < data.train.images.cols(); ++j) out << ",p" << j;
  out << "\n";
  char buf[32];
  for (const auto& [name, set] : {std::pair{"train", &data.train}, std::pair{"test", &data.test}}) {
    for (std::size_t i = 0; i < set->size(); ++i) {
      out << name << "," << set->labels[i];
      for (double v : set->images.row(i)) {
        std::snprintf(buf, sizeof buf, ",%.6f", v);
        out << buf;
      }
      out << "\n";
    }
  }
  if (!out) fail(ErrorCode::kIo, "failed writing dataset: " + path.string());
}

}  // namespace semcom
