#include "semcom/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "semcom/error.hpp"

namespace semcom {

namespace {

using nlohmann::json;

// Reads typed fields from one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(ErrorCode::kConfig, "config: " + label() + " must be an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      fail(ErrorCode::kConfig, "config: bad value type for " + qualified(key));
    }
  }

  bool has(const char* key) const { return j_.contains(key); }
  void mark(const char* key) { seen_.insert(key); }

  Section child(const char* key) {
    seen_.insert(key);
    return Section(j_.at(key), qualified(key));
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) fail(ErrorCode::kConfig, "config: unknown key " + qualified(k.c_str()));
  }

 private:
  std::string label() const { return path_.empty() ? "top level" : path_; }
  std::string qualified(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& j_;
  std::string path_;
  std::set<std::string, std::less<>> seen_;
};

template <typename Fn>
void section(Section& parent, const char* key, Fn&& fn) {
  if (!parent.has(key)) {
    parent.mark(key);
    return;
  }
  Section s = parent.child(key);
  fn(s);
  s.finish();
}

}  // namespace

void ExperimentConfig::validate() const {
  require(dataset.num_classes >= 2 && dataset.num_classes <= kGlyphCount, ErrorCode::kConfig,
          "config: dataset.num_classes must be in [2, 16]");
  require(dataset.n_train > 0 && dataset.n_test > 0, ErrorCode::kConfig, "config: dataset sizes must be positive");
  require(training.epochs >= 0 && training.batch_size > 0, ErrorCode::kConfig,
          "config: training.epochs >= 0 and batch_size > 0 required");
  require(training.adam.lr > 0.0, ErrorCode::kConfig, "config: training.lr must be positive");
  require(training.snr_min_db <= training.snr_max_db, ErrorCode::kConfig, "config: snr_min_db > snr_max_db");
  require(sdm.epsilon > 0.0, ErrorCode::kConfig, "config: sdm.epsilon must be positive");
  require(!snr_grid.empty(), ErrorCode::kConfig, "config: snr_grid is empty");
  require(std::is_sorted(snr_grid.begin(), snr_grid.end()), ErrorCode::kConfig, "config: snr_grid must be ascending");
  require(!rho_grid.empty(), ErrorCode::kConfig, "config: covert.rho_grid is empty");
  for (double r : rho_grid) compressed_dim(training.dims.semantic, r);
  compressed_dim(training.dims.semantic, combined_rho);
  try {
    semcom::validate(warden);
  } catch (const Error& e) {
    fail(ErrorCode::kConfig, std::string("config: ") + e.what());
  }
  require(gate.samples > 0 && gate.batch_size > 0 && gate.penalty >= 0.0, ErrorCode::kConfig,
          "config: gate.samples/batch_size must be positive and penalty non-negative");
  require(attacks.source_epsilon >= 0.0 && attacks.channel_epsilon >= 0.0, ErrorCode::kConfig,
          "config: attack budgets must be non-negative");
  require(eavesdropper.epochs >= 0, ErrorCode::kConfig, "config: eavesdropper.epochs must be >= 0");
}

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig c;
  Section top(j, "");
  top.read("seed", c.seed);
  top.read("snr_grid", c.snr_grid);
  top.read("combined_rho", c.combined_rho);
  section(top, "dataset", [&](Section& s) {
    s.read("num_classes", c.dataset.num_classes);
    s.read("n_train", c.dataset.n_train);
    s.read("n_test", c.dataset.n_test);
    s.read("noise_sigma", c.dataset.noise_sigma);
    s.read("max_shift_px", c.dataset.max_shift_px);
    s.read("scale_jitter", c.dataset.scale_jitter);
    s.read("background", c.dataset.background);
    s.read("foreground", c.dataset.foreground);
    std::string folder;
    s.read("image_folder", folder);
    if (!folder.empty()) c.image_folder = folder;
  });
  section(top, "training", [&](Section& s) {
    s.read("epochs", c.training.epochs);
    s.read("batch_size", c.training.batch_size);
    s.read("lr", c.training.adam.lr);
    s.read("snr_min_db", c.training.snr_min_db);
    s.read("snr_max_db", c.training.snr_max_db);
  });
  section(top, "sdm", [&](Section& s) {
    s.read("epsilon", c.sdm.epsilon);
    s.read("pgd_steps", c.sdm.pgd_steps);
    s.read("step_size", c.sdm.step_size);
    s.read("beta", c.sdm.beta);
    s.read("random_start", c.sdm.random_start);
    s.read("channel_epsilon", c.sdm.channel_epsilon);
    s.read("channel_steps", c.sdm.channel_steps);
    s.read("channel_warmup_epochs", c.sdm.channel_warmup_epochs);
  });
  section(top, "private", [&](Section& s) {
    s.read("secret_seed", c.privacy.secret_seed);
    s.read("confusion_weight", c.privacy.confusion_weight);
    s.read("reconstruction_weight", c.privacy.reconstruction_weight);
  });
  section(top, "covert", [&](Section& s) {
    s.read("xi", c.warden.xi);
    s.read("warden_hz", c.warden.warden_hz);
    s.read("rate_bps_hz", c.warden.rate_bps_hz);
    s.read("bandwidth_hz", c.warden.bandwidth_hz);
    s.read("bits_per_symbol", c.warden.bits_per_symbol);
    s.read("session_messages", c.warden.session_messages);
    s.read("epochs", c.covert_training.epochs);
    s.read("channel_epochs", c.covert_training.channel_epochs);
    s.read("task_weight", c.covert_training.task_weight);
    s.read("rho_grid", c.rho_grid);
  });
  section(top, "gate", [&](Section& s) {
    s.read("samples", c.gate.samples);
    s.read("penalty", c.gate.penalty);
    s.read("epochs", c.gate.epochs);
    s.read("batch_size", c.gate.batch_size);
    s.read("lr", c.gate.adam.lr);
  });
  section(top, "attacks", [&](Section& s) {
    s.read("source_epsilon", c.attacks.source_epsilon);
    s.read("source_steps", c.attacks.source_steps);
    s.read("channel_epsilon", c.attacks.channel_epsilon);
    s.read("channel_steps", c.attacks.channel_steps);
    s.read("query_budget", c.attacks.query_budget);
    s.read("blackbox_messages", c.attacks.blackbox_messages);
  });
  section(top, "eavesdropper", [&](Section& s) { s.read("epochs", c.eavesdropper.epochs); });
  top.finish();
  c.dataset.seed = c.seed;
  c.training.dims.classes = c.dataset.num_classes;
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) fail(ErrorCode::kIo, "cannot open config file: " + file.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, "config: invalid JSON in " + file.string() + ": " + e.what());
  }
  return parse_config(j);
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["snr_grid"] = c.snr_grid;
  j["combined_rho"] = c.combined_rho;
  j["dataset"] = {{"num_classes", c.dataset.num_classes},   {"n_train", c.dataset.n_train},
                  {"n_test", c.dataset.n_test},             {"noise_sigma", c.dataset.noise_sigma},
                  {"max_shift_px", c.dataset.max_shift_px}, {"scale_jitter", c.dataset.scale_jitter},
                  {"background", c.dataset.background},     {"foreground", c.dataset.foreground}};
  if (c.image_folder) j["dataset"]["image_folder"] = c.image_folder->string();
  j["training"] = {{"epochs", c.training.epochs},
                   {"batch_size", c.training.batch_size},
                   {"lr", c.training.adam.lr},
                   {"snr_min_db", c.training.snr_min_db},
                   {"snr_max_db", c.training.snr_max_db}};
  j["sdm"] = {{"epsilon", c.sdm.epsilon},
              {"pgd_steps", c.sdm.pgd_steps},
              {"step_size", c.sdm.step_size},
              {"beta", c.sdm.beta},
              {"random_start", c.sdm.random_start},
              {"channel_epsilon", c.sdm.channel_epsilon},
              {"channel_steps", c.sdm.channel_steps},
              {"channel_warmup_epochs", c.sdm.channel_warmup_epochs}};
  j["private"] = {{"secret_seed", c.privacy.secret_seed},
                  {"confusion_weight", c.privacy.confusion_weight},
                  {"reconstruction_weight", c.privacy.reconstruction_weight}};
  j["covert"] = {{"xi", c.warden.xi},
                 {"warden_hz", c.warden.warden_hz},
                 {"rate_bps_hz", c.warden.rate_bps_hz},
                 {"bandwidth_hz", c.warden.bandwidth_hz},
                 {"bits_per_symbol", c.warden.bits_per_symbol},
                 {"session_messages", c.warden.session_messages},
                 {"epochs", c.covert_training.epochs},
                 {"channel_epochs", c.covert_training.channel_epochs},
                 {"task_weight", c.covert_training.task_weight},
                 {"rho_grid", c.rho_grid}};
  j["gate"] = {{"samples", c.gate.samples},
               {"penalty", c.gate.penalty},
               {"epochs", c.gate.epochs},
               {"batch_size", c.gate.batch_size},
               {"lr", c.gate.adam.lr}};
  j["attacks"] = {{"source_epsilon", c.attacks.source_epsilon},   {"source_steps", c.attacks.source_steps},
                  {"channel_epsilon", c.attacks.channel_epsilon}, {"channel_steps", c.attacks.channel_steps},
                  {"query_budget", c.attacks.query_budget},       {"blackbox_messages", c.attacks.blackbox_messages}};
  j["eavesdropper"] = {{"epochs", c.eavesdropper.epochs}};
  return j;
}

}  // namespace semcom
