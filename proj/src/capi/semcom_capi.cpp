#include "semcom/semcom.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <optional>
#include <string>

#include "semcom/error.hpp"
#include "semcom/experiments.hpp"

struct semcom_session {
  semcom::ExperimentConfig cfg;
  std::optional<std::filesystem::path> checkpoint_path;
  semcom::Checkpoint ck;
  std::optional<semcom::DatasetSplit> data;

  const semcom::DatasetSplit& dataset() {
    if (!data) data = semcom::make_dataset(cfg);
    return *data;
  }
};

namespace {

thread_local std::string g_last_error;

semcom_status status_of(semcom::ErrorCode code) { return static_cast<semcom_status>(static_cast<int>(code)); }

template <typename Fn>
semcom_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return SEMCOM_OK;
  } catch (const semcom::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = std::string("invalid JSON: ") + e.what();
    return SEMCOM_ERR_INVALID_ARGUMENT;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SEMCOM_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return SEMCOM_ERR_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void need(const void* p, const char* what) {
  semcom::require(p != nullptr, semcom::ErrorCode::kInvalidArgument, std::string(what) + " must not be NULL");
}

}  // namespace

extern "C" {

const char* semcom_version(void) { return "1.0.0"; }

const char* semcom_status_name(semcom_status status) {
  switch (status) {
    case SEMCOM_OK: return "ok";
    case SEMCOM_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case SEMCOM_ERR_SHAPE_MISMATCH: return "shape_mismatch";
    case SEMCOM_ERR_MISSING_EXPERT: return "missing_expert";
    case SEMCOM_ERR_IO: return "io";
    case SEMCOM_ERR_CONFIG: return "config";
    case SEMCOM_ERR_BAD_MAGIC: return "bad_magic";
    case SEMCOM_ERR_BAD_VERSION: return "bad_version";
    case SEMCOM_ERR_TRUNCATED: return "truncated";
    case SEMCOM_ERR_INTEGRITY: return "integrity";
    case SEMCOM_ERR_INVARIANT: return "invariant_violation";
    case SEMCOM_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* semcom_last_error(void) { return g_last_error.c_str(); }

semcom_status semcom_session_open(const char* config_path, const char* checkpoint_path, uint64_t seed,
                                  int override_seed, semcom_session** out) {
  return guarded([&] {
    need(out, "out");
    *out = nullptr;
    auto s = std::make_unique<semcom_session>();
    if (config_path) s->cfg = semcom::load_config(config_path);
    if (override_seed) semcom::set_master_seed(s->cfg, seed);
    if (checkpoint_path) {
      s->checkpoint_path = checkpoint_path;
      if (std::filesystem::exists(*s->checkpoint_path)) s->ck = semcom::load_checkpoint(*s->checkpoint_path);
    }
    *out = s.release();
  });
}

void semcom_session_close(semcom_session* session) { delete session; }

semcom_status semcom_session_save(semcom_session* session, const char* path) {
  return guarded([&] {
    need(session, "session");
    std::filesystem::path target;
    if (path) {
      target = path;
    } else {
      semcom::require(session->checkpoint_path.has_value(), semcom::ErrorCode::kInvalidArgument,
                      "no checkpoint path: pass one to save or open");
      target = *session->checkpoint_path;
    }
    semcom::save_checkpoint(session->ck, target);
  });
}

semcom_status semcom_generate_data(semcom_session* session, const char* out_path, char** summary_json) {
  return guarded([&] {
    need(session, "session");
    const auto& data = session->dataset();
    if (out_path) semcom::write_dataset_csv(data, out_path);
    if (summary_json) *summary_json = dup_string(semcom::dataset_summary(data).dump(2));
  });
}

semcom_status semcom_train_expert(semcom_session* session, const char* kind, double rho, int has_rho) {
  return guarded([&] {
    need(session, "session");
    need(kind, "kind");
    const semcom::ExpertKind k = semcom::parse_expert_kind(kind);
    semcom::require(k != semcom::ExpertKind::kCovert || has_rho, semcom::ErrorCode::kInvalidArgument,
                    "the covert expert needs a compression ratio (--rho)");
    std::optional<double> r;
    if (has_rho) r = rho;
    semcom::train_expert(session->ck, session->cfg, session->dataset(), k, r);
  });
}

semcom_status semcom_train_gate(semcom_session* session) {
  return guarded([&] {
    need(session, "session");
    semcom::train_gate(session->ck, session->cfg, session->dataset());
  });
}

semcom_status semcom_run_scenario(semcom_session* session, char scenario_id, char** csv) {
  return guarded([&] {
    need(session, "session");
    need(csv, "csv");
    *csv = nullptr;
    const auto rows = semcom::run_scenario(scenario_id, session->cfg, session->dataset(), session->ck);
    *csv = dup_string(semcom::format_csv(rows));
  });
}

semcom_status semcom_report(semcom_session* session, char** csv) {
  return guarded([&] {
    need(session, "session");
    need(csv, "csv");
    *csv = nullptr;
    const auto rows = semcom::run_all_scenarios(session->cfg, session->dataset(), session->ck);
    *csv = dup_string(semcom::format_csv(rows));
  });
}

semcom_status semcom_attack_eval(semcom_session* session, const char* spec_json, char** csv) {
  return guarded([&] {
    need(session, "session");
    need(spec_json, "spec_json");
    need(csv, "csv");
    *csv = nullptr;
    nlohmann::json spec;
    try {
      spec = nlohmann::json::parse(spec_json);
    } catch (const nlohmann::json::exception& e) {
      semcom::fail(semcom::ErrorCode::kConfig, std::string("attack spec is not valid JSON: ") + e.what());
    }
    const auto rows = semcom::attack_eval(spec, session->cfg, session->dataset(), session->ck);
    *csv = dup_string(semcom::format_csv(rows));
  });
}

semcom_status semcom_describe(const semcom_session* session, char** json) {
  return guarded([&] {
    need(session, "session");
    need(json, "json");
    nlohmann::json j;
    j["seed"] = session->cfg.seed;
    j["experts"] = nlohmann::json::array();
    for (const auto& [slot, ex] : session->ck.registry) {
      char hash[17];
      std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(ex.hash()));
      j["experts"].push_back({{"slot", slot},
                              {"kind", std::string(semcom::to_string(ex.kind))},
                              {"rho", ex.rho},
                              {"parameters", ex.params.scalar_count()},
                              {"hash", hash}});
    }
    if (session->ck.gate) {
      j["gate"] = nlohmann::json::array();
      for (semcom::ExpertKind k : session->ck.gate->outputs) j["gate"].push_back(std::string(semcom::to_string(k)));
    } else {
      j["gate"] = nullptr;
    }
    *json = dup_string(j.dump(2));
  });
}

void semcom_free_string(char* s) { std::free(s); }

}  // extern "C"
