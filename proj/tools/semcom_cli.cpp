// Command-line front end. Talks to the simulator through the C API only.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "semcom/semcom.h"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct Session {
  semcom_session* s = nullptr;
  ~Session() { semcom_session_close(s); }
};

struct Owned {
  char* p = nullptr;
  ~Owned() { semcom_free_string(p); }
};

int report(semcom_status st) {
  std::cerr << "error (" << semcom_status_name(st) << "): " << semcom_last_error() << "\n";
  return st == SEMCOM_ERR_CONFIG ? kExitUsage : kExitRuntime;
}

bool emit(const char* text, const std::string& out) {
  if (out.empty()) {
    std::cout << text;
    return true;
  }
  std::ofstream f(out, std::ios::binary | std::ios::trunc);
  f << text;
  if (!f) {
    std::cerr << "error (io): cannot write " << out << "\n";
    return false;
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixture-of-experts semantic communication simulator"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  std::string config, checkpoint = "semcom.smck";
  app.add_option("--seed", seed, "Master seed (overrides the config)");
  app.add_option("--config", config, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--checkpoint", checkpoint, "Checkpoint file read and updated by the subcommands")
      ->capture_default_str();

  std::string data_out;
  auto* gen = app.add_subcommand("gen-data", "Generate the dataset and print its summary");
  gen->add_option("--out", data_out, "Also write the images as CSV");

  std::string expert;
  std::optional<double> rho;
  auto* train = app.add_subcommand("train", "Train one expert into the checkpoint");
  train->add_option("--expert", expert, "normal|robust|private|covert")
      ->required()
      ->check(CLI::IsMember({"normal", "robust", "private", "covert"}));
  train->add_option("--rho", rho, "Compression ratio of the covert expert");

  auto* gate = app.add_subcommand("train-gate", "Train the gating network on the registered experts");

  std::string spec;
  std::string eval_out;
  auto* attack = app.add_subcommand("attack-eval", "Evaluate pipelines under an attack described by JSON");
  attack->add_option("--spec", spec, "JSON text or path to a JSON file")->required();
  attack->add_option("--out", eval_out, "CSV output (stdout when omitted)");

  std::string id;
  std::string scenario_out;
  auto* scenario = app.add_subcommand("run-scenario", "Run one scenario of the matrix");
  scenario->add_option("--id", id, "a..h")->required()->check(CLI::IsMember({"a", "b", "c", "d", "e", "f", "g", "h"}));
  scenario->add_option("--out", scenario_out, "CSV output (stdout when omitted)");

  std::string report_out;
  auto* rep = app.add_subcommand("report", "Run every scenario into one CSV");
  rep->add_option("--out", report_out, "CSV output")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (app.exit(e) == 0) return 0;
    std::cerr << app.help();
    return kExitUsage;
  }

  if (train->parsed()) {
    if (expert == "covert" && !rho) {
      std::cerr << "error: train --expert covert needs --rho\n" << train->help();
      return kExitUsage;
    }
    if (expert != "covert" && rho) {
      std::cerr << "error: --rho applies to --expert covert only\n";
      return kExitUsage;
    }
  }

  Session session;
  semcom_status st = semcom_session_open(config.empty() ? nullptr : config.c_str(), checkpoint.c_str(),
                                         seed.value_or(0), seed ? 1 : 0, &session.s);
  if (st != SEMCOM_OK) return report(st);

  if (gen->parsed()) {
    Owned summary;
    st = semcom_generate_data(session.s, data_out.empty() ? nullptr : data_out.c_str(), &summary.p);
    if (st != SEMCOM_OK) return report(st);
    std::cout << summary.p << "\n";
    return 0;
  }

  if (train->parsed() || gate->parsed()) {
    st = train->parsed() ? semcom_train_expert(session.s, expert.c_str(), rho.value_or(0.0), rho ? 1 : 0)
                         : semcom_train_gate(session.s);
    if (st != SEMCOM_OK) return report(st);
    st = semcom_session_save(session.s, nullptr);
    if (st != SEMCOM_OK) return report(st);
    Owned desc;
    if (semcom_describe(session.s, &desc.p) == SEMCOM_OK) std::cout << desc.p << "\n";
    return 0;
  }

  Owned csv;
  std::string out;
  if (attack->parsed()) {
    std::string text = spec;
    if (std::ifstream f(spec); f && spec.find('{') == std::string::npos) {
      std::stringstream ss;
      ss << f.rdbuf();
      text = ss.str();
    }
    st = semcom_attack_eval(session.s, text.c_str(), &csv.p);
    out = eval_out;
  } else if (scenario->parsed()) {
    st = semcom_run_scenario(session.s, id[0], &csv.p);
    out = scenario_out;
  } else {
    st = semcom_report(session.s, &csv.p);
    out = report_out;
  }
  if (st != SEMCOM_OK) return report(st);
  return emit(csv.p, out) ? 0 : kExitRuntime;
}
