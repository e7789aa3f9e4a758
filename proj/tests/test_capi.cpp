#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "semcom/semcom.h"

namespace fs = std::filesystem;

namespace {

fs::path work_dir() {
  static const fs::path p = [] {
    const fs::path d = fs::temp_directory_path() / "semcom_test_capi";
    fs::remove_all(d);
    fs::create_directories(d);
    std::ofstream(d / "tiny.json") << R"({"dataset": {"n_train": 400, "n_test": 100},
                                         "training": {"epochs": 1},
                                         "gate": {"samples": 256, "epochs": 2}})";
    return d;
  }();
  return p;
}

std::string tiny_config() { return (work_dir() / "tiny.json").string(); }

struct Run {
  int code;
  std::string err;
};

Run cli(const std::string& args) {
  const fs::path err = work_dir() / "stderr.txt";
  const std::string cmd = std::string(SEMCOM_CLI_PATH) + " " + args + " > /dev/null 2> " + err.string();
  const int raw = std::system(cmd.c_str());
  std::ifstream in(err);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, ss.str()};
}

}  // namespace

TEST_CASE("C API: status names and argument checks") {
  CHECK(std::string(semcom_status_name(SEMCOM_OK)) == "ok");
  CHECK(std::string(semcom_status_name(SEMCOM_ERR_TRUNCATED)) == "truncated");
  CHECK(std::string(semcom_version()).size() > 0);
  CHECK(semcom_session_open(nullptr, nullptr, 0, 0, nullptr) == SEMCOM_ERR_INVALID_ARGUMENT);
  CHECK(std::string(semcom_last_error()).size() > 0);
  semcom_session* s = nullptr;
  CHECK(semcom_session_open((work_dir() / "absent.json").c_str(), nullptr, 0, 0, &s) == SEMCOM_ERR_IO);
  CHECK(s == nullptr);
}

TEST_CASE("C API: session lifecycle") {
  const fs::path ck = work_dir() / "api.smck";
  fs::remove(ck);
  semcom_session* s = nullptr;
  REQUIRE(semcom_session_open(tiny_config().c_str(), ck.c_str(), 9, 1, &s) == SEMCOM_OK);
  CHECK(std::string(semcom_last_error()).empty());

  char* out = nullptr;
  REQUIRE(semcom_generate_data(s, nullptr, &out) == SEMCOM_OK);
  const auto summary = nlohmann::json::parse(out);
  semcom_free_string(out);
  CHECK(summary.at("train").at("size") == 400);
  CHECK(summary.at("seed") == 9);

  CHECK(semcom_train_expert(s, "covert", 0, 0) == SEMCOM_ERR_INVALID_ARGUMENT);
  CHECK(semcom_train_expert(s, "normal", 2.0, 1) == SEMCOM_ERR_INVALID_ARGUMENT);
  CHECK(semcom_train_expert(s, "stealthy", 0, 0) == SEMCOM_ERR_INVALID_ARGUMENT);
  CHECK(semcom_train_expert(s, "private", 0, 0) == SEMCOM_ERR_MISSING_EXPERT);
  CHECK(semcom_run_scenario(s, 'd', &out) == SEMCOM_ERR_MISSING_EXPERT);
  CHECK(std::string(semcom_last_error()).find("missing") != std::string::npos);
  CHECK(semcom_run_scenario(s, 'z', &out) == SEMCOM_ERR_INVALID_ARGUMENT);
  CHECK(semcom_attack_eval(s, "{\"surface\": \"source\", \"bogus\": 1}", &out) != SEMCOM_OK);

  REQUIRE(semcom_train_expert(s, "normal", 0, 0) == SEMCOM_OK);
  REQUIRE(semcom_describe(s, &out) == SEMCOM_OK);
  const auto desc = nlohmann::json::parse(out);
  semcom_free_string(out);
  REQUIRE(semcom_session_save(s, nullptr) == SEMCOM_OK);
  semcom_session_close(s);

  s = nullptr;
  REQUIRE(semcom_session_open(tiny_config().c_str(), ck.c_str(), 9, 1, &s) == SEMCOM_OK);
  REQUIRE(semcom_describe(s, &out) == SEMCOM_OK);
  CHECK(nlohmann::json::parse(out) == desc);
  semcom_free_string(out);
  semcom_session_close(s);

  // Truncated and foreign files are refused with their own codes.
  const auto size = fs::file_size(ck);
  fs::resize_file(ck, size - 10);
  CHECK(semcom_session_open(nullptr, ck.c_str(), 0, 0, &s) == SEMCOM_ERR_TRUNCATED);
  std::ofstream(ck, std::ios::trunc) << "PK\x03\x04 not a checkpoint";
  CHECK(semcom_session_open(nullptr, ck.c_str(), 0, 0, &s) == SEMCOM_ERR_BAD_MAGIC);
  semcom_free_string(nullptr);
  semcom_session_close(nullptr);
}

TEST_CASE("CLI exit codes") {
  const std::string ck = "--checkpoint " + (work_dir() / "cli.smck").string();
  const std::string cfg = "--config " + tiny_config();

  Run r = cli("frobnicate");
  CHECK(r.code == 1);
  CHECK(r.err.find("gen-data") != std::string::npos);  // usage text
  CHECK(cli("").code == 1);
  CHECK(cli(cfg + " " + ck + " train --expert covert").code == 1);
  CHECK(cli(cfg + " " + ck + " train --expert normal --rho 2").code == 1);
  CHECK(cli(cfg + " " + ck + " train --expert wizard").code == 1);
  CHECK(cli(cfg + " " + ck + " run-scenario --id q").code == 1);
  CHECK(cli("--config /nonexistent/cfg.json gen-data").code == 1);

  r = cli(cfg + " " + ck + " run-scenario --id d");
  CHECK(r.code == 2);
  CHECK(r.err.find("missing expert") != std::string::npos);
  CHECK(cli(cfg + " " + ck + " train --expert normal").code == 0);
  r = cli(cfg + " " + ck + " run-scenario --id d");
  CHECK(r.code == 2);
  CHECK(r.err.find("missing expert: private") != std::string::npos);

  CHECK(cli(cfg + " " + ck + " gen-data --out " + (work_dir() / "data.csv").string()).code == 0);
  std::ifstream data(work_dir() / "data.csv");
  std::string header;
  std::getline(data, header);
  CHECK(header.rfind("split,label,p0,", 0) == 0);
  CHECK(header.substr(header.size() - 5) == ",p255");
  CHECK(cli("--help").code == 0);
}
