#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "json.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "rlime/ctgan/ctgan.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path& work() {
  static const fs::path dir = rlime::test::scratch_dir("cli");
  return dir;
}

// Exit status of the CLI; stdout and stderr go to work()/last.out.
int run(const std::string& args) {
  const std::string cmd = std::string(RLIME_CLI) + " " + args + " > " + (work() / "last.out").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string last_output() { return slurp(work() / "last.out"); }

std::string data_flags() {
  return "--data " + (work() / "german.csv").string() + " --schema " + (work() / "german.schema.json").string();
}

void ensure_data() {
  static bool done = false;
  if (done) return;
  REQUIRE(run("make-data --kind german --rows 300 --seed 3 --out-dir " + work().string()) == 0);
  done = true;
}

void ensure_bundle() {
  static bool done = false;
  if (done) return;
  ensure_data();
  REQUIRE(run("train-ctgan " + data_flags() + " --epochs 1 --seed 4 --out " + (work() / "bundle").string()) == 0);
  done = true;
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(run("") == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run("train-ctgan --out " + (work() / "x").string()) == 2);
  CHECK(run("reproduce --config /nonexistent.json --out " + (work() / "x").string()) == 2);
  CHECK(run("--help") == 0);
}

TEST_CASE("make-data writes a loadable dataset") {
  ensure_data();
  CHECK(fs::exists(work() / "german.csv"));
  CHECK(fs::exists(work() / "german.schema.json"));
  CHECK(last_output().find("300 rows") != std::string::npos);
  CHECK(run("make-data --kind adult --out-dir " + work().string()) == 2);
}

TEST_CASE("train-ctgan: one epoch gives a loadable bundle, and seeds reproduce it") {
  ensure_bundle();
  CHECK(last_output().find("tau") != std::string::npos);
  const auto model = rlime::ctgan::load_bundle(work() / "bundle");
  CHECK(model.epochs == 1);
  CHECK(std::isfinite(model.tau));
  REQUIRE(run("train-ctgan " + data_flags() + " --epochs 1 --seed 4 --out " + (work() / "bundle2").string()) == 0);
  CHECK(slurp(work() / "bundle" / "generator.json") == slurp(work() / "bundle2" / "generator.json"));
  CHECK(run("train-ctgan " + data_flags() + " --epochs 0 --out " + (work() / "bundle3").string()) == 2);
}

TEST_CASE("explain: constant model, k bounds, samplers and determinism") {
  ensure_bundle();
  const auto out1 = (work() / "e1.json").string();
  REQUIRE(run("explain " + data_flags() + " --blackbox constant --sampler vanilla --instance 3 --seed 1 --out " + out1) == 0);
  const auto j = nlohmann::json::parse(slurp(out1));
  for (const auto& a : j.at("attributions")) CHECK(std::abs(a.at("weight").get<double>()) <= 1e-9);
  CHECK(j.at("instance_id") == 3);

  const auto out2 = (work() / "e2.json").string();
  const auto out3 = (work() / "e3.json").string();
  REQUIRE(run("explain " + data_flags() + " --blackbox biased --instance 5 --seed 9 --out " + out2) == 0);
  REQUIRE(run("explain " + data_flags() + " --blackbox biased --instance 5 --seed 9 --out " + out3) == 0);
  CHECK(slurp(out2) == slurp(out3));
  const auto e = nlohmann::json::parse(slurp(out2));
  CHECK(e.at("top_k").at(0) == "Gender");

  CHECK(run("explain " + data_flags() + " --k 100") == 2);
  CHECK(run("explain " + data_flags() + " --sampler ctgan") == 2);
  CHECK(run("explain " + data_flags() + " --sampler shap") == 2);
  CHECK(run("explain " + data_flags() + " --blackbox nonsense") == 2);
  CHECK(run("explain " + data_flags() + " --sampler ctgan --model-bundle " + (work() / "bundle").string()) == 0);
  CHECK(run("explain " + data_flags() + " --sampler ctgan --model-bundle /nonexistent") == 3);
}

TEST_CASE("attack: black-box bundle, white-box requirements and reproducibility") {
  ensure_bundle();
  const auto b1 = (work() / "s1").string();
  const auto b2 = (work() / "s2").string();
  REQUIRE(run("attack " + data_flags() + " --setting blackbox --seed 5 --out " + b1) == 0);
  CHECK(last_output().find("critic held-out accuracy") != std::string::npos);
  REQUIRE(run("attack " + data_flags() + " --setting blackbox --seed 5 --out " + b2) == 0);
  CHECK(slurp(fs::path(b1) / "critic.json") == slurp(fs::path(b2) / "critic.json"));
  CHECK(slurp(fs::path(b1) / "meta.json") == slurp(fs::path(b2) / "meta.json"));

  CHECK(run("attack " + data_flags() + " --setting whitebox --out " + (work() / "s3").string()) == 2);
  CHECK(run("attack " + data_flags() + " --setting greybox --out " + (work() / "s3").string()) == 2);
  const auto wb = (work() / "s4").string();
  REQUIRE(run("attack " + data_flags() + " --setting whitebox --defender-bundle " + (work() / "bundle").string() +
              " --seed 5 --out " + wb) == 0);
  CHECK(nlohmann::json::parse(slurp(fs::path(wb) / "meta.json")).at("setting") == "whitebox");

  // The scaffold can be explained through the CLI.
  CHECK(run("explain " + data_flags() + " --blackbox scaffold:" + b1 + " --instance 2") == 0);
}

TEST_CASE("reproduce twice gives byte-identical report.json") {
  const auto cfg = work() / "smoke.json";
  std::ofstream(cfg) << R"({
    "seed": 3,
    "datasets": [{"name": "german", "kind": "german", "surrogate_seed": 2, "surrogate_rows": 300}],
    "max_instances": 10, "pca_points": 40, "realism_instances": 2, "realism_samples": 50,
    "ctgan": {"epochs": 1, "noise_dim": 8, "generator_hidden": [16], "critic_hidden": [16]},
    "explain": {"n_samples": 200, "n_min": 40}
  })";
  REQUIRE(run("reproduce --config " + cfg.string() + " --out " + (work() / "r1").string()) == 0);
  REQUIRE(run("reproduce --config " + cfg.string() + " --jobs 2 --out " + (work() / "r2").string()) == 0);
  CHECK(slurp(work() / "r1" / "report.json") == slurp(work() / "r2" / "report.json"));
  for (const char* f : {"table_blackbox.csv", "table_whitebox.csv", "table_precision.csv", "pca_scatter.csv"}) {
    CHECK(fs::exists(work() / "r1" / f));
  }

  const auto bad = work() / "bad.json";
  std::ofstream(bad) << R"({"datasets": [{"name": "german", "data": "missing.csv", "schema": "missing.json"}],
                            "ctgan": {"epochs": 1}})";
  CHECK(run("reproduce --config " + bad.string() + " --out " + (work() / "r3").string()) == 3);
  CHECK(fs::exists(work() / "r3" / "report.json"));
  std::ofstream(bad) << "{not json";
  CHECK(run("reproduce --config " + bad.string() + " --out " + (work() / "r4").string()) == 2);
}
