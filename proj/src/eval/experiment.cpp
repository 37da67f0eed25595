#include "rlime/eval/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "rlime/dataio/surrogate.hpp"
#include "rlime/dataio/transformer.hpp"
#include "rlime/eval/metrics.hpp"
#include "rlime/models/forest.hpp"
#include "rlime/models/rules.hpp"

namespace rlime::eval {

using nlohmann::json;

namespace {

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

json ctgan_to_json(const ctgan::CtganConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"noise_dim", c.noise_dim},
          {"lambda", c.lambda},
          {"critic_steps", c.critic_steps},
          {"generator_hidden", c.generator_hidden},
          {"critic_hidden", c.critic_hidden},
          {"lr", c.adam.lr},
          {"beta1", c.adam.beta1},
          {"beta2", c.adam.beta2},
          {"cond_loss_weight", c.cond_loss_weight},
          {"sampling", c.sampling == ctgan::DiscreteSampling::kArgmax ? "argmax" : "categorical"},
          {"gumbel_temperature", c.gumbel_temperature}};
}

ctgan::CtganConfig ctgan_from_json(const json& j) {
  ctgan::CtganConfig c;
  read_opt(j, "epochs", c.epochs);
  read_opt(j, "batch_size", c.batch_size);
  read_opt(j, "noise_dim", c.noise_dim);
  read_opt(j, "lambda", c.lambda);
  read_opt(j, "critic_steps", c.critic_steps);
  read_opt(j, "generator_hidden", c.generator_hidden);
  read_opt(j, "critic_hidden", c.critic_hidden);
  read_opt(j, "lr", c.adam.lr);
  read_opt(j, "beta1", c.adam.beta1);
  read_opt(j, "beta2", c.adam.beta2);
  read_opt(j, "cond_loss_weight", c.cond_loss_weight);
  read_opt(j, "gumbel_temperature", c.gumbel_temperature);
  if (j.contains("sampling")) {
    const auto s = j.at("sampling").get<std::string>();
    if (s == "argmax") {
      c.sampling = ctgan::DiscreteSampling::kArgmax;
    } else if (s == "categorical") {
      c.sampling = ctgan::DiscreteSampling::kCategorical;
    } else {
      throw ConfigError("ctgan.sampling must be argmax or categorical, got " + s);
    }
  }
  return c;
}

json explain_to_json(const explain::ExplainConfig& c) {
  return {{"n_samples", c.n_samples}, {"n_min", c.n_min}, {"max_batches", c.max_batches},
          {"alpha", c.alpha}, {"sigma", c.sigma}};
}

explain::ExplainConfig explain_from_json(const json& j) {
  explain::ExplainConfig c;
  read_opt(j, "n_samples", c.n_samples);
  read_opt(j, "n_min", c.n_min);
  read_opt(j, "max_batches", c.max_batches);
  read_opt(j, "alpha", c.alpha);
  read_opt(j, "sigma", c.sigma);
  return c;
}

json attack_to_json(const attack::AttackConfig& c) {
  return {{"perturbations_per_row", c.perturbations_per_row},
          {"holdout_fraction", c.holdout_fraction},
          {"min_accuracy", c.min_accuracy},
          {"n_trees", c.critic.n_trees},
          {"max_depth", c.critic.max_depth},
          {"min_samples_leaf", c.critic.min_samples_leaf},
          {"max_features", c.critic.max_features}};
}

attack::AttackConfig attack_from_json(const json& j) {
  attack::AttackConfig c;
  read_opt(j, "perturbations_per_row", c.perturbations_per_row);
  read_opt(j, "holdout_fraction", c.holdout_fraction);
  read_opt(j, "min_accuracy", c.min_accuracy);
  read_opt(j, "n_trees", c.critic.n_trees);
  read_opt(j, "max_depth", c.critic.max_depth);
  read_opt(j, "min_samples_leaf", c.critic.min_samples_leaf);
  read_opt(j, "max_features", c.critic.max_features);
  return c;
}

const std::vector<explain::SamplerKind> kExplainers = {
    explain::SamplerKind::kVanilla, explain::SamplerKind::kCtgan, explain::SamplerKind::kCtganFiltered};

std::string display_name(explain::SamplerKind s) {
  switch (s) {
    case explain::SamplerKind::kVanilla: return "LIME";
    case explain::SamplerKind::kCtgan: return "CTGAN-LIME";
    case explain::SamplerKind::kCtganFiltered: return "CTGAN-LIME with d(x)";
  }
  return "?";
}

EvalSetting parse_eval_setting(const std::string& s) {
  if (s == "clean") return EvalSetting::kClean;
  if (s == "blackbox") return EvalSetting::kBlackbox;
  if (s == "whitebox") return EvalSetting::kWhitebox;
  throw ParseError("unknown setting: " + s);
}

std::string fnv_hex(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

dataio::Dataset load_spec(const DatasetSpec& spec, std::uint64_t unrelated_seed) {
  dataio::Dataset ds = spec.data.empty()
                           ? dataio::make_surrogate(spec.kind, spec.surrogate_seed, spec.surrogate_rows)
                           : dataio::load_dataset(spec.data, spec.schema);
  if (!ds.schema.find("unrelated_0")) ds = dataio::append_uncorrelated_feature(ds, unrelated_seed);
  return ds;
}

// Runs f(i) for i in [0, n) on `jobs` threads; each index is independent.
template <typename F>
void parallel_for(std::size_t n, int jobs, F&& f) {
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) f(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct Cell {
  std::vector<char> failed;
  std::vector<std::vector<char>> hit;  // [k index][instance]
  std::vector<double> precision;
};

class Timer {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

void run_dataset(const ExperimentConfig& cfg, const DatasetSpec& spec, ExperimentResult& out) {
  const std::string& name = spec.name;
  const std::uint64_t base = derive_seed(cfg.seed, name);
  std::map<std::string, std::uint64_t> seeds{
      {"master", cfg.seed},
      {"unrelated", derive_seed(base, "unrelated")},
      {"split", derive_seed(base, "split")},
      {"ctgan_split", derive_seed(base, "ctgan-split")},
      {"ctgan", derive_seed(base, "ctgan")},
      {"attack_blackbox", derive_seed(base, "attack-blackbox")},
      {"attack_whitebox", derive_seed(base, "attack-whitebox")},
      {"explain", derive_seed(base, "explain")},
      {"precision", derive_seed(base, "precision")},
      {"forest", derive_seed(base, "forest")},
      {"pca", derive_seed(base, "pca")}};
  const std::uint64_t unrelated_seed = seeds.at("unrelated");
  if (!spec.data.empty()) seeds.erase("unrelated");

  Timer timer;
  const dataio::Dataset ds = load_spec(spec, unrelated_seed);
  const auto ks = spec.k.empty() ? default_k(spec.kind) : spec.k;
  for (auto k : ks) {
    if (k < 1 || k > ds.n_features()) throw ConfigError(name + ": k = " + std::to_string(k) + " out of range");
  }
  if (cfg.precision_k < 1 || cfg.precision_k > ds.n_features()) {
    throw ConfigError(name + ": precision_k out of range");
  }
  const auto [train, test] = dataio::split(ds, cfg.test_fraction, seeds.at("split"));
  const auto [gtrain, gval] = dataio::split(train, cfg.ctgan_validation_fraction, seeds.at("ctgan_split"));
  const auto tl = dataio::Transformer::fit(train, dataio::ContinuousMode::kZScore);
  out.timing[name + ".prepare"] = timer.lap();

  // Defender CTGAN, trained once per dataset.
  ctgan::CtganModel model;
  std::filesystem::path cache_dir;
  std::string cache_key;
  if (!cfg.bundle_cache.empty()) {
    json key{{"dataset", spec.to_json()},
             {"ctgan", ctgan_to_json(cfg.ctgan)},
             {"seeds", seeds},
             {"test_fraction", cfg.test_fraction},
             {"validation_fraction", cfg.ctgan_validation_fraction}};
    cache_key = key.dump();
    cache_dir = std::filesystem::path(cfg.bundle_cache) / (name + "-" + fnv_hex(cache_key));
  }
  bool cached = false;
  if (!cache_dir.empty() && std::filesystem::exists(cache_dir / "cache_key.json")) {
    std::ifstream in(cache_dir / "cache_key.json");
    std::stringstream buf;
    buf << in.rdbuf();
    if (buf.str() == cache_key) {
      model = ctgan::load_bundle(cache_dir);
      cached = true;
    }
  }
  if (!cached) {
    const auto tg = dataio::Transformer::fit(gtrain, dataio::ContinuousMode::kGmm);
    model = ctgan::ctgan_train(gtrain, tg, cfg.ctgan, seeds.at("ctgan"));
    if (!cache_dir.empty()) {
      ctgan::save_bundle(model, cache_dir);
      std::ofstream(cache_dir / "cache_key.json") << cache_key;
    }
  }
  model.tau = ctgan::calibrate_tau(model, gval.rows, cfg.tau_percentile);
  out.timing[name + ".ctgan"] = timer.lap();

  const auto biased = models::biased_classifier(spec.kind, ds.schema);
  const auto psi = models::innocuous_model("unrelated_0", ds.schema);
  const auto bb = attack::train_attack_blackbox(train, biased, psi, cfg.attack, seeds.at("attack_blackbox"));
  const auto wb = attack::train_attack_whitebox(train, biased, psi, model, cfg.attack, seeds.at("attack_whitebox"));
  const auto forest = models::rf_train(train.rows, train.labels, models::ForestConfig{}, seeds.at("forest"),
                                       train.schema.n_classes());
  out.timing[name + ".attack"] = timer.lap();

  DatasetDiagnostics diag;
  diag.dataset = name;
  diag.tau = model.tau;
  diag.blackbox_critic_accuracy = bb.critic_accuracy;
  diag.whitebox_critic_accuracy = wb.critic_accuracy;
  diag.n_train = train.n_rows();
  diag.n_test = test.n_rows();

  const std::string sensitive = ds.schema.sensitive_feature();
  const std::size_t sens = ds.schema.index_of(sensitive);
  const std::size_t n = std::min(cfg.max_instances, test.n_rows());
  if (n == 0) throw ValidationError(name + ": empty test split");

  // Cells indexed [setting][explainer]; the white-box attack on vanilla LIME
  // trains its critic on LIME's own Gaussian sampler, which is the black-box
  // scaffold.
  const models::Classifier* settings_f[3][3] = {
      {&biased, &biased, &biased},
      {&bb.scaffold, &bb.scaffold, &bb.scaffold},
      {&bb.scaffold, &wb.scaffold, &wb.scaffold}};
  Cell cells[3][3];
  for (auto& row : cells) {
    for (auto& c : row) {
      c.failed.assign(n, 0);
      c.hit.assign(ks.size(), std::vector<char>(n, 0));
      c.precision.assign(n, 0.0);
    }
  }
  std::vector<std::vector<char>> prec_failed(3, std::vector<char>(n, 0));

  parallel_for(n, cfg.jobs, [&](std::size_t i) {
    const RowVector x = test.rows.row(static_cast<Eigen::Index>(i));
    for (std::size_t e = 0; e < kExplainers.size(); ++e) {
      const auto sampler = kExplainers[e];
      Matrix rows;
      try {
        rows = explain::sample_neighborhood(x, sampler, tl, &model, cfg.explain,
                                            derive_seed(seeds.at("explain"), i));
      } catch (const explain::NeighborhoodTooSmall&) {
        for (auto& row : cells) row[e].failed[i] = 1;
        prec_failed[e][i] = 1;
        continue;
      }
      for (std::size_t s = 0; s < 3; ++s) {
        const auto ex = explain::explain_rows(*settings_f[s][e], x, rows, sampler, tl, cfg.explain);
        for (std::size_t ki = 0; ki < ks.size(); ++ki) {
          const auto top = explain::top_k_indices(ex, ks[ki]);
          cells[s][e].hit[ki][i] = std::find(top.begin(), top.end(), sens) != top.end();
        }
      }
      const auto ef = explain::explain_rows(forest, x, rows, sampler, tl, cfg.explain);
      cells[0][e].precision[i] = precision(ef, x, forest, train, tl, cfg.precision_k, cfg.min_matches,
                                           derive_seed(seeds.at("precision"), explain::sampler_name(sampler), i));
    }
  });
  out.timing[name + ".explain"] = timer.lap();

  const EvalSetting settings[3] = {EvalSetting::kClean, EvalSetting::kBlackbox, EvalSetting::kWhitebox};
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t e = 0; e < kExplainers.size(); ++e) {
      const Cell& c = cells[s][e];
      EvalReport r;
      r.dataset = name;
      r.setting = settings[s];
      r.explainer = kExplainers[e];
      r.n_instances = n;
      r.n_failed = static_cast<std::size_t>(std::count(c.failed.begin(), c.failed.end(), 1));
      r.seeds = seeds;
      for (std::size_t ki = 0; ki < ks.size(); ++ki) {
        const auto hits = std::count(c.hit[ki].begin(), c.hit[ki].end(), 1);
        r.topk[ks[ki]] = 100.0 * static_cast<double>(hits) / static_cast<double>(n);
      }
      if (s == 0) {
        // A missing explanation scores zero precision, like a top-k miss.
        std::vector<double> p;
        for (std::size_t i = 0; i < n; ++i) p.push_back(prec_failed[e][i] ? 0.0 : 100.0 * c.precision[i]);
        const auto sum = summarize(p);
        r.precision_mean = sum.mean;
        r.precision_std = sum.std;
      }
      out.reports.push_back(r);
    }
  }

  const auto numeric = numeric_columns(ds.schema);
  if (numeric.size() >= 2) {
    out.pca[name] = pca_scatter(train, tl, model, cfg.pca_points, seeds.at("pca"),
                                RowVector(test.rows.row(0)));
  }
  if (!numeric.empty() && cfg.realism_instances > 0) {
    const auto m = static_cast<Eigen::Index>(std::min(cfg.realism_instances, test.n_rows()));
    const auto r = neighborhood_realism(train, test.rows.topRows(m), tl, model, cfg.realism_samples,
                                        derive_seed(seeds.at("pca"), "realism"));
    diag.wasserstein_vanilla = r.vanilla;
    diag.wasserstein_ctgan = r.ctgan;
  }
  out.diagnostics.push_back(diag);
  out.timing[name + ".realism"] = timer.lap();
}

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  out << s;
  if (!out) throw IoError("write failed: " + p.string());
}

}  // namespace

std::vector<std::size_t> default_k(const std::string& kind) {
  if (kind == "communities") return {1, 10, 30};
  if (kind == "compas" || kind == "german") return {1, 3, 5};
  throw ConfigError("unknown dataset kind: " + kind);
}

DatasetSpec DatasetSpec::from_json(const json& j) {
  DatasetSpec d;
  try {
    d.name = j.at("name").get<std::string>();
    d.kind = j.value("kind", d.name);
    read_opt(j, "data", d.data);
    read_opt(j, "schema", d.schema);
    read_opt(j, "surrogate_seed", d.surrogate_seed);
    read_opt(j, "surrogate_rows", d.surrogate_rows);
    read_opt(j, "k", d.k);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("dataset entry: ") + e.what());
  }
  if (d.data.empty() != d.schema.empty()) throw ConfigError(d.name + ": data and schema go together");
  default_k(d.kind);
  return d;
}

json DatasetSpec::to_json() const {
  json j{{"name", name}, {"kind", kind}, {"k", k.empty() ? default_k(kind) : k}};
  if (data.empty()) {
    j["surrogate_seed"] = surrogate_seed;
    j["surrogate_rows"] = surrogate_rows;
  } else {
    j["data"] = data;
    j["schema"] = schema;
  }
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
  ExperimentConfig c;
  try {
    if (j.contains("version") && j.at("version").get<int>() != 1) {
      throw ConfigError("unsupported experiment config version");
    }
    if (!j.contains("datasets") || !j.at("datasets").is_array() || j.at("datasets").empty()) {
      throw ConfigError("experiment config needs a non-empty datasets list");
    }
    for (const auto& d : j.at("datasets")) {
      auto spec = DatasetSpec::from_json(d);
      if (!spec.data.empty() && !base_dir.empty()) {
        if (std::filesystem::path(spec.data).is_relative()) spec.data = (base_dir / spec.data).string();
        if (std::filesystem::path(spec.schema).is_relative()) spec.schema = (base_dir / spec.schema).string();
      }
      c.datasets.push_back(spec);
    }
    read_opt(j, "seed", c.seed);
    read_opt(j, "test_fraction", c.test_fraction);
    read_opt(j, "ctgan_validation_fraction", c.ctgan_validation_fraction);
    read_opt(j, "max_instances", c.max_instances);
    read_opt(j, "tau_percentile", c.tau_percentile);
    read_opt(j, "precision_k", c.precision_k);
    read_opt(j, "min_matches", c.min_matches);
    read_opt(j, "pca_points", c.pca_points);
    read_opt(j, "realism_instances", c.realism_instances);
    read_opt(j, "realism_samples", c.realism_samples);
    read_opt(j, "bundle_cache", c.bundle_cache);
    read_opt(j, "jobs", c.jobs);
    if (j.contains("ctgan")) c.ctgan = ctgan_from_json(j.at("ctgan"));
    if (j.contains("explain")) c.explain = explain_from_json(j.at("explain"));
    if (j.contains("attack")) c.attack = attack_from_json(j.at("attack"));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
  if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0)) throw ConfigError("test_fraction must lie in (0, 1)");
  if (!(c.ctgan_validation_fraction > 0.0 && c.ctgan_validation_fraction < 1.0)) {
    throw ConfigError("ctgan_validation_fraction must lie in (0, 1)");
  }
  if (c.max_instances == 0) throw ConfigError("max_instances must be positive");
  if (!(c.tau_percentile >= 0.0 && c.tau_percentile <= 100.0)) throw ConfigError("tau_percentile must lie in [0, 100]");
  if (c.jobs < 1) throw ConfigError("jobs must be >= 1");
  std::vector<std::string> names;
  for (const auto& d : c.datasets) names.push_back(d.name);
  std::sort(names.begin(), names.end());
  if (std::adjacent_find(names.begin(), names.end()) != names.end()) throw ConfigError("duplicate dataset name");
  return c;
}

json ExperimentConfig::to_json() const {
  json ds = json::array();
  for (const auto& d : datasets) ds.push_back(d.to_json());
  return {{"version", 1},
          {"datasets", ds},
          {"seed", seed},
          {"test_fraction", test_fraction},
          {"ctgan_validation_fraction", ctgan_validation_fraction},
          {"max_instances", max_instances},
          {"tau_percentile", tau_percentile},
          {"precision_k", precision_k},
          {"min_matches", min_matches},
          {"pca_points", pca_points},
          {"realism_instances", realism_instances},
          {"realism_samples", realism_samples},
          {"ctgan", ctgan_to_json(ctgan)},
          {"explain", explain_to_json(explain)},
          {"attack", attack_to_json(attack)}};
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open experiment config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("experiment config " + path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

std::string eval_setting_name(EvalSetting s) {
  switch (s) {
    case EvalSetting::kClean: return "clean";
    case EvalSetting::kBlackbox: return "blackbox";
    case EvalSetting::kWhitebox: return "whitebox";
  }
  return "?";
}

json EvalReport::to_json() const {
  json tk = json::object();
  for (const auto& [k, v] : topk) tk[std::to_string(k)] = v;
  json j{{"dataset", dataset},
         {"setting", eval_setting_name(setting)},
         {"explainer", explain::sampler_name(explainer)},
         {"topk", tk},
         {"n_instances", n_instances},
         {"n_failed", n_failed},
         {"seeds", seeds}};
  if (precision_mean) {
    j["precision"] = {{"mean", *precision_mean}, {"std", precision_std.value_or(0.0)}};
  }
  return j;
}

EvalReport EvalReport::from_json(const json& j) {
  EvalReport r;
  try {
    r.dataset = j.at("dataset").get<std::string>();
    r.setting = parse_eval_setting(j.at("setting").get<std::string>());
    r.explainer = explain::parse_sampler(j.at("explainer").get<std::string>());
    for (const auto& [k, v] : j.at("topk").items()) r.topk[std::stoul(k)] = v.get<double>();
    r.n_instances = j.at("n_instances").get<std::size_t>();
    r.n_failed = j.at("n_failed").get<std::size_t>();
    r.seeds = j.at("seeds").get<std::map<std::string, std::uint64_t>>();
    if (j.contains("precision")) {
      r.precision_mean = j.at("precision").at("mean").get<double>();
      r.precision_std = j.at("precision").at("std").get<double>();
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("EvalReport: ") + e.what());
  } catch (const ConfigError& e) {
    throw ParseError(std::string("EvalReport: ") + e.what());
  }
  if (r.n_instances == 0) throw ParseError("EvalReport: n_instances must be positive");
  auto in_range = [](double v) { return v >= 0.0 && v <= 100.0; };
  for (const auto& [k, v] : r.topk) {
    if (!in_range(v)) throw ParseError("EvalReport: accuracy outside [0, 100]");
  }
  if (r.precision_mean && !in_range(*r.precision_mean)) throw ParseError("EvalReport: precision outside [0, 100]");
  return r;
}

json ExperimentResult::report_json(const ExperimentConfig& cfg) const {
  json reps = json::array();
  for (const auto& r : reports) reps.push_back(r.to_json());
  json diags = json::array();
  for (const auto& d : diagnostics) {
    diags.push_back({{"dataset", d.dataset},
                     {"tau", d.tau},
                     {"blackbox_critic_accuracy", d.blackbox_critic_accuracy},
                     {"whitebox_critic_accuracy", d.whitebox_critic_accuracy},
                     {"wasserstein_vanilla", d.wasserstein_vanilla},
                     {"wasserstein_ctgan", d.wasserstein_ctgan},
                     {"n_train", d.n_train},
                     {"n_test", d.n_test}});
  }
  return {{"version", 1},
          {"config", cfg.to_json()},
          {"reports", reps},
          {"diagnostics", diags},
          {"failures", failures}};
}

const EvalReport* ExperimentResult::find(const std::string& dataset, EvalSetting s,
                                         explain::SamplerKind e) const {
  for (const auto& r : reports) {
    if (r.dataset == dataset && r.setting == s && r.explainer == e) return &r;
  }
  return nullptr;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  ExperimentResult out;
  for (const auto& spec : cfg.datasets) {
    try {
      run_dataset(cfg, spec, out);
    } catch (const std::exception& e) {
      out.failures.push_back(spec.name + ": " + e.what());
    }
  }
  return out;
}

namespace {

Matrix numeric_z(const Matrix& m, const dataio::Transformer& t, const std::vector<std::size_t>& cols) {
  Matrix z(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    const auto& e = t.encoder(cols[c]);
    z.col(static_cast<Eigen::Index>(c)) = (m.col(static_cast<Eigen::Index>(cols[c])).array() - e.mean) / e.std;
  }
  return z;
}

}  // namespace

std::vector<PcaPoint> pca_scatter(const dataio::Dataset& real, const dataio::Transformer& t,
                                  const ctgan::CtganModel& model, std::size_t n_points,
                                  std::uint64_t seed, std::optional<RowVector> instance) {
  const auto cols = numeric_columns(real.schema);
  if (cols.size() < 2) throw ConfigError("pca_scatter: needs at least two continuous columns");
  if (n_points == 0 || real.n_rows() < 2) throw ConfigError("pca_scatter: nothing to project");
  Rng rng(seed);
  std::vector<std::size_t> idx(real.n_rows());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  shuffle_in_place(rng, idx);
  // Draw with replacement beyond the dataset size.
  while (idx.size() < n_points) idx.push_back(uniform_index(rng, real.n_rows()));
  idx.resize(n_points);
  const RowVector x = instance ? *instance : RowVector(real.rows.row(static_cast<Eigen::Index>(uniform_index(rng, real.n_rows()))));

  const Matrix vanilla = explain::gaussian_sample(x, t, n_points + 1, derive_seed(seed, "vanilla")).bottomRows(static_cast<Eigen::Index>(n_points));
  const Matrix fake = ctgan::ctgan_sample(model, ctgan::build_cond_vector_instance(model.transformer, x), n_points,
                                          derive_seed(seed, "ctgan"));
  const Matrix zr = numeric_z(real.subset(idx).rows, t, cols);
  const auto pca = dataio::pca_fit(zr, 2);
  std::vector<PcaPoint> out;
  const std::pair<const char*, Matrix> groups[] = {{"real", zr}, {"vanilla", numeric_z(vanilla, t, cols)}, {"ctgan", numeric_z(fake, t, cols)}};
  for (const auto& [src, m] : groups) {
    const Matrix p = dataio::pca_project(pca, m);
    for (Eigen::Index i = 0; i < p.rows(); ++i) out.push_back({src, p(i, 0), p(i, 1)});
  }
  return out;
}

Realism neighborhood_realism(const dataio::Dataset& real, const Matrix& instances,
                             const dataio::Transformer& t, const ctgan::CtganModel& model,
                             std::size_t n_samples, std::uint64_t seed) {
  const auto cols = numeric_columns(real.schema);
  if (cols.empty()) throw ConfigError("neighborhood_realism: no numeric columns");
  if (instances.rows() == 0 || n_samples == 0) throw ConfigError("neighborhood_realism: nothing to compare");
  Realism r;
  for (Eigen::Index i = 0; i < instances.rows(); ++i) {
    const RowVector x = instances.row(i);
    const auto s = derive_seed(seed, static_cast<std::uint64_t>(i));
    const Matrix vanilla = explain::gaussian_sample(x, t, n_samples + 1, derive_seed(s, "vanilla")).bottomRows(static_cast<Eigen::Index>(n_samples));
    const Matrix fake = ctgan::ctgan_sample(model, ctgan::build_cond_vector_instance(model.transformer, x), n_samples,
                                            derive_seed(s, "ctgan"));
    r.vanilla += mean_wasserstein(real.rows, vanilla, t, cols);
    r.ctgan += mean_wasserstein(real.rows, fake, t, cols);
  }
  r.vanilla /= static_cast<double>(instances.rows());
  r.ctgan /= static_cast<double>(instances.rows());
  return r;
}

void emit_pca_scatter(const std::vector<PcaPoint>& points, const std::filesystem::path& path) {
  std::ostringstream s;
  s << "pc1,pc2,source\n";
  char buf[64];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,", p.pc1, p.pc2);
    s << buf << p.source << "\n";
  }
  write_text(path, s.str());
}

void write_outputs(const ExperimentResult& r, const ExperimentConfig& cfg,
                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto setting : {EvalSetting::kBlackbox, EvalSetting::kWhitebox, EvalSetting::kClean}) {
    std::ostringstream s;
    s << "explainer";
    std::vector<std::pair<std::string, std::size_t>> columns;
    for (const auto& spec : cfg.datasets) {
      for (auto k : spec.k.empty() ? default_k(spec.kind) : spec.k) {
        columns.emplace_back(spec.name, k);
        s << "," << spec.name << "@" << k;
      }
    }
    s << "\n";
    for (const auto e : kExplainers) {
      s << "\"" << display_name(e) << "\"";
      for (const auto& [ds, k] : columns) {
        const auto* rep = r.find(ds, setting, e);
        s << ",";
        if (rep == nullptr) {
          s << "FAILED";
        } else {
          s << fmt2(rep->topk.at(k));
        }
      }
      s << "\n";
    }
    write_text(dir / ("table_" + eval_setting_name(setting) + ".csv"), s.str());
  }
  {
    std::ostringstream s;
    s << "explainer";
    for (const auto& spec : cfg.datasets) s << "," << spec.name << "," << spec.name << "_std";
    s << "\n";
    for (const auto e : kExplainers) {
      s << "\"" << display_name(e) << "\"";
      for (const auto& spec : cfg.datasets) {
        const auto* rep = r.find(spec.name, EvalSetting::kClean, e);
        if (rep == nullptr || !rep->precision_mean) {
          s << ",FAILED,FAILED";
        } else {
          s << "," << fmt2(*rep->precision_mean) << "," << fmt2(*rep->precision_std);
        }
      }
      s << "\n";
    }
    write_text(dir / "table_precision.csv", s.str());
  }
  {
    std::ostringstream s;
    s << "dataset,pc1,pc2,source\n";
    char buf[64];
    for (const auto& [ds, pts] : r.pca) {
      for (const auto& p : pts) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,", p.pc1, p.pc2);
        s << ds << "," << buf << p.source << "\n";
      }
    }
    write_text(dir / "pca_scatter.csv", s.str());
  }
  write_text(dir / "report.json", r.report_json(cfg).dump(2) + "\n");
  write_text(dir / "timing.json", json(r.timing).dump(2) + "\n");
}

}  // namespace rlime::eval
