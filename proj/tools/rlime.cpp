// Command-line entry point. Exit codes: 0 success, 2 usage or config error,
// 3 runtime failure.

#include "CLI11.hpp"
#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include "rlime/attack/attack.hpp"
#include "rlime/ctgan/ctgan.hpp"
#include "rlime/dataio/surrogate.hpp"
#include "rlime/eval/experiment.hpp"
#include "rlime/explain/lime.hpp"
#include "rlime/models/forest.hpp"
#include "rlime/models/rules.hpp"

namespace fs = std::filesystem;
using namespace rlime;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

struct DataFlags {
  std::string data;
  std::string schema;
  std::uint64_t unrelated_seed = 0;
};

void add_data_flags(CLI::App* cmd, DataFlags& f) {
  cmd->add_option("--data", f.data, "CSV file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--schema", f.schema, "schema JSON")->required()->check(CLI::ExistingFile);
  cmd->add_option("--unrelated-seed", f.unrelated_seed,
                  "seed of the appended unrelated_0 column (when the file lacks it)");
}

dataio::Dataset load_data(const DataFlags& f) {
  auto ds = dataio::load_dataset(f.data, f.schema);
  if (!ds.schema.find("unrelated_0")) ds = dataio::append_uncorrelated_feature(ds, f.unrelated_seed);
  return ds;
}

std::string infer_kind(const dataio::Schema& s) {
  const auto& name = s.sensitive_feature();
  if (name == "race") return "compas";
  if (name == "Gender") return "german";
  if (name == "racePctWhite") return "communities";
  throw ConfigError("cannot infer dataset kind from sensitive feature " + name + "; pass --kind");
}

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  out << text;
}

// --- make-data ------------------------------------------------------------

struct MakeDataFlags {
  std::string kind;
  std::string out_dir = "data";
  std::uint64_t seed = 1;
  std::size_t rows = 0;
};

int cmd_make_data(const MakeDataFlags& f) {
  const auto ds = dataio::make_surrogate(f.kind, f.seed, f.rows);
  fs::create_directories(f.out_dir);
  const fs::path csv = fs::path(f.out_dir) / (f.kind + ".csv");
  const fs::path schema = fs::path(f.out_dir) / (f.kind + ".schema.json");
  dataio::write_dataset_csv(ds, csv);
  write_file(schema, ds.schema.to_json().dump(2) + "\n");
  std::cout << "wrote " << csv.string() << " (" << ds.n_rows() << " rows) and " << schema.string() << "\n";
  return 0;
}

// --- train-ctgan ------------------------------------------------------------

struct TrainFlags {
  DataFlags data;
  std::string out;
  int epochs = 300;
  std::uint64_t seed = 0;
  double tau_percentile = 50.0;
  double validation_fraction = 0.1;
  int batch_size = 500;
};

int cmd_train_ctgan(const TrainFlags& f) {
  const auto ds = load_data(f.data);
  if (f.epochs < 1) throw ConfigError("--epochs must be >= 1");
  const auto [train, val] = dataio::split(ds, f.validation_fraction, derive_seed(f.seed, "ctgan-split"));
  const auto t = dataio::Transformer::fit(train, dataio::ContinuousMode::kGmm);
  ctgan::CtganConfig cfg;
  cfg.epochs = f.epochs;
  cfg.batch_size = f.batch_size;
  auto model = ctgan::ctgan_train(train, t, cfg, f.seed);
  model.tau = ctgan::calibrate_tau(model, val.rows, f.tau_percentile);
  ctgan::save_bundle(model, f.out);
  const auto& last = model.log.back();
  std::cout << "epochs " << model.epochs << ", final critic loss " << last.critic_loss
            << ", final generator loss " << last.generator_loss << ", tau (p" << f.tau_percentile
            << ") " << model.tau << "\nbundle written to " << f.out << "\n";
  return 0;
}

// --- explain ------------------------------------------------------------------

struct ExplainFlags {
  DataFlags data;
  std::string blackbox = "biased";
  std::string kind;
  std::string bundle;
  std::size_t instance = 0;
  std::string sampler = "vanilla";
  std::size_t k = 5;
  std::uint64_t seed = 0;
  std::string out;
  std::size_t n_samples = 1000;
};

// biased | innocuous | constant | scaffold:<dir> | forest:<file>
std::unique_ptr<models::Classifier> load_blackbox(const std::string& spec, const dataio::Dataset& ds,
                                                  const std::string& kind) {
  if (spec == "biased") return std::make_unique<models::RuleModel>(models::biased_classifier(kind, ds.schema));
  if (spec == "innocuous") return std::make_unique<models::RuleModel>(models::innocuous_model("unrelated_0", ds.schema));
  if (spec == "constant") return std::make_unique<models::ConstantModel>(Vector::Constant(2, 0.5));
  if (spec.rfind("scaffold:", 0) == 0) {
    return std::make_unique<models::Scaffold>(attack::load_scaffold_bundle(spec.substr(9), ds.schema).scaffold);
  }
  if (spec.rfind("forest:", 0) == 0) return std::make_unique<models::Forest>(models::load_forest(spec.substr(7)));
  throw ConfigError("unknown --blackbox " + spec + " (biased, innocuous, constant, scaffold:<dir>, forest:<file>)");
}

int cmd_explain(const ExplainFlags& f) {
  const auto ds = load_data(f.data);
  const auto sampler = explain::parse_sampler(f.sampler);
  if (f.k < 1 || f.k > ds.n_features()) {
    throw ConfigError("--k must lie in [1, " + std::to_string(ds.n_features()) + "]");
  }
  if (f.instance >= ds.n_rows()) throw ConfigError("--instance out of range");
  std::unique_ptr<ctgan::CtganModel> model;
  if (sampler != explain::SamplerKind::kVanilla) {
    if (f.bundle.empty()) throw ConfigError("--sampler " + f.sampler + " needs --model-bundle");
    model = std::make_unique<ctgan::CtganModel>(ctgan::load_bundle(f.bundle));
  }
  const auto f_model = load_blackbox(f.blackbox, ds, f.kind.empty() ? infer_kind(ds.schema) : f.kind);
  const auto t = dataio::Transformer::fit(ds, dataio::ContinuousMode::kZScore);
  explain::ExplainConfig ec;
  ec.n_samples = f.n_samples;
  const RowVector x = ds.rows.row(static_cast<Eigen::Index>(f.instance));
  auto e = explain::explain_instance(*f_model, x, sampler, t, model.get(), ec, f.seed);
  e.instance_id = static_cast<std::int64_t>(f.instance);
  auto j = e.to_json();
  j["top_k"] = explain::top_k(e, f.k);
  const std::string text = j.dump(2) + "\n";
  if (!f.out.empty()) write_file(f.out, text);
  std::cout << text;
  return 0;
}

// --- attack ---------------------------------------------------------------------

struct AttackFlags {
  DataFlags data;
  std::string setting;
  std::string defender;
  std::string kind;
  std::string out;
  std::uint64_t seed = 0;
};

int cmd_attack(const AttackFlags& f) {
  const auto setting = attack::parse_setting(f.setting);
  if (setting == attack::Setting::kWhitebox && f.defender.empty()) {
    throw ConfigError("--setting whitebox requires --defender-bundle");
  }
  const auto ds = load_data(f.data);
  const auto kind = f.kind.empty() ? infer_kind(ds.schema) : f.kind;
  const auto biased = models::biased_classifier(kind, ds.schema);
  const auto psi = models::innocuous_model("unrelated_0", ds.schema);
  const attack::AttackConfig cfg;
  const auto r = setting == attack::Setting::kBlackbox
                     ? attack::train_attack_blackbox(ds, biased, psi, cfg, f.seed)
                     : attack::train_attack_whitebox(ds, biased, psi, ctgan::load_bundle(f.defender), cfg, f.seed);
  attack::save_scaffold_bundle(r, f.out);
  std::cout << "setting " << attack::setting_name(r.setting) << ", critic held-out accuracy "
            << r.critic_accuracy << (r.weak ? " (weak)" : "") << "\nscaffold written to " << f.out << "\n";
  return 0;
}

// --- reproduce ----------------------------------------------------------------

struct ReproduceFlags {
  std::string config;
  std::string out;
  int jobs = 0;  // 0 keeps the config value
};

int cmd_reproduce(const ReproduceFlags& f) {
  auto cfg = eval::ExperimentConfig::load(f.config);
  if (f.jobs > 0) cfg.jobs = f.jobs;
  const auto result = eval::run_experiment(cfg);
  eval::write_outputs(result, cfg, f.out);
  for (const auto& d : result.diagnostics) {
    std::cout << d.dataset << ": tau " << d.tau << ", black-box critic " << d.blackbox_critic_accuracy
              << ", white-box critic " << d.whitebox_critic_accuracy << "\n";
  }
  std::cout << "reports written to " << f.out << "\n";
  if (!result.ok()) {
    for (const auto& m : result.failures) std::cerr << "failed: " << m << "\n";
    return kExitRuntime;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust LIME with CTGAN neighborhoods"};
  app.require_subcommand(1);

  MakeDataFlags md;
  auto* make_data = app.add_subcommand("make-data", "write a surrogate dataset and its schema");
  make_data->add_option("--kind", md.kind, "compas | german | communities")->required();
  make_data->add_option("--out-dir", md.out_dir, "output directory");
  make_data->add_option("--seed", md.seed, "generator seed");
  make_data->add_option("--rows", md.rows, "row count (0 = default size)");

  TrainFlags tf;
  auto* train = app.add_subcommand("train-ctgan", "train the defender CTGAN and write a bundle");
  add_data_flags(train, tf.data);
  train->add_option("--out", tf.out, "bundle directory")->required();
  train->add_option("--epochs", tf.epochs, "training epochs");
  train->add_option("--seed", tf.seed, "seed");
  train->add_option("--tau-percentile", tf.tau_percentile, "percentile of held-out critic scores used as tau")
      ->check(CLI::Range(0.0, 100.0));
  train->add_option("--validation-fraction", tf.validation_fraction, "held-out share for tau");
  train->add_option("--batch-size", tf.batch_size, "batch size");

  ExplainFlags ef;
  auto* expl = app.add_subcommand("explain", "explain one row");
  add_data_flags(expl, ef.data);
  expl->add_option("--blackbox", ef.blackbox, "biased | innocuous | constant | scaffold:<dir> | forest:<file>");
  expl->add_option("--kind", ef.kind, "dataset kind for the biased rule (inferred by default)");
  expl->add_option("--model-bundle", ef.bundle, "CTGAN bundle (ctgan samplers)");
  expl->add_option("--instance", ef.instance, "row index");
  expl->add_option("--sampler", ef.sampler, "vanilla | ctgan | ctgan_filtered");
  expl->add_option("--k", ef.k, "top-k features to list");
  expl->add_option("--seed", ef.seed, "seed");
  expl->add_option("--n-samples", ef.n_samples, "neighborhood size");
  expl->add_option("--out", ef.out, "also write the JSON here");

  AttackFlags af;
  auto* atk = app.add_subcommand("attack", "train an adversarial scaffold");
  add_data_flags(atk, af.data);
  atk->add_option("--setting", af.setting, "blackbox | whitebox")->required();
  atk->add_option("--defender-bundle", af.defender, "defender CTGAN bundle (whitebox)");
  atk->add_option("--kind", af.kind, "dataset kind (inferred by default)");
  atk->add_option("--out", af.out, "scaffold bundle directory")->required();
  atk->add_option("--seed", af.seed, "seed");

  ReproduceFlags rf;
  auto* rep = app.add_subcommand("reproduce", "run the experiment grid");
  rep->add_option("--config", rf.config, "experiment JSON")->required()->check(CLI::ExistingFile);
  rep->add_option("--out", rf.out, "output directory")->required();
  rep->add_option("--jobs", rf.jobs, "worker threads for per-instance explanations")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*make_data) return cmd_make_data(md);
    if (*train) return cmd_train_ctgan(tf);
    if (*expl) return cmd_explain(ef);
    if (*atk) return cmd_attack(af);
    if (*rep) return cmd_reproduce(rf);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
