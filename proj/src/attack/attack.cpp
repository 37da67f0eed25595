#include "rlime/attack/attack.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "rlime/explain/lime.hpp"

namespace rlime::attack {

std::string setting_name(Setting s) { return s == Setting::kBlackbox ? "blackbox" : "whitebox"; }

Setting parse_setting(const std::string& name) {
  if (name == "blackbox") return Setting::kBlackbox;
  if (name == "whitebox") return Setting::kWhitebox;
  throw ConfigError("unknown setting '" + name + "' (expected blackbox or whitebox)");
}

OodSet build_ood_training_set(const Matrix& real, const PerturbationSampler& sampler,
                              std::size_t per_row, std::uint64_t seed) {
  return build_ood_training_set(real, std::vector<PerturbationSampler>{sampler}, per_row, seed);
}

OodSet build_ood_training_set(const Matrix& real, const std::vector<PerturbationSampler>& samplers,
                              std::size_t per_row, std::uint64_t seed) {
  if (real.rows() < 1) throw ValidationError("build_ood_training_set: no real rows");
  if (samplers.empty()) throw ConfigError("build_ood_training_set: no perturbation sampler");
  const Eigen::Index n = real.rows();
  const std::size_t blocks = per_row * samplers.size();
  Matrix all(n * static_cast<Eigen::Index>(1 + blocks), real.cols());
  std::vector<int> labels(static_cast<std::size_t>(all.rows()), 0);
  all.topRows(n) = real;
  std::fill(labels.begin(), labels.begin() + n, 1);
  for (std::size_t b = 0; b < blocks; ++b) {
    const Matrix p = samplers[b % samplers.size()](real, derive_seed(seed, "perturb", b));
    if (p.rows() != n || p.cols() != real.cols()) throw ShapeError("perturbation sampler returned the wrong shape");
    all.middleRows(n * static_cast<Eigen::Index>(1 + b), n) = p;
  }
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, "shuffle"));
  shuffle_in_place(rng, order);
  OodSet out;
  out.rows.resize(all.rows(), all.cols());
  out.labels.resize(labels.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    out.rows.row(static_cast<Eigen::Index>(i)) = all.row(static_cast<Eigen::Index>(order[i]));
    out.labels[i] = labels[order[i]];
  }
  return out;
}

double critic_accuracy(const models::Forest& critic, const OodSet& set) {
  if (set.labels.empty()) throw ValidationError("critic_accuracy: empty set");
  const auto pred = critic.predict(set.rows);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == set.labels[i];
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

PerturbationSampler gaussian_perturbations(const dataio::Transformer& t) {
  return [t](const Matrix& real, std::uint64_t seed) {
    Matrix out(real.rows(), real.cols());
    for (Eigen::Index i = 0; i < real.rows(); ++i) {
      const Matrix s = explain::gaussian_sample(real.row(i), t, 2, derive_seed(seed, static_cast<std::uint64_t>(i)));
      out.row(i) = s.row(1);
    }
    return out;
  };
}

PerturbationSampler ctgan_perturbations(const ctgan::CtganModel& model) {
  return [&model](const Matrix& real, std::uint64_t seed) {
    return ctgan::ctgan_sample_rows(model, ctgan::build_cond_matrix(model.transformer, real), seed);
  };
}

namespace {

AttackResult assemble(const dataio::Dataset& ds, const models::RuleModel& biased,
                      const models::RuleModel& innocuous, const std::vector<PerturbationSampler>& samplers,
                      Setting setting, const AttackConfig& cfg, std::uint64_t seed) {
  if (!(cfg.holdout_fraction > 0.0 && cfg.holdout_fraction < 1.0)) {
    throw ConfigError("attack: holdout_fraction must lie in (0, 1)");
  }
  if (cfg.perturbations_per_row < 1) throw ConfigError("attack: perturbations_per_row must be >= 1");
  // Split by source row so a real row and its perturbations never straddle
  // the train/held-out boundary.
  const auto n = static_cast<Eigen::Index>(ds.n_rows());
  const auto n_test = static_cast<Eigen::Index>(std::llround(cfg.holdout_fraction * static_cast<double>(n)));
  if (n_test < 1 || n_test >= n) throw ValidationError("attack: too few rows for a held-out split");
  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, "holdout"));
  shuffle_in_place(rng, order);
  auto gather = [&](std::size_t from, std::size_t to) {
    Matrix m(static_cast<Eigen::Index>(to - from), ds.rows.cols());
    for (std::size_t i = from; i < to; ++i) m.row(static_cast<Eigen::Index>(i - from)) = ds.rows.row(static_cast<Eigen::Index>(order[i]));
    return m;
  };
  const auto n_train = static_cast<std::size_t>(n - n_test);
  const OodSet set = build_ood_training_set(gather(0, n_train), samplers, cfg.perturbations_per_row, derive_seed(seed, "ood"));
  const OodSet held = build_ood_training_set(gather(n_train, order.size()), samplers, cfg.perturbations_per_row,
                                             derive_seed(seed, "ood-holdout"));

  AttackResult r;
  models::Forest critic = models::rf_train(set.rows, set.labels, cfg.critic, derive_seed(seed, "critic"), 2);
  r.critic_accuracy = critic_accuracy(critic, held);
  r.weak = r.critic_accuracy < cfg.min_accuracy;
  r.scaffold = models::Scaffold(biased, innocuous, std::move(critic));
  r.setting = setting;
  r.seed = seed;
  return r;
}

}  // namespace

AttackResult train_attack_blackbox(const dataio::Dataset& ds, const models::RuleModel& biased,
                                   const models::RuleModel& innocuous, const AttackConfig& cfg,
                                   std::uint64_t seed) {
  const auto t = dataio::Transformer::fit(ds, dataio::ContinuousMode::kZScore);
  return assemble(ds, biased, innocuous, {gaussian_perturbations(t)}, Setting::kBlackbox, cfg, seed);
}

AttackResult train_attack_whitebox(const dataio::Dataset& ds, const models::RuleModel& biased,
                                   const models::RuleModel& innocuous,
                                   const ctgan::CtganModel& defender, const AttackConfig& cfg,
                                   std::uint64_t seed) {
  if (defender.transformer.schema().feature_names() != ds.schema.feature_names()) {
    throw SchemaError("white-box attack: defender model was trained on a different schema");
  }
  return assemble(ds, biased, innocuous, {ctgan_perturbations(defender)}, Setting::kWhitebox, cfg, seed);
}

namespace {

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump() << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("cannot parse " + path.string() + ": " + e.what());
  }
}

}  // namespace

void save_scaffold_bundle(const AttackResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  models::save_forest(r.scaffold.critic(), dir / "critic.json");
  write_json(dir / "biased.json", r.scaffold.biased().to_json());
  write_json(dir / "innocuous.json", r.scaffold.innocuous().to_json());
  write_json(dir / "meta.json", {{"version", 1},
                                 {"setting", setting_name(r.setting)},
                                 {"seed", r.seed},
                                 {"critic_accuracy", r.critic_accuracy},
                                 {"weak", r.weak},
                                 {"routing_threshold", models::Scaffold::kRoutingThreshold}});
}

AttackResult load_scaffold_bundle(const std::filesystem::path& dir, const dataio::Schema& schema) {
  AttackResult r;
  auto critic = models::load_forest(dir / "critic.json");
  if (critic.width != schema.size()) throw SchemaError("scaffold critic width does not match the schema");
  r.scaffold = models::Scaffold(models::RuleModel::from_json(read_json(dir / "biased.json"), schema),
                                models::RuleModel::from_json(read_json(dir / "innocuous.json"), schema),
                                std::move(critic));
  const auto meta = read_json(dir / "meta.json");
  try {
    if (meta.at("version").get<int>() != 1) throw ParseError("unsupported scaffold bundle version");
    r.setting = parse_setting(meta.at("setting").get<std::string>());
    r.seed = meta.at("seed").get<std::uint64_t>();
    r.critic_accuracy = meta.at("critic_accuracy").get<double>();
    r.weak = meta.at("weak").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed scaffold meta.json: ") + e.what());
  }
  return r;
}

}  // namespace rlime::attack
