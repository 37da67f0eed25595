#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "rlime/ctgan/ctgan.hpp"
#include "rlime/dataio/dataset.hpp"
#include "rlime/models/forest.hpp"
#include "rlime/models/rules.hpp"

namespace rlime::attack {

// Row i of the result perturbs row i of the input.
using PerturbationSampler = std::function<Matrix(const Matrix& real, std::uint64_t seed)>;

struct OodSet {
  Matrix rows;
  std::vector<int> labels;  // 1 = real, 0 = perturbation
};

// Real rows plus per_row perturbations of each, shuffled with the seed.
OodSet build_ood_training_set(const Matrix& real, const PerturbationSampler& sampler,
                              std::size_t per_row, std::uint64_t seed);
// Same, with per_row perturbations from every sampler.
OodSet build_ood_training_set(const Matrix& real, const std::vector<PerturbationSampler>& samplers,
                              std::size_t per_row, std::uint64_t seed);

enum class Setting { kBlackbox, kWhitebox };

std::string setting_name(Setting s);
Setting parse_setting(const std::string& name);

struct AttackConfig {
  std::size_t perturbations_per_row = 1;
  // Share of source rows held out, with their perturbations, to measure the
  // critic.
  double holdout_fraction = 0.2;
  models::ForestConfig critic{};
  double min_accuracy = 0.55;
};

struct AttackResult {
  models::Scaffold scaffold;
  Setting setting = Setting::kBlackbox;
  std::uint64_t seed = 0;
  double critic_accuracy = 0.0;  // on the held-out part of the OOD set
  bool weak = false;             // critic_accuracy below cfg.min_accuracy
};

// Fraction of rows the forest labels correctly.
double critic_accuracy(const models::Forest& critic, const OodSet& set);

// Critic trained on Gaussian perturbations of ds (the attacker fits its own
// z-score transformer on ds). Never sees the defender's sampler.
AttackResult train_attack_blackbox(const dataio::Dataset& ds, const models::RuleModel& biased,
                                   const models::RuleModel& innocuous, const AttackConfig& cfg,
                                   std::uint64_t seed);

// Critic trained on defender CTGAN samples conditioned on each real row.
AttackResult train_attack_whitebox(const dataio::Dataset& ds, const models::RuleModel& biased,
                                   const models::RuleModel& innocuous,
                                   const ctgan::CtganModel& defender, const AttackConfig& cfg,
                                   std::uint64_t seed);

// Gaussian perturbation sampler around each row (vanilla LIME strategy).
PerturbationSampler gaussian_perturbations(const dataio::Transformer& t);
// Defender generator conditioned on each row's categories.
PerturbationSampler ctgan_perturbations(const ctgan::CtganModel& model);

// critic.json, biased.json, innocuous.json, meta.json.
void save_scaffold_bundle(const AttackResult& r, const std::filesystem::path& dir);
AttackResult load_scaffold_bundle(const std::filesystem::path& dir, const dataio::Schema& schema);

}  // namespace rlime::attack
