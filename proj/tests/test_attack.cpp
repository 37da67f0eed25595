#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <filesystem>

#include "rlime/attack/attack.hpp"
#include "rlime/dataio/surrogate.hpp"
#include "rlime/explain/lime.hpp"
#include "test_util.hpp"

using namespace rlime;
using namespace rlime::attack;
namespace fs = std::filesystem;

namespace {

struct Fixture {
  dataio::Dataset train;
  dataio::Dataset test;
  models::RuleModel a;
  models::RuleModel psi;
  Fixture() {
    auto ds = dataio::append_uncorrelated_feature(dataio::make_surrogate("compas", 31, 3000), 32);
    std::tie(train, test) = dataio::split(ds, 0.1, 33);
    a = models::biased_classifier("compas", ds.schema);
    psi = models::innocuous_model("unrelated_0", ds.schema);
  }
};

const Fixture& fx() {
  static const Fixture f;
  return f;
}

const ctgan::CtganModel& defender() {
  static const ctgan::CtganModel m = [] {
    const auto& f = fx();
    ctgan::CtganConfig cc;
    cc.epochs = 10;
    cc.noise_dim = 16;
    cc.generator_hidden = {64};
    cc.critic_hidden = {64};
    return ctgan::ctgan_train(f.train, dataio::Transformer::fit(f.train, dataio::ContinuousMode::kGmm), cc, 5);
  }();
  return m;
}

double routed_share(const models::Scaffold& s, const Matrix& rows, bool to_biased) {
  const auto r = s.routes_to_biased(rows);
  return static_cast<double>(std::count(r.begin(), r.end(), to_biased)) / static_cast<double>(r.size());
}

}  // namespace

TEST_CASE("OOD set: counts, labels and deterministic shuffle") {
  Rng rng(1);
  Matrix real(100, 3);
  for (Eigen::Index i = 0; i < real.size(); ++i) real.data()[i] = standard_normal(rng);
  const PerturbationSampler shift = [](const Matrix& m, std::uint64_t) { return Matrix(m.array() + 10.0); };
  const auto set = build_ood_training_set(real, shift, 1, 7);
  CHECK(set.rows.rows() == 200);
  CHECK(std::count(set.labels.begin(), set.labels.end(), 1) == 100);
  CHECK(std::count(set.labels.begin(), set.labels.end(), 0) == 100);
  for (std::size_t i = 0; i < set.labels.size(); ++i) {
    const bool shifted = set.rows(static_cast<Eigen::Index>(i), 0) > 5.0;
    CHECK(set.labels[i] == (shifted ? 0 : 1));
  }
  const auto again = build_ood_training_set(real, shift, 1, 7);
  CHECK(again.rows == set.rows);
  CHECK(again.labels == set.labels);
  CHECK(build_ood_training_set(real, shift, 3, 7).rows.rows() == 400);
  CHECK(build_ood_training_set(real, std::vector<PerturbationSampler>{shift, shift}, 1, 7).rows.rows() == 300);
  CHECK_THROWS(build_ood_training_set(Matrix(0, 3), shift, 1, 7));
}

TEST_CASE("a critic cannot separate perturbations that equal their sources") {
  const auto& f = fx();
  const PerturbationSampler identity = [](const Matrix& m, std::uint64_t) { return m; };
  // Disjoint source rows for training and evaluation.
  const auto n = f.train.rows.rows();
  const auto set = build_ood_training_set(f.train.rows.topRows(n * 4 / 5), identity, 1, 3);
  OodSet held = build_ood_training_set(f.train.rows.bottomRows(n - n * 4 / 5), identity, 1, 4);
  const auto critic = models::rf_train(set.rows, set.labels, models::ForestConfig{}, 4, 2);
  const double acc = critic_accuracy(critic, held);
  CHECK(acc >= 0.4);
  CHECK(acc <= 0.6);
}

TEST_CASE("black-box attack on COMPAS") {
  const auto& f = fx();
  const auto r = train_attack_blackbox(f.train, f.a, f.psi, {}, 9);
  CHECK(r.setting == Setting::kBlackbox);
  CHECK(r.critic_accuracy >= 0.9);
  CHECK_FALSE(r.weak);
  CHECK(routed_share(r.scaffold, f.test.rows, true) >= 0.9);

  const auto tl = dataio::Transformer::fit(f.train, dataio::ContinuousMode::kZScore);
  const Matrix perturbed = gaussian_perturbations(tl)(f.test.rows, 10);
  CHECK(routed_share(r.scaffold, perturbed, false) >= 0.9);

  // Exact composition of the routing rule.
  const Matrix both = [&] {
    Matrix m(f.test.rows.rows() * 2, f.test.rows.cols());
    m << f.test.rows, perturbed;
    return m;
  }();
  const Vector c = r.scaffold.realness(both);
  const Matrix p = r.scaffold.predict_proba(both);
  for (Eigen::Index i = 0; i < both.rows(); ++i) {
    const auto& m = c(i) >= 0.5 ? f.a : f.psi;
    CHECK(p.row(i) == m.predict_proba(both.row(i)));
  }
}

TEST_CASE("attack construction is deterministic and bundles round trip") {
  const auto& f = fx();
  const auto r1 = train_attack_blackbox(f.train, f.a, f.psi, {}, 12);
  const auto r2 = train_attack_blackbox(f.train, f.a, f.psi, {}, 12);
  CHECK(r1.scaffold.critic().to_json() == r2.scaffold.critic().to_json());
  CHECK(r1.critic_accuracy == r2.critic_accuracy);

  const fs::path dir = fs::temp_directory_path() / "rlime_scaffold_bundle";
  fs::remove_all(dir);
  save_scaffold_bundle(r1, dir);
  for (const char* name : {"critic.json", "biased.json", "innocuous.json", "meta.json"}) {
    CHECK(fs::exists(dir / name));
  }
  const auto back = load_scaffold_bundle(dir, f.train.schema);
  CHECK(back.setting == Setting::kBlackbox);
  CHECK(back.seed == 12);
  CHECK(back.critic_accuracy == r1.critic_accuracy);
  CHECK(back.scaffold.predict_proba(f.test.rows) == r1.scaffold.predict_proba(f.test.rows));
  fs::remove_all(dir);
}

TEST_CASE("white-box critic detects defender samples better than the black-box critic") {
  const auto& f = fx();
  const auto& d = defender();
  const auto bb = train_attack_blackbox(f.train, f.a, f.psi, {}, 21);
  const auto wb = train_attack_whitebox(f.train, f.a, f.psi, d, {}, 21);
  CHECK(wb.setting == Setting::kWhitebox);
  const auto wb2 = train_attack_whitebox(f.train, f.a, f.psi, d, {}, 21);
  CHECK(wb.scaffold.critic().to_json() == wb2.scaffold.critic().to_json());

  // Paired evaluation on fresh defender samples conditioned on test rows.
  const Matrix fake = ctgan_perturbations(d)(f.test.rows, 99);
  const double wb_acc = routed_share(wb.scaffold, fake, false);
  const double bb_acc = routed_share(bb.scaffold, fake, false);
  CHECK(wb_acc > bb_acc);
}

TEST_CASE("setting names") {
  CHECK(parse_setting("blackbox") == Setting::kBlackbox);
  CHECK(parse_setting("whitebox") == Setting::kWhitebox);
  CHECK(setting_name(Setting::kWhitebox) == "whitebox");
  CHECK_THROWS_AS(parse_setting("greybox"), ConfigError);
}
