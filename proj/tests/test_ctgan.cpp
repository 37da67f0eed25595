#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rlime/ctgan/ctgan.hpp"
#include "test_util.hpp"

using namespace rlime;
using namespace rlime::ctgan;
using dataio::ColumnKind;
using dataio::Dataset;
using dataio::LabelSpec;
using dataio::Schema;

namespace {

// Continuous bimodal column (modes at -5 and 5, 70/30) plus a discrete
// column with skewed categories.
Dataset bimodal_toy(std::size_t n, std::uint64_t seed) {
  Dataset ds;
  ds.schema = Schema({{"v", ColumnKind::kContinuous, {}},
                      {"c", ColumnKind::kDiscrete, {"a", "b", "c"}}},
                     "c", LabelSpec{"y", ColumnKind::kDiscrete, {"0", "1"}, ""});
  ds.rows.resize(static_cast<Eigen::Index>(n), 2);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    ds.rows(r, 0) = (uniform01(rng) < 0.7 ? -5.0 : 5.0) + 0.3 * standard_normal(rng);
    const double u = uniform01(rng);
    ds.rows(r, 1) = u < 0.6 ? 0.0 : (u < 0.9 ? 1.0 : 2.0);
    ds.labels.push_back(static_cast<int>(i % 2));
  }
  return ds;
}

CtganConfig small_config(int epochs) {
  CtganConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = 200;
  cfg.noise_dim = 16;
  cfg.generator_hidden = {64, 64};
  cfg.critic_hidden = {64, 64};
  cfg.adam.lr = 1e-3;
  return cfg;
}

nncore::MlpParams linear_critic(const RowVector& w) {
  nncore::MlpParams p;
  p.layers.push_back({Matrix(w), Vector::Constant(1, 0.5), nncore::Activation::kLinear});
  return p;
}

// Input-gradient norm by central differences on the critic output.
double fd_input_grad_norm(const nncore::MlpParams& c, const RowVector& x, Eigen::Index cols) {
  const double h = 1e-6;
  double s = 0.0;
  for (Eigen::Index j = 0; j < cols; ++j) {
    RowVector a = x;
    RowVector b = x;
    a(j) += h;
    b(j) -= h;
    const double g = (nncore::predict(c, a)(0, 0) - nncore::predict(c, b)(0, 0)) / (2 * h);
    s += g * g;
  }
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("gradient penalty of a linear critic is analytic") {
  RowVector w1(3);
  w1 << 0.6, 0.8, 0.0;
  Matrix x = Matrix::Random(5, 3);
  CHECK(std::abs(input_gradient_penalty(linear_critic(w1), x, 3, 10.0).penalty) <= 1e-9);

  RowVector w3(3);
  w3 << 3.0, 0.0, 0.0;
  const auto r = input_gradient_penalty(linear_critic(w3), x, 3, 10.0);
  CHECK(std::abs(r.penalty - 40.0) <= 1e-9);
  // d/dw lambda (||w|| - 1)^2 = 2 lambda (||w|| - 1) w / ||w||.
  CHECK(r.grads.weight[0](0, 0) == doctest::Approx(40.0));
  CHECK(r.grads.weight[0](0, 1) == doctest::Approx(0.0));
  CHECK(r.grads.bias[0](0) == 0.0);

  // Columns past penalized_cols do not count.
  RowVector w4(4);
  w4 << 0.6, 0.8, 0.0, 7.0;
  CHECK(input_gradient_penalty(linear_critic(w4), Matrix::Random(4, 4), 3, 10.0).penalty ==
        doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("gradient penalty value and gradient match finite differences") {
  Rng rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    auto c = nncore::mlp_init({4, 6, 5, 1},
                              {nncore::Activation::kLeakyRelu, nncore::Activation::kLeakyRelu,
                               nncore::Activation::kLinear},
                              100 + static_cast<std::uint64_t>(rep));
    for (auto& l : c.layers) l.bias = Vector::Random(l.bias.size()) * 0.2;
    Matrix x(3, 4);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = standard_normal(rng);
    const Eigen::Index cols = 3;
    const double lambda = 10.0;
    const auto r = input_gradient_penalty(c, x, cols, lambda);

    double oracle = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double nrm = fd_input_grad_norm(c, x.row(i), cols);
      oracle += (nrm - 1) * (nrm - 1);
    }
    oracle *= lambda / static_cast<double>(x.rows());
    CHECK(r.penalty == doctest::Approx(oracle).epsilon(1e-5));

    // Parameter gradient: the penalty is piecewise smooth in the weights.
    const double h = 1e-6;
    for (std::size_t l = 0; l < c.layers.size(); ++l) {
      for (Eigen::Index k = 0; k < c.layers[l].weight.size(); ++k) {
        auto plus = c;
        auto minus = c;
        plus.layers[l].weight.data()[k] += h;
        minus.layers[l].weight.data()[k] -= h;
        const double fd = (input_gradient_penalty(plus, x, cols, lambda).penalty -
                           input_gradient_penalty(minus, x, cols, lambda).penalty) /
                          (2 * h);
        const double an = r.grads.weight[l].data()[k];
        CHECK(std::abs(fd - an) <= 1e-3 * std::max(1e-3, std::abs(fd)));
      }
    }
  }
}

TEST_CASE("gradient_penalty only penalizes the data columns") {
  RowVector w(4);
  w << 0.6, 0.8, 5.0, 5.0;
  Rng rng(1);
  const auto r = gradient_penalty(linear_critic(w), Matrix::Random(6, 2), Matrix::Random(6, 2),
                                  Matrix::Random(6, 2), 10.0, rng);
  CHECK(r.penalty == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(gradient_penalty(linear_critic(w), Matrix::Random(6, 2), Matrix::Random(5, 2),
                                   Matrix::Random(6, 2), 10.0, rng),
                  ShapeError);
}

TEST_CASE("instance masks for hand-built layouts") {
  Dataset ds;
  ds.schema = Schema({{"p", ColumnKind::kDiscrete, {"a", "b"}},
                      {"v", ColumnKind::kContinuous, {}},
                      {"q", ColumnKind::kDiscrete, {"x", "y", "z"}}},
                     "p", LabelSpec{"y", ColumnKind::kDiscrete, {"0", "1"}, ""});
  ds.rows.resize(6, 3);
  ds.rows << 0, 1.0, 0, 1, 2.0, 1, 0, 3.0, 2, 1, 4.0, 0, 0, 5.0, 1, 1, 6.0, 2;
  ds.labels.assign(6, 0);
  const auto t = dataio::Transformer::fit(ds, dataio::ContinuousMode::kZScore);
  RowVector x(3);
  x << 1, 2.5, 0;
  Vector want(5);
  want << 0, 1, 1, 0, 0;
  CHECK(build_cond_vector_instance(t, x) == want);
  x << 0, 2.5, 3;
  CHECK_THROWS_AS(build_cond_vector_instance(t, x), ValidationError);

  Dataset one;
  one.schema = Schema({{"k", ColumnKind::kDiscrete, {"a", "b", "c", "d"}}}, "k",
                      LabelSpec{"y", ColumnKind::kDiscrete, {"0", "1"}, ""});
  one.rows = Matrix(4, 1);
  one.rows << 0, 1, 2, 3;
  one.labels.assign(4, 0);
  const auto t1 = dataio::Transformer::fit(one, dataio::ContinuousMode::kZScore);
  RowVector r(1);
  r << 3;
  Vector w4(4);
  w4 << 0, 0, 0, 1;
  CHECK(build_cond_vector_instance(t1, r) == w4);
}

TEST_CASE("training-condition edge cases") {
  Dataset ds;
  // Column k only ever holds "seen"; e is balanced over a and b.
  ds.schema = Schema({{"k", ColumnKind::kDiscrete, {"seen", "unseen"}}, {"e", ColumnKind::kDiscrete, {"a", "b", "never"}}}, "k",
                     LabelSpec{"y", ColumnKind::kDiscrete, {"0", "1"}, ""});
  ds.rows.resize(100, 2);
  for (Eigen::Index i = 0; i < 100; ++i) {
    ds.rows(i, 0) = 0;
    ds.rows(i, 1) = static_cast<double>(i % 2);
  }
  ds.labels.assign(100, 0);
  const auto t = dataio::Transformer::fit(ds, dataio::ContinuousMode::kZScore);
  Rng rng(12);
  int a = 0;
  int on_e = 0;
  for (int i = 0; i < 20000; ++i) {
    const auto c = sample_training_condition(t, rng);
    if (c.column == 0) {
      CHECK(c.category == 0);
      continue;
    }
    ++on_e;
    CHECK(c.category != 2);
    if (c.category == 0) ++a;
  }
  CHECK(on_e > 9000);
  CHECK(a / static_cast<double>(on_e) == doctest::Approx(0.5).epsilon(0.06));
}

TEST_CASE("conditional masks have one bit per discrete block") {
  const auto ds = bimodal_toy(300, 1);
  const auto t = dataio::Transformer::fit(ds, dataio::ContinuousMode::kGmm);
  const auto layout = CondLayout::from(t);
  REQUIRE(layout.blocks.size() == 1);
  CHECK(layout.width == 3);
  const Matrix m = build_cond_matrix(t, ds.rows);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    CHECK(m.row(i).sum() == 1.0);
    CHECK(m(i, static_cast<Eigen::Index>(ds.rows(i, 1))) == 1.0);
  }
  CHECK(build_cond_vector_instance(t, ds.rows.row(7)) == m.row(7).transpose());
}

TEST_CASE("training conditions follow log-frequency weights") {
  const auto ds = bimodal_toy(2000, 2);
  const auto t = dataio::Transformer::fit(ds, dataio::ContinuousMode::kGmm);
  const auto& freq = t.encoder(1).frequencies;
  std::vector<double> expect;
  double total = 0.0;
  for (double f : freq) {
    expect.push_back(std::log1p(f));
    total += std::log1p(f);
  }
  Rng rng(3);
  const int n = 30000;
  std::vector<int> counts(3, 0);
  for (int i = 0; i < n; ++i) {
    const auto c = sample_training_condition(t, rng);
    CHECK(c.block == 0);
    CHECK(c.bits.sum() == 1.0);
    CHECK(c.bits(static_cast<Eigen::Index>(c.category)) == 1.0);
    ++counts[c.category];
  }
  for (std::size_t k = 0; k < 3; ++k) {
    const double p = expect[k] / total;
    const double se = std::sqrt(p * (1 - p) / n);
    CHECK(std::abs(counts[k] / static_cast<double>(n) - p) < 4 * se);
  }
}

TEST_CASE("output head ranges and backward match finite differences") {
  const auto ds = bimodal_toy(300, 4);
  const auto t = dataio::Transformer::fit(ds, dataio::ContinuousMode::kGmm);
  const Eigen::Index w = static_cast<Eigen::Index>(t.encoded_width());
  Matrix raw(4, w);
  Rng rng(5);
  for (Eigen::Index i = 0; i < raw.size(); ++i) raw.data()[i] = 3.0 * standard_normal(rng);
  const Matrix act = apply_output_head(t, raw);
  const auto& e0 = t.encoder(0);
  const auto& e1 = t.encoder(1);
  for (Eigen::Index i = 0; i < act.rows(); ++i) {
    CHECK(std::abs(act(i, static_cast<Eigen::Index>(e0.offset))) <= 1.0);
    CHECK(act.row(i).segment(static_cast<Eigen::Index>(e0.offset) + 1, static_cast<Eigen::Index>(e0.width) - 1).sum() ==
          doctest::Approx(1.0));
    CHECK(act.row(i).segment(static_cast<Eigen::Index>(e1.offset), static_cast<Eigen::Index>(e1.width)).sum() ==
          doctest::Approx(1.0));
  }
  Matrix g(4, w);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = standard_normal(rng);
  const Matrix back = output_head_backward(t, act, g);
  const double h = 1e-6;
  for (Eigen::Index k = 0; k < raw.size(); ++k) {
    Matrix a = raw;
    Matrix b = raw;
    a.data()[k] += h;
    b.data()[k] -= h;
    const double fd = (apply_output_head(t, a).cwiseProduct(g).sum() - apply_output_head(t, b).cwiseProduct(g).sum()) / (2 * h);
    CHECK(back.data()[k] == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("percentile_lower and filter_samples") {
  std::vector<double> v;
  for (int i = 10; i >= 1; --i) v.push_back(i);
  CHECK(percentile_lower(v, 50.0) == 5.0);
  CHECK(percentile_lower(v, 0.0) == 1.0);
  CHECK(percentile_lower(v, 100.0) == 10.0);
  CHECK(percentile_lower(v, 51.0) == 6.0);
  CHECK_THROWS(percentile_lower({}, 50.0));

  Matrix rows(5, 1);
  rows << 0, 1, 2, 3, 4;
  Vector s(5);
  s << 0.3, -1.0, 0.5, 0.2, 0.9;
  const auto f = filter_samples(rows, s, 0.3);
  CHECK(f.kept == std::vector<std::size_t>{0, 2, 4});
  CHECK(f.rows.col(0).transpose() == RowVector::LinSpaced(3, 0, 4));
  CHECK_THROWS_AS(filter_samples(rows, s, 1.0), EmptyFilterError);
  CHECK(filter_samples(rows, s, -std::numeric_limits<double>::infinity()).kept.size() == 5);
  Vector s3(3);
  s3 << 1, -1, 0.5;
  CHECK(filter_samples(Matrix::Identity(3, 3), s3, 0.0).kept == std::vector<std::size_t>{0, 2});
  std::vector<double> hundred(100);
  std::iota(hundred.begin(), hundred.end(), 1.0);
  std::reverse(hundred.begin(), hundred.end());
  CHECK(percentile_lower(hundred, 50.0) == 50.0);
  CHECK(percentile_lower(hundred, 0.0) == 1.0);
}

TEST_CASE("training is deterministic per seed and bundles round trip") {
  const auto ds = bimodal_toy(400, 6);
  const auto t = dataio::Transformer::fit(ds, dataio::ContinuousMode::kGmm);
  const auto cfg = small_config(2);
  const auto a = ctgan_train(ds, t, cfg, 42);
  const auto b = ctgan_train(ds, t, cfg, 42);
  const auto c = ctgan_train(ds, t, cfg, 43);
  CHECK(a.generator.layers[0].weight == b.generator.layers[0].weight);
  for (std::size_t e = 0; e < a.log.size(); ++e) {
    CHECK(a.log[e].critic_loss == b.log[e].critic_loss);
    CHECK(a.log[e].generator_loss == b.log[e].generator_loss);
  }
  CHECK(a.critic.layers[2].weight == b.critic.layers[2].weight);
  CHECK(a.generator.layers[0].weight != c.generator.layers[0].weight);
  REQUIRE(a.log.size() == 2);
  CHECK(std::isfinite(a.log[1].critic_loss));
  CHECK(a.log[1].gradient_penalty >= 0.0);

  Vector cond = Vector::Zero(3);
  cond(1) = 1.0;
  const Matrix s1 = ctgan_sample(a, cond, 50, 9);
  CHECK(s1 == ctgan_sample(a, cond, 50, 9));
  t.check_rows(s1);

  auto a2 = a;
  a2.tau = calibrate_tau(a2, ds.rows.topRows(100));
  const auto dir = test::scratch_dir("ctgan_bundle");
  save_bundle(a2, dir);
  const auto l = load_bundle(dir);
  CHECK(l.tau == a2.tau);
  CHECK(ctgan_sample(l, cond, 50, 9) == s1);
  CHECK(critic_score(l, ds.rows.topRows(20)) == critic_score(a2, ds.rows.topRows(20)));
  CHECK_THROWS(calibrate_tau(a2, ds.rows.topRows(10)));
}

TEST_CASE("toy bimodal data is reproduced and conditioning is learned") {
  Dataset ds;
  ds.schema = Schema({{"v", ColumnKind::kContinuous, {}}, {"b", ColumnKind::kDiscrete, {"no", "yes"}}}, "b",
                     LabelSpec{"y", ColumnKind::kDiscrete, {"0", "1"}, ""});
  ds.rows.resize(1000, 2);
  Rng rng(7);
  for (Eigen::Index i = 0; i < 1000; ++i) {
    ds.rows(i, 0) = (uniform01(rng) < 0.6 ? -5.0 : 5.0) + 0.3 * standard_normal(rng);
    ds.rows(i, 1) = uniform01(rng) < 0.5 ? 1.0 : 0.0;
    ds.labels.push_back(static_cast<int>(i % 2));
  }
  const auto t = dataio::Transformer::fit(ds, dataio::ContinuousMode::kGmm);
  const auto m = ctgan_train(ds, t, small_config(300), 5);

  Matrix conds = Matrix::Zero(1000, 2);
  for (Eigen::Index i = 0; i < conds.rows(); ++i) conds(i, i % 2) = 1.0;
  const Matrix s = ctgan_sample_rows(m, conds, 10);
  t.check_rows(s);
  int low = 0;
  int high = 0;
  int honored = 0;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    if (std::abs(s(i, 0) + 5.0) <= 1.0) ++low;
    if (std::abs(s(i, 0) - 5.0) <= 1.0) ++high;
    if (s(i, 1) == static_cast<double>(i % 2)) ++honored;
  }
  const double n = static_cast<double>(s.rows());
  CHECK(low / n >= 0.2);
  CHECK(high / n >= 0.2);
  CHECK(honored / n >= 0.9);

  // p50 over held-out real rows keeps half of them, within one row.
  auto mt = m;
  const Matrix val = ds.rows.bottomRows(200);
  mt.tau = calibrate_tau(mt, val);
  const auto kept = filter_samples(val, critic_score(mt, val), mt.tau).kept.size();
  CHECK(std::abs(static_cast<double>(kept) - 100.0) <= 1.0);
}

TEST_CASE("critic scores real rows above uniform noise") {
  // Two tightly correlated columns: uniform noise breaks the dependence.
  Dataset ds;
  ds.schema = Schema({{"v", ColumnKind::kContinuous, {}},
                      {"w", ColumnKind::kContinuous, {}},
                      {"b", ColumnKind::kDiscrete, {"no", "yes"}}},
                     "b", LabelSpec{"y", ColumnKind::kDiscrete, {"0", "1"}, ""});
  ds.rows.resize(1000, 3);
  Rng rng(7);
  for (Eigen::Index i = 0; i < 1000; ++i) {
    ds.rows(i, 0) = (uniform01(rng) < 0.6 ? -5.0 : 5.0) + 0.3 * standard_normal(rng);
    ds.rows(i, 1) = ds.rows(i, 0) + 0.3 * standard_normal(rng);
    ds.rows(i, 2) = uniform01(rng) < 0.5 ? 1.0 : 0.0;
    ds.labels.push_back(static_cast<int>(i % 2));
  }
  const auto t = dataio::Transformer::fit(ds, dataio::ContinuousMode::kGmm);
  const auto m = ctgan_train(ds, t, small_config(300), 5);
  Matrix noise(1000, 3);
  for (Eigen::Index i = 0; i < noise.rows(); ++i) {
    noise(i, 0) = -6.0 + 12.0 * uniform01(rng);
    noise(i, 1) = -6.0 + 12.0 * uniform01(rng);
    noise(i, 2) = static_cast<double>(uniform_index(rng, 2));
  }
  const Vector real = critic_score(m, ds.rows);
  CHECK(real.size() == 1000);
  CHECK(real == critic_score(m, ds.rows));
  CHECK(real.mean() > critic_score(m, noise).mean());
}

TEST_CASE("all-continuous data trains and samples unconditioned") {
  Dataset ds;
  ds.schema = Schema({{"a", ColumnKind::kContinuous, {}}, {"b", ColumnKind::kContinuous, {}}}, "a",
                     LabelSpec{"y", ColumnKind::kDiscrete, {"0", "1"}, ""});
  ds.rows.resize(300, 2);
  Rng rng(9);
  for (Eigen::Index i = 0; i < 300; ++i) {
    ds.rows(i, 0) = standard_normal(rng);
    ds.rows(i, 1) = 3.0 + standard_normal(rng);
    ds.labels.push_back(0);
  }
  const auto t = dataio::Transformer::fit(ds, dataio::ContinuousMode::kGmm);
  CHECK(CondLayout::from(t).empty());
  CHECK(build_cond_vector_instance(t, ds.rows.row(0)).size() == 0);
  const auto m = ctgan_train(ds, t, small_config(2), 1);
  const Matrix s = ctgan_sample(m, Vector(0), 5, 2);
  CHECK(s.rows() == 5);
  t.check_rows(s);
  CHECK(critic_score(m, s).size() == 5);
}
