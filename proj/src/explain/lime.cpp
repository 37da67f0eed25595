#include "rlime/explain/lime.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rlime::explain {

using dataio::ColumnKind;

KernelConfig KernelConfig::defaults(const dataio::Transformer& t) {
  return {0.75 * std::sqrt(static_cast<double>(t.schema().size()))};
}

std::string sampler_name(SamplerKind s) {
  switch (s) {
    case SamplerKind::kVanilla: return "vanilla";
    case SamplerKind::kCtgan: return "ctgan";
    case SamplerKind::kCtganFiltered: return "ctgan_filtered";
  }
  return "vanilla";
}

SamplerKind parse_sampler(const std::string& name) {
  if (name == "vanilla") return SamplerKind::kVanilla;
  if (name == "ctgan") return SamplerKind::kCtgan;
  if (name == "ctgan_filtered") return SamplerKind::kCtganFiltered;
  throw ConfigError("unknown sampler '" + name + "' (expected vanilla, ctgan or ctgan_filtered)");
}

Matrix gaussian_sample(const RowVector& x, const dataio::Transformer& t, std::size_t n,
                       std::uint64_t seed) {
  if (n == 0) throw ConfigError("gaussian_sample: n must be >= 1");
  t.check_rows(x);
  Rng rng(seed);
  Matrix out(static_cast<Eigen::Index>(n), x.size());
  out.row(0) = x;
  const auto& encs = t.encoders();
  for (Eigen::Index i = 1; i < out.rows(); ++i) {
    for (std::size_t j = 0; j < encs.size(); ++j) {
      const auto& e = encs[j];
      const auto c = static_cast<Eigen::Index>(j);
      if (e.kind == ColumnKind::kDiscrete) {
        out(i, c) = static_cast<double>(sample_weighted(rng, e.frequencies));
      } else {
        out(i, c) = x(c) + e.std * standard_normal(rng);
      }
    }
  }
  return out;
}

RowVector to_interpretable(const RowVector& x, const RowVector& z, const dataio::Transformer& t) {
  const auto& encs = t.encoders();
  if (static_cast<std::size_t>(x.size()) != encs.size() || z.size() != x.size()) {
    throw ShapeError("to_interpretable: row width does not match the schema");
  }
  RowVector out(x.size());
  for (std::size_t j = 0; j < encs.size(); ++j) {
    const auto c = static_cast<Eigen::Index>(j);
    bool same = false;
    if (encs[j].kind == ColumnKind::kDiscrete) {
      same = x(c) == z(c);
    } else {
      same = t.quartile_bin(j, x(c)) == t.quartile_bin(j, z(c));
    }
    out(c) = same ? 1.0 : 0.0;
  }
  return out;
}

Matrix to_interpretable(const RowVector& x, const Matrix& rows, const dataio::Transformer& t) {
  Matrix out(rows.rows(), rows.cols());
  for (Eigen::Index i = 0; i < rows.rows(); ++i) out.row(i) = to_interpretable(x, RowVector(rows.row(i)), t);
  return out;
}

Vector kernel_weights(const RowVector& x, const Matrix& rows, const KernelConfig& kc,
                      const dataio::Transformer& t) {
  if (!(kc.sigma > 0.0)) throw ConfigError("kernel width must be > 0");
  const RowVector sx = t.standardize(x);
  const Matrix sz = t.standardize(rows);
  const Vector d2 = (sz.rowwise() - sx).rowwise().squaredNorm();
  return (-d2.array() / (kc.sigma * kc.sigma)).exp().matrix();
}

RidgeFit weighted_ridge(const Matrix& Z, const Vector& y, const Vector& w, double alpha) {
  if (Z.rows() < 2) throw ValidationError("weighted_ridge: need at least two rows");
  if (y.size() != Z.rows() || w.size() != Z.rows()) throw ShapeError("weighted_ridge: Z, y and w disagree in length");
  if (!(alpha >= 0.0)) throw ConfigError("weighted_ridge: alpha must be >= 0");
  if (w.minCoeff() < 0.0) throw ValidationError("weighted_ridge: negative weight");
  const double sw = w.sum();
  if (!(sw > 0.0)) throw NumericError("weighted_ridge: weights sum to zero");

  const RowVector zbar = (w.transpose() * Z) / sw;
  const double ybar = w.dot(y) / sw;
  const Matrix Zc = Z.rowwise() - zbar;
  const Vector yc = y.array() - ybar;
  const Matrix ZtW = Zc.transpose() * w.asDiagonal();
  Matrix A = ZtW * Zc;
  A.diagonal().array() += alpha;
  const Vector b = ZtW * yc;

  RidgeFit fit;
  if (alpha > 0.0) {
    Eigen::LLT<Matrix> llt(A);
    if (llt.info() != Eigen::Success) throw NumericError("weighted_ridge: normal equations not positive definite");
    fit.coef = llt.solve(b);
  } else {
    Eigen::ColPivHouseholderQR<Matrix> qr(A);
    qr.setThreshold(1e-10);
    if (qr.rank() < A.cols()) {
      throw NumericError("weighted_ridge: singular system with alpha = 0; use alpha > 0");
    }
    fit.coef = qr.solve(b);
  }
  fit.intercept = ybar - zbar.dot(fit.coef);
  return fit;
}

NeighborhoodTooSmall::NeighborhoodTooSmall(std::size_t count_, std::size_t needed)
    : Error("filtered neighborhood has " + std::to_string(count_) + " rows, need " + std::to_string(needed)),
      count(count_) {}

Matrix sample_neighborhood(const RowVector& x, SamplerKind sampler, const dataio::Transformer& t,
                           const ctgan::CtganModel* model, const ExplainConfig& cfg,
                           std::uint64_t seed) {
  if (cfg.n_samples < 2) throw ConfigError("explain: n_samples must be >= 2");
  if (sampler == SamplerKind::kVanilla) return gaussian_sample(x, t, cfg.n_samples, seed);
  if (model == nullptr) throw ConfigError("explain: sampler '" + sampler_name(sampler) + "' needs a CTGAN model");
  t.check_rows(x);
  const Vector cond = ctgan::build_cond_vector_instance(model->transformer, x);

  if (sampler == SamplerKind::kCtgan) {
    Matrix out(static_cast<Eigen::Index>(cfg.n_samples), x.size());
    out.row(0) = x;
    out.bottomRows(out.rows() - 1) = ctgan::ctgan_sample(*model, cond, cfg.n_samples - 1, seed);
    return out;
  }

  // Filtered: x is a candidate like any generated row.
  std::vector<RowVector> kept;
  for (int b = 0; b < cfg.max_batches && kept.size() < cfg.n_min; ++b) {
    Matrix batch(static_cast<Eigen::Index>(cfg.n_samples), x.size());
    std::size_t first = 0;
    if (b == 0) {
      batch.row(0) = x;
      first = 1;
    }
    batch.bottomRows(batch.rows() - static_cast<Eigen::Index>(first)) =
        ctgan::ctgan_sample(*model, cond, cfg.n_samples - first, derive_seed(seed, "batch", static_cast<std::uint64_t>(b)));
    const Vector scores = ctgan::critic_score(*model, batch, cond);
    for (Eigen::Index i = 0; i < batch.rows(); ++i) {
      if (scores(i) >= model->tau) kept.push_back(batch.row(i));
    }
  }
  if (kept.size() < cfg.n_min) throw NeighborhoodTooSmall(kept.size(), cfg.n_min);
  Matrix out(static_cast<Eigen::Index>(kept.size()), x.size());
  for (std::size_t i = 0; i < kept.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = kept[i];
  return out;
}

Neighborhood build_neighborhood(const models::Classifier& f, const RowVector& x, const Matrix& rows,
                                const dataio::Transformer& t, const KernelConfig& kc) {
  Neighborhood nb;
  const Matrix px = f.predict_proba(x);
  nb.predicted_class = models::argmax_rows(px).front();
  nb.rows = rows;
  nb.interpretable = to_interpretable(x, rows, t);
  nb.weights = kernel_weights(x, rows, kc, t);
  nb.targets = f.predict_proba(rows).col(nb.predicted_class);
  return nb;
}

Explanation explain_rows(const models::Classifier& f, const RowVector& x, const Matrix& rows,
                         SamplerKind sampler, const dataio::Transformer& t,
                         const ExplainConfig& cfg) {
  const KernelConfig kc = cfg.sigma > 0.0 ? KernelConfig{cfg.sigma} : KernelConfig::defaults(t);
  const Neighborhood nb = build_neighborhood(f, x, rows, t, kc);
  const RidgeFit fit = weighted_ridge(nb.interpretable, nb.targets, nb.weights, cfg.alpha);

  Explanation e;
  e.features = t.schema().feature_names();
  e.weights = fit.coef;
  e.intercept = fit.intercept;
  e.sigma = kc.sigma;
  e.sampler = sampler;
  e.n_used = static_cast<std::size_t>(rows.rows());
  e.predicted_class = nb.predicted_class;
  return e;
}

Explanation explain_instance(const models::Classifier& f, const RowVector& x, SamplerKind sampler,
                             const dataio::Transformer& t, const ctgan::CtganModel* model,
                             const ExplainConfig& cfg, std::uint64_t seed) {
  const Matrix rows = sample_neighborhood(x, sampler, t, model, cfg, seed);
  return explain_rows(f, x, rows, sampler, t, cfg);
}

std::vector<std::size_t> top_k_indices(const Explanation& e, std::size_t k) {
  const auto n = static_cast<std::size_t>(e.weights.size());
  if (k < 1 || k > n) {
    throw ConfigError("top_k: k = " + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(e.weights(static_cast<Eigen::Index>(a))) > std::abs(e.weights(static_cast<Eigen::Index>(b)));
  });
  idx.resize(k);
  return idx;
}

std::vector<std::string> top_k(const Explanation& e, std::size_t k) {
  std::vector<std::string> out;
  for (auto i : top_k_indices(e, k)) out.push_back(e.features.at(i));
  return out;
}

nlohmann::json Explanation::to_json() const {
  nlohmann::json attr = nlohmann::json::array();
  for (auto i : top_k_indices(*this, static_cast<std::size_t>(weights.size()))) {
    attr.push_back({{"feature", features[i]}, {"weight", weights(static_cast<Eigen::Index>(i))}});
  }
  return {{"instance_id", instance_id},
          {"sampler", sampler_name(sampler)},
          {"sigma", sigma},
          {"n_used", n_used},
          {"intercept", intercept},
          {"predicted_class", predicted_class},
          {"features", features},
          {"attributions", attr}};
}

Explanation Explanation::from_json(const nlohmann::json& j) {
  try {
    Explanation e;
    e.instance_id = j.at("instance_id").get<std::int64_t>();
    e.sampler = parse_sampler(j.at("sampler").get<std::string>());
    e.sigma = j.at("sigma").get<double>();
    e.n_used = j.at("n_used").get<std::size_t>();
    e.intercept = j.at("intercept").get<double>();
    e.predicted_class = j.value("predicted_class", 0);
    e.features = j.at("features").get<std::vector<std::string>>();
    e.weights = Vector::Zero(static_cast<Eigen::Index>(e.features.size()));
    for (const auto& a : j.at("attributions")) {
      const auto name = a.at("feature").get<std::string>();
      const auto it = std::find(e.features.begin(), e.features.end(), name);
      if (it == e.features.end()) throw ParseError("attribution for unknown feature '" + name + "'");
      e.weights(it - e.features.begin()) = a.at("weight").get<double>();
    }
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(std::string("malformed explanation: ") + ex.what());
  }
}

}  // namespace rlime::explain
