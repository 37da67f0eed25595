#include "rlime/dataio/transformer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace rlime::dataio {
namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double log_normal_pdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return -0.5 * z * z - std::log(sigma) - kLogSqrt2Pi;
}

double log_sum_exp(const std::vector<double>& v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

// Mean log-likelihood and (optionally) the responsibility matrix.
double e_step(const std::vector<double>& x, const GmmParams& g,
              std::vector<std::vector<double>>* resp) {
  const std::size_t K = g.n_components();
  std::vector<double> lp(K);
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t k = 0; k < K; ++k) {
      lp[k] = g.weights[k] > 0.0
                  ? std::log(g.weights[k]) + log_normal_pdf(x[i], g.means[k], g.stds[k])
                  : -std::numeric_limits<double>::infinity();
    }
    const double lse = log_sum_exp(lp);
    total += lse;
    if (resp) {
      for (std::size_t k = 0; k < K; ++k) (*resp)[k][i] = std::exp(lp[k] - lse);
    }
  }
  return total / static_cast<double>(x.size());
}

}  // namespace

std::vector<double> GmmParams::responsibilities(double value) const {
  const std::size_t K = n_components();
  std::vector<double> lp(K);
  for (std::size_t k = 0; k < K; ++k) {
    lp[k] = std::log(weights[k]) + log_normal_pdf(value, means[k], stds[k]);
  }
  const double lse = log_sum_exp(lp);
  std::vector<double> out(K);
  for (std::size_t k = 0; k < K; ++k) out[k] = std::exp(lp[k] - lse);
  return out;
}

GmmParams fit_gmm(const std::vector<double>& values, int K, const GmmOptions& opts) {
  if (values.empty()) throw ValidationError("fit_gmm: no values");
  if (K < 1) throw ConfigError("fit_gmm: K must be >= 1");

  std::vector<double> distinct = values;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  const std::size_t comps = std::min<std::size_t>(static_cast<std::size_t>(K), distinct.size());

  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= n;

  GmmParams g;
  for (std::size_t k = 0; k < comps; ++k) {
    const auto pos = static_cast<std::size_t>(
        (static_cast<double>(k) + 0.5) * static_cast<double>(distinct.size()) / static_cast<double>(comps));
    g.means.push_back(distinct[std::min(pos, distinct.size() - 1)]);
    g.stds.push_back(std::max(std::sqrt(var) / static_cast<double>(comps), opts.std_floor));
    g.weights.push_back(1.0 / static_cast<double>(comps));
  }

  std::vector<std::vector<double>> resp(comps, std::vector<double>(values.size()));
  double ll = e_step(values, g, &resp);
  g.loglik_trace.push_back(ll);
  for (int it = 0; it < opts.max_iter; ++it) {
    for (std::size_t k = 0; k < comps; ++k) {
      double nk = 0.0;
      double sx = 0.0;
      for (std::size_t i = 0; i < values.size(); ++i) {
        nk += resp[k][i];
        sx += resp[k][i] * values[i];
      }
      if (nk <= 0.0) {
        g.weights[k] = 0.0;
        continue;
      }
      const double mu = sx / nk;
      double sxx = 0.0;
      for (std::size_t i = 0; i < values.size(); ++i) {
        const double d = values[i] - mu;
        sxx += resp[k][i] * d * d;
      }
      g.weights[k] = nk / n;
      g.means[k] = mu;
      g.stds[k] = std::max(std::sqrt(sxx / nk), opts.std_floor);
    }
    const double next = e_step(values, g, &resp);
    if (!std::isfinite(next)) throw NumericError("fit_gmm: log-likelihood became non-finite");
    g.loglik_trace.push_back(next);
    g.iterations = it + 1;
    const double gain = next - ll;
    ll = next;
    if (gain < opts.tol) break;
  }

  // Prune light components, keeping at least the heaviest one.
  const auto heaviest = static_cast<std::size_t>(
      std::max_element(g.weights.begin(), g.weights.end()) - g.weights.begin());
  GmmParams pruned;
  pruned.loglik_trace = g.loglik_trace;
  pruned.iterations = g.iterations;
  for (std::size_t k = 0; k < comps; ++k) {
    if (g.weights[k] >= opts.min_weight || k == heaviest) {
      pruned.means.push_back(g.means[k]);
      pruned.stds.push_back(g.stds[k]);
      pruned.weights.push_back(g.weights[k]);
    }
  }
  double total = 0.0;
  for (double w : pruned.weights) total += w;
  for (double& w : pruned.weights) w /= total;
  return pruned;
}

double sorted_quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw ValidationError("quantile of empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

Transformer Transformer::fit(const Dataset& ds, ContinuousMode mode, int K,
                             const GmmOptions& gmm_opts) {
  if (ds.n_rows() == 0) throw ValidationError("cannot fit a transformer on an empty dataset");
  if (mode == ContinuousMode::kGmm && K < 1) throw ConfigError("gmm mode needs K >= 1");
  ds.validate();

  Transformer t;
  t.schema_ = ds.schema;
  t.mode_ = mode;
  std::size_t offset = 0;
  const auto n = static_cast<double>(ds.n_rows());
  for (std::size_t j = 0; j < ds.schema.size(); ++j) {
    const auto& col = ds.schema.column(j);
    const auto cj = static_cast<Eigen::Index>(j);
    ColumnEncoder enc;
    enc.kind = col.kind;
    enc.offset = offset;
    if (col.is_discrete()) {
      enc.n_categories = col.categories.size();
      enc.frequencies.assign(enc.n_categories, 0.0);
      for (Eigen::Index i = 0; i < ds.rows.rows(); ++i) {
        enc.frequencies[static_cast<std::size_t>(ds.rows(i, cj))] += 1.0;
      }
      enc.width = enc.n_categories;
    } else {
      std::vector<double> v(ds.rows.col(cj).data(), ds.rows.col(cj).data() + ds.rows.rows());
      double m = 0.0;
      for (double x : v) m += x;
      m /= n;
      double var = 0.0;
      for (double x : v) var += (x - m) * (x - m);
      var /= n;
      enc.mean = m;
      enc.std = std::sqrt(var);
      if (!(enc.std > 0.0)) {
        enc.std = 1.0;
        enc.std_clamped = true;
      }
      std::vector<double> sorted = v;
      std::sort(sorted.begin(), sorted.end());
      enc.min = sorted.front();
      enc.max = sorted.back();
      enc.integral = std::all_of(v.begin(), v.end(), [](double x) { return x == std::round(x); });
      enc.quartiles = {sorted_quantile(sorted, 0.25), sorted_quantile(sorted, 0.5),
                       sorted_quantile(sorted, 0.75)};
      enc.width = 1;
      if (mode == ContinuousMode::kGmm) {
        try {
          enc.gmm = fit_gmm(v, K, gmm_opts);
          enc.uses_gmm = true;
          enc.width = 1 + enc.gmm.n_components();
        } catch (const NumericError&) {
          enc.gmm_fallback = true;
        }
      }
    }
    offset += enc.width;
    t.encoders_.push_back(std::move(enc));
  }
  t.width_ = offset;
  return t;
}

void Transformer::check_rows(const Matrix& rows) const {
  if (static_cast<std::size_t>(rows.cols()) != schema_.size()) {
    throw ShapeError("rows have " + std::to_string(rows.cols()) + " columns, schema has " +
                     std::to_string(schema_.size()));
  }
  for (std::size_t j = 0; j < encoders_.size(); ++j) {
    const auto& enc = encoders_[j];
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
      const double v = rows(i, static_cast<Eigen::Index>(j));
      if (!std::isfinite(v)) {
        throw ValidationError("row " + std::to_string(i) + ": non-finite value in '" +
                              schema_.column(j).name + "'");
      }
      if (enc.kind == ColumnKind::kDiscrete &&
          (v < 0 || v != std::floor(v) || v >= static_cast<double>(enc.n_categories))) {
        throw ValidationError("row " + std::to_string(i) + ": value " + std::to_string(v) +
                              " is not a category of '" + schema_.column(j).name + "'");
      }
    }
  }
}

Matrix Transformer::encode(const Matrix& rows, ModeSelection selection, Rng* rng) const {
  check_rows(rows);
  if (selection == ModeSelection::kSample && rng == nullptr) {
    throw ConfigError("sampled mode selection needs an rng");
  }
  Matrix out = Matrix::Zero(rows.rows(), static_cast<Eigen::Index>(width_));
  for (std::size_t j = 0; j < encoders_.size(); ++j) {
    const auto& enc = encoders_[j];
    const auto off = static_cast<Eigen::Index>(enc.offset);
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
      const double v = rows(i, static_cast<Eigen::Index>(j));
      if (enc.kind == ColumnKind::kDiscrete) {
        out(i, off + static_cast<Eigen::Index>(v)) = 1.0;
      } else if (!enc.uses_gmm) {
        out(i, off) = (v - enc.mean) / enc.std;
      } else {
        const auto p = enc.gmm.responsibilities(v);
        std::size_t k = 0;
        if (selection == ModeSelection::kSample) {
          k = sample_weighted(*rng, p);
        } else {
          k = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
        }
        const double alpha = (v - enc.gmm.means[k]) / (kAlphaScale * enc.gmm.stds[k]);
        out(i, off) = std::clamp(alpha, -kAlphaClip, kAlphaClip);
        out(i, off + 1 + static_cast<Eigen::Index>(k)) = 1.0;
      }
    }
  }
  return out;
}

Matrix Transformer::decode(const Matrix& encoded) const {
  if (static_cast<std::size_t>(encoded.cols()) != width_) {
    throw ShapeError("encoded matrix has width " + std::to_string(encoded.cols()) +
                     ", transformer expects " + std::to_string(width_));
  }
  Matrix out(encoded.rows(), static_cast<Eigen::Index>(encoders_.size()));
  for (std::size_t j = 0; j < encoders_.size(); ++j) {
    const auto& enc = encoders_[j];
    const auto off = static_cast<Eigen::Index>(enc.offset);
    const auto cj = static_cast<Eigen::Index>(j);
    for (Eigen::Index i = 0; i < encoded.rows(); ++i) {
      if (enc.kind == ColumnKind::kDiscrete) {
        Eigen::Index best = 0;
        encoded.row(i).segment(off, static_cast<Eigen::Index>(enc.width)).maxCoeff(&best);
        out(i, cj) = static_cast<double>(best);
        continue;
      }
      double v = 0.0;
      if (!enc.uses_gmm) {
        v = enc.mean + enc.std * encoded(i, off);
      } else {
        Eigen::Index k = 0;
        encoded.row(i).segment(off + 1, static_cast<Eigen::Index>(enc.gmm.n_components())).maxCoeff(&k);
        const auto ku = static_cast<std::size_t>(k);
        const double alpha = std::clamp(encoded(i, off), -kAlphaClip, kAlphaClip);
        v = alpha * kAlphaScale * enc.gmm.stds[ku] + enc.gmm.means[ku];
      }
      v = std::clamp(v, enc.min, enc.max);
      out(i, cj) = enc.integral ? std::round(v) : v;
    }
  }
  return out;
}

std::size_t Transformer::standardized_width() const {
  std::size_t w = 0;
  for (const auto& enc : encoders_) w += enc.kind == ColumnKind::kDiscrete ? enc.n_categories : 1;
  return w;
}

Matrix Transformer::standardize(const Matrix& rows) const {
  if (static_cast<std::size_t>(rows.cols()) != schema_.size()) {
    throw ShapeError("standardize: width mismatch");
  }
  Matrix out = Matrix::Zero(rows.rows(), static_cast<Eigen::Index>(standardized_width()));
  Eigen::Index off = 0;
  for (std::size_t j = 0; j < encoders_.size(); ++j) {
    const auto& enc = encoders_[j];
    const auto cj = static_cast<Eigen::Index>(j);
    if (enc.kind == ColumnKind::kDiscrete) {
      for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        out(i, off + static_cast<Eigen::Index>(rows(i, cj))) = 1.0;
      }
      off += static_cast<Eigen::Index>(enc.n_categories);
    } else {
      out.col(off) = (rows.col(cj).array() - enc.mean) / enc.std;
      off += 1;
    }
  }
  return out;
}

int Transformer::quartile_bin(std::size_t column, double value) const {
  const auto& q = encoders_.at(column).quartiles;
  return static_cast<int>(value > q[0]) + static_cast<int>(value > q[1]) +
         static_cast<int>(value > q[2]);
}

nlohmann::json Transformer::to_json() const {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& e : encoders_) {
    nlohmann::json jc{{"offset", e.offset}, {"width", e.width}};
    if (e.kind == ColumnKind::kDiscrete) {
      jc["frequencies"] = e.frequencies;
    } else {
      jc["mean"] = e.mean;
      jc["std"] = e.std;
      jc["std_clamped"] = e.std_clamped;
      jc["integral"] = e.integral;
      jc["min"] = e.min;
      jc["max"] = e.max;
      jc["quartiles"] = e.quartiles;
      jc["uses_gmm"] = e.uses_gmm;
      jc["gmm_fallback"] = e.gmm_fallback;
      if (e.uses_gmm) {
        jc["gmm"] = {{"means", e.gmm.means}, {"stds", e.gmm.stds}, {"weights", e.gmm.weights}};
      }
    }
    cols.push_back(std::move(jc));
  }
  return {{"version", 1},
          {"schema", schema_.to_json()},
          {"mode", mode_ == ContinuousMode::kGmm ? "gmm" : "zscore"},
          {"alpha_clip", kAlphaClip},
          {"alpha_scale", kAlphaScale},
          {"columns", cols}};
}

Transformer Transformer::from_json(const nlohmann::json& j) {
  try {
    if (j.at("version").get<int>() != 1) throw ParseError("unsupported transformer version");
    Transformer t;
    t.schema_ = Schema::from_json(j.at("schema"));
    t.mode_ = j.at("mode").get<std::string>() == "gmm" ? ContinuousMode::kGmm : ContinuousMode::kZScore;
    const auto& cols = j.at("columns");
    if (cols.size() != t.schema_.size()) throw ParseError("transformer/schema column count mismatch");
    std::size_t width = 0;
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const auto& jc = cols[c];
      ColumnEncoder e;
      e.kind = t.schema_.column(c).kind;
      e.offset = jc.at("offset").get<std::size_t>();
      e.width = jc.at("width").get<std::size_t>();
      if (e.kind == ColumnKind::kDiscrete) {
        e.frequencies = jc.at("frequencies").get<std::vector<double>>();
        e.n_categories = e.frequencies.size();
      } else {
        e.mean = jc.at("mean").get<double>();
        e.std = jc.at("std").get<double>();
        e.std_clamped = jc.at("std_clamped").get<bool>();
        e.integral = jc.value("integral", false);
        e.min = jc.at("min").get<double>();
        e.max = jc.at("max").get<double>();
        e.quartiles = jc.at("quartiles").get<std::array<double, 3>>();
        e.uses_gmm = jc.at("uses_gmm").get<bool>();
        e.gmm_fallback = jc.at("gmm_fallback").get<bool>();
        if (e.uses_gmm) {
          e.gmm.means = jc.at("gmm").at("means").get<std::vector<double>>();
          e.gmm.stds = jc.at("gmm").at("stds").get<std::vector<double>>();
          e.gmm.weights = jc.at("gmm").at("weights").get<std::vector<double>>();
        }
      }
      if (e.offset != width) throw ParseError("transformer offsets are not contiguous");
      width += e.width;
      t.encoders_.push_back(std::move(e));
    }
    t.width_ = width;
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed transformer: ") + e.what());
  }
}

PcaModel pca_fit(const Matrix& data, std::size_t n_components) {
  if (n_components == 0 || n_components > static_cast<std::size_t>(data.cols())) {
    throw ConfigError("pca_fit: n_components must lie in [1, width]");
  }
  if (data.rows() < 2) throw ValidationError("pca_fit: need at least 2 rows");
  PcaModel m;
  m.mean = data.colwise().mean().transpose();
  const Matrix centered = data.rowwise() - m.mean.transpose();
  Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinV);
  const auto k = static_cast<Eigen::Index>(n_components);
  m.components = svd.matrixV().leftCols(k).transpose();
  // Sign convention: largest-magnitude loading of each component positive.
  for (Eigen::Index r = 0; r < k; ++r) {
    Eigen::Index idx = 0;
    m.components.row(r).cwiseAbs().maxCoeff(&idx);
    if (m.components(r, idx) < 0) m.components.row(r) *= -1.0;
  }
  const Vector s = svd.singularValues().head(k);
  m.explained_variance = s.array().square() / static_cast<double>(data.rows() - 1);
  return m;
}

Matrix pca_project(const PcaModel& model, const Matrix& data) {
  if (data.cols() != model.mean.size()) throw ShapeError("pca_project: width mismatch");
  return (data.rowwise() - model.mean.transpose()) * model.components.transpose();
}

Matrix pca_reconstruct(const PcaModel& model, const Matrix& projected) {
  return (projected * model.components).rowwise() + model.mean.transpose();
}

}  // namespace rlime::dataio
