#pragma once

#include "json.hpp"

#include <array>
#include <cstdint>
#include <vector>

#include "rlime/common.hpp"
#include "rlime/dataio/dataset.hpp"

namespace rlime::dataio {

struct GmmParams {
  std::vector<double> means;
  std::vector<double> stds;
  std::vector<double> weights;
  // Mean per-sample log-likelihood after each EM iteration.
  std::vector<double> loglik_trace;
  int iterations = 0;

  std::size_t n_components() const { return means.size(); }
  // Posterior component probabilities for a value.
  std::vector<double> responsibilities(double value) const;
};

struct GmmOptions {
  int max_iter = 200;
  double tol = 1e-6;
  double min_weight = 0.005;
  double std_floor = 1e-6;
};

// Plain EM for a 1-D Gaussian mixture. K is reduced to the number of distinct
// values when larger. Components lighter than min_weight are pruned after
// convergence and the remaining weights renormalized.
GmmParams fit_gmm(const std::vector<double>& values, int K, const GmmOptions& opts = {});

enum class ContinuousMode { kZScore, kGmm };

struct ColumnEncoder {
  ColumnKind kind = ColumnKind::kContinuous;
  std::size_t offset = 0;
  std::size_t width = 0;

  // Discrete.
  std::size_t n_categories = 0;
  std::vector<double> frequencies;  // training counts per category

  // Continuous. mean/std are always fitted: they define LIME's standardized
  // distance space and the Gaussian sampler's scale even in gmm mode.
  bool uses_gmm = false;
  bool gmm_fallback = false;  // EM failed; column encoded with z-score
  bool std_clamped = false;   // constant column; std forced to 1
  bool integral = false;      // every training value is whole; decode rounds
  double mean = 0.0;
  double std = 1.0;
  GmmParams gmm;
  double min = 0.0;
  double max = 0.0;
  std::array<double, 3> quartiles{};
};

// How a GMM-encoded continuous value picks its mode.
enum class ModeSelection { kSample, kMostLikely };

class Transformer {
 public:
  static constexpr double kAlphaClip = 1.0;
  static constexpr double kAlphaScale = 4.0;

  static Transformer fit(const Dataset& ds, ContinuousMode mode, int K = 5,
                         const GmmOptions& gmm_opts = {});

  const Schema& schema() const { return schema_; }
  const std::vector<ColumnEncoder>& encoders() const { return encoders_; }
  const ColumnEncoder& encoder(std::size_t column) const { return encoders_.at(column); }
  std::size_t encoded_width() const { return width_; }
  ContinuousMode mode() const { return mode_; }

  // kSample draws the mode with probability proportional to responsibility
  // (rng required); kMostLikely takes the argmax and is deterministic.
  Matrix encode(const Matrix& rows, ModeSelection selection, Rng* rng = nullptr) const;
  Matrix encode(const Matrix& rows) const { return encode(rows, ModeSelection::kMostLikely); }
  // Discrete and mode blocks by argmax (lowest index wins ties); continuous
  // values clipped to the training range and rounded for integral columns.
  Matrix decode(const Matrix& encoded) const;

  // LIME distance space: continuous -> (v - mean) / std, discrete -> one-hot.
  Matrix standardize(const Matrix& rows) const;
  std::size_t standardized_width() const;

  // Number of quartile edges strictly below the value (0..3).
  int quartile_bin(std::size_t column, double value) const;

  // Throws ValidationError naming the row on out-of-schema values.
  void check_rows(const Matrix& rows) const;

  nlohmann::json to_json() const;
  static Transformer from_json(const nlohmann::json& j);

 private:
  Schema schema_;
  ContinuousMode mode_ = ContinuousMode::kZScore;
  std::vector<ColumnEncoder> encoders_;
  std::size_t width_ = 0;
};

struct PcaModel {
  Vector mean;
  Matrix components;  // n_components x width, rows orthonormal
  Vector explained_variance;
};

PcaModel pca_fit(const Matrix& data, std::size_t n_components);
Matrix pca_project(const PcaModel& model, const Matrix& data);
Matrix pca_reconstruct(const PcaModel& model, const Matrix& projected);

// Linear-interpolated quantile of an already sorted sample.
double sorted_quantile(const std::vector<double>& sorted, double q);

}  // namespace rlime::dataio
