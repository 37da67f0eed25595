#pragma once

#include "json.hpp"

#include <cstdint>
#include <string>
#include <vector>

#include "rlime/common.hpp"
#include "rlime/ctgan/ctgan.hpp"
#include "rlime/dataio/transformer.hpp"
#include "rlime/models/classifier.hpp"

namespace rlime::explain {

struct KernelConfig {
  double sigma = 1.0;

  // 0.75 * sqrt(number of features).
  static KernelConfig defaults(const dataio::Transformer& t);
};

enum class SamplerKind { kVanilla, kCtgan, kCtganFiltered };

std::string sampler_name(SamplerKind s);
SamplerKind parse_sampler(const std::string& name);

// Row 0 is x. Continuous feature j is x_j + std_j * eps; discrete features are
// drawn from the training frequencies.
Matrix gaussian_sample(const RowVector& x, const dataio::Transformer& t, std::size_t n,
                       std::uint64_t seed);

// 1 where z shares x's quartile bin (continuous) or category (discrete).
RowVector to_interpretable(const RowVector& x, const RowVector& z, const dataio::Transformer& t);
Matrix to_interpretable(const RowVector& x, const Matrix& rows, const dataio::Transformer& t);

// exp(-D^2 / sigma^2), D the L2 distance between standardized rows.
Vector kernel_weights(const RowVector& x, const Matrix& rows, const KernelConfig& kc,
                      const dataio::Transformer& t);

struct RidgeFit {
  Vector coef;
  double intercept = 0.0;
};

// argmin sum_i w_i (y_i - b.z_i - b0)^2 + alpha |b|^2 with an unpenalized
// intercept. Throws NumericError on a singular system when alpha = 0.
RidgeFit weighted_ridge(const Matrix& Z, const Vector& y, const Vector& w, double alpha);

struct ExplainConfig {
  std::size_t n_samples = 1000;
  std::size_t n_min = 200;
  int max_batches = 5;
  double alpha = 1.0;
  double sigma = 0.0;  // <= 0 -> KernelConfig::defaults
};

struct Neighborhood {
  Matrix rows;
  Matrix interpretable;
  Vector weights;
  Vector targets;  // probability of x's predicted class
  int predicted_class = 0;
};

struct Explanation {
  std::vector<std::string> features;
  Vector weights;  // one per feature, schema order
  double intercept = 0.0;
  double sigma = 0.0;
  SamplerKind sampler = SamplerKind::kVanilla;
  std::size_t n_used = 0;
  std::int64_t instance_id = -1;
  int predicted_class = 0;

  nlohmann::json to_json() const;
  static Explanation from_json(const nlohmann::json& j);
};

class NeighborhoodTooSmall : public Error {
 public:
  NeighborhoodTooSmall(std::size_t count, std::size_t needed);
  std::size_t count;
};

// Raw neighborhood rows for x. ctgan samplers need a model; ctgan_filtered
// keeps only rows (x included) with d(row) >= model.tau, drawing up to
// max_batches batches of n_samples until n_min rows survive.
Matrix sample_neighborhood(const RowVector& x, SamplerKind sampler, const dataio::Transformer& t,
                           const ctgan::CtganModel* model, const ExplainConfig& cfg,
                           std::uint64_t seed);

Neighborhood build_neighborhood(const models::Classifier& f, const RowVector& x, const Matrix& rows,
                                const dataio::Transformer& t, const KernelConfig& kc);

// Explanation of f at x from an already drawn neighborhood (row 0 need not be
// x). Lets one neighborhood serve several models.
Explanation explain_rows(const models::Classifier& f, const RowVector& x, const Matrix& rows,
                         SamplerKind sampler, const dataio::Transformer& t,
                         const ExplainConfig& cfg);
Explanation explain_instance(const models::Classifier& f, const RowVector& x, SamplerKind sampler,
                             const dataio::Transformer& t, const ctgan::CtganModel* model,
                             const ExplainConfig& cfg, std::uint64_t seed);

// Feature indices by |weight| descending, ties by index ascending.
std::vector<std::size_t> top_k_indices(const Explanation& e, std::size_t k);
std::vector<std::string> top_k(const Explanation& e, std::size_t k);

}  // namespace rlime::explain
