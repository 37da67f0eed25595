#pragma once

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <vector>

#include "rlime/common.hpp"
#include "rlime/dataio/dataset.hpp"
#include "rlime/dataio/transformer.hpp"
#include "rlime/nncore/mlp.hpp"

namespace rlime::ctgan {

// One block of the conditional vector per discrete column, in schema order.
struct CondBlock {
  std::size_t column;  // schema column index
  std::size_t offset;  // offset inside the conditional vector
  std::size_t width;   // number of categories
  std::size_t encoded_offset;  // offset of the column's one-hot in the encoded row
};

struct CondLayout {
  std::vector<CondBlock> blocks;
  std::size_t width = 0;

  static CondLayout from(const dataio::Transformer& t);
  bool empty() const { return blocks.empty(); }
};

// Concatenated one-hot masks with exactly one bit per block at the row's
// category. Width zero when the schema has no discrete columns.
Vector build_cond_vector_instance(const dataio::Transformer& t, const RowVector& x);
// Row i holds the instance mask of rows.row(i).
Matrix build_cond_matrix(const dataio::Transformer& t, const Matrix& rows);

struct TrainingCondition {
  Vector bits;
  std::size_t block = 0;     // index into CondLayout::blocks
  std::size_t column = 0;    // schema column
  std::size_t category = 0;
};

// Column uniform over discrete columns; category with probability
// proportional to log(1 + training frequency). Requires a discrete column.
TrainingCondition sample_training_condition(const dataio::Transformer& t, Rng& rng);

// How softmax blocks of the generator output become categories at sampling
// time. kArgmax takes the largest probability; kCategorical draws from the
// softmax (equivalent to argmax over Gumbel-perturbed logits).
enum class DiscreteSampling { kArgmax, kCategorical };

struct CtganConfig {
  int epochs = 300;
  int batch_size = 500;
  int noise_dim = 128;
  double lambda = 10.0;
  int critic_steps = 1;
  std::vector<int> generator_hidden = {256, 256};
  std::vector<int> critic_hidden = {256, 256};
  nncore::AdamConfig adam{};
  double cond_loss_weight = 1.0;
  DiscreteSampling sampling = DiscreteSampling::kArgmax;
  // Temperature of an optional Gumbel-softmax on the softmax spans of the
  // generator output during training. 0 (default) trains on the plain softmax.
  double gumbel_temperature = 0.0;
};

struct EpochLog {
  int epoch = 0;
  double critic_loss = 0.0;
  double generator_loss = 0.0;
  double gradient_penalty = 0.0;
};

struct CtganModel {
  nncore::MlpParams generator;
  nncore::MlpParams critic;
  dataio::Transformer transformer;
  CondLayout layout;
  int noise_dim = 128;
  double lambda = 10.0;
  double tau = -std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;
  int epochs = 0;
  DiscreteSampling sampling = DiscreteSampling::kArgmax;
  std::vector<EpochLog> log;
};

// Generator output activations: tanh on each GMM alpha, softmax on each mode
// block and each discrete block, identity on z-scored columns.
Matrix apply_output_head(const dataio::Transformer& t, const Matrix& raw);
// Chain rule through apply_output_head.
Matrix output_head_backward(const dataio::Transformer& t, const Matrix& activated,
                            const Matrix& grad_activated);

struct PenaltyResult {
  double penalty = 0.0;
  nncore::ParamGrads grads;
};

// lambda * mean_b (||d critic / d input[b, :penalized_cols]|| - 1)^2 and its
// exact gradient w.r.t. the critic parameters. Needs a scalar-output critic
// with piecewise-linear activations.
PenaltyResult input_gradient_penalty(const nncore::MlpParams& critic, const Matrix& inputs,
                                     Eigen::Index penalized_cols, double lambda);

// WGAN-GP term at x_hat = u * real + (1 - u) * fake, u ~ U(0,1) per row; the
// condition columns are appended unchanged and are not penalized.
PenaltyResult gradient_penalty(const nncore::MlpParams& critic, const Matrix& real,
                               const Matrix& fake, const Matrix& cond, double lambda, Rng& rng);

CtganModel ctgan_train(const dataio::Dataset& ds, const dataio::Transformer& t,
                       const CtganConfig& cfg, std::uint64_t seed);

// n rows from g(z, m) with the same condition for every row.
Matrix ctgan_sample(const CtganModel& model, const Vector& cond, std::size_t n, std::uint64_t seed);
// One row per condition row.
Matrix ctgan_sample_rows(const CtganModel& model, const Matrix& conds, std::uint64_t seed);

// Raw critic outputs d(x) with the given condition appended to every row.
Vector critic_score(const CtganModel& model, const Matrix& rows, const Vector& cond);
// Condition rebuilt from each row's own categorical values.
Vector critic_score(const CtganModel& model, const Matrix& rows);

class EmptyFilterError : public Error {
 public:
  using Error::Error;
};

struct FilterResult {
  Matrix rows;
  std::vector<std::size_t> kept;
};

// Rows with score >= tau, order preserved. Throws EmptyFilterError when none
// survive.
FilterResult filter_samples(const Matrix& rows, const Vector& scores, double tau);

// Lower-percentile convention: sorted[ceil(p/100 * n) - 1], clamped to index 0.
double percentile_lower(std::vector<double> values, double percentile);
double calibrate_tau(const CtganModel& model, const Matrix& validation_rows, double percentile = 50.0);

// generator.json, critic.json, transformer.json, meta.json.
void save_bundle(const CtganModel& model, const std::filesystem::path& dir);
CtganModel load_bundle(const std::filesystem::path& dir);

}  // namespace rlime::ctgan
