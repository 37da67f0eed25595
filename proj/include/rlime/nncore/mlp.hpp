#pragma once

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rlime/common.hpp"

namespace rlime::nncore {

enum class Activation { kRelu, kLeakyRelu, kTanh, kLinear, kSoftmax };

inline constexpr double kLeakySlope = 0.2;

std::string activation_name(Activation a);
Activation parse_activation(const std::string& name);
// True for activations whose derivative is piecewise constant.
bool is_piecewise_linear(Activation a);

struct Layer {
  Matrix weight;  // out x in
  Vector bias;    // out
  Activation activation = Activation::kLinear;

  Eigen::Index in() const { return weight.cols(); }
  Eigen::Index out() const { return weight.rows(); }
};

struct MlpParams {
  std::vector<Layer> layers;

  std::vector<int> layer_sizes() const;
  Eigen::Index input_size() const { return layers.front().in(); }
  Eigen::Index output_size() const { return layers.back().out(); }
  bool all_finite() const;
};

// Same shapes as the parameters they belong to.
struct ParamGrads {
  std::vector<Matrix> weight;
  std::vector<Vector> bias;

  static ParamGrads zeros_like(const MlpParams& p);
  ParamGrads& operator+=(const ParamGrads& other);
  ParamGrads& operator*=(double s);
};

// Glorot-uniform weights, zero biases. layer_sizes has one more entry than
// activations.
MlpParams mlp_init(const std::vector<int>& layer_sizes,
                   const std::vector<Activation>& activations, std::uint64_t seed);

// Batch rows are samples.
struct ForwardCache {
  std::vector<Matrix> inputs;  // input to each layer
  std::vector<Matrix> pre;     // pre-activation of each layer
  Matrix output;
};

ForwardCache forward(const MlpParams& p, const Matrix& batch);
Matrix predict(const MlpParams& p, const Matrix& batch);

struct Backward {
  ParamGrads params;
  Matrix input;  // d loss / d batch
};

// Reverse-mode pass given d loss / d output.
Backward backward(const MlpParams& p, const ForwardCache& cache, const Matrix& grad_output);

// Elementwise activation derivative at the given pre-activations. Not defined
// for softmax (its Jacobian is not diagonal).
Matrix activation_derivative(Activation a, const Matrix& pre);

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double eps = 1e-8;
};

class AdamState {
 public:
  AdamState() = default;
  AdamState(const MlpParams& p, AdamConfig cfg);

  // Throws NumericError naming the first layer holding a non-finite gradient;
  // parameters are untouched in that case.
  void step(MlpParams& p, const ParamGrads& g);

  std::int64_t steps() const { return step_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  ParamGrads m_;
  ParamGrads v_;
  std::int64_t step_ = 0;
};

// Versioned JSON envelope {version, layer_sizes, activations, weights, biases}.
nlohmann::json params_to_json(const MlpParams& p);
MlpParams params_from_json(const nlohmann::json& j);
void save_params(const MlpParams& p, const std::filesystem::path& path);
MlpParams load_params(const std::filesystem::path& path);

}  // namespace rlime::nncore
