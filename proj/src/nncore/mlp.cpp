#include "rlime/nncore/mlp.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace rlime::nncore {

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kLeakyRelu: return "leaky_relu";
    case Activation::kTanh: return "tanh";
    case Activation::kLinear: return "linear";
    case Activation::kSoftmax: return "softmax";
  }
  return "linear";
}

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "leaky_relu") return Activation::kLeakyRelu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "linear") return Activation::kLinear;
  if (name == "softmax") return Activation::kSoftmax;
  throw ParseError("unknown activation '" + name + "'");
}

bool is_piecewise_linear(Activation a) {
  return a == Activation::kRelu || a == Activation::kLeakyRelu || a == Activation::kLinear;
}

std::vector<int> MlpParams::layer_sizes() const {
  std::vector<int> out;
  if (layers.empty()) return out;
  out.push_back(static_cast<int>(layers.front().in()));
  for (const auto& l : layers) out.push_back(static_cast<int>(l.out()));
  return out;
}

bool MlpParams::all_finite() const {
  for (const auto& l : layers) {
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

ParamGrads ParamGrads::zeros_like(const MlpParams& p) {
  ParamGrads g;
  for (const auto& l : p.layers) {
    g.weight.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
    g.bias.push_back(Vector::Zero(l.bias.size()));
  }
  return g;
}

ParamGrads& ParamGrads::operator+=(const ParamGrads& other) {
  if (other.weight.size() != weight.size()) throw ShapeError("gradient layer count mismatch");
  for (std::size_t i = 0; i < weight.size(); ++i) {
    weight[i] += other.weight[i];
    bias[i] += other.bias[i];
  }
  return *this;
}

ParamGrads& ParamGrads::operator*=(double s) {
  for (std::size_t i = 0; i < weight.size(); ++i) {
    weight[i] *= s;
    bias[i] *= s;
  }
  return *this;
}

MlpParams mlp_init(const std::vector<int>& layer_sizes,
                   const std::vector<Activation>& activations, std::uint64_t seed) {
  if (layer_sizes.size() < 2) throw ConfigError("mlp_init: need at least one layer");
  if (activations.size() + 1 != layer_sizes.size()) {
    throw ConfigError("mlp_init: need one activation per layer");
  }
  for (int s : layer_sizes) {
    if (s <= 0) throw ConfigError("mlp_init: zero-size layer");
  }
  Rng rng(seed);
  MlpParams p;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const int in = layer_sizes[l];
    const int out = layer_sizes[l + 1];
    const double a = std::sqrt(6.0 / static_cast<double>(in + out));
    Layer layer;
    layer.weight.resize(out, in);
    for (Eigen::Index r = 0; r < out; ++r) {
      for (Eigen::Index c = 0; c < in; ++c) layer.weight(r, c) = (2.0 * uniform01(rng) - 1.0) * a;
    }
    layer.bias = Vector::Zero(out);
    layer.activation = activations[l];
    p.layers.push_back(std::move(layer));
  }
  return p;
}

namespace {

Matrix apply_activation(Activation a, const Matrix& z) {
  switch (a) {
    case Activation::kRelu: return z.cwiseMax(0.0);
    case Activation::kLeakyRelu:
      return z.unaryExpr([](double v) { return v > 0.0 ? v : kLeakySlope * v; });
    case Activation::kTanh: return z.array().tanh().matrix();
    case Activation::kLinear: return z;
    case Activation::kSoftmax: {
      Matrix out(z.rows(), z.cols());
      for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const double m = z.row(i).maxCoeff();
        out.row(i) = (z.row(i).array() - m).exp();
        out.row(i) /= out.row(i).sum();
      }
      return out;
    }
  }
  return z;
}

}  // namespace

Matrix activation_derivative(Activation a, const Matrix& pre) {
  switch (a) {
    case Activation::kRelu:
      return pre.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
    case Activation::kLeakyRelu:
      return pre.unaryExpr([](double v) { return v > 0.0 ? 1.0 : kLeakySlope; });
    case Activation::kTanh:
      return (1.0 - pre.array().tanh().square()).matrix();
    case Activation::kLinear: return Matrix::Ones(pre.rows(), pre.cols());
    case Activation::kSoftmax: break;
  }
  throw ConfigError("softmax has no elementwise derivative");
}

ForwardCache forward(const MlpParams& p, const Matrix& batch) {
  if (p.layers.empty()) throw ConfigError("forward: empty network");
  if (batch.cols() != p.input_size()) {
    throw ShapeError("forward: batch width " + std::to_string(batch.cols()) +
                     " != input size " + std::to_string(p.input_size()));
  }
  ForwardCache cache;
  cache.inputs.reserve(p.layers.size());
  cache.pre.reserve(p.layers.size());
  Matrix a = batch;
  for (const auto& layer : p.layers) {
    Matrix z = a * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    cache.inputs.push_back(std::move(a));
    a = apply_activation(layer.activation, z);
    cache.pre.push_back(std::move(z));
  }
  cache.output = std::move(a);
  return cache;
}

Matrix predict(const MlpParams& p, const Matrix& batch) { return forward(p, batch).output; }

Backward backward(const MlpParams& p, const ForwardCache& cache, const Matrix& grad_output) {
  if (cache.pre.size() != p.layers.size()) throw ShapeError("backward: cache/network mismatch");
  if (grad_output.rows() != cache.output.rows() || grad_output.cols() != cache.output.cols()) {
    throw ShapeError("backward: grad_output shape does not match the forward output");
  }
  Backward out;
  out.params = ParamGrads::zeros_like(p);
  Matrix g = grad_output;  // d loss / d activation output of the current layer
  for (std::size_t l = p.layers.size(); l-- > 0;) {
    const auto& layer = p.layers[l];
    Matrix dz;
    if (layer.activation == Activation::kSoftmax) {
      const Matrix s = apply_activation(Activation::kSoftmax, cache.pre[l]);
      const Vector dots = (g.cwiseProduct(s)).rowwise().sum();
      dz = s.cwiseProduct(g.colwise() - dots);
    } else {
      dz = g.cwiseProduct(activation_derivative(layer.activation, cache.pre[l]));
    }
    out.params.weight[l] = dz.transpose() * cache.inputs[l];
    out.params.bias[l] = dz.colwise().sum().transpose();
    g = dz * layer.weight;
  }
  out.input = std::move(g);
  return out;
}

AdamState::AdamState(const MlpParams& p, AdamConfig cfg)
    : cfg_(cfg), m_(ParamGrads::zeros_like(p)), v_(ParamGrads::zeros_like(p)) {}

void AdamState::step(MlpParams& p, const ParamGrads& g) {
  if (g.weight.size() != p.layers.size() || m_.weight.size() != p.layers.size()) {
    throw ShapeError("adam_step: gradient/parameter layer count mismatch");
  }
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    if (g.weight[l].rows() != p.layers[l].weight.rows() ||
        g.weight[l].cols() != p.layers[l].weight.cols() ||
        g.bias[l].size() != p.layers[l].bias.size()) {
      throw ShapeError("adam_step: gradient shape mismatch at layer " + std::to_string(l));
    }
    if (!g.weight[l].allFinite() || !g.bias[l].allFinite()) {
      throw NumericError("adam_step: non-finite gradient in layer " + std::to_string(l));
    }
  }
  ++step_;
  const double b1 = cfg_.beta1;
  const double b2 = cfg_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  auto update = [&](auto& param, auto& m, auto& v, const auto& grad) {
    m = b1 * m + (1.0 - b1) * grad;
    v = b2 * v + (1.0 - b2) * grad.cwiseProduct(grad);
    param.array() -= cfg_.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg_.eps);
  };
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    update(p.layers[l].weight, m_.weight[l], v_.weight[l], g.weight[l]);
    update(p.layers[l].bias, m_.bias[l], v_.bias[l], g.bias[l]);
  }
}

nlohmann::json params_to_json(const MlpParams& p) {
  nlohmann::json acts = nlohmann::json::array();
  nlohmann::json weights = nlohmann::json::array();
  nlohmann::json biases = nlohmann::json::array();
  for (const auto& l : p.layers) {
    acts.push_back(activation_name(l.activation));
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(l.weight.size()));
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) w.push_back(l.weight(r, c));
    }
    weights.push_back(std::move(w));
    biases.push_back(std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size()));
  }
  return {{"version", 1},
          {"layer_sizes", p.layer_sizes()},
          {"activations", acts},
          {"weights", weights},
          {"biases", biases}};
}

MlpParams params_from_json(const nlohmann::json& j) {
  try {
    const int version = j.at("version").get<int>();
    if (version != 1) throw ParseError("unsupported parameter file version " + std::to_string(version));
    const auto sizes = j.at("layer_sizes").get<std::vector<int>>();
    const auto& acts = j.at("activations");
    const auto& weights = j.at("weights");
    const auto& biases = j.at("biases");
    if (sizes.size() < 2 || acts.size() + 1 != sizes.size() || weights.size() != acts.size() ||
        biases.size() != acts.size()) {
      throw ParseError("parameter file layer counts disagree");
    }
    MlpParams p;
    for (std::size_t l = 0; l < acts.size(); ++l) {
      const int in = sizes[l];
      const int out = sizes[l + 1];
      const auto w = weights[l].get<std::vector<double>>();
      const auto b = biases[l].get<std::vector<double>>();
      if (in <= 0 || out <= 0 || w.size() != static_cast<std::size_t>(in) * static_cast<std::size_t>(out) ||
          b.size() != static_cast<std::size_t>(out)) {
        throw ParseError("parameter file: layer " + std::to_string(l) + " has the wrong size");
      }
      Layer layer;
      layer.activation = parse_activation(acts[l].get<std::string>());
      layer.weight.resize(out, in);
      for (int r = 0; r < out; ++r) {
        for (int c = 0; c < in; ++c) layer.weight(r, c) = w[static_cast<std::size_t>(r * in + c)];
      }
      layer.bias = Eigen::Map<const Vector>(b.data(), out);
      p.layers.push_back(std::move(layer));
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("corrupt parameter file: ") + e.what());
  }
}

void save_params(const MlpParams& p, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << params_to_json(p).dump() << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

MlpParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("corrupt parameter file " + path.string() + ": " + e.what());
  }
  return params_from_json(j);
}

}  // namespace rlime::nncore
