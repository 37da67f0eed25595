#include "rlime/ctgan/ctgan.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace rlime::ctgan {

using dataio::ColumnKind;
using dataio::Transformer;
using nncore::Activation;
using nncore::MlpParams;
using nncore::ParamGrads;

CondLayout CondLayout::from(const Transformer& t) {
  CondLayout layout;
  const auto& encs = t.encoders();
  for (std::size_t j = 0; j < encs.size(); ++j) {
    if (encs[j].kind != ColumnKind::kDiscrete) continue;
    layout.blocks.push_back({j, layout.width, encs[j].n_categories, encs[j].offset});
    layout.width += encs[j].n_categories;
  }
  return layout;
}

Vector build_cond_vector_instance(const Transformer& t, const RowVector& x) {
  return build_cond_matrix(t, x).row(0).transpose();
}

Matrix build_cond_matrix(const Transformer& t, const Matrix& rows) {
  t.check_rows(rows);
  const auto layout = CondLayout::from(t);
  Matrix out = Matrix::Zero(rows.rows(), static_cast<Eigen::Index>(layout.width));
  for (const auto& b : layout.blocks) {
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
      const auto cat = static_cast<Eigen::Index>(rows(i, static_cast<Eigen::Index>(b.column)));
      out(i, static_cast<Eigen::Index>(b.offset) + cat) = 1.0;
    }
  }
  return out;
}

TrainingCondition sample_training_condition(const Transformer& t, Rng& rng) {
  const auto layout = CondLayout::from(t);
  if (layout.empty()) throw ConfigError("sample_training_condition: no discrete columns");
  TrainingCondition c;
  c.block = uniform_index(rng, layout.blocks.size());
  const auto& b = layout.blocks[c.block];
  const auto& freq = t.encoder(b.column).frequencies;
  std::vector<double> w(freq.size());
  for (std::size_t k = 0; k < freq.size(); ++k) w[k] = std::log1p(freq[k]);
  c.column = b.column;
  c.category = sample_weighted(rng, w);
  c.bits = Vector::Zero(static_cast<Eigen::Index>(layout.width));
  c.bits(static_cast<Eigen::Index>(b.offset + c.category)) = 1.0;
  return c;
}

namespace {

enum class SpanKind { kIdentity, kTanh, kSoftmax };
struct Span {
  SpanKind kind;
  Eigen::Index offset;
  Eigen::Index width;
};

std::vector<Span> output_spans(const Transformer& t) {
  std::vector<Span> spans;
  for (const auto& e : t.encoders()) {
    const auto off = static_cast<Eigen::Index>(e.offset);
    if (e.kind == ColumnKind::kDiscrete) {
      spans.push_back({SpanKind::kSoftmax, off, static_cast<Eigen::Index>(e.width)});
    } else if (e.uses_gmm) {
      spans.push_back({SpanKind::kTanh, off, 1});
      spans.push_back({SpanKind::kSoftmax, off + 1, static_cast<Eigen::Index>(e.gmm.n_components())});
    } else {
      spans.push_back({SpanKind::kIdentity, off, 1});
    }
  }
  return spans;
}

template <typename Block>
void softmax_rows_inplace(Block block) {
  for (Eigen::Index i = 0; i < block.rows(); ++i) {
    const double m = block.row(i).maxCoeff();
    block.row(i) = (block.row(i).array() - m).exp();
    block.row(i) /= block.row(i).sum();
  }
}

Matrix hstack(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  out.leftCols(a.cols()) = a;
  out.rightCols(b.cols()) = b;
  return out;
}

Matrix gaussian_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = standard_normal(rng);
  }
  return m;
}

// Turns each softmax span into a hard one-hot before decoding.
void harden(const Transformer& t, Matrix& activated, DiscreteSampling mode, Rng& rng) {
  if (mode == DiscreteSampling::kArgmax) return;  // decode already takes argmax
  for (const auto& s : output_spans(t)) {
    if (s.kind != SpanKind::kSoftmax) continue;
    for (Eigen::Index i = 0; i < activated.rows(); ++i) {
      std::vector<double> p(static_cast<std::size_t>(s.width));
      for (Eigen::Index k = 0; k < s.width; ++k) p[static_cast<std::size_t>(k)] = activated(i, s.offset + k);
      const auto pick = static_cast<Eigen::Index>(sample_weighted(rng, p));
      activated.row(i).segment(s.offset, s.width).setZero();
      activated(i, s.offset + pick) = 1.0;
    }
  }
}

}  // namespace

namespace {

// Softmax spans use softmax((raw + g) / temperature) with Gumbel noise g when
// rng is given; plain softmax otherwise.
Matrix head_forward(const Transformer& t, const Matrix& raw, double temperature, Rng* rng) {
  if (static_cast<std::size_t>(raw.cols()) != t.encoded_width()) {
    throw ShapeError("generator output width does not match the transformer");
  }
  Matrix out = raw;
  for (const auto& s : output_spans(t)) {
    switch (s.kind) {
      case SpanKind::kIdentity: break;
      case SpanKind::kTanh: out.col(s.offset) = raw.col(s.offset).array().tanh(); break;
      case SpanKind::kSoftmax: {
        auto block = out.middleCols(s.offset, s.width);
        if (rng != nullptr) {
          for (Eigen::Index i = 0; i < block.rows(); ++i) {
            for (Eigen::Index k = 0; k < block.cols(); ++k) {
              const double u = std::max(uniform01(*rng), 1e-300);
              block(i, k) = (block(i, k) - std::log(-std::log(u) + 1e-300)) / temperature;
            }
          }
        }
        softmax_rows_inplace(block);
        break;
      }
    }
  }
  return out;
}

Matrix head_backward(const Transformer& t, const Matrix& activated, const Matrix& grad_activated,
                     double softmax_scale) {
  Matrix g = grad_activated;
  for (const auto& s : output_spans(t)) {
    switch (s.kind) {
      case SpanKind::kIdentity: break;
      case SpanKind::kTanh:
        g.col(s.offset) = grad_activated.col(s.offset).array() *
                          (1.0 - activated.col(s.offset).array().square());
        break;
      case SpanKind::kSoftmax: {
        const auto sm = activated.middleCols(s.offset, s.width);
        const auto ga = grad_activated.middleCols(s.offset, s.width);
        const Vector dots = sm.cwiseProduct(ga).rowwise().sum();
        g.middleCols(s.offset, s.width) = softmax_scale * sm.cwiseProduct(ga.colwise() - dots);
        break;
      }
    }
  }
  return g;
}

}  // namespace

Matrix apply_output_head(const Transformer& t, const Matrix& raw) {
  return head_forward(t, raw, 1.0, nullptr);
}

Matrix output_head_backward(const Transformer& t, const Matrix& activated,
                            const Matrix& grad_activated) {
  return head_backward(t, activated, grad_activated, 1.0);
}

PenaltyResult input_gradient_penalty(const MlpParams& critic, const Matrix& inputs,
                                     Eigen::Index penalized_cols, double lambda) {
  const std::size_t L = critic.layers.size();
  if (L == 0 || critic.output_size() != 1) {
    throw ConfigError("gradient penalty needs a scalar-output critic");
  }
  for (const auto& layer : critic.layers) {
    if (!nncore::is_piecewise_linear(layer.activation)) {
      throw ConfigError("gradient penalty supports relu/leaky_relu/linear critics only");
    }
  }
  if (penalized_cols < 0 || penalized_cols > inputs.cols()) {
    throw ShapeError("penalized column count exceeds the input width");
  }
  const auto cache = nncore::forward(critic, inputs);
  const Eigen::Index B = inputs.rows();

  std::vector<Matrix> dphi(L);
  for (std::size_t l = 0; l < L; ++l) {
    dphi[l] = nncore::activation_derivative(critic.layers[l].activation, cache.pre[l]);
  }
  // delta[l] = d output / d pre-activation of layer l.
  std::vector<Matrix> delta(L);
  delta[L - 1] = dphi[L - 1];
  for (std::size_t l = L - 1; l-- > 0;) {
    delta[l] = (delta[l + 1] * critic.layers[l + 1].weight).cwiseProduct(dphi[l]);
  }
  const Matrix grad_in = delta[0] * critic.layers[0].weight;

  PenaltyResult res;
  res.grads = ParamGrads::zeros_like(critic);
  Matrix V = Matrix::Zero(B, inputs.cols());
  const double scale = lambda / static_cast<double>(B);
  for (Eigen::Index b = 0; b < B; ++b) {
    const double norm = grad_in.row(b).head(penalized_cols).norm();
    res.penalty += scale * (norm - 1.0) * (norm - 1.0);
    if (norm > 0.0) {
      V.row(b).head(penalized_cols) = (2.0 * scale * (norm - 1.0) / norm) * grad_in.row(b).head(penalized_cols);
    }
  }
  // Reverse through the input-gradient chain; activation slopes are constant
  // almost everywhere, so biases receive no gradient.
  res.grads.weight[0] = delta[0].transpose() * V;
  Matrix U = V * critic.layers[0].weight.transpose();
  for (std::size_t l = 0; l + 1 < L; ++l) {
    const Matrix Ut = U.cwiseProduct(dphi[l]);
    res.grads.weight[l + 1] = delta[l + 1].transpose() * Ut;
    U = Ut * critic.layers[l + 1].weight.transpose();
  }
  return res;
}

PenaltyResult gradient_penalty(const MlpParams& critic, const Matrix& real, const Matrix& fake,
                               const Matrix& cond, double lambda, Rng& rng) {
  if (real.rows() != fake.rows() || real.cols() != fake.cols() || cond.rows() != real.rows()) {
    throw ShapeError("gradient_penalty: real/fake/cond batches disagree in shape");
  }
  Matrix mixed(real.rows(), real.cols());
  for (Eigen::Index i = 0; i < real.rows(); ++i) {
    const double u = uniform01(rng);
    mixed.row(i) = u * real.row(i) + (1.0 - u) * fake.row(i);
  }
  return input_gradient_penalty(critic, hstack(mixed, cond), real.cols(), lambda);
}

CtganModel ctgan_train(const dataio::Dataset& ds, const Transformer& t, const CtganConfig& cfg,
                       std::uint64_t seed) {
  if (ds.n_rows() == 0) throw ValidationError("ctgan_train: empty dataset");
  if (cfg.epochs < 0 || cfg.batch_size < 1 || cfg.noise_dim < 1 || cfg.critic_steps < 1) {
    throw ConfigError("ctgan_train: epochs, batch_size, noise_dim and critic_steps must be positive");
  }
  if (!(cfg.lambda > 0.0)) throw ConfigError("ctgan_train: lambda must be > 0");

  CtganModel model;
  model.transformer = t;
  model.layout = CondLayout::from(t);
  model.noise_dim = cfg.noise_dim;
  model.lambda = cfg.lambda;
  model.seed = seed;
  model.epochs = cfg.epochs;
  model.sampling = cfg.sampling;

  const auto enc_w = static_cast<int>(t.encoded_width());
  const auto cond_w = static_cast<int>(model.layout.width);

  std::vector<int> gsizes{cfg.noise_dim + cond_w};
  std::vector<Activation> gacts;
  for (int h : cfg.generator_hidden) {
    gsizes.push_back(h);
    gacts.push_back(Activation::kRelu);
  }
  gsizes.push_back(enc_w);
  gacts.push_back(Activation::kLinear);  // output head applied separately
  std::vector<int> csizes{enc_w + cond_w};
  std::vector<Activation> cacts;
  for (int h : cfg.critic_hidden) {
    csizes.push_back(h);
    cacts.push_back(Activation::kLeakyRelu);
  }
  csizes.push_back(1);
  cacts.push_back(Activation::kLinear);
  model.generator = nncore::mlp_init(gsizes, gacts, derive_seed(seed, "generator-init"));
  model.critic = nncore::mlp_init(csizes, cacts, derive_seed(seed, "critic-init"));

  Rng rng(derive_seed(seed, "ctgan-train"));
  const Matrix encoded = t.encode(ds.rows, dataio::ModeSelection::kSample, &rng);

  // Row index lists per (block, category) for training-by-sampling.
  std::vector<std::vector<std::vector<std::size_t>>> strata(model.layout.blocks.size());
  for (std::size_t b = 0; b < model.layout.blocks.size(); ++b) {
    const auto& blk = model.layout.blocks[b];
    strata[b].resize(blk.width);
    for (std::size_t i = 0; i < ds.n_rows(); ++i) {
      const auto cat = static_cast<std::size_t>(
          ds.rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(blk.column)));
      strata[b][cat].push_back(i);
    }
  }

  const int B = std::min<int>(cfg.batch_size, static_cast<int>(ds.n_rows()));
  const int steps_per_epoch =
      std::max(1, static_cast<int>((ds.n_rows() + static_cast<std::size_t>(B) - 1) / static_cast<std::size_t>(B)));

  struct CondBatch {
    Matrix cond;
    std::vector<std::size_t> block;
    std::vector<std::size_t> category;
  };
  auto draw_conditions = [&](int n) {
    CondBatch cb;
    cb.cond = Matrix::Zero(n, cond_w);
    if (model.layout.empty()) return cb;
    for (int i = 0; i < n; ++i) {
      TrainingCondition c = sample_training_condition(t, rng);
      while (strata[c.block][c.category].empty()) c = sample_training_condition(t, rng);
      cb.cond.row(i) = c.bits.transpose();
      cb.block.push_back(c.block);
      cb.category.push_back(c.category);
    }
    return cb;
  };

  const bool gumbel = cfg.gumbel_temperature > 0.0;
  const double softmax_scale = gumbel ? 1.0 / cfg.gumbel_temperature : 1.0;
  auto train_head = [&](const Matrix& raw) {
    return head_forward(t, raw, gumbel ? cfg.gumbel_temperature : 1.0, gumbel ? &rng : nullptr);
  };

  nncore::AdamState gopt(model.generator, cfg.adam);
  nncore::AdamState copt(model.critic, cfg.adam);
  const Eigen::Index noise = cfg.noise_dim;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochLog entry;
    entry.epoch = epoch;
    for (int step = 0; step < steps_per_epoch; ++step) {
      for (int cs = 0; cs < cfg.critic_steps; ++cs) {
        const auto cb = draw_conditions(B);
        Matrix real(B, enc_w);
        for (int i = 0; i < B; ++i) {
          std::size_t idx = 0;
          if (model.layout.empty()) {
            idx = uniform_index(rng, ds.n_rows());
          } else {
            const auto& pool = strata[cb.block[static_cast<std::size_t>(i)]][cb.category[static_cast<std::size_t>(i)]];
            idx = pool[uniform_index(rng, pool.size())];
          }
          real.row(i) = encoded.row(static_cast<Eigen::Index>(idx));
        }
        const Matrix z = gaussian_matrix(rng, B, noise);
        const Matrix fake = train_head(nncore::predict(model.generator, hstack(z, cb.cond)));

        Matrix both(2 * B, enc_w + cond_w);
        both.topRows(B) = hstack(real, cb.cond);
        both.bottomRows(B) = hstack(fake, cb.cond);
        const auto cache = nncore::forward(model.critic, both);
        const double mean_real = cache.output.topRows(B).mean();
        const double mean_fake = cache.output.bottomRows(B).mean();
        Matrix gout(2 * B, 1);
        gout.topRows(B).setConstant(-1.0 / B);
        gout.bottomRows(B).setConstant(1.0 / B);
        auto grads = nncore::backward(model.critic, cache, gout).params;
        auto gp = gradient_penalty(model.critic, real, fake, cb.cond, cfg.lambda, rng);
        grads += gp.grads;
        const double loss = mean_fake - mean_real + gp.penalty;
        if (!std::isfinite(loss)) {
          throw NumericError("ctgan_train: non-finite critic loss at epoch " + std::to_string(epoch));
        }
        copt.step(model.critic, grads);
        entry.critic_loss += loss;
        entry.gradient_penalty += gp.penalty;
      }

      const auto cb = draw_conditions(B);
      const Matrix z = gaussian_matrix(rng, B, noise);
      const auto gcache = nncore::forward(model.generator, hstack(z, cb.cond));
      const Matrix fake = train_head(gcache.output);
      const auto ccache = nncore::forward(model.critic, hstack(fake, cb.cond));
      double loss = -ccache.output.mean();
      const Matrix gcritic = nncore::backward(model.critic, ccache, Matrix::Constant(B, 1, -1.0 / B)).input;
      Matrix graw = head_backward(t, fake, gcritic.leftCols(enc_w), softmax_scale);
      if (!model.layout.empty()) {
        double ce = 0.0;
        for (int i = 0; i < B; ++i) {
          const auto& blk = model.layout.blocks[cb.block[static_cast<std::size_t>(i)]];
          const auto off = static_cast<Eigen::Index>(blk.encoded_offset);
          const auto cat = static_cast<Eigen::Index>(cb.category[static_cast<std::size_t>(i)]);
          // Cross-entropy on the noise-free logits.
          const RowVector logits = gcache.output.row(i).segment(off, static_cast<Eigen::Index>(blk.width));
          RowVector probs = (logits.array() - logits.maxCoeff()).exp();
          probs /= probs.sum();
          ce -= std::log(std::max(probs(cat), 1e-300));
          RowVector g = probs;
          g(cat) -= 1.0;
          graw.row(i).segment(off, static_cast<Eigen::Index>(blk.width)) += cfg.cond_loss_weight / B * g;
        }
        loss += cfg.cond_loss_weight * ce / B;
      }
      if (!std::isfinite(loss)) {
        throw NumericError("ctgan_train: non-finite generator loss at epoch " + std::to_string(epoch));
      }
      const auto ggrads = nncore::backward(model.generator, gcache, graw).params;
      gopt.step(model.generator, ggrads);
      entry.generator_loss += loss;
    }
    entry.critic_loss /= steps_per_epoch * cfg.critic_steps;
    entry.gradient_penalty /= steps_per_epoch * cfg.critic_steps;
    entry.generator_loss /= steps_per_epoch;
    model.log.push_back(entry);
  }
  return model;
}

Matrix ctgan_sample_rows(const CtganModel& model, const Matrix& conds, std::uint64_t seed) {
  if (static_cast<std::size_t>(conds.cols()) != model.layout.width) {
    throw ShapeError("condition width does not match the model");
  }
  Rng rng(seed);
  const Matrix z = gaussian_matrix(rng, conds.rows(), model.noise_dim);
  Matrix act = apply_output_head(model.transformer, nncore::predict(model.generator, hstack(z, conds)));
  harden(model.transformer, act, model.sampling, rng);
  return model.transformer.decode(act);
}

Matrix ctgan_sample(const CtganModel& model, const Vector& cond, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ConfigError("ctgan_sample: n must be >= 1");
  const Matrix conds = cond.transpose().replicate(static_cast<Eigen::Index>(n), 1);
  return ctgan_sample_rows(model, conds, seed);
}

Vector critic_score(const CtganModel& model, const Matrix& rows, const Vector& cond) {
  if (static_cast<std::size_t>(cond.size()) != model.layout.width) {
    throw ShapeError("condition width does not match the model");
  }
  const Matrix enc = model.transformer.encode(rows);
  return nncore::predict(model.critic, hstack(enc, cond.transpose().replicate(rows.rows(), 1))).col(0);
}

Vector critic_score(const CtganModel& model, const Matrix& rows) {
  const Matrix enc = model.transformer.encode(rows);
  return nncore::predict(model.critic, hstack(enc, build_cond_matrix(model.transformer, rows))).col(0);
}

FilterResult filter_samples(const Matrix& rows, const Vector& scores, double tau) {
  if (rows.rows() != scores.size()) throw ShapeError("filter_samples: rows and scores differ in length");
  FilterResult res;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    if (scores(i) >= tau) res.kept.push_back(static_cast<std::size_t>(i));
  }
  if (res.kept.empty()) throw EmptyFilterError("filter_samples: no sample reaches tau");
  res.rows.resize(static_cast<Eigen::Index>(res.kept.size()), rows.cols());
  for (std::size_t k = 0; k < res.kept.size(); ++k) {
    res.rows.row(static_cast<Eigen::Index>(k)) = rows.row(static_cast<Eigen::Index>(res.kept[k]));
  }
  return res;
}

double percentile_lower(std::vector<double> values, double percentile) {
  if (values.empty()) throw ValidationError("percentile of an empty sample");
  if (!(percentile >= 0.0 && percentile <= 100.0)) throw ConfigError("percentile must lie in [0, 100]");
  std::sort(values.begin(), values.end());
  const double rank = std::ceil(percentile / 100.0 * static_cast<double>(values.size()));
  const auto idx = static_cast<std::size_t>(std::max(0.0, rank - 1.0));
  return values[std::min(idx, values.size() - 1)];
}

double calibrate_tau(const CtganModel& model, const Matrix& validation_rows, double percentile) {
  if (validation_rows.rows() < 20) throw ValidationError("calibrate_tau: need at least 20 validation rows");
  const Vector s = critic_score(model, validation_rows);
  return percentile_lower(std::vector<double>(s.data(), s.data() + s.size()), percentile);
}

namespace {

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump() << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("cannot parse " + path.string() + ": " + e.what());
  }
}

}  // namespace

void save_bundle(const CtganModel& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nncore::save_params(model.generator, dir / "generator.json");
  nncore::save_params(model.critic, dir / "critic.json");
  write_json(dir / "transformer.json", model.transformer.to_json());
  nlohmann::json log = nlohmann::json::array();
  for (const auto& e : model.log) {
    log.push_back({{"epoch", e.epoch},
                   {"critic_loss", e.critic_loss},
                   {"generator_loss", e.generator_loss},
                   {"gradient_penalty", e.gradient_penalty}});
  }
  nlohmann::json meta{{"version", 1},
                      {"noise_dim", model.noise_dim},
                      {"lambda", model.lambda},
                      {"seed", model.seed},
                      {"epochs", model.epochs},
                      {"sampling", model.sampling == DiscreteSampling::kArgmax ? "argmax" : "categorical"},
                      {"training_log", log}};
  // JSON has no infinities; an unset threshold is stored as null.
  meta["tau"] = std::isfinite(model.tau) ? nlohmann::json(model.tau) : nlohmann::json(nullptr);
  write_json(dir / "meta.json", meta);
}

CtganModel load_bundle(const std::filesystem::path& dir) {
  CtganModel m;
  m.generator = nncore::load_params(dir / "generator.json");
  m.critic = nncore::load_params(dir / "critic.json");
  m.transformer = Transformer::from_json(read_json(dir / "transformer.json"));
  m.layout = CondLayout::from(m.transformer);
  const auto meta = read_json(dir / "meta.json");
  try {
    if (meta.at("version").get<int>() != 1) throw ParseError("unsupported bundle version");
    m.noise_dim = meta.at("noise_dim").get<int>();
    m.lambda = meta.at("lambda").get<double>();
    m.seed = meta.at("seed").get<std::uint64_t>();
    m.epochs = meta.at("epochs").get<int>();
    m.sampling = meta.value("sampling", std::string("argmax")) == "categorical" ? DiscreteSampling::kCategorical
                                                                             : DiscreteSampling::kArgmax;
    m.tau = meta.at("tau").is_null() ? -std::numeric_limits<double>::infinity() : meta.at("tau").get<double>();
    for (const auto& e : meta.value("training_log", nlohmann::json::array())) {
      m.log.push_back({e.at("epoch").get<int>(), e.at("critic_loss").get<double>(),
                       e.at("generator_loss").get<double>(), e.at("gradient_penalty").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed meta.json: ") + e.what());
  }
  if (m.generator.output_size() != static_cast<Eigen::Index>(m.transformer.encoded_width()) ||
      m.generator.input_size() != m.noise_dim + static_cast<Eigen::Index>(m.layout.width) ||
      m.critic.input_size() != static_cast<Eigen::Index>(m.transformer.encoded_width() + m.layout.width)) {
    throw ParseError("bundle networks do not match the transformer layout");
  }
  return m;
}

}  // namespace rlime::ctgan
