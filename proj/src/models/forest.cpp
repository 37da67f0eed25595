#include "rlime/models/forest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace rlime::models {

std::vector<int> argmax_rows(const Matrix& probs) {
  std::vector<int> out(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < probs.cols(); ++c) {
      if (probs(i, c) > probs(i, best)) best = c;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

std::vector<int> Classifier::predict(const Matrix& rows) const { return argmax_rows(predict_proba(rows)); }

ConstantModel::ConstantModel(Vector probs) : probs_(std::move(probs)) {
  if (probs_.size() < 1 || std::abs(probs_.sum() - 1.0) > 1e-9 || probs_.minCoeff() < 0.0) {
    throw ConfigError("ConstantModel: probabilities must be non-negative and sum to 1");
  }
}

Matrix ConstantModel::predict_proba(const Matrix& rows) const {
  return probs_.transpose().replicate(rows.rows(), 1);
}

const std::vector<double>& Tree::leaf(const double* row) const {
  std::size_t n = 0;
  while (!nodes[n].is_leaf()) {
    const auto& node = nodes[n];
    n = static_cast<std::size_t>(row[node.feature] <= node.threshold ? node.left : node.right);
  }
  return nodes[n].probs;
}

namespace {

struct Builder {
  const Matrix& X;
  const std::vector<int>& y;
  std::size_t classes;
  const ForestConfig& cfg;
  std::size_t mtry;
  Rng& rng;

  struct Work {
    std::vector<std::size_t> idx;
    int depth;
    int node;
  };

  std::vector<double> class_counts(const std::vector<std::size_t>& idx) const {
    std::vector<double> c(classes, 0.0);
    for (auto i : idx) c[static_cast<std::size_t>(y[i])] += 1.0;
    return c;
  }

  static double purity(const std::vector<double>& c, double n) {
    double s = 0.0;
    for (double v : c) s += v * v;
    return s / n;
  }

  Tree build(std::vector<std::size_t> root) {
    Tree tree;
    tree.nodes.emplace_back();
    std::vector<Work> stack;
    stack.push_back({std::move(root), 0, 0});
    std::vector<std::size_t> features(static_cast<std::size_t>(X.cols()));
    std::vector<std::pair<double, int>> sorted;

    while (!stack.empty()) {
      Work w = std::move(stack.back());
      stack.pop_back();
      const auto n = static_cast<double>(w.idx.size());
      const auto counts = class_counts(w.idx);
      const bool pure = std::count_if(counts.begin(), counts.end(), [](double v) { return v > 0.0; }) <= 1;
      const bool too_small = w.idx.size() < 2 * static_cast<std::size_t>(cfg.min_samples_leaf);
      const bool too_deep = cfg.max_depth >= 0 && w.depth >= cfg.max_depth;

      int best_feature = -1;
      double best_threshold = 0.0;
      if (!pure && !too_small && !too_deep) {
        const double parent = purity(counts, n);
        double best_score = parent + 1e-12;
        std::iota(features.begin(), features.end(), std::size_t{0});
        shuffle_in_place(rng, features);
        std::size_t tried = 0;
        for (std::size_t f : features) {
          if (tried >= mtry) break;
          sorted.clear();
          for (auto i : w.idx) sorted.emplace_back(X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)), y[i]);
          std::sort(sorted.begin(), sorted.end());
          if (sorted.front().first == sorted.back().first) continue;  // constant here; draw another
          ++tried;
          std::vector<double> left(classes, 0.0);
          std::vector<double> right = counts;
          const std::size_t m = sorted.size();
          const auto min_leaf = static_cast<std::size_t>(cfg.min_samples_leaf);
          for (std::size_t k = 0; k + 1 < m; ++k) {
            const auto c = static_cast<std::size_t>(sorted[k].second);
            left[c] += 1.0;
            right[c] -= 1.0;
            const std::size_t nl = k + 1;
            if (sorted[k].first == sorted[k + 1].first) continue;
            if (nl < min_leaf || m - nl < min_leaf) continue;
            double sl = 0.0;
            double sr = 0.0;
            for (std::size_t q = 0; q < classes; ++q) {
              sl += left[q] * left[q];
              sr += right[q] * right[q];
            }
            const double score = sl / static_cast<double>(nl) + sr / static_cast<double>(m - nl);
            if (score > best_score) {
              best_score = score;
              best_feature = static_cast<int>(f);
              const double a = sorted[k].first;
              const double b = sorted[k + 1].first;
              double t = a + (b - a) / 2.0;
              if (!(t < b)) t = a;
              best_threshold = t;
            }
          }
        }
      }

      if (best_feature < 0) {
        auto& node = tree.nodes[static_cast<std::size_t>(w.node)];
        node.probs.resize(classes);
        for (std::size_t c = 0; c < classes; ++c) node.probs[c] = counts[c] / n;
        continue;
      }
      std::vector<std::size_t> li;
      std::vector<std::size_t> ri;
      for (auto i : w.idx) {
        (X(static_cast<Eigen::Index>(i), best_feature) <= best_threshold ? li : ri).push_back(i);
      }
      const int l = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      auto& node = tree.nodes[static_cast<std::size_t>(w.node)];
      node.feature = best_feature;
      node.threshold = best_threshold;
      node.left = l;
      node.right = l + 1;
      stack.push_back({std::move(ri), w.depth + 1, l + 1});
      stack.push_back({std::move(li), w.depth + 1, l});
    }
    return tree;
  }
};

}  // namespace

Forest rf_train(const Matrix& X, const std::vector<int>& y, const ForestConfig& cfg,
                std::uint64_t seed, std::size_t n_classes) {
  if (X.rows() == 0 || static_cast<std::size_t>(X.rows()) != y.size()) {
    throw ShapeError("rf_train: X and y must be non-empty and of equal length");
  }
  if (!X.allFinite()) throw ValidationError("rf_train: non-finite feature value");
  if (cfg.n_trees < 1 || cfg.min_samples_leaf < 1) {
    throw ConfigError("rf_train: n_trees and min_samples_leaf must be >= 1");
  }
  const int max_label = *std::max_element(y.begin(), y.end());
  if (*std::min_element(y.begin(), y.end()) < 0) throw ValidationError("rf_train: negative label");
  const std::size_t classes = n_classes ? n_classes : static_cast<std::size_t>(max_label) + 1;
  if (static_cast<std::size_t>(max_label) >= classes) throw ValidationError("rf_train: label exceeds class count");
  std::vector<char> seen(classes, 0);
  for (int v : y) seen[static_cast<std::size_t>(v)] = 1;
  if (std::count(seen.begin(), seen.end(), 1) < 2) throw ValidationError("rf_train: need at least two classes");

  Forest f;
  f.width = static_cast<std::size_t>(X.cols());
  f.classes = classes;
  f.config = cfg;
  f.seed = seed;
  std::size_t mtry = cfg.max_features > 0
                         ? static_cast<std::size_t>(cfg.max_features)
                         : static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(f.width))));
  mtry = std::clamp<std::size_t>(mtry, 1, f.width);

  const std::size_t n = y.size();
  for (int t = 0; t < cfg.n_trees; ++t) {
    Rng rng(derive_seed(seed, "tree", static_cast<std::uint64_t>(t)));
    std::vector<std::size_t> sample(n);
    if (cfg.bootstrap) {
      for (auto& s : sample) s = uniform_index(rng, n);
    } else {
      std::iota(sample.begin(), sample.end(), std::size_t{0});
    }
    Builder b{X, y, classes, cfg, mtry, rng};
    f.trees.push_back(b.build(std::move(sample)));
  }
  return f;
}

Matrix Forest::predict_proba(const Matrix& rows) const {
  if (static_cast<std::size_t>(rows.cols()) != width) {
    throw ShapeError("forest expects " + std::to_string(width) + " columns, got " + std::to_string(rows.cols()));
  }
  // Row-major copy keeps each sample contiguous for traversal.
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = rows;
  Matrix out = Matrix::Zero(rows.rows(), static_cast<Eigen::Index>(classes));
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const double* r = rm.row(i).data();
    for (const auto& t : trees) {
      const auto& p = t.leaf(r);
      for (std::size_t c = 0; c < classes; ++c) out(i, static_cast<Eigen::Index>(c)) += p[c];
    }
  }
  return out / static_cast<double>(trees.size());
}

ForestPrediction rf_predict(const Forest& f, const Matrix& rows) {
  ForestPrediction p;
  p.probs = f.predict_proba(rows);
  p.labels = argmax_rows(p.probs);
  return p;
}

nlohmann::json Forest::to_json() const {
  nlohmann::json jt = nlohmann::json::array();
  for (const auto& t : trees) {
    nlohmann::json feat = nlohmann::json::array();
    nlohmann::json thr = nlohmann::json::array();
    nlohmann::json left = nlohmann::json::array();
    nlohmann::json right = nlohmann::json::array();
    nlohmann::json probs = nlohmann::json::array();
    for (const auto& n : t.nodes) {
      feat.push_back(n.feature);
      thr.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      probs.push_back(n.is_leaf() ? nlohmann::json(n.probs) : nlohmann::json(nullptr));
    }
    jt.push_back({{"feature", feat}, {"threshold", thr}, {"left", left}, {"right", right}, {"probs", probs}});
  }
  return {{"version", 1},
          {"width", width},
          {"classes", classes},
          {"seed", seed},
          {"config",
           {{"n_trees", config.n_trees},
            {"max_depth", config.max_depth},
            {"min_samples_leaf", config.min_samples_leaf},
            {"max_features", config.max_features},
            {"bootstrap", config.bootstrap}}},
          {"trees", jt}};
}

Forest Forest::from_json(const nlohmann::json& j) {
  try {
    if (j.at("version").get<int>() != 1) throw ParseError("unsupported forest version");
    Forest f;
    f.width = j.at("width").get<std::size_t>();
    f.classes = j.at("classes").get<std::size_t>();
    f.seed = j.at("seed").get<std::uint64_t>();
    const auto& c = j.at("config");
    f.config.n_trees = c.at("n_trees").get<int>();
    f.config.max_depth = c.at("max_depth").get<int>();
    f.config.min_samples_leaf = c.at("min_samples_leaf").get<int>();
    f.config.max_features = c.at("max_features").get<int>();
    f.config.bootstrap = c.at("bootstrap").get<bool>();
    for (const auto& jt : j.at("trees")) {
      const auto feat = jt.at("feature").get<std::vector<int>>();
      const auto thr = jt.at("threshold").get<std::vector<double>>();
      const auto left = jt.at("left").get<std::vector<int>>();
      const auto right = jt.at("right").get<std::vector<int>>();
      const auto& probs = jt.at("probs");
      const std::size_t m = feat.size();
      if (m == 0 || thr.size() != m || left.size() != m || right.size() != m || probs.size() != m) {
        throw ParseError("forest tree arrays disagree in length");
      }
      Tree t;
      t.nodes.resize(m);
      for (std::size_t k = 0; k < m; ++k) {
        auto& n = t.nodes[k];
        n.feature = feat[k];
        n.threshold = thr[k];
        n.left = left[k];
        n.right = right[k];
        if (n.is_leaf()) {
          n.probs = probs[k].get<std::vector<double>>();
          if (n.probs.size() != f.classes) throw ParseError("forest leaf has the wrong class count");
        } else if (static_cast<std::size_t>(n.feature) >= f.width || n.left <= static_cast<int>(k) ||
                   n.right <= static_cast<int>(k) || static_cast<std::size_t>(n.left) >= m ||
                   static_cast<std::size_t>(n.right) >= m) {
          throw ParseError("forest node references are out of range");
        }
      }
      f.trees.push_back(std::move(t));
    }
    if (f.trees.empty()) throw ParseError("forest has no trees");
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("corrupt forest: ") + e.what());
  }
}

void save_forest(const Forest& f, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << f.to_json().dump() << '\n';
}

Forest load_forest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("corrupt forest file " + path.string() + ": " + e.what());
  }
  return Forest::from_json(j);
}

}  // namespace rlime::models
