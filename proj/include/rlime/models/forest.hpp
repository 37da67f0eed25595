#pragma once

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

#include "rlime/models/classifier.hpp"

namespace rlime::models {

struct ForestConfig {
  int n_trees = 100;
  int max_depth = -1;  // unlimited
  int min_samples_leaf = 2;
  int max_features = 0;  // 0 -> floor(sqrt(width)), at least 1
  bool bootstrap = true;
};

// Internal nodes send x[feature] <= threshold to the left child. Leaves have
// feature = -1 and a class-probability vector.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<double> probs;

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  const std::vector<double>& leaf(const double* row) const;
};

class Forest : public Classifier {
 public:
  std::vector<Tree> trees;
  std::size_t width = 0;
  std::size_t classes = 0;
  ForestConfig config;
  std::uint64_t seed = 0;

  std::size_t n_classes() const override { return classes; }
  Matrix predict_proba(const Matrix& rows) const override;

  nlohmann::json to_json() const;
  static Forest from_json(const nlohmann::json& j);
};

struct ForestPrediction {
  std::vector<int> labels;
  Matrix probs;
};

// CART trees with Gini splits on bootstrap samples. Class count is
// max(y) + 1 unless n_classes is given. Throws ValidationError when fewer
// than two classes are present.
Forest rf_train(const Matrix& X, const std::vector<int>& y, const ForestConfig& cfg,
                std::uint64_t seed, std::size_t n_classes = 0);
ForestPrediction rf_predict(const Forest& f, const Matrix& rows);

void save_forest(const Forest& f, const std::filesystem::path& path);
Forest load_forest(const std::filesystem::path& path);

}  // namespace rlime::models
