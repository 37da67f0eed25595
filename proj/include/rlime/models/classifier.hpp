#pragma once

#include <vector>

#include "rlime/common.hpp"

namespace rlime::models {

// Anything the explainer can query. Rows are raw schema rows (discrete values
// as category indices).
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual std::size_t n_classes() const = 0;
  // rows x n_classes, each row summing to 1.
  virtual Matrix predict_proba(const Matrix& rows) const = 0;

  // Argmax of predict_proba; the lowest class index wins ties.
  std::vector<int> predict(const Matrix& rows) const;
};

std::vector<int> argmax_rows(const Matrix& probs);

// Always returns the same distribution.
class ConstantModel : public Classifier {
 public:
  explicit ConstantModel(Vector probs);

  std::size_t n_classes() const override { return static_cast<std::size_t>(probs_.size()); }
  Matrix predict_proba(const Matrix& rows) const override;

 private:
  Vector probs_;
};

}  // namespace rlime::models
