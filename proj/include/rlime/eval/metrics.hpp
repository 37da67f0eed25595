#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rlime/dataio/dataset.hpp"
#include "rlime/dataio/transformer.hpp"
#include "rlime/explain/lime.hpp"
#include "rlime/models/classifier.hpp"

namespace rlime::eval {

// 100 * share of explanations whose top-k contains the sensitive feature.
double topk_accuracy(const std::vector<explain::Explanation>& es, const std::string& sensitive,
                     std::size_t k);

// Agreement of f on rows matching the explanation's top-k predicates
// (same category / same quartile bin as x). When fewer than min_matches pool
// rows match, copies of x with every non-predicate feature redrawn from the
// pool's marginals fill the gap. Result in [0, 1].
double precision(const explain::Explanation& e, const RowVector& x, const models::Classifier& f,
                 const dataio::Dataset& pool, const dataio::Transformer& t, std::size_t k,
                 std::size_t min_matches, std::uint64_t seed);

// Integral of |F_a - F_b| for two empirical samples.
double wasserstein_1d(std::vector<double> a, std::vector<double> b);

// Mean over the given columns of the 1-D Wasserstein distance between
// z-scored marginals (t's mean/std).
double mean_wasserstein(const Matrix& real, const Matrix& other, const dataio::Transformer& t,
                        const std::vector<std::size_t>& columns);

// Continuous columns that carry data (unrelated_* excluded).
std::vector<std::size_t> numeric_columns(const dataio::Schema& schema);

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // population
};
Summary summarize(const std::vector<double>& v);

}  // namespace rlime::eval
