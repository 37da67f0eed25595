#pragma once

#include <cstdint>
#include <string>

#include "rlime/dataio/dataset.hpp"

namespace rlime::dataio {

// Synthetic stand-ins for the three public audit datasets. Each generator
// reproduces the column layout used in the scaffolding-attack literature
// (names, kinds, category sets, label, sensitive feature) and draws rows from
// a fixed latent-variable model with long-tailed, correlated marginals.
//
//   compas       6172 rows,   9 features, sensitive "race", label score_text
//   german       1000 rows,   9 features, sensitive "Gender", label GoodCustomer
//   communities  1994 rows, 100 features in [0,1], sensitive "racePctWhite",
//                continuous label ViolentCrimesPerPop binarized at the median
//
// The loaders accept the real files unchanged when they follow the same
// schema, so these generators only matter when no real data is on disk.
Dataset make_surrogate(const std::string& kind, std::uint64_t seed, std::size_t n_rows = 0);

std::size_t surrogate_default_rows(const std::string& kind);

}  // namespace rlime::dataio
