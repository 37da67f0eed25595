#include "rlime/eval/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace rlime::eval {

double topk_accuracy(const std::vector<explain::Explanation>& es, const std::string& sensitive,
                     std::size_t k) {
  if (es.empty()) throw ValidationError("topk_accuracy: no explanations");
  std::size_t hit = 0;
  for (const auto& e : es) {
    const auto top = explain::top_k(e, k);
    hit += std::find(top.begin(), top.end(), sensitive) != top.end();
  }
  return 100.0 * static_cast<double>(hit) / static_cast<double>(es.size());
}

double precision(const explain::Explanation& e, const RowVector& x, const models::Classifier& f,
                 const dataio::Dataset& pool, const dataio::Transformer& t, std::size_t k,
                 std::size_t min_matches, std::uint64_t seed) {
  if (pool.n_rows() == 0) throw ValidationError("precision: empty pool");
  const auto preds = explain::top_k_indices(e, k);
  std::vector<bool> is_pred(static_cast<std::size_t>(x.size()), false);
  for (auto j : preds) is_pred[j] = true;

  auto matches = [&](const RowVector& z) {
    for (auto j : preds) {
      const auto c = static_cast<Eigen::Index>(j);
      if (t.encoder(j).kind == dataio::ColumnKind::kDiscrete) {
        if (z(c) != x(c)) return false;
      } else if (t.quartile_bin(j, z(c)) != t.quartile_bin(j, x(c))) {
        return false;
      }
    }
    return true;
  };

  std::vector<Eigen::Index> hits;
  for (Eigen::Index i = 0; i < pool.rows.rows(); ++i) {
    if (matches(pool.rows.row(i))) hits.push_back(i);
  }
  const std::size_t extra = hits.size() < min_matches ? min_matches - hits.size() : 0;
  Matrix q(static_cast<Eigen::Index>(hits.size() + extra), x.size());
  for (std::size_t i = 0; i < hits.size(); ++i) q.row(static_cast<Eigen::Index>(i)) = pool.rows.row(hits[i]);
  Rng rng(seed);
  for (std::size_t i = 0; i < extra; ++i) {
    RowVector z = x;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      if (!is_pred[static_cast<std::size_t>(j)]) z(j) = pool.rows(static_cast<Eigen::Index>(uniform_index(rng, pool.n_rows())), j);
    }
    q.row(static_cast<Eigen::Index>(hits.size() + i)) = z;
  }
  if (q.rows() == 0) return 1.0;  // min_matches == 0 and nothing matched
  const int fx = f.predict(x).front();
  const auto fq = f.predict(q);
  const auto agree = std::count(fq.begin(), fq.end(), fx);
  return static_cast<double>(agree) / static_cast<double>(fq.size());
}

double wasserstein_1d(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ValidationError("wasserstein_1d: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double prev = std::min(a.front(), b.front());
  double total = 0.0;
  while (i < a.size() || j < b.size()) {
    double next;
    if (j >= b.size() || (i < a.size() && a[i] <= b[j])) {
      next = a[i];
    } else {
      next = b[j];
    }
    total += std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb) * (next - prev);
    prev = next;
    while (i < a.size() && a[i] == next) ++i;
    while (j < b.size() && b[j] == next) ++j;
  }
  return total;
}

double mean_wasserstein(const Matrix& real, const Matrix& other, const dataio::Transformer& t,
                        const std::vector<std::size_t>& columns) {
  if (columns.empty()) throw ValidationError("mean_wasserstein: no columns");
  double sum = 0.0;
  for (auto c : columns) {
    const auto& e = t.encoder(c);
    auto col = [&](const Matrix& m) {
      std::vector<double> v(static_cast<std::size_t>(m.rows()));
      for (Eigen::Index i = 0; i < m.rows(); ++i) v[static_cast<std::size_t>(i)] = (m(i, static_cast<Eigen::Index>(c)) - e.mean) / e.std;
      return v;
    };
    sum += wasserstein_1d(col(real), col(other));
  }
  return sum / static_cast<double>(columns.size());
}

std::vector<std::size_t> numeric_columns(const dataio::Schema& schema) {
  std::vector<std::size_t> out;
  for (auto c : schema.continuous_indices()) {
    if (schema.column(c).name.rfind("unrelated_", 0) != 0) out.push_back(c);
  }
  return out;
}

Summary summarize(const std::vector<double>& v) {
  Summary s;
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  for (double x : v) s.std += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(s.std / static_cast<double>(v.size()));
  return s;
}

}  // namespace rlime::eval
