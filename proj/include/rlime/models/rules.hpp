#pragma once

#include "json.hpp"

#include <string>

#include "rlime/dataio/dataset.hpp"
#include "rlime/models/classifier.hpp"
#include "rlime/models/forest.hpp"

namespace rlime::models {

enum class RuleKind { kCompasRace, kGermanGender, kCommunitiesWhitePop, kUnrelatedThreshold };

std::string rule_kind_name(RuleKind k);
RuleKind parse_rule_kind(const std::string& name);

// Binary classifier reading a single column.
//   compas_race          1 iff column == category ("African-American")
//   german_gender        1 iff column == category ("Male")
//   communities_whitepop 1 iff column <  threshold (0.5)
//   unrelated_threshold  1 iff column >  threshold (0.5)
class RuleModel : public Classifier {
 public:
  RuleModel() = default;
  RuleModel(RuleKind kind, std::string column, double threshold, std::string category,
            const dataio::Schema& schema);

  RuleKind kind() const { return kind_; }
  const std::string& column() const { return column_; }
  std::size_t column_index() const { return index_; }
  double threshold() const { return threshold_; }
  const std::string& category() const { return category_; }

  int predict_row(const double* row) const;
  std::size_t n_classes() const override { return 2; }
  Matrix predict_proba(const Matrix& rows) const override;

  nlohmann::json to_json() const;
  static RuleModel from_json(const nlohmann::json& j, const dataio::Schema& schema);

 private:
  RuleKind kind_ = RuleKind::kUnrelatedThreshold;
  std::string column_;
  double threshold_ = 0.5;
  std::string category_;
  std::size_t index_ = 0;
  std::size_t category_index_ = 0;
  std::size_t width_ = 0;
};

// kind in {compas, german, communities}.
RuleModel biased_classifier(const std::string& dataset_kind, const dataio::Schema& schema);
RuleModel innocuous_model(const std::string& column, const dataio::Schema& schema);

// s(x) = a(x) when the critic's probability of "real" (class 1) is >= the
// routing threshold, psi(x) otherwise.
class Scaffold : public Classifier {
 public:
  static constexpr double kRoutingThreshold = 0.5;

  Scaffold() = default;
  Scaffold(RuleModel biased, RuleModel innocuous, Forest critic);

  const RuleModel& biased() const { return biased_; }
  const RuleModel& innocuous() const { return innocuous_; }
  const Forest& critic() const { return critic_; }

  // c(x) for every row.
  Vector realness(const Matrix& rows) const;
  // True where the row is routed to the biased model.
  std::vector<bool> routes_to_biased(const Matrix& rows) const;

  std::size_t n_classes() const override { return 2; }
  Matrix predict_proba(const Matrix& rows) const override;

 private:
  RuleModel biased_;
  RuleModel innocuous_;
  Forest critic_;
};

}  // namespace rlime::models
