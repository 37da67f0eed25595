#include "rlime/models/rules.hpp"

namespace rlime::models {

std::string rule_kind_name(RuleKind k) {
  switch (k) {
    case RuleKind::kCompasRace: return "compas_race";
    case RuleKind::kGermanGender: return "german_gender";
    case RuleKind::kCommunitiesWhitePop: return "communities_whitepop";
    case RuleKind::kUnrelatedThreshold: return "unrelated_threshold";
  }
  return "unrelated_threshold";
}

RuleKind parse_rule_kind(const std::string& name) {
  if (name == "compas_race") return RuleKind::kCompasRace;
  if (name == "german_gender") return RuleKind::kGermanGender;
  if (name == "communities_whitepop") return RuleKind::kCommunitiesWhitePop;
  if (name == "unrelated_threshold") return RuleKind::kUnrelatedThreshold;
  throw ParseError("unknown rule kind '" + name + "'");
}

namespace {

bool is_categorical(RuleKind k) { return k == RuleKind::kCompasRace || k == RuleKind::kGermanGender; }

}  // namespace

RuleModel::RuleModel(RuleKind kind, std::string column, double threshold, std::string category,
                     const dataio::Schema& schema)
    : kind_(kind), column_(std::move(column)), threshold_(threshold), category_(std::move(category)) {
  index_ = schema.index_of(column_);
  width_ = schema.size();
  const auto& col = schema.column(index_);
  if (is_categorical(kind_)) {
    if (!col.is_discrete()) throw SchemaError("rule " + rule_kind_name(kind_) + " needs a discrete column");
    category_index_ = schema.category_index(index_, category_);
  } else if (col.is_discrete()) {
    throw SchemaError("rule " + rule_kind_name(kind_) + " needs a continuous column");
  }
}

int RuleModel::predict_row(const double* row) const {
  const double v = row[index_];
  switch (kind_) {
    case RuleKind::kCompasRace:
    case RuleKind::kGermanGender: return static_cast<std::size_t>(v) == category_index_ ? 1 : 0;
    case RuleKind::kCommunitiesWhitePop: return v < threshold_ ? 1 : 0;
    case RuleKind::kUnrelatedThreshold: return v > threshold_ ? 1 : 0;
  }
  return 0;
}

Matrix RuleModel::predict_proba(const Matrix& rows) const {
  if (static_cast<std::size_t>(rows.cols()) != width_) throw ShapeError("rule model: row width does not match schema");
  Matrix out = Matrix::Zero(rows.rows(), 2);
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const RowVector r = rows.row(i);
    out(i, predict_row(r.data())) = 1.0;
  }
  return out;
}

nlohmann::json RuleModel::to_json() const {
  nlohmann::json j{{"kind", rule_kind_name(kind_)}, {"column", column_}, {"threshold", threshold_}};
  if (is_categorical(kind_)) j["category"] = category_;
  return j;
}

RuleModel RuleModel::from_json(const nlohmann::json& j, const dataio::Schema& schema) {
  try {
    return RuleModel(parse_rule_kind(j.at("kind").get<std::string>()), j.at("column").get<std::string>(),
                     j.value("threshold", 0.5), j.value("category", std::string()), schema);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed rule model: ") + e.what());
  }
}

RuleModel biased_classifier(const std::string& dataset_kind, const dataio::Schema& schema) {
  if (dataset_kind == "compas") return RuleModel(RuleKind::kCompasRace, "race", 0.5, "African-American", schema);
  if (dataset_kind == "german") return RuleModel(RuleKind::kGermanGender, "Gender", 0.5, "Male", schema);
  if (dataset_kind == "communities") {
    return RuleModel(RuleKind::kCommunitiesWhitePop, "racePctWhite", 0.5, "", schema);
  }
  throw ConfigError("unknown dataset kind '" + dataset_kind + "'");
}

RuleModel innocuous_model(const std::string& column, const dataio::Schema& schema) {
  return RuleModel(RuleKind::kUnrelatedThreshold, column, 0.5, "", schema);
}

Scaffold::Scaffold(RuleModel biased, RuleModel innocuous, Forest critic)
    : biased_(std::move(biased)), innocuous_(std::move(innocuous)), critic_(std::move(critic)) {
  if (critic_.classes != 2) throw ConfigError("scaffold critic must be a binary classifier");
}

Vector Scaffold::realness(const Matrix& rows) const { return critic_.predict_proba(rows).col(1); }

std::vector<bool> Scaffold::routes_to_biased(const Matrix& rows) const {
  const Vector c = realness(rows);
  std::vector<bool> out(static_cast<std::size_t>(c.size()));
  for (Eigen::Index i = 0; i < c.size(); ++i) out[static_cast<std::size_t>(i)] = c(i) >= kRoutingThreshold;
  return out;
}

Matrix Scaffold::predict_proba(const Matrix& rows) const {
  const auto route = routes_to_biased(rows);
  const Matrix a = biased_.predict_proba(rows);
  const Matrix psi = innocuous_.predict_proba(rows);
  Matrix out(rows.rows(), 2);
  for (Eigen::Index i = 0; i < rows.rows(); ++i) out.row(i) = route[static_cast<std::size_t>(i)] ? a.row(i) : psi.row(i);
  return out;
}

}  // namespace rlime::models
