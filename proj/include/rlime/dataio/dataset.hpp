#pragma once

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rlime/common.hpp"

namespace rlime::dataio {

enum class ColumnKind { kContinuous, kDiscrete };

struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::kContinuous;
  // Ordered category labels; only meaningful for discrete columns.
  std::vector<std::string> categories;

  bool is_discrete() const { return kind == ColumnKind::kDiscrete; }
};

// How the label column turns into class indices.
//  - discrete label: class index = category index.
//  - continuous label with binarize="median": class 1 iff value > median of
//    the full file (computed before any split).
struct LabelSpec {
  std::string name;
  ColumnKind kind = ColumnKind::kDiscrete;
  std::vector<std::string> classes;
  std::string binarize;  // "" or "median"
};

// Feature columns in file order (label excluded), plus the sensitive-feature
// designation and the label description.
class Schema {
 public:
  Schema() = default;
  Schema(std::vector<Column> columns, std::string sensitive_feature, LabelSpec label);

  const std::vector<Column>& columns() const { return columns_; }
  const Column& column(std::size_t i) const { return columns_.at(i); }
  std::size_t size() const { return columns_.size(); }
  const std::string& sensitive_feature() const { return sensitive_; }
  const LabelSpec& label() const { return label_; }
  std::size_t n_classes() const { return label_.classes.size(); }

  std::optional<std::size_t> find(const std::string& name) const;
  // Throws SchemaError when the column is absent.
  std::size_t index_of(const std::string& name) const;
  std::size_t category_index(std::size_t column, const std::string& category) const;

  std::vector<std::string> feature_names() const;
  std::vector<std::size_t> continuous_indices() const;
  std::vector<std::size_t> discrete_indices() const;

  Schema with_column(Column c) const;

  // {columns:[{name,kind,categories?}], sensitive_feature, label}. The label
  // column is listed among `columns`; it may carry "binarize": "median".
  static Schema from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  static Schema load(const std::filesystem::path& path);

 private:
  void validate() const;

  std::vector<Column> columns_;
  std::string sensitive_;
  LabelSpec label_;
};

// Row-major records: rows(i, j) holds the value of feature j for record i.
// Discrete values are stored as category indices.
struct Dataset {
  Schema schema;
  Matrix rows;
  std::vector<int> labels;
  // Source values of a continuous (median-binarized) label; empty otherwise.
  std::vector<double> raw_labels;

  std::size_t n_rows() const { return static_cast<std::size_t>(rows.rows()); }
  std::size_t n_features() const { return static_cast<std::size_t>(rows.cols()); }

  Dataset subset(const std::vector<std::size_t>& indices) const;
  // Throws ValidationError when a discrete value is out of range or shapes
  // disagree.
  void validate() const;
};

Dataset load_dataset(const std::filesystem::path& csv_path,
                     const std::filesystem::path& schema_path);
Dataset parse_dataset(const std::string& csv_text, const Schema& schema);
void write_dataset_csv(const Dataset& ds, const std::filesystem::path& path);

// Stratified split. Returns (train, test); both keep the source row order.
std::pair<Dataset, Dataset> split(const Dataset& ds, double test_fraction,
                                  std::uint64_t seed);

// Adds "unrelated_0" (or the next free "unrelated_<i>") holding i.i.d.
// Bernoulli(1/2) values in {0, 1}, typed continuous.
Dataset append_uncorrelated_feature(const Dataset& ds, std::uint64_t seed);

}  // namespace rlime::dataio
