#include "rlime/dataio/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

namespace rlime::dataio {
namespace {

std::string kind_name(ColumnKind k) {
  return k == ColumnKind::kDiscrete ? "discrete" : "continuous";
}

ColumnKind parse_kind(const std::string& s) {
  if (s == "discrete") return ColumnKind::kDiscrete;
  if (s == "continuous") return ColumnKind::kContinuous;
  throw SchemaError("unknown column kind '" + s + "'");
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

// Minimal RFC 4180 field splitting: double quotes protect commas and "" is an
// escaped quote. Records never span lines.
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

Schema::Schema(std::vector<Column> columns, std::string sensitive_feature, LabelSpec label)
    : columns_(std::move(columns)), sensitive_(std::move(sensitive_feature)),
      label_(std::move(label)) {
  validate();
}

void Schema::validate() const {
  std::set<std::string> names;
  for (const auto& c : columns_) {
    if (c.name.empty()) throw SchemaError("column with empty name");
    if (!names.insert(c.name).second) throw SchemaError("duplicate column '" + c.name + "'");
    if (c.is_discrete() && c.categories.size() < 2) {
      throw SchemaError("discrete column '" + c.name + "' needs at least 2 categories");
    }
  }
  if (label_.name.empty()) throw SchemaError("schema has no label column");
  if (names.count(label_.name)) {
    throw SchemaError("label '" + label_.name + "' also listed as a feature");
  }
  if (label_.classes.size() < 2) throw SchemaError("label needs at least 2 classes");
  if (label_.kind == ColumnKind::kContinuous && label_.binarize != "median") {
    throw SchemaError("continuous label '" + label_.name + "' requires binarize=median");
  }
  if (label_.binarize == "median" && label_.classes.size() != 2) {
    throw SchemaError("median-binarized label needs exactly 2 classes");
  }
  if (!names.count(sensitive_)) {
    throw SchemaError("sensitive feature '" + sensitive_ + "' is not a column");
  }
}

std::optional<std::size_t> Schema::find(const std::string& name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t Schema::index_of(const std::string& name) const {
  if (auto i = find(name)) return *i;
  throw SchemaError("no column named '" + name + "'");
}

std::size_t Schema::category_index(std::size_t column, const std::string& category) const {
  const auto& cats = columns_.at(column).categories;
  auto it = std::find(cats.begin(), cats.end(), category);
  if (it == cats.end()) {
    throw ValidationError("unknown category '" + category + "' for column '" +
                          columns_.at(column).name + "'");
  }
  return static_cast<std::size_t>(it - cats.begin());
}

std::vector<std::string> Schema::feature_names() const {
  std::vector<std::string> out;
  out.reserve(columns_.size());
  for (const auto& c : columns_) out.push_back(c.name);
  return out;
}

std::vector<std::size_t> Schema::continuous_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (!columns_[i].is_discrete()) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> Schema::discrete_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].is_discrete()) out.push_back(i);
  }
  return out;
}

Schema Schema::with_column(Column c) const {
  auto cols = columns_;
  cols.push_back(std::move(c));
  return Schema(std::move(cols), sensitive_, label_);
}

Schema Schema::from_json(const nlohmann::json& j) {
  try {
    const std::string label_name = j.at("label").get<std::string>();
    std::vector<Column> cols;
    LabelSpec label;
    bool label_seen = false;
    for (const auto& jc : j.at("columns")) {
      Column c;
      c.name = jc.at("name").get<std::string>();
      c.kind = parse_kind(jc.at("kind").get<std::string>());
      if (jc.contains("categories")) {
        c.categories = jc.at("categories").get<std::vector<std::string>>();
      }
      if (c.name == label_name) {
        label_seen = true;
        label.name = c.name;
        label.kind = c.kind;
        label.classes = c.categories;
        label.binarize = jc.value("binarize", std::string());
        if (label.kind == ColumnKind::kContinuous && label.classes.empty()) {
          label.classes = {"0", "1"};
        }
        continue;
      }
      cols.push_back(std::move(c));
    }
    if (!label_seen) throw SchemaError("label '" + label_name + "' is not among the columns");
    return Schema(std::move(cols), j.at("sensitive_feature").get<std::string>(),
                  std::move(label));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed schema: ") + e.what());
  }
}

nlohmann::json Schema::to_json() const {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : columns_) {
    nlohmann::json jc{{"name", c.name}, {"kind", kind_name(c.kind)}};
    if (c.is_discrete()) jc["categories"] = c.categories;
    cols.push_back(std::move(jc));
  }
  nlohmann::json jl{{"name", label_.name}, {"kind", kind_name(label_.kind)},
                    {"categories", label_.classes}};
  if (!label_.binarize.empty()) jl["binarize"] = label_.binarize;
  cols.push_back(std::move(jl));
  return {{"columns", cols}, {"sensitive_feature", sensitive_}, {"label", label_.name}};
}

Schema Schema::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open schema file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("schema file " + path.string() + " does not parse: " + e.what());
  }
  return from_json(j);
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.schema = schema;
  out.rows.resize(static_cast<Eigen::Index>(indices.size()), rows.cols());
  out.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.rows.row(static_cast<Eigen::Index>(i)) = rows.row(static_cast<Eigen::Index>(indices[i]));
    out.labels.push_back(labels.at(indices[i]));
    if (!raw_labels.empty()) out.raw_labels.push_back(raw_labels.at(indices[i]));
  }
  return out;
}

void Dataset::validate() const {
  if (static_cast<std::size_t>(rows.cols()) != schema.size()) {
    throw ValidationError("dataset width does not match schema");
  }
  if (labels.size() != n_rows()) throw ValidationError("rows and labels differ in length");
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const auto& c = schema.column(j);
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
      const double v = rows(i, static_cast<Eigen::Index>(j));
      if (!std::isfinite(v)) {
        throw ValidationError("row " + std::to_string(i) + ": non-finite value in '" + c.name + "'");
      }
      if (c.is_discrete() &&
          (v < 0 || v != std::floor(v) || v >= static_cast<double>(c.categories.size()))) {
        throw ValidationError("row " + std::to_string(i) + ": category out of range in '" +
                              c.name + "'");
      }
    }
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= schema.n_classes()) {
      throw ValidationError("row " + std::to_string(i) + ": label out of range");
    }
  }
}

Dataset parse_dataset(const std::string& csv_text, const Schema& schema) {
  std::istringstream in(csv_text);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("CSV is empty");
  const auto header = split_csv_line(line);

  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < header.size(); ++i) pos[header[i]] = i;
  auto locate = [&](const std::string& name) {
    auto it = pos.find(name);
    if (it == pos.end()) throw SchemaError("CSV lacks column '" + name + "'");
    return it->second;
  };
  std::vector<std::size_t> feature_pos;
  for (const auto& c : schema.columns()) feature_pos.push_back(locate(c.name));
  const std::size_t label_pos = locate(schema.label().name);

  std::vector<std::vector<double>> values;
  std::vector<double> raw_labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    const std::size_t row = values.size();
    if (cells.size() != header.size()) {
      throw ValidationError("row " + std::to_string(row) + " (line " + std::to_string(line_no) +
                            "): expected " + std::to_string(header.size()) + " cells, got " +
                            std::to_string(cells.size()));
    }
    std::vector<double> rec(schema.size());
    for (std::size_t j = 0; j < schema.size(); ++j) {
      const auto& col = schema.column(j);
      const std::string& cell = cells[feature_pos[j]];
      if (cell.empty()) {
        throw ValidationError("row " + std::to_string(row) + ": missing value in '" + col.name + "'");
      }
      if (col.is_discrete()) {
        auto it = std::find(col.categories.begin(), col.categories.end(), cell);
        if (it == col.categories.end()) {
          throw ValidationError("row " + std::to_string(row) + ": unknown category '" + cell +
                                "' in column '" + col.name + "'");
        }
        rec[j] = static_cast<double>(it - col.categories.begin());
      } else if (!parse_double(cell, rec[j])) {
        throw ParseError("row " + std::to_string(row) + ": non-numeric value '" + cell +
                         "' in continuous column '" + col.name + "'");
      }
    }
    const std::string& lcell = cells[label_pos];
    if (lcell.empty()) {
      throw ValidationError("row " + std::to_string(row) + ": missing label");
    }
    const auto& lab = schema.label();
    double lv = 0.0;
    if (lab.kind == ColumnKind::kDiscrete) {
      auto it = std::find(lab.classes.begin(), lab.classes.end(), lcell);
      if (it == lab.classes.end()) {
        throw ValidationError("row " + std::to_string(row) + ": unknown label '" + lcell + "'");
      }
      lv = static_cast<double>(it - lab.classes.begin());
    } else if (!parse_double(lcell, lv)) {
      throw ParseError("row " + std::to_string(row) + ": non-numeric label '" + lcell + "'");
    }
    values.push_back(std::move(rec));
    raw_labels.push_back(lv);
  }
  if (values.empty()) throw ValidationError("CSV has a header but zero data rows");

  Dataset ds;
  ds.schema = schema;
  ds.rows.resize(static_cast<Eigen::Index>(values.size()), static_cast<Eigen::Index>(schema.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    for (std::size_t j = 0; j < schema.size(); ++j) {
      ds.rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[i][j];
    }
  }
  ds.labels.resize(values.size());
  if (schema.label().binarize == "median") {
    auto sorted = raw_labels;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    for (std::size_t i = 0; i < n; ++i) ds.labels[i] = raw_labels[i] > median ? 1 : 0;
    ds.raw_labels = raw_labels;
  } else {
    for (std::size_t i = 0; i < raw_labels.size(); ++i) ds.labels[i] = static_cast<int>(raw_labels[i]);
  }
  return ds;
}

Dataset load_dataset(const std::filesystem::path& csv_path,
                     const std::filesystem::path& schema_path) {
  const Schema schema = Schema::load(schema_path);
  std::ifstream in(csv_path, std::ios::binary);
  if (!in) throw IoError("cannot open data file " + csv_path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str(), schema);
}

void write_dataset_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  const auto& schema = ds.schema;
  for (const auto& c : schema.columns()) out << c.name << ',';
  out << schema.label().name << '\n';
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    for (std::size_t j = 0; j < schema.size(); ++j) {
      const double v = ds.rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      const auto& c = schema.column(j);
      out << (c.is_discrete() ? c.categories.at(static_cast<std::size_t>(v)) : format_double(v))
          << ',';
    }
    if (schema.label().kind == ColumnKind::kContinuous) {
      out << format_double(ds.raw_labels.at(i)) << '\n';
    } else {
      out << schema.label().classes.at(static_cast<std::size_t>(ds.labels[i])) << '\n';
    }
  }
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("test_fraction must lie in (0, 1)");
  }
  const std::size_t n = ds.n_rows();
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < n; ++i) by_class[ds.labels[i]].push_back(i);

  // Largest-remainder allocation so the per-class test counts add up to
  // round(test_fraction * n).
  const auto total_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  std::vector<std::pair<int, std::size_t>> quota;
  std::vector<std::pair<double, int>> remainders;
  std::size_t assigned = 0;
  for (const auto& [cls, idx] : by_class) {
    const double exact = test_fraction * static_cast<double>(idx.size());
    const auto base = static_cast<std::size_t>(std::floor(exact));
    quota.emplace_back(cls, base);
    remainders.emplace_back(exact - static_cast<double>(base), cls);
    assigned += base;
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < total_test && r < remainders.size(); ++r, ++assigned) {
    for (auto& q : quota) {
      if (q.first == remainders[r].second) ++q.second;
    }
  }

  Rng rng(seed);
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> test_idx;
  for (const auto& [cls, count] : quota) {
    auto idx = by_class.at(cls);
    shuffle_in_place(rng, idx);
    const std::size_t take = std::min(count, idx.size());
    test_idx.insert(test_idx.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
    train_idx.insert(train_idx.end(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  return {ds.subset(train_idx), ds.subset(test_idx)};
}

Dataset append_uncorrelated_feature(const Dataset& ds, std::uint64_t seed) {
  std::string name;
  for (int i = 0;; ++i) {
    name = "unrelated_" + std::to_string(i);
    if (!ds.schema.find(name) && name != ds.schema.label().name) break;
  }
  Dataset out;
  out.schema = ds.schema.with_column(Column{name, ColumnKind::kContinuous, {}});
  out.labels = ds.labels;
  out.raw_labels = ds.raw_labels;
  out.rows.resize(ds.rows.rows(), ds.rows.cols() + 1);
  out.rows.leftCols(ds.rows.cols()) = ds.rows;
  Rng rng(seed);
  for (Eigen::Index i = 0; i < ds.rows.rows(); ++i) {
    out.rows(i, ds.rows.cols()) = static_cast<double>(rng() >> 63);
  }
  return out;
}

}  // namespace rlime::dataio
