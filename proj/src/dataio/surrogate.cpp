#include "rlime/dataio/surrogate.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace rlime::dataio {
namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

// Marsaglia-Tsang; shape > 0.
double gamma_draw(Rng& rng, double shape, double scale) {
  if (shape < 1.0) {
    const double u = std::max(uniform01(rng), 1e-300);
    return gamma_draw(rng, shape + 1.0, scale) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = standard_normal(rng);
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = uniform01(rng);
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
    if (std::log(std::max(u, 1e-300)) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
      return d * v * scale;
    }
  }
}

// Knuth's product method; fine for the small rates used here.
int poisson_draw(Rng& rng, double lambda) {
  const double limit = std::exp(-lambda);
  int k = 0;
  double p = uniform01(rng);
  while (p > limit) {
    ++k;
    p *= uniform01(rng);
  }
  return k;
}

int categorical_draw(Rng& rng, const std::vector<double>& probs) {
  return static_cast<int>(sample_weighted(rng, probs));
}

Column binary(const std::string& name) { return {name, ColumnKind::kDiscrete, {"0", "1"}}; }
Column numeric(const std::string& name) { return {name, ColumnKind::kContinuous, {}}; }

Dataset make_compas(Rng& rng, std::size_t n) {
  std::vector<Column> cols = {numeric("age"),
                              binary("two_year_recid"),
                              numeric("priors_count"),
                              numeric("length_of_stay"),
                              binary("c_charge_degree_F"),
                              binary("c_charge_degree_M"),
                              binary("sex_Female"),
                              binary("sex_Male"),
                              {"race", ColumnKind::kDiscrete, {"Other", "African-American"}}};
  LabelSpec label{"score_text", ColumnKind::kDiscrete, {"Low", "High"}, ""};
  Dataset ds;
  ds.schema = Schema(std::move(cols), "race", std::move(label));
  ds.rows.resize(static_cast<Eigen::Index>(n), 9);
  ds.labels.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    const bool aa = bernoulli(rng, 0.514);
    const bool male = bernoulli(rng, 0.81);
    const double age = std::min(83.0, 18.0 + std::floor(gamma_draw(rng, 1.9, aa ? 8.0 : 9.5)));
    const double rate = 0.9 + 1.9 * aa + 1.1 * male + 0.03 * (age - 18.0);
    const double priors = std::min(38, poisson_draw(rng, gamma_draw(rng, 0.8, rate / 0.8)));
    const bool felony = bernoulli(rng, logistic(0.25 + 0.07 * priors - 0.01 * (age - 30.0)));
    const double stay = std::min(
        800.0, std::floor(std::exp(0.2 + 0.9 * felony + 0.07 * priors + 1.6 * standard_normal(rng))));
    const bool recid = bernoulli(
        rng, logistic(-0.9 + 0.17 * priors - 0.045 * (age - 30.0) + 0.3 * male + 0.002 * stay));
    const bool high = bernoulli(rng, logistic(-2.0 + 0.21 * priors - 0.08 * (age - 30.0) +
                                              0.8 * recid + 0.45 * aa + 0.0025 * stay +
                                              0.3 * felony));
    ds.rows.row(i) << age, recid, priors, stay, felony, !felony, !male, male, aa;
    ds.labels[r] = high;
  }
  return ds;
}

Dataset make_german(Rng& rng, std::size_t n) {
  std::vector<Column> cols = {{"Gender", ColumnKind::kDiscrete, {"Female", "Male"}},
                              binary("ForeignWorker"),
                              binary("Single"),
                              numeric("Age"),
                              numeric("LoanDuration"),
                              numeric("LoanAmount"),
                              numeric("LoanRateAsPercentOfIncome"),
                              numeric("YearsAtCurrentHome"),
                              numeric("NumberOfOtherLoansAtBank")};
  LabelSpec label{"GoodCustomer", ColumnKind::kDiscrete, {"Bad", "Good"}, ""};
  Dataset ds;
  ds.schema = Schema(std::move(cols), "Gender", std::move(label));
  ds.rows.resize(static_cast<Eigen::Index>(n), 9);
  ds.labels.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    const bool male = bernoulli(rng, 0.69);
    const bool foreign = bernoulli(rng, 0.963);
    const double age = std::min(75.0, 19.0 + std::floor(gamma_draw(rng, 1.8, male ? 9.5 : 7.5)));
    const bool single = bernoulli(rng, logistic((male ? 0.9 : -0.6) - 0.05 * (age - 35.0)));
    const double duration =
        std::clamp(std::round(std::exp(2.85 + 0.55 * standard_normal(rng))), 4.0, 72.0);
    const double amount = std::clamp(
        std::round(std::exp(6.9 + 0.03 * duration + 0.55 * standard_normal(rng))), 250.0, 18424.0);
    const double rate = 1.0 + categorical_draw(rng, amount > 4000 ? std::vector<double>{0.3, 0.3, 0.15, 0.25}
                                                                  : std::vector<double>{0.1, 0.21, 0.16, 0.53});
    const double home = 1.0 + categorical_draw(rng, age > 40 ? std::vector<double>{0.07, 0.2, 0.14, 0.59}
                                                             : std::vector<double>{0.17, 0.38, 0.16, 0.29});
    const double loans = 1.0 + categorical_draw(rng, age > 40 ? std::vector<double>{0.52, 0.42, 0.04, 0.02}
                                                              : std::vector<double>{0.7, 0.27, 0.025, 0.005});
    const bool good = bernoulli(rng, logistic(1.7 - 0.035 * duration - 0.00008 * amount +
                                              0.02 * (age - 35.0) - 0.15 * (rate - 3.0) +
                                              0.25 * single - 0.3 * (loans - 1.0)));
    ds.rows.row(i) << male, foreign, single, age, duration, amount, rate, home, loans;
    ds.labels[r] = good;
  }
  return ds;
}

constexpr std::array<const char*, 100> kCommunitiesColumns = {
    "population", "householdsize", "racepctblack", "racePctWhite", "racePctAsian",
    "racePctHisp", "agePct12t21", "agePct12t29", "agePct16t24", "agePct65up",
    "numbUrban", "pctUrban", "medIncome", "pctWWage", "pctWFarmSelf",
    "pctWInvInc", "pctWSocSec", "pctWPubAsst", "pctWRetire", "medFamInc",
    "perCapInc", "whitePerCap", "blackPerCap", "indianPerCap", "AsianPerCap",
    "OtherPerCap", "HispPerCap", "NumUnderPov", "PctPopUnderPov", "PctLess9thGrade",
    "PctNotHSGrad", "PctBSorMore", "PctUnemployed", "PctEmploy", "PctEmplManu",
    "PctEmplProfServ", "PctOccupManu", "PctOccupMgmtProf", "MalePctDivorce", "MalePctNevMarr",
    "FemalePctDiv", "TotalPctDiv", "PersPerFam", "PctFam2Par", "PctKids2Par",
    "PctYoungKids2Par", "PctTeen2Par", "PctWorkMomYoungKids", "PctWorkMom", "NumIlleg",
    "PctIlleg", "NumImmig", "PctImmigRecent", "PctImmigRec5", "PctImmigRec8",
    "PctImmigRec10", "PctRecentImmig", "PctRecImmig5", "PctRecImmig8", "PctRecImmig10",
    "PctSpeakEnglOnly", "PctNotSpeakEnglWell", "PctLargHouseFam", "PctLargHouseOccup", "PersPerOccupHous",
    "PersPerOwnOccHous", "PersPerRentOccHous", "PctPersOwnOccup", "PctPersDenseHous", "PctHousLess3BR",
    "MedNumBR", "HousVacant", "PctHousOccup", "PctHousOwnOcc", "PctVacantBoarded",
    "PctVacMore6Mos", "MedYrHousBuilt", "PctHousNoPhone", "PctWOFullPlumb", "OwnOccLowQuart",
    "OwnOccMedVal", "OwnOccHiQuart", "RentLowQ", "RentMedian", "RentHighQ",
    "MedRent", "MedRentPctHousInc", "MedOwnCostPctInc", "MedOwnCostPctIncNoMtg", "NumInShelters",
    "NumStreet", "PctForeignBorn", "PctBornSameState", "PctSameHouse85", "PctSameCity85",
    "PctSameState85", "LandArea", "PopDens", "PctUsePubTrans", "LemasPctOfficDrugUn"};

// Equal-interval normalization with 3-sigma saturation, rounded to two
// decimals, as in the published normalized file.
void normalize_column(Matrix& m, Eigen::Index c) {
  const double mean = m.col(c).mean();
  const double sd = std::sqrt((m.col(c).array() - mean).square().mean());
  const double lo = std::max(m.col(c).minCoeff(), mean - 3.0 * sd);
  const double hi = std::min(m.col(c).maxCoeff(), mean + 3.0 * sd);
  const double span = hi > lo ? hi - lo : 1.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double v = std::clamp((m(i, c) - lo) / span, 0.0, 1.0);
    m(i, c) = std::round(v * 100.0) / 100.0;
  }
}

Dataset make_communities(Rng& rng, std::size_t n) {
  constexpr int kFactors = 5;
  const auto n_cols = static_cast<Eigen::Index>(kCommunitiesColumns.size());
  const Eigen::Index white_col = 3;

  // Fixed per-column structure drawn first so it does not depend on n.
  Matrix loadings(n_cols, kFactors + 1);
  std::vector<int> shape(static_cast<std::size_t>(n_cols));
  std::vector<double> noise(static_cast<std::size_t>(n_cols));
  for (Eigen::Index c = 0; c < n_cols; ++c) {
    for (int f = 0; f < kFactors + 1; ++f) {
      // Sparse-ish loadings: a couple of strong factors per column.
      const double strength = uniform01(rng) < 0.35 ? 1.0 : 0.25;
      loadings(c, f) = strength * standard_normal(rng);
    }
    shape[static_cast<std::size_t>(c)] = static_cast<int>(uniform_index(rng, 3));
    noise[static_cast<std::size_t>(c)] = 0.3 + 0.7 * uniform01(rng);
  }
  // Racial composition columns track the white-share factor explicitly.
  loadings.row(2).setZero();
  loadings(2, kFactors) = -2.0;
  loadings.row(white_col).setZero();
  shape[2] = 1;

  Matrix raw(static_cast<Eigen::Index>(n), n_cols);
  Vector crime(static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < n; ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    Eigen::Matrix<double, kFactors + 1, 1> u;
    for (int f = 0; f < kFactors; ++f) u(f) = standard_normal(rng);
    u(1) += 0.5 * u(0);
    // White-share logit, correlated with affluence and (negatively) density.
    const double white_logit = 1.35 + 0.7 * u(0) - 0.6 * u(1) + 0.5 * standard_normal(rng);
    u(kFactors) = (white_logit - 1.35) / 1.05;
    for (Eigen::Index c = 0; c < n_cols; ++c) {
      const double lin = loadings.row(c).dot(u) + noise[static_cast<std::size_t>(c)] * standard_normal(rng);
      switch (shape[static_cast<std::size_t>(c)]) {
        case 0: raw(i, c) = lin; break;                         // symmetric
        case 1: raw(i, c) = std::exp(0.8 * lin); break;         // right-skewed
        default: raw(i, c) = logistic(1.5 * lin - 1.0); break;  // bounded, piled near 0
      }
    }
    raw(i, white_col) = logistic(white_logit);
    crime(i) = std::exp(0.9 * (-0.8 * u(0) + 0.6 * u(1) + 0.7 * u(2) - 0.9 * u(kFactors)) +
                        0.5 * standard_normal(rng));
  }
  for (Eigen::Index c = 0; c < n_cols; ++c) {
    if (c == white_col) {
      for (Eigen::Index i = 0; i < raw.rows(); ++i) raw(i, c) = std::round(raw(i, c) * 100.0) / 100.0;
    } else {
      normalize_column(raw, c);
    }
  }
  Matrix crime_m = crime;
  normalize_column(crime_m, 0);

  std::vector<Column> cols;
  for (const char* name : kCommunitiesColumns) cols.push_back(numeric(name));
  LabelSpec label{"ViolentCrimesPerPop", ColumnKind::kContinuous, {"low-crime", "high-crime"}, "median"};
  Dataset ds;
  ds.schema = Schema(std::move(cols), "racePctWhite", std::move(label));
  ds.rows = raw;
  // Same rule the CSV loader applies: strictly above the full-data median.
  std::vector<double> sorted(crime_m.data(), crime_m.data() + crime_m.size());
  std::sort(sorted.begin(), sorted.end());
  const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  ds.raw_labels.assign(crime_m.data(), crime_m.data() + crime_m.size());
  ds.labels.resize(n);
  for (std::size_t r = 0; r < n; ++r) ds.labels[r] = crime_m(static_cast<Eigen::Index>(r), 0) > median;
  return ds;
}

}  // namespace

std::size_t surrogate_default_rows(const std::string& kind) {
  if (kind == "compas") return 6172;
  if (kind == "german") return 1000;
  if (kind == "communities") return 1994;
  throw ConfigError("unknown dataset kind '" + kind + "'");
}

Dataset make_surrogate(const std::string& kind, std::uint64_t seed, std::size_t n_rows) {
  const std::size_t n = n_rows ? n_rows : surrogate_default_rows(kind);
  Rng rng(seed);
  if (kind == "compas") return make_compas(rng, n);
  if (kind == "german") return make_german(rng, n);
  if (kind == "communities") return make_communities(rng, n);
  throw ConfigError("unknown dataset kind '" + kind + "'");
}

}  // namespace rlime::dataio
