// Copyright 2026 The areltrend Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS-IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "areltrend/areal_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <unordered_map>

#include "areltrend/csv.hpp"
#include "areltrend/error.hpp"

namespace areltrend {

namespace {

constexpr double kSimplexTolerance = 1e-6;
constexpr double kLn2 = 0.69314718055994530942;

void check_simplex(std::span<const double> props, const char* what) {
  double sum = 0.0;
  for (const double p : props) {
    if (!(p >= 0.0)) throw InputError(std::string(what) + ": negative or NaN proportion");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kSimplexTolerance) {
    throw InputError(std::string(what) + ": proportions sum to " + std::to_string(sum) +
                     ", expected 1");
  }
}

}  // namespace

double ihs(double c) { return std::asinh(c) - kLn2; }

double ihs_inverse(double y) { return std::sinh(y + kLn2); }

// ---- ArealPanel -------------------------------------------------------------

ArealPanel ArealPanel::from_counts(std::vector<std::string> unit_ids, std::vector<int> periods,
                                   CountMatrix counts) {
  ArealPanel panel;
  panel.unit_ids_ = std::move(unit_ids);
  panel.periods_ = std::move(periods);
  if (counts.rows() != panel.n() || counts.cols() != panel.periods_count()) {
    throw DimensionError("count matrix is " + std::to_string(counts.rows()) + "x" +
                         std::to_string(counts.cols()) + ", expected " +
                         std::to_string(panel.n()) + "x" + std::to_string(panel.periods_count()));
  }
  if ((counts.array() < 0).any()) throw InputError("negative crime count");
  panel.y_ = counts.unaryExpr([](std::int64_t c) { return ihs(c); });
  panel.counts_ = std::move(counts);
  panel.validate();
  return panel;
}

ArealPanel ArealPanel::from_responses(std::vector<std::string> unit_ids, std::vector<int> periods,
                                      Eigen::MatrixXd y) {
  ArealPanel panel;
  panel.unit_ids_ = std::move(unit_ids);
  panel.periods_ = std::move(periods);
  if (y.rows() != panel.n() || y.cols() != panel.periods_count()) {
    throw DimensionError("response matrix does not match unit and period counts");
  }
  if (!y.allFinite()) throw InputError("non-finite response");
  panel.y_ = std::move(y);
  panel.validate();
  return panel;
}

void ArealPanel::validate() const {
  std::set<std::string> seen(unit_ids_.begin(), unit_ids_.end());
  if (seen.size() != unit_ids_.size()) throw InputError("duplicate unit_id in panel");
  if (!std::is_sorted(periods_.begin(), periods_.end()) ||
      std::adjacent_find(periods_.begin(), periods_.end()) != periods_.end()) {
    throw InputError("periods must be strictly increasing");
  }
}

int ArealPanel::column_of(int period) const {
  const auto it = std::find(periods_.begin(), periods_.end(), period);
  if (it == periods_.end()) throw InputError("period " + std::to_string(period) + " not in panel");
  return static_cast<int>(it - periods_.begin());
}

std::optional<int> ArealPanel::find_unit(const std::string& id) const {
  const auto it = std::find(unit_ids_.begin(), unit_ids_.end(), id);
  if (it == unit_ids_.end()) return std::nullopt;
  return static_cast<int>(it - unit_ids_.begin());
}

ArealPanel ArealPanel::select_units(std::span<const std::string> ids) const {
  std::unordered_map<std::string, int> index;
  for (int i = 0; i < n(); ++i) index.emplace(unit_ids_[i], i);
  std::vector<int> rows;
  rows.reserve(ids.size());
  for (const auto& id : ids) {
    const auto it = index.find(id);
    if (it == index.end()) throw DimensionError("unit '" + id + "' not in crime panel");
    rows.push_back(it->second);
  }
  ArealPanel out;
  out.unit_ids_.assign(ids.begin(), ids.end());
  out.periods_ = periods_;
  out.y_ = y_(rows, Eigen::all);
  if (counts_) out.counts_ = (*counts_)(rows, Eigen::all);
  return out;
}

// ---- covariate constructors -----------------------------------------------

double segregation(std::span<const double> unit_props, std::span<const double> city_props) {
  if (unit_props.size() != city_props.size()) {
    throw InputError("segregation: dimension mismatch");
  }
  check_simplex(unit_props, "segregation (unit)");
  check_simplex(city_props, "segregation (city)");
  double total = 0.0;
  for (std::size_t r = 0; r < unit_props.size(); ++r) {
    total += std::abs(unit_props[r] - city_props[r]);
  }
  return std::clamp(0.5 * total, 0.0, 1.0);
}

double poverty_index(std::span<const double> bracket_props) {
  if (bracket_props.size() != kPovertyBrackets) {
    throw InputError("poverty_index: expected 7 bracket proportions");
  }
  check_simplex(bracket_props, "poverty_index");
  double value = 0.0;
  for (std::size_t j = 0; j < kPovertyBrackets; ++j) {
    const double weight = static_cast<double>(6 - j) / 6.0;
    value += weight * bracket_props[j];
  }
  return std::clamp(value, 0.0, 1.0);
}

LandUseRatios landuse_ratios(const LandUseAreas& areas) {
  if (areas.total < 0 || areas.vacant < 0 || areas.commercial < 0 || areas.residential < 0) {
    throw InputError("landuse_ratios: negative area");
  }
  LandUseRatios ratios;
  if (areas.total > 0) ratios.vacancy = areas.vacant / areas.total;
  const double built = areas.commercial + areas.residential;
  if (built > 0) ratios.comresprop = areas.commercial / built;
  return ratios;
}

bool has_missing_covariates(const RawUnitDemographics& unit) {
  if (!unit.income_per_capita || !unit.poverty_bracket_props) return true;
  const auto ratios = landuse_ratios(unit.land);
  return !ratios.vacancy || !ratios.comresprop;
}

// ---- CovariateMatrix --------------------------------------------------------

CovariateMatrix standardize(Eigen::MatrixXd values, std::vector<std::string> unit_ids,
                            std::vector<std::string> names) {
  const auto n = values.rows();
  const auto d = values.cols();
  if (static_cast<std::size_t>(d) != names.size()) throw DimensionError("covariate name count");
  if (static_cast<std::size_t>(n) != unit_ids.size()) throw DimensionError("covariate row count");
  if (n < 2) throw InputError("need at least two units to standardize covariates");
  CovariateMatrix out;
  out.means.resize(d);
  out.scales.resize(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double mean = values.col(j).mean();
    const double ss = (values.col(j).array() - mean).square().sum();
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
      throw InputError("covariate '" + names[j] + "' has zero spread; cannot standardize");
    }
    values.col(j) = (values.col(j).array() - mean) / sd;
    // Second pass removes the O(eps) residual mean left by the first.
    const double residual = values.col(j).mean();
    values.col(j).array() -= residual;
    out.means(j) = mean + residual * sd;
    out.scales(j) = sd;
  }
  out.Z = std::move(values);
  out.unit_ids = std::move(unit_ids);
  out.names = std::move(names);
  out.transform_log.assign(d, false);
  out.transform_sqrt.assign(d, false);
  out.standardized = true;
  return out;
}

Eigen::MatrixXd CovariateMatrix::destandardize() const {
  if (!standardized) return Z;
  Eigen::MatrixXd raw = Z;
  for (Eigen::Index j = 0; j < raw.cols(); ++j) {
    raw.col(j) = raw.col(j).array() * scales(j) + means(j);
  }
  return raw;
}

CovariateMatrix CovariateMatrix::select_units(std::span<const std::string> ids) const {
  std::unordered_map<std::string, int> index;
  for (int i = 0; i < n(); ++i) index.emplace(unit_ids[i], i);
  std::vector<int> rows;
  for (const auto& id : ids) {
    const auto it = index.find(id);
    if (it == index.end()) throw DimensionError("unit '" + id + "' has no covariates");
    rows.push_back(it->second);
  }
  CovariateMatrix out = *this;
  out.Z = Z(rows, Eigen::all);
  out.unit_ids.assign(ids.begin(), ids.end());
  return out;
}

CovariateMatrix build_covariates(std::span<const RawUnitDemographics> raw,
                                 const CovariateOptions& options) {
  const auto n = static_cast<Eigen::Index>(raw.size());
  std::array<double, 5> city{};
  for (const auto& unit : raw) {
    for (std::size_t r = 0; r < city.size(); ++r) {
      if (unit.ethnic_counts[r] < 0) throw InputError("negative ethnicity count for " + unit.unit_id);
      city[r] += unit.ethnic_counts[r];
    }
  }
  const double city_total = std::accumulate(city.begin(), city.end(), 0.0);
  if (!(city_total > 0)) throw InputError("ethnicity counts sum to zero across all units");
  for (auto& c : city) c /= city_total;

  Eigen::MatrixXd values(n, 6);
  std::vector<std::string> ids;
  ids.reserve(raw.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& unit = raw[i];
    ids.push_back(unit.unit_id);
    if (!unit.income_per_capita || !unit.poverty_bracket_props) {
      throw InputError("unit '" + unit.unit_id + "' has missing economic covariates");
    }
    if (!(*unit.income_per_capita > 0)) {
      throw InputError("unit '" + unit.unit_id + "' has non-positive income; cannot take log");
    }
    const double pop = std::accumulate(unit.ethnic_counts.begin(), unit.ethnic_counts.end(), 0.0);
    std::array<double, 5> props{};
    if (pop > 0) {
      for (std::size_t r = 0; r < props.size(); ++r) props[r] = unit.ethnic_counts[r] / pop;
    } else {
      props = city;
    }
    const auto ratios = landuse_ratios(unit.land);
    if (!ratios.vacancy || !ratios.comresprop) {
      throw InputError("unit '" + unit.unit_id + "' has undefined land-use ratios");
    }
    values(i, 0) = static_cast<double>(unit.pop_total);
    values(i, 1) = segregation(props, city);
    values(i, 2) = std::log(*unit.income_per_capita);
    values(i, 3) = std::sqrt(poverty_index(*unit.poverty_bracket_props));
    values(i, 4) = std::sqrt(*ratios.vacancy);
    values(i, 5) = std::sqrt(*ratios.comresprop);
  }
  std::vector<std::string> names = {"pop_total",  "segregation",  "log_income",
                                    "sqrt_poverty", "sqrt_vacancy", "sqrt_comresprop"};
  CovariateMatrix out;
  if (options.standardize) {
    out = standardize(std::move(values), std::move(ids), std::move(names));
  } else {
    out.Z = std::move(values);
    out.unit_ids = std::move(ids);
    out.names = std::move(names);
    out.means = Eigen::VectorXd::Zero(6);
    out.scales = Eigen::VectorXd::Ones(6);
  }
  out.transform_log = {false, false, true, false, false, false};
  out.transform_sqrt = {false, false, false, true, true, true};
  return out;
}

// ---- exclusions -------------------------------------------------------------

ExclusionResult apply_exclusions(const ArealPanel& panel, std::span<const RawUnitDemographics> raw,
                                 std::span<const std::string> listed_ids) {
  std::set<std::string> present(panel.unit_ids().begin(), panel.unit_ids().end());
  for (const auto& id : listed_ids) {
    if (!present.contains(id)) throw InputError("cannot exclude unknown unit '" + id + "'");
  }
  std::unordered_map<std::string, const RawUnitDemographics*> by_id;
  for (const auto& unit : raw) by_id.emplace(unit.unit_id, &unit);

  std::set<std::string> listed(listed_ids.begin(), listed_ids.end());
  ExclusionResult result;
  std::vector<std::string> kept;
  std::vector<std::string> listed_hits;
  for (const auto& id : panel.unit_ids()) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw DimensionError("unit '" + id + "' has no raw covariate row");
    if (has_missing_covariates(*it->second)) {
      result.excluded_ids.push_back(id);
    } else if (listed.contains(id)) {
      listed_hits.push_back(id);
    } else {
      kept.push_back(id);
      result.raw.push_back(*it->second);
    }
  }
  // A listed unit that also had missing data is reported once, as missing.
  result.excluded_ids.insert(result.excluded_ids.end(), listed_hits.begin(), listed_hits.end());
  result.panel = panel.select_units(kept);
  return result;
}

ArealPanel exclude_units(const ArealPanel& panel, std::span<const std::string> listed_ids) {
  std::set<std::string> listed(listed_ids.begin(), listed_ids.end());
  for (const auto& id : listed) {
    if (!panel.find_unit(id)) throw InputError("cannot exclude unknown unit '" + id + "'");
  }
  std::vector<std::string> kept;
  for (const auto& id : panel.unit_ids()) {
    if (!listed.contains(id)) kept.push_back(id);
  }
  return panel.select_units(kept);
}

// ---- file formats -------------------------------------------------------------

ArealPanel read_crimes_csv(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  const int c_unit = table.column("unit_id", path);
  const int c_year = table.column("year", path);
  const int c_count = table.column("count", path);

  std::vector<std::string> ids;
  std::unordered_map<std::string, int> unit_index;
  std::set<int> years;
  struct Cell {
    int unit;
    int year;
    long long count;
    int line;
  };
  std::vector<Cell> cells;
  cells.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const int line = table.line_numbers[r];
    const auto& id = row[c_unit];
    if (id.empty()) throw InputError(path.string() + ":" + std::to_string(line) + ": empty unit_id");
    auto [it, inserted] = unit_index.emplace(id, static_cast<int>(ids.size()));
    if (inserted) ids.push_back(id);
    const int year = static_cast<int>(csv::parse_int(row[c_year], path, line));
    const long long count = csv::parse_int(row[c_count], path, line);
    if (count < 0) {
      throw InputError(path.string() + ":" + std::to_string(line) + ": negative count");
    }
    years.insert(year);
    cells.push_back({it->second, year, count, line});
  }
  std::vector<int> periods(years.begin(), years.end());
  std::unordered_map<int, int> column;
  for (std::size_t k = 0; k < periods.size(); ++k) column.emplace(periods[k], static_cast<int>(k));

  CountMatrix counts = CountMatrix::Constant(static_cast<Eigen::Index>(ids.size()),
                                             static_cast<Eigen::Index>(periods.size()), -1);
  for (const auto& cell : cells) {
    auto& slot = counts(cell.unit, column.at(cell.year));
    if (slot >= 0) {
      throw InputError(path.string() + ":" + std::to_string(cell.line) + ": duplicate row for unit '" +
                       ids[cell.unit] + "' year " + std::to_string(cell.year));
    }
    slot = cell.count;
  }
  for (Eigen::Index i = 0; i < counts.rows(); ++i) {
    for (Eigen::Index k = 0; k < counts.cols(); ++k) {
      if (counts(i, k) < 0) {
        throw InputError(path.string() + ": missing row for unit '" + ids[i] + "' year " +
                         std::to_string(periods[k]) + " (zero counts must be explicit)");
      }
    }
  }
  return ArealPanel::from_counts(std::move(ids), std::move(periods), std::move(counts));
}

void write_crimes_csv(const std::filesystem::path& path, const ArealPanel& panel) {
  if (!panel.counts()) throw InputError("panel has no integer counts to write");
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "unit_id,year,count\n";
  const auto& counts = *panel.counts();
  for (int i = 0; i < panel.n(); ++i) {
    for (int k = 0; k < panel.periods_count(); ++k) {
      out << csv::escape(panel.unit_ids()[i]) << ',' << panel.periods()[k] << ',' << counts(i, k)
          << '\n';
    }
  }
}

CovariateMatrix read_covariates_csv(const std::filesystem::path& path, bool do_standardize) {
  const auto table = csv::read(path);
  const int c_unit = table.column("unit_id", path);
  std::vector<std::string> names;
  std::vector<int> cols;
  for (std::size_t k = 0; k < table.header.size(); ++k) {
    if (static_cast<int>(k) == c_unit) continue;
    names.push_back(table.header[k]);
    cols.push_back(static_cast<int>(k));
  }
  if (names.empty()) throw InputError(path.string() + ": no covariate columns");
  Eigen::MatrixXd values(static_cast<Eigen::Index>(table.rows.size()),
                         static_cast<Eigen::Index>(names.size()));
  std::vector<std::string> ids;
  std::set<std::string> seen;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (!seen.insert(row[c_unit]).second) {
      throw InputError(path.string() + ": duplicate unit_id '" + row[c_unit] + "'");
    }
    ids.push_back(row[c_unit]);
    for (std::size_t j = 0; j < cols.size(); ++j) {
      values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) =
          csv::parse_double(row[cols[j]], path, table.line_numbers[r]);
    }
  }
  if (do_standardize) return standardize(std::move(values), std::move(ids), std::move(names));
  CovariateMatrix out;
  out.means = Eigen::VectorXd::Zero(values.cols());
  out.scales = Eigen::VectorXd::Ones(values.cols());
  out.transform_log.assign(names.size(), false);
  out.transform_sqrt.assign(names.size(), false);
  out.Z = std::move(values);
  out.unit_ids = std::move(ids);
  out.names = std::move(names);
  return out;
}

void write_covariates_csv(const std::filesystem::path& path, const CovariateMatrix& covariates) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "unit_id";
  for (const auto& name : covariates.names) out << ',' << csv::escape(name);
  out << '\n';
  for (int i = 0; i < covariates.n(); ++i) {
    out << csv::escape(covariates.unit_ids[i]);
    for (int j = 0; j < covariates.d(); ++j) out << ',' << csv::format_double(covariates.Z(i, j));
    out << '\n';
  }
}

std::vector<RawUnitDemographics> read_covariates_raw_csv(
    const std::filesystem::path& path, const std::map<std::string, std::string>& ethnicity_map) {
  const auto table = csv::read(path);
  const int c_unit = table.column("unit_id", path);
  const int c_pop = table.column("pop_total", path);
  std::array<int, 5> c_eth{};
  for (std::size_t r = 0; r < kEthnicities.size(); ++r) c_eth[r] = table.column(kEthnicities[r], path);
  std::array<int, kPovertyBrackets> c_pov{};
  for (std::size_t j = 0; j < kPovertyBrackets; ++j) {
    c_pov[j] = table.column("pov" + std::to_string(j + 1), path);
  }
  const int c_income = table.column("income", path);
  const int c_total = table.column("area_total", path);
  const int c_vacant = table.column("area_vacant", path);
  const int c_comm = table.column("area_commercial", path);
  const int c_res = table.column("area_residential", path);

  // Extra eth_<label> columns fold into the five categories via the mapping.
  std::vector<std::pair<int, int>> extra;
  for (std::size_t k = 0; k < table.header.size(); ++k) {
    const auto& name = table.header[k];
    if (name.rfind("eth_", 0) != 0) continue;
    const auto label = name.substr(4);
    const auto it = ethnicity_map.find(label);
    if (it == ethnicity_map.end()) {
      throw InputError(path.string() + ": column '" + name +
                       "' needs an ethnicity mapping (--ethnicity-map)");
    }
    const auto target = std::find_if(kEthnicities.begin(), kEthnicities.end(),
                                      [&](const char* e) { return it->second == e; });
    if (target == kEthnicities.end()) {
      throw InputError("ethnicity mapping for '" + label + "' names unknown category '" +
                       it->second + "'");
    }
    extra.emplace_back(static_cast<int>(k), static_cast<int>(target - kEthnicities.begin()));
  }

  std::vector<RawUnitDemographics> units;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const int line = table.line_numbers[r];
    auto number = [&](int c) -> std::optional<double> {
      if (row[c].empty() || row[c] == "NA") return std::nullopt;
      return csv::parse_double(row[c], path, line);
    };
    auto required = [&](int c) {
      const auto v = number(c);
      return v.value_or(0.0);
    };
    RawUnitDemographics unit;
    unit.unit_id = row[c_unit];
    unit.pop_total = static_cast<std::int64_t>(required(c_pop));
    for (std::size_t e = 0; e < 5; ++e) unit.ethnic_counts[e] = required(c_eth[e]);
    for (const auto& [col, target] : extra) unit.ethnic_counts[target] += required(col);
    std::array<double, kPovertyBrackets> pov{};
    bool pov_ok = true;
    for (std::size_t j = 0; j < kPovertyBrackets; ++j) {
      const auto v = number(c_pov[j]);
      if (!v) {
        pov_ok = false;
        break;
      }
      pov[j] = *v;
    }
    if (pov_ok) unit.poverty_bracket_props = pov;
    unit.income_per_capita = number(c_income);
    unit.land.total = required(c_total);
    unit.land.vacant = required(c_vacant);
    unit.land.commercial = required(c_comm);
    unit.land.residential = required(c_res);
    units.push_back(std::move(unit));
  }
  return units;
}

std::map<std::string, std::string> read_ethnicity_map(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  const int c_label = table.column("label", path);
  const int c_cat = table.column("category", path);
  std::map<std::string, std::string> mapping;
  for (const auto& row : table.rows) mapping[row[c_label]] = row[c_cat];
  return mapping;
}

std::vector<std::string> read_id_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    const auto start = line.find_first_not_of(' ');
    if (start == std::string::npos || line[start] == '#') continue;
    ids.push_back(line.substr(start));
  }
  return ids;
}

}  // namespace areltrend
