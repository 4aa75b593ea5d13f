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

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace areltrend {

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

// Centered inverse hyperbolic sine: log(c + sqrt(c^2 + 1)) - log 2.
double ihs(double c);
inline double ihs(std::int64_t c) { return ihs(static_cast<double>(c)); }

// Inverse of ihs on the real line.
double ihs_inverse(double y);

// Counts c_it and transformed responses y_it for n units over T periods.
//
// Columns are periods in increasing label order; column k has time code
// t = k + 1. A panel built from counts always satisfies y = ihs(counts). A
// panel built from real-valued responses (synthetic exact data) has no counts.
class ArealPanel {
 public:
  ArealPanel() = default;

  static ArealPanel from_counts(std::vector<std::string> unit_ids, std::vector<int> periods,
                                CountMatrix counts);
  static ArealPanel from_responses(std::vector<std::string> unit_ids, std::vector<int> periods,
                                   Eigen::MatrixXd y);

  int n() const { return static_cast<int>(unit_ids_.size()); }
  int periods_count() const { return static_cast<int>(periods_.size()); }

  const std::vector<std::string>& unit_ids() const { return unit_ids_; }
  const std::vector<int>& periods() const { return periods_; }
  const Eigen::MatrixXd& y() const { return y_; }
  const std::optional<CountMatrix>& counts() const { return counts_; }

  // Time code for a period column.
  static int t_index(int column) { return column + 1; }

  // Column index of a period label; throws InputError if absent.
  int column_of(int period) const;
  std::optional<int> find_unit(const std::string& id) const;

  // Panel restricted to the given units, in the given order.
  ArealPanel select_units(std::span<const std::string> ids) const;

 private:
  void validate() const;

  std::vector<std::string> unit_ids_;
  std::vector<int> periods_;
  std::optional<CountMatrix> counts_;
  Eigen::MatrixXd y_;
};

// The five ethnicity categories used by the segregation measure.
inline constexpr std::array<const char*, 5> kEthnicities = {"white", "black", "hispanic", "asian",
                                                            "other"};
inline constexpr std::size_t kPovertyBrackets = 7;

struct LandUseAreas {
  double total = 0.0;
  double vacant = 0.0;
  double commercial = 0.0;
  double residential = 0.0;
};

struct RawUnitDemographics {
  std::string unit_id;
  std::int64_t pop_total = 0;
  std::array<double, 5> ethnic_counts{};
  // Missing when the census table has no households for the unit.
  std::optional<std::array<double, kPovertyBrackets>> poverty_bracket_props;
  std::optional<double> income_per_capita;
  LandUseAreas land;
};

// 1/2 sum_r |p_ir - pbar_r|, in [0, 1].
double segregation(std::span<const double> unit_props, std::span<const double> city_props);

// Weighted poverty bracket sum with weights 1, 5/6, ..., 1/6, 0.
double poverty_index(std::span<const double> bracket_props);

struct LandUseRatios {
  std::optional<double> vacancy;
  std::optional<double> comresprop;
};

LandUseRatios landuse_ratios(const LandUseAreas& areas);

struct CovariateMatrix {
  Eigen::MatrixXd Z;  // n x d
  std::vector<std::string> unit_ids;
  std::vector<std::string> names;
  std::vector<bool> transform_log;
  std::vector<bool> transform_sqrt;
  bool standardized = false;
  Eigen::VectorXd means;
  Eigen::VectorXd scales;

  int n() const { return static_cast<int>(Z.rows()); }
  int d() const { return static_cast<int>(Z.cols()); }

  // Values before standardization (transformed scale).
  Eigen::MatrixXd destandardize() const;
  CovariateMatrix select_units(std::span<const std::string> ids) const;
};

// Z-scores every column with the sample (n - 1) standard deviation.
// Throws InputError naming the column when it has zero spread.
CovariateMatrix standardize(Eigen::MatrixXd values, std::vector<std::string> unit_ids,
                            std::vector<std::string> names);

struct CovariateOptions {
  bool standardize = true;
};

// pop_total, segregation, log income, sqrt poverty, sqrt vacancy, sqrt comresprop.
CovariateMatrix build_covariates(std::span<const RawUnitDemographics> raw,
                                 const CovariateOptions& options = {});

struct ExclusionResult {
  ArealPanel panel;
  std::vector<RawUnitDemographics> raw;
  std::vector<std::string> excluded_ids;  // missing-data exclusions first, then listed ones
};

// Drops units with missing economic or land-use covariates and every listed ID.
ExclusionResult apply_exclusions(const ArealPanel& panel, std::span<const RawUnitDemographics> raw,
                                 std::span<const std::string> listed_ids);

// Drops the listed units from a panel with precomputed covariates.
ArealPanel exclude_units(const ArealPanel& panel, std::span<const std::string> listed_ids);

bool has_missing_covariates(const RawUnitDemographics& unit);

// ---- file formats --------------------------------------------------------

// crimes.csv: unit_id,year,count. Every unit-year must appear exactly once.
ArealPanel read_crimes_csv(const std::filesystem::path& path);
void write_crimes_csv(const std::filesystem::path& path, const ArealPanel& panel);

// covariates.csv: unit_id,<name>... (precomputed, transformed values).
CovariateMatrix read_covariates_csv(const std::filesystem::path& path, bool standardize = true);
void write_covariates_csv(const std::filesystem::path& path, const CovariateMatrix& covariates);

// covariates_raw.csv columns:
//   unit_id,pop_total,white,black,hispanic,asian,other,pov1..pov7,income,
//   area_total,area_vacant,area_commercial,area_residential
// Extra ethnicity columns named eth_<label> require a mapping from each label
// to one of the five categories. Empty cells are missing values.
std::vector<RawUnitDemographics> read_covariates_raw_csv(
    const std::filesystem::path& path, const std::map<std::string, std::string>& ethnicity_map = {});

// label,category lines.
std::map<std::string, std::string> read_ethnicity_map(const std::filesystem::path& path);

// One unit_id per line; blank lines and '#' comments ignored.
std::vector<std::string> read_id_list(const std::filesystem::path& path);

}  // namespace areltrend
