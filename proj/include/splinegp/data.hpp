#pragma once

// Ingestion of cumulative age-band reports, differencing into weekly deaths
// with censoring classification, calibration totals, vaccination rates and
// the resurgence-start detector. All week indices are 1-based.

#include <chrono>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "splinegp/likelihoods.hpp"

namespace splinegp::data {

using Date = std::chrono::sys_days;

/// Parses YYYY-MM-DD; throws DataError on anything else.
Date parse_date(const std::string& text);
std::string format_date(Date d);
bool is_saturday(Date d);

enum class ReportKind { Observed, Censored, Missing };

struct CumulativeValue {
  ReportKind kind = ReportKind::Observed;
  std::int64_t value = 0;

  static CumulativeValue observed(std::int64_t v) { return {ReportKind::Observed, v}; }
  static CumulativeValue censored() { return {ReportKind::Censored, 0}; }
  static CumulativeValue missing() { return {ReportKind::Missing, 0}; }
};

/// Cumulative counts of one (state, band) over weeks 1..W^cum.
struct CumulativeReport {
  std::string state;
  std::string band;
  std::vector<Date> weeks;
  std::vector<CumulativeValue> values;
};

struct CensoredBlock {
  likelihoods::CensoredSumBound bound;
  std::vector<int> weeks;  // the non-retrievable weekly indices, ascending
};

/// Weekly deaths of one band over weeks 1..W, W = W^cum - 1.
struct CensoredSeries {
  std::string band;
  int weeks = 0;
  std::vector<std::pair<int, std::int64_t>> retrievable;
  std::optional<CensoredBlock> block;
  std::vector<int> missing_weeks;
  std::vector<std::string> warnings;
};

/// Differences cumulative counts into weekly deaths and classifies the
/// censored block. A missing report adjacent to censored weeks is merged into
/// the block with a warning; otherwise the two weekly differences touching it
/// are dropped. Throws DataError for decreasing or infeasible cumulatives,
/// observed values in 1..9, more than one censored block, or a missing first
/// or last report.
CensoredSeries difference_weekly(std::span<const CumulativeValue> values, const std::string& band = "");
CensoredSeries difference_weekly(const CumulativeReport& report);

/// Slope of the no-intercept least-squares fit of T_w on |T_w - T_{w-1}|.
double estimate_eta(std::span<const double> totals);

/// Sum of retrievable deaths per week across bands.
std::vector<double> retrievable_totals(std::span<const CensoredSeries> series, int weeks);

/// First week w >= search_from whose 4-week central moving average (window
/// w-2..w+1, truncated at the edges) is exceeded by the next week's average.
std::optional<int> resurgence_start(std::span<const double> deaths, int search_from);

/// All-age calibration deaths keyed by week-start date.
using CalibrationTable = std::map<std::string, std::map<Date, std::int64_t>>;

/// Reindexes one state's calibration totals onto the model weeks.
std::vector<std::int64_t> align_calibration(const std::map<Date, std::int64_t>& totals,
                                            std::span<const Date> model_weeks);

struct StateReports {
  std::vector<Date> weeks;                  // consecutive Saturdays
  std::vector<CumulativeReport> reports;    // one per band, in file order of first appearance
};

enum class AgeClass { Adults18to64 = 0, Seniors65plus = 1 };
std::string age_class_name(AgeClass c);
AgeClass parse_age_class(const std::string& text);

struct VaccinationSeries {
  std::string state;
  AgeClass age_class = AgeClass::Adults18to64;
  std::vector<Date> weeks;
  std::vector<double> rates;

  /// Rate at the latest week on or before `day`; throws DataError if none.
  double rate_on_or_before(Date day) const;
};

/// state,week_start_date,age_band,cum_deaths; an empty count is censored and
/// an absent (state, week, band) row is a missing report.
std::map<std::string, StateReports> load_cdc_csv(std::istream& in);
std::map<std::string, StateReports> load_cdc_csv(const std::string& path);

/// state,week_start_date,deaths
CalibrationTable load_calibration_csv(std::istream& in);
CalibrationTable load_calibration_csv(const std::string& path);

/// state,week_start_date,age_class,rate with age_class in {18-64, 65+}.
std::vector<VaccinationSeries> load_vaccination_csv(std::istream& in);
std::vector<VaccinationSeries> load_vaccination_csv(const std::string& path);

/// Splits one CSV line on commas; quoting is not part of any schema here.
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace splinegp::data
