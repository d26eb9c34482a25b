#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "densitycp/density_estimation.hpp"

namespace densitycp {

using Date = std::chrono::year_month_day;

inline constexpr std::array<std::string_view, 6> kContinents = {
    "North America", "South America", "Europe", "Asia", "Oceania", "Africa"};

bool is_known_continent(std::string_view name);

/// Parses m/d/yy (two-digit years are 20yy) or m/d/yyyy.
std::optional<Date> parse_us_date(std::string_view text);
std::string format_iso_date(Date date);

struct CountryRecord {
  std::string name;
  std::string continent;
  std::vector<Date> dates;
  std::vector<std::int64_t> cumulative_confirmed;
  std::vector<std::int64_t> cumulative_deaths;
};

struct Exclusion {
  std::string country;
  std::string reason;
};

/// One wide time-series file aggregated to country level.
struct WideSeries {
  std::vector<Date> dates;
  std::map<std::string, std::vector<std::int64_t>> by_country;
};

/// Reads the province/country/lat/long/date... layout, summing province
/// rows per country. Throws IngestError with the offending line number.
WideSeries parse_wide_csv(std::istream& in, std::string_view source = "<input>");

/// Reads `country,continent`. Unknown continent labels are an IngestError.
std::map<std::string, std::string> parse_continent_map(std::istream& in, std::string_view source = "<input>");

struct CaseData {
  std::vector<CountryRecord> records;  // sorted by name, already cleaned
  std::vector<Exclusion> excluded;
};

/// Joins the two series and the continent map. Countries missing from
/// either file or from the map are excluded with a warning. Throws
/// IngestError if the files share no country, their date columns differ,
/// or nothing survives the join.
CaseData join_cases(const WideSeries& confirmed, const WideSeries& deaths,
                    const std::map<std::string, std::string>& continents);

CaseData load_cases(const std::filesystem::path& confirmed_file, const std::filesystem::path& deaths_file,
                    const std::filesystem::path& continent_map_file);

std::vector<std::int64_t> running_maximum(std::span<const std::int64_t> series);

/// Running maximum on both series (negatives become 0), then deaths capped
/// at confirmed. Idempotent.
void clean_cumulative(CountryRecord& record);

/// deaths / confirmed per date; 0 where confirmed is 0.
std::vector<double> compute_mortality(const CountryRecord& record);

struct PanelCountry {
  std::string name;
  std::string continent;
  std::optional<Date> origin;
};

/// Countries x days matrix of mortality rates on the aligned time scale.
/// Day j (1-based) of a country is its origin date plus j - 1 days. Missing
/// cells (only possible with a relaxed completeness filter) hold NaN.
struct AlignedPanel {
  std::vector<PanelCountry> countries;
  std::size_t window = 0;
  std::vector<double> rates;  // row-major, countries.size() x window
  /// Aligned cumulative counts, same shape as `rates`; empty when the panel
  /// was read from a rate-only file.
  std::vector<double> deaths;
  std::vector<double> confirmed;
  std::vector<Exclusion> excluded;

  std::size_t country_count() const { return countries.size(); }
  double rate(std::size_t country, std::size_t day) const { return rates[country * window + day - 1]; }
  bool has_counts() const { return !deaths.empty() && deaths.size() == rates.size(); }

  /// [0, padding x largest rate]; [0, 1] when every rate is zero.
  SupportInterval data_support(double padding = 1.05) const;
};

struct AlignOptions {
  std::int64_t threshold = 30;
  std::size_t window = 150;
  /// Days required at or after the origin; defaults to the full window.
  std::optional<std::size_t> min_days;
};

/// Throws IngestError if no country survives, ParameterError for a zero
/// window or min_days outside [1, window].
AlignedPanel align_origin(std::span<const CountryRecord> records, const AlignOptions& options = {});

/// Rates on one aligned day (1-based); missing cells are skipped.
RawSample daily_cross_section(const AlignedPanel& panel, std::size_t day, std::optional<SupportInterval> support = {});

enum class PercentileRule {
  /// Order statistic at ceil(p n / 100).
  OrderStatistic,
  /// Linear interpolation between order statistics (type 7).
  Linear,
};

double empirical_percentile(std::span<const double> sorted, double percent, PercentileRule rule);

enum class Stage { Before, After };
std::string to_string(Stage stage);

inline constexpr std::array<int, 4> kDefaultPercentiles = {5, 10, 90, 95};

struct QuantileTableRow {
  std::string continent;
  Stage stage;
  int percentile;
  double proportion;
};

/// Percentiles below 50 select the lower tail (strictly below the
/// threshold); the rest select the upper tail (strictly above). For each day
/// the continent shares of the tail are averaged over days 1..split_day and
/// split_day+1..window. Rows follow kContinents order, then any other labels
/// present, then stage, then percentile.
std::vector<QuantileTableRow> continent_quantile_table(const AlignedPanel& panel, std::size_t split_day,
                                                       std::span<const int> percentiles = kDefaultPercentiles,
                                                       PercentileRule rule = PercentileRule::OrderStatistic);
/// Continent labels in table order: the six known ones, then others in
/// order of first appearance.
std::vector<std::string> continent_order(const AlignedPanel& panel);

struct ContinentSeries {
  std::string continent;
  std::size_t countries;
  std::vector<double> rates;  // total deaths / total confirmed per aligned day
};

/// Needs aligned counts; throws ParameterError otherwise.
std::vector<ContinentSeries> continent_series(const AlignedPanel& panel);

// Panel files: country,continent,day_1..day_W with one row per country.
void write_panel_csv(std::ostream& out, const AlignedPanel& panel, std::span<const double> cells);
AlignedPanel read_panel_csv(std::istream& in, std::string_view source = "<panel>");
/// Reads a count matrix in the same layout and checks it matches `panel`.
std::vector<double> read_count_csv(std::istream& in, const AlignedPanel& panel, std::string_view source = "<counts>");

/// Table layout: continent,countries,5_before,5_after,10_before,...
void write_quantile_table_csv(std::ostream& out, const AlignedPanel& panel,
                              std::span<const QuantileTableRow> rows);

} // namespace densitycp
