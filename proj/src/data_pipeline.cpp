#include "densitycp/data_pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "densitycp/csv.hpp"
#include "densitycp/errors.hpp"
#include "densitycp/log.hpp"

namespace densitycp {

namespace {

constexpr std::size_t kLeadingColumns = 4;  // province, country, lat, long

std::string location(std::string_view source, std::size_t line_no) {
  return std::string(source) + ":" + std::to_string(line_no);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

std::int64_t parse_count(std::string_view text, std::string_view source, std::size_t line_no) {
  const std::string field = trim(text);
  if (field.empty()) return 0;
  std::int64_t value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec == std::errc() && ptr == field.data() + field.size()) return value;
  // Some snapshots write counts as "12.0".
  double real = 0.0;
  const auto [rptr, rec] = std::from_chars(field.data(), field.data() + field.size(), real);
  if (rec == std::errc() && rptr == field.data() + field.size() && std::floor(real) == real) {
    return static_cast<std::int64_t>(real);
  }
  throw IngestError(location(source, line_no) + ": malformed count '" + field + "'");
}

double parse_cell(std::string_view text, std::string_view source, std::size_t line_no) {
  const std::string field = trim(text);
  if (field.empty()) return std::numeric_limits<double>::quiet_NaN();
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw IngestError(location(source, line_no) + ": malformed number '" + field + "'");
  }
  return value;
}

std::string reason_with_origin(std::string_view what, const std::optional<Date>& origin) {
  std::string out(what);
  if (origin) out += " (origin " + format_iso_date(*origin) + ")";
  return out;
}

// Header and rows for country,continent,day_1..day_W files.
struct MatrixFile {
  std::vector<PanelCountry> countries;
  std::size_t window = 0;
  std::vector<double> cells;
};

MatrixFile read_matrix(std::istream& in, std::string_view source) {
  std::size_t line_no = 0;
  const auto header = csv::next_line(in, line_no);
  if (!header) throw IngestError(std::string(source) + ": empty panel file");
  const auto columns = csv::split_line(*header, source, line_no);
  if (columns.size() < 3 || trim(columns[0]) != "country" || trim(columns[1]) != "continent") {
    throw IngestError(location(source, line_no) + ": expected header country,continent,day_1,...");
  }
  MatrixFile out;
  out.window = columns.size() - 2;
  while (const auto line = csv::next_line(in, line_no)) {
    const auto fields = csv::split_line(*line, source, line_no);
    if (fields.size() != columns.size()) {
      throw IngestError(location(source, line_no) + ": expected " + std::to_string(columns.size()) +
                        " fields, found " + std::to_string(fields.size()));
    }
    out.countries.push_back({fields[0], fields[1], std::nullopt});
    for (std::size_t j = 2; j < fields.size(); ++j) out.cells.push_back(parse_cell(fields[j], source, line_no));
  }
  if (out.countries.empty()) throw IngestError(std::string(source) + ": panel has no rows");
  return out;
}

} // namespace

bool is_known_continent(std::string_view name) {
  return std::ranges::find(kContinents, name) != kContinents.end();
}

std::optional<Date> parse_us_date(std::string_view text) {
  int parts[3] = {0, 0, 0};
  std::size_t part = 0;
  const char* p = text.data();
  const char* end = text.data() + text.size();
  while (part < 3) {
    const auto [next, ec] = std::from_chars(p, end, parts[part]);
    if (ec != std::errc()) return std::nullopt;
    ++part;
    p = next;
    if (part < 3) {
      if (p == end || *p != '/') return std::nullopt;
      ++p;
    }
  }
  if (p != end) return std::nullopt;
  int year = parts[2];
  if (year < 100) year += 2000;
  const Date date{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(parts[0])},
                  std::chrono::day{static_cast<unsigned>(parts[1])}};
  if (!date.ok()) return std::nullopt;
  return date;
}

std::string format_iso_date(Date date) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(date.year()),
                static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
  return buf;
}

WideSeries parse_wide_csv(std::istream& in, std::string_view source) {
  std::size_t line_no = 0;
  const auto header = csv::next_line(in, line_no);
  if (!header) throw IngestError(std::string(source) + ": empty file");
  const auto columns = csv::split_line(*header, source, line_no);
  if (columns.size() <= kLeadingColumns) {
    throw IngestError(location(source, line_no) + ": header has no date columns");
  }
  WideSeries out;
  for (std::size_t c = kLeadingColumns; c < columns.size(); ++c) {
    const auto date = parse_us_date(trim(columns[c]));
    if (!date) throw IngestError(location(source, line_no) + ": bad date column '" + columns[c] + "'");
    if (!out.dates.empty() &&
        std::chrono::sys_days(*date) != std::chrono::sys_days(out.dates.back()) + std::chrono::days{1}) {
      throw IngestError(location(source, line_no) + ": date columns are not consecutive days at '" +
                        columns[c] + "'");
    }
    out.dates.push_back(*date);
  }

  while (const auto line = csv::next_line(in, line_no)) {
    const auto fields = csv::split_line(*line, source, line_no);
    if (fields.size() != columns.size()) {
      throw IngestError(location(source, line_no) + ": expected " + std::to_string(columns.size()) +
                        " fields, found " + std::to_string(fields.size()));
    }
    const std::string country = trim(fields[1]);
    if (country.empty()) throw IngestError(location(source, line_no) + ": empty country/region");
    auto [it, inserted] = out.by_country.try_emplace(country, out.dates.size(), 0);
    auto& totals = it->second;
    for (std::size_t c = kLeadingColumns; c < fields.size(); ++c) {
      totals[c - kLeadingColumns] += parse_count(fields[c], source, line_no);
    }
  }
  return out;
}

std::map<std::string, std::string> parse_continent_map(std::istream& in, std::string_view source) {
  std::size_t line_no = 0;
  std::map<std::string, std::string> out;
  const auto header = csv::next_line(in, line_no);
  if (!header) return out;
  const auto columns = csv::split_line(*header, source, line_no);
  if (columns.size() != 2 || trim(columns[0]) != "country" || trim(columns[1]) != "continent") {
    throw IngestError(location(source, line_no) + ": expected header country,continent");
  }
  while (const auto line = csv::next_line(in, line_no)) {
    const auto fields = csv::split_line(*line, source, line_no);
    if (fields.size() != 2) {
      throw IngestError(location(source, line_no) + ": expected 2 fields, found " + std::to_string(fields.size()));
    }
    const std::string continent = trim(fields[1]);
    if (!is_known_continent(continent)) {
      throw IngestError(location(source, line_no) + ": unknown continent '" + continent + "'");
    }
    out[trim(fields[0])] = continent;
  }
  return out;
}

std::vector<std::int64_t> running_maximum(std::span<const std::int64_t> series) {
  std::vector<std::int64_t> out(series.size());
  std::int64_t best = 0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    best = std::max(best, series[i]);
    out[i] = best;
  }
  return out;
}

void clean_cumulative(CountryRecord& record) {
  record.cumulative_confirmed = running_maximum(record.cumulative_confirmed);
  record.cumulative_deaths = running_maximum(record.cumulative_deaths);
  for (std::size_t i = 0; i < record.cumulative_deaths.size(); ++i) {
    record.cumulative_deaths[i] = std::min(record.cumulative_deaths[i], record.cumulative_confirmed[i]);
  }
}

CaseData join_cases(const WideSeries& confirmed, const WideSeries& deaths,
                    const std::map<std::string, std::string>& continents) {
  if (confirmed.dates != deaths.dates) throw IngestError("confirmed and death files have different date columns");
  CaseData out;
  bool shared = false;
  for (const auto& [country, counts] : confirmed.by_country) {
    const auto d = deaths.by_country.find(country);
    if (d == deaths.by_country.end()) {
      out.excluded.push_back({country, "missing from deaths file"});
      continue;
    }
    shared = true;
    const auto c = continents.find(country);
    if (c == continents.end()) {
      out.excluded.push_back({country, "no continent mapping"});
      continue;
    }
    CountryRecord record{country, c->second, confirmed.dates, counts, d->second};
    clean_cumulative(record);
    out.records.push_back(std::move(record));
  }
  for (const auto& [country, counts] : deaths.by_country) {
    if (!confirmed.by_country.contains(country)) out.excluded.push_back({country, "missing from confirmed file"});
  }
  if (!shared) throw IngestError("confirmed and death files share no country");
  for (const auto& e : out.excluded) log::warn("excluding " + e.country + ": " + e.reason);
  if (out.records.empty()) throw IngestError("no country has a continent mapping");
  return out;
}

CaseData load_cases(const std::filesystem::path& confirmed_file, const std::filesystem::path& deaths_file,
                    const std::filesystem::path& continent_map_file) {
  auto open = [](const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open " + path.string());
    return in;
  };
  auto confirmed_in = open(confirmed_file);
  auto deaths_in = open(deaths_file);
  auto map_in = open(continent_map_file);
  const WideSeries confirmed = parse_wide_csv(confirmed_in, confirmed_file.string());
  const WideSeries deaths = parse_wide_csv(deaths_in, deaths_file.string());
  const auto continents = parse_continent_map(map_in, continent_map_file.string());
  return join_cases(confirmed, deaths, continents);
}

std::vector<double> compute_mortality(const CountryRecord& record) {
  std::vector<double> out(record.cumulative_deaths.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto c = record.cumulative_confirmed[i];
    out[i] = c > 0 ? static_cast<double>(record.cumulative_deaths[i]) / static_cast<double>(c) : 0.0;
  }
  return out;
}

SupportInterval AlignedPanel::data_support(double padding) const {
  double top = 0.0;
  for (double r : rates) {
    if (!std::isnan(r)) top = std::max(top, r);
  }
  return top > 0.0 ? SupportInterval(0.0, padding * top) : SupportInterval(0.0, 1.0);
}

AlignedPanel align_origin(std::span<const CountryRecord> records, const AlignOptions& options) {
  const std::size_t window = options.window;
  if (window == 0) throw ParameterError("window must be positive");
  const std::size_t min_days = options.min_days.value_or(window);
  if (min_days < 1 || min_days > window) throw ParameterError("min-days must lie in [1, window]");

  AlignedPanel panel;
  panel.window = window;
  constexpr double missing = std::numeric_limits<double>::quiet_NaN();
  for (const auto& record : records) {
    const auto& deaths = record.cumulative_deaths;
    const auto hit = std::ranges::find_if(deaths, [&](std::int64_t d) { return d >= options.threshold; });
    if (hit == deaths.end()) {
      panel.excluded.push_back({record.name, "never reached " + std::to_string(options.threshold) + " deaths"});
      continue;
    }
    const auto origin = static_cast<std::size_t>(hit - deaths.begin());
    const std::size_t available = deaths.size() - origin;
    const Date origin_date = record.dates[origin];
    if (available < min_days) {
      panel.excluded.push_back(
          {record.name, reason_with_origin("only " + std::to_string(available) + " days after origin", origin_date)});
      continue;
    }
    const auto rates = compute_mortality(record);
    panel.countries.push_back({record.name, record.continent, origin_date});
    for (std::size_t j = 0; j < window; ++j) {
      const std::size_t t = origin + j;
      const bool present = t < deaths.size();
      panel.rates.push_back(present ? rates[t] : missing);
      panel.deaths.push_back(present ? static_cast<double>(deaths[t]) : missing);
      panel.confirmed.push_back(present ? static_cast<double>(record.cumulative_confirmed[t]) : missing);
    }
  }
  for (const auto& e : panel.excluded) log::warn("excluding " + e.country + ": " + e.reason);
  if (panel.countries.empty()) throw IngestError("no country passes the origin and window filters");
  return panel;
}

RawSample daily_cross_section(const AlignedPanel& panel, std::size_t day, std::optional<SupportInterval> support) {
  if (day < 1 || day > panel.window) {
    throw ParameterError("day " + std::to_string(day) + " outside [1, " + std::to_string(panel.window) + "]");
  }
  std::vector<double> values;
  values.reserve(panel.country_count());
  for (std::size_t i = 0; i < panel.country_count(); ++i) {
    const double r = panel.rate(i, day);
    if (!std::isnan(r)) values.push_back(r);
  }
  return RawSample(std::move(values), support.value_or(panel.data_support()));
}

double empirical_percentile(std::span<const double> sorted, double percent, PercentileRule rule) {
  if (sorted.empty()) throw ParameterError("percentile of an empty sample");
  if (!(percent >= 0.0 && percent <= 100.0)) throw ParameterError("percentile outside [0, 100]");
  const auto n = static_cast<double>(sorted.size());
  if (rule == PercentileRule::OrderStatistic) {
    const double rank = std::ceil(percent * n / 100.0 - 1e-9);
    const auto idx = static_cast<std::size_t>(std::clamp(rank, 1.0, n));
    return sorted[idx - 1];
  }
  const double pos = percent / 100.0 * (n - 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::string to_string(Stage stage) { return stage == Stage::Before ? "before" : "after"; }

std::vector<std::string> continent_order(const AlignedPanel& panel) {
  std::vector<std::string> order(kContinents.begin(), kContinents.end());
  for (const auto& c : panel.countries) {
    if (std::ranges::find(order, c.continent) == order.end()) order.push_back(c.continent);
  }
  return order;
}

std::vector<QuantileTableRow> continent_quantile_table(const AlignedPanel& panel, std::size_t split_day,
                                                       std::span<const int> percentiles, PercentileRule rule) {
  if (split_day < 1 || split_day >= panel.window) {
    throw ParameterError("split day " + std::to_string(split_day) + " outside [1, " +
                         std::to_string(panel.window - 1) + "]");
  }
  const auto order = continent_order(panel);
  std::vector<std::size_t> continent_of(panel.country_count());
  for (std::size_t i = 0; i < panel.country_count(); ++i) {
    continent_of[i] = static_cast<std::size_t>(std::ranges::find(order, panel.countries[i].continent) - order.begin());
  }

  // sums[stage][percentile][continent]
  std::vector<std::vector<std::vector<double>>> sums(
      2, std::vector<std::vector<double>>(percentiles.size(), std::vector<double>(order.size(), 0.0)));
  for (std::size_t day = 1; day <= panel.window; ++day) {
    const std::size_t stage = day <= split_day ? 0 : 1;
    std::vector<double> sorted;
    for (std::size_t i = 0; i < panel.country_count(); ++i) {
      if (!std::isnan(panel.rate(i, day))) sorted.push_back(panel.rate(i, day));
    }
    if (sorted.empty()) {
      log::warn("day " + std::to_string(day) + " has no observed rates");
      continue;
    }
    std::ranges::sort(sorted);
    for (std::size_t p = 0; p < percentiles.size(); ++p) {
      const double threshold = empirical_percentile(sorted, percentiles[p], rule);
      const bool lower = percentiles[p] < 50;
      std::vector<double> counts(order.size(), 0.0);
      double tail = 0.0;
      for (std::size_t i = 0; i < panel.country_count(); ++i) {
        const double r = panel.rate(i, day);
        if (std::isnan(r)) continue;
        if (lower ? r < threshold : r > threshold) {
          counts[continent_of[i]] += 1.0;
          tail += 1.0;
        }
      }
      if (tail == 0.0) {
        log::warn("day " + std::to_string(day) + ": empty tail at percentile " + std::to_string(percentiles[p]));
        continue;
      }
      for (std::size_t c = 0; c < order.size(); ++c) sums[stage][p][c] += counts[c] / tail;
    }
  }

  const double days[2] = {static_cast<double>(split_day), static_cast<double>(panel.window - split_day)};
  std::vector<QuantileTableRow> rows;
  for (std::size_t c = 0; c < order.size(); ++c) {
    for (std::size_t stage = 0; stage < 2; ++stage) {
      for (std::size_t p = 0; p < percentiles.size(); ++p) {
        rows.push_back({order[c], stage == 0 ? Stage::Before : Stage::After, percentiles[p],
                        sums[stage][p][c] / days[stage]});
      }
    }
  }
  return rows;
}

std::vector<ContinentSeries> continent_series(const AlignedPanel& panel) {
  if (!panel.has_counts()) throw ParameterError("continent series need aligned death and confirmed counts");
  std::vector<ContinentSeries> out;
  for (const auto& continent : continent_order(panel)) {
    ContinentSeries series{continent, 0, std::vector<double>(panel.window, 0.0)};
    std::vector<double> deaths(panel.window, 0.0);
    std::vector<double> confirmed(panel.window, 0.0);
    for (std::size_t i = 0; i < panel.country_count(); ++i) {
      if (panel.countries[i].continent != continent) continue;
      ++series.countries;
      for (std::size_t j = 0; j < panel.window; ++j) {
        const double d = panel.deaths[i * panel.window + j];
        const double c = panel.confirmed[i * panel.window + j];
        if (std::isnan(d) || std::isnan(c)) continue;
        deaths[j] += d;
        confirmed[j] += c;
      }
    }
    if (series.countries == 0) continue;
    for (std::size_t j = 0; j < panel.window; ++j) {
      series.rates[j] = confirmed[j] > 0.0 ? deaths[j] / confirmed[j] : 0.0;
    }
    out.push_back(std::move(series));
  }
  return out;
}

void write_panel_csv(std::ostream& out, const AlignedPanel& panel, std::span<const double> cells) {
  if (cells.size() != panel.country_count() * panel.window) throw ParameterError("cell count does not match panel");
  std::vector<std::string> row{"country", "continent"};
  for (std::size_t j = 1; j <= panel.window; ++j) row.push_back("day_" + std::to_string(j));
  csv::write_row(out, row);
  for (std::size_t i = 0; i < panel.country_count(); ++i) {
    row.assign({panel.countries[i].name, panel.countries[i].continent});
    for (std::size_t j = 0; j < panel.window; ++j) row.push_back(csv::format_double(cells[i * panel.window + j]));
    csv::write_row(out, row);
  }
}

AlignedPanel read_panel_csv(std::istream& in, std::string_view source) {
  MatrixFile file = read_matrix(in, source);
  AlignedPanel panel;
  panel.countries = std::move(file.countries);
  panel.window = file.window;
  panel.rates = std::move(file.cells);
  for (double r : panel.rates) {
    if (!std::isnan(r) && !(r >= 0.0 && r <= 1.0)) {
      std::ostringstream msg;
      msg << source << ": rate " << r << " outside [0, 1]";
      throw IngestError(msg.str());
    }
  }
  return panel;
}

std::vector<double> read_count_csv(std::istream& in, const AlignedPanel& panel, std::string_view source) {
  MatrixFile file = read_matrix(in, source);
  if (file.window != panel.window || file.countries.size() != panel.country_count()) {
    throw IngestError(std::string(source) + ": count matrix shape does not match the panel");
  }
  for (std::size_t i = 0; i < file.countries.size(); ++i) {
    if (file.countries[i].name != panel.countries[i].name) {
      throw IngestError(std::string(source) + ": row " + std::to_string(i + 1) + " is '" + file.countries[i].name +
                        "', panel has '" + panel.countries[i].name + "'");
    }
  }
  return std::move(file.cells);
}

void write_quantile_table_csv(std::ostream& out, const AlignedPanel& panel, std::span<const QuantileTableRow> rows) {
  std::vector<int> percentiles;
  for (const auto& r : rows) {
    if (std::ranges::find(percentiles, r.percentile) == percentiles.end()) percentiles.push_back(r.percentile);
  }
  std::vector<std::string> header{"continent", "countries"};
  for (int p : percentiles) {
    header.push_back(std::to_string(p) + "_before");
    header.push_back(std::to_string(p) + "_after");
  }
  csv::write_row(out, header);
  for (const auto& continent : continent_order(panel)) {
    const auto members = std::ranges::count_if(panel.countries, [&](const PanelCountry& c) { return c.continent == continent; });
    std::vector<std::string> row{continent, std::to_string(members)};
    for (int p : percentiles) {
      for (Stage stage : {Stage::Before, Stage::After}) {
        const auto it = std::ranges::find_if(rows, [&](const QuantileTableRow& r) {
          return r.continent == continent && r.stage == stage && r.percentile == p;
        });
        row.push_back(it == rows.end() ? "" : csv::format_double(it->proportion));
      }
    }
    csv::write_row(out, row);
  }
}

} // namespace densitycp
