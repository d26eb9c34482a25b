#include "densitycp/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "densitycp/csv.hpp"
#include "densitycp/errors.hpp"
#include "densitycp/log.hpp"

namespace densitycp {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

class Stopwatch {
public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::ofstream open_output(const fs::path& path) {
  fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open " + path.string());
  return in;
}

void write_json(const fs::path& path, const json& doc) {
  auto out = open_output(path);
  out << doc.dump(2) << '\n';
}

json describe(const RunConfig& c) {
  json j;
  j["confirmed"] = c.confirmed.string();
  j["deaths"] = c.deaths.string();
  j["continents"] = c.continents.string();
  j["panel"] = c.panel ? json(c.panel->string()) : json(nullptr);
  j["out"] = c.out.string();
  j["threshold"] = c.threshold;
  j["window"] = c.window;
  j["min_days"] = c.min_days ? json(*c.min_days) : json(nullptr);
  j["kernel"] = to_string(c.density.kernel);
  j["bandwidth"] = c.density.bandwidth ? json(*c.density.bandwidth) : json(nullptr);
  j["grid"] = c.density.grid;
  j["levels"] = c.density.levels;
  j["support"] = c.density.support ? json::array({c.density.support->lower(), c.density.support->upper()})
                                   : json(nullptr);
  j["cut"] = c.scan.cut;
  j["sigma"] = c.scan.sigma == SigmaFormula::Literal ? "literal" : "variance-of-squares";
  j["sigma_floor"] = c.scan.sigma_floor;
  j["permutations"] = c.permutations;
  j["seed"] = c.seed;
  j["split_day"] = c.split_day ? json(*c.split_day) : json(nullptr);
  return j;
}

fs::path panel_path(const RunConfig& config) { return config.panel.value_or(config.out / "panel.csv"); }

void write_density_rows(std::ostream& out, const DensityRun& run) {
  const auto& support = run.support;
  const std::size_t grid = run.densities.front().grid_size();
  std::vector<std::string> row{"day"};
  for (std::size_t j = 0; j < grid; ++j) {
    row.push_back(csv::format_double(support.from_unit(run.densities.front().grid_point(j))));
  }
  csv::write_row(out, row);
  for (std::size_t d = 0; d < run.densities.size(); ++d) {
    row.assign({std::to_string(d + 1)});
    for (double v : run.densities[d].values()) row.push_back(csv::format_double(v / support.width()));
    csv::write_row(out, row);
  }
}

void write_quantile_rows(std::ostream& out, const DensityRun& run) {
  const auto& support = run.support;
  const std::size_t levels = run.quantiles.front().level_count();
  std::vector<std::string> row{"day"};
  for (std::size_t i = 0; i < levels; ++i) row.push_back(csv::format_double(QuantileFunction::level_at(i, levels)));
  csv::write_row(out, row);
  for (std::size_t d = 0; d < run.quantiles.size(); ++d) {
    row.assign({std::to_string(d + 1)});
    for (double v : run.quantiles[d].values()) row.push_back(csv::format_double(support.from_unit(v)));
    csv::write_row(out, row);
  }
}

std::size_t split_from_detection(const RunConfig& config) {
  const fs::path path = config.out / "detect.json";
  std::ifstream in(path);
  if (!in) throw ParameterError("no --split-day given and no " + path.string() + " to take it from");
  const json doc = json::parse(in);
  return doc.at("result").at("tau_hat").get<std::size_t>();
}

SupportInterval parse_support(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw ParameterError("support must be given as lower,upper");
  try {
    return SupportInterval(std::stod(text.substr(0, comma)), std::stod(text.substr(comma + 1)));
  } catch (const std::logic_error& e) {
    if (dynamic_cast<const ParameterError*>(&e) != nullptr) throw;
    throw ParameterError("support must be given as lower,upper");
  }
}

} // namespace

Bandwidth common_bandwidth(const AlignedPanel& panel, const SupportInterval& support, std::size_t grid) {
  std::vector<double> rules;
  rules.reserve(panel.window);
  for (std::size_t day = 1; day <= panel.window; ++day) {
    rules.push_back(rule_of_thumb_bandwidth(daily_cross_section(panel, day, support).unit_values()));
  }
  std::ranges::sort(rules);
  const std::size_t mid = rules.size() / 2;
  const double median = rules.size() % 2 == 1 ? rules[mid] : 0.5 * (rules[mid - 1] + rules[mid]);
  if (!(median > 0.0)) log::warn("median rule-of-thumb bandwidth is zero; using minimum bandwidth");
  return clamp_bandwidth(median, grid);
}

DensityRun estimate_panel_densities(const AlignedPanel& panel, const DensityConfig& config) {
  if (config.levels == 0) throw ParameterError("level count must be positive");
  const SupportInterval support = config.support.value_or(panel.data_support());
  const Bandwidth h = config.bandwidth ? Bandwidth(*config.bandwidth) : common_bandwidth(panel, support, config.grid);
  const DensityOptions options{Kernel(config.kernel), config.grid, true};

  DensityRun run{support, h, {}, {}};
  run.densities.reserve(panel.window);
  run.quantiles.reserve(panel.window);
  for (std::size_t day = 1; day <= panel.window; ++day) {
    const RawSample sample = daily_cross_section(panel, day, support);
    const auto values = sample.values();
    if (std::ranges::all_of(values, [&](double v) { return v == values.front(); })) {
      log::warn("day " + std::to_string(day) + ": all rates equal");
    }
    run.densities.push_back(estimate_density(sample, h, options));
    run.quantiles.push_back(quantile_from_density(run.densities.back(), config.levels));
  }
  return run;
}

AlignedPanel load_panel(const RunConfig& config) {
  const fs::path path = panel_path(config);
  auto in = open_input(path);
  AlignedPanel panel = read_panel_csv(in, path.string());
  const fs::path deaths = path.parent_path() / "panel_deaths.csv";
  const fs::path confirmed = path.parent_path() / "panel_confirmed.csv";
  if (fs::exists(deaths) && fs::exists(confirmed)) {
    auto din = open_input(deaths);
    auto cin = open_input(confirmed);
    panel.deaths = read_count_csv(din, panel, deaths.string());
    panel.confirmed = read_count_csv(cin, panel, confirmed.string());
  }
  return panel;
}

int cmd_ingest(const RunConfig& config) {
  Stopwatch clock;
  CaseData data = load_cases(config.confirmed, config.deaths, config.continents);
  AlignedPanel panel = align_origin(data.records, {config.threshold, config.window, config.min_days});

  {
    auto out = open_output(config.out / "panel.csv");
    write_panel_csv(out, panel, panel.rates);
  }
  {
    auto out = open_output(config.out / "panel_deaths.csv");
    write_panel_csv(out, panel, panel.deaths);
  }
  {
    auto out = open_output(config.out / "panel_confirmed.csv");
    write_panel_csv(out, panel, panel.confirmed);
  }
  {
    auto out = open_output(config.out / "ingest_log.csv");
    csv::write_row(out, {"country", "continent", "status", "origin", "reason"});
    for (const auto& c : panel.countries) {
      csv::write_row(out, {c.name, c.continent, "included", c.origin ? format_iso_date(*c.origin) : "", ""});
    }
    std::map<std::string, std::string> continent_of;
    for (const auto& r : data.records) continent_of[r.name] = r.continent;
    for (const auto* list : {&data.excluded, &panel.excluded}) {
      for (const auto& e : *list) {
        const auto it = continent_of.find(e.country);
        csv::write_row(out, {e.country, it == continent_of.end() ? "" : it->second, "excluded", "", e.reason});
      }
    }
  }

  json doc;
  doc["command"] = "ingest";
  doc["config"] = describe(config);
  doc["countries"] = panel.country_count();
  doc["days"] = panel.window;
  doc["excluded"] = data.excluded.size() + panel.excluded.size();
  json per_continent = json::object();
  for (const auto& name : continent_order(panel)) {
    per_continent[name] =
        std::ranges::count_if(panel.countries, [&](const PanelCountry& c) { return c.continent == name; });
  }
  doc["continents"] = per_continent;
  doc["timings"] = {{"total_seconds", clock.seconds()}};
  write_json(config.out / "ingest.json", doc);
  std::cout << "ingest: " << panel.country_count() << " countries x " << panel.window << " days -> "
            << (config.out / "panel.csv").string() << '\n';
  return exit_code::kSuccess;
}

int cmd_densities(const RunConfig& config) {
  Stopwatch clock;
  const AlignedPanel panel = load_panel(config);
  const DensityRun run = estimate_panel_densities(panel, config.density);
  {
    auto out = open_output(config.out / "densities.csv");
    write_density_rows(out, run);
  }
  {
    auto out = open_output(config.out / "quantiles.csv");
    write_quantile_rows(out, run);
  }
  json doc;
  doc["command"] = "densities";
  doc["config"] = describe(config);
  doc["days"] = run.densities.size();
  doc["support"] = {run.support.lower(), run.support.upper()};
  doc["bandwidth_unit"] = run.bandwidth.value();
  doc["bandwidth"] = run.bandwidth.value() * run.support.width();
  doc["timings"] = {{"total_seconds", clock.seconds()}};
  write_json(config.out / "densities.json", doc);
  std::cout << "densities: " << run.densities.size() << " days, bandwidth " << doc["bandwidth"].get<double>() << '\n';
  return exit_code::kSuccess;
}

int cmd_detect(const RunConfig& config) {
  Stopwatch clock;
  const AlignedPanel panel = load_panel(config);
  const DensityRun run = estimate_panel_densities(panel, config.density);
  const double density_seconds = clock.seconds();
  const DensitySequence seq(run.quantiles);
  const ScanResult result = detect_change_point(seq, config.scan, config.permutations, config.seed);
  const double total_seconds = clock.seconds();

  {
    auto out = open_output(config.out / "statistic.csv");
    csv::write_row(out, {"cut", "k", "statistic"});
    for (const auto& p : result.curve) {
      csv::write_row(out, {std::to_string(p.cut), csv::format_double(p.k), csv::format_double(p.statistic)});
    }
  }

  const auto items = seq.items();
  const auto before = frechet_mean(items.subspan(0, result.tau_hat));
  const auto after = frechet_mean(items.subspan(result.tau_hat));
  json means = nullptr;
  try {
    const auto f1 = density_from_quantile(before, config.density.grid, run.support);
    const auto f2 = density_from_quantile(after, config.density.grid, run.support);
    auto out = open_output(config.out / "frechet_means.csv");
    csv::write_row(out, {"x", "before", "after"});
    for (std::size_t j = 0; j < f1.grid_size(); ++j) {
      csv::write_row(out, {csv::format_double(run.support.from_unit(f1.grid_point(j))),
                           csv::format_double(f1.values()[j] / run.support.width()),
                           csv::format_double(f2.values()[j] / run.support.width())});
    }
    means = {{"before_w2_to_after", w2_distance(before, after) * run.support.width()}};
  } catch (const DegenerateError& e) {
    log::warn(std::string("Fréchet mean densities not written: ") + e.what());
  }

  json doc;
  doc["command"] = "detect";
  doc["config"] = describe(config);
  doc["support"] = {run.support.lower(), run.support.upper()};
  doc["bandwidth"] = run.bandwidth.value() * run.support.width();
  json r;
  r["n"] = seq.size();
  r["tau_hat"] = result.tau_hat;
  r["k_hat"] = result.k_hat;
  r["max_stat"] = result.max_stat;
  r["sigma_sq"] = result.sigma_sq;
  r["degenerate"] = result.degenerate;
  r["p_value"] = result.p_value ? json(*result.p_value) : json(nullptr);
  r["permutations"] = result.permutations;
  r["seed"] = result.seed;
  doc["result"] = r;
  doc["frechet_means"] = means;
  doc["timings"] = {{"densities_seconds", density_seconds}, {"total_seconds", total_seconds}};
  write_json(config.out / "detect.json", doc);

  std::cout << "detect: tau_hat = " << result.tau_hat << ", max T = " << result.max_stat;
  if (result.p_value) std::cout << ", p = " << *result.p_value;
  if (result.degenerate) std::cout << " (degenerate scan)";
  std::cout << '\n';
  return result.degenerate ? exit_code::kNoEvidence : exit_code::kSuccess;
}

int cmd_report(const RunConfig& config) {
  Stopwatch clock;
  const AlignedPanel panel = load_panel(config);
  const std::size_t split = config.split_day ? *config.split_day : split_from_detection(config);
  const auto rows = continent_quantile_table(panel, split);
  {
    auto out = open_output(config.out / "quantile_table.csv");
    write_quantile_table_csv(out, panel, rows);
  }
  {
    auto out = open_output(config.out / "country_series.csv");
    csv::write_row(out, {"country", "continent", "day", "rate"});
    for (std::size_t i = 0; i < panel.country_count(); ++i) {
      for (std::size_t day = 1; day <= panel.window; ++day) {
        csv::write_row(out, {panel.countries[i].name, panel.countries[i].continent, std::to_string(day),
                             csv::format_double(panel.rate(i, day))});
      }
    }
  }
  bool wrote_continents = false;
  if (panel.has_counts()) {
    const auto series = continent_series(panel);
    auto out = open_output(config.out / "continent_series.csv");
    std::vector<std::string> row{"day"};
    for (const auto& s : series) row.push_back(s.continent);
    csv::write_row(out, row);
    for (std::size_t day = 0; day < panel.window; ++day) {
      row.assign({std::to_string(day + 1)});
      for (const auto& s : series) row.push_back(csv::format_double(s.rates[day]));
      csv::write_row(out, row);
    }
    wrote_continents = true;
  } else {
    log::warn("panel has no aligned counts; continent series not written");
  }

  json doc;
  doc["command"] = "report";
  doc["config"] = describe(config);
  doc["split_day"] = split;
  json table = json::array();
  for (const auto& r : rows) {
    table.push_back({{"continent", r.continent}, {"stage", to_string(r.stage)}, {"percentile", r.percentile},
                     {"proportion", r.proportion}});
  }
  doc["quantile_table"] = table;
  doc["continent_series"] = wrote_continents;
  doc["timings"] = {{"total_seconds", clock.seconds()}};
  write_json(config.out / "report.json", doc);
  std::cout << "report: split at day " << split << " -> " << (config.out / "quantile_table.csv").string() << '\n';
  return exit_code::kSuccess;
}

int cmd_simulate(const RunConfig& config) {
  Stopwatch clock;
  const SimulationSpec& spec = config.simulation;
  validate(spec);
  if (config.replicates < 1) throw ParameterError("replicate count must be at least 1");

  json replicates = json::array();
  for (std::size_t r = 1; r <= config.replicates; ++r) {
    const std::uint64_t seed = replicate_seed(config.seed, r);
    const AlignedPanel panel = simulate_panel(spec, seed);
    char dir[32];
    std::snprintf(dir, sizeof(dir), "replicate_%03zu", r);
    const fs::path path = config.out / dir / "panel.csv";
    auto out = open_output(path);
    write_panel_csv(out, panel, panel.rates);
    replicates.push_back({{"index", r}, {"seed", seed}, {"panel", (fs::path(dir) / "panel.csv").string()}});
  }

  json doc;
  doc["command"] = "simulate";
  doc["before"] = spec.before.describe();
  doc["after"] = spec.after.describe();
  doc["change_index"] = spec.change_index;
  doc["null"] = spec.before == spec.after;
  doc["draws"] = spec.draws;
  doc["days"] = spec.days;
  doc["seed"] = config.seed;
  doc["support"] = {0.0, 1.0};
  doc["replicates"] = replicates;
  doc["timings"] = {{"total_seconds", clock.seconds()}};
  write_json(config.out / "ground_truth.json", doc);
  std::cout << "simulate: " << config.replicates << " panel(s) of " << spec.draws << " x " << spec.days << " -> "
            << config.out.string() << '\n';
  return exit_code::kSuccess;
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Change-point detection for sequences of densities under the Wasserstein-2 metric"};
  app.require_subcommand(1);
  app.fallthrough();

  RunConfig config;
  std::string kernel = "epanechnikov";
  std::optional<std::string> support;
  std::string before = config.simulation.before.describe();
  std::string after = config.simulation.after.describe();
  bool sigma_literal = false;

  app.add_option("--confirmed", config.confirmed, "Cumulative confirmed cases (wide CSV)");
  app.add_option("--deaths", config.deaths, "Cumulative deaths (wide CSV)");
  app.add_option("--continents", config.continents, "country,continent mapping CSV");
  app.add_option("--panel", config.panel, "Aligned panel CSV (default: <out>/panel.csv)");
  app.add_option("--out", config.out, "Output directory")->capture_default_str();
  app.add_option("--threshold", config.threshold, "Cumulative deaths defining the origin")->capture_default_str();
  app.add_option("--window", config.window, "Days per country after the origin")->capture_default_str();
  app.add_option("--min-days", config.min_days, "Relax the completeness filter to this many days");
  app.add_option("--kernel", kernel, "epanechnikov | truncated-gaussian")->capture_default_str();
  app.add_option("--bandwidth", config.density.bandwidth, "Shared bandwidth as a fraction of the support");
  app.add_option("--grid", config.density.grid, "Density grid size")->capture_default_str();
  app.add_option("--levels", config.density.levels, "Quantile level count")->capture_default_str();
  app.add_option("--support", support, "Fixed support lower,upper");
  app.add_option("--cut", config.scan.cut, "Cut parameter c of [c, 1 - c]")->capture_default_str();
  app.add_option("--permutations", config.permutations, "Permutation count B (0 disables)")->capture_default_str();
  app.add_option("--seed", config.seed, "Seed for permutations and simulation")->capture_default_str();
  app.add_flag("--sigma-literal", sigma_literal, "Scale as (1/n) sum d^4 - V instead of - V^2");
  app.add_option("--split-day", config.split_day, "Split day for the quantile table");
  app.add_option("--before", before, "Family before the change (beta:a,b | uniform:lo,hi)")->capture_default_str();
  app.add_option("--after", after, "Family after the change")->capture_default_str();
  app.add_option("--change-index", config.simulation.change_index, "Last day of the first regime")
      ->capture_default_str();
  app.add_option("--draws", config.simulation.draws, "Draws per day")->capture_default_str();
  app.add_option("--days", config.simulation.days, "Days per panel")->capture_default_str();
  app.add_option("--replicates", config.replicates, "Synthetic panels to write")->capture_default_str();

  auto* ingest = app.add_subcommand("ingest", "Build the aligned mortality-rate panel");
  auto* densities = app.add_subcommand("densities", "Estimate per-day densities and quantile functions");
  auto* detect = app.add_subcommand("detect", "Scan for a change point and compute its permutation p-value");
  auto* report = app.add_subcommand("report", "Continent quantile table and plot series");
  auto* simulate = app.add_subcommand("simulate", "Write synthetic panels with a planted change");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_code::kSuccess : exit_code::kParameterError;
  }

  try {
    config.density.kernel = parse_kernel_family(kernel);
    if (support) config.density.support = parse_support(*support);
    config.scan.sigma = sigma_literal ? SigmaFormula::Literal : SigmaFormula::VarianceOfSquares;
    config.simulation.before = Family::parse(before);
    config.simulation.after = Family::parse(after);

    if (ingest->parsed()) {
      if (config.confirmed.empty() || config.deaths.empty() || config.continents.empty()) {
        throw ParameterError("ingest needs --confirmed, --deaths and --continents");
      }
      return cmd_ingest(config);
    }
    if (densities->parsed()) return cmd_densities(config);
    if (detect->parsed()) return cmd_detect(config);
    if (report->parsed()) return cmd_report(config);
    if (simulate->parsed()) return cmd_simulate(config);
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code::kParameterError;
  } catch (const IngestError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code::kIngestFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code::kRuntimeFailure;
  }
  return exit_code::kRuntimeFailure;
}

} // namespace densitycp
