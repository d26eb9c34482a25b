#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "densitycp/changepoint.hpp"
#include "densitycp/data_pipeline.hpp"
#include "densitycp/density_estimation.hpp"
#include "densitycp/simulation.hpp"
#include "densitycp/wasserstein.hpp"

namespace densitycp {

namespace exit_code {
inline constexpr int kSuccess = 0;
inline constexpr int kRuntimeFailure = 1;
inline constexpr int kParameterError = 2;
inline constexpr int kIngestFailure = 3;
/// The scan was degenerate: no evidence of a change point.
inline constexpr int kNoEvidence = 4;
} // namespace exit_code

struct DensityConfig {
  KernelFamily kernel = KernelFamily::Epanechnikov;
  /// Shared bandwidth for every day; when absent, the median of the per-day
  /// rule-of-thumb values is used.
  std::optional<double> bandwidth;
  std::size_t grid = 1001;
  std::size_t levels = kDefaultLevelCount;
  /// Overrides the data-driven support [0, 1.05 x max rate].
  std::optional<SupportInterval> support;
};

struct RunConfig {
  std::filesystem::path confirmed;
  std::filesystem::path deaths;
  std::filesystem::path continents;
  /// Panel consumed by densities/detect/report; defaults to <out>/panel.csv.
  std::optional<std::filesystem::path> panel;
  std::filesystem::path out = ".";

  std::int64_t threshold = 30;
  std::size_t window = 150;
  std::optional<std::size_t> min_days;

  DensityConfig density;
  ScanOptions scan;
  std::size_t permutations = 200;
  std::uint64_t seed = 1;
  std::optional<std::size_t> split_day;

  SimulationSpec simulation;
  std::size_t replicates = 1;
};

/// Per-day densities and quantile functions of a panel, all on one support
/// and one bandwidth.
struct DensityRun {
  SupportInterval support;
  Bandwidth bandwidth;
  std::vector<DensityEstimate> densities;
  std::vector<QuantileFunction> quantiles;
};

/// Median over days of the rule-of-thumb bandwidth, clamped like
/// select_bandwidth.
Bandwidth common_bandwidth(const AlignedPanel& panel, const SupportInterval& support, std::size_t grid);

DensityRun estimate_panel_densities(const AlignedPanel& panel, const DensityConfig& config);

/// Panel at config.panel or <out>/panel.csv, with aligned counts attached
/// when panel_deaths.csv and panel_confirmed.csv sit next to it.
AlignedPanel load_panel(const RunConfig& config);

// Each command writes into config.out and returns an exit code; errors
// propagate as exceptions (run_cli maps them to exit codes).
int cmd_ingest(const RunConfig& config);
int cmd_densities(const RunConfig& config);
int cmd_detect(const RunConfig& config);
int cmd_report(const RunConfig& config);
int cmd_simulate(const RunConfig& config);

/// Parses arguments, dispatches to a command and maps exceptions to exit
/// codes. Diagnostics go to stderr.
int run_cli(int argc, const char* const* argv);

} // namespace densitycp
