#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "densitycp/wasserstein.hpp"

namespace densitycp {

/// Time-ordered quantile functions on one shared level grid.
class DensitySequence {
public:
  /// Throws ParameterError if empty or if the level grids differ.
  explicit DensitySequence(std::vector<QuantileFunction> items);

  std::span<const QuantileFunction> items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  const QuantileFunction& operator[](std::size_t i) const { return items_[i]; }

  DensitySequence reversed() const;
  /// Item i of the result is item order[i] of this sequence.
  DensitySequence permuted(std::span<const std::size_t> order) const;

private:
  std::vector<QuantileFunction> items_;
};

enum class SigmaFormula {
  /// (1/n) sum d^4 - V^2: the variance of the squared distances.
  VarianceOfSquares,
  /// (1/n) sum d^4 - V.
  Literal,
};

struct ScanOptions {
  double cut = 0.1;
  SigmaFormula sigma = SigmaFormula::VarianceOfSquares;
  /// sigma^2 at or below this marks the scan degenerate.
  double sigma_floor = 1e-12;
};

/// Own- and cross-mean Fréchet variances of the two segments at one cut.
struct SegmentStats {
  std::size_t cut;  // items [0, cut) form the first segment
  double k;         // cut / n
  double v1;
  double v2;
  double v1c;  // first segment about the second segment's mean
  double v2c;  // second segment about the first segment's mean
};

struct PooledScale {
  QuantileFunction mu_hat;
  double v_hat;
  double fourth_moment;  // (1/n) sum d^4(f_i, mu_hat)
  double sigma_sq;       // before flooring
  bool degenerate;       // sigma_sq <= floor
};

struct ScanPoint {
  std::size_t cut;
  double k;
  double statistic;
};

struct ScanResult {
  std::vector<ScanPoint> curve;
  double k_hat = 0.0;
  /// Last index (1-based) of the first segment.
  std::size_t tau_hat = 0;
  double max_stat = 0.0;
  double sigma_sq = 0.0;
  bool degenerate = false;
  std::optional<double> p_value;
  std::size_t permutations = 0;
  std::uint64_t seed = 0;
};

/// Range of integer cuts m with m / n in [c, 1 - c] and both segments
/// nonempty. Throws ParameterError if c is outside (0, 1/2), n c < 2, or the
/// range is empty.
struct CutRange {
  std::size_t first;
  std::size_t last;
};
CutRange cut_range(std::size_t n, double cut);

/// Definitional evaluation: both segment means via frechet_mean and all four
/// variances via frechet_variance. Throws ParameterError if cut / n is not
/// in [c, 1 - c].
SegmentStats segment_stats(const DensitySequence& seq, std::size_t cut, double c = 0.1);
/// Same with a cut fraction; the cut is [n k].
SegmentStats segment_stats_at(const DensitySequence& seq, double k, double c = 0.1);

PooledScale pooled_scale(const DensitySequence& seq, SigmaFormula formula = SigmaFormula::VarianceOfSquares,
                         double sigma_floor = 1e-12);

/// T_n(k) = k (1 - k) / sigma^2 {(V1 - V2)^2 + (V1c - V1 + V2c - V2)^2}.
double scan_value(const SegmentStats& stats, double sigma_sq);

/// Evaluates T_n at every admissible cut; the argmax (first on ties) is the
/// change-point estimate. A degenerate scale yields an all-zero curve.
///
/// Segment sums come from prefix sums of the quantiles centred at the pooled
/// mean, so one scan costs O(n L) rather than O(n^2 L).
ScanResult scan_statistic(const DensitySequence& seq, const ScanOptions& options = {});

/// (1 + #{b : max T^(b) >= max T}) / (B + 1) over B seeded random
/// reorderings. Replicate b draws its permutation from an engine seeded with
/// (seed, b), so the value does not depend on evaluation order.
double permutation_pvalue(const DensitySequence& seq, const ScanOptions& options, std::size_t permutations,
                          std::uint64_t seed);

/// scan_statistic followed by permutation_pvalue (skipped when B == 0).
ScanResult detect_change_point(const DensitySequence& seq, const ScanOptions& options,
                               std::size_t permutations, std::uint64_t seed);

} // namespace densitycp
