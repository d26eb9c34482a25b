#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "densitycp/density_estimation.hpp"

namespace densitycp {

/// Quantile function sampled at the midpoints (i + 0.5) / L of L equal
/// probability bins. Values live on the unit-rescaled support.
///
/// In one dimension the Wasserstein-2 space is isometric to this set of
/// nondecreasing functions under the L2 norm, so every distance, mean and
/// variance below is computed on these vectors.
class QuantileFunction {
public:
  /// Throws ParameterError if values are empty, decrease, or leave [0, 1]
  /// by more than 1e-12 (tiny excursions are clamped).
  explicit QuantileFunction(std::vector<double> values);

  std::span<const double> values() const { return values_; }
  std::size_t level_count() const { return values_.size(); }
  double level(std::size_t i) const { return level_at(i, values_.size()); }

  static double level_at(std::size_t i, std::size_t count) {
    return (static_cast<double>(i) + 0.5) / static_cast<double>(count);
  }

  bool operator==(const QuantileFunction&) const = default;

private:
  std::vector<double> values_;
};

inline constexpr std::size_t kDefaultLevelCount = 1000;

/// Inverts the cumulative trapezoid of `density` at the midpoint levels.
/// Left-continuous inverse, linear inside each strictly increasing cell.
QuantileFunction quantile_from_density(const DensityEstimate& density,
                                       std::size_t level_count = kDefaultLevelCount);

/// Squared distance: mean over levels of (q1 - q2)^2.
double w2_distance_squared(const QuantileFunction& q1, const QuantileFunction& q2);
double w2_distance(const QuantileFunction& q1, const QuantileFunction& q2);

/// Mean squared W2 distance from each element of `qs` to `candidate`.
double frechet_objective(std::span<const QuantileFunction> qs, const QuantileFunction& candidate);

/// Pointwise average of quantile values; the exact minimizer of
/// frechet_objective.
QuantileFunction frechet_mean(std::span<const QuantileFunction> qs);

/// frechet_objective evaluated at `mean`.
double frechet_variance(std::span<const QuantileFunction> qs, const QuantileFunction& mean);

struct FrechetSummary {
  QuantileFunction mean;
  double variance;
};

FrechetSummary frechet_summary(std::span<const QuantileFunction> qs);

/// Interpolates the CDF back from the quantile knots, differences it over
/// grid cells and renormalizes. Throws DegenerateError for a constant
/// quantile function.
DensityEstimate density_from_quantile(const QuantileFunction& q, std::size_t grid_size = 1001,
                                      SupportInterval support = SupportInterval(0.0, 1.0));

} // namespace densitycp
