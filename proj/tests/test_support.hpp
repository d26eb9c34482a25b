#pragma once

// Generators and independent reference computations shared by the test
// binaries. Nothing here calls the library routine it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <boost/math/distributions/beta.hpp>

#include "densitycp/changepoint.hpp"
#include "densitycp/commands.hpp"
#include "densitycp/density_estimation.hpp"
#include "densitycp/log.hpp"
#include "densitycp/wasserstein.hpp"

namespace densitycp::testing {

inline double draw_beta(std::mt19937_64& rng, double a, double b) {
  const double x = std::gamma_distribution<double>(a, 1.0)(rng);
  const double y = std::gamma_distribution<double>(b, 1.0)(rng);
  return x / (x + y);
}

inline std::vector<double> beta_sample(std::mt19937_64& rng, std::size_t n, double a, double b) {
  std::vector<double> out(n);
  for (double& v : out) v = draw_beta(rng, a, b);
  return out;
}

inline std::vector<double> beta_pdf_grid(double a, double b, std::size_t grid) {
  const boost::math::beta_distribution<double> dist(a, b);
  std::vector<double> out(grid);
  for (std::size_t j = 0; j < grid; ++j) {
    const double x = static_cast<double>(j) / static_cast<double>(grid - 1);
    out[j] = boost::math::pdf(dist, x);
  }
  return out;
}

/// Ordinary kernel sum with w == 1 on a uniform grid of [0, 1],
/// renormalized by the trapezoid rule.
inline std::vector<double> uncorrected_estimate(const std::vector<double>& unit_sample, double h, std::size_t grid,
                                                const Kernel& kernel = Kernel{}) {
  std::vector<double> f(grid, 0.0);
  for (std::size_t j = 0; j < grid; ++j) {
    const double x = static_cast<double>(j) / static_cast<double>(grid - 1);
    for (double w : unit_sample) f[j] += kernel((x - w) / h);
  }
  const double dx = 1.0 / static_cast<double>(grid - 1);
  double mass = 0.5 * (f.front() + f.back());
  for (std::size_t j = 1; j + 1 < grid; ++j) mass += f[j];
  mass *= dx;
  for (double& v : f) v /= mass;
  return f;
}

/// Random smooth density on [0, 1]: a mixture of 1-3 Beta components.
inline DensityEstimate random_grid_density(std::mt19937_64& rng, std::size_t grid = 1001) {
  std::uniform_int_distribution<int> components(1, 3);
  std::uniform_real_distribution<double> shape(1.2, 12.0);
  std::uniform_real_distribution<double> weight(0.2, 1.0);
  std::vector<double> values(grid, 0.0);
  const int k = components(rng);
  for (int c = 0; c < k; ++c) {
    const double w = weight(rng);
    const auto pdf = beta_pdf_grid(shape(rng), shape(rng), grid);
    for (std::size_t j = 0; j < grid; ++j) values[j] += w * pdf[j];
  }
  return DensityEstimate::normalized(std::move(values), SupportInterval(0.0, 1.0));
}

/// Quantile of the piecewise-linear interpolant of a grid density, by exact
/// inversion of its piecewise-quadratic CDF. Normalizes by the exact
/// (trapezoidal) integral of the interpolant.
class ExactGridQuantile {
public:
  explicit ExactGridQuantile(std::vector<double> f) : f_(std::move(f)), cdf_(f_.size(), 0.0) {
    dx_ = 1.0 / static_cast<double>(f_.size() - 1);
    for (std::size_t j = 1; j < f_.size(); ++j) cdf_[j] = cdf_[j - 1] + 0.5 * dx_ * (f_[j - 1] + f_[j]);
    total_ = cdf_.back();
  }

  double operator()(double t) const {
    const double target = t * total_;
    const auto it = std::lower_bound(cdf_.begin() + 1, cdf_.end(), target);
    const std::size_t j = static_cast<std::size_t>(it - cdf_.begin());  // cdf_[j-1] < target <= cdf_[j]
    const double rem = target - cdf_[j - 1];
    const double a = f_[j - 1];
    const double slope = (f_[j] - f_[j - 1]) / dx_;
    // Solve a s + slope s^2 / 2 = rem for s in [0, dx].
    double s;
    if (std::abs(slope) < 1e-14) {
      s = a > 0.0 ? rem / a : 0.0;
    } else {
      const double disc = std::max(0.0, a * a + 2.0 * slope * rem);
      s = (std::sqrt(disc) - a) / slope;
    }
    return (static_cast<double>(j - 1)) * dx_ + std::clamp(s, 0.0, dx_);
  }

private:
  std::vector<double> f_;
  std::vector<double> cdf_;
  double dx_ = 0.0;
  double total_ = 0.0;
};

/// Wasserstein-2 distance between two grid densities by midpoint quadrature
/// of the squared quantile difference at `levels` levels.
inline double w2_quadrature(const DensityEstimate& f, const DensityEstimate& g, std::size_t levels) {
  const ExactGridQuantile qf({f.values().begin(), f.values().end()});
  const ExactGridQuantile qg({g.values().begin(), g.values().end()});
  double sum = 0.0;
  for (std::size_t i = 0; i < levels; ++i) {
    const double t = (static_cast<double>(i) + 0.5) / static_cast<double>(levels);
    const double d = qf(t) - qg(t);
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(levels));
}

/// Quantile function of uniform on [lo, hi] at L midpoint levels.
inline QuantileFunction uniform_quantile(double lo, double hi, std::size_t levels = kDefaultLevelCount) {
  std::vector<double> v(levels);
  for (std::size_t i = 0; i < levels; ++i) v[i] = lo + (hi - lo) * QuantileFunction::level_at(i, levels);
  return QuantileFunction(std::move(v));
}

/// Random nondecreasing quantile function inside [lo, hi].
inline QuantileFunction random_quantile(std::mt19937_64& rng, std::size_t levels = 200, double lo = 0.0,
                                        double hi = 1.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> steps(levels);
  for (double& s : steps) s = u(rng) * u(rng);
  double total = 0.0;
  for (double s : steps) total += s;
  const double start = lo + 0.3 * (hi - lo) * u(rng);
  const double span = (hi - start) * (0.2 + 0.8 * u(rng));
  std::vector<double> v(levels);
  double acc = 0.0;
  for (std::size_t i = 0; i < levels; ++i) {
    acc += steps[i];
    v[i] = std::min(hi, start + span * acc / total);
  }
  return QuantileFunction(std::move(v));
}

/// Quantile sequence of a simulated panel, estimated the way the pipeline
/// does it (data-driven support, common bandwidth).
inline DensitySequence simulated_sequence(const SimulationSpec& spec, std::uint64_t seed) {
  const AlignedPanel panel = simulate_panel(spec, seed);
  return DensitySequence(estimate_panel_densities(panel, DensityConfig{}).quantiles);
}

/// Collects warnings for the lifetime of the object.
class WarningCapture {
public:
  WarningCapture() : guard_([this](const std::string& m) { messages.push_back(m); }) {}
  std::vector<std::string> messages;

private:
  log::ScopedSink guard_;
};

} // namespace densitycp::testing
