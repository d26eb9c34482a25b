#include "densitycp/density_estimation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "densitycp/errors.hpp"
#include "densitycp/log.hpp"

namespace densitycp {

namespace {

constexpr double kGaussianCut = 3.0;

double standard_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double truncated_gaussian_norm() {
  static const double norm = standard_normal_cdf(kGaussianCut) - standard_normal_cdf(-kGaussianCut);
  return norm;
}

// Type-7 sample quantile of sorted data.
double sorted_quantile(std::span<const double> sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

void check_unit_position(double x) {
  if (!(x >= 0.0 && x <= 1.0)) {
    std::ostringstream msg;
    msg << "position " << x << " outside [0, 1]";
    throw ParameterError(msg.str());
  }
}

} // namespace

KernelFamily parse_kernel_family(std::string_view name) {
  if (name == "epanechnikov") return KernelFamily::Epanechnikov;
  if (name == "gaussian" || name == "truncated-gaussian") return KernelFamily::TruncatedGaussian;
  throw ParameterError("unknown kernel family '" + std::string(name) + "'");
}

std::string to_string(KernelFamily family) {
  switch (family) {
  case KernelFamily::Epanechnikov:
    return "epanechnikov";
  case KernelFamily::TruncatedGaussian:
    return "truncated-gaussian";
  }
  return "unknown";
}

double Kernel::operator()(double u) const {
  if (u < -1.0 || u > 1.0) return 0.0;
  switch (family_) {
  case KernelFamily::Epanechnikov:
    return 0.75 * (1.0 - u * u);
  case KernelFamily::TruncatedGaussian: {
    const double z = kGaussianCut * u;
    return kGaussianCut * std::exp(-0.5 * z * z) / (std::sqrt(2.0 * M_PI) * truncated_gaussian_norm());
  }
  }
  return 0.0;
}

double Kernel::mass_below(double u) const {
  if (u <= -1.0) return 0.0;
  if (u >= 1.0) return 1.0;
  switch (family_) {
  case KernelFamily::Epanechnikov:
    return 0.5 + 0.75 * (u - u * u * u / 3.0);
  case KernelFamily::TruncatedGaussian:
    return (standard_normal_cdf(kGaussianCut * u) - standard_normal_cdf(-kGaussianCut)) /
           truncated_gaussian_norm();
  }
  return 0.0;
}

SupportInterval::SupportInterval(double lower, double upper) : lower_(lower), upper_(upper) {
  if (!(std::isfinite(lower) && std::isfinite(upper) && lower < upper)) {
    std::ostringstream msg;
    msg << "invalid support [" << lower << ", " << upper << "]";
    throw ParameterError(msg.str());
  }
}

double SupportInterval::to_unit(double x) const {
  return std::clamp((x - lower_) / width(), 0.0, 1.0);
}

RawSample::RawSample(std::vector<double> values, SupportInterval support)
    : values_(std::move(values)), support_(support) {
  if (values_.size() < 2) {
    throw ParameterError("sample needs at least two values, got " + std::to_string(values_.size()));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!support_.contains(values_[i])) {
      std::ostringstream msg;
      msg << "sample value " << values_[i] << " at position " << i << " outside support ["
          << support_.lower() << ", " << support_.upper() << "]";
      throw ParameterError(msg.str());
    }
  }
}

std::vector<double> RawSample::unit_values() const {
  std::vector<double> out(values_.size());
  std::ranges::transform(values_, out.begin(), [this](double x) { return support_.to_unit(x); });
  return out;
}

Bandwidth::Bandwidth(double h) : h_(h) {
  if (!(h > 0.0 && h < 0.5)) {
    std::ostringstream msg;
    msg << "bandwidth " << h << " outside (0, 1/2)";
    throw ParameterError(msg.str());
  }
}

double trapezoid(std::span<const double> values, double spacing) {
  if (values.size() < 2) return 0.0;
  double interior = 0.0;
  for (std::size_t j = 1; j + 1 < values.size(); ++j) interior += values[j];
  return spacing * (interior + 0.5 * (values.front() + values.back()));
}

DensityEstimate::DensityEstimate(std::vector<double> values, SupportInterval support)
    : values_(std::move(values)), support_(support) {
  if (values_.size() < 2) throw ParameterError("density grid needs at least two points");
  for (double v : values_) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ParameterError("density values must be finite and nonnegative");
  }
  const double mass = integral();
  if (std::abs(mass - 1.0) > 1e-6) {
    std::ostringstream msg;
    msg << "density integrates to " << mass << ", expected 1";
    throw ParameterError(msg.str());
  }
}

DensityEstimate DensityEstimate::normalized(std::vector<double> values, SupportInterval support) {
  if (values.size() < 2) throw ParameterError("density grid needs at least two points");
  for (double& v : values) v = std::isfinite(v) ? std::max(v, 0.0) : 0.0;
  const double mass = trapezoid(values, 1.0 / static_cast<double>(values.size() - 1));
  if (!(mass > 0.0)) throw DegenerateError("density has no mass to normalize");
  for (double& v : values) v /= mass;
  return DensityEstimate(std::move(values), support);
}

double DensityEstimate::integral() const { return trapezoid(values_, spacing()); }

double boundary_weight(double x, double h, const Kernel& kernel) {
  check_unit_position(x);
  static_cast<void>(Bandwidth{h});
  if (x < h) return 1.0 / (1.0 - kernel.mass_below(-x / h));
  if (x > 1.0 - h) return 1.0 / kernel.mass_below((1.0 - x) / h);
  return 1.0;
}

DensityEstimate estimate_density(const RawSample& sample, Bandwidth bandwidth,
                                 const DensityOptions& options) {
  const std::size_t m = options.grid_size;
  if (m < 3) throw ParameterError("grid size must be at least 3");
  const double h = bandwidth.value();
  const double spacing = 1.0 / static_cast<double>(m - 1);
  const auto last = static_cast<double>(m - 1);

  // Sorting fixes the summation order, so the result does not depend on how
  // the sample was ordered.
  std::vector<double> points = sample.unit_values();
  std::ranges::sort(points);

  if (points.front() == points.back() && h < spacing) {
    log::warn("degenerate sample: all values identical and bandwidth below grid spacing");
  }

  std::vector<double> values(m, 0.0);
  for (double w : points) {
    const auto first = static_cast<std::size_t>(std::max(0.0, std::ceil((w - h) * last)));
    const auto stop = static_cast<std::size_t>(std::min(last, std::floor((w + h) * last)));
    for (std::size_t j = first; j <= stop; ++j) {
      values[j] += options.kernel((static_cast<double>(j) * spacing - w) / h);
    }
  }
  if (options.boundary_correction) {
    for (std::size_t j = 0; j < m; ++j) {
      if (values[j] != 0.0) values[j] *= boundary_weight(static_cast<double>(j) * spacing, h, options.kernel);
    }
  }

  if (!(trapezoid(values, spacing) > 0.0)) {
    // The kernel fell between grid points; put each observation on its
    // nearest grid node instead.
    log::warn("kernel sum vanished on the grid; using nearest-node mass");
    for (double w : points) values[static_cast<std::size_t>(std::lround(w * last))] += 1.0;
  }
  return DensityEstimate::normalized(std::move(values), sample.support());
}

double rule_of_thumb_bandwidth(std::span<const double> unit_values) {
  const std::size_t n = unit_values.size();
  if (n < 2) throw ParameterError("bandwidth selection needs at least two values");
  std::vector<double> sorted(unit_values.begin(), unit_values.end());
  std::ranges::sort(sorted);
  if (sorted.front() == sorted.back()) return 0.0;
  const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : sorted) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  const double iqr = sorted_quantile(sorted, 0.75) - sorted_quantile(sorted, 0.25);
  const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

double minimum_bandwidth(std::size_t grid_size) {
  if (grid_size < 3) throw ParameterError("grid size must be at least 3");
  return std::min(2.0 / static_cast<double>(grid_size - 1), kMaximumBandwidth);
}

Bandwidth clamp_bandwidth(double raw, std::size_t grid_size) {
  const double floor = minimum_bandwidth(grid_size);
  if (!(raw > 0.0)) return Bandwidth(floor);
  return Bandwidth(std::clamp(raw, floor, kMaximumBandwidth));
}

Bandwidth select_bandwidth(const RawSample& sample, std::size_t grid_size) {
  const double rule = rule_of_thumb_bandwidth(sample.unit_values());
  if (!(rule > 0.0)) log::warn("zero-dispersion sample; using minimum bandwidth");
  return clamp_bandwidth(rule, grid_size);
}

} // namespace densitycp
