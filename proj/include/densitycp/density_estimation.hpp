#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace densitycp {

enum class KernelFamily { Epanechnikov, TruncatedGaussian };

KernelFamily parse_kernel_family(std::string_view name);
std::string to_string(KernelFamily family);

/// Symmetric kernel supported on [-1, 1] with unit mass.
///
/// Epanechnikov is 0.75 (1 - u^2). TruncatedGaussian is a standard normal
/// density cut at three standard deviations and rescaled onto [-1, 1]. Both
/// have closed-form partial masses, which the boundary weight needs.
class Kernel {
public:
  explicit Kernel(KernelFamily family = KernelFamily::Epanechnikov) : family_(family) {}

  KernelFamily family() const { return family_; }

  /// Kernel value; zero outside [-1, 1].
  double operator()(double u) const;

  /// Mass on [-1, u], clamped to [0, 1].
  double mass_below(double u) const;

private:
  KernelFamily family_;
};

/// Compact support [lower, upper] of the densities in original units.
class SupportInterval {
public:
  SupportInterval(double lower, double upper);

  double lower() const { return lower_; }
  double upper() const { return upper_; }
  double width() const { return upper_ - lower_; }
  bool contains(double x) const { return x >= lower_ && x <= upper_; }

  /// Affine map onto [0, 1]; results are clamped to [0, 1].
  double to_unit(double x) const;
  double from_unit(double u) const { return lower_ + u * width(); }

  bool operator==(const SupportInterval&) const = default;

private:
  double lower_;
  double upper_;
};

/// An i.i.d. sample together with the support it was drawn on.
class RawSample {
public:
  /// Throws ParameterError if fewer than two values are given or any value
  /// lies outside the support.
  RawSample(std::vector<double> values, SupportInterval support);

  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  const SupportInterval& support() const { return support_; }

  /// Values mapped onto [0, 1].
  std::vector<double> unit_values() const;

private:
  std::vector<double> values_;
  SupportInterval support_;
};

/// Bandwidth as a fraction of the unit-rescaled support, 0 < h < 1/2.
class Bandwidth {
public:
  explicit Bandwidth(double h);
  double value() const { return h_; }

private:
  double h_;
};

/// Density on a uniform grid of [0, 1] (the unit-rescaled support).
///
/// Values are with respect to the unit variable; divide by
/// `support().width()` to obtain the density in original units.
class DensityEstimate {
public:
  /// Checks nonnegativity and unit trapezoidal mass (within 1e-6).
  DensityEstimate(std::vector<double> values, SupportInterval support);

  /// Clips negatives to zero and rescales to unit trapezoidal mass.
  /// Throws DegenerateError if nothing is left to normalize.
  static DensityEstimate normalized(std::vector<double> values, SupportInterval support);

  std::span<const double> values() const { return values_; }
  std::size_t grid_size() const { return values_.size(); }
  double spacing() const { return 1.0 / static_cast<double>(values_.size() - 1); }
  double grid_point(std::size_t j) const { return static_cast<double>(j) * spacing(); }
  const SupportInterval& support() const { return support_; }
  double integral() const;

private:
  std::vector<double> values_;
  SupportInterval support_;
};

/// Composite trapezoid rule on a uniform grid.
double trapezoid(std::span<const double> values, double spacing);

/// Reciprocal of the kernel mass that stays inside [0, 1] at position x.
/// Equals 1 on [h, 1 - h]; throws ParameterError for x outside [0, 1] or
/// h outside (0, 1/2).
double boundary_weight(double x, double h, const Kernel& kernel = Kernel{});

struct DensityOptions {
  Kernel kernel{};
  std::size_t grid_size = 1001;
  /// Disabling the boundary weight gives the ordinary kernel sum,
  /// renormalized on the grid.
  bool boundary_correction = true;
};

DensityEstimate estimate_density(const RawSample& sample, Bandwidth h,
                                 const DensityOptions& options = {});

/// 0.9 min(sd, iqr / 1.34) n^(-1/5) on the unit-rescaled values, without
/// clamping. Falls back to sd when the IQR is zero. Returns 0 for a constant
/// sample.
double rule_of_thumb_bandwidth(std::span<const double> unit_values);

/// Smallest bandwidth the selector will return for a given grid.
double minimum_bandwidth(std::size_t grid_size);
inline constexpr double kMaximumBandwidth = 0.5 - 1e-6;

/// Clamps a raw bandwidth into [minimum_bandwidth, 1/2 - 1e-6]; a
/// nonpositive value maps to the minimum.
Bandwidth clamp_bandwidth(double raw, std::size_t grid_size);

/// Rule-of-thumb bandwidth clamped into [minimum_bandwidth, 1/2 - 1e-6].
/// A zero-dispersion sample gets the minimum, with a warning.
Bandwidth select_bandwidth(const RawSample& sample, std::size_t grid_size = 1001);

} // namespace densitycp
