#include "densitycp/wasserstein.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "densitycp/errors.hpp"

namespace densitycp {

namespace {

constexpr double kRangeSlack = 1e-12;

void require_same_levels(const QuantileFunction& a, const QuantileFunction& b) {
  if (a.level_count() != b.level_count()) {
    std::ostringstream msg;
    msg << "quantile functions use different level grids (" << a.level_count() << " vs "
        << b.level_count() << " levels)";
    throw ParameterError(msg.str());
  }
}

void require_nonempty(std::span<const QuantileFunction> qs) {
  if (qs.empty()) throw ParameterError("need at least one quantile function");
}

} // namespace

QuantileFunction::QuantileFunction(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw ParameterError("quantile function needs at least one level");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    double& v = values_[i];
    if (!(v >= -kRangeSlack && v <= 1.0 + kRangeSlack)) {
      std::ostringstream msg;
      msg << "quantile value " << v << " at level " << i << " outside [0, 1]";
      throw ParameterError(msg.str());
    }
    v = std::clamp(v, 0.0, 1.0);
    if (i > 0 && v < values_[i - 1]) {
      std::ostringstream msg;
      msg << "quantile values decrease at level " << i;
      throw ParameterError(msg.str());
    }
  }
}

QuantileFunction quantile_from_density(const DensityEstimate& density, std::size_t level_count) {
  if (level_count == 0) throw ParameterError("level count must be positive");
  const auto f = density.values();
  const std::size_t m = f.size();
  const double dx = density.spacing();

  std::vector<double> cdf(m, 0.0);
  for (std::size_t j = 1; j < m; ++j) cdf[j] = cdf[j - 1] + 0.5 * dx * (f[j - 1] + f[j]);
  const double total = cdf.back();
  for (double& c : cdf) c /= total;
  cdf.back() = 1.0;

  std::vector<double> q(level_count);
  std::size_t j = 0;
  for (std::size_t i = 0; i < level_count; ++i) {
    const double t = QuantileFunction::level_at(i, level_count);
    while (cdf[j] < t) ++j;  // terminates: cdf.back() == 1 > t
    if (j == 0) {
      q[i] = 0.0;
    } else {
      const double lo = cdf[j - 1];
      const double frac = (t - lo) / (cdf[j] - lo);
      q[i] = (static_cast<double>(j - 1) + frac) * dx;
    }
  }
  return QuantileFunction(std::move(q));
}

double w2_distance_squared(const QuantileFunction& q1, const QuantileFunction& q2) {
  require_same_levels(q1, q2);
  const auto a = q1.values();
  const auto b = q2.values();
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum / static_cast<double>(a.size());
}

double w2_distance(const QuantileFunction& q1, const QuantileFunction& q2) {
  return std::sqrt(w2_distance_squared(q1, q2));
}

double frechet_objective(std::span<const QuantileFunction> qs, const QuantileFunction& candidate) {
  require_nonempty(qs);
  double sum = 0.0;
  for (const auto& q : qs) sum += w2_distance_squared(q, candidate);
  return sum / static_cast<double>(qs.size());
}

QuantileFunction frechet_mean(std::span<const QuantileFunction> qs) {
  require_nonempty(qs);
  const std::size_t levels = qs.front().level_count();
  // Averaging deviations from the first item keeps identical inputs exact.
  const auto base = qs.front().values();
  std::vector<double> offset(levels, 0.0);
  for (const auto& q : qs) {
    require_same_levels(qs.front(), q);
    const auto v = q.values();
    for (std::size_t i = 0; i < levels; ++i) offset[i] += v[i] - base[i];
  }
  const auto n = static_cast<double>(qs.size());
  std::vector<double> sum(levels);
  for (std::size_t i = 0; i < levels; ++i) sum[i] = base[i] + offset[i] / n;
  // Rounding in the average can break monotonicity by an ulp.
  for (std::size_t i = 1; i < levels; ++i) sum[i] = std::max(sum[i], sum[i - 1]);
  return QuantileFunction(std::move(sum));
}

double frechet_variance(std::span<const QuantileFunction> qs, const QuantileFunction& mean) {
  return frechet_objective(qs, mean);
}

FrechetSummary frechet_summary(std::span<const QuantileFunction> qs) {
  QuantileFunction mean = frechet_mean(qs);
  const double variance = frechet_variance(qs, mean);
  return {std::move(mean), variance};
}

DensityEstimate density_from_quantile(const QuantileFunction& q, std::size_t grid_size,
                                      SupportInterval support) {
  if (grid_size < 3) throw ParameterError("grid size must be at least 3");
  const auto v = q.values();
  const std::size_t levels = v.size();
  if (v.front() == v.back()) throw DegenerateError("constant quantile function has no density");

  // CDF knots (x, t): the midpoint levels plus the support endpoints. Tied
  // quantile values collapse to one knot carrying the largest level, which
  // makes the CDF right-continuous at atoms.
  std::vector<double> xs{0.0};
  std::vector<double> ts{0.0};
  xs.reserve(levels + 2);
  ts.reserve(levels + 2);
  auto push = [&](double x, double t) {
    if (x == xs.back()) {
      ts.back() = t;
    } else {
      xs.push_back(x);
      ts.push_back(t);
    }
  };
  for (std::size_t i = 0; i < levels; ++i) push(v[i], QuantileFunction::level_at(i, levels));
  push(1.0, 1.0);

  // Monotone cubic Hermite interpolation keeps the CDF nondecreasing while
  // following its curvature between sparse tail knots.
  const std::size_t knots = xs.size();
  std::vector<double> widths(knots - 1);
  std::vector<double> secants(knots - 1);
  for (std::size_t k = 0; k + 1 < knots; ++k) {
    widths[k] = xs[k + 1] - xs[k];
    secants[k] = (ts[k + 1] - ts[k]) / widths[k];
  }
  std::vector<double> slopes(knots, 0.0);
  for (std::size_t k = 1; k + 1 < knots; ++k) {
    const double left = secants[k - 1];
    const double right = secants[k];
    if (left <= 0.0 || right <= 0.0) continue;
    const double w1 = 2.0 * widths[k] + widths[k - 1];
    const double w2 = widths[k] + 2.0 * widths[k - 1];
    slopes[k] = (w1 + w2) / (w1 / left + w2 / right);
  }
  auto end_slope = [](double h0, double h1, double d0, double d1) {
    if (d0 == 0.0) return 0.0;
    const double d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (d <= 0.0) return 0.0;
    if (d1 >= 0.0 && d > 3.0 * d0) return 3.0 * d0;
    return d;
  };
  if (knots == 2) {
    slopes[0] = slopes[1] = secants[0];
  } else {
    slopes[0] = end_slope(widths[0], widths[1], secants[0], secants[1]);
    slopes[knots - 1] = end_slope(widths[knots - 2], widths[knots - 3], secants[knots - 2], secants[knots - 3]);
  }

  auto cdf = [&](double x) {
    if (x <= xs.front()) return 0.0;
    if (x >= xs.back()) return 1.0;
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const auto k = static_cast<std::size_t>(it - xs.begin()) - 1;  // xs[k] <= x < xs[k+1]
    const double h = widths[k];
    const double s = (x - xs[k]) / h;
    const double s2 = s * s;
    const double s3 = s2 * s;
    return (2.0 * s3 - 3.0 * s2 + 1.0) * ts[k] + (s3 - 2.0 * s2 + s) * h * slopes[k] +
           (-2.0 * s3 + 3.0 * s2) * ts[k + 1] + (s3 - s2) * h * slopes[k + 1];
  };

  const double dx = 1.0 / static_cast<double>(grid_size - 1);
  std::vector<double> values(grid_size);
  for (std::size_t j = 0; j < grid_size; ++j) {
    const double x = static_cast<double>(j) * dx;
    const double lo = std::max(0.0, x - 0.5 * dx);
    const double hi = std::min(1.0, x + 0.5 * dx);
    const double below = j == 0 ? 0.0 : cdf(lo);
    values[j] = (cdf(hi) - below) / (hi - lo);
  }
  return DensityEstimate::normalized(std::move(values), support);
}

} // namespace densitycp
