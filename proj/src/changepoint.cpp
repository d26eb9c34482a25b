#include "densitycp/changepoint.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "densitycp/errors.hpp"

namespace densitycp {

namespace {

constexpr double kCutSlack = 1e-9;

std::size_t fraction_to_cut(std::size_t n, double k) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(n) * k + kCutSlack));
}

void check_cut_parameter(double c) {
  if (!(c > 0.0 && c < 0.5)) {
    std::ostringstream msg;
    msg << "cut parameter " << c << " outside (0, 1/2)";
    throw ParameterError(msg.str());
  }
}

// Rows r_i = q_i - mu_hat, stored contiguously, plus ||r_i||^2 / L.
struct CenteredRows {
  std::size_t n;
  std::size_t levels;
  std::vector<double> rows;
  std::vector<double> sq_norms;

  CenteredRows(const DensitySequence& seq, const QuantileFunction& centre)
      : n(seq.size()), levels(centre.level_count()), rows(n * levels), sq_norms(n) {
    const auto mu = centre.values();
    for (std::size_t i = 0; i < n; ++i) {
      const auto q = seq[i].values();
      double ss = 0.0;
      for (std::size_t l = 0; l < levels; ++l) {
        const double r = q[l] - mu[l];
        rows[i * levels + l] = r;
        ss += r * r;
      }
      sq_norms[i] = ss / static_cast<double>(levels);
    }
  }
};

// Scan over cuts using prefix sums of the rows taken in `order`.
class PrefixScanner {
public:
  PrefixScanner(const CenteredRows& data, std::span<const std::size_t> order)
      : data_(data), prefix_((data.n + 1) * data.levels, 0.0), sq_prefix_(data.n + 1, 0.0) {
    const std::size_t levels = data.levels;
    for (std::size_t i = 0; i < data.n; ++i) {
      const std::size_t src = order[i];
      const double* row = &data.rows[src * levels];
      const double* prev = &prefix_[i * levels];
      double* next = &prefix_[(i + 1) * levels];
      for (std::size_t l = 0; l < levels; ++l) next[l] = prev[l] + row[l];
      sq_prefix_[i + 1] = sq_prefix_[i] + data.sq_norms[src];
    }
  }

  SegmentStats at(std::size_t cut) const {
    const std::size_t n = data_.n;
    const std::size_t levels = data_.levels;
    const auto n1 = static_cast<double>(cut);
    const auto n2 = static_cast<double>(n - cut);
    const double* head = &prefix_[cut * levels];
    const double* total = &prefix_[n * levels];
    double norm1 = 0.0;
    double norm2 = 0.0;
    double gap = 0.0;
    for (std::size_t l = 0; l < levels; ++l) {
      const double a1 = head[l] / n1;
      const double a2 = (total[l] - head[l]) / n2;
      norm1 += a1 * a1;
      norm2 += a2 * a2;
      gap += (a1 - a2) * (a1 - a2);
    }
    const auto scale = static_cast<double>(levels);
    norm1 /= scale;
    norm2 /= scale;
    gap /= scale;
    // V about the own mean = mean squared distance to mu_hat minus the squared
    // distance from the segment mean to mu_hat. V about the other segment's
    // mean adds the squared distance between the two segment means.
    const double v1 = std::max(0.0, sq_prefix_[cut] / n1 - norm1);
    const double v2 = std::max(0.0, (sq_prefix_[n] - sq_prefix_[cut]) / n2 - norm2);
    return SegmentStats{cut, n1 / static_cast<double>(n), v1, v2, v1 + gap, v2 + gap};
  }

private:
  const CenteredRows& data_;
  std::vector<double> prefix_;
  std::vector<double> sq_prefix_;
};

void fill_scan(ScanResult& result, const PrefixScanner& scanner, CutRange range, std::size_t n,
               double sigma_sq) {
  result.curve.clear();
  result.curve.reserve(range.last - range.first + 1);
  result.max_stat = -1.0;
  for (std::size_t m = range.first; m <= range.last; ++m) {
    const double k = static_cast<double>(m) / static_cast<double>(n);
    const double stat = result.degenerate ? 0.0 : scan_value(scanner.at(m), sigma_sq);
    result.curve.push_back({m, k, stat});
    if (stat > result.max_stat) {
      result.max_stat = stat;
      result.k_hat = k;
      result.tau_hat = m;
    }
  }
}

double max_over_cuts(const PrefixScanner& scanner, CutRange range, double sigma_sq) {
  double best = 0.0;
  for (std::size_t m = range.first; m <= range.last; ++m) best = std::max(best, scan_value(scanner.at(m), sigma_sq));
  return best;
}

} // namespace

DensitySequence::DensitySequence(std::vector<QuantileFunction> items) : items_(std::move(items)) {
  if (items_.empty()) throw ParameterError("density sequence is empty");
  for (const auto& q : items_) {
    if (q.level_count() != items_.front().level_count()) {
      throw ParameterError("density sequence mixes level grids");
    }
  }
}

DensitySequence DensitySequence::reversed() const {
  return DensitySequence(std::vector<QuantileFunction>(items_.rbegin(), items_.rend()));
}

DensitySequence DensitySequence::permuted(std::span<const std::size_t> order) const {
  if (order.size() != items_.size()) throw ParameterError("permutation length differs from sequence length");
  std::vector<QuantileFunction> out;
  out.reserve(order.size());
  for (std::size_t i : order) out.push_back(items_.at(i));
  return DensitySequence(std::move(out));
}

CutRange cut_range(std::size_t n, double cut) {
  check_cut_parameter(cut);
  const double nc = static_cast<double>(n) * cut;
  if (nc < 2.0 - kCutSlack) {
    std::ostringstream msg;
    msg << "n * c = " << nc << " is below 2; need a longer sequence or a larger cut parameter";
    throw ParameterError(msg.str());
  }
  const auto first = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(nc - kCutSlack)));
  const auto last = std::min<std::size_t>(
      n - 1, static_cast<std::size_t>(std::floor(static_cast<double>(n) * (1.0 - cut) + kCutSlack)));
  if (first > last) throw ParameterError("cut interval contains no admissible cut");
  return {first, last};
}

SegmentStats segment_stats(const DensitySequence& seq, std::size_t cut, double c) {
  check_cut_parameter(c);
  const std::size_t n = seq.size();
  const double k = static_cast<double>(cut) / static_cast<double>(n);
  if (cut < 1 || cut >= n || k < c - kCutSlack || k > 1.0 - c + kCutSlack) {
    std::ostringstream msg;
    msg << "cut " << cut << " of " << n << " (k = " << k << ") outside [" << c << ", " << 1.0 - c << "]";
    throw ParameterError(msg.str());
  }
  const auto items = seq.items();
  const auto first = items.subspan(0, cut);
  const auto second = items.subspan(cut);
  const QuantileFunction mu1 = frechet_mean(first);
  const QuantileFunction mu2 = frechet_mean(second);
  return SegmentStats{cut,
                      k,
                      frechet_variance(first, mu1),
                      frechet_variance(second, mu2),
                      frechet_variance(first, mu2),
                      frechet_variance(second, mu1)};
}

SegmentStats segment_stats_at(const DensitySequence& seq, double k, double c) {
  return segment_stats(seq, fraction_to_cut(seq.size(), k), c);
}

PooledScale pooled_scale(const DensitySequence& seq, SigmaFormula formula, double sigma_floor) {
  if (seq.size() < 2) throw ParameterError("pooled scale needs at least two items");
  if (!(sigma_floor >= 0.0)) throw ParameterError("sigma floor must be nonnegative");
  QuantileFunction mu = frechet_mean(seq.items());
  double second = 0.0;
  double fourth = 0.0;
  for (const auto& q : seq.items()) {
    const double d2 = w2_distance_squared(q, mu);
    second += d2;
    fourth += d2 * d2;
  }
  const auto n = static_cast<double>(seq.size());
  const double v = second / n;
  const double m4 = fourth / n;
  const double sigma_sq = formula == SigmaFormula::Literal ? m4 - v : m4 - v * v;
  const bool degenerate = !(sigma_sq > sigma_floor);
  return PooledScale{std::move(mu), v, m4, sigma_sq, degenerate};
}

double scan_value(const SegmentStats& s, double sigma_sq) {
  const double variance_gap = s.v1 - s.v2;
  const double contamination = (s.v1c - s.v1) + (s.v2c - s.v2);
  return s.k * (1.0 - s.k) / sigma_sq * (variance_gap * variance_gap + contamination * contamination);
}

ScanResult scan_statistic(const DensitySequence& seq, const ScanOptions& options) {
  const std::size_t n = seq.size();
  const CutRange range = cut_range(n, options.cut);
  const PooledScale scale = pooled_scale(seq, options.sigma, options.sigma_floor);

  ScanResult result;
  result.sigma_sq = scale.sigma_sq;
  result.degenerate = scale.degenerate;

  const CenteredRows rows(seq, scale.mu_hat);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const PrefixScanner scanner(rows, order);
  fill_scan(result, scanner, range, n, scale.sigma_sq);
  return result;
}

double permutation_pvalue(const DensitySequence& seq, const ScanOptions& options, std::size_t permutations,
                          std::uint64_t seed) {
  if (permutations < 1) throw ParameterError("permutation count must be at least 1");
  const std::size_t n = seq.size();
  const CutRange range = cut_range(n, options.cut);
  const PooledScale scale = pooled_scale(seq, options.sigma, options.sigma_floor);
  if (scale.degenerate) return 1.0;

  // The pooled mean and scale are invariant under reordering, so the centred
  // rows are shared by every replicate.
  const CenteredRows rows(seq, scale.mu_hat);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const double observed = max_over_cuts(PrefixScanner(rows, order), range, scale.sigma_sq);

  std::size_t exceed = 0;
  for (std::size_t b = 0; b < permutations; ++b) {
    std::seed_seq seq_seed{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                           static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    std::mt19937_64 engine(seq_seed);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), engine);
    if (max_over_cuts(PrefixScanner(rows, order), range, scale.sigma_sq) >= observed) ++exceed;
  }
  return static_cast<double>(1 + exceed) / static_cast<double>(permutations + 1);
}

ScanResult detect_change_point(const DensitySequence& seq, const ScanOptions& options,
                               std::size_t permutations, std::uint64_t seed) {
  ScanResult result = scan_statistic(seq, options);
  result.permutations = permutations;
  result.seed = seed;
  if (permutations > 0) {
    result.p_value = result.degenerate ? 1.0 : permutation_pvalue(seq, options, permutations, seed);
  }
  return result;
}

} // namespace densitycp
