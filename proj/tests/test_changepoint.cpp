#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "densitycp/changepoint.hpp"
#include "densitycp/errors.hpp"
#include "densitycp/simulation.hpp"
#include "test_support.hpp"

using namespace densitycp;
using namespace densitycp::testing;

namespace {

// Independent definitional helpers: plain loops over quantile values.
std::vector<double> mean_values(std::span<const QuantileFunction> qs) {
  std::vector<double> m(qs.front().level_count(), 0.0);
  for (const auto& q : qs)
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += q.values()[i];
  for (double& x : m) x /= static_cast<double>(qs.size());
  return m;
}

double sq_distance(const QuantileFunction& q, const std::vector<double>& center) {
  double s = 0.0;
  for (std::size_t i = 0; i < center.size(); ++i) {
    const double d = q.values()[i] - center[i];
    s += d * d;
  }
  return s / static_cast<double>(center.size());
}

double spread(std::span<const QuantileFunction> qs, const std::vector<double>& center) {
  double s = 0.0;
  for (const auto& q : qs) s += sq_distance(q, center);
  return s / static_cast<double>(qs.size());
}

DensitySequence random_sequence(std::mt19937_64& rng, std::size_t n, std::size_t levels = 200) {
  std::vector<QuantileFunction> items;
  for (std::size_t i = 0; i < n; ++i) items.push_back(random_quantile(rng, levels));
  return DensitySequence(std::move(items));
}

DensitySequence constant_sequence(std::size_t n) {
  return DensitySequence(std::vector<QuantileFunction>(n, uniform_quantile(0.1, 0.7, 100)));
}

bool within(double a, double b, double relative) { return std::abs(a - b) <= relative * std::max(1.0, std::abs(b)); }

} // namespace

TEST_CASE("cut_range covers [c, 1 - c] and rejects bad cuts") {
  const CutRange r = cut_range(150, 0.1);
  CHECK(r.first == 15);
  CHECK(r.last == 135);
  const CutRange odd = cut_range(47, 0.1);
  CHECK(odd.first == 5);
  CHECK(odd.last == 42);
  CHECK_THROWS_AS(cut_range(150, 0.0), ParameterError);
  CHECK_THROWS_AS(cut_range(150, 0.5), ParameterError);
  CHECK_THROWS_AS(cut_range(15, 0.1), ParameterError);  // n c < 2
}

TEST_CASE("segment_stats examples") {
  std::vector<QuantileFunction> items(4, uniform_quantile(0.0, 0.4));
  items.resize(8, uniform_quantile(0.2, 0.6));
  const DensitySequence seq(items);
  const SegmentStats s = segment_stats_at(seq, 0.5, 0.1);
  CHECK(s.cut == 4);
  CHECK(s.v1 == doctest::Approx(0.0));
  CHECK(s.v2 == doctest::Approx(0.0));
  CHECK(s.v1c == doctest::Approx(0.04).epsilon(1e-12));
  CHECK(s.v2c == doctest::Approx(0.04).epsilon(1e-12));

  const SegmentStats flat = segment_stats(constant_sequence(20), 10);
  CHECK(flat.v1 == 0.0);
  CHECK(flat.v2 == 0.0);
  CHECK(flat.v1c == 0.0);
  CHECK(flat.v2c == 0.0);

  const DensitySequence twenty = constant_sequence(20);
  CHECK_THROWS_AS(segment_stats(twenty, 1), ParameterError);
  CHECK_THROWS_AS(segment_stats(twenty, 19), ParameterError);
  CHECK_THROWS_AS(segment_stats_at(twenty, 0.05), ParameterError);
  CHECK_NOTHROW(segment_stats(twenty, 2));
  CHECK_NOTHROW(segment_stats(twenty, 18));
}

TEST_CASE("segment_stats matches the definition and contamination dominates") {
  std::mt19937_64 rng(12);
  for (int rep = 0; rep < 5; ++rep) {
    const DensitySequence seq = random_sequence(rng, 40);
    const auto items = seq.items();
    const CutRange range = cut_range(seq.size(), 0.1);
    for (std::size_t m = range.first; m <= range.last; ++m) {
      const auto first = items.subspan(0, m);
      const auto second = items.subspan(m);
      const auto mu1 = mean_values(first);
      const auto mu2 = mean_values(second);
      const SegmentStats s = segment_stats(seq, m);
      CHECK(s.k == doctest::Approx(static_cast<double>(m) / 40.0));
      CHECK(std::abs(s.v1 - spread(first, mu1)) <= 1e-9);
      CHECK(std::abs(s.v2 - spread(second, mu2)) <= 1e-9);
      CHECK(std::abs(s.v1c - spread(first, mu2)) <= 1e-9);
      CHECK(std::abs(s.v2c - spread(second, mu1)) <= 1e-9);
      CHECK(s.v1c >= s.v1 - 1e-9);
      CHECK(s.v2c >= s.v2 - 1e-9);
      CHECK(std::min({s.v1, s.v2, s.v1c, s.v2c}) >= 0.0);
    }
  }
}

TEST_CASE("pooled_scale examples") {
  const PooledScale flat = pooled_scale(constant_sequence(10));
  CHECK(flat.sigma_sq == 0.0);
  CHECK(flat.v_hat == 0.0);
  CHECK(flat.degenerate);

  // Two items at distance 0.1 from their mean.
  const DensitySequence pair(std::vector<QuantileFunction>{uniform_quantile(0.0, 0.4), uniform_quantile(0.2, 0.6)});
  const PooledScale s = pooled_scale(pair);
  CHECK(s.v_hat == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(s.fourth_moment == doctest::Approx(1e-4).epsilon(1e-10));
  CHECK(std::abs(s.sigma_sq) <= 1e-15);
  CHECK(s.degenerate);

  const PooledScale literal = pooled_scale(pair, SigmaFormula::Literal);
  CHECK(literal.sigma_sq == doctest::Approx(1e-4 - 0.01).epsilon(1e-10));
  CHECK(literal.degenerate);
}

TEST_CASE("pooled_scale matches the definition") {
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 10; ++rep) {
    const DensitySequence seq = random_sequence(rng, 30);
    const auto mu = mean_values(seq.items());
    double second = 0.0;
    double fourth = 0.0;
    for (const auto& q : seq.items()) {
      const double d2 = sq_distance(q, mu);
      second += d2;
      fourth += d2 * d2;
    }
    second /= 30.0;
    fourth /= 30.0;
    const PooledScale s = pooled_scale(seq);
    CHECK(std::abs(s.v_hat - second) <= 1e-12);
    CHECK(std::abs(s.fourth_moment - fourth) <= 1e-12);
    CHECK(std::abs(s.sigma_sq - (fourth - second * second)) <= 1e-12);
    CHECK(std::abs(pooled_scale(seq, SigmaFormula::Literal).sigma_sq - (fourth - second)) <= 1e-12);
    CHECK_FALSE(s.degenerate);
  }
}

TEST_CASE("constant sequence is degenerate with p = 1") {
  const DensitySequence seq = constant_sequence(30);
  const ScanResult r = detect_change_point(seq, ScanOptions{}, 50, 3);
  CHECK(r.degenerate);
  CHECK(r.max_stat == 0.0);
  for (const auto& p : r.curve) CHECK(p.statistic == 0.0);
  REQUIRE(r.p_value.has_value());
  CHECK(*r.p_value == 1.0);
  CHECK(permutation_pvalue(seq, ScanOptions{}, 10, 3) == 1.0);
}

TEST_CASE("scan agrees with segment_stats and pooled_scale") {
  std::mt19937_64 rng(8);
  for (auto formula : {SigmaFormula::VarianceOfSquares, SigmaFormula::Literal}) {
    for (int rep = 0; rep < 5; ++rep) {
      const DensitySequence seq = random_sequence(rng, 37);
      ScanOptions options;
      options.sigma = formula;
      const ScanResult r = scan_statistic(seq, options);
      const PooledScale scale = pooled_scale(seq, formula);
      if (scale.degenerate) continue;
      const CutRange range = cut_range(seq.size(), options.cut);
      REQUIRE(r.curve.size() == range.last - range.first + 1);
      std::size_t best = range.first;
      double best_value = -1.0;
      for (const ScanPoint& p : r.curve) {
        const double oracle = scan_value(segment_stats(seq, p.cut), scale.sigma_sq);
        CHECK(within(p.statistic, oracle, 1e-12));
        if (oracle > best_value) {
          best_value = oracle;
          best = p.cut;
        }
      }
      CHECK(r.tau_hat == best);
      CHECK(r.k_hat == doctest::Approx(static_cast<double>(best) / 37.0));
      CHECK(within(r.max_stat, best_value, 1e-12));
    }
  }
}

TEST_CASE("scan statistic is nonnegative and tau_hat stays in range") {
  std::mt19937_64 rng(99);
  for (int rep = 0; rep < 10; ++rep) {
    const DensitySequence seq = random_sequence(rng, 25 + rep);
    for (double c : {0.1, 0.2, 0.3}) {
      ScanOptions options;
      options.cut = c;
      const ScanResult r = scan_statistic(seq, options);
      for (const auto& p : r.curve) CHECK(p.statistic >= 0.0);
      const CutRange range = cut_range(seq.size(), c);
      CHECK(r.tau_hat >= range.first);
      CHECK(r.tau_hat <= range.last);
    }
  }
}

TEST_CASE("reversal symmetry") {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 5; ++rep) {
    const DensitySequence seq = random_sequence(rng, 50);
    const ScanResult forward = scan_statistic(seq);
    const ScanResult backward = scan_statistic(seq.reversed());
    for (const auto& p : forward.curve) {
      const auto it = std::ranges::find_if(backward.curve, [&](const ScanPoint& b) { return b.cut == 50 - p.cut; });
      REQUIRE(it != backward.curve.end());
      CHECK(std::abs(it->statistic - p.statistic) <= 1e-9 * std::max(1.0, p.statistic));
    }
    const auto mapped = static_cast<long>(50 - forward.tau_hat);
    CHECK(std::abs(static_cast<long>(backward.tau_hat) - mapped) <= 1);
  }
}

TEST_CASE("planted change is located and significant") {
  const DensitySequence seq = simulated_sequence(SimulationSpec{}, 20240601);
  const ScanResult r = detect_change_point(seq, ScanOptions{}, 200, 17);
  CHECK(r.tau_hat >= 101);
  CHECK(r.tau_hat <= 107);
  REQUIRE(r.p_value.has_value());
  CHECK(*r.p_value <= 0.01);
  CHECK(r.permutations == 200);
  CHECK(r.seed == 17);

  const ScanResult reversed = scan_statistic(seq.reversed());
  CHECK(std::abs(static_cast<long>(reversed.tau_hat) - static_cast<long>(150 - r.tau_hat)) <= 1);
}

TEST_CASE("detection is deterministic given the seed") {
  const DensitySequence seq = simulated_sequence(SimulationSpec{}, 5);
  const ScanResult a = detect_change_point(seq, ScanOptions{}, 30, 9);
  const ScanResult b = detect_change_point(seq, ScanOptions{}, 30, 9);
  CHECK(a.tau_hat == b.tau_hat);
  CHECK(a.max_stat == b.max_stat);
  CHECK(a.sigma_sq == b.sigma_sq);
  CHECK(a.p_value == b.p_value);
  REQUIRE(a.curve.size() == b.curve.size());
  for (std::size_t i = 0; i < a.curve.size(); ++i) CHECK(a.curve[i].statistic == b.curve[i].statistic);

  const ScanResult none = detect_change_point(seq, ScanOptions{}, 0, 9);
  CHECK_FALSE(none.p_value.has_value());
  CHECK_THROWS_AS(permutation_pvalue(seq, ScanOptions{}, 0, 9), ParameterError);
}

TEST_CASE("null sequences rarely reject at the 5% level") {
  SimulationSpec null_spec;
  null_spec.after = null_spec.before;
  int rejections = 0;
  for (std::uint64_t run = 0; run < 20; ++run) {
    const DensitySequence seq = simulated_sequence(null_spec, replicate_seed(777, run));
    const double p = permutation_pvalue(seq, ScanOptions{}, 200, run);
    CHECK(p > 0.0);
    CHECK(p <= 1.0);
    if (p <= 0.05) ++rejections;
  }
  CHECK(rejections <= 3);
}

TEST_CASE("sequence validation") {
  CHECK_THROWS_AS(DensitySequence({}), ParameterError);
  CHECK_THROWS_AS(DensitySequence({uniform_quantile(0, 1, 10), uniform_quantile(0, 1, 20)}), ParameterError);
  const DensitySequence seq({uniform_quantile(0, 0.1, 10), uniform_quantile(0, 0.2, 10), uniform_quantile(0, 0.3, 10)});
  const std::vector<std::size_t> order{2, 0, 1};
  const DensitySequence p = seq.permuted(order);
  CHECK(p[0] == seq[2]);
  CHECK(p[1] == seq[0]);
  CHECK(seq.reversed()[0] == seq[2]);
  CHECK_THROWS_AS(seq.permuted(std::vector<std::size_t>{0, 1}), ParameterError);
}
