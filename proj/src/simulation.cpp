#include "densitycp/simulation.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "densitycp/errors.hpp"

namespace densitycp {

namespace {

double parse_number(std::string_view text, std::string_view whole) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ParameterError("bad family parameter in '" + std::string(whole) + "'");
  }
  return value;
}

} // namespace

Family Family::parse(std::string_view text) {
  const auto colon = text.find(':');
  const auto comma = text.find(',', colon == std::string_view::npos ? 0 : colon);
  if (colon == std::string_view::npos || comma == std::string_view::npos) {
    throw ParameterError("family must look like beta:a,b or uniform:lo,hi, got '" + std::string(text) + "'");
  }
  const auto name = text.substr(0, colon);
  const double first = parse_number(text.substr(colon + 1, comma - colon - 1), text);
  const double second = parse_number(text.substr(comma + 1), text);
  if (name == "beta") return beta(first, second);
  if (name == "uniform") return uniform(first, second);
  throw ParameterError("unknown family '" + std::string(name) + "'");
}

Family Family::beta(double a, double b) {
  if (!(a > 0.0 && b > 0.0 && std::isfinite(a) && std::isfinite(b))) {
    throw ParameterError("beta shape parameters must be positive");
  }
  return Family(Kind::Beta, a, b);
}

Family Family::uniform(double lo, double hi) {
  if (!(lo >= 0.0 && hi <= 1.0 && lo < hi)) throw ParameterError("uniform bounds must satisfy 0 <= lo < hi <= 1");
  return Family(Kind::Uniform, lo, hi);
}

std::string Family::describe() const {
  std::ostringstream out;
  out << (kind_ == Kind::Beta ? "beta:" : "uniform:") << first_ << ',' << second_;
  return out.str();
}

double Family::draw(std::mt19937_64& engine) const {
  if (kind_ == Kind::Uniform) return std::uniform_real_distribution<double>(first_, second_)(engine);
  const double x = std::gamma_distribution<double>(first_, 1.0)(engine);
  const double y = std::gamma_distribution<double>(second_, 1.0)(engine);
  return x / (x + y);
}

void validate(const SimulationSpec& spec) {
  if (spec.draws < 2) throw ParameterError("need at least two draws per day");
  if (spec.days < 4 || spec.change_index < 2 || spec.change_index + 2 > spec.days) {
    throw ParameterError("change index " + std::to_string(spec.change_index) + " must lie in [2, " +
                         std::to_string(spec.days >= 2 ? spec.days - 2 : 0) + "]");
  }
}

std::uint64_t replicate_seed(std::uint64_t base, std::uint64_t replicate) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(replicate), static_cast<std::uint32_t>(replicate >> 32)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

AlignedPanel simulate_panel(const SimulationSpec& spec, std::uint64_t seed) {
  validate(spec);
  std::mt19937_64 engine(seed);
  AlignedPanel panel;
  panel.window = spec.days;
  panel.rates.assign(spec.draws * spec.days, 0.0);
  for (std::size_t i = 0; i < spec.draws; ++i) {
    char label[32];
    std::snprintf(label, sizeof(label), "unit_%03zu", i + 1);
    panel.countries.push_back({label, "Synthetic", std::nullopt});
  }
  // Day-major draw order, so a day's sample does not depend on later days.
  for (std::size_t j = 0; j < spec.days; ++j) {
    const Family& family = j < spec.change_index ? spec.before : spec.after;
    for (std::size_t i = 0; i < spec.draws; ++i) panel.rates[i * spec.days + j] = family.draw(engine);
  }
  return panel;
}

} // namespace densitycp
