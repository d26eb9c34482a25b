#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "densitycp/data_pipeline.hpp"

namespace densitycp {

/// A parametric family on [0, 1]: `beta:a,b` or `uniform:lo,hi`.
class Family {
public:
  enum class Kind { Beta, Uniform };

  /// Throws ParameterError for unknown names or invalid parameters.
  static Family parse(std::string_view text);
  static Family beta(double a, double b);
  static Family uniform(double lo, double hi);

  Kind kind() const { return kind_; }
  double first() const { return first_; }
  double second() const { return second_; }
  std::string describe() const;

  double draw(std::mt19937_64& engine) const;

  bool operator==(const Family&) const = default;

private:
  Family(Kind kind, double first, double second) : kind_(kind), first_(first), second_(second) {}

  Kind kind_;
  double first_;
  double second_;
};

struct SimulationSpec {
  Family before = Family::beta(2.0, 8.0);
  Family after = Family::beta(2.0, 5.0);
  /// Last day (1-based) drawn from `before`.
  std::size_t change_index = 104;
  std::size_t draws = 189;
  std::size_t days = 150;
};

/// Throws ParameterError unless 2 <= change_index <= days - 2 (so some cut
/// interval admits the change) and draws >= 2.
void validate(const SimulationSpec& spec);

/// Panel with `draws` rows and `days` columns; column j holds i.i.d. draws
/// from `before` if j <= change_index, else from `after`. Rows are labelled
/// unit_001... with continent "Synthetic".
AlignedPanel simulate_panel(const SimulationSpec& spec, std::uint64_t seed);

/// Seed of replicate r derived from a base seed.
std::uint64_t replicate_seed(std::uint64_t base, std::uint64_t replicate);

} // namespace densitycp
