#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace perfloss {

enum class MfShape { kTriangular, kTrapezoidal };

/// Piecewise-linear membership function.
///
/// Triangular (a, b, c) peaks at b. Trapezoidal (a, b, c, d) has its plateau on
/// [b, c]. A trapezoid with a == b is a left shoulder (degree 1 for every
/// x <= c); with c == d it is a right shoulder. Triangles have no shoulders.
class MembershipFunction {
 public:
  static MembershipFunction triangular(double a, double b, double c);
  static MembershipFunction trapezoidal(double a, double b, double c, double d);

  MfShape shape() const noexcept { return shape_; }
  std::span<const double> breakpoints() const noexcept {
    return {points_.data(), shape_ == MfShape::kTriangular ? 3u : 4u};
  }
  bool left_shoulder() const noexcept;
  bool right_shoulder() const noexcept;

  double operator()(double x) const noexcept;

  /// Largest absolute slope of the piecewise-linear graph (0 for flat MFs).
  double max_slope() const noexcept;

  bool operator==(const MembershipFunction&) const = default;

 private:
  MembershipFunction(MfShape shape, std::array<double, 4> points);

  MfShape shape_;
  std::array<double, 4> points_;
};

double eval_mf(const MembershipFunction& mf, double x) noexcept;

struct Term {
  std::string label;
  MembershipFunction mf;

  bool operator==(const Term&) const = default;
};

struct Fuzzified {
  std::vector<double> degrees;
  double value = 0.0;  // the abscissa actually evaluated, after clamping
  bool clamped = false;
};

/// Ordered set of labelled membership functions over one physical variable.
/// Terms are stored in domain order (left to right).
class FuzzyPartition {
 public:
  FuzzyPartition(std::string variable, std::string unit, double lo, double hi,
                 std::vector<Term> terms);

  const std::string& variable() const noexcept { return variable_; }
  const std::string& unit() const noexcept { return unit_; }
  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }
  double width() const noexcept { return hi_ - lo_; }
  std::size_t size() const noexcept { return terms_.size(); }
  const std::vector<Term>& terms() const noexcept { return terms_; }
  const Term& term(std::size_t i) const { return terms_.at(i); }
  std::optional<std::size_t> index_of(std::string_view label) const;

  double clamp(double x) const noexcept;

  bool operator==(const FuzzyPartition&) const = default;

 private:
  std::string variable_;
  std::string unit_;
  double lo_;
  double hi_;
  std::vector<Term> terms_;
};

/// Layer 1. Out-of-domain inputs are clamped and flagged.
Fuzzified fuzzify(const FuzzyPartition& partition, double x);

/// Expert anchor for one term: a nominal range, a single peak, or a
/// threshold that extends to the domain edge.
struct Anchor {
  enum class Kind { kPlateau, kPeak, kAtLeast, kAtMost };

  std::string label;
  Kind kind = Kind::kPeak;
  double lo = 0.0;
  double hi = 0.0;

  static Anchor plateau(std::string label, double lo, double hi);
  static Anchor peak(std::string label, double at);
  static Anchor at_least(std::string label, double threshold);
  static Anchor at_most(std::string label, double threshold);
};

/// Builds a strict partition from anchors listed in severity order. The
/// listed order must be monotone along the axis, either ascending or
/// descending; descending sets (e.g. roughness that degrades downward) are
/// mirrored so the stored terms stay in domain order.
FuzzyPartition build_partition_from_anchors(std::string variable, std::string unit,
                                            double lo, double hi,
                                            std::span<const Anchor> anchors);

struct PartitionDiagnostics {
  double max_deviation = 0.0;  // max |sum mu - 1| over the grid
  double worst_x = 0.0;
  bool degrees_in_range = true;
  std::size_t samples = 0;
  bool passed = false;
};

PartitionDiagnostics validate_strict_partition(const FuzzyPartition& partition,
                                               std::size_t grid_points = 1001,
                                               double tolerance = 1e-9);

/// Shared-knot view of a strict chain partition: term i's falling edge is
/// term i+1's rising edge, so moving a knot keeps the partition strict.
///
/// Knots equal to a domain endpoint are fixed. A triangular peak is a single
/// knot shared by the two edges that meet there.
class KnotChain {
 public:
  /// nullopt when the partition is not a left-shoulder / edge-sharing /
  /// right-shoulder chain.
  static std::optional<KnotChain> from_partition(const FuzzyPartition& partition);

  const std::vector<double>& knots() const noexcept { return knots_; }
  const std::vector<bool>& fixed() const noexcept { return fixed_; }
  std::size_t transitions() const noexcept { return start_.size(); }
  std::size_t start_knot(std::size_t t) const { return start_.at(t); }
  std::size_t end_knot(std::size_t t) const { return end_.at(t); }
  std::size_t free_count() const noexcept;

  /// Free knot values in ascending order.
  std::vector<double> free_values() const;
  /// Replaces free knots, then restores ordering with a minimum gap of
  /// min_gap_fraction * domain width.
  void set_free_values(std::span<const double> values, double min_gap_fraction = 1e-6);

  FuzzyPartition apply(const FuzzyPartition& base) const;

  /// d mu_term / d knot at x, row-major [term][free knot]. Inside a ramp the
  /// region is taken as [start, end), i.e. the right-derivative convention.
  std::vector<double> membership_gradient(double x) const;

 private:
  double lo_ = 0.0;
  double hi_ = 0.0;
  std::size_t terms_ = 0;
  std::vector<double> knots_;
  std::vector<bool> fixed_;
  std::vector<std::size_t> start_;
  std::vector<std::size_t> end_;
};

}  // namespace perfloss
