#include "perfloss/fuzzy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "perfloss/error.hpp"

namespace perfloss {

namespace {

constexpr std::size_t kNoIndex = std::numeric_limits<std::size_t>::max();

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

// (rise start, rise end, fall start, fall end)
std::array<double, 4> edges_of(const MembershipFunction& mf) {
  auto p = mf.breakpoints();
  if (mf.shape() == MfShape::kTriangular) return {p[0], p[1], p[1], p[2]};
  return {p[0], p[1], p[2], p[3]};
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

MembershipFunction::MembershipFunction(MfShape shape, std::array<double, 4> points)
    : shape_(shape), points_(points) {
  if (!all_finite(breakpoints()))
    throw Error(ErrorCode::kInvalidArgument, "membership breakpoints must be finite");
  if (!std::is_sorted(breakpoints().begin(), breakpoints().end()))
    throw Error(ErrorCode::kInvalidArgument, "membership breakpoints must be non-decreasing");
}

MembershipFunction MembershipFunction::triangular(double a, double b, double c) {
  return MembershipFunction(MfShape::kTriangular, {a, b, c, c});
}

MembershipFunction MembershipFunction::trapezoidal(double a, double b, double c, double d) {
  return MembershipFunction(MfShape::kTrapezoidal, {a, b, c, d});
}

bool MembershipFunction::left_shoulder() const noexcept {
  return shape_ == MfShape::kTrapezoidal && points_[0] == points_[1];
}

bool MembershipFunction::right_shoulder() const noexcept {
  return shape_ == MfShape::kTrapezoidal && points_[2] == points_[3];
}

double MembershipFunction::operator()(double x) const noexcept {
  const double a = points_[0];
  const double b = points_[1];
  if (shape_ == MfShape::kTriangular) {
    const double c = points_[2];
    if (x < a || x > c) return 0.0;
    if (x < b) return (x - a) / (b - a);
    if (x == b) return 1.0;
    if (x < c) return (c - x) / (c - b);
    return 0.0;
  }
  const double c = points_[2];
  const double d = points_[3];
  if (x < a) return a == b ? 1.0 : 0.0;
  if (x > d) return c == d ? 1.0 : 0.0;
  if (x < b) return (x - a) / (b - a);
  if (x <= c) return 1.0;
  if (x < d) return (d - x) / (d - c);
  return 0.0;
}

double MembershipFunction::max_slope() const noexcept {
  auto e = edges_of(*this);
  double slope = 0.0;
  if (e[1] > e[0]) slope = std::max(slope, 1.0 / (e[1] - e[0]));
  if (e[3] > e[2]) slope = std::max(slope, 1.0 / (e[3] - e[2]));
  return slope;
}

double eval_mf(const MembershipFunction& mf, double x) noexcept { return mf(x); }

FuzzyPartition::FuzzyPartition(std::string variable, std::string unit, double lo, double hi,
                               std::vector<Term> terms)
    : variable_(std::move(variable)), unit_(std::move(unit)), lo_(lo), hi_(hi),
      terms_(std::move(terms)) {
  if (!std::isfinite(lo_) || !std::isfinite(hi_) || !(lo_ < hi_))
    throw Error(ErrorCode::kInvalidArgument,
                "partition '" + variable_ + "' needs a finite domain with lo < hi");
  if (terms_.empty())
    throw Error(ErrorCode::kInvalidArgument, "partition '" + variable_ + "' has no terms");
  std::set<std::string> seen;
  for (const auto& t : terms_) {
    if (t.label.empty())
      throw Error(ErrorCode::kInvalidArgument, "partition '" + variable_ + "' has an empty label");
    if (!seen.insert(t.label).second)
      throw Error(ErrorCode::kInvalidArgument,
                  "partition '" + variable_ + "' repeats label '" + t.label + "'");
  }
}

std::optional<std::size_t> FuzzyPartition::index_of(std::string_view label) const {
  for (std::size_t i = 0; i < terms_.size(); ++i)
    if (terms_[i].label == label) return i;
  return std::nullopt;
}

double FuzzyPartition::clamp(double x) const noexcept { return std::clamp(x, lo_, hi_); }

Fuzzified fuzzify(const FuzzyPartition& partition, double x) {
  Fuzzified out;
  out.value = partition.clamp(x);
  out.clamped = out.value != x;
  out.degrees.reserve(partition.size());
  for (const auto& t : partition.terms()) out.degrees.push_back(t.mf(out.value));
  return out;
}

Anchor Anchor::plateau(std::string label, double lo, double hi) {
  return {std::move(label), Kind::kPlateau, lo, hi};
}
Anchor Anchor::peak(std::string label, double at) { return {std::move(label), Kind::kPeak, at, at}; }
Anchor Anchor::at_least(std::string label, double threshold) {
  return {std::move(label), Kind::kAtLeast, threshold, threshold};
}
Anchor Anchor::at_most(std::string label, double threshold) {
  return {std::move(label), Kind::kAtMost, threshold, threshold};
}

FuzzyPartition build_partition_from_anchors(std::string variable, std::string unit, double lo,
                                            double hi, std::span<const Anchor> anchors) {
  if (anchors.empty())
    throw Error(ErrorCode::kInvalidArgument, "partition '" + variable + "' has no anchors");
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
    throw Error(ErrorCode::kInvalidArgument,
                "partition '" + variable + "' needs a finite domain with lo < hi");

  struct Core {
    std::string label;
    double lo;
    double hi;
  };
  std::vector<Core> cores;
  for (const auto& a : anchors) {
    if (!std::isfinite(a.lo) || !std::isfinite(a.hi))
      throw Error(ErrorCode::kInvalidArgument, "anchor '" + a.label + "' is not finite");
    Core c{a.label, a.lo, a.hi};
    switch (a.kind) {
      case Anchor::Kind::kPlateau:
        if (a.lo > a.hi)
          throw Error(ErrorCode::kInvalidArgument,
                      "plateau of '" + a.label + "' has lo > hi");
        break;
      case Anchor::Kind::kPeak: break;
      case Anchor::Kind::kAtLeast: c.hi = hi; break;
      case Anchor::Kind::kAtMost: c.lo = lo; break;
    }
    if (c.lo < lo || c.hi > hi)
      throw Error(ErrorCode::kInvalidArgument, "anchor '" + a.label + "' of '" + variable +
                                                   "' lies outside [" + fmt(lo) + ", " +
                                                   fmt(hi) + "]");
    cores.push_back(std::move(c));
  }

  auto mid = [](const Core& c) { return 0.5 * (c.lo + c.hi); };
  if (cores.size() >= 2 && mid(cores[1]) < mid(cores[0]))
    std::reverse(cores.begin(), cores.end());
  for (std::size_t i = 0; i + 1 < cores.size(); ++i) {
    if (mid(cores[i + 1]) <= mid(cores[i]))
      throw Error(ErrorCode::kUnorderedAnchors,
                  "'" + cores[i].label + "' and '" + cores[i + 1].label + "' of '" + variable +
                      "' break the monotone order of the listed terms");
    if (cores[i + 1].lo <= cores[i].hi)
      throw Error(ErrorCode::kOverlappingAnchors,
                  "'" + cores[i].label + "' [" + fmt(cores[i].lo) + ", " + fmt(cores[i].hi) +
                      "] meets '" + cores[i + 1].label + "' [" + fmt(cores[i + 1].lo) + ", " +
                      fmt(cores[i + 1].hi) + "] in '" + variable + "'");
  }
  cores.front().lo = lo;
  cores.back().hi = hi;

  const std::size_t n = cores.size();
  std::vector<Term> terms;
  terms.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double rise_start = i == 0 ? lo : cores[i - 1].hi;
    const double fall_end = i + 1 == n ? hi : cores[i + 1].lo;
    const bool interior = i > 0 && i + 1 < n;
    if (interior && cores[i].lo == cores[i].hi)
      terms.push_back({cores[i].label,
                       MembershipFunction::triangular(rise_start, cores[i].lo, fall_end)});
    else
      terms.push_back({cores[i].label, MembershipFunction::trapezoidal(
                                           i == 0 ? lo : rise_start, cores[i].lo, cores[i].hi,
                                           i + 1 == n ? hi : fall_end)});
  }
  return FuzzyPartition(std::move(variable), std::move(unit), lo, hi, std::move(terms));
}

PartitionDiagnostics validate_strict_partition(const FuzzyPartition& partition,
                                               std::size_t grid_points, double tolerance) {
  PartitionDiagnostics d;
  grid_points = std::max<std::size_t>(grid_points, 2);
  d.samples = grid_points;
  const double step = partition.width() / static_cast<double>(grid_points - 1);
  for (std::size_t i = 0; i < grid_points; ++i) {
    const double x = i + 1 == grid_points ? partition.hi() : partition.lo() + step * i;
    double sum = 0.0;
    for (const auto& t : partition.terms()) {
      const double mu = t.mf(x);
      if (!(mu >= 0.0 && mu <= 1.0)) d.degrees_in_range = false;
      sum += mu;
    }
    const double dev = std::abs(sum - 1.0);
    if (dev > d.max_deviation) {
      d.max_deviation = dev;
      d.worst_x = x;
    }
  }
  d.passed = d.degrees_in_range && d.max_deviation <= tolerance;
  return d;
}

std::optional<KnotChain> KnotChain::from_partition(const FuzzyPartition& partition) {
  const auto& terms = partition.terms();
  const std::size_t n = terms.size();
  KnotChain chain;
  chain.lo_ = partition.lo();
  chain.hi_ = partition.hi();
  chain.terms_ = n;

  std::vector<std::array<double, 4>> e;
  for (const auto& t : terms) e.push_back(edges_of(t.mf));
  // Outer edges must be shoulders that cover the domain ends.
  if (e.front()[0] != e.front()[1] || e.front()[1] > chain.lo_) return std::nullopt;
  if (e.back()[2] != e.back()[3] || e.back()[2] < chain.hi_) return std::nullopt;
  if (n == 1) return chain;

  std::vector<double> sequence;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double s = e[i][2];
    const double f = e[i][3];
    if (s != e[i + 1][0] || f != e[i + 1][1]) return std::nullopt;
    if (!(f > s)) return std::nullopt;
    if (s < chain.lo_ || f > chain.hi_) return std::nullopt;
    sequence.push_back(s);
    sequence.push_back(f);
  }
  if (!std::is_sorted(sequence.begin(), sequence.end())) return std::nullopt;

  for (std::size_t i = 0; i < sequence.size(); ++i) {
    if (chain.knots_.empty() || sequence[i] != chain.knots_.back()) {
      chain.knots_.push_back(sequence[i]);
      chain.fixed_.push_back(sequence[i] <= chain.lo_ || sequence[i] >= chain.hi_);
    }
    const std::size_t idx = chain.knots_.size() - 1;
    if (i % 2 == 0)
      chain.start_.push_back(idx);
    else
      chain.end_.push_back(idx);
  }
  return chain;
}

std::size_t KnotChain::free_count() const noexcept {
  return static_cast<std::size_t>(std::count(fixed_.begin(), fixed_.end(), false));
}

std::vector<double> KnotChain::free_values() const {
  std::vector<double> out;
  for (std::size_t i = 0; i < knots_.size(); ++i)
    if (!fixed_[i]) out.push_back(knots_[i]);
  return out;
}

void KnotChain::set_free_values(std::span<const double> values, double min_gap_fraction) {
  if (values.size() != free_count())
    throw Error(ErrorCode::kInvalidArgument, "knot update has the wrong length");
  std::size_t j = 0;
  for (std::size_t i = 0; i < knots_.size(); ++i)
    if (!fixed_[i]) knots_[i] = values[j++];

  const double gap = min_gap_fraction * (hi_ - lo_);
  const std::size_t k = knots_.size();
  for (std::size_t i = 0; i < k; ++i) {
    if (fixed_[i]) continue;
    const double floor = (i == 0 ? lo_ : knots_[i - 1]) + gap;
    knots_[i] = std::max(knots_[i], floor);
  }
  for (std::size_t r = k; r-- > 0;) {
    if (fixed_[r]) continue;
    const double ceiling = (r + 1 == k ? hi_ : knots_[r + 1]) - gap;
    knots_[r] = std::min(knots_[r], ceiling);
  }
}

FuzzyPartition KnotChain::apply(const FuzzyPartition& base) const {
  std::vector<Term> terms;
  const std::size_t n = terms_;
  for (std::size_t i = 0; i < n; ++i) {
    const double rs = i == 0 ? lo_ : knots_[start_[i - 1]];
    const double re = i == 0 ? lo_ : knots_[end_[i - 1]];
    const double fs = i + 1 == n ? hi_ : knots_[start_[i]];
    const double fe = i + 1 == n ? hi_ : knots_[end_[i]];
    const bool interior = i > 0 && i + 1 < n;
    const std::string& label = base.term(i).label;
    if (interior && re == fs)
      terms.push_back({label, MembershipFunction::triangular(rs, re, fe)});
    else
      terms.push_back({label, MembershipFunction::trapezoidal(rs, re, fs, fe)});
  }
  return FuzzyPartition(base.variable(), base.unit(), base.lo(), base.hi(), std::move(terms));
}

std::vector<double> KnotChain::membership_gradient(double x) const {
  const std::size_t nfree = free_count();
  std::vector<double> grad(terms_ * nfree, 0.0);
  std::vector<std::size_t> free_index(knots_.size(), kNoIndex);
  for (std::size_t i = 0, j = 0; i < knots_.size(); ++i)
    if (!fixed_[i]) free_index[i] = j++;

  x = std::clamp(x, lo_, hi_);
  for (std::size_t t = 0; t < start_.size(); ++t) {
    const double s = knots_[start_[t]];
    const double e = knots_[end_[t]];
    if (!(s <= x && x < e)) continue;
    const double w2 = (e - s) * (e - s);
    const double d_start = (x - e) / w2;   // d(rising)/d start
    const double d_end = -(x - s) / w2;    // d(rising)/d end
    if (const auto fi = free_index[start_[t]]; fi != kNoIndex) {
      grad[(t + 1) * nfree + fi] += d_start;
      grad[t * nfree + fi] -= d_start;
    }
    if (const auto fi = free_index[end_[t]]; fi != kNoIndex) {
      grad[(t + 1) * nfree + fi] += d_end;
      grad[t * nfree + fi] -= d_end;
    }
  }
  return grad;
}

}  // namespace perfloss
