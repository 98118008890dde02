#include <cmath>
#include <random>

#include "doctest.h"
#include "perfloss/error.hpp"
#include "perfloss/fuzzy.hpp"
#include "test_util.hpp"

using namespace perfloss;

TEST_CASE("triangular membership values") {
  const auto mf = MembershipFunction::triangular(0.5, 4.5, 8.5);
  CHECK(eval_mf(mf, 4.5) == 1.0);
  CHECK(eval_mf(mf, 0.5) == 0.0);
  // (8.5 - 6.5) / (8.5 - 4.5)
  CHECK(eval_mf(mf, 6.5) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(eval_mf(mf, 2.5) == doctest::Approx(0.5));
  CHECK(eval_mf(mf, -3) == 0.0);
  CHECK(eval_mf(mf, 100) == 0.0);
}

TEST_CASE("trapezoid shoulders") {
  const auto left = MembershipFunction::trapezoidal(0, 0, 2, 4);
  CHECK(left.left_shoulder());
  CHECK_FALSE(left.right_shoulder());
  CHECK(left(-10) == 1.0);
  CHECK(left(3) == doctest::Approx(0.5));
  const auto right = MembershipFunction::trapezoidal(6, 8, 10, 10);
  CHECK(right.right_shoulder());
  CHECK(right(50) == 1.0);
  CHECK(right(7) == doctest::Approx(0.5));
}

TEST_CASE("invalid breakpoints rejected") {
  CHECK_THROWS_AS(MembershipFunction::triangular(3, 2, 4), Error);
  CHECK_THROWS_AS(MembershipFunction::trapezoidal(0, 2, 1, 4), Error);
  CHECK_THROWS_AS(MembershipFunction::triangular(0, NAN, 1), Error);
}

TEST_CASE("belt partition fuzzification") {
  const auto p = testutil::belt_partition();
  REQUIRE(p.size() == 3);
  auto f = fuzzify(p, 0.25);
  CHECK(f.degrees == std::vector<double>{1, 0, 0});
  f = fuzzify(p, 8.5);
  CHECK(f.degrees == std::vector<double>{0, 0, 1});
  f = fuzzify(p, 2.5);
  CHECK(f.degrees[0] == doctest::Approx(0.5));
  CHECK(f.degrees[1] == doctest::Approx(0.5));
  CHECK(f.degrees[2] == 0.0);
  CHECK(f.degrees[0] + f.degrees[1] + f.degrees[2] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_FALSE(f.clamped);
}

TEST_CASE("out of domain input is clamped and flagged") {
  const auto p = testutil::belt_partition();
  const auto f = fuzzify(p, 20);
  CHECK(f.clamped);
  CHECK(f.value == 12);
  CHECK(f.degrees == std::vector<double>{0, 0, 1});
  CHECK(fuzzify(p, -1).degrees == std::vector<double>{1, 0, 0});
}

TEST_CASE("belt anchors give the expected shapes") {
  const auto p = testutil::belt_partition();
  CHECK(p.term(0).mf == MembershipFunction::trapezoidal(0, 0, 0.5, 4.5));
  CHECK(p.term(1).mf == MembershipFunction::triangular(0.5, 4.5, 8.5));
  CHECK(p.term(2).mf == MembershipFunction::trapezoidal(4.5, 8.5, 12, 12));
}

TEST_CASE("roller anchors are mirrored into domain order") {
  const auto p = testutil::roller_partition();
  CHECK(p.term(0).label == "Fail");
  CHECK(p.term(2).label == "OK");
  CHECK(p.term(0).mf == MembershipFunction::trapezoidal(0, 0, 3.2, 7.85));
  CHECK(p.term(1).mf == MembershipFunction::triangular(3.2, 7.85, 12.5));
  CHECK(p.term(2).mf == MembershipFunction::trapezoidal(7.85, 12.5, 16, 16));
  CHECK(fuzzify(p, 14).degrees == std::vector<double>{0, 0, 1});
  CHECK(validate_strict_partition(p).passed);
}

TEST_CASE("flow anchors give four terms with OK peaking at 100") {
  const auto p = testutil::flow_partition();
  REQUIRE(p.size() == 4);
  CHECK(p.term(2).label == "OK");
  CHECK(p.term(2).mf == MembershipFunction::triangular(50, 100, 200));
  CHECK(fuzzify(p, 100).degrees == std::vector<double>{0, 0, 1, 0});
  CHECK(fuzzify(p, 0).degrees == std::vector<double>{1, 0, 0, 0});
  CHECK(fuzzify(p, 200).degrees == std::vector<double>{0, 0, 0, 1});
  CHECK(fuzzify(p, 25).degrees[1] == doctest::Approx(0.5));
}

TEST_CASE("anchor errors") {
  using A = Anchor;
  std::vector<A> overlap{A::plateau("a", 0, 5), A::peak("b", 4), A::at_least("c", 8)};
  CHECK_THROWS_AS(build_partition_from_anchors("x", "", 0, 10, overlap), Error);
  std::vector<A> unordered{A::peak("a", 2), A::peak("b", 8), A::peak("c", 5)};
  try {
    build_partition_from_anchors("x", "", 0, 10, unordered);
    FAIL("expected an exception");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUnorderedAnchors);
  }
  std::vector<A> outside{A::peak("a", -1), A::peak("b", 5)};
  CHECK_THROWS_AS(build_partition_from_anchors("x", "", 0, 10, outside), Error);
  CHECK_THROWS_AS(build_partition_from_anchors("x", "", 0, 10, std::vector<A>{}), Error);
}

TEST_CASE("strict partition validation") {
  CHECK(validate_strict_partition(testutil::belt_partition()).max_deviation == 0.0);
  CHECK(validate_strict_partition(testutil::belt_partition()).passed);

  // Deg peak moved to 5.0 while the OK foot stays at 4.5.
  FuzzyPartition broken("length_raise", "mm", 0, 12,
                        {{"OK", MembershipFunction::trapezoidal(0, 0, 0.5, 4.5)},
                         {"Deg", MembershipFunction::triangular(0.5, 5.0, 8.5)},
                         {"Fail", MembershipFunction::trapezoidal(4.5, 8.5, 12, 12)}});
  const auto d = validate_strict_partition(broken);
  CHECK_FALSE(d.passed);
  CHECK(d.worst_x > 0.5);
  CHECK(d.worst_x < 8.5);
  CHECK(std::abs(fuzzify(broken, 4.75).degrees[0] + fuzzify(broken, 4.75).degrees[1] +
                 fuzzify(broken, 4.75).degrees[2] - 1.0) > 1e-3);

  FuzzyPartition single("x", "", 0, 10, {{"All", MembershipFunction::trapezoidal(0, 0, 10, 10)}});
  CHECK(validate_strict_partition(single).passed);
}

TEST_CASE("partition construction rejects bad domains and labels") {
  CHECK_THROWS_AS(FuzzyPartition("x", "", 5, 5, {{"a", MembershipFunction::trapezoidal(5, 5, 5, 5)}}), Error);
  CHECK_THROWS_AS(FuzzyPartition("x", "", 0, 1,
                                 {{"a", MembershipFunction::trapezoidal(0, 0, 0.4, 0.6)},
                                  {"a", MembershipFunction::trapezoidal(0.4, 0.6, 1, 1)}}),
                  Error);
  CHECK_THROWS_AS(FuzzyPartition("x", "", 0, 1, {}), Error);
}

TEST_CASE("membership functions are Lipschitz with their max slope") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-2, 14), step(0, 0.5);
  for (const auto& p : {testutil::belt_partition(), testutil::roller_partition()}) {
    for (const auto& t : p.terms()) {
      const double L = t.mf.max_slope();
      for (int i = 0; i < 2000; ++i) {
        const double x = u(rng), h = step(rng);
        CHECK(std::abs(t.mf(x) - t.mf(x + h)) <= L * h + 1e-12);
      }
    }
  }
}

namespace {

// Random consistent anchor set: cores separated by gaps, listed ascending or descending.
std::vector<Anchor> random_anchors(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_int_distribution<int> nterms(1, 6), kind(0, 1);
  const int n = nterms(rng);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> pts(2 * n);
  for (auto& p : pts) p = u(rng);
  std::sort(pts.begin(), pts.end());
  std::vector<Anchor> out;
  for (int i = 0; i < n; ++i) {
    double a = pts[2 * i], b = pts[2 * i + 1];
    const std::string label = "T" + std::to_string(i);
    if (i == 0 && n > 1 && kind(rng)) {
      out.push_back(Anchor::at_most(label, a));
    } else if (i == n - 1 && n > 1 && kind(rng)) {
      out.push_back(Anchor::at_least(label, b));
    } else if (kind(rng) && i > 0 && i < n - 1) {
      out.push_back(Anchor::peak(label, 0.5 * (a + b)));
    } else {
      out.push_back(Anchor::plateau(label, a, b));
    }
  }
  if (kind(rng)) std::reverse(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("randomized anchor sets always build strict partitions") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> lo_d(-100, 100), w_d(0.1, 500);
  int built = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const double lo = lo_d(rng), hi = lo + w_d(rng);
    const auto anchors = random_anchors(rng, lo, hi);
    FuzzyPartition p = [&] {
      try {
        return build_partition_from_anchors("x", "", lo, hi, anchors);
      } catch (const Error& e) {
        // ties from the random draw are the only acceptable failure
        CHECK((e.code() == ErrorCode::kOverlappingAnchors || e.code() == ErrorCode::kUnorderedAnchors));
        return FuzzyPartition("x", "", lo, hi, {{"All", MembershipFunction::trapezoidal(lo, lo, hi, hi)}});
      }
    }();
    ++built;
    const auto d = validate_strict_partition(p, 1001, 1e-9);
    CHECK_MESSAGE(d.passed, "trial " << trial << " deviation " << d.max_deviation);
  }
  CHECK(built == 1000);
}

TEST_CASE("knot chain of the belt partition") {
  const auto p = testutil::belt_partition();
  auto chain = KnotChain::from_partition(p);
  REQUIRE(chain.has_value());
  CHECK(chain->free_values() == std::vector<double>{0.5, 4.5, 8.5});
  CHECK(chain->apply(p) == p);
}

TEST_CASE("knot updates keep the partition strict and ordered") {
  const auto p = testutil::flow_partition();
  auto chain = KnotChain::from_partition(p);
  REQUIRE(chain.has_value());
  const auto free = chain->free_values();
  REQUIRE(free.size() == 2);
  // crossing request: knots must come back ordered and inside the domain
  chain->set_free_values(std::vector<double>{150, 20});
  const auto v = chain->free_values();
  CHECK(v[0] < v[1]);
  CHECK(v[0] > p.lo());
  CHECK(v[1] < p.hi());
  const auto moved = chain->apply(p);
  CHECK(validate_strict_partition(moved).passed);

  chain->set_free_values(std::vector<double>{-50, 500});
  const auto w = chain->free_values();
  CHECK(w[0] > p.lo());
  CHECK(w[1] < p.hi());
  CHECK(validate_strict_partition(chain->apply(p)).passed);
}

TEST_CASE("non-chain partitions have no knot view") {
  FuzzyPartition gap("x", "", 0, 10,
                     {{"a", MembershipFunction::trapezoidal(0, 0, 2, 4)}, {"b", MembershipFunction::trapezoidal(3, 6, 10, 10)}});
  CHECK_FALSE(KnotChain::from_partition(gap).has_value());
}

TEST_CASE("membership gradient matches finite differences away from knots") {
  const auto p = testutil::belt_partition();
  auto chain = *KnotChain::from_partition(p);
  const auto base = chain.free_values();
  const std::size_t nf = base.size();
  for (double x : {0.3, 1.7, 3.9, 5.2, 7.7, 9.9, 11.0}) {
    const auto g = chain.membership_gradient(x);
    REQUIRE(g.size() == p.size() * nf);
    for (std::size_t k = 0; k < nf; ++k) {
      const double h = 1e-6;
      auto up = base, dn = base;
      up[k] += h;
      dn[k] -= h;
      KnotChain cu = chain, cd = chain;
      cu.set_free_values(up, 0);
      cd.set_free_values(dn, 0);
      const auto pu = cu.apply(p), pd = cd.apply(p);
      for (std::size_t t = 0; t < p.size(); ++t) {
        const double fd = (pu.term(t).mf(x) - pd.term(t).mf(x)) / (2 * h);
        CHECK(g[t * nf + k] == doctest::Approx(fd).epsilon(1e-6).scale(1));
      }
    }
  }
}
