#include <catch_amalgamated.hpp>

#include <cmath>

#include "fraccap/hardy.hpp"
#include "fraccap/hausdorff.hpp"
#include "fraccap/space.hpp"

using namespace fraccap;

namespace {

PointSet left_half(const GeneratedSpace& g, double threshold = 0.5) {
  PointSet e(g.space.n());
  for (Index i = 0; i < g.space.n(); ++i)
    if (g.space.coords()[size_t(i)][0] <= threshold) e.add(i);
  return e;
}

// spread including both extremes, so balls straddle the boundary of E
std::vector<Index> scan_centers(const PointSet& e, int count) {
  const auto mem = e.members();
  std::vector<Index> out;
  for (int k = 0; k < count; ++k) {
    const std::size_t pos =
        count == 1 ? mem.size() - 1 : k * (mem.size() - 1) / size_t(count - 1);
    out.push_back(mem[pos]);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

TEST_CASE("test family vanishes on E and carries the named generators") {
  const auto g = generate_grid(1, 33);
  const PointSet e = left_half(g);
  const auto family = generate_family(g.space, e, TestFamilySpec{}, {0.5, 2.0, 2.0});
  REQUIRE(family.size() >= 9u);
  bool has_dp = false, has_bump = false, has_rand = false, has_cap = false;
  for (const auto& nf : family) {
    for (Index i : e.members()) REQUIRE(nf.u[size_t(i)] == 0.0);
    has_dp |= nf.name.find("distance_power") == 0;
    has_bump |= nf.name.find("bump_product") == 0;
    has_rand |= nf.name.find("random_lipschitz") == 0;
    has_cap |= nf.name.find("capacity_minimizer") == 0;
  }
  REQUIRE(has_dp);
  REQUIRE(has_bump);
  REQUIRE(has_rand);
  REQUIRE(has_cap);
}

TEST_CASE("capacity density scan: whole space gives c0 = 1") {
  const auto g = generate_grid(1, 33);
  const PointSet all = PointSet::all(g.space.n());
  const auto rep = capacity_density_scan(g.space, all, 4.0, {0.5, 2.0, 2.0},
                                         {0.03, 0.06}, {8, 16, 24});
  REQUIRE(rep.c0 == 1.0);
  REQUIRE(rep.scan_errors == 0);
  for (const auto& en : rep.entries) {
    REQUIRE(en.ratio.is_value());
    REQUIRE(en.ratio.value == 1.0);  // identical problems on both sides
  }
}

TEST_CASE("capacity density scan validates preconditions") {
  const auto g = generate_grid(1, 33);
  const PointSet e = left_half(g);
  const GagliardoParams par{0.5, 2.0, 2.0};

  REQUIRE_THROWS_AS(capacity_density_scan(g.space, e, 2.0, par, {0.01}, {0}),
                    invalid_argument_error);  // Lambda must exceed 2
  REQUIRE_THROWS_AS(capacity_density_scan(g.space, e, 4.0, par, {0.2}, {0}),
                    invalid_argument_error);  // radius above diam(E)/8
  REQUIRE_THROWS_AS(capacity_density_scan(g.space, e, 4.0, par, {0.01}, {32}),
                    invalid_argument_error);  // center outside E
  REQUIRE_THROWS_AS(capacity_density_scan(g.space, PointSet::of(g.space.n(), {3}), 4.0,
                                          par, {0.01}, {3}),
                    invalid_argument_error);  // diam(E) = 0
}

TEST_CASE("segment keeps positive density while a single point decays") {
  const GagliardoParams par{0.5, 2.0, 2.0};
  double c0_33 = 0.0, c0_65 = 0.0;
  for (int m : {33, 65}) {
    const auto g = generate_grid(1, m);
    const PointSet e = left_half(g);
    const double de = set_diameter(g.space, e);
    const std::vector<double> radii = {de / 16.0, de / 32.0};
    const auto rep = capacity_density_scan(g.space, e, 4.0, par, radii,
                                           scan_centers(e, 3));
    REQUIRE(rep.scan_errors == 0);
    REQUIRE(rep.c0 > 0.0);
    (m == 33 ? c0_33 : c0_65) = rep.c0;
  }
  INFO("segment c0: " << c0_33 << " vs " << c0_65);
  REQUIRE(c0_65 <= 1.2 * c0_33);
  REQUIRE(c0_65 >= c0_33 / 1.2);

  // a singleton cannot anchor a density scan (its diameter is zero and the
  // Def-style radius range is empty), so probe it at a fixed scale instead
  double thin_17 = 0.0, thin_33 = 0.0;
  for (int m : {17, 33}) {
    const auto g = generate_grid(2, m);
    const Index c = Index(m / 2) * m + Index(m / 2);
    PointSet e(g.space.n());
    e.add(c);
    REQUIRE_THROWS_AS(capacity_density_scan(g.space, e, 4.0, par, {0.1}, {c}),
                      invalid_argument_error);
    const auto probe = density_ratio_probe(g.space, e, 4.0, par, c, 0.1);
    REQUIRE(probe.ratio.is_value());
    (m == 17 ? thin_17 : thin_33) = probe.ratio.value;
  }
  INFO("thin-set density ratio: " << thin_17 << " -> " << thin_33);
  REQUIRE(thin_33 < thin_17);
  REQUIRE(thin_33 < 0.5);
}

TEST_CASE("htl density scan on the segment") {
  const auto g = generate_grid(1, 33);
  const PointSet e = left_half(g);
  const double de = set_diameter(g.space, e);
  const auto rep = htl_density_scan(g.space, e, 4.0, {0.5, 2.0, 2.0},
                                    {de / 16.0}, scan_centers(e, 2), 1.0 / 8.0);
  REQUIRE(rep.c0 > 0.0);
  REQUIRE(rep.scan_errors == 0);

  // default radius bound c1 = 1/80 rejects radii above it
  REQUIRE_THROWS_AS(htl_density_scan(g.space, e, 4.0, {0.5, 2.0, 2.0}, {de / 16.0},
                                     scan_centers(e, 2)),
                    invalid_argument_error);
}

TEST_CASE("pointwise hardy report: skip accounting and homogeneity") {
  const auto g = generate_grid(1, 33);
  const PointSet e = left_half(g);
  const GagliardoParams par{0.5, 2.0, 2.0};

  std::vector<NamedField> zeros = {{"zero", constant_field(g.space, 0.0)}};
  const auto zrep = pointwise_hardy_report(g.space, e, zeros, par);
  REQUIRE(zrep.constant == 0.0);
  REQUIRE(zrep.all_skipped);
  REQUIRE(zrep.skipped == zrep.evaluated);

  ScalarField u(size_t(g.space.n()));
  for (Index i = 0; i < g.space.n(); ++i)
    u[size_t(i)] = std::min(1.0, dist_to_set(g.space, i, e) / 0.05);
  ScalarField u2 = u;
  for (double& v : u2) v *= 2.0;
  const auto r1 = pointwise_hardy_report(g.space, e, {{"u", u}}, par);
  const auto r2 = pointwise_hardy_report(g.space, e, {{"2u", u2}}, par);
  REQUIRE(r1.constant > 0.0);
  REQUIRE(r2.constant == Catch::Approx(r1.constant).epsilon(1e-12));
  REQUIRE(r1.admissible_points > 0);
}

TEST_CASE("pointwise hardy is stable under a finer maximal-function grid") {
  // the restricted maximal sup is exact over realized radii, so halving a
  // radius grid means comparing against a direct recomputation
  const auto g = generate_grid(1, 65);
  const PointSet e = left_half(g);
  const GagliardoParams par{0.5, 2.0, 2.0};
  const auto family = generate_family(
      g.space, e, TestFamilySpec{false, {1.0}, {0.5, 1.0, 2.0}, 0, 0, 1}, par);
  const auto rep = pointwise_hardy_report(g.space, e, family, par);
  REQUIRE(rep.constant > 0.0);
  REQUIRE(std::isfinite(rep.constant));
}

TEST_CASE("boundary poincare and ball hardy reports on the segment") {
  const auto g = generate_grid(1, 33);
  const PointSet e = left_half(g);
  const GagliardoParams par{0.5, 2.0, 2.0};
  const auto family = generate_family(
      g.space, e, TestFamilySpec{false, {0.5, 1.0}, {0.5, 1.0}, 1, 1, 7}, par);
  const double de = set_diameter(g.space, e);

  std::vector<BallSpec> balls;
  for (Index c : scan_centers(e, 2)) balls.emplace_back(c, 0.9 * de / 8.0, false);

  const auto brep = boundary_poincare_report(g.space, e, family, par, 2.0, 1.0, balls);
  REQUIRE(brep.kind == "boundary");
  REQUIRE(brep.constant > 0.0);
  REQUIRE(std::isfinite(brep.constant));

  const auto irep = ball_hardy_report(g.space, e, family, par, 3.0, balls);
  REQUIRE(irep.kind == "ball");
  REQUIRE(irep.constant > 0.0);
  REQUIRE(std::isfinite(irep.constant));

  // scaling invariance of the ball report
  std::vector<NamedField> doubled;
  for (const auto& nf : family) {
    ScalarField v = nf.u;
    for (double& x : v) x *= -3.0;
    doubled.push_back({nf.name, v});
  }
  const auto irep2 = ball_hardy_report(g.space, e, doubled, par, 3.0, balls);
  REQUIRE(irep2.constant == Catch::Approx(irep.constant).epsilon(1e-12));

  REQUIRE_THROWS_AS(
      boundary_poincare_report(g.space, e, family, par, 2.0, 1.0,
                               {BallSpec(Index(g.space.n() - 1), de / 16.0, false)}),
      invalid_argument_error);  // center outside E
}

TEST_CASE("self improvement scan: whole space fills the lattice") {
  const auto g = generate_grid(1, 17);
  const PointSet all = PointSet::all(g.space.n());
  CapacityCache cache;
  const auto rep = self_improvement_scan(
      g.space, all, {0.5, 2.0, 2.0}, 4.0, {0.4, 0.45, 0.5, 0.55, 0.6},
      {1.9, 1.95, 2.0, 2.05, 2.1}, {1.5, 2.0}, 0.5, {0.05, 0.1}, {4, 8}, &cache);
  REQUIRE(rep.base_c0 == 1.0);
  REQUIRE(rep.epsilon == Catch::Approx(0.1));  // lattice half-width
  for (const auto& pt : rep.points) {
    REQUIRE(!pt.skipped);
    REQUIRE(pt.in_region);
  }
}

TEST_CASE("self improvement scan skips invalid lattice points") {
  const auto g = generate_grid(1, 17);
  const PointSet all = PointSet::all(g.space.n());
  CapacityCache cache;
  const auto rep = self_improvement_scan(g.space, all, {0.1, 2.0, 2.0}, 4.0,
                                         {-0.05, 0.05, 0.1, 0.15}, {2.0}, {2.0}, 0.5,
                                         {0.05}, {8}, &cache);
  int skipped = 0;
  for (const auto& pt : rep.points) skipped += pt.skipped ? 1 : 0;
  REQUIRE(skipped == 1);           // beta_hat = -0.05
  REQUIRE(rep.epsilon < 0.15);     // the invalid shell caps the box
}

TEST_CASE("capacity cache round trips through disk") {
  const auto g = generate_grid(1, 17);
  const auto dir = std::filesystem::temp_directory_path() / "fraccap_cache_test";
  std::filesystem::remove_all(dir);

  CapacityProblem pb;
  pb.space = &g.space;
  pb.ball = BallSpec(8, 0.1, false);
  pb.e = ball_points(g.space, BallSpec(8, 0.1, true));
  pb.lambda_cap = 4.0;
  pb.params = {0.5, 2.0, 2.0};
  const auto key = CapacityCache::problem_key(pb, false, {});

  double first;
  {
    CapacityCache cache(dir.string());
    first = cache.get_or_compute(key, [&] { return fractional_capacity(pb); }).value;
  }
  {
    CapacityCache cache(dir.string());
    int calls = 0;
    const double second = cache
                              .get_or_compute(key,
                                              [&] {
                                                ++calls;
                                                return fractional_capacity(pb);
                                              })
                              .value;
    REQUIRE(calls == 0);       // served from disk
    REQUIRE(second == first);  // bit-exact via the 17-digit round trip
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("hardy finiteness propagates upward in (beta, p)") {
  const auto g = generate_grid(1, 33);
  const PointSet e = left_half(g);
  const auto family = generate_family(
      g.space, e, TestFamilySpec{false, {0.5, 1.0}, {0.5, 1.0}, 0, 0, 11},
      {0.5, 2.0, 2.0});
  double prev = -1.0;
  for (auto [beta, p] : {std::pair{0.4, 2.0}, std::pair{0.5, 2.0},
                         std::pair{0.5, 2.5}, std::pair{0.6, 3.0}}) {
    const auto rep = pointwise_hardy_report(g.space, e, family, {beta, p, 2.0});
    REQUIRE(std::isfinite(rep.constant));
    REQUIRE(!rep.any_infinite);
    INFO("c_H at (" << beta << "," << p << ") = " << rep.constant);
    prev = rep.constant;
  }
  (void)prev;
}

TEST_CASE("content density with d < beta p pairs with positive capacity density") {
  const auto g = generate_grid(1, 33);
  const PointSet e = left_half(g);
  const auto mem = e.members();
  const GagliardoParams par{0.5, 2.0, 2.0};  // beta p = 1
  const double d = 0.5;                      // 0 < d < beta p

  // the content density ratio of the segment stays bounded away from zero
  double worst = 1e300;
  for (Index x : {mem.front(), mem[mem.size() / 2], mem.back()})
    for (double r : {0.1, 0.2}) {
      const auto cr = content_density_ratio(g.space, e, x, r, d);
      worst = std::min(worst, cr.lower);
    }
  REQUIRE(worst > 0.05);

  // and so does the capacity density scan on the same benchmark
  const double de = set_diameter(g.space, e);
  const auto scan = capacity_density_scan(
      g.space, e, 4.0, par, {de / 16.0, de / 32.0},
      {mem.front(), mem[mem.size() / 2], mem.back()});
  REQUIRE(scan.c0 > 0.0);
  INFO("content density >= " << worst << " pairs with c0 = " << scan.c0);
}

TEST_CASE("boundary and pointwise constants are recorded together") {
  const auto g = generate_grid(1, 33);
  const PointSet e = left_half(g);
  const GagliardoParams par{0.5, 2.0, 2.0};
  const auto family = generate_family(
      g.space, e, TestFamilySpec{false, {0.5, 1.0, 2.0}, {0.5, 1.0, 2.0}, 0, 0, 13}, par);
  const auto mem = e.members();
  const double de = set_diameter(g.space, e);
  std::vector<BallSpec> balls = {BallSpec(mem.back(), 0.9 * de / 8.0, false)};

  const auto cb = boundary_poincare_report(g.space, e, family, par, 2.0, 1.0, balls);
  const auto ch = pointwise_hardy_report(g.space, e, family, par);
  const auto ci = ball_hardy_report(g.space, e, family, par, 3.0, balls);
  REQUIRE(std::isfinite(cb.constant));
  REQUIRE(std::isfinite(ch.constant));
  REQUIRE(std::isfinite(ci.constant));  // pointwise finite comes with ball finite
  INFO("c_b = " << cb.constant << ", c_H = " << ch.constant << ", c_I = " << ci.constant);
}
