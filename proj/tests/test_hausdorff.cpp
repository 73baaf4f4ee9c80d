#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "fraccap/hausdorff.hpp"
#include "fraccap/space.hpp"

using namespace fraccap;

namespace {

/// Exhaustive set-cover oracle: enumerate every subset of the pruned
/// candidate list rebuilt here from first principles.
double exhaustive_content(const MetricMeasureSpace& s, const PointSet& f, double codim,
                          double rho) {
  const auto fmem = f.members();
  if (fmem.empty()) return 0.0;
  // raw candidates: closed balls at realized distances <= rho plus the
  // half-minimal radius, any center
  std::vector<double> radii{0.5 * s.min_positive_dist()};
  for (Index i = 0; i < s.n(); ++i)
    for (Index j = i + 1; j < s.n(); ++j)
      if (s.dist(i, j) <= rho) radii.push_back(s.dist(i, j));
  std::sort(radii.begin(), radii.end());
  radii.erase(std::unique(radii.begin(), radii.end()), radii.end());

  struct Cand {
    double weight;
    std::uint32_t trace;
  };
  std::vector<Cand> cands;
  for (Index c = 0; c < s.n(); ++c)
    for (double r : radii) {
      std::uint32_t trace = 0;
      for (std::size_t i = 0; i < fmem.size(); ++i)
        if (s.dist(c, fmem[i]) <= r) trace |= 1u << i;
      if (!trace) continue;
      double mass = 0.0;
      for (Index z = 0; z < s.n(); ++z)
        if (s.dist(c, z) <= r) mass += s.weight(z);
      cands.push_back({mass * std::pow(r, -codim), trace});
    }
  // cheapest candidate per trace keeps the enumeration small
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    return a.trace != b.trace ? a.trace < b.trace : a.weight < b.weight;
  });
  cands.erase(std::unique(cands.begin(), cands.end(),
                          [](const Cand& a, const Cand& b) { return a.trace == b.trace; }),
              cands.end());
  if (cands.size() > 22) throw std::runtime_error("oracle instance too large");

  const std::uint32_t want = (1u << fmem.size()) - 1u;
  double best = std::numeric_limits<double>::infinity();
  for (std::uint32_t mask = 1; mask < (1u << cands.size()); ++mask) {
    std::uint32_t got = 0;
    double cost = 0.0;
    for (std::size_t i = 0; i < cands.size(); ++i)
      if (mask & (1u << i)) {
        got |= cands[i].trace;
        cost += cands[i].weight;
      }
    if ((got & want) == want) best = std::min(best, cost);
  }
  return best;
}

ContentProblem make_problem(const MetricMeasureSpace& s, const PointSet& f, double codim,
                            double rho) {
  return ContentProblem{&s, f, codim, rho, false};
}

}  // namespace

TEST_CASE("single point content uses the singleton ball") {
  const auto g = generate_path(5);
  const double rmin = 0.5;  // half the unit spacing
  for (double d : {0.0, 0.7}) {
    const auto sol = hausdorff_content(make_problem(g.space, PointSet::of(5, {2}), d, 2.0),
                                       CoverMode::exact);
    // cheapest way to cover one atom here: its own half-spacing ball
    REQUIRE(sol.value == Catch::Approx(1.0 * std::pow(rmin, -d)));
    REQUIRE(sol.balls.size() == 1);
    REQUIRE(sol.balls[0].center == 2);
  }
  // beyond the dimension, wide balls get cheaper than the singleton; the
  // optimum can only improve on it
  const auto wide = hausdorff_content(make_problem(g.space, PointSet::of(5, {2}), 1.3, 2.0),
                                      CoverMode::exact);
  REQUIRE(wide.value <= std::pow(rmin, -1.3));
  REQUIRE(wide.balls.size() == 1);
}

TEST_CASE("codimension zero is bounded by one covering ball") {
  const auto g = generate_path(9);
  const PointSet f = PointSet::of(9, {1, 2, 6});
  const auto sol = hausdorff_content(
      make_problem(g.space, f, 0.0, double(g.space.diameter())), CoverMode::exact);
  // one ball covering F entirely costs its own mass
  double best_single = std::numeric_limits<double>::infinity();
  for (Index c = 0; c < 9; ++c) {
    double need = 0.0;
    for (Index e : f.members()) need = std::max(need, g.space.dist(c, e));
    if (need <= g.space.diameter()) {
      double mass = 0.0;
      for (Index z = 0; z < 9; ++z)
        if (g.space.dist(c, z) <= need) mass += g.space.weight(z);
      best_single = std::min(best_single, mass);
    }
  }
  REQUIRE(sol.value <= best_single + 1e-12);
}

TEST_CASE("exact mode equals exhaustive enumeration") {
  const auto g9 = generate_path(9);
  const auto grid = generate_grid(1, 9);
  std::mt19937_64 rng(17);

  // path(9), two distant atoms, d = 1, rho = diam
  {
    const PointSet f = PointSet::of(9, {0, 8});
    const auto sol =
        hausdorff_content(make_problem(g9.space, f, 1.0, 8.0), CoverMode::exact);
    REQUIRE(!sol.bracket);
    REQUIRE(sol.value ==
            Catch::Approx(exhaustive_content(g9.space, f, 1.0, 8.0)).epsilon(1e-12));
  }

  std::uniform_int_distribution<int> pick(0, 8);
  std::uniform_real_distribution<double> dd(0.0, 1.5);
  int exercised = 0;
  for (int trial = 0; trial < 40 && exercised < 12; ++trial) {
    PointSet f(9);
    f.add(pick(rng));
    f.add(pick(rng));
    f.add(pick(rng));
    const double codim = dd(rng);
    const double rho = (1.0 + dd(rng)) * (trial % 2 == 0 ? 1.0 : 0.25);
    const auto& sp = (trial % 2 == 0) ? g9.space : grid.space;
    double want;
    try {
      want = exhaustive_content(sp, f, codim, rho);
    } catch (const std::runtime_error&) {
      continue;
    }
    const auto sol = hausdorff_content(make_problem(sp, f, codim, rho), CoverMode::exact);
    if (sol.bracket) continue;
    REQUIRE(sol.value == Catch::Approx(want).epsilon(1e-12));
    ++exercised;
  }
  REQUIRE(exercised >= 8);
}

TEST_CASE("bracket validity and greedy guarantee") {
  const auto g = generate_path(9);
  std::mt19937_64 rng(19);
  std::uniform_int_distribution<int> pick(0, 8);
  for (int trial = 0; trial < 20; ++trial) {
    PointSet f(9);
    for (int k = 0; k < 4; ++k) f.add(pick(rng));
    const double codim = 0.7, rho = 3.0;
    const auto ex =
        hausdorff_content(make_problem(g.space, f, codim, rho), CoverMode::exact);
    const auto up =
        hausdorff_content(make_problem(g.space, f, codim, rho), CoverMode::greedy_upper);
    const auto lo =
        hausdorff_content(make_problem(g.space, f, codim, rho), CoverMode::lp_lower);
    REQUIRE(lo.value <= ex.value * (1.0 + 1e-12));
    REQUIRE(ex.value <= up.value * (1.0 + 1e-12));
    REQUIRE(up.value <= ex.value * (1.0 + std::log(double(f.count()))) * (1.0 + 1e-12));
    // value consistency with the ball list
    double recompute = 0.0;
    for (const auto& b : ex.balls) {
      double mass = 0.0;
      for (Index z = 0; z < g.space.n(); ++z)
        if (g.space.dist(b.center, z) <= b.radius) mass += g.space.weight(z);
      recompute += mass * std::pow(b.radius, -codim);
    }
    REQUIRE(recompute == Catch::Approx(ex.value).epsilon(1e-12));
    // covers F with radii within the cap
    for (const auto& b : ex.balls) REQUIRE(b.radius <= rho);
    for (Index e : f.members()) {
      bool covered = false;
      for (const auto& b : ex.balls)
        if (g.space.dist(b.center, e) <= b.radius) covered = true;
      REQUIRE(covered);
    }
  }
}

TEST_CASE("monotonicity, antitonicity, subadditivity") {
  const auto g = generate_path(9);
  const PointSet small = PointSet::of(9, {2, 3});
  const PointSet big = PointSet::of(9, {2, 3, 7});
  const PointSet other = PointSet::of(9, {7});
  const double d = 0.8;

  const double c_small =
      hausdorff_content(make_problem(g.space, small, d, 4.0), CoverMode::exact).value;
  const double c_big =
      hausdorff_content(make_problem(g.space, big, d, 4.0), CoverMode::exact).value;
  const double c_other =
      hausdorff_content(make_problem(g.space, other, d, 4.0), CoverMode::exact).value;
  REQUIRE(c_small <= c_big);
  REQUIRE(c_big <= c_small + c_other + 1e-12);

  // shrinking rho can only raise the content
  const double c_rho2 =
      hausdorff_content(make_problem(g.space, small, d, 2.0), CoverMode::exact).value;
  const double c_rho1 =
      hausdorff_content(make_problem(g.space, small, d, 1.0), CoverMode::exact).value;
  REQUIRE(c_rho1 >= c_rho2 - 1e-12);
  REQUIRE(c_rho2 >= c_small - 1e-12);
}

TEST_CASE("simple mass lower bound for balls") {
  const auto g = generate_grid(1, 17);
  for (Index x : {Index(4), Index(8)}) {
    for (double r : {0.2, 0.4}) {
      const PointSet ball = ball_points(g.space, BallSpec(x, r, true));
      const auto sol =
          hausdorff_content(make_problem(g.space, ball, 0.9, r), CoverMode::exact);
      if (sol.bracket) continue;
      REQUIRE(std::pow(r, -0.9) * open_ball_mass(g.space, x, r) <= sol.value + 1e-12);
    }
  }
}

TEST_CASE("empty F yields zero content") {
  const auto g = generate_path(5);
  const auto sol =
      hausdorff_content(make_problem(g.space, PointSet(5), 1.0, 2.0), CoverMode::exact);
  REQUIRE(sol.value == 0.0);
  REQUIRE(sol.balls.empty());
}

TEST_CASE("content density ratio basics") {
  const auto g = generate_path(9);

  // E = whole space: ratio 1 at every (x, r)
  for (Index x : {Index(0), Index(4)}) {
    const auto r = content_density_ratio(g.space, PointSet::all(9), x, 3.0, 0.8);
    REQUIRE(r.exact);
    REQUIRE(r.lower == Catch::Approx(1.0));
    REQUIRE(r.upper == Catch::Approx(1.0));
  }

  // E = {x} alone: content(point)/content(ball) <= 1
  const auto single = content_density_ratio(g.space, PointSet::of(9, {4}), 4, 3.0, 0.8);
  REQUIRE(single.upper <= 1.0 + 1e-12);
  REQUIRE(single.lower > 0.0);

  REQUIRE_THROWS_AS(content_density_ratio(g.space, PointSet::of(9, {0}), 4, 2.0, 0.5),
                    invalid_argument_error);
}

TEST_CASE("content density of the cantor set against the exact cover") {
  const auto g = generate_cantor_line(2, 1.0 / 3.0, 81);
  const auto& e = g.sets.at("E");
  REQUIRE(e.contains(0));
  const auto r = content_density_ratio(g.space, e, 0, 1.0 / 3.0, 0.63);
  REQUIRE(r.lower > 0.0);
  REQUIRE(r.upper <= 1.0 + 1e-12);
  REQUIRE(r.lower <= r.upper);
}

TEST_CASE("codimension bound check") {
  const auto g = generate_grid(1, 65);
  const BallSpec b(32, 0.1, false);
  const PointSet e = ball_points(g.space, BallSpec(32, 0.1, true));

  const auto res0 = codim_bound_check(g.space, e, b, 4.0, {0.5, 2.0, 2.0}, 0.0);
  REQUIRE(res0.ratio.is_value());
  REQUIRE(std::isfinite(res0.ratio.value));
  REQUIRE(res0.ratio.value > 0.0);

  // doubling every weight leaves the ratio invariant
  auto scaled_w = g.space.weights();
  for (double& w : scaled_w) w *= 2.0;
  std::vector<std::vector<double>> coords = g.space.coords();
  const auto s2 = MetricMeasureSpace::euclidean(coords, scaled_w);
  const PointSet e2 = ball_points(s2, BallSpec(32, 0.1, true));
  const auto res2 = codim_bound_check(s2, e2, b, 4.0, {0.5, 2.0, 2.0}, 0.0);
  REQUIRE(res2.ratio.value == Catch::Approx(res0.ratio.value).epsilon(1e-9));

  // eta = p/2 also finite
  const auto resh = codim_bound_check(g.space, e, b, 4.0, {0.5, 2.0, 2.0}, 1.0);
  REQUIRE(resh.ratio.is_value());
  REQUIRE(std::isfinite(resh.ratio.value));

  const auto rese =
      codim_bound_check(g.space, PointSet(g.space.n()), b, 4.0, {0.5, 2.0, 2.0}, 0.0);
  REQUIRE(rese.ratio.is_none());
}
