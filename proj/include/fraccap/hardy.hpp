#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "fraccap/capacity.hpp"
#include "fraccap/gagliardo.hpp"
#include "fraccap/space.hpp"
#include "fraccap/space_io.hpp"

namespace fraccap {

/// Named test functions vanishing on E exactly.
struct TestFamilySpec {
  bool capacity_minimizers = true;
  std::vector<double> distance_scales = {0.5, 1.0, 2.0};  // multiples of diam(E)/8
  std::vector<double> distance_powers = {0.5, 1.0, 2.0};  // gamma grid
  int bump_products = 2;
  int random_lipschitz = 2;
  std::uint64_t seed = 1;
};

struct NamedField {
  std::string name;
  ScalarField u;
};

/// Builds the family. Capacity-minimizer entries are complements 1 - phi of
/// relative capacity minimizers for balls centered in E, which vanish on E
/// by the phi = 1 constraint.
inline std::vector<NamedField> generate_family(const MetricMeasureSpace& space,
                                               const PointSet& e,
                                               const TestFamilySpec& spec,
                                               const GagliardoParams& params,
                                               double lambda_cap = 4.0) {
  if (e.empty()) throw invalid_argument_error("test family: E must be nonempty");
  std::vector<NamedField> out;
  const double diam_e = set_diameter(space, e);
  const double base_scale = diam_e > 0.0 ? diam_e / 8.0 : space.min_positive_dist();

  std::vector<double> dist_e(static_cast<std::size_t>(space.n()));
  for (Index i = 0; i < space.n(); ++i) dist_e[static_cast<std::size_t>(i)] =
      dist_to_set(space, i, e);

  for (double sm : spec.distance_scales)
    for (double gamma : spec.distance_powers) {
      const double s = sm * base_scale;
      ScalarField u(static_cast<std::size_t>(space.n()));
      for (std::size_t i = 0; i < u.size(); ++i)
        u[i] = std::min(1.0, std::pow(dist_e[i] / s, gamma));
      out.push_back({"distance_power(s=" + format_double(s) +
                         ",gamma=" + format_double(gamma) + ")",
                     std::move(u)});
    }

  // bump carried on the distance ramp, centered at the far points of E
  if (spec.bump_products > 0) {
    std::vector<std::pair<double, Index>> far;
    for (Index i = 0; i < space.n(); ++i)
      far.push_back({dist_e[static_cast<std::size_t>(i)], i});
    std::sort(far.begin(), far.end(), std::greater<>());
    for (int b = 0; b < spec.bump_products && b < static_cast<int>(far.size()); ++b) {
      const Index c = far[static_cast<std::size_t>(b)].second;
      const double w = std::max(2.0 * base_scale, far[0].first / 2.0);
      ScalarField u(static_cast<std::size_t>(space.n()));
      for (Index i = 0; i < space.n(); ++i) {
        const double t = space.dist(c, i) / w;
        const double bump = t < 1.0 ? (1.0 - t * t) * (1.0 - t * t) : 0.0;
        u[static_cast<std::size_t>(i)] =
            std::min(1.0, dist_e[static_cast<std::size_t>(i)] / base_scale) * bump;
      }
      out.push_back({"bump_product(" + std::to_string(b) + ")", std::move(u)});
    }
  }

  if (spec.random_lipschitz > 0) {
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> d(0.0, 1.0);
    const double lip = 1.0 / std::max(base_scale, 1e-12);
    for (int k = 0; k < spec.random_lipschitz; ++k) {
      ScalarField h(static_cast<std::size_t>(space.n()));
      for (double& v : h) v = d(rng);
      ScalarField u(static_cast<std::size_t>(space.n()));
      for (Index i = 0; i < space.n(); ++i) {
        double inf_conv = std::numeric_limits<double>::infinity();
        for (Index j = 0; j < space.n(); ++j)
          inf_conv = std::min(inf_conv,
                              h[static_cast<std::size_t>(j)] + lip * space.dist(i, j));
        u[static_cast<std::size_t>(i)] =
            inf_conv * std::min(1.0, dist_e[static_cast<std::size_t>(i)] / base_scale);
      }
      out.push_back({"random_lipschitz(" + std::to_string(k) + ")", std::move(u)});
    }
  }

  if (spec.capacity_minimizers) {
    const auto emem = e.members();
    const Index x0 = emem[emem.size() / 2];
    for (double rm : {0.5, 1.0}) {
      const double r = rm * base_scale;
      CapacityProblem pb;
      pb.space = &space;
      pb.ball = BallSpec(x0, r, false);
      pb.e = e.intersect(ball_points(space, BallSpec(x0, r, true)));
      if (pb.e.empty()) continue;
      pb.lambda_cap = lambda_cap;
      pb.params = params;
      const auto cap = fractional_capacity(pb);
      ScalarField u(static_cast<std::size_t>(space.n()));
      for (std::size_t i = 0; i < u.size(); ++i) u[i] = 1.0 - cap.minimizer[i];
      // the complement vanishes on E inside the ball; force the rest of E
      // to zero as well while keeping the field continuous in the ramp sense
      for (Index i : emem) u[static_cast<std::size_t>(i)] = 0.0;
      out.push_back({"capacity_minimizer(r=" + format_double(r) + ")", std::move(u)});
    }
  }

  for (auto& nf : out)
    for (Index i : e.members())
      if (nf.u[static_cast<std::size_t>(i)] != 0.0)
        throw invalid_argument_error("test family: field " + nf.name +
                                     " does not vanish on E");
  return out;
}

/// Cached capacity values keyed by the full problem signature. Optionally
/// persisted, one JSON file per key, with 17-digit round-trip floats.
class CapacityCache {
 public:
  CapacityCache() = default;
  explicit CapacityCache(std::string dir) : dir_(std::move(dir)) {
    if (!dir_.empty()) std::filesystem::create_directories(dir_);
  }

  struct Entry {
    double value = 0.0;
    SolveStatus status = SolveStatus::exact;
    double gap = 0.0;
  };

  template <typename Fn>
  Entry get_or_compute(std::uint64_t key, Fn&& fn) {
    const std::string name = key_name(key);
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = mem_.find(name);
      if (it != mem_.end()) return it->second;
    }
    if (!dir_.empty()) {
      const auto path = std::filesystem::path(dir_) / (name + ".json");
      std::ifstream f(path);
      if (f) {
        nlohmann::json j;
        f >> j;
        Entry e{j.at("value").get<double>(),
                j.at("status").get<std::string>() == "exact" ? SolveStatus::exact
                                                             : SolveStatus::upper_bound,
                j.at("gap").get<double>()};
        std::lock_guard<std::mutex> lock(mu_);
        mem_[name] = e;
        return e;
      }
    }
    const CapacityResult r = fn();
    Entry e{r.value, r.status, r.gap};
    {
      std::lock_guard<std::mutex> lock(mu_);
      mem_[name] = e;
    }
    if (!dir_.empty()) {
      nlohmann::json j{{"value", e.value},
                       {"status", e.status == SolveStatus::exact ? "exact" : "upper_bound"},
                       {"gap", e.gap}};
      // write-to-temp plus rename keeps concurrent writers of one key safe
      const auto tmp = std::filesystem::path(dir_) /
                       (name + "." + std::to_string(reinterpret_cast<std::uintptr_t>(&e)) +
                        ".tmp");
      {
        std::ofstream f(tmp);
        write_json_17(f, j);
      }
      std::error_code ec;
      std::filesystem::rename(tmp, std::filesystem::path(dir_) / (name + ".json"), ec);
      if (ec) std::filesystem::remove(tmp, ec);
    }
    return e;
  }

  static std::uint64_t problem_key(const CapacityProblem& pb, bool htl,
                                   const CapacitySolveOptions& opt) {
    std::uint64_t h = fnv1a(htl ? "htl" : "frac", 3);
    h = hash_mix(h, pb.space->content_hash());
    h = hash_mix(h, pb.e.content_hash());
    h = hash_mix(h, static_cast<std::uint64_t>(pb.ball.center));
    h = hash_mix(h, pb.ball.radius);
    h = hash_mix(h, static_cast<std::uint64_t>(pb.ball.closed));
    h = hash_mix(h, pb.lambda_cap);
    h = hash_mix(h, pb.params.beta);
    h = hash_mix(h, pb.params.p);
    h = hash_mix(h, pb.params.q);
    h = hash_mix(h, opt.tol_gap);
    h = hash_mix(h, opt.tol_stall);
    h = hash_mix(h, static_cast<std::uint64_t>(opt.max_iterations));
    return h;
  }

 private:
  static std::string key_name(std::uint64_t key) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(key));
    return buf;
  }

  std::mutex mu_;
  std::map<std::string, Entry> mem_;
  std::string dir_;
};

struct DensityScanEntry {
  Index center = 0;
  double radius = 0.0;
  double num = 0.0, den = 0.0;
  RatioResult ratio;
  SolveStatus num_status = SolveStatus::exact, den_status = SolveStatus::exact;
};

struct DensityScanReport {
  GagliardoParams params;
  double lambda_cap = 4.0;
  std::vector<DensityScanEntry> entries;
  double c0 = 0.0;
  Index witness_x = -1;
  double witness_r = 0.0;
  bool approximate = false;  // some denominator was only an upper bound
  int scan_errors = 0;       // zero denominators
};

namespace detail {

template <typename CapFn>
DensityScanReport density_scan_impl(const MetricMeasureSpace& space, const PointSet& e,
                                    double lambda_cap, const GagliardoParams& params,
                                    const std::vector<double>& radii,
                                    const std::vector<Index>& centers, double radius_limit,
                                    CapFn&& cap_fn) {
  if (e.empty()) throw invalid_argument_error("density scan: E must be nonempty");
  const double diam_e = set_diameter(space, e);
  if (!(diam_e > 0.0)) throw invalid_argument_error("density scan: diam(E) is zero");
  if (!(lambda_cap > 2.0))
    throw invalid_argument_error("density scan: Lambda must exceed 2");
  for (Index c : centers)
    if (!e.contains(c))
      throw invalid_argument_error("density scan: center " + std::to_string(c) +
                                   " is not in E");
  for (double r : radii)
    if (!(r > 0.0 && r < radius_limit))
      throw invalid_argument_error("density scan: radius " + format_double(r) +
                                   " outside (0, " + format_double(radius_limit) + ")");

  DensityScanReport rep;
  rep.params = params;
  rep.lambda_cap = lambda_cap;
  rep.c0 = std::numeric_limits<double>::infinity();
  rep.entries.resize(centers.size() * radii.size());
  parallel_for(rep.entries.size(), [&](std::size_t idx) {
    const Index x = centers[idx / radii.size()];
    const double r = radii[idx % radii.size()];
    DensityScanEntry en;
    en.center = x;
    en.radius = r;
    const PointSet closed_ball = ball_points(space, BallSpec(x, r, true));
    const auto num = cap_fn(e.intersect(closed_ball), BallSpec(x, r, false));
    const auto den = cap_fn(closed_ball, BallSpec(x, r, false));
    en.num = num.value;
    en.den = den.value;
    en.num_status = num.status;
    en.den_status = den.status;
    en.ratio = make_ratio(num.value, den.value);
    rep.entries[idx] = en;
  });
  for (const auto& en : rep.entries) {
    if (en.den_status == SolveStatus::upper_bound) rep.approximate = true;
    if (!(en.den > 0.0)) {
      ++rep.scan_errors;
      continue;
    }
    if (en.ratio.is_value() && en.ratio.value < rep.c0) {
      rep.c0 = en.ratio.value;
      rep.witness_x = en.center;
      rep.witness_r = en.radius;
    }
  }
  if (!std::isfinite(rep.c0)) rep.c0 = 0.0;
  return rep;
}

}  // namespace detail

/// Raw density ratio cap(E cap closed B(x,r), 2B, Lambda B) over the same
/// capacity of the full closed ball, at one explicit (x, r). No diam(E)
/// range discipline: degenerate sets (a single atom has diam 0, leaving no
/// admissible radii) can still be probed at externally chosen scales.
inline DensityScanEntry density_ratio_probe(const MetricMeasureSpace& space,
                                            const PointSet& e, double lambda_cap,
                                            const GagliardoParams& params, Index x,
                                            double r, CapacityCache* cache = nullptr,
                                            const CapacitySolveOptions& opt = {}) {
  if (!e.contains(x)) throw invalid_argument_error("density probe: x must lie in E");
  if (!(lambda_cap > 2.0))
    throw invalid_argument_error("density probe: Lambda must exceed 2");
  auto cap_of = [&](const PointSet& target) {
    CapacityProblem pb;
    pb.space = &space;
    pb.e = target;
    pb.ball = BallSpec(x, r, false);
    pb.lambda_cap = lambda_cap;
    pb.params = params;
    if (!cache) {
      const auto res = fractional_capacity(pb, opt);
      return CapacityCache::Entry{res.value, res.status, res.gap};
    }
    return cache->get_or_compute(CapacityCache::problem_key(pb, false, opt),
                                 [&] { return fractional_capacity(pb, opt); });
  };
  const PointSet closed_ball = ball_points(space, BallSpec(x, r, true));
  const auto num = cap_of(e.intersect(closed_ball));
  const auto den = cap_of(closed_ball);
  DensityScanEntry en;
  en.center = x;
  en.radius = r;
  en.num = num.value;
  en.den = den.value;
  en.num_status = num.status;
  en.den_status = den.status;
  en.ratio = make_ratio(num.value, den.value);
  return en;
}

/// Fractional capacity density ratios over centers in E and radii below
/// diam(E)/8; c0 is the scan infimum.
inline DensityScanReport capacity_density_scan(const MetricMeasureSpace& space,
                                               const PointSet& e, double lambda_cap,
                                               const GagliardoParams& params,
                                               const std::vector<double>& radii,
                                               const std::vector<Index>& centers,
                                               CapacityCache* cache = nullptr,
                                               const CapacitySolveOptions& opt = {}) {
  auto cap_fn = [&](const PointSet& target, const BallSpec& ball) {
    CapacityProblem pb;
    pb.space = &space;
    pb.e = target;
    pb.ball = ball;
    pb.lambda_cap = lambda_cap;
    pb.params = params;
    if (!cache) {
      const auto r = fractional_capacity(pb, opt);
      return CapacityCache::Entry{r.value, r.status, r.gap};
    }
    return cache->get_or_compute(CapacityCache::problem_key(pb, false, opt),
                                 [&] { return fractional_capacity(pb, opt); });
  };
  return detail::density_scan_impl(space, e, lambda_cap, params, radii, centers,
                                   set_diameter(space, e) / 8.0, cap_fn);
}

/// Same scan against the Hajlasz-Triebel-Lizorkin capacity; the admissible
/// radius range is c1 * diam(E) with c1 defaulting to 1/80.
inline DensityScanReport htl_density_scan(const MetricMeasureSpace& space,
                                          const PointSet& e, double lambda_cap,
                                          const GagliardoParams& params,
                                          const std::vector<double>& radii,
                                          const std::vector<Index>& centers,
                                          double c1 = 1.0 / 80.0,
                                          CapacityCache* cache = nullptr,
                                          const CapacitySolveOptions& opt = {}) {
  auto cap_fn = [&](const PointSet& target, const BallSpec& ball) {
    CapacityProblem pb;
    pb.space = &space;
    pb.e = target;
    pb.ball = ball;
    pb.lambda_cap = lambda_cap;
    pb.params = params;
    if (!cache) {
      const auto r = htl_capacity(pb, opt);
      return CapacityCache::Entry{r.value, r.status, r.gap};
    }
    return cache->get_or_compute(CapacityCache::problem_key(pb, true, opt),
                                 [&] { return htl_capacity(pb, opt); });
  };
  return detail::density_scan_impl(space, e, lambda_cap, params, radii, centers,
                                   c1 * set_diameter(space, e), cap_fn);
}

struct HardyReport {
  std::string kind;          // pointwise | boundary | ball
  double constant = 0.0;     // c_H, c_b, or c_I
  Index witness_point = -1;  // x or ball center
  double witness_radius = 0.0;
  std::string witness_field;
  int evaluated = 0;
  int skipped = 0;  // 0/0 pairs
  bool all_skipped = false;
  bool any_infinite = false;
  int admissible_points = 0;
};

/// c_H = sup |u(x)| / ( dist(x,E)^beta (M_{2 dist}((G_{u,beta,q,B(x,2dist)})^p)(x))^{1/p} )
/// over the family and the admissible annulus 0 < dist(x,E) < diam(E)/8.
/// A positive max_dist overrides the annulus width, which is the only way
/// to probe degenerate sets whose diameter vanishes.
inline HardyReport pointwise_hardy_report(const MetricMeasureSpace& space,
                                          const PointSet& e,
                                          const std::vector<NamedField>& family,
                                          const GagliardoParams& params,
                                          double max_dist = 0.0) {
  if (e.empty()) throw invalid_argument_error("pointwise hardy: E must be nonempty");
  const double diam_e = set_diameter(space, e);
  if (!(max_dist > 0.0) && !(diam_e > 0.0))
    throw invalid_argument_error("pointwise hardy: diam(E) is zero");
  const double limit = max_dist > 0.0 ? max_dist : diam_e / 8.0;

  std::vector<Index> admissible;
  for (Index x = 0; x < space.n(); ++x) {
    const double dx = dist_to_set(space, x, e);
    if (dx > 0.0 && dx < limit) admissible.push_back(x);
  }
  if (admissible.empty())
    throw invalid_argument_error(
        "pointwise hardy: no admissible points below the distance limit");

  HardyReport rep;
  rep.kind = "pointwise";
  rep.admissible_points = static_cast<int>(admissible.size());
  struct Slot {
    double ratio = -1.0;
    int skipped = 0;
    bool infinite = false;
  };
  for (const auto& nf : family) {
    std::vector<Slot> slots(admissible.size());
    parallel_for(admissible.size(), [&](std::size_t i) {
      const Index x = admissible[i];
      const double dx = dist_to_set(space, x, e);
      const double r = 2.0 * dx;
      const PointSet ball = ball_points(space, BallSpec(x, r, false));
      ScalarField gp(static_cast<std::size_t>(space.n()), 0.0);
      for (Index y : ball.members())
        gp[static_cast<std::size_t>(y)] = std::pow(
            gagliardo_pointwise(space, nf.u, params.beta, params.q, ball, y), params.p);
      const double maximal = restricted_maximal(space, gp, r, x);
      const double num = std::abs(nf.u[static_cast<std::size_t>(x)]);
      const double den = std::pow(dx, params.beta) * std::pow(maximal, 1.0 / params.p);
      if (num == 0.0 && den == 0.0) {
        slots[i].skipped = 1;
        return;
      }
      if (den == 0.0) {
        slots[i].infinite = true;
        return;
      }
      slots[i].ratio = num / den;
    });
    for (std::size_t i = 0; i < slots.size(); ++i) {
      ++rep.evaluated;
      if (slots[i].skipped) {
        ++rep.skipped;
        continue;
      }
      if (slots[i].infinite) {
        rep.any_infinite = true;
        continue;
      }
      if (slots[i].ratio > rep.constant) {
        rep.constant = slots[i].ratio;
        rep.witness_point = admissible[i];
        rep.witness_field = nf.name;
      }
    }
  }
  rep.all_skipped = rep.skipped == rep.evaluated;
  return rep;
}

/// c_b over balls centered in E: ( avg_B |u|^t )^{1/t} over
/// R^beta ( avg_{lambda B} G^p )^{1/p}.
inline HardyReport boundary_poincare_report(const MetricMeasureSpace& space,
                                            const PointSet& e,
                                            const std::vector<NamedField>& family,
                                            const GagliardoParams& params, double t,
                                            double lambda,
                                            const std::vector<BallSpec>& balls) {
  if (e.empty()) throw invalid_argument_error("boundary poincare: E must be nonempty");
  const double diam_e = set_diameter(space, e);
  for (const auto& b : balls) {
    if (!e.contains(b.center))
      throw invalid_argument_error("boundary poincare: ball center not in E");
    if (!(b.radius < diam_e / 8.0))
      throw invalid_argument_error("boundary poincare: radius must stay below diam(E)/8");
  }
  HardyReport rep;
  rep.kind = "boundary";
  for (const auto& nf : family) {
    for (const auto& b : balls) {
      const PointSet bp = ball_points(space, b);
      const PointSet lp = ball_points(space, b.scaled(lambda));
      const double num = set_lt_average(space, nf.u, bp, t);
      GagliardoTable table(space, lp, params.beta, params.q);
      const double den =
          std::pow(b.radius, params.beta) *
          std::pow(table.energy(nf.u, params.p) / set_mass(space, lp), 1.0 / params.p);
      ++rep.evaluated;
      if (num == 0.0 && den == 0.0) {
        ++rep.skipped;
        continue;
      }
      if (den == 0.0) {
        rep.any_infinite = true;
        continue;
      }
      if (num / den > rep.constant) {
        rep.constant = num / den;
        rep.witness_point = b.center;
        rep.witness_radius = b.radius;
        rep.witness_field = nf.name;
      }
    }
  }
  rep.all_skipped = rep.skipped == rep.evaluated;
  return rep;
}

/// c_I^p over balls centered in E:
///   integral_{B \ E} |u|^p dist(.,E)^{-beta p} over the Gagliardo energy
///   of the lambda-inflated ball; lambda defaults to 3.
inline HardyReport ball_hardy_report(const MetricMeasureSpace& space, const PointSet& e,
                                     const std::vector<NamedField>& family,
                                     const GagliardoParams& params, double lambda,
                                     const std::vector<BallSpec>& balls) {
  if (e.empty()) throw invalid_argument_error("ball hardy: E must be nonempty");
  const double diam_e = set_diameter(space, e);
  for (const auto& b : balls) {
    if (!e.contains(b.center))
      throw invalid_argument_error("ball hardy: ball center not in E");
    if (!(b.radius < diam_e / 8.0))
      throw invalid_argument_error("ball hardy: radius must stay below diam(E)/8");
  }
  HardyReport rep;
  rep.kind = "ball";
  double best_pth = 0.0;
  for (const auto& nf : family) {
    for (const auto& b : balls) {
      const PointSet bp = ball_points(space, b);
      const PointSet lp = ball_points(space, b.scaled(lambda));
      double num = 0.0;
      for (Index x : bp.members()) {
        if (e.contains(x)) continue;
        const double dx = dist_to_set(space, x, e);
        num += std::pow(std::abs(nf.u[static_cast<std::size_t>(x)]), params.p) *
               std::pow(dx, -params.beta * params.p) * space.weight(x);
      }
      GagliardoTable table(space, lp, params.beta, params.q);
      const double den = table.energy(nf.u, params.p);
      ++rep.evaluated;
      if (num == 0.0 && den == 0.0) {
        ++rep.skipped;
        continue;
      }
      if (den == 0.0) {
        rep.any_infinite = true;
        continue;
      }
      if (num / den > best_pth) {
        best_pth = num / den;
        rep.witness_point = b.center;
        rep.witness_radius = b.radius;
        rep.witness_field = nf.name;
      }
    }
  }
  rep.constant = std::pow(best_pth, 1.0 / params.p);
  rep.all_skipped = rep.skipped == rep.evaluated;
  return rep;
}

struct SelfImprovementPoint {
  double beta_hat = 0.0, p_hat = 0.0, q_hat = 0.0;
  double c0 = 0.0;
  bool skipped = false;  // outside (0,1) x (1,inf)^2
  bool in_region = false;
};

struct SelfImprovementReport {
  double base_c0 = 0.0;
  double delta = 0.0;
  double epsilon = 0.0;  // largest box around (beta, p) inside the region
  std::vector<SelfImprovementPoint> points;
};

/// Lattice scan of c0(beta_hat, p_hat, q_hat) around the base parameters;
/// epsilon is the largest multiple of the lattice step whose full box lies
/// in the region c0 >= delta for every swept q_hat.
inline SelfImprovementReport self_improvement_scan(
    const MetricMeasureSpace& space, const PointSet& e, const GagliardoParams& base,
    double lambda_cap, const std::vector<double>& beta_grid,
    const std::vector<double>& p_grid, const std::vector<double>& q_grid, double delta,
    const std::vector<double>& radii, const std::vector<Index>& centers,
    CapacityCache* cache = nullptr, const CapacitySolveOptions& opt = {}) {
  SelfImprovementReport rep;
  rep.delta = delta;

  const auto base_scan =
      capacity_density_scan(space, e, lambda_cap, base, radii, centers, cache, opt);
  rep.base_c0 = base_scan.c0;

  for (double bh : beta_grid)
    for (double ph : p_grid)
      for (double qh : q_grid) {
        SelfImprovementPoint pt;
        pt.beta_hat = bh;
        pt.p_hat = ph;
        pt.q_hat = qh;
        if (!(bh > 0.0 && bh < 1.0 && ph > 1.0 && qh >= 1.0)) {
          pt.skipped = true;
          rep.points.push_back(pt);
          continue;
        }
        const auto scan = capacity_density_scan(space, e, lambda_cap,
                                                {bh, ph, qh}, radii, centers, cache, opt);
        pt.c0 = scan.c0;
        pt.in_region = scan.c0 >= delta && scan.scan_errors == 0;
        rep.points.push_back(pt);
      }

  // largest epsilon so that every lattice point of the box passes for all q
  double eps = std::numeric_limits<double>::infinity();
  bool base_ok = true;
  for (const auto& pt : rep.points) {
    const double dist = std::max(std::abs(pt.beta_hat - base.beta),
                                 std::abs(pt.p_hat - base.p));
    if (pt.skipped || !pt.in_region) {
      if (dist < eps) eps = dist;
      if (dist == 0.0) base_ok = false;
    }
  }
  if (!base_ok)
    rep.epsilon = 0.0;
  else if (std::isinf(eps)) {
    // whole lattice passes: epsilon is the lattice half-width
    double w = 0.0;
    for (const auto& pt : rep.points)
      w = std::max(w, std::max(std::abs(pt.beta_hat - base.beta),
                               std::abs(pt.p_hat - base.p)));
    rep.epsilon = w;
  } else {
    // the box must stay strictly inside the failing shell
    rep.epsilon = std::max(0.0, eps - 1e-12);
  }
  return rep;
}

}  // namespace fraccap
