#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "fraccap/capacity.hpp"
#include "fraccap/space.hpp"

namespace fraccap {

/// rho-restricted Hausdorff content of codimension d: the cheapest ball
/// cover of F under the weight mu(B) r^{-d}, radii capped at rho.
struct ContentProblem {
  const MetricMeasureSpace* space = nullptr;
  PointSet f;
  double codim = 0.0;
  double rho = 1.0;
  bool open_balls = false;  // candidate ball convention; closed by default

  void check() const {
    if (!(rho > 0.0)) throw invalid_argument_error("content: rho must be positive");
    if (!(codim >= 0.0)) throw invalid_argument_error("content: codim must be >= 0");
  }
};

enum class CoverMode { exact, greedy_upper, lp_lower };

struct CoverBall {
  Index center = 0;
  double radius = 0.0;
};

struct CoverSolution {
  std::vector<CoverBall> balls;  // empty in lp_lower mode
  double value = 0.0;
  CoverMode mode = CoverMode::exact;
  bool bracket = false;  // exact cutoff exceeded; value is a bound only
};

namespace detail {

struct Candidate {
  Index center;
  double radius;
  double weight;                    // mu(ball) * r^{-d}
  std::vector<std::uint64_t> bits;  // trace over F members
};

inline bool bits_subset(const std::vector<std::uint64_t>& a,
                        const std::vector<std::uint64_t>& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] & ~b[i]) return false;
  return true;
}

inline int bits_count(const std::vector<std::uint64_t>& a) {
  int c = 0;
  for (auto w : a) c += __builtin_popcountll(w);
  return c;
}

/// Candidate balls: centers within reach of F, radii at the realized
/// distances up to rho plus the singleton radius; dominated candidates
/// (worse trace at no smaller weight) are dropped.
inline std::vector<Candidate> build_candidates(const ContentProblem& pb,
                                               const std::vector<Index>& fmem) {
  const auto& space = *pb.space;
  std::vector<double> radii;
  if (space.n() >= 2) {
    for (double d : unique_distances(space))
      if (d <= pb.rho) radii.push_back(d);
    radii.insert(radii.begin(), 0.5 * space.min_positive_dist());
  } else {
    radii.push_back(pb.rho);
  }
  radii.erase(std::unique(radii.begin(), radii.end()), radii.end());

  std::vector<Index> centers;
  for (Index c = 0; c < space.n(); ++c) {
    double dmin = std::numeric_limits<double>::infinity();
    for (Index e : fmem) dmin = std::min(dmin, space.dist(c, e));
    if (dmin <= pb.rho) centers.push_back(c);
  }
  if (centers.size() * radii.size() > 100000)
    throw invalid_argument_error(
        "content: candidate set exceeds 100000 balls; use a coarser radius set");

  const std::size_t words = (fmem.size() + 63) / 64;
  std::vector<Candidate> cands;
  for (Index c : centers)
    for (double r : radii) {
      Candidate cand{c, r, 0.0, std::vector<std::uint64_t>(words, 0)};
      double mass = 0.0;
      for (Index z = 0; z < space.n(); ++z) {
        const double d = space.dist(c, z);
        if (pb.open_balls ? (d < r) : (d <= r)) mass += space.weight(z);
      }
      bool any = false;
      for (std::size_t i = 0; i < fmem.size(); ++i) {
        const double d = space.dist(c, fmem[i]);
        if (pb.open_balls ? (d < r) : (d <= r)) {
          cand.bits[i / 64] |= 1ull << (i % 64);
          any = true;
        }
      }
      if (!any) continue;
      cand.weight = mass * std::pow(r, -pb.codim);
      cands.push_back(std::move(cand));
    }

  // keep the cheapest candidate per trace, then drop dominated ones
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.bits != b.bits) return a.bits < b.bits;
    if (a.weight != b.weight) return a.weight < b.weight;
    if (a.radius != b.radius) return a.radius < b.radius;
    return a.center < b.center;
  });
  cands.erase(std::unique(cands.begin(), cands.end(),
                          [](const Candidate& a, const Candidate& b) {
                            return a.bits == b.bits;
                          }),
              cands.end());
  std::vector<char> dead(cands.size(), 0);
  for (std::size_t i = 0; i < cands.size(); ++i)
    for (std::size_t j = 0; j < cands.size(); ++j) {
      if (i == j || dead[i] || dead[j]) continue;
      if (bits_subset(cands[i].bits, cands[j].bits) && cands[j].weight <= cands[i].weight)
        dead[i] = 1;
    }
  std::vector<Candidate> out;
  for (std::size_t i = 0; i < cands.size(); ++i)
    if (!dead[i]) out.push_back(std::move(cands[i]));
  // deterministic order: by weight then radius then center
  std::sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
    if (a.weight != b.weight) return a.weight < b.weight;
    if (a.radius != b.radius) return a.radius < b.radius;
    return a.center < b.center;
  });
  return out;
}

inline CoverSolution greedy_cover(const std::vector<Candidate>& cands, std::size_t nf) {
  const std::size_t words = (nf + 63) / 64;
  std::vector<std::uint64_t> covered(words, 0);
  std::size_t ncov = 0;
  CoverSolution sol;
  sol.mode = CoverMode::greedy_upper;
  while (ncov < nf) {
    double best_ratio = std::numeric_limits<double>::infinity();
    std::size_t best = cands.size();
    for (std::size_t i = 0; i < cands.size(); ++i) {
      int gain = 0;
      for (std::size_t w = 0; w < words; ++w)
        gain += __builtin_popcountll(cands[i].bits[w] & ~covered[w]);
      if (gain == 0) continue;
      const double ratio = cands[i].weight / gain;
      if (ratio < best_ratio) {
        best_ratio = ratio;
        best = i;
      }
    }
    if (best == cands.size())
      throw invalid_argument_error("content: candidates cannot cover F");
    for (std::size_t w = 0; w < words; ++w) covered[w] |= cands[best].bits[w];
    std::size_t now = 0;
    for (std::size_t w = 0; w < words; ++w) now += std::size_t(__builtin_popcountll(covered[w]));
    ncov = now;
    sol.balls.push_back({cands[best].center, cands[best].radius});
    sol.value += cands[best].weight;
  }
  return sol;
}

/// Branch and bound over <= 24 pruned candidates: branch on the uncovered
/// element with the fewest remaining covers; the admissible bound charges
/// each uncovered element its cheapest per-element share.
struct ExactCover {
  const std::vector<Candidate>& cands;
  std::size_t nf, words;
  std::vector<double> min_share;  // per element
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> best_pick, pick;

  ExactCover(const std::vector<Candidate>& c, std::size_t n)
      : cands(c), nf(n), words((n + 63) / 64), min_share(n, 0.0) {
    for (std::size_t e = 0; e < nf; ++e) {
      double m = std::numeric_limits<double>::infinity();
      for (const auto& cd : cands)
        if (cd.bits[e / 64] & (1ull << (e % 64)))
          m = std::min(m, cd.weight / bits_count(cd.bits));
      min_share[e] = m;
    }
  }

  double bound(const std::vector<std::uint64_t>& covered) const {
    double s = 0.0;
    for (std::size_t e = 0; e < nf; ++e)
      if (!(covered[e / 64] & (1ull << (e % 64)))) s += min_share[e];
    return s;
  }

  void dfs(std::vector<std::uint64_t>& covered, double cost) {
    std::size_t pivot = nf;
    int fewest = std::numeric_limits<int>::max();
    bool done = true;
    for (std::size_t e = 0; e < nf; ++e) {
      if (covered[e / 64] & (1ull << (e % 64))) continue;
      done = false;
      int cnt = 0;
      for (const auto& cd : cands)
        if (cd.bits[e / 64] & (1ull << (e % 64))) ++cnt;
      if (cnt < fewest) {
        fewest = cnt;
        pivot = e;
      }
    }
    if (done) {
      if (cost < best) {
        best = cost;
        best_pick = pick;
      }
      return;
    }
    if (cost + bound(covered) >= best) return;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      const auto& cd = cands[i];
      if (!(cd.bits[pivot / 64] & (1ull << (pivot % 64)))) continue;
      std::vector<std::uint64_t> next(words);
      for (std::size_t w = 0; w < words; ++w) next[w] = covered[w] | cd.bits[w];
      pick.push_back(i);
      dfs(next, cost + cd.weight);
      pick.pop_back();
    }
  }
};

/// Dual-feasible lower bound for the fractional cover LP, via multiplicative
/// scaling of element prices; weak duality certifies it.
inline double lp_lower_bound(const std::vector<Candidate>& cands, std::size_t nf) {
  std::vector<double> y(nf, 0.0);
  for (std::size_t e = 0; e < nf; ++e) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& cd : cands)
      if (cd.bits[e / 64] & (1ull << (e % 64)))
        m = std::min(m, cd.weight / bits_count(cd.bits));
    y[e] = std::isfinite(m) ? m : 0.0;
  }
  double best = 0.0;
  for (int pass = 0; pass < 200; ++pass) {
    // scale down per violated candidate
    for (const auto& cd : cands) {
      double s = 0.0;
      for (std::size_t e = 0; e < nf; ++e)
        if (cd.bits[e / 64] & (1ull << (e % 64))) s += y[e];
      if (s > cd.weight && s > 0.0) {
        const double f = cd.weight / s;
        for (std::size_t e = 0; e < nf; ++e)
          if (cd.bits[e / 64] & (1ull << (e % 64))) y[e] *= f;
      }
    }
    // certify: global scale to exact feasibility, record the dual value
    double worst = 1.0;
    for (const auto& cd : cands) {
      double s = 0.0;
      for (std::size_t e = 0; e < nf; ++e)
        if (cd.bits[e / 64] & (1ull << (e % 64))) s += y[e];
      if (cd.weight > 0.0) worst = std::max(worst, s / cd.weight);
    }
    double total = 0.0;
    for (double v : y) total += v;
    best = std::max(best, total / (worst * (1.0 + 1e-14)));
    // gentle price push for the next pass
    for (double& v : y) v *= 1.05;
  }
  return best;
}

}  // namespace detail

inline CoverSolution hausdorff_content(const ContentProblem& pb, CoverMode mode) {
  pb.check();
  CoverSolution sol;
  sol.mode = mode;
  if (pb.f.empty()) return sol;  // value 0 with an empty cover

  const auto fmem = pb.f.members();
  const auto cands = detail::build_candidates(pb, fmem);
  if (cands.empty()) throw invalid_argument_error("content: empty candidate set");

  switch (mode) {
    case CoverMode::greedy_upper:
      return detail::greedy_cover(cands, fmem.size());
    case CoverMode::lp_lower: {
      sol.value = detail::lp_lower_bound(cands, fmem.size());
      return sol;
    }
    case CoverMode::exact: {
      if (cands.size() > 24) {
        sol = detail::greedy_cover(cands, fmem.size());
        sol.mode = CoverMode::exact;
        sol.bracket = true;
        return sol;
      }
      detail::ExactCover ex(cands, fmem.size());
      auto greedy = detail::greedy_cover(cands, fmem.size());
      ex.best = greedy.value * (1.0 + 1e-12);
      std::vector<std::uint64_t> covered(ex.words, 0);
      ex.dfs(covered, 0.0);
      if (ex.best_pick.empty()) {  // greedy was already optimal
        sol.balls = greedy.balls;
        sol.value = greedy.value;
        return sol;
      }
      sol.value = 0.0;
      for (std::size_t i : ex.best_pick) {
        sol.balls.push_back({cands[i].center, cands[i].radius});
        sol.value += cands[i].weight;
      }
      return sol;
    }
  }
  return sol;
}

struct ContentDensityResult {
  double lower = 0.0;  // certified ratio bracket
  double upper = 0.0;
  double num_value = 0.0, den_value = 0.0;
  bool exact = false;  // both contents solved exactly
};

/// H^{mu,d}_r(E cap closed B(x,r)) / H^{mu,d}_r(closed B(x,r)).
inline ContentDensityResult content_density_ratio(const MetricMeasureSpace& space,
                                                  const PointSet& e, Index x, double r,
                                                  double codim) {
  if (!e.contains(x))
    throw invalid_argument_error("content_density_ratio: x must lie in E");
  const PointSet closed_ball = ball_points(space, BallSpec(x, r, true));
  ContentProblem num{&space, e.intersect(closed_ball), codim, r, false};
  ContentProblem den{&space, closed_ball, codim, r, false};

  ContentDensityResult out;
  const auto num_exact = hausdorff_content(num, CoverMode::exact);
  const auto den_exact = hausdorff_content(den, CoverMode::exact);
  out.exact = !num_exact.bracket && !den_exact.bracket;
  out.num_value = num_exact.value;
  out.den_value = den_exact.value;
  if (out.exact) {
    out.lower = out.upper = num_exact.value / den_exact.value;
    return out;
  }
  const double num_lo =
      num_exact.bracket ? hausdorff_content(num, CoverMode::lp_lower).value
                        : num_exact.value;
  const double num_hi = num_exact.value;  // greedy when bracketed
  const double den_lo =
      den_exact.bracket ? hausdorff_content(den, CoverMode::lp_lower).value
                        : den_exact.value;
  const double den_hi = den_exact.value;
  out.lower = num_lo / den_hi;
  out.upper = num_hi / std::max(den_lo, 1e-300);
  return out;
}

struct CodimBoundResult {
  RatioResult ratio;
  CoverSolution content;
  CapacityResult cap;
  bool bracket = false;
};

/// H^{mu, beta eta}_{5 Lambda r}(E) / ( r^{beta(p-eta)} cap(E, 2B, Lambda B) ).
inline CodimBoundResult codim_bound_check(const MetricMeasureSpace& space,
                                          const PointSet& e, const BallSpec& ball,
                                          double lambda_cap, const GagliardoParams& params,
                                          double eta,
                                          const CapacitySolveOptions& opt = {}) {
  if (!(lambda_cap > 2.0))
    throw invalid_argument_error("codim_bound_check: Lambda must exceed 2");
  if (!(eta >= 0.0 && eta < params.p))
    throw invalid_argument_error("codim_bound_check: eta must lie in [0, p)");
  CodimBoundResult out;
  if (e.empty()) {
    out.ratio = RatioResult::none();
    return out;
  }
  ContentProblem cp{&space, e, params.beta * eta, 5.0 * lambda_cap * ball.radius, false};
  out.content = hausdorff_content(cp, CoverMode::exact);
  out.bracket = out.content.bracket;

  CapacityProblem pb;
  pb.space = &space;
  pb.e = e;
  pb.ball = ball;
  pb.lambda_cap = lambda_cap;
  pb.params = params;
  out.cap = fractional_capacity(pb, opt);

  const double denom =
      std::pow(ball.radius, params.beta * (params.p - eta)) * out.cap.value;
  out.ratio = make_ratio(out.content.value, denom);
  return out;
}

}  // namespace fraccap
