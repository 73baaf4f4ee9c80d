#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "fraccap/field.hpp"
#include "fraccap/hajlasz.hpp"
#include "fraccap/space.hpp"

namespace fraccap {

struct KolmogorovOutcome {
  bool hypothesis_ok = true;
  double violating_s = 0.0;  // meaningful when hypothesis fails
  bool conclusion_ok = false;
  double lhs = 0.0, rhs = 0.0;
};

/// Checks the weak-type hypothesis mu({|u|>s}) s^{p*} <= C0 on a log grid
/// spanning [min positive |u| / 2, 2 max |u|], then the averaged bound
/// ( avg_B |u|^p )^{1/p} <= 2^{1/p} (C0 p/(p*-p))^{1/p*} mu(B)^{-1/p*}.
inline KolmogorovOutcome kolmogorov_check(const MetricMeasureSpace& space,
                                          const ScalarField& u, const PointSet& b,
                                          double p, double p_star, double c0) {
  if (!(p >= 1.0 && p < p_star))
    throw invalid_argument_error("kolmogorov_check: need 1 <= p < p*");
  if (b.empty()) throw invalid_argument_error("kolmogorov_check: empty ball set");

  KolmogorovOutcome out;
  double smin = std::numeric_limits<double>::infinity(), smax = 0.0;
  for (Index i = 0; i < space.n(); ++i)
    if (b.contains(i)) {
      const double a = std::abs(u[static_cast<std::size_t>(i)]);
      if (a > 0.0) smin = std::min(smin, a);
      smax = std::max(smax, a);
    }

  if (smax > 0.0) {
    const double lo = smin / 2.0, hi = smax * 2.0;
    const int steps = 128;
    for (int k = 0; k <= steps; ++k) {
      const double s = lo * std::pow(hi / lo, static_cast<double>(k) / steps);
      double mass = 0.0;
      for (Index i = 0; i < space.n(); ++i)
        if (b.contains(i) && std::abs(u[static_cast<std::size_t>(i)]) > s)
          mass += space.weight(i);
      if (mass * std::pow(s, p_star) > c0 * (1.0 + 1e-12)) {
        out.hypothesis_ok = false;
        out.violating_s = s;
        return out;
      }
    }
  }

  const double mb = set_mass(space, b);
  out.lhs = set_lt_average(space, u, b, p);
  out.rhs = std::pow(2.0, 1.0 / p) * std::pow(c0 * p / (p_star - p), 1.0 / p_star) *
            std::pow(mb, -1.0 / p_star);
  out.conclusion_ok = out.lhs <= out.rhs * (1.0 + 1e-12);
  return out;
}

/// sum_k ( sum_j a^{-|j-k|} c_j )^b / sum_j c_j^b for a finitely supported
/// nonnegative sequence; NONE when c is identically zero. The outer sum is
/// extended past the support until its tail is negligible.
inline RatioResult sequence_young_ratio(double a, double b, const std::vector<double>& c) {
  if (!(a > 1.0)) throw invalid_argument_error("sequence_young_ratio: a must be > 1");
  if (!(b > 0.0)) throw invalid_argument_error("sequence_young_ratio: b must be > 0");
  double den = 0.0;
  long lo = -1, hi = -1;
  for (std::size_t j = 0; j < c.size(); ++j) {
    if (c[j] < 0.0) throw invalid_argument_error("sequence_young_ratio: c must be >= 0");
    if (c[j] > 0.0) {
      if (lo < 0) lo = static_cast<long>(j);
      hi = static_cast<long>(j);
      den += std::pow(c[j], b);
    }
  }
  if (lo < 0) return RatioResult::none();

  auto inner = [&](long k) {
    double s = 0.0;
    for (long j = lo; j <= hi; ++j)
      s += std::pow(a, -static_cast<double>(std::labs(j - k))) *
           c[static_cast<std::size_t>(j)];
    return std::pow(s, b);
  };

  double num = 0.0;
  for (long k = lo; k <= hi; ++k) num += inner(k);
  // symmetric tails decay like a^{-b}; stop when negligible
  for (long off = 1; off < 100000; ++off) {
    const double t = inner(lo - off) + inner(hi + off);
    num += t;
    if (t <= 1e-17 * num) break;
  }
  return RatioResult::of(num / den);
}

struct SobolevPoincareParams {
  double beta = 0.5;
  double t = 1.0;
  double eps = 0.1;
  double eps_prime = 0.2;
};

/// Golden-section minimum of the convex map c -> (avg_B |u-c|^{t*})^{1/t*}.
inline double best_constant_lt(const MetricMeasureSpace& space, const ScalarField& u,
                               const PointSet& b, double t_star, double lo, double hi,
                               double tol = 1e-10) {
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  auto f = [&](double c) {
    double num = 0.0, den = 0.0;
    for (Index i = 0; i < space.n(); ++i)
      if (b.contains(i)) {
        num += std::pow(std::abs(u[static_cast<std::size_t>(i)] - c), t_star) *
               space.weight(i);
        den += space.weight(i);
      }
    return std::pow(num / den, 1.0 / t_star);
  };
  if (hi - lo < tol) return f(0.5 * (lo + hi));
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  while (hi - lo > tol) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = f(x2);
    }
  }
  return std::min(f1, f2);
}

/// LHS/RHS of the dyadic Sobolev-Poincare inequality with the constant
/// removed:
///   inf_c ( avg_{B(x0,2^{-n})} |u-c|^{t*(eps)} )^{1/t*(eps)}
///   over 2^{-n eps'} sum_{j>=n-2} 2^{-j(beta-eps')} ( avg_{B(x0,2^{-n+1})} g_j^t )^{1/t},
/// with t*(eps) = Q t / (Q - eps t).
inline RatioResult sobolev_poincare_ratio(const MetricMeasureSpace& space,
                                          const ScalarField& u, const GradientSequence& g,
                                          Index x0, int n,
                                          const SobolevPoincareParams& par,
                                          const MetricSpaceProfile& profile) {
  const double beta = par.beta, t = par.t, eps = par.eps, eps2 = par.eps_prime;
  if (!(eps > 0.0 && eps < eps2 && eps2 < beta))
    throw invalid_argument_error("sobolev_poincare_ratio: need 0 < eps < eps' < beta");
  const double bigq = profile.Q;
  if (!(t > 0.0 && t < bigq / beta))
    throw invalid_argument_error("sobolev_poincare_ratio: need 0 < t < Q/beta");
  const double t_star = bigq * t / (bigq - eps * t);

  const PointSet inner_ball = ball_points(space, BallSpec(x0, std::ldexp(1.0, -n)));
  const PointSet outer_ball = ball_points(space, BallSpec(x0, std::ldexp(1.0, -n + 1)));
  if (inner_ball.empty() || outer_ball.empty())
    throw invalid_argument_error("sobolev_poincare_ratio: empty ball");

  double ulo = u[0], uhi = u[0];
  for (double v : u) {
    ulo = std::min(ulo, v);
    uhi = std::max(uhi, v);
  }
  const double lhs = best_constant_lt(space, u, inner_ball, t_star, ulo, uhi);

  double sum = 0.0;
  const double outer_mass = set_mass(space, outer_ball);
  for (int j = std::max(n - 2, g.k_min); j <= g.k_max; ++j) {
    double m = 0.0;
    for (Index i = 0; i < space.n(); ++i)
      if (outer_ball.contains(i)) m += std::pow(g.at(j, i), t) * space.weight(i);
    sum += std::pow(2.0, -static_cast<double>(j) * (beta - eps2)) *
           std::pow(m / outer_mass, 1.0 / t);
  }
  const double rhs = std::pow(2.0, -static_cast<double>(n) * eps2) * sum;
  return make_ratio(lhs, rhs);
}

}  // namespace fraccap
