#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fraccap/field.hpp"
#include "fraccap/gagliardo.hpp"
#include "fraccap/space.hpp"
#include "fraccap/util.hpp"

namespace fraccap {

/// Dyadic scale index of a positive distance: the unique k with
/// 2^{-k-1} <= d < 2^{-k}.
inline int scale_of_distance(double d) {
  if (!(d > 0.0)) throw invalid_argument_error("scale_of_distance: d must be positive");
  int e = std::ilogb(d);  // floor(log2 d) for normal doubles
  // guard against boundary rounding
  while (std::ldexp(1.0, e) > d) --e;
  while (std::ldexp(1.0, e + 1) <= d) ++e;
  return -e - 1;
}

/// Scale window [floor(-log2 diam)-1, ceil(-log2 minDist)+1] of a space;
/// outside it no pair constraint exists.
inline std::pair<int, int> scale_window(const MetricMeasureSpace& space) {
  const double diam = space.diameter();
  const double mind = space.min_positive_dist();
  if (!(diam > 0.0)) throw invalid_argument_error("scale_window: space has one point");
  const int lo = static_cast<int>(std::floor(-std::log2(diam))) - 1;
  const int hi = static_cast<int>(std::ceil(-std::log2(mind))) + 1;
  return {std::min(lo, scale_of_distance(diam)),
          std::max(hi, scale_of_distance(mind))};
}

/// Nonnegative per-scale fields (g_k) over a dyadic window.
struct GradientSequence {
  int k_min = 0;
  int k_max = -1;
  std::vector<ScalarField> values;  // values[k - k_min], each of length n

  GradientSequence() = default;
  GradientSequence(const MetricMeasureSpace& space, int lo, int hi)
      : k_min(lo), k_max(hi),
        values(static_cast<std::size_t>(hi - lo + 1),
               ScalarField(static_cast<std::size_t>(space.n()), 0.0)) {}

  static GradientSequence for_space(const MetricMeasureSpace& space) {
    const auto [lo, hi] = scale_window(space);
    return GradientSequence(space, lo, hi);
  }

  static GradientSequence constant(const MetricMeasureSpace& space, double c) {
    GradientSequence g = for_space(space);
    for (auto& f : g.values) std::fill(f.begin(), f.end(), c);
    return g;
  }

  bool covers(int k) const { return k >= k_min && k <= k_max; }

  double at(int k, Index i) const {
    return values[static_cast<std::size_t>(k - k_min)][static_cast<std::size_t>(i)];
  }

  double& at(int k, Index i) {
    return values[static_cast<std::size_t>(k - k_min)][static_cast<std::size_t>(i)];
  }
};

/// || g ||_{L^p(Omega; l^q)} with mass weights; q = infinity allowed.
inline double gradient_norm(const MetricMeasureSpace& space, const GradientSequence& g,
                            const PointSet& omega, double p, double q) {
  std::vector<double> per_x;
  per_x.reserve(static_cast<std::size_t>(omega.count()));
  for (Index i = 0; i < space.n(); ++i) {
    if (!omega.contains(i)) continue;
    double gq;
    if (std::isinf(q)) {
      gq = 0.0;
      for (const auto& f : g.values) gq = std::max(gq, f[static_cast<std::size_t>(i)]);
    } else {
      double s = 0.0;
      for (const auto& f : g.values) s += std::pow(f[static_cast<std::size_t>(i)], q);
      gq = std::pow(s, 1.0 / q);
    }
    per_x.push_back(space.weight(i) * std::pow(gq, p));
  }
  return std::pow(pairwise_sum(per_x), 1.0 / p);
}

/// Parameters of the relaxed gradient class: pairs constrain a geometric
/// mixture of scales instead of the single matching scale.
struct VariantClass {
  double eps = 0.25;  // in (0, beta]
  int N = 1;
};

using GradientClass = std::variant<std::monostate, VariantClass>;
inline GradientClass standard_class() { return std::monostate{}; }

struct FeasibilityReport {
  bool feasible = true;
  Index worst_x = -1, worst_y = -1;
  double worst_slack = 0.0;  // negative when violated
};

namespace detail {

/// One linear inequality sum_j coeff_j * g[var_j] >= rhs over the flattened
/// variable vector (scale-major, member-minor).
struct ConstraintRow {
  std::uint32_t begin = 0, end = 0;  // entry range in the shared pools
  double rhs = 0.0;
  Index x = -1, y = -1;  // originating pair, for diagnostics
};

struct ConstraintSystem {
  std::vector<ConstraintRow> rows;
  std::vector<std::uint32_t> vars;   // pooled entries
  std::vector<double> coeffs;        // pooled entries
  std::size_t n_vars = 0;
  double row_norm2(const ConstraintRow& r) const {
    double s = 0.0;
    for (std::uint32_t e = r.begin; e < r.end; ++e) s += coeffs[e] * coeffs[e];
    return s;
  }
  double dot(const ConstraintRow& r, const std::vector<double>& g) const {
    double s = 0.0;
    for (std::uint32_t e = r.begin; e < r.end; ++e) s += coeffs[e] * g[vars[e]];
    return s;
  }
};

/// Builds the pair-constraint system of the chosen gradient class over
/// omega, with variables restricted to omega members and the given window.
inline ConstraintSystem build_constraints(const MetricMeasureSpace& space,
                                          const ScalarField& u, double beta,
                                          const GradientClass& cls, int k_min,
                                          int k_max,
                                          const std::vector<Index>& members) {
  ConstraintSystem sys;
  const std::size_t m = members.size();
  const std::size_t n_scales = static_cast<std::size_t>(k_max - k_min + 1);
  sys.n_vars = n_scales * m;
  const bool variant = std::holds_alternative<VariantClass>(cls);
  const VariantClass vc = variant ? std::get<VariantClass>(cls) : VariantClass{};

  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = a + 1; b < m; ++b) {
      const Index x = members[a], y = members[b];
      const double du = std::abs(u[static_cast<std::size_t>(x)] -
                                 u[static_cast<std::size_t>(y)]);
      if (!(du > 0.0)) continue;
      const double d = space.dist(x, y);
      ConstraintRow row;
      row.begin = static_cast<std::uint32_t>(sys.vars.size());
      row.x = x;
      row.y = y;
      if (!variant) {
        const int k = scale_of_distance(d);
        if (k < k_min || k > k_max)
          throw invalid_argument_error("scale window misses k=" + std::to_string(k));
        const std::size_t off = static_cast<std::size_t>(k - k_min) * m;
        sys.vars.push_back(static_cast<std::uint32_t>(off + a));
        sys.coeffs.push_back(1.0);
        sys.vars.push_back(static_cast<std::uint32_t>(off + b));
        sys.coeffs.push_back(1.0);
        row.rhs = du / std::pow(d, beta);
      } else {
        // scales j with 2^{-j-N} <= d contribute weight 2^{-j eps}
        bool any = false;
        for (int j = k_min; j <= k_max; ++j) {
          if (std::ldexp(1.0, -j - vc.N) > d) continue;
          const double w = std::pow(2.0, -static_cast<double>(j) * vc.eps);
          const std::size_t off = static_cast<std::size_t>(j - k_min) * m;
          sys.vars.push_back(static_cast<std::uint32_t>(off + a));
          sys.coeffs.push_back(w);
          sys.vars.push_back(static_cast<std::uint32_t>(off + b));
          sys.coeffs.push_back(w);
          any = true;
        }
        if (!any)
          throw invalid_argument_error(
              "variant window misses every admissible scale for a pair");
        row.rhs = du / std::pow(d, beta - vc.eps);
      }
      row.end = static_cast<std::uint32_t>(sys.vars.size());
      sys.rows.push_back(row);
    }
  }
  return sys;
}

}  // namespace detail

/// Checks the pair constraints of the class directly. The atomic measure
/// admits no nonempty exceptional set, so every pair must satisfy them.
inline FeasibilityReport hajlasz_feasible(const MetricMeasureSpace& space,
                                          const ScalarField& u,
                                          const GradientSequence& g, double beta,
                                          const PointSet& omega,
                                          const GradientClass& cls = standard_class(),
                                          double tol = 1e-9) {
  const auto members = omega.members();
  const bool variant = std::holds_alternative<VariantClass>(cls);
  const VariantClass vc = variant ? std::get<VariantClass>(cls) : VariantClass{};
  FeasibilityReport rep;
  rep.worst_slack = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < members.size(); ++a)
    for (std::size_t b = a + 1; b < members.size(); ++b) {
      const Index x = members[a], y = members[b];
      const double d = space.dist(x, y);
      const double du = std::abs(u[static_cast<std::size_t>(x)] -
                                 u[static_cast<std::size_t>(y)]);
      double lhs, rhs;
      if (!variant) {
        const int k = scale_of_distance(d);
        if (!g.covers(k))
          throw invalid_argument_error("gradient window misses scale k=" +
                                       std::to_string(k));
        lhs = du;
        rhs = std::pow(d, beta) * (g.at(k, x) + g.at(k, y));
      } else {
        double s = 0.0;
        for (int j = g.k_min; j <= g.k_max; ++j)
          if (std::ldexp(1.0, -j - vc.N) <= d)
            s += std::pow(2.0, -static_cast<double>(j) * vc.eps) *
                 (g.at(j, x) + g.at(j, y));
        lhs = du;
        rhs = std::pow(d, beta - vc.eps) * s;
      }
      const double slack = rhs - lhs;
      if (slack < rep.worst_slack) {
        rep.worst_slack = slack;
        rep.worst_x = x;
        rep.worst_y = y;
      }
    }
  if (!std::isfinite(rep.worst_slack)) rep.worst_slack = 0.0;  // no pairs
  rep.feasible = rep.worst_slack >= -tol;
  return rep;
}

enum class SolveStatus { exact, upper_bound };

struct SeminormResult {
  double value = 0.0;
  GradientSequence minimizer;
  SolveStatus status = SolveStatus::exact;
  double gap = 0.0;  // relative optimality gap estimate
  int iterations = 0;
};

struct SolverOptions {
  int max_outer = 60;
  int max_inner = 400;
  double tol_gap = 1e-6;       // relative duality-style gap for status=exact
  double tol_stall = 1e-9;     // relative decrease treated as a stall
  int stall_window = 50;
  int max_iterations = 20000;  // grand total of inner steps
};

namespace detail {

/// Mixed-norm objective over flattened variables, with gradient. q may be
/// infinity (max over scales).
struct MixedNorm {
  std::vector<double> mu;  // per member
  std::size_t m = 0;       // members
  std::size_t scales = 0;
  double p = 2.0, q = 2.0;

  double point_lq(const std::vector<double>& g, std::size_t slot) const {
    if (std::isinf(q)) {
      double v = 0.0;
      for (std::size_t k = 0; k < scales; ++k) v = std::max(v, g[k * m + slot]);
      return v;
    }
    double s = 0.0;
    for (std::size_t k = 0; k < scales; ++k) s += std::pow(g[k * m + slot], q);
    return std::pow(s, 1.0 / q);
  }

  double eval(const std::vector<double>& g) const {
    double s = 0.0;
    for (std::size_t x = 0; x < m; ++x) s += mu[x] * std::pow(point_lq(g, x), p);
    return std::pow(s, 1.0 / p);
  }

  /// Gradient (a subgradient at kinks) of eval; zero rows where G(x)=0.
  void add_gradient(const std::vector<double>& g, double scale_out,
                    std::vector<double>& grad) const {
    const double f = eval(g);
    if (!(f > 0.0)) return;
    const double fpow = std::pow(f, 1.0 - p);
    for (std::size_t x = 0; x < m; ++x) {
      const double gx = point_lq(g, x);
      if (!(gx > 0.0)) continue;
      if (std::isinf(q)) {
        // lowest argmax scale takes the whole subgradient
        for (std::size_t k = 0; k < scales; ++k)
          if (g[k * m + x] == gx) {
            grad[k * m + x] += scale_out * fpow * mu[x] * std::pow(gx, p - 1.0);
            break;
          }
      } else {
        const double common = scale_out * fpow * mu[x] * std::pow(gx, p - q);
        for (std::size_t k = 0; k < scales; ++k) {
          const double v = g[k * m + x];
          if (v > 0.0) grad[k * m + x] += common * std::pow(v, q - 1.0);
        }
      }
    }
  }

  /// Dual norm of a nonnegative multiplier image: L^{p'}(l^{q'}) with the
  /// matching measure weights.
  double dual_norm(const std::vector<double>& h) const {
    const double pp = p / (p - 1.0);
    double s = 0.0;
    for (std::size_t x = 0; x < m; ++x) {
      double hq;
      if (std::isinf(q)) {  // q' = 1
        hq = 0.0;
        for (std::size_t k = 0; k < scales; ++k) hq += h[k * m + x];
      } else if (q == 1.0) {  // q' = infinity
        hq = 0.0;
        for (std::size_t k = 0; k < scales; ++k) hq = std::max(hq, h[k * m + x]);
      } else {
        const double qq = q / (q - 1.0);
        double t = 0.0;
        for (std::size_t k = 0; k < scales; ++k) t += std::pow(h[k * m + x], qq);
        hq = std::pow(t, 1.0 / qq);
      }
      s += std::pow(mu[x], 1.0 - pp) * std::pow(hq, pp);
    }
    return std::pow(s, 1.0 / pp);
  }
};

/// Sweeps of projections onto violated rows followed by a global scale-up;
/// returns an exactly feasible point (given nonnegative coefficients).
inline void repair_feasibility(const ConstraintSystem& sys, std::vector<double>& g) {
  for (double& v : g) v = std::max(0.0, v);
  for (int sweep = 0; sweep < 64; ++sweep) {
    double worst = 0.0;
    for (const auto& r : sys.rows) {
      const double viol = r.rhs - sys.dot(r, g);
      if (viol > 0.0) {
        const double step = viol / sys.row_norm2(r);
        for (std::uint32_t e = r.begin; e < r.end; ++e)
          g[sys.vars[e]] += step * sys.coeffs[e];
        worst = std::max(worst, viol);
      }
    }
    if (worst <= 0.0) break;
  }
  double scale = 1.0;
  for (const auto& r : sys.rows) {
    if (!(r.rhs > 0.0)) continue;
    const double v = sys.dot(r, g);
    if (v <= 0.0) {
      // degenerate row: push its endpoints directly to equality
      const double bump = r.rhs / static_cast<double>(r.end - r.begin);
      for (std::uint32_t e = r.begin; e < r.end; ++e)
        g[sys.vars[e]] += bump / sys.coeffs[e];
    }
  }
  for (const auto& r : sys.rows)
    if (r.rhs > 0.0) scale = std::max(scale, r.rhs / sys.dot(r, g));
  scale *= 1.0 + 4e-16;
  if (scale > 1.0)
    for (double& v : g) v *= scale;
}

struct AlmOutcome {
  std::vector<double> g;
  double upper = 0.0;
  double lower = 0.0;
  int iterations = 0;
};

/// Augmented Lagrangian loop: inner projected gradient with Armijo search,
/// outer multiplier updates. Certified lower bounds come from scaling the
/// aggregated multipliers into the dual ball.
inline AlmOutcome solve_mixed_norm_alm(const ConstraintSystem& sys, const MixedNorm& norm,
                                       std::vector<double> g0, const SolverOptions& opt) {
  AlmOutcome out;
  std::vector<double> g = std::move(g0);
  for (double& v : g) v = std::max(0.0, v);

  std::vector<double> y(sys.rows.size(), 0.0);
  double rho = 1.0;
  // normalize rho to the objective scale
  {
    repair_feasibility(sys, g);
    const double f0 = norm.eval(g);
    double bmax = 0.0;
    for (const auto& r : sys.rows) bmax = std::max(bmax, r.rhs);
    if (f0 > 0.0 && bmax > 0.0) rho = std::max(1e-8, f0 / (bmax * bmax));
  }

  std::vector<double> best_g = g;
  out.upper = norm.eval(g);
  out.lower = 0.0;

  auto lagrangian = [&](const std::vector<double>& v, std::vector<double>* grad) {
    double val = norm.eval(v);
    if (grad) {
      std::fill(grad->begin(), grad->end(), 0.0);
      norm.add_gradient(v, 1.0, *grad);
    }
    for (std::size_t i = 0; i < sys.rows.size(); ++i) {
      const auto& r = sys.rows[i];
      const double s = r.rhs - sys.dot(r, v);
      const double t = rho * s + y[i];
      if (t > 0.0) {
        val += (t * t - y[i] * y[i]) / (2.0 * rho);
        if (grad)
          for (std::uint32_t e = r.begin; e < r.end; ++e)
            (*grad)[sys.vars[e]] -= t * sys.coeffs[e];
      } else {
        val -= y[i] * y[i] / (2.0 * rho);
      }
    }
    return val;
  };

  std::vector<double> grad(sys.n_vars, 0.0), trial(sys.n_vars, 0.0);
  double step = 1.0;
  int total_iters = 0;
  double prev_upper = out.upper;
  int stall = 0;

  for (int outer = 0; outer < opt.max_outer; ++outer) {
    double lval = lagrangian(g, &grad);
    for (int inner = 0; inner < opt.max_inner; ++inner) {
      if (++total_iters > opt.max_iterations) break;
      // projected gradient with backtracking
      double gnorm2 = 0.0;
      for (double gv : grad) gnorm2 += gv * gv;
      if (gnorm2 <= 1e-30) break;
      bool accepted = false;
      for (int bt = 0; bt < 40; ++bt) {
        for (std::size_t j = 0; j < sys.n_vars; ++j)
          trial[j] = std::max(0.0, g[j] - step * grad[j]);
        const double tval = lagrangian(trial, nullptr);
        double dec = 0.0;
        for (std::size_t j = 0; j < sys.n_vars; ++j) {
          const double diff = g[j] - trial[j];
          dec += grad[j] * diff - 0.5 * diff * diff / step;
        }
        if (tval <= lval - 1e-4 * std::max(dec, 0.0) && tval <= lval) {
          g.swap(trial);
          lval = tval;
          accepted = true;
          step *= 1.6;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) break;
      lval = lagrangian(g, &grad);
      double proj_res = 0.0;
      for (std::size_t j = 0; j < sys.n_vars; ++j) {
        const double moved = std::max(0.0, g[j] - grad[j]) - g[j];
        proj_res += moved * moved;
      }
      if (proj_res <= 1e-20 * (1.0 + lval * lval)) break;
    }

    // multiplier update and penalty growth
    double max_viol = 0.0;
    for (std::size_t i = 0; i < sys.rows.size(); ++i) {
      const double s = sys.rows[i].rhs - sys.dot(sys.rows[i], g);
      y[i] = std::max(0.0, y[i] + rho * s);
      max_viol = std::max(max_viol, s);
    }

    // certified bounds from the current iterate and multipliers
    std::vector<double> feas = g;
    repair_feasibility(sys, feas);
    const double ub = norm.eval(feas);
    if (ub < out.upper) {
      out.upper = ub;
      best_g = feas;
    }
    {
      std::vector<double> h(sys.n_vars, 0.0);
      for (std::size_t i = 0; i < sys.rows.size(); ++i) {
        const auto& r = sys.rows[i];
        for (std::uint32_t e = r.begin; e < r.end; ++e)
          h[sys.vars[e]] += y[i] * sys.coeffs[e];
      }
      const double dn = norm.dual_norm(h);
      if (dn > 0.0) {
        double lb = 0.0;
        for (std::size_t i = 0; i < sys.rows.size(); ++i) lb += y[i] * sys.rows[i].rhs;
        lb /= std::max(1.0, dn);
        out.lower = std::max(out.lower, lb);
      }
    }
    const double ref = std::max(out.upper, 1e-300);
    if ((out.upper - out.lower) / ref <= opt.tol_gap) break;
    if (std::abs(prev_upper - out.upper) <= opt.tol_stall * ref) {
      if (++stall >= 4) break;
    } else {
      stall = 0;
    }
    prev_upper = out.upper;
    if (max_viol > 1e-10 * ref) rho *= 4.0;
    if (total_iters > opt.max_iterations) break;
  }

  out.g = std::move(best_g);
  out.iterations = total_iters;
  return out;
}

}  // namespace detail

/// Minimal || g ||_{L^p(Omega, l^q)} over the chosen gradient class of u.
inline SeminormResult htl_seminorm(const MetricMeasureSpace& space, const ScalarField& u,
                                   double beta, double p, double q, const PointSet& omega,
                                   const GradientClass& cls = standard_class(),
                                   const SolverOptions& opt = {}) {
  if (!(beta > 0.0 && beta < 1.0)) throw invalid_argument_error("beta must lie in (0,1)");
  if (!(p > 1.0) || !std::isfinite(p))
    throw invalid_argument_error("htl_seminorm: p must lie in (1,inf)");
  if (!(q >= 1.0)) throw invalid_argument_error("htl_seminorm: q must be >= 1");
  if (omega.empty()) throw invalid_argument_error("htl_seminorm: empty omega");

  const auto [k_min, k_max] = scale_window(space);
  const auto members = omega.members();
  const auto sys =
      detail::build_constraints(space, u, beta, cls, k_min, k_max, members);

  SeminormResult res;
  res.minimizer = GradientSequence(space, k_min, k_max);
  if (sys.rows.empty()) return res;  // u constant on omega: g = 0 is optimal

  detail::MixedNorm norm;
  norm.m = members.size();
  norm.scales = static_cast<std::size_t>(k_max - k_min + 1);
  norm.p = p;
  norm.q = q;
  norm.mu.resize(norm.m);
  for (std::size_t s = 0; s < norm.m; ++s) norm.mu[s] = space.weight(members[s]);

  // Scale-decoupled start: per scale, half the worst incident requirement.
  std::vector<double> g0(sys.n_vars, 0.0);
  for (const auto& r : sys.rows)
    for (std::uint32_t e = r.begin; e < r.end; ++e) {
      const double need =
          0.5 * r.rhs / (sys.coeffs[e] * static_cast<double>((r.end - r.begin) / 2));
      g0[sys.vars[e]] = std::max(g0[sys.vars[e]], need);
    }

  // Relaxed classes accept every standard gradient, so the standard solve
  // seeds them; this keeps variant <= standard structurally.
  if (std::holds_alternative<VariantClass>(cls)) {
    SeminormResult std_res =
        htl_seminorm(space, u, beta, p, q, omega, standard_class(), opt);
    for (int k = k_min; k <= k_max; ++k)
      for (std::size_t s = 0; s < members.size(); ++s)
        g0[static_cast<std::size_t>(k - k_min) * norm.m + s] =
            std::max(0.0, std_res.minimizer.at(k, members[s]));
  }

  auto outcome = detail::solve_mixed_norm_alm(sys, norm, std::move(g0), opt);

  res.value = outcome.upper;
  res.iterations = outcome.iterations;
  const double ref = std::max(outcome.upper, 1e-300);
  res.gap = std::max(0.0, (outcome.upper - outcome.lower) / ref);
  res.status = res.gap <= opt.tol_gap ? SolveStatus::exact : SolveStatus::upper_bound;
  for (int k = k_min; k <= k_max; ++k)
    for (std::size_t s = 0; s < members.size(); ++s)
      res.minimizer.at(k, members[s]) =
          outcome.g[static_cast<std::size_t>(k - k_min) * norm.m + s];
  return res;
}

}  // namespace fraccap
