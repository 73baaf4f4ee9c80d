#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "fraccap/field.hpp"
#include "fraccap/space.hpp"
#include "fraccap/util.hpp"

namespace fraccap {

struct GagliardoParams {
  double beta = 0.5;
  double p = 2.0;
  double q = 2.0;

  void check() const {
    if (!(beta > 0.0 && beta < 1.0))
      throw invalid_argument_error("beta must lie in (0,1)");
    if (!(p >= 1.0) || !std::isfinite(p))
      throw invalid_argument_error("p must lie in [1,inf)");
    if (!(q >= 1.0) || !std::isfinite(q))
      throw invalid_argument_error("q must lie in [1,inf)");
  }
};

namespace detail {

/// Distances from x to every point, sorted, with prefix weights. Answers
/// open-ball mass queries in O(log n).
struct SortedNeighborhood {
  std::vector<double> dist;         // ascending
  std::vector<double> prefix_mass;  // prefix_mass[k] = sum of weights with dist < dist[k+1]

  static SortedNeighborhood build(const MetricMeasureSpace& space, Index x) {
    const Index n = space.n();
    std::vector<std::pair<double, double>> dm(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i)
      dm[static_cast<std::size_t>(i)] = {space.dist(x, i), space.weight(i)};
    std::sort(dm.begin(), dm.end());
    SortedNeighborhood out;
    out.dist.resize(dm.size());
    out.prefix_mass.resize(dm.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < dm.size(); ++k) {
      out.dist[k] = dm[k].first;
      acc += dm[k].second;
      out.prefix_mass[k] = acc;
    }
    return out;
  }

  double open_ball_mass(double r) const {
    const auto it = std::lower_bound(dist.begin(), dist.end(), r);
    const std::size_t k = static_cast<std::size_t>(it - dist.begin());
    return k == 0 ? 0.0 : prefix_mass[k - 1];
  }
};

}  // namespace detail

/// Precomputed kernel coefficients for one (space, domain, beta, q):
/// coeff(x,y) = mu(y) / ( d(x,y)^{beta q} * mu(B(x,d(x,y))) ), rows over the
/// domain ordered by ascending point index. Built once and shared across
/// fields; all queries are const.
class GagliardoTable {
 public:
  GagliardoTable(const MetricMeasureSpace& space, const PointSet& domain,
                 double beta, double q)
      : space_(&space), beta_(beta), q_(q), members_(domain.members()) {
    const std::size_t m = members_.size();
    coeff_.assign(m * m, 0.0);
    parallel_for(m, [&](std::size_t r) {
      const Index x = members_[r];
      const auto nb = detail::SortedNeighborhood::build(space, x);
      double* row = coeff_.data() + r * m;
      for (std::size_t c = 0; c < m; ++c) {
        const Index y = members_[c];
        if (y == x) continue;  // diagonal integrand defined as 0
        const double d = space.dist(x, y);
        row[c] = space.weight(y) /
                 (std::pow(d, beta * q) * nb.open_ball_mass(d));
      }
    });
  }

  const std::vector<Index>& members() const { return members_; }
  double beta() const { return beta_; }
  double q() const { return q_; }
  double coeff(std::size_t row, std::size_t col) const {
    return coeff_[row * members_.size() + col];
  }

  /// G_{u,beta,q,domain}(members[row])^q, summed index-ascending pairwise.
  double pointwise_q_power(const ScalarField& u, std::size_t row) const {
    const std::size_t m = members_.size();
    const double ux = u[static_cast<std::size_t>(members_[row])];
    const double* c = coeff_.data() + row * m;
    std::vector<double> terms(m, 0.0);
    for (std::size_t k = 0; k < m; ++k)
      terms[k] = c[k] * std::pow(std::abs(ux - u[static_cast<std::size_t>(members_[k])]), q_);
    return pairwise_sum(terms);
  }

  double pointwise(const ScalarField& u, std::size_t row) const {
    return std::pow(pointwise_q_power(u, row), 1.0 / q_);
  }

  /// sum_{x in domain} G(x)^p mu(x).
  double energy(const ScalarField& u, double p) const {
    const std::size_t m = members_.size();
    std::vector<double> per_x(m, 0.0);
    parallel_for(m, [&](std::size_t r) {
      per_x[r] = space_->weight(members_[r]) *
                 std::pow(pointwise_q_power(u, r), p / q_);
    });
    return pairwise_sum(per_x);
  }

 private:
  const MetricMeasureSpace* space_;
  double beta_;
  double q_;
  std::vector<Index> members_;
  std::vector<double> coeff_;
};

/// G_{u,beta,q,A}(x) for arbitrary x, without a prebuilt table.
inline double gagliardo_pointwise(const MetricMeasureSpace& space, const ScalarField& u,
                                  double beta, double q, const PointSet& a, Index x) {
  GagliardoParams{beta, 1.0, q}.check();
  if (a.empty()) throw invalid_argument_error("gagliardo_pointwise: empty set A");
  space.check_point(x);
  const auto nb = detail::SortedNeighborhood::build(space, x);
  const double ux = u[static_cast<std::size_t>(x)];
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(a.count()));
  for (Index y = 0; y < space.n(); ++y) {
    if (!a.contains(y) || y == x) continue;
    const double d = space.dist(x, y);
    terms.push_back(std::pow(std::abs(ux - u[static_cast<std::size_t>(y)]), q) *
                    space.weight(y) / (std::pow(d, beta * q) * nb.open_ball_mass(d)));
  }
  return std::pow(pairwise_sum(terms), 1.0 / q);
}

/// Integral of G_{u,beta,q,domain}^p over the domain.
inline double gagliardo_energy(const MetricMeasureSpace& space, const ScalarField& u,
                               const GagliardoParams& params, const PointSet& domain) {
  params.check();
  if (domain.empty()) return 0.0;
  GagliardoTable table(space, domain, params.beta, params.q);
  return table.energy(u, params.p);
}

/// M_R f(x) = sup_{0<r<=R} avg_{B(x,r)} |f|. The sup over continuum radii is
/// attained on closed balls at the realized distances from x below R, plus
/// the singleton {x}.
inline double restricted_maximal(const MetricMeasureSpace& space, const ScalarField& f,
                                 double R, Index x) {
  if (!(R > 0.0)) throw invalid_argument_error("restricted_maximal: R must be positive");
  space.check_point(x);
  const Index n = space.n();
  std::vector<std::pair<double, Index>> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = {space.dist(x, i), i};
  std::sort(order.begin(), order.end());

  double best = 0.0, mass = 0.0, integral = 0.0;
  std::size_t k = 0;
  while (k < order.size()) {
    const double d = order[k].first;
    if (d >= R && d > 0.0) break;
    // absorb the whole tie group at distance d, then B(x, d+) is a candidate
    while (k < order.size() && order[k].first == d) {
      integral += std::abs(f[static_cast<std::size_t>(order[k].second)]) *
                  space.weight(order[k].second);
      mass += space.weight(order[k].second);
      ++k;
    }
    best = std::max(best, integral / mass);
  }
  return best;
}

/// Centered maximal function: every radius admissible.
inline double centered_maximal(const MetricMeasureSpace& space, const ScalarField& f,
                               Index x) {
  return restricted_maximal(space, f, space.diameter() + 1.0, x);
}

/// Outcome of a ratio check that can degenerate.
struct RatioResult {
  enum class Kind { value, none, infinite } kind = Kind::none;
  double value = 0.0;

  static RatioResult of(double v) { return {Kind::value, v}; }
  static RatioResult none() { return {Kind::none, 0.0}; }
  static RatioResult infinite() { return {Kind::infinite, 0.0}; }
  bool is_value() const { return kind == Kind::value; }
  bool is_none() const { return kind == Kind::none; }
  bool is_infinite() const { return kind == Kind::infinite; }
};

inline RatioResult make_ratio(double lhs, double rhs) {
  if (rhs > 0.0) return RatioResult::of(lhs / rhs);
  if (lhs > 0.0) return RatioResult::infinite();
  return RatioResult::none();
}

/// LHS/RHS of the fractional (beta,t,p,q)-Poincare inequality on the ball,
/// with the constant removed:
///   ( avg_B |u-u_B|^t )^{1/t}  /  ( r^beta ( avg_{lambda B} G^p )^{1/p} ).
inline RatioResult poincare_ratio(const MetricMeasureSpace& space, const ScalarField& u,
                                  const BallSpec& ball, double beta, double t, double p,
                                  double q, double lambda) {
  GagliardoParams{beta, p, q}.check();
  if (!(t >= 1.0)) throw invalid_argument_error("poincare_ratio: t must be >= 1");
  if (!(lambda >= 1.0)) throw invalid_argument_error("poincare_ratio: lambda must be >= 1");
  const PointSet b = ball_points(space, ball);
  const PointSet lb = ball_points(space, ball.scaled(lambda));
  if (b.empty() || lb.empty()) throw invalid_argument_error("poincare_ratio: empty ball");

  const double ub = set_average(space, u, b);
  double num = 0.0, den = 0.0;
  for (Index i = 0; i < space.n(); ++i)
    if (b.contains(i)) {
      num += std::pow(std::abs(u[static_cast<std::size_t>(i)] - ub), t) * space.weight(i);
      den += space.weight(i);
    }
  const double lhs = std::pow(num / den, 1.0 / t);

  GagliardoTable table(space, lb, beta, q);
  const double rhs = std::pow(ball.radius, beta) *
                     std::pow(table.energy(u, p) / set_mass(space, lb), 1.0 / p);
  return make_ratio(lhs, rhs);
}

}  // namespace fraccap
