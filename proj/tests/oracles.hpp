#pragma once

// Test-only oracles, kept independent of the solver paths they check.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "fraccap/hajlasz.hpp"
#include "fraccap/space.hpp"

namespace fraccap_test {

using fraccap::BallSpec;
using fraccap::Index;
using fraccap::MetricMeasureSpace;
using fraccap::PointSet;
using fraccap::ScalarField;

/// Exact minimum of sum_i d_i g_i^2 subject to A g >= b (A with nonnegative
/// entries, b > 0), by exhaustive KKT active-set enumeration. Nonnegativity
/// of g never binds for such data, so subsets of the rows suffice. Returns
/// the squared-norm value; feasible set must be nonempty.
inline double quadratic_min_enumerated(const std::vector<double>& diag,
                                       const std::vector<std::vector<double>>& rows,
                                       const std::vector<double>& rhs) {
  const std::size_t nvar = diag.size();
  const std::size_t nrow = rows.size();
  if (nrow == 0) return 0.0;
  if (nrow > 16) throw std::runtime_error("oracle limited to 16 rows");
  double best = std::numeric_limits<double>::infinity();
  for (std::uint32_t mask = 1; mask < (1u << nrow); ++mask) {
    std::vector<std::size_t> act;
    for (std::size_t i = 0; i < nrow; ++i)
      if (mask & (1u << i)) act.push_back(i);
    const std::size_t m = act.size();
    Eigen::MatrixXd K(m, m);
    Eigen::VectorXd c(m);
    for (std::size_t i = 0; i < m; ++i) {
      c(long(i)) = rhs[act[i]];
      for (std::size_t j = 0; j < m; ++j) {
        double s = 0.0;
        for (std::size_t v = 0; v < nvar; ++v)
          s += rows[act[i]][v] * rows[act[j]][v] / diag[v];
        K(long(i), long(j)) = s;
      }
    }
    Eigen::VectorXd lam = K.fullPivLu().solve(c);
    if ((K * lam - c).norm() > 1e-9 * (1.0 + c.norm())) continue;
    bool dual_ok = true;
    for (long i = 0; i < lam.size(); ++i)
      if (lam(i) < -1e-9) dual_ok = false;
    if (!dual_ok) continue;
    std::vector<double> g(nvar, 0.0);
    for (std::size_t v = 0; v < nvar; ++v) {
      double s = 0.0;
      for (std::size_t i = 0; i < m; ++i) s += rows[act[i]][v] * lam(long(i));
      g[v] = s / diag[v];
    }
    bool primal_ok = true;
    for (std::size_t i = 0; i < nrow && primal_ok; ++i) {
      double s = 0.0;
      for (std::size_t v = 0; v < nvar; ++v) s += rows[i][v] * g[v];
      if (s < rhs[i] - 1e-9 * (1.0 + std::abs(rhs[i]))) primal_ok = false;
    }
    if (!primal_ok) continue;
    double val = 0.0;
    for (std::size_t v = 0; v < nvar; ++v) val += diag[v] * g[v] * g[v];
    best = std::min(best, val);
  }
  return best;
}

/// Exact HTL seminorm for p = q = 2 on tiny instances, via the enumeration
/// above. Variables are (active scale, point) slots.
inline double htl_seminorm_oracle_22(const MetricMeasureSpace& space, const ScalarField& u,
                                     double beta, const PointSet& omega) {
  const auto members = omega.members();
  const std::size_t m = members.size();
  std::vector<int> scales;
  std::vector<std::vector<double>> rows;
  std::vector<double> rhs;
  auto scale_slot = [&](int k) {
    for (std::size_t i = 0; i < scales.size(); ++i)
      if (scales[i] == k) return i;
    scales.push_back(k);
    return scales.size() - 1;
  };
  struct PairRow {
    std::size_t ka, a, b;
    double need;
  };
  std::vector<PairRow> prows;
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b) {
      const double du =
          std::abs(u[size_t(members[a])] - u[size_t(members[b])]);
      if (!(du > 0.0)) continue;
      const double d = space.dist(members[a], members[b]);
      prows.push_back({scale_slot(fraccap::scale_of_distance(d)), a, b,
                       du / std::pow(d, beta)});
    }
  const std::size_t nvar = scales.size() * m;
  std::vector<double> diag(nvar);
  for (std::size_t k = 0; k < scales.size(); ++k)
    for (std::size_t s = 0; s < m; ++s)
      diag[k * m + s] = space.weight(members[s]);
  for (const auto& pr : prows) {
    std::vector<double> row(nvar, 0.0);
    row[pr.ka * m + pr.a] = 1.0;
    row[pr.ka * m + pr.b] = 1.0;
    rows.push_back(row);
    rhs.push_back(pr.need);
  }
  return std::sqrt(quadratic_min_enumerated(diag, rows, rhs));
}

/// Independent dense oracle for p = q = 2 relative capacity: assembles the
/// full quadratic form with brute-force ball masses and solves the
/// stationarity system with a full-pivot LU.
inline double capacity_oracle_22(const MetricMeasureSpace& s, const PointSet& e,
                                 const BallSpec& ball, double lambda_cap, double beta) {
  const PointSet dom = fraccap::ball_points(s, ball.scaled(lambda_cap));
  const PointSet twob = fraccap::ball_points(s, ball.scaled(2.0));
  const auto members = dom.members();
  const std::size_t m = members.size();

  auto openmass = [&](Index x, double r) {
    double acc = 0.0;
    for (Index z = 0; z < s.n(); ++z)
      if (s.dist(x, z) < r) acc += s.weight(z);
    return acc;
  };
  std::vector<std::vector<double>> w(m, std::vector<double>(m, 0.0));
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = 0; b < m; ++b) {
      if (a == b) continue;
      const double d = s.dist(members[a], members[b]);
      w[a][b] = s.weight(members[a]) * s.weight(members[b]) /
                (std::pow(d, 2.0 * beta) * openmass(members[a], d));
    }

  std::vector<double> phi(m, 0.0);
  std::vector<long> free_id(m, -1);
  long nf = 0;
  for (std::size_t i = 0; i < m; ++i) {
    if (e.contains(members[i]))
      phi[i] = 1.0;
    else if (twob.contains(members[i]))
      free_id[i] = nf++;
  }
  if (twob.count() == s.n()) return 0.0;

  if (nf > 0) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(nf, nf);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nf);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        if (i == j) continue;
        const double sym = w[i][j] + w[j][i];
        if (free_id[i] >= 0) {
          a(free_id[i], free_id[i]) += sym;
          if (free_id[j] >= 0)
            a(free_id[i], free_id[j]) -= sym;
          else
            rhs(free_id[i]) += sym * phi[j];
        }
      }
    const Eigen::VectorXd x = a.fullPivLu().solve(rhs);
    for (std::size_t i = 0; i < m; ++i)
      if (free_id[i] >= 0) phi[i] = std::clamp(x(free_id[i]), 0.0, 1.0);
  }

  double energy = 0.0;
  for (std::size_t a2 = 0; a2 < m; ++a2)
    for (std::size_t b2 = 0; b2 < m; ++b2)
      if (a2 != b2) energy += w[a2][b2] * (phi[a2] - phi[b2]) * (phi[a2] - phi[b2]);
  return energy;
}

/// Exhaustive weighted set-cover oracle over the cheapest-per-trace closed
/// ball candidates (centers anywhere, radii at realized distances <= rho
/// plus the half-minimal radius).
inline double exhaustive_content_oracle(const MetricMeasureSpace& s, const PointSet& f,
                                        double codim, double rho) {
  const auto fmem = f.members();
  if (fmem.empty()) return 0.0;
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

}  // namespace fraccap_test
