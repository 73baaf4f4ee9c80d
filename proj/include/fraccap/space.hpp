#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fraccap/util.hpp"

namespace fraccap {

using Index = std::int32_t;

/// A finite metric measure space: n weighted atoms with exact pairwise
/// distances, either derived from Euclidean coordinates or stored as an
/// explicit upper-triangular matrix.
class MetricMeasureSpace {
 public:
  static constexpr Index kMaxPoints = 65536;

  MetricMeasureSpace() = default;  // empty space; fill via the factories

  static MetricMeasureSpace euclidean(std::vector<std::vector<double>> coords,
                                      std::vector<double> weights) {
    MetricMeasureSpace s;
    s.n_ = static_cast<Index>(coords.size());
    s.coords_ = std::move(coords);
    s.weights_ = std::move(weights);
    s.validate_basic();
    s.finalize();
    return s;
  }

  /// `upper` holds d(i,j) for i<j in row-major order, n(n-1)/2 entries.
  static MetricMeasureSpace from_matrix(Index n, std::vector<double> upper,
                                        std::vector<double> weights) {
    MetricMeasureSpace s;
    s.n_ = n;
    s.upper_ = std::move(upper);
    s.weights_ = std::move(weights);
    s.validate_basic();
    s.validate_triangle();
    s.finalize();
    return s;
  }

  Index n() const { return n_; }
  bool is_euclidean() const { return !coords_.empty(); }
  const std::vector<std::vector<double>>& coords() const { return coords_; }
  const std::vector<double>& weights() const { return weights_; }
  double weight(Index i) const { return weights_[static_cast<std::size_t>(i)]; }
  double total_mass() const { return total_mass_; }
  double diameter() const { return diam_; }
  double min_positive_dist() const { return min_dist_; }

  double dist(Index i, Index j) const {
    if (i == j) return 0.0;
    if (!coords_.empty()) {
      const auto& a = coords_[static_cast<std::size_t>(i)];
      const auto& b = coords_[static_cast<std::size_t>(j)];
      double s = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        s += d * d;
      }
      return std::sqrt(s);
    }
    if (i > j) std::swap(i, j);
    // index of (i,j), i<j, in the packed upper triangle
    const std::size_t ii = static_cast<std::size_t>(i);
    const std::size_t jj = static_cast<std::size_t>(j);
    const std::size_t nn = static_cast<std::size_t>(n_);
    return upper_[ii * nn - ii * (ii + 1) / 2 + (jj - ii - 1)];
  }

  void check_point(Index i) const {
    if (i < 0 || i >= n_)
      throw invalid_argument_error("point index " + std::to_string(i) +
                                   " out of range [0," + std::to_string(n_) + ")");
  }

  /// Content hash over distances-defining data and weights.
  std::uint64_t content_hash() const {
    std::uint64_t h = fnv1a("mms", 3);
    h = hash_mix(h, static_cast<std::uint64_t>(n_));
    for (double w : weights_) h = hash_mix(h, w);
    if (!coords_.empty()) {
      for (const auto& c : coords_)
        for (double v : c) h = hash_mix(h, v);
    } else {
      for (double v : upper_) h = hash_mix(h, v);
    }
    return h;
  }

 private:
  void validate_basic() const {
    if (n_ < 1 || n_ > kMaxPoints)
      throw invalid_argument_error("point count " + std::to_string(n_) +
                                   " outside [1," + std::to_string(kMaxPoints) + "]");
    if (static_cast<Index>(weights_.size()) != n_)
      throw invalid_argument_error("weights size mismatch");
    for (Index i = 0; i < n_; ++i) {
      const double w = weights_[static_cast<std::size_t>(i)];
      if (!(w > 0.0) || !std::isfinite(w))
        throw invalid_argument_error("weight at point " + std::to_string(i) +
                                     " must be positive and finite");
    }
    if (!coords_.empty()) {
      if (static_cast<Index>(coords_.size()) != n_)
        throw invalid_argument_error("coords size mismatch");
      for (const auto& c : coords_)
        if (c.size() != coords_.front().size())
          throw invalid_argument_error("coords dimension mismatch");
    } else {
      const std::size_t want =
          static_cast<std::size_t>(n_) * (static_cast<std::size_t>(n_) - 1) / 2;
      if (upper_.size() != want)
        throw invalid_argument_error("metric matrix needs n(n-1)/2 entries");
      for (double d : upper_)
        if (!(d > 0.0) || !std::isfinite(d))
          throw invalid_argument_error("off-diagonal distances must be positive");
    }
  }

  // Full check for n<=512, deterministic sample above.
  void validate_triangle() const {
    auto check_triple = [&](Index a, Index b, Index c) {
      const double ab = dist(a, b), bc = dist(b, c), ac = dist(a, c);
      const double tol = 1e-12 * (ab + bc + ac);
      if (ac > ab + bc + tol || ab > ac + bc + tol || bc > ab + ac + tol)
        throw invalid_argument_error(
            "triangle inequality fails for points (" + std::to_string(a) + "," +
            std::to_string(b) + "," + std::to_string(c) + ")");
    };
    if (n_ <= 512) {
      for (Index a = 0; a < n_; ++a)
        for (Index b = a + 1; b < n_; ++b)
          for (Index c = b + 1; c < n_; ++c) check_triple(a, b, c);
    } else {
      std::uint64_t s = 0x9e3779b97f4a7c15ull;
      auto next = [&s, this] {
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        return static_cast<Index>(s % static_cast<std::uint64_t>(n_));
      };
      for (int k = 0; k < 200000; ++k) {
        Index a = next(), b = next(), c = next();
        if (a != b && b != c && a != c) check_triple(a, b, c);
      }
    }
  }

  void finalize() {
    total_mass_ = 0.0;
    for (double w : weights_) total_mass_ += w;
    diam_ = 0.0;
    min_dist_ = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < n_; ++i)
      for (Index j = i + 1; j < n_; ++j) {
        const double d = dist(i, j);
        diam_ = std::max(diam_, d);
        min_dist_ = std::min(min_dist_, d);
      }
    if (n_ < 2) min_dist_ = 0.0;
  }

  Index n_ = 0;
  std::vector<std::vector<double>> coords_;
  std::vector<double> upper_;
  std::vector<double> weights_;
  double total_mass_ = 0.0;
  double diam_ = 0.0;
  double min_dist_ = 0.0;
};

/// Membership mask over a space's points. Immutable-by-convention value type.
class PointSet {
 public:
  PointSet() = default;
  explicit PointSet(Index n) : mask_(static_cast<std::size_t>(n), 0) {}

  static PointSet all(Index n) {
    PointSet s(n);
    std::fill(s.mask_.begin(), s.mask_.end(), 1);
    s.count_ = n;
    return s;
  }

  static PointSet of(Index n, const std::vector<Index>& members) {
    PointSet s(n);
    for (Index i : members) s.add(i);
    return s;
  }

  Index universe_size() const { return static_cast<Index>(mask_.size()); }
  Index count() const { return count_; }
  bool empty() const { return count_ == 0; }
  bool contains(Index i) const { return mask_[static_cast<std::size_t>(i)] != 0; }

  void add(Index i) {
    auto& m = mask_[static_cast<std::size_t>(i)];
    if (!m) {
      m = 1;
      ++count_;
    }
  }

  std::vector<Index> members() const {
    std::vector<Index> out;
    out.reserve(static_cast<std::size_t>(count_));
    for (Index i = 0; i < universe_size(); ++i)
      if (mask_[static_cast<std::size_t>(i)]) out.push_back(i);
    return out;
  }

  PointSet intersect(const PointSet& o) const {
    PointSet r(universe_size());
    for (Index i = 0; i < universe_size(); ++i)
      if (contains(i) && o.contains(i)) r.add(i);
    return r;
  }

  PointSet unite(const PointSet& o) const {
    PointSet r(universe_size());
    for (Index i = 0; i < universe_size(); ++i)
      if (contains(i) || o.contains(i)) r.add(i);
    return r;
  }

  PointSet minus(const PointSet& o) const {
    PointSet r(universe_size());
    for (Index i = 0; i < universe_size(); ++i)
      if (contains(i) && !o.contains(i)) r.add(i);
    return r;
  }

  PointSet complement() const {
    PointSet r(universe_size());
    for (Index i = 0; i < universe_size(); ++i)
      if (!contains(i)) r.add(i);
    return r;
  }

  bool subset_of(const PointSet& o) const {
    for (Index i = 0; i < universe_size(); ++i)
      if (contains(i) && !o.contains(i)) return false;
    return true;
  }

  bool operator==(const PointSet& o) const { return mask_ == o.mask_; }

  std::uint64_t content_hash() const {
    return fnv1a(mask_.data(), mask_.size());
  }

 private:
  std::vector<std::uint8_t> mask_;
  Index count_ = 0;
};

struct BallSpec {
  Index center = 0;
  double radius = 0.0;
  bool closed = false;

  BallSpec() = default;
  BallSpec(Index c, double r, bool cl = false) : center(c), radius(r), closed(cl) {
    if (!(radius > 0.0)) throw invalid_argument_error("ball radius must be positive");
  }

  BallSpec scaled(double t) const { return BallSpec(center, t * radius, closed); }
};

inline PointSet ball_points(const MetricMeasureSpace& space, const BallSpec& ball) {
  space.check_point(ball.center);
  PointSet s(space.n());
  for (Index i = 0; i < space.n(); ++i) {
    const double d = space.dist(ball.center, i);
    if (ball.closed ? (d <= ball.radius) : (d < ball.radius)) s.add(i);
  }
  return s;
}

inline double set_mass(const MetricMeasureSpace& space, const PointSet& s) {
  double m = 0.0;
  for (Index i = 0; i < space.n(); ++i)
    if (s.contains(i)) m += space.weight(i);
  return m;
}

/// Mass of the open ball B(x,r); always >= weight(x) for r > 0.
inline double open_ball_mass(const MetricMeasureSpace& space, Index x, double r) {
  double m = 0.0;
  for (Index i = 0; i < space.n(); ++i)
    if (space.dist(x, i) < r) m += space.weight(i);
  return m;
}

inline double dist_to_set(const MetricMeasureSpace& space, Index x, const PointSet& e) {
  space.check_point(x);
  if (e.empty()) throw invalid_argument_error("dist_to_set: empty set");
  double best = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < space.n(); ++i)
    if (e.contains(i)) best = std::min(best, space.dist(x, i));
  return best;
}

inline double set_diameter(const MetricMeasureSpace& space, const PointSet& e) {
  const auto pts = e.members();
  double d = 0.0;
  for (std::size_t a = 0; a < pts.size(); ++a)
    for (std::size_t b = a + 1; b < pts.size(); ++b)
      d = std::max(d, space.dist(pts[a], pts[b]));
  return d;
}

inline std::vector<double> unique_distances(const MetricMeasureSpace& space) {
  if (space.n() < 2) throw invalid_argument_error("unique_distances needs n >= 2");
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(space.n()) * (space.n() - 1) / 2);
  for (Index i = 0; i < space.n(); ++i)
    for (Index j = i + 1; j < space.n(); ++j) d.push_back(space.dist(i, j));
  std::sort(d.begin(), d.end());
  d.erase(std::unique(d.begin(), d.end()), d.end());
  return d;
}

/// Empirical doubling/reverse-doubling profile.
struct MetricSpaceProfile {
  double c_mu = 1.0;     // doubling constant estimate
  double Q = 1.0;        // quantitative doubling exponent
  double c_Q = 1.0;      // and its constant
  double sigma = 1.0;    // quantitative reverse doubling exponent
  double c_sigma = 1.0;  // and its constant
  double kappa = 0.5;    // reverse-doubling decay scale
  double c_R = 1.0;      // decay constant at kappa
  double diam = 0.0;
  int n0 = 0;  // smallest integer with 2^{-n0} <= 2*diam
};

/// Fits the profile from ball-mass ratios at the sampled radii.
///
/// c_mu is the exact max of mu(B(x,2r))/mu(B(x,r)) over x and r in `radii`.
/// (Q,c_Q) is the least exponent admitting c_Q = 1 over the sampled nested
/// pairs (y in B(x,R), r < R), tie broken by the largest feasible c_Q;
/// (sigma,c_sigma) mirrors it for the upper envelope. c_R is the max mass
/// ratio at kappa = 1/2 over radii below diam/2.
inline MetricSpaceProfile doubling_profile(const MetricMeasureSpace& space,
                                           const std::vector<double>& radii) {
  if (radii.empty()) throw invalid_argument_error("doubling_profile: empty radii");
  MetricSpaceProfile prof;
  prof.diam = space.diameter();
  prof.n0 = static_cast<int>(std::ceil(-std::log2(2.0 * std::max(prof.diam, 1e-300))));
  while (std::ldexp(1.0, -prof.n0) > 2.0 * prof.diam) ++prof.n0;
  while (std::ldexp(1.0, -(prof.n0 - 1)) <= 2.0 * prof.diam) --prof.n0;

  std::vector<double> masses;  // per (x, r) open-ball masses, reused below
  prof.c_mu = 1.0;
  for (Index x = 0; x < space.n(); ++x)
    for (double r : radii) {
      const double m1 = open_ball_mass(space, x, r);
      const double m2 = open_ball_mass(space, x, 2.0 * r);
      if (m1 > 0.0) prof.c_mu = std::max(prof.c_mu, m2 / m1);
    }

  // Nested-pair samples for the quantitative exponents.
  double q_max = 0.0, s_min = std::numeric_limits<double>::infinity();
  bool have_q = false, have_s = false;
  for (Index x = 0; x < space.n(); ++x)
    for (double big_r : radii) {
      const double mR = open_ball_mass(space, x, big_r);
      if (!(mR > 0.0)) continue;
      const PointSet big = ball_points(space, BallSpec(x, big_r));
      for (Index y = 0; y < space.n(); ++y) {
        if (!big.contains(y)) continue;
        for (double r : radii) {
          if (!(r < big_r)) continue;
          const double rho = open_ball_mass(space, y, r) / mR;
          const double s = r / big_r;
          if (rho < 1.0 && s < 1.0) {
            const double e = std::log(rho) / std::log(s);
            q_max = std::max(q_max, e);
            have_q = true;
          }
          if (y == x && rho < 1.0 && s < 1.0) {
            const double e = std::log(rho) / std::log(s);
            s_min = std::min(s_min, e);
            have_s = true;
          }
        }
      }
    }
  prof.Q = have_q ? q_max : std::max(1.0, std::log2(std::max(prof.c_mu, 2.0)));
  prof.sigma = have_s ? s_min : prof.Q;
  // Constants realized by the fitted exponents over the same samples.
  double cq = 1.0, cs = 1.0;
  for (Index x = 0; x < space.n(); ++x)
    for (double big_r : radii) {
      const double mR = open_ball_mass(space, x, big_r);
      if (!(mR > 0.0)) continue;
      const PointSet big = ball_points(space, BallSpec(x, big_r));
      for (Index y = 0; y < space.n(); ++y) {
        if (!big.contains(y)) continue;
        for (double r : radii) {
          if (!(r < big_r)) continue;
          const double rho = open_ball_mass(space, y, r) / mR;
          const double s = r / big_r;
          cq = std::min(cq, rho / std::pow(s, prof.Q));
          if (y == x) cs = std::max(cs, rho / std::pow(s, prof.sigma));
        }
      }
    }
  prof.c_Q = cq;
  prof.c_sigma = cs;

  prof.kappa = 0.5;
  double cr = 0.0;
  bool have_r = false;
  for (Index x = 0; x < space.n(); ++x)
    for (double r : radii) {
      if (!(r < prof.diam / 2.0)) continue;
      const double m = open_ball_mass(space, x, r);
      if (!(m > 0.0)) continue;
      cr = std::max(cr, open_ball_mass(space, x, 0.5 * r) / m);
      have_r = true;
    }
  prof.c_R = have_r ? cr : 1.0;
  return prof;
}

struct GeneratedSpace {
  MetricMeasureSpace space;
  std::map<std::string, PointSet> sets;  // always includes "ALL"
};

/// Lattice on [0,1]^dim with spacing 1/(m-1) and weight h^dim per point.
inline GeneratedSpace generate_grid(int dim, int m) {
  if (dim < 1 || dim > 2) throw invalid_argument_error("grid: dim must be 1 or 2");
  if (m < 2 || m > 512) throw invalid_argument_error("grid: m must be in [2,512]");
  const double h = 1.0 / (m - 1);
  std::vector<std::vector<double>> coords;
  if (dim == 1) {
    for (int i = 0; i < m; ++i) coords.push_back({i * h});
  } else {
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < m; ++i) coords.push_back({i * h, j * h});
  }
  std::vector<double> weights(coords.size(), std::pow(h, dim));
  GeneratedSpace g{MetricMeasureSpace::euclidean(std::move(coords), std::move(weights)), {}};
  g.sets["ALL"] = PointSet::all(g.space.n());
  return g;
}

/// Unit-spaced 1-D lattice at integer positions 0..n-1, unit weights.
inline GeneratedSpace generate_path(int n) {
  if (n < 2 || n > MetricMeasureSpace::kMaxPoints)
    throw invalid_argument_error("path: n must be in [2,65536]");
  std::vector<std::vector<double>> coords;
  coords.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) coords.push_back({static_cast<double>(i)});
  std::vector<double> weights(static_cast<std::size_t>(n), 1.0);
  GeneratedSpace g{MetricMeasureSpace::euclidean(std::move(coords), std::move(weights)), {}};
  g.sets["ALL"] = PointSet::all(g.space.n());
  return g;
}

/// 1-D grid of one point per construction cell, with the middle-(1-2*ratio)
/// Cantor iteration returned as set "E". Cell count defaults to b^depth with
/// b = round(1/ratio); a larger explicit count refines each cell uniformly.
inline GeneratedSpace generate_cantor_line(int depth, double ratio,
                                           std::optional<int> cells = std::nullopt) {
  if (depth < 0 || depth > 8) throw invalid_argument_error("cantor_line: depth in [0,8]");
  if (!(ratio > 0.0) || !(ratio < 0.5))
    throw invalid_argument_error("cantor_line: ratio in (0,1/2)");
  const int b = static_cast<int>(std::lround(1.0 / ratio));
  if (b < 2) throw invalid_argument_error("cantor_line: 1/ratio rounds below 2");
  long want = 1;
  for (int i = 0; i < depth; ++i) {
    want *= b;
    if (want > MetricMeasureSpace::kMaxPoints)
      throw invalid_argument_error("cantor_line: cell count exceeds point cap");
  }
  long m = cells ? *cells : want;
  if (m < want || m > MetricMeasureSpace::kMaxPoints)
    throw invalid_argument_error("cantor_line: cell count outside [b^depth, cap]");

  // Survivor cells of [0,m): each round keeps the first and last ratio-share
  // of every surviving block.
  std::vector<std::pair<long, long>> blocks{{0, m}};
  for (int it = 0; it < depth; ++it) {
    std::vector<std::pair<long, long>> next;
    for (auto [a, e] : blocks) {
      const long len = e - a;
      const long keep = std::max<long>(1, std::lround(ratio * static_cast<double>(len)));
      if (2 * keep >= len) {
        next.emplace_back(a, e);
        continue;
      }
      next.emplace_back(a, a + keep);
      next.emplace_back(e - keep, e);
    }
    blocks = std::move(next);
  }

  const double h = (m > 1) ? 1.0 / static_cast<double>(m - 1) : 1.0;
  std::vector<std::vector<double>> coords;
  coords.reserve(static_cast<std::size_t>(m));
  for (long i = 0; i < m; ++i) coords.push_back({static_cast<double>(i) * h});
  std::vector<double> weights(static_cast<std::size_t>(m), h);
  GeneratedSpace g{MetricMeasureSpace::euclidean(std::move(coords), std::move(weights)), {}};
  g.sets["ALL"] = PointSet::all(g.space.n());
  PointSet e(g.space.n());
  for (auto [a, bnd] : blocks)
    for (long i = a; i < bnd; ++i) e.add(static_cast<Index>(i));
  g.sets["E"] = e;
  return g;
}

}  // namespace fraccap
