#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "fraccap/capacity.hpp"
#include "fraccap/hardy.hpp"
#include "fraccap/hausdorff.hpp"
#include "fraccap/estimates.hpp"
#include "fraccap/space.hpp"
#include "fraccap/space_io.hpp"

namespace fraccap {

inline const char* tool_version() { return "fraccap 0.1.0"; }

struct ScenarioError : invalid_argument_error {
  ScenarioError(const std::string& path, const std::string& msg, int code = 1)
      : invalid_argument_error(path + ": " + msg), exit_code(code) {}
  int exit_code;
};

struct Scenario {
  nlohmann::json raw;
  std::string content_hash_hex;
  GeneratedSpace generated;
  std::map<std::string, PointSet> sets;
  std::uint64_t seed = 1;
  int workers = 1;
  std::string out_dir = "out";
  std::string cache_dir;
};

struct CampaignResult {
  std::string name;
  std::string op;
  bool ok = true;
  std::string error;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  double wall_ms = 0.0;
};

struct RunReport {
  std::string version;
  std::string scenario_hash;
  std::uint64_t seed = 1;
  std::vector<CampaignResult> campaigns;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["version"] = version;
    j["scenario_hash"] = scenario_hash;
    j["seed"] = seed;
    auto arr = nlohmann::ordered_json::array();
    for (const auto& c : campaigns) {
      nlohmann::ordered_json jc;
      jc["name"] = c.name;
      jc["op"] = c.op;
      jc["status"] = c.ok ? "ok" : "error";
      if (!c.ok) jc["error"] = c.error;
      jc["rows"] = c.rows;
      arr.push_back(jc);
    }
    j["campaigns"] = arr;
    return j;
  }
};

namespace detail {

inline std::string ratio_text(const RatioResult& r) {
  if (r.is_none()) return "NONE";
  if (r.is_infinite()) return "INFINITE";
  return format_double(r.value);
}

inline std::string status_text(SolveStatus s) {
  return s == SolveStatus::exact ? "exact" : "upper_bound";
}

inline const nlohmann::json& need(const nlohmann::json& j, const std::string& key,
                                  const std::string& path) {
  if (!j.contains(key)) throw ScenarioError(path + "." + key, "missing field");
  return j.at(key);
}

inline double need_num(const nlohmann::json& j, const std::string& key,
                       const std::string& path) {
  const auto& v = need(j, key, path);
  if (!v.is_number()) throw ScenarioError(path + "." + key, "expected a number");
  return v.get<double>();
}

inline std::vector<double> need_num_list(const nlohmann::json& j, const std::string& key,
                                         const std::string& path) {
  const auto& v = need(j, key, path);
  if (!v.is_array() || v.empty())
    throw ScenarioError(path + "." + key, "expected a nonempty array of numbers");
  return v.get<std::vector<double>>();
}

inline const PointSet& need_set(const Scenario& sc, const nlohmann::json& j,
                                const std::string& key, const std::string& path) {
  const auto& v = need(j, key, path);
  if (!v.is_string()) throw ScenarioError(path + "." + key, "expected a set name");
  const auto it = sc.sets.find(v.get<std::string>());
  if (it == sc.sets.end())
    throw ScenarioError(path + "." + key, "unknown set \"" + v.get<std::string>() + "\"",
                        2);
  return it->second;
}

inline BallSpec parse_ball(const MetricMeasureSpace& space, const nlohmann::json& j,
                           const std::string& path) {
  if (!j.is_object()) throw ScenarioError(path, "expected a ball object");
  const Index c = static_cast<Index>(need_num(j, "center", path));
  const double r = need_num(j, "radius", path);
  if (c < 0 || c >= space.n()) throw ScenarioError(path + ".center", "out of range");
  if (!(r > 0.0)) throw ScenarioError(path + ".radius", "must be positive");
  return BallSpec(c, r, j.value("closed", false));
}

inline GagliardoParams parse_params(const nlohmann::json& j, const std::string& path) {
  GagliardoParams par{need_num(j, "beta", path), need_num(j, "p", path),
                      need_num(j, "q", path)};
  try {
    par.check();
  } catch (const std::exception& e) {
    throw ScenarioError(path, e.what());
  }
  return par;
}

inline std::vector<Index> parse_centers(const nlohmann::json& j, const std::string& key,
                                        const MetricMeasureSpace& space,
                                        const std::string& path) {
  const auto& v = need(j, key, path);
  if (!v.is_array() || v.empty())
    throw ScenarioError(path + "." + key, "expected a nonempty array of point indices");
  std::vector<Index> out;
  for (const auto& x : v) {
    const Index i = x.get<Index>();
    if (i < 0 || i >= space.n())
      throw ScenarioError(path + "." + key, "point index out of range");
    out.push_back(i);
  }
  return out;
}

inline ScalarField parse_field(const Scenario& sc, const nlohmann::json& j,
                               const std::string& path) {
  const auto& space = sc.generated.space;
  const std::string kind = need(j, "kind", path).get<std::string>();
  if (kind == "constant") {
    return constant_field(space, need_num(j, "value", path));
  }
  if (kind == "coordinate") {
    const int axis = static_cast<int>(j.value("axis", 0));
    if (!space.is_euclidean()) throw ScenarioError(path, "coordinate field needs coords");
    if (axis < 0 || axis >= static_cast<int>(space.coords()[0].size()))
      throw ScenarioError(path + ".axis", "out of range");
    ScalarField u(static_cast<std::size_t>(space.n()));
    for (Index i = 0; i < space.n(); ++i)
      u[static_cast<std::size_t>(i)] = space.coords()[static_cast<std::size_t>(i)]
                                                     [static_cast<std::size_t>(axis)];
    return u;
  }
  if (kind == "distance_power") {
    const PointSet& e = need_set(sc, j, "set", path);
    if (e.empty()) throw ScenarioError(path + ".set", "set is empty");
    const double s = need_num(j, "s", path);
    const double gamma = need_num(j, "gamma", path);
    if (!(s > 0.0)) throw ScenarioError(path + ".s", "must be positive");
    ScalarField u(static_cast<std::size_t>(space.n()));
    for (Index i = 0; i < space.n(); ++i)
      u[static_cast<std::size_t>(i)] =
          std::min(1.0, std::pow(dist_to_set(space, i, e) / s, gamma));
    return u;
  }
  throw ScenarioError(path + ".kind", "unknown field kind \"" + kind + "\"");
}

inline TestFamilySpec parse_family(const nlohmann::json& j, std::uint64_t seed,
                                   const std::string& path) {
  TestFamilySpec spec;
  spec.seed = seed;
  if (!j.is_object()) throw ScenarioError(path, "expected a family object");
  if (j.contains("distance_scales"))
    spec.distance_scales = j.at("distance_scales").get<std::vector<double>>();
  if (j.contains("distance_powers"))
    spec.distance_powers = j.at("distance_powers").get<std::vector<double>>();
  spec.bump_products = j.value("bump_products", spec.bump_products);
  spec.random_lipschitz = j.value("random_lipschitz", spec.random_lipschitz);
  spec.capacity_minimizers = j.value("capacity_minimizers", spec.capacity_minimizers);
  return spec;
}

}  // namespace detail

inline Scenario load_scenario(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ScenarioError(path, "cannot open scenario file");
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Scenario sc;
  {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(text)));
    sc.content_hash_hex = buf;
  }
  try {
    sc.raw = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw ScenarioError(path, std::string("invalid JSON: ") + e.what());
  }
  const auto& j = sc.raw;
  if (j.value("version", 0) != 1) throw ScenarioError("version", "must be 1");

  const auto& sp = detail::need(j, "space", "space");
  const std::string kind = detail::need(sp, "kind", "space").get<std::string>();
  try {
    if (kind == "grid")
      sc.generated = generate_grid(static_cast<int>(detail::need_num(sp, "dim", "space")),
                                   static_cast<int>(detail::need_num(sp, "m", "space")));
    else if (kind == "path")
      sc.generated = generate_path(static_cast<int>(detail::need_num(sp, "n", "space")));
    else if (kind == "cantor_line")
      sc.generated = generate_cantor_line(
          static_cast<int>(detail::need_num(sp, "depth", "space")),
          detail::need_num(sp, "ratio", "space"),
          sp.contains("cells") ? std::optional<int>(sp.at("cells").get<int>())
                               : std::nullopt);
    else if (kind == "file")
      sc.generated = load_space(detail::need(sp, "path", "space").get<std::string>());
    else
      throw ScenarioError("space.kind", "unknown generator \"" + kind + "\"");
  } catch (const ScenarioError&) {
    throw;
  } catch (const std::exception& e) {
    throw ScenarioError("space", e.what());
  }

  sc.sets = sc.generated.sets;
  if (j.contains("sets")) {
    for (auto it = j.at("sets").begin(); it != j.at("sets").end(); ++it) {
      const std::string name = it.key();
      const std::string path_here = "sets." + name;
      if (sc.sets.count(name))
        throw ScenarioError(path_here, "redefines an existing set");
      const auto& v = it.value();
      if (v.is_array()) {
        std::vector<Index> idx;
        for (const auto& x : v) {
          const Index i = x.get<Index>();
          if (i < 0 || i >= sc.generated.space.n())
            throw ScenarioError(path_here, "point index out of range");
          idx.push_back(i);
        }
        sc.sets[name] = PointSet::of(sc.generated.space.n(), idx);
      } else if (v.is_object() && v.contains("ball")) {
        sc.sets[name] =
            ball_points(sc.generated.space,
                        detail::parse_ball(sc.generated.space, v.at("ball"), path_here));
      } else if (v.is_object() && v.contains("coordinate_below")) {
        // points whose given coordinate stays at or below the threshold
        const auto& cb = v.at("coordinate_below");
        const int axis = cb.value("axis", 0);
        const double thr = detail::need_num(cb, "threshold", path_here);
        if (!sc.generated.space.is_euclidean())
          throw ScenarioError(path_here, "coordinate_below needs coords");
        PointSet s(sc.generated.space.n());
        for (Index i = 0; i < sc.generated.space.n(); ++i)
          if (sc.generated.space.coords()[static_cast<std::size_t>(i)]
                                         [static_cast<std::size_t>(axis)] <= thr)
            s.add(i);
        sc.sets[name] = s;
      } else {
        throw ScenarioError(path_here,
                            "expected an index array, {\"ball\":...}, or "
                            "{\"coordinate_below\":...}");
      }
    }
  }

  sc.seed = j.value("seed", 1ull);
  sc.workers = j.value("workers", 1);
  sc.out_dir = j.value("out_dir", "out");
  sc.cache_dir = j.value("cache_dir", "");
  if (const char* env = std::getenv("FRACCAP_CACHE")) sc.cache_dir = env;

  if (!j.contains("campaigns") || !j.at("campaigns").is_array())
    throw ScenarioError("campaigns", "missing campaign array");
  return sc;
}

namespace detail {

using Runner = CampaignResult (*)(const Scenario&, const nlohmann::json&,
                                  const std::string&, CapacityCache&);

inline CapacitySolveOptions parse_solver_opts(const nlohmann::json& j) {
  CapacitySolveOptions opt;
  if (j.contains("solver")) {
    const auto& s = j.at("solver");
    opt.tol_gap = s.value("tol_gap", opt.tol_gap);
    opt.max_iterations = s.value("max_iterations", opt.max_iterations);
  }
  return opt;
}

inline CampaignResult run_doubling_profile(const Scenario& sc, const nlohmann::json& j,
                                           const std::string& path, CapacityCache&) {
  CampaignResult res;
  std::vector<double> radii;
  if (j.contains("radii"))
    radii = need_num_list(j, "radii", path);
  else {
    const double f = j.value("unique_scaled", 0.5);
    for (double d : unique_distances(sc.generated.space)) radii.push_back(d * f);
  }
  const auto prof = doubling_profile(sc.generated.space, radii);
  nlohmann::ordered_json row;
  row["c_mu"] = prof.c_mu;
  row["Q"] = prof.Q;
  row["c_Q"] = prof.c_Q;
  row["sigma"] = prof.sigma;
  row["c_sigma"] = prof.c_sigma;
  row["kappa"] = prof.kappa;
  row["c_R"] = prof.c_R;
  row["diam"] = prof.diam;
  row["n0"] = prof.n0;
  res.rows.push_back(row);
  return res;
}

inline CampaignResult run_ball_capacity_band(const Scenario& sc, const nlohmann::json& j,
                                             const std::string& path, CapacityCache&) {
  CampaignResult res;
  const auto centers = parse_centers(j, "centers", sc.generated.space, path);
  const auto radii = need_num_list(j, "radii", path);
  const double lam = need_num(j, "lambda", path);
  const GagliardoParams par = parse_params(j, path);
  const auto opt = parse_solver_opts(j);
  for (Index x0 : centers)
    for (double r : radii) {
      const auto band = ball_capacity_band(sc.generated.space, x0, r, lam, par, opt);
      nlohmann::ordered_json row;
      row["x0"] = x0;
      row["r"] = r;
      row["Lambda"] = lam;
      row["beta"] = par.beta;
      row["p"] = par.p;
      row["q"] = par.q;
      row["cap"] = band.cap.value;
      row["normalized"] = band.normalized;
      row["lipschitz_upper"] = band.lipschitz_upper;
      row["status"] = status_text(band.cap.status);
      res.rows.push_back(row);
    }
  return res;
}

inline CampaignResult run_capacity(const Scenario& sc, const nlohmann::json& j,
                                   const std::string& path, CapacityCache& cache,
                                   bool htl) {
  CampaignResult res;
  CapacityProblem pb;
  pb.space = &sc.generated.space;
  pb.e = need_set(sc, j, "set", path);
  pb.ball = parse_ball(sc.generated.space, need(j, "ball", path), path + ".ball");
  pb.lambda_cap = need_num(j, "lambda", path);
  pb.params = parse_params(j, path);
  const auto opt = parse_solver_opts(j);
  try {
    pb.check();
  } catch (const std::exception& e) {
    throw ScenarioError(path, e.what());
  }
  const auto entry =
      cache.get_or_compute(CapacityCache::problem_key(pb, htl, opt), [&] {
        return htl ? htl_capacity(pb, opt) : fractional_capacity(pb, opt);
      });
  nlohmann::ordered_json row;
  row["value"] = entry.value;
  row["status"] = status_text(entry.status);
  row["gap"] = entry.gap;
  row["lambda2_warning"] = pb.lambda_cap == 2.0;
  res.rows.push_back(row);
  return res;
}

inline CampaignResult run_fractional_capacity(const Scenario& sc, const nlohmann::json& j,
                                              const std::string& path,
                                              CapacityCache& cache) {
  return run_capacity(sc, j, path, cache, false);
}

inline CampaignResult run_htl_capacity(const Scenario& sc, const nlohmann::json& j,
                                       const std::string& path, CapacityCache& cache) {
  return run_capacity(sc, j, path, cache, true);
}

inline CampaignResult run_capacity_comparison(const Scenario& sc, const nlohmann::json& j,
                                              const std::string& path, CapacityCache&) {
  CampaignResult res;
  const PointSet& e = need_set(sc, j, "set", path);
  const BallSpec ball =
      parse_ball(sc.generated.space, need(j, "ball", path), path + ".ball");
  const double lam = need_num(j, "lambda", path);
  const GagliardoParams par = parse_params(j, path);
  const std::string variant = need(j, "variant", path).get<std::string>();
  ComparisonVariant v;
  if (variant == "htl_vs_frac")
    v = ComparisonVariant::htl_vs_frac;
  else if (variant == "q_pair")
    v = ComparisonVariant::q_pair;
  else
    throw ScenarioError(path + ".variant", "must be htl_vs_frac or q_pair");
  const double q_hat = j.value("q_hat", 2.0);
  const auto rows = capacity_comparison_report(sc.generated.space, e, ball, lam, par, v,
                                               q_hat, parse_solver_opts(j));
  for (const auto& r : rows) {
    nlohmann::ordered_json row;
    row["name"] = r.name;
    row["lhs"] = r.lhs;
    row["rhs"] = r.rhs;
    row["ratio"] = ratio_text(r.ratio);
    row["rhs_inflation"] = r.rhs_inflation;
    row["truncated_to_space"] = r.truncated_to_space;
    row["lhs_status"] = status_text(r.lhs_status);
    row["rhs_status"] = status_text(r.rhs_status);
    res.rows.push_back(row);
  }
  return res;
}

inline CampaignResult run_mazya_check(const Scenario& sc, const nlohmann::json& j,
                                      const std::string& path, CapacityCache&) {
  CampaignResult res;
  const auto u = parse_field(sc, need(j, "field", path), path + ".field");
  const BallSpec ball =
      parse_ball(sc.generated.space, need(j, "ball", path), path + ".ball");
  const auto r = mazya_check(sc.generated.space, u, ball, need_num(j, "lambda", path),
                             j.value("lambda_poincare", 1.0), need_num(j, "beta", path),
                             need_num(j, "t", path), need_num(j, "p", path),
                             need_num(j, "q", path), parse_solver_opts(j));
  nlohmann::ordered_json row;
  row["ratio"] = ratio_text(r.ratio);
  row["degenerate"] = r.degenerate;
  row["cap"] = r.cap.value;
  row["cap_status"] = status_text(r.cap.status);
  res.rows.push_back(row);
  return res;
}

inline CampaignResult run_hausdorff_content(const Scenario& sc, const nlohmann::json& j,
                                            const std::string& path, CapacityCache&) {
  CampaignResult res;
  ContentProblem pb;
  pb.space = &sc.generated.space;
  pb.f = need_set(sc, j, "set", path);
  pb.codim = need_num(j, "codim", path);
  pb.rho = need_num(j, "rho", path);
  pb.open_balls = j.value("open_balls", false);
  try {
    pb.check();
  } catch (const std::exception& e) {
    throw ScenarioError(path, e.what());
  }
  const std::string mode = j.value("mode", "exact");
  CoverMode m;
  if (mode == "exact")
    m = CoverMode::exact;
  else if (mode == "greedy_upper")
    m = CoverMode::greedy_upper;
  else if (mode == "lp_lower")
    m = CoverMode::lp_lower;
  else
    throw ScenarioError(path + ".mode", "must be exact, greedy_upper, or lp_lower");
  const auto sol = hausdorff_content(pb, m);
  nlohmann::ordered_json row;
  row["value"] = sol.value;
  row["mode"] = mode;
  row["bracket"] = sol.bracket;
  row["balls"] = sol.balls.size();
  res.rows.push_back(row);
  return res;
}

inline CampaignResult run_content_density_ratio(const Scenario& sc,
                                                const nlohmann::json& j,
                                                const std::string& path, CapacityCache&) {
  CampaignResult res;
  const PointSet& e = need_set(sc, j, "set", path);
  const Index x = static_cast<Index>(need_num(j, "x", path));
  if (x < 0 || x >= sc.generated.space.n())
    throw ScenarioError(path + ".x", "out of range");
  if (!e.contains(x)) throw ScenarioError(path + ".x", "x must lie in the set");
  const auto r = content_density_ratio(sc.generated.space, e, x,
                                       need_num(j, "r", path), need_num(j, "codim", path));
  nlohmann::ordered_json row;
  row["lower"] = r.lower;
  row["upper"] = r.upper;
  row["exact"] = r.exact;
  row["num_value"] = r.num_value;
  row["den_value"] = r.den_value;
  res.rows.push_back(row);
  return res;
}

inline CampaignResult run_codim_bound_check(const Scenario& sc, const nlohmann::json& j,
                                            const std::string& path, CapacityCache&) {
  CampaignResult res;
  const auto r = codim_bound_check(
      sc.generated.space, need_set(sc, j, "set", path),
      parse_ball(sc.generated.space, need(j, "ball", path), path + ".ball"),
      need_num(j, "lambda", path), parse_params(j, path), need_num(j, "eta", path),
      parse_solver_opts(j));
  nlohmann::ordered_json row;
  row["ratio"] = ratio_text(r.ratio);
  row["content"] = r.content.value;
  row["bracket"] = r.bracket;
  row["cap"] = r.cap.value;
  res.rows.push_back(row);
  return res;
}

inline CampaignResult run_density_scan(const Scenario& sc, const nlohmann::json& j,
                                       const std::string& path, CapacityCache& cache,
                                       bool htl) {
  CampaignResult res;
  const PointSet& e = need_set(sc, j, "set", path);
  const auto radii = need_num_list(j, "radii", path);
  const auto centers = parse_centers(j, "centers", sc.generated.space, path);
  const double lam = need_num(j, "lambda", path);
  const GagliardoParams par = parse_params(j, path);
  const auto opt = parse_solver_opts(j);
  DensityScanReport rep;
  try {
    rep = htl ? htl_density_scan(sc.generated.space, e, lam, par, radii, centers,
                                 j.value("c1", 1.0 / 80.0), &cache, opt)
              : capacity_density_scan(sc.generated.space, e, lam, par, radii, centers,
                                      &cache, opt);
  } catch (const std::exception& err) {
    throw ScenarioError(path, err.what());
  }
  for (const auto& en : rep.entries) {
    nlohmann::ordered_json row;
    row["center"] = en.center;
    row["radius"] = en.radius;
    row["num"] = en.num;
    row["den"] = en.den;
    row["ratio"] = ratio_text(en.ratio);
    row["num_status"] = status_text(en.num_status);
    row["den_status"] = status_text(en.den_status);
    res.rows.push_back(row);
  }
  nlohmann::ordered_json summary;
  summary["c0"] = rep.c0;
  summary["witness_x"] = rep.witness_x;
  summary["witness_r"] = rep.witness_r;
  summary["approximate"] = rep.approximate;
  summary["scan_errors"] = rep.scan_errors;
  summary["summary"] = true;
  res.rows.push_back(summary);
  return res;
}

inline CampaignResult run_capacity_density(const Scenario& sc, const nlohmann::json& j,
                                           const std::string& path, CapacityCache& cache) {
  return run_density_scan(sc, j, path, cache, false);
}

inline CampaignResult run_htl_density(const Scenario& sc, const nlohmann::json& j,
                                      const std::string& path, CapacityCache& cache) {
  return run_density_scan(sc, j, path, cache, true);
}

inline CampaignResult run_hardy_report(const Scenario& sc, const nlohmann::json& j,
                                       const std::string& path, CapacityCache&,
                                       const std::string& kind) {
  CampaignResult res;
  const PointSet& e = need_set(sc, j, "set", path);
  const GagliardoParams par = parse_params(j, path);
  const auto family =
      generate_family(sc.generated.space, e,
                      parse_family(j.value("family", nlohmann::json::object()), sc.seed,
                                   path + ".family"),
                      par, j.value("lambda_cap", 4.0));
  HardyReport rep;
  if (kind == "pointwise") {
    rep = pointwise_hardy_report(sc.generated.space, e, family, par);
  } else {
    std::vector<BallSpec> balls;
    const auto centers = parse_centers(j, "ball_centers", sc.generated.space, path);
    const auto radii = need_num_list(j, "ball_radii", path);
    for (Index c : centers)
      for (double r : radii) balls.emplace_back(c, r, false);
    if (kind == "boundary")
      rep = boundary_poincare_report(sc.generated.space, e, family, par,
                                     need_num(j, "t", path), j.value("lambda", 1.0),
                                     balls);
    else
      rep = ball_hardy_report(sc.generated.space, e, family, par, j.value("lambda", 3.0),
                              balls);
  }
  nlohmann::ordered_json row;
  row["kind"] = rep.kind;
  row["constant"] = rep.constant;
  row["witness_point"] = rep.witness_point;
  row["witness_radius"] = rep.witness_radius;
  row["witness_field"] = rep.witness_field;
  row["evaluated"] = rep.evaluated;
  row["skipped"] = rep.skipped;
  row["all_skipped"] = rep.all_skipped;
  row["any_infinite"] = rep.any_infinite;
  row["admissible_points"] = rep.admissible_points;
  row["family_size"] = family.size();
  res.rows.push_back(row);
  return res;
}

inline CampaignResult run_pointwise_hardy(const Scenario& sc, const nlohmann::json& j,
                                          const std::string& path, CapacityCache& c) {
  return run_hardy_report(sc, j, path, c, "pointwise");
}

inline CampaignResult run_boundary_poincare(const Scenario& sc, const nlohmann::json& j,
                                            const std::string& path, CapacityCache& c) {
  return run_hardy_report(sc, j, path, c, "boundary");
}

inline CampaignResult run_ball_hardy(const Scenario& sc, const nlohmann::json& j,
                                     const std::string& path, CapacityCache& c) {
  return run_hardy_report(sc, j, path, c, "ball");
}

inline CampaignResult run_self_improvement(const Scenario& sc, const nlohmann::json& j,
                                           const std::string& path, CapacityCache& cache) {
  CampaignResult res;
  const PointSet& e = need_set(sc, j, "set", path);
  const GagliardoParams base = parse_params(need(j, "base", path), path + ".base");
  const double lam = need_num(j, "lambda", path);
  const auto beta_grid = need_num_list(j, "beta_grid", path);
  const auto p_grid = need_num_list(j, "p_grid", path);
  const auto q_grid = need_num_list(j, "q_grid", path);
  const auto radii = need_num_list(j, "radii", path);
  const auto centers = parse_centers(j, "centers", sc.generated.space, path);
  const auto opt = parse_solver_opts(j);

  double delta;
  if (j.contains("delta")) {
    delta = need_num(j, "delta", path);
  } else {
    const double factor = j.value("delta_factor", 0.5);
    const auto base_scan = capacity_density_scan(sc.generated.space, e, lam, base, radii,
                                                 centers, &cache, opt);
    delta = factor * base_scan.c0;
  }

  SelfImprovementReport rep;
  try {
    rep = self_improvement_scan(sc.generated.space, e, base, lam, beta_grid, p_grid,
                                q_grid, delta, radii, centers, &cache, opt);
  } catch (const std::exception& err) {
    throw ScenarioError(path, err.what());
  }
  for (const auto& pt : rep.points) {
    nlohmann::ordered_json row;
    row["beta_hat"] = pt.beta_hat;
    row["p_hat"] = pt.p_hat;
    row["q_hat"] = pt.q_hat;
    row["c0"] = pt.c0;
    row["skipped"] = pt.skipped;
    row["in_region"] = pt.in_region;
    res.rows.push_back(row);
  }
  nlohmann::ordered_json summary;
  summary["base_c0"] = rep.base_c0;
  summary["delta"] = rep.delta;
  summary["epsilon"] = rep.epsilon;
  summary["summary"] = true;
  res.rows.push_back(summary);
  return res;
}

inline CampaignResult run_poincare_ratio(const Scenario& sc, const nlohmann::json& j,
                                         const std::string& path, CapacityCache&) {
  CampaignResult res;
  const auto u = parse_field(sc, need(j, "field", path), path + ".field");
  const BallSpec ball =
      parse_ball(sc.generated.space, need(j, "ball", path), path + ".ball");
  const auto r = poincare_ratio(sc.generated.space, u, ball, need_num(j, "beta", path),
                                need_num(j, "t", path), need_num(j, "p", path),
                                need_num(j, "q", path), j.value("lambda", 1.0));
  nlohmann::ordered_json row;
  row["ratio"] = ratio_text(r);
  res.rows.push_back(row);
  return res;
}

inline const std::map<std::string, Runner>& campaign_registry() {
  static const std::map<std::string, Runner> reg = {
      {"doubling_profile", &run_doubling_profile},
      {"ball_capacity_band", &run_ball_capacity_band},
      {"fractional_capacity", &run_fractional_capacity},
      {"htl_capacity", &run_htl_capacity},
      {"capacity_comparison", &run_capacity_comparison},
      {"mazya_check", &run_mazya_check},
      {"poincare_ratio", &run_poincare_ratio},
      {"hausdorff_content", &run_hausdorff_content},
      {"content_density_ratio", &run_content_density_ratio},
      {"codim_bound_check", &run_codim_bound_check},
      {"capacity_density_scan", &run_capacity_density},
      {"htl_density_scan", &run_htl_density},
      {"pointwise_hardy", &run_pointwise_hardy},
      {"boundary_poincare", &run_boundary_poincare},
      {"ball_hardy", &run_ball_hardy},
      {"self_improvement_scan", &run_self_improvement},
  };
  return reg;
}

}  // namespace detail

/// Dry-run validation: resolves sets, parses every campaign's parameters,
/// and checks the statically checkable preconditions. Throws ScenarioError
/// with the offending field path.
inline void validate_scenario(const Scenario& sc) {
  const auto& arr = sc.raw.at("campaigns");
  std::set<std::string> names;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string path = "campaigns[" + std::to_string(i) + "]";
    const auto& c = arr[i];
    const std::string name = detail::need(c, "name", path).get<std::string>();
    if (!names.insert(name).second)
      throw ScenarioError(path + ".name", "duplicate campaign name \"" + name + "\"");
    const std::string op = detail::need(c, "op", path).get<std::string>();
    if (!detail::campaign_registry().count(op))
      throw ScenarioError(path + ".op", "unknown operation \"" + op + "\"");
    // static parameter checks shared with the runners
    if (c.contains("set")) detail::need_set(sc, c, "set", path);
    if (c.contains("ball"))
      detail::parse_ball(sc.generated.space, c.at("ball"), path + ".ball");
    if (c.contains("beta")) detail::parse_params(c, path);
    if (c.contains("field")) detail::parse_field(sc, c.at("field"), path + ".field");
    if (op == "capacity_density_scan" || op == "htl_density_scan" ||
        op == "self_improvement_scan") {
      const auto& e = detail::need_set(sc, c, "set", path);
      if (e.empty()) throw ScenarioError(path + ".set", "set is empty");
      const double lam = detail::need_num(c, "lambda", path);
      if (!(lam > 2.0)) throw ScenarioError(path + ".lambda", "must exceed 2");
      const double diam_e = set_diameter(sc.generated.space, e);
      const double limit = op == "htl_density_scan"
                               ? c.value("c1", 1.0 / 80.0) * diam_e
                               : diam_e / 8.0;
      for (double r : detail::need_num_list(c, "radii", path))
        if (!(r > 0.0 && r < limit))
          throw ScenarioError(path + ".radii",
                              "radius " + format_double(r) + " outside (0, " +
                                  format_double(limit) + ")");
      for (Index x : detail::parse_centers(c, "centers", sc.generated.space, path))
        if (!e.contains(x))
          throw ScenarioError(path + ".centers",
                              "center " + std::to_string(x) + " is not in the set");
    }
  }
}

inline void write_campaign_csv(const CampaignResult& c, const std::string& file) {
  std::ofstream f(file);
  if (!f) throw invalid_argument_error("cannot open for writing: " + file);
  if (c.rows.empty()) return;  // no rows, no header
  std::vector<std::string> cols;
  for (auto it = c.rows[0].begin(); it != c.rows[0].end(); ++it) cols.push_back(it.key());
  for (const auto& row : c.rows)
    for (auto it = row.begin(); it != row.end(); ++it)
      if (std::find(cols.begin(), cols.end(), it.key()) == cols.end())
        cols.push_back(it.key());
  for (std::size_t i = 0; i < cols.size(); ++i) f << (i ? "," : "") << cols[i];
  f << '\n';
  for (const auto& row : c.rows) {
    for (std::size_t i = 0; i < cols.size(); ++i) {
      if (i) f << ',';
      if (!row.contains(cols[i])) continue;
      const auto& v = row.at(cols[i]);
      if (v.is_number_float())
        f << format_double(v.get<double>());
      else if (v.is_string())
        f << v.get<std::string>();
      else
        f << v.dump();
    }
    f << '\n';
  }
}

struct RunOverrides {
  std::optional<int> workers;
  std::optional<std::string> out_dir;
  std::optional<std::string> cache_dir;
};

/// Executes every campaign in declaration order, writes report.json, one CSV
/// per campaign, and timing.json (kept separate so reports stay bit-exact
/// across repeated and differently-parallel runs).
inline RunReport run_scenario(const std::string& path, const RunOverrides& ov = {}) {
  Scenario sc = load_scenario(path);
  validate_scenario(sc);
  if (ov.workers) sc.workers = *ov.workers;
  if (ov.out_dir) sc.out_dir = *ov.out_dir;
  if (ov.cache_dir) sc.cache_dir = *ov.cache_dir;
  worker_count() = std::max(1, sc.workers);

  CapacityCache cache(sc.cache_dir);
  RunReport rep;
  rep.version = tool_version();
  rep.scenario_hash = sc.content_hash_hex;
  rep.seed = sc.seed;

  const auto& arr = sc.raw.at("campaigns");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto& c = arr[i];
    const std::string cpath = "campaigns[" + std::to_string(i) + "]";
    CampaignResult res;
    res.name = c.at("name").get<std::string>();
    res.op = c.at("op").get<std::string>();
    const auto t0 = std::chrono::steady_clock::now();
    try {
      res = detail::campaign_registry().at(res.op)(sc, c, cpath, cache);
      res.name = c.at("name").get<std::string>();
      res.op = c.at("op").get<std::string>();
    } catch (const std::exception& e) {
      res.ok = false;
      res.error = e.what();
    }
    res.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    rep.campaigns.push_back(std::move(res));
  }

  std::filesystem::create_directories(sc.out_dir);
  {
    std::ofstream f(std::filesystem::path(sc.out_dir) / "report.json");
    write_json_17(f, rep.to_json());
    f << '\n';
  }
  {
    nlohmann::ordered_json t;
    for (const auto& c : rep.campaigns) t[c.name] = c.wall_ms;
    std::ofstream f(std::filesystem::path(sc.out_dir) / "timing.json");
    write_json_17(f, t);
    f << '\n';
  }
  for (const auto& c : rep.campaigns)
    write_campaign_csv(c,
                       (std::filesystem::path(sc.out_dir) / (c.name + ".csv")).string());
  return rep;
}

/// Re-emits a stored report as csv, json, or tab-separated plot triples.
inline void export_report(const std::string& report_path, const std::string& format,
                          const std::string& out_dir) {
  std::ifstream f(report_path);
  if (!f) throw invalid_argument_error("cannot open report: " + report_path);
  nlohmann::ordered_json j;
  f >> j;
  std::filesystem::create_directories(out_dir);

  if (format == "json") {
    std::ofstream o(std::filesystem::path(out_dir) / "report.json");
    write_json_17(o, j);
    o << '\n';
    return;
  }
  if (format == "csv") {
    for (const auto& jc : j.at("campaigns")) {
      CampaignResult c;
      c.name = jc.at("name").get<std::string>();
      c.rows = jc.value("rows", nlohmann::ordered_json::array());
      write_campaign_csv(c,
                         (std::filesystem::path(out_dir) / (c.name + ".csv")).string());
    }
    return;
  }
  if (format == "plotdata") {
    for (const auto& jc : j.at("campaigns")) {
      const std::string op = jc.value("op", "");
      const auto rows = jc.value("rows", nlohmann::ordered_json::array());
      std::ofstream o(std::filesystem::path(out_dir) /
                      (jc.at("name").get<std::string>() + ".plot.tsv"));
      o << "x\ty\tseries\n";
      auto num_text = [](const nlohmann::ordered_json& v) {
        return v.is_number_float() ? format_double(v.get<double>()) : v.dump();
      };
      std::size_t row_idx = 0;
      for (const auto& row : rows) {
        ++row_idx;
        if (row.value("summary", false)) continue;
        if (op == "ball_capacity_band")
          o << num_text(row.at("r")) << '\t' << num_text(row.at("normalized")) << '\t'
            << "x0=" << row.at("x0").dump() << '\n';
        else if (op == "capacity_density_scan" || op == "htl_density_scan")
          o << num_text(row.at("radius")) << '\t' << row.at("ratio").get<std::string>()
            << '\t' << "center=" << row.at("center").dump() << '\n';
        else if (op == "self_improvement_scan")
          o << num_text(row.at("beta_hat")) << '\t' << num_text(row.at("c0")) << '\t'
            << "p_hat=" << num_text(row.at("p_hat"))
            << ",q_hat=" << num_text(row.at("q_hat")) << '\n';
        else {
          // generic: first numeric column against the row index
          for (auto it = row.begin(); it != row.end(); ++it)
            if (it.value().is_number()) {
              o << (row_idx - 1) << '\t' << num_text(it.value()) << '\t'
                << jc.at("name").get<std::string>() << '\n';
              break;
            }
        }
      }
    }
    return;
  }
  throw invalid_argument_error("unknown export format: " + format);
}

}  // namespace fraccap
