#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "fraccap/space.hpp"

namespace fraccap {

/// Serializes a json value with every floating-point number printed via
/// "%.17g", so files parse back to bit-identical doubles.
inline void write_json_17(std::ostream& os, const nlohmann::json& v) {
  using nlohmann::json;
  switch (v.type()) {
    case json::value_t::object: {
      os << '{';
      bool first = true;
      for (auto it = v.begin(); it != v.end(); ++it) {
        if (!first) os << ',';
        first = false;
        os << json(it.key()).dump() << ':';
        write_json_17(os, it.value());
      }
      os << '}';
      break;
    }
    case json::value_t::array: {
      os << '[';
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) os << ',';
        write_json_17(os, v[i]);
      }
      os << ']';
      break;
    }
    case json::value_t::number_float:
      os << format_double(v.get<double>());
      break;
    default:
      os << v.dump();
  }
}

inline std::string dump_json_17(const nlohmann::json& v) {
  std::ostringstream os;
  write_json_17(os, v);
  return os.str();
}

inline void save_space(const MetricMeasureSpace& space,
                       const std::map<std::string, PointSet>& sets,
                       const std::string& path) {
  nlohmann::json j;
  j["version"] = 1;
  j["n"] = space.n();
  if (space.is_euclidean()) {
    j["metric"] = {{"kind", "euclidean"}};
    j["coords"] = space.coords();
  } else {
    std::vector<double> upper;
    upper.reserve(static_cast<std::size_t>(space.n()) * (space.n() - 1) / 2);
    for (Index i = 0; i < space.n(); ++i)
      for (Index k = i + 1; k < space.n(); ++k) upper.push_back(space.dist(i, k));
    j["metric"] = {{"kind", "matrix"}, {"upper", upper}};
  }
  j["weights"] = space.weights();
  nlohmann::json js = nlohmann::json::object();
  for (const auto& [name, s] : sets) js[name] = s.members();
  j["sets"] = js;

  std::ofstream f(path);
  if (!f) throw invalid_argument_error("cannot open for writing: " + path);
  write_json_17(f, j);
  f << '\n';
}

inline GeneratedSpace load_space(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw invalid_argument_error("cannot open: " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw invalid_argument_error("space file " + path + ": " + e.what());
  }

  auto need = [&](const char* key) -> const nlohmann::json& {
    if (!j.contains(key))
      throw invalid_argument_error("space file: missing field \"" + std::string(key) + "\"");
    return j[key];
  };
  if (need("version").get<int>() != 1)
    throw invalid_argument_error("space file: unsupported version");
  const Index n = need("n").get<Index>();
  const auto weights = need("weights").get<std::vector<double>>();
  const auto& metric = need("metric");
  const std::string kind = metric.value("kind", "");

  GeneratedSpace g;
  if (kind == "euclidean") {
    auto coords = need("coords").get<std::vector<std::vector<double>>>();
    if (static_cast<Index>(coords.size()) != n)
      throw invalid_argument_error("space file: coords length != n");
    g.space = MetricMeasureSpace::euclidean(std::move(coords), weights);
  } else if (kind == "matrix") {
    if (!metric.contains("upper"))
      throw invalid_argument_error("space file: metric.upper missing");
    g.space = MetricMeasureSpace::from_matrix(
        n, metric["upper"].get<std::vector<double>>(), weights);
  } else {
    throw invalid_argument_error("space file: metric.kind must be euclidean or matrix");
  }

  if (j.contains("sets")) {
    for (auto it = j["sets"].begin(); it != j["sets"].end(); ++it) {
      const auto idx = it.value().get<std::vector<Index>>();
      for (Index i : idx)
        if (i < 0 || i >= n)
          throw invalid_argument_error("space file: set \"" + it.key() +
                                       "\" has out-of-range index");
      g.sets[it.key()] = PointSet::of(n, idx);
    }
  }
  if (!g.sets.count("ALL")) g.sets["ALL"] = PointSet::all(n);
  return g;
}

}  // namespace fraccap
