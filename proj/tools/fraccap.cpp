// Command-line front end: scenario runner, space generators, report export.

#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "fraccap/scenario.hpp"
#include "fraccap/space.hpp"
#include "fraccap/space_io.hpp"

using namespace fraccap;

int main(int argc, char** argv) {
  CLI::App app{"nonlocal functional and capacity toolkit"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "execute a scenario");
  std::string scenario_path;
  std::optional<int> workers;
  std::optional<std::string> out_dir, cache_dir;
  run->add_option("scenario", scenario_path, "scenario JSON file")->required();
  run->add_option("--workers", workers, "worker threads");
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--cache", cache_dir, "cache directory");

  // gen
  auto* gen = app.add_subcommand("gen", "generate a space file");
  std::string gen_kind, gen_out;
  int gen_dim = 1, gen_m = 9, gen_n = 9, gen_depth = 2;
  double gen_ratio = 1.0 / 3.0;
  std::optional<int> gen_cells;
  gen->add_option("kind", gen_kind, "grid | path | cantor_line")->required();
  gen->add_option("--dim", gen_dim, "grid dimension (1 or 2)");
  gen->add_option("--m", gen_m, "grid points per side");
  gen->add_option("--n", gen_n, "path length");
  gen->add_option("--depth", gen_depth, "cantor iteration depth");
  gen->add_option("--ratio", gen_ratio, "cantor end-piece ratio");
  gen->add_option("--cells", gen_cells, "cantor cell count override");
  gen->add_option("--out", gen_out, "output file")->required();

  // export
  auto* exp = app.add_subcommand("export", "re-emit a report");
  std::string report_path, format = "csv", exp_out = ".";
  exp->add_option("report", report_path, "report.json produced by run")->required();
  exp->add_option("--format", format, "csv | json | plotdata")->required();
  exp->add_option("--out", exp_out, "output directory");

  // validate
  auto* val = app.add_subcommand("validate", "validate a scenario without running it");
  std::string val_path;
  val->add_option("scenario", val_path, "scenario JSON file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      RunOverrides ov;
      ov.workers = workers;
      ov.out_dir = out_dir;
      ov.cache_dir = cache_dir;
      const auto rep = run_scenario(scenario_path, ov);
      bool all_ok = true;
      for (const auto& c : rep.campaigns) {
        std::fprintf(stderr, "%-28s %-24s %s (%.1f ms)\n", c.name.c_str(), c.op.c_str(),
                     c.ok ? "ok" : ("ERROR: " + c.error).c_str(), c.wall_ms);
        all_ok = all_ok && c.ok;
      }
      return all_ok ? 0 : 1;
    }
    if (*gen) {
      GeneratedSpace g;
      if (gen_kind == "grid")
        g = generate_grid(gen_dim, gen_m);
      else if (gen_kind == "path")
        g = generate_path(gen_n);
      else if (gen_kind == "cantor_line")
        g = generate_cantor_line(gen_depth, gen_ratio, gen_cells);
      else {
        std::fprintf(stderr, "unknown kind \"%s\" (grid | path | cantor_line)\n",
                     gen_kind.c_str());
        return 1;
      }
      save_space(g.space, g.sets, gen_out);
      std::fprintf(stderr, "wrote %s: n=%d\n", gen_out.c_str(), g.space.n());
      return 0;
    }
    if (*exp) {
      export_report(report_path, format, exp_out);
      return 0;
    }
    if (*val) {
      const auto sc = load_scenario(val_path);
      validate_scenario(sc);
      std::fprintf(stderr, "scenario ok: %zu campaigns\n",
                   sc.raw.at("campaigns").size());
      return 0;
    }
  } catch (const ScenarioError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return e.exit_code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 1;
  }
  return 0;
}
