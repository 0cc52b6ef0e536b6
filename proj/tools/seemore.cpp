#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "seemore/scenario.hpp"

using namespace seemore;

int main(int argc, char** argv) {
  CLI::App app{
      "seemore: hybrid-cluster replication simulator and scenario runner"};

  std::string scenario_path, sweep_path, out_path, mode_override;
  uint64_t seed_override = 0;
  bool seed_set = false, audit_only = false;

  app.add_option("--scenario", scenario_path, "Scenario JSON file");
  app.add_option("--sweep", sweep_path, "Sweep JSON file (grid of cells)");
  app.add_option("--out", out_path, "Write metrics CSV here");
  app.add_option("--mode", mode_override,
                 "Override initial mode: lion|dog|peacock");
  app.add_option("--seed", seed_override, "Override the scenario seed")
      ->each([&](const std::string&) { seed_set = true; });
  app.add_flag("--audit-only", audit_only,
               "Run and print the safety audit, skip metrics output");

  CLI11_PARSE(app, argc, argv);

  if (scenario_path.empty() == sweep_path.empty()) {
    std::cerr << "exactly one of --scenario or --sweep is required\n";
    return 1;
  }

  try {
    if (!sweep_path.empty()) {
      auto loaded = load_sweep(sweep_path);
      if (auto* err = std::get_if<std::string>(&loaded)) {
        std::cerr << "sweep error: " << *err << '\n';
        return 1;
      }
      SweepConfig cfg = std::get<SweepConfig>(loaded);
      if (seed_set) cfg.seeds = {seed_override};
      std::string csv = run_sweep(cfg);
      if (out_path.empty()) {
        std::cout << csv;
      } else {
        std::ofstream f(out_path, std::ios::binary);
        if (!f) {
          std::cerr << "cannot write " << out_path << '\n';
          return 1;
        }
        f << csv;
      }
      return 0;
    }

    auto loaded = load_scenario(scenario_path);
    if (auto* err = std::get_if<std::string>(&loaded)) {
      std::cerr << "scenario error: " << *err << '\n';
      return 1;
    }
    Scenario sc = std::get<Scenario>(loaded);
    if (seed_set) sc.seed = seed_override;
    if (!mode_override.empty()) {
      Mode m;
      if (!mode_from_name(mode_override, m)) {
        std::cerr << "unknown mode: " << mode_override << '\n';
        return 1;
      }
      sc.initial_mode = m;
    }
    if (auto err = sc.validate()) {
      std::cerr << "invalid scenario: " << *err << '\n';
      return 1;
    }

    RunResult r = run_scenario(sc);

    if (!r.audit.ok) {
      std::cerr << "SAFETY VIOLATION\n";
      for (const std::string& v : r.audit.violations)
        std::cerr << "  " << v << '\n';
      return 2;
    }

    if (audit_only) {
      std::cout << "audit clean: " << r.exec_log.size()
                << " execution records, " << r.metrics.requests.size()
                << " completed requests, final view " << r.final_view
                << " (" << mode_name(r.final_mode) << ")\n";
      return 0;
    }

    if (!out_path.empty()) {
      if (!r.metrics.emit_csv(out_path)) {
        std::cerr << "cannot write " << out_path << '\n';
        return 1;
      }
    } else {
      std::cout << r.metrics.to_csv();
    }
    std::cerr << "completed " << r.metrics.requests.size() << " requests in "
              << r.metrics.duration << " sim-ms, " << r.metrics.total_messages
              << " messages, " << r.metrics.view_changes.size()
              << " view changes" << (r.all_completed ? "" : " (incomplete)")
              << '\n';
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
