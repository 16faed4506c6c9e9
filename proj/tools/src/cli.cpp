#include "drate_cli/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <unistd.h>

#include "drate/efficiency.hpp"
#include "drate/error.hpp"
#include "drate/scenario_io.hpp"
#include "drate/simulation.hpp"

namespace drate::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Manifest {
  std::string command;
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
};

// Writes through a sibling temporary file and renames it into place, so a
// reader never observes a partial output.
void write_atomically(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  if (path.empty()) throw ConfigError("--out is required");
  const fs::path parent = path.parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  fs::path tmp = path;
  tmp += ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    body(out);
    out.flush();
    if (!out) {
      fs::remove(tmp);
      throw Error("write failed: " + tmp.string());
    }
  }
  fs::rename(tmp, path);
}

fs::path base_dir(const std::string& config) {
  const fs::path parent = fs::path(config).parent_path();
  return parent.empty() ? fs::path(".") : parent;
}

ScenarioConfig load_scenario(const Manifest& m) {
  if (m.config.empty()) throw ConfigError("--config is required");
  ScenarioConfig cfg = scenario_from_json(read_json_file(m.config));
  if (m.seed) cfg.seed = *m.seed;
  validate(cfg);
  return cfg;
}

int cmd_estimate(const Manifest& m, std::ostream& out) {
  if (m.config.empty()) throw ConfigError("--config is required");
  EstimateConfig cfg = estimate_config_from_json(read_json_file(m.config), base_dir(m.config));
  const ObservationSet obs = load_dataset(cfg.data, cfg.schema);
  const auto entries = dr_estimate_sweep(obs, cfg.estimators, cfg.options);
  json records = json::array();
  for (const auto& e : entries) {
    if (!e.result) std::rethrow_exception(e.failure);
    records.push_back(*e.result);
  }
  write_atomically(m.out, [&](std::ostream& os) { os << records.dump(2) << '\n'; });
  out << "wrote " << records.size() << " estimates to " << m.out << '\n';
  return kOk;
}

int cmd_simulate(const Manifest& m, std::ostream& out) {
  const ScenarioConfig cfg = load_scenario(m);
  const unsigned jobs = m.jobs.value_or(1);
  const auto start = std::chrono::steady_clock::now();
  const McReport report = run_mc(cfg, jobs);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  write_atomically(m.out, [&](std::ostream& os) { write_report_csv(os, report); });

  json meta;
  meta["config"] = scenario_to_json(cfg);
  meta["seed"] = cfg.seed;
  meta["jobs"] = jobs;
  meta["wall_seconds"] = wall;
  meta["s0"] = report.s0;
  meta["achieved_untreated"] = report.achieved_untreated;
  meta["true_ate"] = report.true_ate;
  meta["angle_degrees"] = angle_degrees(report.alpha, cfg.beta.size() ? cfg.beta : default_beta(cfg.p));
  json failures = json::object();
  for (const auto& row : report.rows) {
    json f = {{"reps_failed", row.reps_failed}};
    if (!row.first_error.empty()) f["first_error"] = row.first_error;
    failures[std::to_string(row.estimator.value())] = f;
  }
  meta["failures"] = failures;
  fs::path meta_path = m.out;
  meta_path += ".meta.json";
  write_atomically(meta_path, [&](std::ostream& os) { os << meta.dump(2) << '\n'; });
  out << "wrote " << report.rows.size() << " rows to " << m.out << " in " << wall << " s\n";
  return kOk;
}

int cmd_curve(const Manifest& m, std::ostream& out) {
  std::vector<double> p_stars = {0.25, 0.5, 0.75};
  GridSpec grid;
  if (!m.config.empty()) {
    const json j = read_json_file(m.config);
    for (const auto& [key, value] : j.items()) {
      if (key != "p_star" && key != "grid") throw ConfigError("curve: unknown key \"" + key + "\"");
    }
    try {
      if (j.contains("p_star")) p_stars = j.at("p_star").get<std::vector<double>>();
      if (j.contains("grid")) {
        const auto& g = j.at("grid");
        for (const auto& [key, value] : g.items()) {
          if (key != "lo" && key != "hi" && key != "step") {
            throw ConfigError("curve.grid: unknown key \"" + key + "\"");
          }
        }
        grid.lo = g.value("lo", grid.lo);
        grid.hi = g.value("hi", grid.hi);
        grid.step = g.value("step", grid.step);
      }
    } catch (const json::exception& e) {
      throw ConfigError(std::string("curve: ") + e.what());
    }
  }
  if (p_stars.empty()) throw ConfigError("curve: p_star is empty");
  if (m.out.empty()) throw ConfigError("--out is required");
  // Validate everything before writing anything.
  std::vector<std::vector<CurvePoint>> curves;
  for (double p : p_stars) curves.push_back(curve_emit(p, grid));
  for (std::size_t k = 0; k < p_stars.size(); ++k) {
    char name[64];
    std::snprintf(name, sizeof name, "curve_p%g.csv", p_stars[k]);
    const fs::path path = fs::path(m.out) / name;
    write_atomically(path, [&](std::ostream& os) { write_curve_csv(os, curves[k]); });
    out << "wrote " << path.string() << '\n';
  }
  return kOk;
}

int cmd_calibrate(const Manifest& m, std::ostream& out) {
  const Scenario scenario(load_scenario(m));
  json j;
  j["seed"] = scenario.config().seed;
  j["s0"] = scenario.s0();
  j["target_untreated"] = scenario.config().target_untreated;
  j["achieved_untreated"] = scenario.calibration().untreated;
  j["alpha"] = std::vector<double>(scenario.alpha().data(),
                                   scenario.alpha().data() + scenario.alpha().size());
  j["angle_degrees"] = angle_degrees(scenario.alpha(), scenario.beta());
  j["true_ate"] = scenario.true_ate();
  write_atomically(m.out, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
  out << "s0 = " << scenario.s0() << '\n';
  return kOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Doubly robust average treatment effect estimation and simulation", "drate"};
  app.require_subcommand(1);
  Manifest m;

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* c = sub->add_option("--config", m.config, "JSON configuration file");
    if (config_required) c->required();
    sub->add_option("--out", m.out, "output path")->required();
  };
  auto* estimate = app.add_subcommand("estimate", "estimate the ATE on one dataset");
  add_common(estimate, true);
  auto* simulate = app.add_subcommand("simulate", "run a Monte Carlo scenario");
  add_common(simulate, true);
  simulate->add_option("--seed", m.seed, "replaces the config seed");
  simulate->add_option("--jobs", m.jobs, "worker threads")->check(CLI::PositiveNumber);
  auto* curve = app.add_subcommand("curve", "emit f(g) curves, one CSV per p* into --out");
  add_common(curve, false);
  auto* calibrate = app.add_subcommand("calibrate", "solve for the offset s0 of a scenario");
  add_common(calibrate, true);
  calibrate->add_option("--seed", m.seed, "replaces the config seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "drate: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (*estimate) return cmd_estimate(m, out);
    if (*simulate) return cmd_simulate(m, out);
    if (*curve) return cmd_curve(m, out);
    return cmd_calibrate(m, out);
  } catch (const ConfigError& e) {
    err << "drate: invalid configuration: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    err << "drate: invalid data: " << e.what() << '\n';
    return kUsage;
  } catch (const FitError& e) {
    err << "drate: fit failed: " << e.what() << '\n';
    return kFailure;
  } catch (const std::exception& e) {
    err << "drate: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace drate::cli
