#pragma once

// End-to-end scenario driver: resolve the SI configuration, establish the
// stress-free base state, time-step the selected variant, recover stresses,
// write field/energy outputs, and emit a run manifest.  The manifest is
// written only when the whole pipeline completed, so its presence certifies
// a finished run.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"

#include "gelsim/config.hpp"
#include "gelsim/dynamics.hpp"
#include "gelsim/postprocess.hpp"

namespace gelsim {

struct RunOutcome {
  nlohmann::json manifest;
  std::string manifest_path;
  std::string out_dir;
};

namespace detail {

inline double seconds_since(
    const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       start)
      .count();
}

}  // namespace detail

/// Runs one scenario to completion and returns the manifest that was written
/// to `<cfg.out>/manifest.json`.  Throws on any failure (ConfigError,
/// NoBracket, StabilityGateError, solver errors, I/O errors); nothing named
/// manifest.json is produced in that case.
inline RunOutcome run_scenario(const SiConfig& cfg) {
  const auto t_total = std::chrono::steady_clock::now();

  Scales scales;
  ScenarioConfig run = nondimensionalize(cfg, &scales);

  const auto t_setup = std::chrono::steady_clock::now();
  Simulator sim(run);
  const double setup_seconds = detail::seconds_since(t_setup);

  const auto t_steps = std::chrono::steady_clock::now();
  for (int i = 0; i < cfg.steps; ++i) {
    sim.step();
  }
  const double steps_seconds = detail::seconds_since(t_steps);

  const auto t_post = std::chrono::steady_clock::now();
  StressField stress = stress_field(sim);
  // Stresses are nondimensional (units of mu_E), so the thresholds are taken
  // relative to a unit elastic scale.
  DebondReport debond = debonding_report(sim.mesh(), stress, 1.0);
  nlohmann::json interior_median;
  try {
    interior_median = interior_median_abs_syy(sim.mesh(), stress);
  } catch (const std::invalid_argument&) {
    interior_median = nullptr; // level-1 meshes have no interior cells
  }
  ExportResult files = export_fields(sim, stress, cfg.out);
  const double post_seconds = detail::seconds_since(t_post);

  // Non-increase is judged against the run's energy scale (initial energy,
  // peak energy, or the elastic energy the applied load could store), so
  // roundoff residue of an exactly-balanced state does not flip the flag.
  double energy_scale =
      std::max(sim.initial_energy(), run.P0 * run.P0 / sim.moduli().mu_t);
  for (const EnergyRecord& rec : sim.energy_history())
    energy_scale = std::max(energy_scale, std::abs(rec.energy));
  bool energy_monotone = true;
  const auto& history = sim.energy_history();
  for (std::size_t i = 1; i < history.size(); ++i) {
    if (history[i].energy > history[i - 1].energy + 1e-11 * energy_scale) {
      energy_monotone = false;
      break;
    }
  }
  const double final_energy =
      history.empty() ? sim.initial_energy() : history.back().energy;

  nlohmann::json manifest;
  manifest["config"] = config_echo(cfg);
  manifest["config_hash"] = config_hash(cfg);
  manifest["scales"] = {
      {"stress_pa", scales.stress_pa},
      {"time_seconds", scales.time_seconds},
      {"length_m", scales.length_m},
  };
  manifest["outputs"] = {
      {"vtk", "solution.vtk"},
      {"vertices_csv", "fields_vertices.csv"},
      {"cells_csv", "fields_cells.csv"},
      {"energy_csv", "energy.csv"},
  };
  manifest["summary"] = {
      {"variant", variant_name(run.variant)},
      {"level", cfg.level},
      {"steps", cfg.steps},
      {"dt", cfg.dt},
      {"final_time", sim.time()},
      {"final_time_seconds", sim.time() * scales.time_seconds},
      {"phi0", sim.equilibrium().phi0},
      {"f0", sim.equilibrium().f0},
      {"multiple_equilibria", sim.equilibrium().multiple_roots},
      {"mu_t", sim.moduli().mu_t},
      {"lambda_t", sim.moduli().lambda_t},
      {"kappa_perm", sim.moduli().kappa_perm},
      {"initial_energy", sim.initial_energy()},
      {"final_energy", final_energy},
      {"energy_monotone", energy_monotone},
      {"max_abs_syy_wall", debond.max_abs_syy},
      {"max_abs_syy_wall_pa", debond.max_abs_syy * scales.stress_pa},
      {"max_stress_cell", debond.cell},
      {"interior_median_abs_syy", interior_median},
      {"debond_status", debond_status_name(debond.status)},
      {"debond_warn_threshold", debond.warn_threshold},
      {"debond_fail_threshold", debond.fail_threshold},
  };
  manifest["timings"] = {
      {"setup_seconds", setup_seconds},
      {"steps_seconds", steps_seconds},
      {"postprocess_seconds", post_seconds},
      {"total_seconds", detail::seconds_since(t_total)},
  };

  const std::filesystem::path manifest_path =
      std::filesystem::path(cfg.out) / "manifest.json";
  {
    std::ofstream out(manifest_path);
    if (!out) {
      throw std::runtime_error("cannot write " + manifest_path.string());
    }
    out << manifest.dump(2) << "\n";
    if (!out) {
      throw std::runtime_error("failed writing " + manifest_path.string());
    }
  }

  RunOutcome outcome;
  outcome.manifest = std::move(manifest);
  outcome.manifest_path = manifest_path.string();
  outcome.out_dir = cfg.out;
  (void)files;
  return outcome;
}

}  // namespace gelsim
