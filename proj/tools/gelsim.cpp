// gelsim: command-line front end for the gel swelling library.
//
// Subcommands:
//   equilibrium  solve the spherical stress-free state, print JSON
//   stability    print coercivity margins; optional CSV sweep over phi_I
//   curve        tabulate osmotic-pressure curves over chi values as CSV
//   run          time-step one scenario and write fields + manifest
//   sweep        map `run` over a comma-separated list of parameter values
//
// Exit codes: 0 success, 2 configuration error, 3 base-state failure
// (no equilibrium root or stability gate), 4 linear solver failure,
// 5 I/O or other runtime failure.

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gelsim/config.hpp"
#include "gelsim/dynamics.hpp"
#include "gelsim/equilibrium.hpp"
#include "gelsim/material.hpp"
#include "gelsim/postprocess.hpp"
#include "gelsim/runner.hpp"
#include "gelsim/stability.hpp"

namespace {

using nlohmann::json;

struct CommonFlags {
  std::string config_path;
  std::string preset;
  std::string variant;
  std::string out;
  int level = 0;
  int steps = 0;
  double dt = 0.0;
  double p0 = 0.0;
};

void add_common_flags(CLI::App* sub, CommonFlags& f, bool run_like) {
  sub->add_option("--config", f.config_path, "JSON configuration file");
  sub->add_option("--preset", f.preset, "parameter preset")
      ->check(CLI::IsMember({"fig1", "fig2"}));
  sub->add_option("--level", f.level, "mesh refinement level (1..10)");
  if (run_like) {
    sub->add_option("--variant", f.variant,
                    "inviscid-impermeable | inviscid-permeable | "
                    "viscous-impermeable | viscous-permeable");
    sub->add_option("--steps", f.steps, "number of time steps");
    sub->add_option("--dt", f.dt, "time step (units of eta1/mu_E)");
    sub->add_option("--out", f.out, "output directory");
    sub->add_option("--P0", f.p0, "squeeze traction amplitude [Pa]");
  }
}

// File config first (if any), then explicit flags on top.  resolve_config
// applies the preset key before every other key, so the effective precedence
// is defaults < preset < config file < command line.
json overlay_flags(const CLI::App* sub, const CommonFlags& f) {
  json j = f.config_path.empty() ? json::object()
                                 : gelsim::load_config_json(f.config_path);
  if (!j.is_object()) {
    throw gelsim::ConfigError("config must be a JSON object");
  }
  auto given = [&](const std::string& name) {
    const CLI::Option* o = sub->get_option_no_throw(name);
    return o != nullptr && o->count() > 0;
  };
  if (given("--preset")) j["preset"] = f.preset;
  if (given("--level")) j["level"] = f.level;
  if (given("--variant")) j["variant"] = f.variant;
  if (given("--steps")) j["steps"] = f.steps;
  if (given("--dt")) j["dt"] = f.dt;
  if (given("--out")) j["out"] = f.out;
  if (given("--P0")) j["P0"] = f.p0;
  return j;
}

std::vector<double> parse_double_list(const std::string& text,
                                      const std::string& flag) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      while (used < item.size() && std::isspace(item[used])) ++used;
      if (used != item.size()) throw std::invalid_argument(item);
      values.push_back(v);
    } catch (const std::exception&) {
      throw gelsim::ConfigError("cannot parse '" + item + "' in " + flag +
                                " as a number");
    }
  }
  if (values.empty()) {
    throw gelsim::ConfigError(flag + " needs at least one value");
  }
  return values;
}

// Maps a failure to the documented exit code; returns 0 when `body` ran
// through.  `err` receives the failure message.
int exit_code_for(const std::function<void()>& body, std::string& err) {
  try {
    body();
    return 0;
  } catch (const gelsim::ConfigError& e) {
    err = e.what();
    return 2;
  } catch (const gelsim::NoBracket& e) {
    err = e.what();
    return 3;
  } catch (const gelsim::StabilityGateError& e) {
    err = e.what();
    return 3;
  } catch (const gelsim::SingularMatrix& e) {
    err = e.what();
    return 4;
  } catch (const gelsim::IterationLimit& e) {
    err = e.what();
    return 4;
  } catch (const gelsim::ResidualCheckFailure& e) {
    err = e.what();
    return 4;
  } catch (const std::exception& e) {
    err = e.what();
    return 5;
  }
}

const char* error_prefix(int code) {
  switch (code) {
    case 2: return "config error: ";
    case 3: return "base state error: ";
    case 4: return "solver error: ";
    default: return "error: ";
  }
}

json equilibrium_json(const gelsim::EquilibriumState& eq) {
  json roots = json::array();
  for (double r : eq.roots) roots.push_back(r);
  return json{
      {"phi0", eq.phi0},
      {"f0", eq.f0},
      {"I1", eq.I1},
      {"I3", eq.I3},
      {"residual", eq.residual},
      {"kappa0", eq.kappa0},
      {"nu0", eq.nu0},
      {"multiple_roots", eq.multiple_roots},
      {"roots", roots},
      {"phi_star", eq.phi_star ? json(*eq.phi_star) : json(nullptr)},
  };
}

void cmd_equilibrium(const json& raw) {
  const gelsim::SiConfig cfg =
      gelsim::resolve_config(raw, /*require_variant=*/false);
  const gelsim::ScenarioConfig run = gelsim::nondimensionalize(cfg);
  const gelsim::EquilibriumState eq = gelsim::solve_spherical(run.material);
  const gelsim::UniquenessCheck uq =
      gelsim::uniqueness_condition(run.material);
  json out = equilibrium_json(eq);
  out["uniqueness"] = {
      {"holds", uq.holds}, {"lhs", uq.lhs}, {"rhs", uq.rhs}};
  std::cout << out.dump(2) << "\n";
}

void cmd_stability(const json& raw, const std::string& sweep_spec,
                   const std::string& csv_path) {
  const gelsim::SiConfig cfg =
      gelsim::resolve_config(raw, /*require_variant=*/false);
  const gelsim::ScenarioConfig run = gelsim::nondimensionalize(cfg);
  const gelsim::EquilibriumState eq = gelsim::solve_spherical(run.material);
  const gelsim::EffectiveModuli mod =
      gelsim::effective_moduli(run.material, eq.phi0, eq.f0);
  const gelsim::SphericalCheck chk = gelsim::check_spherical(mod);

  json out{
      {"phi0", eq.phi0},
      {"f0", eq.f0},
      {"mu_t", mod.mu_t},
      {"lambda_t", mod.lambda_t},
      {"kappa_perm", mod.kappa_perm},
      {"mu_t_margin", chk.mu_t_margin},
      {"bulk_margin", chk.bulk_margin},
      {"mu0", chk.mu0},
      {"ok", chk.ok},
  };
  std::cout << out.dump(2) << "\n";

  if (sweep_spec.empty()) return;

  double lo = 0.0, hi = 0.0;
  int n = 0;
  if (std::sscanf(sweep_spec.c_str(), "%lf:%lf:%d", &lo, &hi, &n) != 3 ||
      n < 2) {
    throw gelsim::ConfigError("--sweep-phi expects lo:hi:n with n >= 2");
  }
  std::ofstream csv(csv_path);
  if (!csv) {
    throw std::runtime_error("cannot write " + csv_path);
  }
  csv << "phi_I,phi0,f0,mu_t,lambda_t,mu_t_margin,bulk_margin,ok\n";
  for (int i = 0; i < n; ++i) {
    const double phi =
        std::lerp(lo, hi, static_cast<double>(i) / (n - 1));
    gelsim::MaterialParams m = run.material;
    m.phi_I = phi;
    csv << gelsim::detail::g17(phi) << ",";
    try {
      const gelsim::EquilibriumState e = gelsim::solve_spherical(m);
      const gelsim::EffectiveModuli md =
          gelsim::effective_moduli(m, e.phi0, e.f0);
      const gelsim::SphericalCheck c = gelsim::check_spherical(md);
      csv << gelsim::detail::g17(e.phi0) << "," << gelsim::detail::g17(e.f0)
          << "," << gelsim::detail::g17(md.mu_t) << ","
          << gelsim::detail::g17(md.lambda_t) << ","
          << gelsim::detail::g17(c.mu_t_margin) << ","
          << gelsim::detail::g17(c.bulk_margin) << "," << (c.ok ? 1 : 0)
          << "\n";
    } catch (const std::exception& e) {
      csv << "nan,nan,nan,nan,nan,nan,0\n";
      std::cerr << "warning: phi_I=" << phi << ": " << e.what() << "\n";
    }
  }
  if (!csv) {
    throw std::runtime_error("failed writing " + csv_path);
  }
  std::cout << "wrote " << csv_path << "\n";
}

void cmd_curve(const json& raw, const std::string& chi_list, int points,
               const std::string& csv_path) {
  const gelsim::SiConfig cfg =
      gelsim::resolve_config(raw, /*require_variant=*/false);
  const gelsim::ScenarioConfig run = gelsim::nondimensionalize(cfg);
  const std::vector<double> chis =
      chi_list.empty() ? std::vector<double>{cfg.chi}
                       : parse_double_list(chi_list, "--chi");
  const std::vector<gelsim::PiCurve> curves =
      gelsim::pi_curves(run.material, chis, points);

  std::ofstream file;
  std::ostream* os = &std::cout;
  if (!csv_path.empty()) {
    file.open(csv_path);
    if (!file) throw std::runtime_error("cannot write " + csv_path);
    os = &file;
  }
  // The library works with stresses scaled by mu_E; report SI pascals here.
  *os << "chi,phi,pi_pa\n";
  for (const gelsim::PiCurve& c : curves) {
    for (std::size_t i = 0; i < c.phi.size(); ++i) {
      *os << gelsim::detail::g17(c.chi) << "," << gelsim::detail::g17(c.phi[i])
          << "," << gelsim::detail::g17(c.pi[i] * cfg.mu_E) << "\n";
    }
    if (!c.monotone) {
      std::cerr << "warning: osmotic pressure is not monotone in phi for chi="
                << c.chi << " (demixing regime)\n";
    }
  }
  if (!csv_path.empty()) {
    if (!file) throw std::runtime_error("failed writing " + csv_path);
    std::cout << "wrote " << csv_path << "\n";
  }
}

void cmd_run(const json& raw) {
  const gelsim::SiConfig cfg = gelsim::resolve_config(raw);
  const gelsim::RunOutcome outcome = gelsim::run_scenario(cfg);
  const json& s = outcome.manifest["summary"];
  std::cout << "variant " << s["variant"].get<std::string>() << ", level "
            << s["level"] << ", " << s["steps"] << " steps of dt " << s["dt"]
            << "\n";
  std::cout << "phi0 " << s["phi0"] << ", f0 " << s["f0"] << ", mu_t "
            << s["mu_t"] << ", lambda_t " << s["lambda_t"] << "\n";
  std::cout << "final energy " << s["final_energy"] << " (monotone: "
            << (s["energy_monotone"].get<bool>() ? "yes" : "no") << ")\n";
  std::cout << "max wall |sigma_yy| " << s["max_abs_syy_wall_pa"]
            << " Pa, debonding status: "
            << s["debond_status"].get<std::string>() << "\n";
  std::cout << "wrote " << outcome.manifest_path << "\n";
}

int thread_budget(std::size_t jobs) {
  unsigned n = std::thread::hardware_concurrency();
  if (n == 0) n = 1;
  if (const char* env = std::getenv("GELSIM_THREADS")) {
    try {
      const int k = std::stoi(env);
      if (k >= 1) n = std::min(n, static_cast<unsigned>(k));
    } catch (const std::exception&) {
      throw gelsim::ConfigError("GELSIM_THREADS must be a positive integer");
    }
  }
  return static_cast<int>(std::min<std::size_t>(n, jobs));
}

int cmd_sweep(const json& raw, const std::string& param,
              const std::string& values_list) {
  static const std::vector<std::string> kNumericKeys = {
      "dt", "P0",   "mu_E", "fh_scale", "eta1", "mu1", "eta2",
      "mu2", "beta", "chi",  "N1",       "N2",   "a1",  "s",
      "alpha", "a3", "q",    "r",        "phi_I"};
  static const std::vector<std::string> kIntegerKeys = {"level", "steps"};
  const bool integer_param =
      std::find(kIntegerKeys.begin(), kIntegerKeys.end(), param) !=
      kIntegerKeys.end();
  if (!integer_param &&
      std::find(kNumericKeys.begin(), kNumericKeys.end(), param) ==
          kNumericKeys.end()) {
    throw gelsim::ConfigError("cannot sweep over '" + param +
                              "': not a numeric config key");
  }

  const std::vector<double> values = parse_double_list(values_list, "--values");

  // Resolve every scenario up front so configuration errors surface before
  // any run starts.
  const std::string base_out =
      raw.contains("out") ? raw["out"].get<std::string>() : std::string("out");
  std::vector<gelsim::SiConfig> configs;
  std::vector<std::string> labels;
  for (double v : values) {
    json j = raw;
    json value = integer_param ? json(static_cast<int>(std::llround(v)))
                               : json(v);
    j[param] = value;
    const std::string label = param + "_" + value.dump();
    j["out"] = (std::filesystem::path(base_out) / label).string();
    configs.push_back(gelsim::resolve_config(j));
    labels.push_back(label);
  }

  struct SweepResult {
    int code = 0;
    std::string error;
    json summary;
    std::string hash;
  };
  std::vector<SweepResult> results(configs.size());

  const int workers = thread_budget(configs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= configs.size()) return;
      SweepResult& res = results[i];
      res.code = exit_code_for(
          [&] {
            const gelsim::RunOutcome outcome =
                gelsim::run_scenario(configs[i]);
            res.summary = outcome.manifest["summary"];
            res.hash = outcome.manifest["config_hash"].get<std::string>();
          },
          res.error);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int t = 0; t < workers; ++t) pool.emplace_back(work);
  for (std::thread& t : pool) t.join();

  std::filesystem::create_directories(base_out);
  const std::string summary_path =
      (std::filesystem::path(base_out) / "sweep_summary.csv").string();
  std::ofstream csv(summary_path);
  if (!csv) throw std::runtime_error("cannot write " + summary_path);
  csv << "param,value,status,exit_code,phi0,f0,final_energy,"
         "max_abs_syy_wall_pa,debond_status,config_hash,out_dir\n";
  int first_failure = 0;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const SweepResult& res = results[i];
    csv << param << "," << gelsim::detail::g17(values[i]) << ","
        << (res.code == 0 ? "ok" : "failed") << "," << res.code << ",";
    if (res.code == 0) {
      csv << gelsim::detail::g17(res.summary["phi0"].get<double>()) << ","
          << gelsim::detail::g17(res.summary["f0"].get<double>()) << ","
          << gelsim::detail::g17(res.summary["final_energy"].get<double>())
          << ","
          << gelsim::detail::g17(
                 res.summary["max_abs_syy_wall_pa"].get<double>())
          << "," << res.summary["debond_status"].get<std::string>() << ","
          << res.hash;
    } else {
      csv << ",,,,,";
      std::cerr << labels[i] << ": " << error_prefix(res.code) << res.error
                << "\n";
      if (first_failure == 0) first_failure = res.code;
    }
    csv << "," << configs[i].out << "\n";
  }
  if (!csv) throw std::runtime_error("failed writing " + summary_path);
  std::cout << "wrote " << summary_path << "\n";
  return first_failure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gelsim: linearized two-phase gel swelling simulator"};
  app.require_subcommand(1);

  CommonFlags eq_flags, st_flags, cv_flags, run_flags, sw_flags;
  std::string sweep_phi_spec, stability_csv = "stability_sweep.csv";
  std::string chi_list, curve_csv;
  int curve_points = 199;
  std::string sweep_param, sweep_values;

  CLI::App* eq = app.add_subcommand(
      "equilibrium", "solve the spherical stress-free swelling state");
  add_common_flags(eq, eq_flags, /*run_like=*/false);

  CLI::App* st = app.add_subcommand(
      "stability", "report coercivity margins of the base state");
  add_common_flags(st, st_flags, /*run_like=*/false);
  st->add_option("--sweep-phi", sweep_phi_spec,
                 "sweep phi_I over lo:hi:n and write a CSV");
  st->add_option("--csv", stability_csv, "CSV path for --sweep-phi");

  CLI::App* cv = app.add_subcommand(
      "curve", "tabulate osmotic pressure against network fraction");
  add_common_flags(cv, cv_flags, /*run_like=*/false);
  cv->add_option("--chi", chi_list, "comma-separated interaction values");
  cv->add_option("--points", curve_points, "samples per curve")
      ->check(CLI::Range(2, 100000));
  cv->add_option("--csv", curve_csv, "write CSV here instead of stdout");

  CLI::App* rn =
      app.add_subcommand("run", "time-step one scenario and write outputs");
  add_common_flags(rn, run_flags, /*run_like=*/true);

  CLI::App* sw = app.add_subcommand(
      "sweep", "run one scenario per value of a numeric parameter");
  add_common_flags(sw, sw_flags, /*run_like=*/true);
  sw->add_option("--param", sweep_param, "config key to sweep")->required();
  sw->add_option("--values", sweep_values, "comma-separated values")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help/--version exit 0; every usage mistake is a configuration error.
    const int parse_code = app.exit(e);
    return parse_code == 0 ? 0 : 2;
  }

  std::string err;
  int code = 0;
  const int guard_code = exit_code_for(
      [&] {
        if (app.got_subcommand(eq)) {
          cmd_equilibrium(overlay_flags(eq, eq_flags));
        } else if (app.got_subcommand(st)) {
          cmd_stability(overlay_flags(st, st_flags), sweep_phi_spec,
                        stability_csv);
        } else if (app.got_subcommand(cv)) {
          cmd_curve(overlay_flags(cv, cv_flags), chi_list, curve_points,
                    curve_csv);
        } else if (app.got_subcommand(rn)) {
          cmd_run(overlay_flags(rn, run_flags));
        } else if (app.got_subcommand(sw)) {
          code = cmd_sweep(overlay_flags(sw, sw_flags), sweep_param,
                           sweep_values);
        }
      },
      err);
  if (guard_code != 0) {
    std::cerr << error_prefix(guard_code) << err << "\n";
    return guard_code;
  }
  return code;
}
