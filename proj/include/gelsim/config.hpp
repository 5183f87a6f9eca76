#pragma once

// SI-facing run configuration: JSON parsing, presets, validation,
// nondimensionalization into solver inputs, and a deterministic content hash
// for run manifests.
//
// Unit convention for the keys handled here: stresses/moduli in Pa
// (mu_E, fh_scale, P0), viscosities in Pa*s (eta1, mu1, eta2, mu2), the
// friction coefficient beta in Pa*s/m^2 for a unit-length domain, and all
// remaining material/numerics keys dimensionless.  The solver consumes the
// nondimensional form produced by `nondimensionalize`: stresses scale with
// mu_E, time with eta1/mu_E, length with the domain size.

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "gelsim/detail/sha1.hpp"
#include "gelsim/dynamics.hpp"
#include "gelsim/material.hpp"

namespace gelsim {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Conversion factors from nondimensional solver quantities back to SI.
struct Scales {
  double stress_pa = 1.0;    ///< multiply nondimensional stress by this
  double time_seconds = 1.0; ///< multiply nondimensional time by this
  double length_m = 1.0;     ///< multiply nondimensional length by this
};

/// A fully resolved run configuration in SI units.  Field defaults are the
/// documented configuration defaults; `resolve_config` layers preset values
/// and user keys on top of them.
struct SiConfig {
  std::string preset;  // "", "fig1", or "fig2"
  std::string variant; // required for run/sweep
  int level = 5;
  int steps = 100;
  double dt = 0.01; // in units of the time scale eta1/mu_E

  double P0 = 1e4;   // squeeze traction amplitude [Pa]
  double mu_E = 1e9; // elastic stress scale [Pa]
  double fh_scale = 1e5; // mixing-energy stress scale [Pa]

  double eta1 = 1e8; // network shear viscosity [Pa*s]
  double mu1 = 1e8;  // network bulk viscosity [Pa*s]
  double eta2 = 1e7; // solvent shear viscosity [Pa*s]
  double mu2 = 1e7;  // solvent bulk viscosity [Pa*s]
  double beta = 1e8; // interphase friction [Pa*s/m^2]

  double chi = 0.5; // mixing interaction parameter
  double N1 = 1000.0;
  double N2 = 1.0;

  double a1 = 1.0;
  double s = 1.0;
  double alpha = 2.0;
  double a3 = 1.0;
  double q = 1.5;
  double r = 1.0;
  double phi_I = 0.5;

  bool initial_perturbation = true;
  std::string out = "out";
};

inline Variant variant_from_string(const std::string& name) {
  if (name == "inviscid-impermeable") return Variant::InviscidImpermeable;
  if (name == "inviscid-permeable") return Variant::InviscidPermeable;
  if (name == "viscous-impermeable") return Variant::ViscousImpermeable;
  if (name == "viscous-permeable") return Variant::ViscousPermeable;
  throw ConfigError(
      "invalid variant '" + name +
      "': expected one of inviscid-impermeable, inviscid-permeable, "
      "viscous-impermeable, viscous-permeable");
}

/// Applies one of the named parameter presets on top of `cfg`.
inline void apply_preset(const std::string& preset, SiConfig& cfg) {
  if (preset == "fig1") {
    cfg.preset = "fig1";
    cfg.variant = "inviscid-permeable";
    cfg.fh_scale = 1e5;
    cfg.s = 3.0;
    cfg.q = 1.5;
    cfg.r = 4.0;
    cfg.alpha = 20.0;
    cfg.a1 = 1.0;
    cfg.a3 = 1.0;
    cfg.phi_I = 0.5;
    cfg.chi = 0.5;
  } else if (preset == "fig2") {
    cfg.preset = "fig2";
    cfg.variant = "inviscid-permeable";
    cfg.fh_scale = 1e7;
    cfg.s = 1.0;
    cfg.q = 1.5;
    cfg.r = 1.1;
    cfg.alpha = 5.0;
    cfg.a1 = 1.0;
    cfg.a3 = 1.0;
    cfg.phi_I = 0.5;
    cfg.chi = 0.5;
  } else {
    throw ConfigError("unknown preset '" + preset +
                      "': expected fig1 or fig2");
  }
}

namespace detail {

inline double read_number(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number()) {
    throw ConfigError("config key '" + key + "' must be a number");
  }
  return v.get<double>();
}

inline int read_integer(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number_integer()) {
    throw ConfigError("config key '" + key + "' must be an integer");
  }
  return v.get<int>();
}

inline bool read_bool(const nlohmann::json& v, const std::string& key) {
  if (!v.is_boolean()) {
    throw ConfigError("config key '" + key + "' must be a boolean");
  }
  return v.get<bool>();
}

inline std::string read_string(const nlohmann::json& v,
                               const std::string& key) {
  if (!v.is_string()) {
    throw ConfigError("config key '" + key + "' must be a string");
  }
  return v.get<std::string>();
}

}  // namespace detail

/// Structural and range validation of a resolved configuration.  Material
/// ranges are delegated to MaterialParams::validate via nondimensionalize;
/// this checks the keys that the material struct does not see.
inline void validate_config(const SiConfig& cfg, bool require_variant) {
  if (require_variant) {
    if (cfg.variant.empty()) {
      throw ConfigError("config key 'variant' is required");
    }
    variant_from_string(cfg.variant); // throws on bad names
  } else if (!cfg.variant.empty()) {
    variant_from_string(cfg.variant);
  }
  if (cfg.level < 1 || cfg.level > 10) {
    throw ConfigError("config key 'level' must be between 1 and 10");
  }
  if (cfg.steps < 0) {
    throw ConfigError("config key 'steps' must be non-negative");
  }
  if (!(cfg.dt > 0.0)) {
    throw ConfigError("config key 'dt' must be positive");
  }
  if (!(cfg.mu_E > 0.0)) {
    throw ConfigError("config key 'mu_E' must be positive");
  }
  if (!(cfg.eta1 > 0.0)) {
    throw ConfigError("config key 'eta1' must be positive");
  }
  if (!(cfg.N1 > 0.0)) {
    throw ConfigError("config key 'N1' must be positive");
  }
  if (!(cfg.N2 > 0.0)) {
    throw ConfigError("config key 'N2' must be positive");
  }
  if (!(cfg.P0 >= 0.0)) {
    throw ConfigError("config key 'P0' must be non-negative");
  }
  if (cfg.out.empty()) {
    throw ConfigError("config key 'out' must not be empty");
  }
}

/// Resolves a flat JSON object into an SiConfig: defaults first, then the
/// preset named by a "preset" key (if any), then every remaining key as an
/// override.  Unknown keys and wrongly typed values are rejected by name.
/// `require_variant` is set for subcommands that time-step (run/sweep).
inline SiConfig resolve_config(const nlohmann::json& j,
                               bool require_variant = true) {
  if (!j.is_object()) {
    throw ConfigError("config must be a JSON object");
  }

  SiConfig cfg;
  if (auto it = j.find("preset"); it != j.end()) {
    apply_preset(detail::read_string(*it, "preset"), cfg);
  }

  for (const auto& [key, value] : j.items()) {
    if (key == "preset") {
      continue; // already applied
    } else if (key == "variant") {
      cfg.variant = detail::read_string(value, key);
    } else if (key == "out") {
      cfg.out = detail::read_string(value, key);
    } else if (key == "level") {
      cfg.level = detail::read_integer(value, key);
    } else if (key == "steps") {
      cfg.steps = detail::read_integer(value, key);
    } else if (key == "initial_perturbation") {
      cfg.initial_perturbation = detail::read_bool(value, key);
    } else if (key == "dt") {
      cfg.dt = detail::read_number(value, key);
    } else if (key == "P0") {
      cfg.P0 = detail::read_number(value, key);
    } else if (key == "mu_E") {
      cfg.mu_E = detail::read_number(value, key);
    } else if (key == "fh_scale") {
      cfg.fh_scale = detail::read_number(value, key);
    } else if (key == "eta1") {
      cfg.eta1 = detail::read_number(value, key);
    } else if (key == "mu1") {
      cfg.mu1 = detail::read_number(value, key);
    } else if (key == "eta2") {
      cfg.eta2 = detail::read_number(value, key);
    } else if (key == "mu2") {
      cfg.mu2 = detail::read_number(value, key);
    } else if (key == "beta") {
      cfg.beta = detail::read_number(value, key);
    } else if (key == "chi") {
      cfg.chi = detail::read_number(value, key);
    } else if (key == "N1") {
      cfg.N1 = detail::read_number(value, key);
    } else if (key == "N2") {
      cfg.N2 = detail::read_number(value, key);
    } else if (key == "a1") {
      cfg.a1 = detail::read_number(value, key);
    } else if (key == "s") {
      cfg.s = detail::read_number(value, key);
    } else if (key == "alpha") {
      cfg.alpha = detail::read_number(value, key);
    } else if (key == "a3") {
      cfg.a3 = detail::read_number(value, key);
    } else if (key == "q") {
      cfg.q = detail::read_number(value, key);
    } else if (key == "r") {
      cfg.r = detail::read_number(value, key);
    } else if (key == "phi_I") {
      cfg.phi_I = detail::read_number(value, key);
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }

  validate_config(cfg, require_variant);
  return cfg;
}

/// Reads a config file as raw JSON (no key resolution), so callers can merge
/// overrides before resolving.
inline nlohmann::json load_config_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file '" + path + "'");
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " +
                      std::string(e.what()));
  }
  return j;
}

/// Reads and resolves a JSON config file.
inline SiConfig parse_config_file(const std::string& path,
                                  bool require_variant = true) {
  return resolve_config(load_config_json(path), require_variant);
}

/// Converts the SI configuration into the nondimensional solver inputs.
/// Scale choices: stress by mu_E, time by eta1/mu_E, length by the domain
/// size (1 m for the unit square).  Material range validation happens here
/// via MaterialParams::validate and is reported as a ConfigError.
inline ScenarioConfig nondimensionalize(const SiConfig& cfg,
                                        Scales* scales = nullptr) {
  Scales sc;
  sc.stress_pa = cfg.mu_E;
  sc.time_seconds = cfg.eta1 / cfg.mu_E;
  sc.length_m = 1.0;
  if (scales != nullptr) {
    *scales = sc;
  }

  MaterialParams m = MaterialParams::from_interaction(cfg.chi, cfg.N1, cfg.N2);
  m.fh_scale = cfg.fh_scale / cfg.mu_E;
  m.mu_E = 1.0;
  m.a1 = cfg.a1;
  m.s = cfg.s;
  m.alpha = cfg.alpha;
  m.r = cfg.r;
  m.a3 = cfg.a3;
  m.q = cfg.q;
  m.phi_I = cfg.phi_I;
  m.eta1 = 1.0;
  m.mu1 = cfg.mu1 / cfg.eta1;
  m.eta2 = cfg.eta2 / cfg.eta1;
  m.mu2 = cfg.mu2 / cfg.eta1;
  m.beta = cfg.beta / cfg.eta1;
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  ScenarioConfig run;
  run.material = m;
  run.variant = cfg.variant.empty() ? Variant::InviscidImpermeable
                                    : variant_from_string(cfg.variant);
  run.level = cfg.level;
  run.dt = cfg.dt;
  run.P0 = cfg.P0 / cfg.mu_E;
  run.initial_perturbation = cfg.initial_perturbation;
  return run;
}

/// The resolved configuration as a key-sorted JSON object.  This is what
/// manifests echo and what the content hash covers (minus `out`, so the same
/// physics written to a different directory keeps the same fingerprint).
inline nlohmann::json config_echo(const SiConfig& cfg) {
  nlohmann::json j;
  j["preset"] = cfg.preset;
  j["variant"] = cfg.variant;
  j["level"] = cfg.level;
  j["steps"] = cfg.steps;
  j["dt"] = cfg.dt;
  j["P0"] = cfg.P0;
  j["mu_E"] = cfg.mu_E;
  j["fh_scale"] = cfg.fh_scale;
  j["eta1"] = cfg.eta1;
  j["mu1"] = cfg.mu1;
  j["eta2"] = cfg.eta2;
  j["mu2"] = cfg.mu2;
  j["beta"] = cfg.beta;
  j["chi"] = cfg.chi;
  j["N1"] = cfg.N1;
  j["N2"] = cfg.N2;
  j["a1"] = cfg.a1;
  j["s"] = cfg.s;
  j["alpha"] = cfg.alpha;
  j["a3"] = cfg.a3;
  j["q"] = cfg.q;
  j["r"] = cfg.r;
  j["phi_I"] = cfg.phi_I;
  j["initial_perturbation"] = cfg.initial_perturbation;
  j["out"] = cfg.out;
  return j;
}

/// Deterministic fingerprint of the resolved configuration (excluding the
/// output directory).  nlohmann::json objects are key-sorted, so dump() is a
/// canonical serialization.
inline std::string config_hash(const SiConfig& cfg) {
  nlohmann::json j = config_echo(cfg);
  j.erase("out");
  return detail::sha1_hex(j.dump());
}

}  // namespace gelsim
