#pragma once

#include "pdhyp/system.hpp"

#include "json.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace pdhyp {

// Config file layout (JSON object, every section optional):
//   "seed": integer
//   "system": {"name": "damped_euler" | "toy_2x2", "d", "gamma", "cv", "rho_star",
//              "S_star", "damping", "mass_source", "undamped"}
//   "check": {"radius", "samples", "directions", "arc", "arc_steps", "analytic",
//             "isotropy_family", "compensator_directions", "compensator_variant",
//             "norm_bound"}
//   "coords": {"samples", "radius", "verify"}
//   "lindecay": {"p", "alpha", "component", "tmin", "tmax", "samples", "width"}
//   "simulate": the SimConfig object
// Flags given on the command line overwrite the matching keys.
nlohmann::json default_config();
// Fills absent keys from default_config() and rejects unknown ones.
nlohmann::json resolve_config(const nlohmann::json& file);

SystemSpec system_from_config(const nlohmann::json& section);

std::uint64_t fnv1a64(const std::string& bytes);

struct RunManifest {
  std::string subcommand;
  std::string config_hash;  // FNV-1a 64 of the resolved config dump, hex
  std::uint64_t seed = 0;
  std::map<std::string, std::string> versions;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  double wall_clock = 0.0;  // seconds
};

nlohmann::json to_json(const RunManifest& m);
RunManifest run_manifest_from_json(const nlohmann::json& j);

struct ReportInputs {
  std::string structure;
  std::string compensator;
  std::string linear;
  std::string nonlinear;
};

// Throws ConfigError listing every input file that does not exist.
std::string render_report(const ReportInputs& in);

// Arguments exclude the program name. Exit codes: 0 success, 1 module
// failure or failed checks, 2 usage error.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pdhyp
