#pragma once

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "fastslow/thermo.hpp"

namespace fastslow::cli {

inline constexpr const char* kVersion = "0.1.0";

// Reproducibility record written next to every output file.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  std::string model_name;
  std::string model_source;
  std::vector<double> eps;
  std::vector<std::pair<std::string, double>> dt;
  double T = 0.0;
  std::vector<std::string> outputs;
};

nlohmann::json to_json(const RunManifest& m);

// "<output>.manifest.json"
std::string manifest_path(const std::string& output);
void write_manifest(const std::string& output, const RunManifest& m);

// Header "t,<labels>", values at 17 significant digits.
std::string format_csv(const Trajectory& traj);
void write_csv(const std::string& path, const Trajectory& traj);
Trajectory read_csv(const std::string& path);
Trajectory parse_csv(const std::string& text);

void write_text(const std::string& path, const std::string& text);

// Columns of a thermodynamic series; fields unset in the first record are dropped.
Trajectory thermo_table(const std::vector<ThermoRecord>& records);

}  // namespace fastslow::cli
