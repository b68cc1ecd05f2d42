#include "cli_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace fastslow::cli {

nlohmann::json to_json(const RunManifest& m) {
  nlohmann::json dt = nlohmann::json::object();
  for (const auto& [name, value] : m.dt) dt[name] = value;
  return {{"command", m.command},
          {"argv", m.argv},
          {"model", {{"name", m.model_name}, {"source", m.model_source}}},
          {"eps", m.eps},
          {"dt", dt},
          {"T", m.T},
          {"determinism", "no random numbers are drawn; identical flags reproduce identical outputs "
                          "(bench wall times excepted)"},
          {"outputs", m.outputs},
          {"version", kVersion}};
}

std::string manifest_path(const std::string& output) { return output + ".manifest.json"; }

void write_manifest(const std::string& output, const RunManifest& m) {
  write_text(manifest_path(output), to_json(m).dump(2) + "\n");
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::InvalidArgument, "cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw Error(ErrorKind::InvalidArgument, "write to '" + path + "' failed");
}

std::string format_csv(const Trajectory& traj) {
  std::string out = "t";
  for (const auto& l : traj.labels) out += "," + l;
  out += "\n";
  char buf[32];
  for (Eigen::Index k = 0; k < traj.rows(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", traj.times[k]);
    out += buf;
    for (Eigen::Index c = 0; c < traj.states.cols(); ++c) {
      std::snprintf(buf, sizeof buf, ",%.17g", traj.states(k, c));
      out += buf;
    }
    out += "\n";
  }
  return out;
}

void write_csv(const std::string& path, const Trajectory& traj) { write_text(path, format_csv(traj)); }

Trajectory parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::InvalidArgument, "empty CSV");
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
      while (!cell.empty() && cell.front() == ' ') cell.erase(0, 1);
      cells.push_back(cell);
    }
    return cells;
  };
  const auto header = split(line);
  if (header.empty() || header[0] != "t") throw Error(ErrorKind::InvalidArgument, "CSV header must start with 't'");
  Trajectory traj;
  traj.labels.assign(header.begin() + 1, header.end());
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line);
    if (cells.size() != header.size())
      throw Error(ErrorKind::DimensionMismatch, "CSV row " + std::to_string(rows.size() + 1) + " has " +
                                                    std::to_string(cells.size()) + " cells, header has " +
                                                    std::to_string(header.size()));
    std::vector<double> row;
    for (const auto& c : cells) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(c, &used));
        if (used != c.size()) throw std::invalid_argument(c);
      } catch (const std::exception&) {
        throw Error(ErrorKind::InvalidArgument, "CSV cell '" + c + "' is not a number");
      }
    }
    rows.push_back(std::move(row));
  }
  traj.states.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(traj.labels.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    traj.times.push_back(rows[k][0]);
    for (std::size_t c = 1; c < rows[k].size(); ++c) traj.states(k, c - 1) = rows[k][c];
  }
  return traj;
}

Trajectory read_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::InvalidArgument, "cannot open '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_csv(ss.str());
}

Trajectory thermo_table(const std::vector<ThermoRecord>& records) {
  Trajectory out;
  if (records.empty()) return out;
  using Scalar = double ThermoRecord::*;
  using Vector = VectorXd ThermoRecord::*;
  const std::vector<std::pair<const char*, Scalar>> scalars = {
      {"E_perp", &ThermoRecord::E_perp}, {"E_par", &ThermoRecord::E_par},
      {"T_eps", &ThermoRecord::T_eps},   {"S_eps", &ThermoRecord::S_eps},
      {"Gamma_eps", &ThermoRecord::Gamma_eps}, {"log_Gamma_eps", &ThermoRecord::log_Gamma_eps},
      {"T0", &ThermoRecord::T0},         {"S0", &ThermoRecord::S0},
      {"E0_perp", &ThermoRecord::E0_perp}, {"E0_perp_from_entropy", &ThermoRecord::E0_perp_from_entropy},
      {"Ebar2_perp", &ThermoRecord::Ebar2_perp}, {"Ebar2_par", &ThermoRecord::Ebar2_par},
      {"Sbar2", &ThermoRecord::Sbar2}};
  const std::vector<std::pair<const char*, Vector>> vectors = {{"F_eps", &ThermoRecord::F_eps},
                                                               {"F0", &ThermoRecord::F0}};
  const ThermoRecord& first = records.front();
  std::vector<Scalar> used_s;
  std::vector<std::pair<Vector, Eigen::Index>> used_v;
  for (const auto& [name, field] : scalars)
    if (!std::isnan(first.*field)) used_s.push_back(field), out.labels.push_back(name);
  for (const auto& [name, field] : vectors) {
    const Eigen::Index len = (first.*field).size();
    if (len == 0) continue;
    used_v.emplace_back(field, len);
    for (Eigen::Index j = 0; j < len; ++j) out.labels.push_back(std::string(name) + "_" + std::to_string(j + 1));
  }
  out.states.resize(static_cast<Eigen::Index>(records.size()), static_cast<Eigen::Index>(out.labels.size()));
  for (std::size_t k = 0; k < records.size(); ++k) {
    const ThermoRecord& r = records[k];
    out.times.push_back(r.t);
    Eigen::Index c = 0;
    for (Scalar f : used_s) out.states(k, c++) = r.*f;
    for (const auto& [f, len] : used_v) {
      if ((r.*f).size() != len) throw Error(ErrorKind::DimensionMismatch, "thermo record vector length changed");
      for (Eigen::Index j = 0; j < len; ++j) out.states(k, c++) = (r.*f)(j);
    }
  }
  return out;
}

}  // namespace fastslow::cli
