#pragma once

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "waveplate/assembly.hpp"
#include "waveplate/diagnostics.hpp"
#include "waveplate/integrator.hpp"

namespace waveplate {

struct PropertyResult {
  std::string name;
  bool pass = false;
  double value = 0.0;      // measured quantity
  double threshold = 0.0;  // the limit it was compared against
};

// Machine-readable outcome of one scenario. Every asserted property appears
// exactly once; `pass` is the conjunction of all property passes.
struct RunSummary {
  std::string scenario;
  bool pass = true;
  std::vector<PropertyResult> properties;
  std::map<std::string, double> constants;
  double halt_time = 0.0;
  double max_residual = 0.0;
  double wall_ms = 0.0;

  void add(const std::string& name, bool ok, double value, double threshold) {
    properties.push_back({name, ok, value, threshold});
    pass = pass && ok;
  }
};

inline void to_json(nlohmann::json& j, const PropertyResult& p) {
  j = nlohmann::json{
      {"name", p.name}, {"pass", p.pass}, {"value", p.value}, {"threshold", p.threshold}};
}

inline void from_json(const nlohmann::json& j, PropertyResult& p) {
  j.at("name").get_to(p.name);
  j.at("pass").get_to(p.pass);
  j.at("value").get_to(p.value);
  j.at("threshold").get_to(p.threshold);
}

inline void to_json(nlohmann::json& j, const RunSummary& s) {
  j = nlohmann::json{{"scenario", s.scenario},       {"pass", s.pass},
                     {"properties", s.properties},   {"constants", s.constants},
                     {"halt_time", s.halt_time},     {"max_residual", s.max_residual},
                     {"wall_ms", s.wall_ms}};
}

inline void from_json(const nlohmann::json& j, RunSummary& s) {
  j.at("scenario").get_to(s.scenario);
  j.at("pass").get_to(s.pass);
  j.at("properties").get_to(s.properties);
  j.at("constants").get_to(s.constants);
  j.at("halt_time").get_to(s.halt_time);
  j.at("max_residual").get_to(s.max_residual);
  j.at("wall_ms").get_to(s.wall_ms);
}

inline void write_summary_json(const std::filesystem::path& path, const RunSummary& s) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << nlohmann::json(s).dump(2) << "\n";
}

inline RunSummary read_summary_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  nlohmann::json j;
  in >> j;
  return j.get<RunSummary>();
}

namespace detail {
// shortest representation that parses back to the same double
inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace detail

// Columns: t, then wave displacement, wave velocity, plate displacement,
// plate velocity coefficient blocks.
inline void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  if (traj.samples.empty()) throw std::invalid_argument("empty trajectory");
  const int nw = static_cast<int>(traj.samples.front().u.size());
  const int np = static_cast<int>(traj.samples.front().w.size());
  out << "t";
  for (int j = 1; j <= nw; ++j) out << ",u" << j;
  for (int j = 1; j <= nw; ++j) out << ",du" << j;
  for (int i = 1; i <= np; ++i) out << ",w" << i;
  for (int i = 1; i <= np; ++i) out << ",dw" << i;
  out << "\n";
  for (const auto& s : traj.samples) {
    out << detail::fmt(s.t);
    for (int j = 0; j < nw; ++j) out << "," << detail::fmt(s.u[j]);
    for (int j = 0; j < nw; ++j) out << "," << detail::fmt(s.du[j]);
    for (int i = 0; i < np; ++i) out << "," << detail::fmt(s.w[i]);
    for (int i = 0; i < np; ++i) out << "," << detail::fmt(s.dw[i]);
    out << "\n";
  }
}

// Fixed column order; consumers rely on it.
inline void write_energy_csv(const std::filesystem::path& path,
                             const std::vector<EnergyReport>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "t,Ek_wave,Ep_wave,Ek_plate,Ep_bend,Ep_source,E_script,H_int,E_total,"
         "damp_cum,work_cum,residual\n";
  for (const auto& r : rows) {
    out << detail::fmt(r.t) << "," << detail::fmt(r.ek_wave) << ","
        << detail::fmt(r.ep_wave) << "," << detail::fmt(r.ek_plate) << ","
        << detail::fmt(r.ep_bend) << "," << detail::fmt(r.ep_source) << ","
        << detail::fmt(r.e_script) << "," << detail::fmt(r.h_int) << ","
        << detail::fmt(r.e_total) << "," << detail::fmt(r.damp_cum) << ","
        << detail::fmt(r.work_cum) << "," << detail::fmt(r.residual) << "\n";
  }
}

inline void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ",";
      out << detail::fmt(m(i, j));
    }
    out << "\n";
  }
}

// One row per mode of both families: integer index triple (unused slots 0),
// the operator eigenvalue (Rayleigh quotient for tensor plate modes), and the
// normalization factor applied to the raw shape.
inline void write_basis_csv(const std::filesystem::path& path, const GalerkinOperators& ops) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "family,i1,i2,i3,eigenvalue,normalization\n";
  for (const auto& mode : ops.wave) {
    out << "wave," << mode.k[0] << "," << (ops.domain.dim == 3 ? mode.k[1] : 0) << ","
        << mode.m << "," << detail::fmt(mode.lambda) << ","
        << detail::fmt(mode.amplitude) << "\n";
  }
  for (int i = 0; i < ops.n_plate(); ++i) {
    const auto& id = ops.plate.modes[i];
    const double rayleigh = ops.plate_bending(i, i) / ops.plate_mass(i, i);
    double norm = ops.plate.beams[id[0] - 1].scale;
    if (ops.domain.dim == 3) norm *= ops.plate.beams[id[1] - 1].scale;
    out << "plate," << id[0] << "," << id[1] << ",0," << detail::fmt(rayleigh) << ","
        << detail::fmt(norm) << "\n";
  }
}

}  // namespace waveplate
