#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>

#include "waveplate/geometry.hpp"
#include "waveplate/quadrature.hpp"
#include "waveplate/state.hpp"

namespace waveplate {

// Nonlinearities of the coupled system. The wave source is the power term
// rho_w |u|^{p-1} u; the plate source is h(w) = a w + b |w|^{q-1} w with
// antiderivative H. rho_w = 0 switches the wave equation to its linear
// regime regardless of p, giving an exactly quadratic energy for the
// sharpest integrator checks.
struct SourceSpec {
  double p = 1.0;
  double rho_w = 0.0;
  double a = 0.0;
  double b = 0.0;
  double q = 1.0;

  void validate() const {
    if (!(p >= 1.0) || !(q >= 1.0))
      throw std::invalid_argument("source exponents must satisfy p >= 1, q >= 1");
  }

  bool wave_linear() const { return rho_w == 0.0; }
  bool plate_source_off() const { return a == 0.0 && b == 0.0; }

  // |u|^{p-1} u, sign preserving; rho_w is applied by project_wave_source
  double wave_power(double u) const {
    if (p == 1.0) return u;
    if (p == 3.0) return u * u * u;
    return std::pow(std::abs(u), p - 1.0) * u;
  }

  // |u|^{p+1}/(p+1)
  double wave_potential(double u) const {
    if (p == 3.0) {
      const double u2 = u * u;
      return 0.25 * u2 * u2;
    }
    return std::pow(std::abs(u), p + 1.0) / (p + 1.0);
  }

  double h(double w) const {
    double v = a * w;
    if (b != 0.0) {
      if (q == 1.0)
        v += b * w;
      else if (q == 3.0)
        v += b * w * w * w;
      else
        v += b * std::pow(std::abs(w), q - 1.0) * w;
    }
    return v;
  }

  // antiderivative of h with H(0) = 0
  double H(double w) const {
    double v = 0.5 * a * w * w;
    if (b != 0.0) v += b * std::pow(std::abs(w), q + 1.0) / (q + 1.0);
    return v;
  }
};

struct FieldSample {
  double u = 0.0;
  double ut = 0.0;
  double w = 0.0;
  double wt = 0.0;
};

// Everything the semi-discrete system needs, assembled once and immutable
// afterwards: spectra, Gram matrices, the trace coupling matrix, and cached
// basis values at the tensor quadrature nodes. Safe to share across
// concurrent runs once constructed.
struct GalerkinOperators {
  Domain domain;
  int quad_order = 0;
  std::vector<WaveMode> wave;
  PlateBasis plate;

  Eigen::VectorXd wave_stiffness;  // diagonal of Lambda
  Eigen::MatrixXd plate_mass;      // M, also the damping form
  Eigen::MatrixXd plate_bending;   // K
  Eigen::MatrixXd coupling;        // C(j,n) = (sigma_n, trace e_j) on Gamma
  Eigen::LLT<Eigen::MatrixXd> plate_mass_llt;

  Eigen::MatrixXd omega_nodes;  // [#nodes x dim]
  Eigen::VectorXd omega_w;      // tensor-product weights
  Eigen::MatrixXd wave_nodes;   // [#nodes x n_wave] wave modes at interior nodes
  Eigen::MatrixXd gamma_nodes;  // [#gnodes x (dim-1)]
  Eigen::VectorXd gamma_w;
  Eigen::MatrixXd plate_nodes;  // [#gnodes x n_plate] plate modes at face nodes
  Eigen::MatrixXd trace_nodes;  // [#gnodes x n_wave] wave traces at face nodes

  int n_wave() const { return static_cast<int>(wave.size()); }
  int n_plate() const { return plate.n_modes(); }
};

// Default tensor rule: 2 * (largest 1-D mode index in play) + 8 points per
// axis, doubled when a source exponent exceeds 3 so the aliasing error of the
// collocated nonlinearity stays controlled. The base rule sits in the
// superexponential-convergence zone for every admissible basis.
inline int default_quad_order(const std::vector<WaveMode>& wave_modes, int max_beam_index,
                              double p = 1.0, double q = 1.0) {
  int max_index = max_beam_index;
  for (const auto& mode : wave_modes) {
    max_index = std::max(max_index, mode.k[0]);
    max_index = std::max(max_index, mode.k[1]);
    max_index = std::max(max_index, mode.m);
  }
  int order = 2 * max_index + 8;
  if (p > 3.0 || q > 3.0) order *= 2;
  return order;
}

inline GalerkinOperators assemble(const Domain& domain, int n_wave, int n_plate,
                                  const Quadrature& quad) {
  GalerkinOperators ops;
  ops.domain = domain;
  ops.wave = build_wave_modes(domain, n_wave);
  ops.quad_order = quad.order;

  ops.plate = build_plate_basis(domain, n_plate, quad);
  ops.plate_mass = ops.plate.l2_gram;
  ops.plate_bending = ops.plate.bending_gram;
  ops.plate_mass_llt = Eigen::LLT<Eigen::MatrixXd>(ops.plate_mass);
  if (ops.plate_mass_llt.info() != Eigen::Success)
    throw std::runtime_error("plate mass matrix is not positive definite");

  ops.wave_stiffness.resize(n_wave);
  for (int j = 0; j < n_wave; ++j) ops.wave_stiffness[j] = ops.wave[j].lambda;

  const int dim = domain.dim;
  const int n1 = quad.order;
  const int n_omega = dim == 2 ? n1 * n1 : n1 * n1 * n1;
  const int n_gamma = dim == 2 ? n1 : n1 * n1;

  ops.omega_nodes.resize(n_omega, dim);
  ops.omega_w.resize(n_omega);
  ops.gamma_nodes.resize(n_gamma, dim - 1);
  ops.gamma_w.resize(n_gamma);

  for (int g = 0; g < n_omega; ++g) {
    int rem = g;
    double wgt = 1.0;
    for (int axis = 0; axis < dim; ++axis) {
      const int i = rem % n1;
      rem /= n1;
      ops.omega_nodes(g, axis) = quad.nodes[i];
      wgt *= quad.weights[i];
    }
    ops.omega_w[g] = wgt;
  }
  for (int g = 0; g < n_gamma; ++g) {
    int rem = g;
    double wgt = 1.0;
    for (int axis = 0; axis < dim - 1; ++axis) {
      const int i = rem % n1;
      rem /= n1;
      ops.gamma_nodes(g, axis) = quad.nodes[i];
      wgt *= quad.weights[i];
    }
    ops.gamma_w[g] = wgt;
  }

  ops.wave_nodes.resize(n_omega, n_wave);
  for (int g = 0; g < n_omega; ++g) {
    std::array<double, 3> x{};
    for (int axis = 0; axis < dim; ++axis) x[axis] = ops.omega_nodes(g, axis);
    for (int j = 0; j < n_wave; ++j)
      ops.wave_nodes(g, j) = ops.wave[j].value(std::span<const double>(x.data(), dim));
  }

  const int n_pl = ops.plate.n_modes();
  ops.plate_nodes.resize(n_gamma, n_pl);
  ops.trace_nodes.resize(n_gamma, n_wave);
  for (int g = 0; g < n_gamma; ++g) {
    std::array<double, 2> xg{};
    for (int axis = 0; axis < dim - 1; ++axis) xg[axis] = ops.gamma_nodes(g, axis);
    const std::span<const double> sp(xg.data(), dim - 1);
    for (int i = 0; i < n_pl; ++i) ops.plate_nodes(g, i) = ops.plate.value(i, sp);
    for (int j = 0; j < n_wave; ++j) ops.trace_nodes(g, j) = ops.wave[j].value_trace(sp);
  }

  ops.coupling = ops.trace_nodes.transpose() * ops.gamma_w.asDiagonal() * ops.plate_nodes;

  const Eigen::MatrixXd wave_gram =
      ops.wave_nodes.transpose() * ops.omega_w.asDiagonal() * ops.wave_nodes;
  const double dev =
      (wave_gram - Eigen::MatrixXd::Identity(n_wave, n_wave)).cwiseAbs().maxCoeff();
  if (dev > 1e-6)
    throw std::runtime_error(
        "quadrature order too low for requested wave modes (Gram deviation)");

  return ops;
}

inline GalerkinOperators assemble(const Domain& domain, int n_wave, int n_plate) {
  const int order = default_quad_order(build_wave_modes(domain, n_wave), n_plate);
  return assemble(domain, n_wave, n_plate, Quadrature::gauss_legendre(order));
}

// Modal projection of the wave source, rho_w (|u|^{p-1} u, e_j). This is the
// exact gradient of wave_potential_integral because both use the same nodes
// and weights.
inline Eigen::VectorXd project_wave_source(const GalerkinOperators& ops,
                                           const Eigen::VectorXd& u,
                                           const SourceSpec& spec) {
  if (spec.wave_linear()) return Eigen::VectorXd::Zero(ops.n_wave());
  Eigen::VectorXd at_nodes = ops.wave_nodes * u;
  for (Eigen::Index g = 0; g < at_nodes.size(); ++g)
    at_nodes[g] = spec.wave_power(at_nodes[g]) * ops.omega_w[g];
  return spec.rho_w * (ops.wave_nodes.transpose() * at_nodes);
}

// Modal projection of the plate source, (h(w), sigma_n) on Gamma.
inline Eigen::VectorXd project_plate_source(const GalerkinOperators& ops,
                                            const Eigen::VectorXd& w,
                                            const SourceSpec& spec) {
  if (spec.plate_source_off()) return Eigen::VectorXd::Zero(ops.n_plate());
  Eigen::VectorXd at_nodes = ops.plate_nodes * w;
  for (Eigen::Index g = 0; g < at_nodes.size(); ++g)
    at_nodes[g] = spec.h(at_nodes[g]) * ops.gamma_w[g];
  return ops.plate_nodes.transpose() * at_nodes;
}

// rho_w/(p+1) int |u|^{p+1} dx over the interior
inline double wave_potential_integral(const GalerkinOperators& ops,
                                      const Eigen::VectorXd& u, const SourceSpec& spec) {
  if (spec.wave_linear()) return 0.0;
  const Eigen::VectorXd at_nodes = ops.wave_nodes * u;
  double total = 0.0;
  for (Eigen::Index g = 0; g < at_nodes.size(); ++g)
    total += ops.omega_w[g] * spec.wave_potential(at_nodes[g]);
  return spec.rho_w * total;
}

// int H(w) dGamma over the elastic face
inline double plate_potential_integral(const GalerkinOperators& ops,
                                       const Eigen::VectorXd& w, const SourceSpec& spec) {
  if (spec.plate_source_off()) return 0.0;
  const Eigen::VectorXd at_nodes = ops.plate_nodes * w;
  double total = 0.0;
  for (Eigen::Index g = 0; g < at_nodes.size(); ++g)
    total += ops.gamma_w[g] * spec.H(at_nodes[g]);
  return total;
}

// Pointwise modal sums: u, u_t at an interior point, w, w_t at a face point
// (dim-1 tangential coordinates).
inline FieldSample eval_fields(const GalerkinOperators& ops, const ModalState& state,
                               std::span<const double> x_omega,
                               std::span<const double> x_gamma) {
  if (state.u.size() != ops.n_wave() || state.w.size() != ops.n_plate())
    throw std::invalid_argument("state dimensions do not match operators");
  FieldSample out;
  for (int j = 0; j < ops.n_wave(); ++j) {
    const double e = ops.wave[j].value(x_omega);
    out.u += state.u[j] * e;
    out.ut += state.du[j] * e;
  }
  for (int i = 0; i < ops.n_plate(); ++i) {
    const double s = ops.plate.value(i, x_gamma);
    out.w += state.w[i] * s;
    out.wt += state.dw[i] * s;
  }
  return out;
}

}  // namespace waveplate
