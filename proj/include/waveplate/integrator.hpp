#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "waveplate/assembly.hpp"
#include "waveplate/state.hpp"

namespace waveplate {

enum class Scheme { rk4, implicit_midpoint };

// Sampled trajectory at a fixed stride. halt_time equals the requested final
// time unless the run tripped the blow-up detector, in which case it records
// the first step whose state crossed the threshold (the empirical finite
// existence horizon for this truncation).
struct Trajectory {
  std::vector<ModalState> samples;
  double dt = 0.0;
  int stride = 1;
  Scheme scheme = Scheme::rk4;
  bool blew_up = false;
  double halt_time = 0.0;
  int max_midpoint_iterations = 0;
};

struct IntegrateOptions {
  Scheme scheme = Scheme::rk4;
  int stride = 1;
  double blowup_threshold = 1e8;
  double midpoint_tol = 1e-12;
  int midpoint_max_iter = 50;
};

// Time derivative of the modal state:
//   u'' = -Lambda u + C dw - F(u)
//   M w'' = -K w - M dw - C^T du + G(w)
// The coupling enters the two equations with opposite sign through the same
// matrix, so it contributes no net power to the assembled energy.
inline ModalState rhs(const GalerkinOperators& ops, const SourceSpec& spec,
                      const ModalState& state) {
  ModalState d;
  d.t = state.t;
  d.u = state.du;
  d.w = state.dw;
  d.du = -(ops.wave_stiffness.cwiseProduct(state.u));
  d.du.noalias() += ops.coupling * state.dw;
  if (!spec.wave_linear()) d.du -= project_wave_source(ops, state.u, spec);
  Eigen::VectorXd rhs_w = -(ops.plate_bending * state.w);
  rhs_w.noalias() -= ops.plate_mass * state.dw;
  rhs_w.noalias() -= ops.coupling.transpose() * state.du;
  if (!spec.plate_source_off()) rhs_w += project_plate_source(ops, state.w, spec);
  d.dw = ops.plate_mass_llt.solve(rhs_w);
  return d;
}

namespace detail {

inline void axpy(ModalState& y, double c, const ModalState& x) {
  y.u += c * x.u;
  y.du += c * x.du;
  y.w += c * x.w;
  y.dw += c * x.dw;
}

inline double max_abs_diff(const ModalState& a, const ModalState& b) {
  double m = (a.u - b.u).cwiseAbs().maxCoeff();
  m = std::max(m, (a.du - b.du).cwiseAbs().maxCoeff());
  m = std::max(m, (a.w - b.w).cwiseAbs().maxCoeff());
  m = std::max(m, (a.dw - b.dw).cwiseAbs().maxCoeff());
  return m;
}

inline double max_abs(const ModalState& s) {
  double m = 0.0;
  if (s.u.size()) m = std::max(m, s.u.cwiseAbs().maxCoeff());
  if (s.du.size()) m = std::max(m, s.du.cwiseAbs().maxCoeff());
  if (s.w.size()) m = std::max(m, s.w.cwiseAbs().maxCoeff());
  if (s.dw.size()) m = std::max(m, s.dw.cwiseAbs().maxCoeff());
  return m;
}

inline bool all_finite(const ModalState& s) {
  return s.u.allFinite() && s.du.allFinite() && s.w.allFinite() && s.dw.allFinite();
}

}  // namespace detail

inline ModalState step_rk4(const GalerkinOperators& ops, const SourceSpec& spec,
                           const ModalState& state, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  const ModalState k1 = rhs(ops, spec, state);
  ModalState mid = state;
  detail::axpy(mid, 0.5 * dt, k1);
  const ModalState k2 = rhs(ops, spec, mid);
  mid = state;
  detail::axpy(mid, 0.5 * dt, k2);
  const ModalState k3 = rhs(ops, spec, mid);
  mid = state;
  detail::axpy(mid, dt, k3);
  const ModalState k4 = rhs(ops, spec, mid);

  ModalState next = state;
  next.t = state.t + dt;
  detail::axpy(next, dt / 6.0, k1);
  detail::axpy(next, dt / 3.0, k2);
  detail::axpy(next, dt / 3.0, k3);
  detail::axpy(next, dt / 6.0, k4);
  return next;
}

struct MidpointResult {
  ModalState state;
  int iterations = 0;
};

// One implicit-midpoint step solved by fixed-point iteration. The iteration
// contracts only while dt/2 * sqrt(largest stiffness eigenvalue) < 1; beyond
// that the solver stalls and the failure is reported instead of silently
// returning a bad state.
inline MidpointResult step_implicit_midpoint(const GalerkinOperators& ops,
                                             const SourceSpec& spec,
                                             const ModalState& state, double dt,
                                             double tol = 1e-12, int max_iter = 50) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (!(tol > 0.0)) throw std::invalid_argument("midpoint tolerance must be positive");
  ModalState next = state;  // predictor: explicit Euler
  detail::axpy(next, dt, rhs(ops, spec, state));
  next.t = state.t + dt;
  for (int it = 1; it <= max_iter; ++it) {
    ModalState midpoint = state;
    midpoint.u = 0.5 * (state.u + next.u);
    midpoint.du = 0.5 * (state.du + next.du);
    midpoint.w = 0.5 * (state.w + next.w);
    midpoint.dw = 0.5 * (state.dw + next.dw);
    midpoint.t = state.t + 0.5 * dt;
    ModalState proposal = state;
    detail::axpy(proposal, dt, rhs(ops, spec, midpoint));
    proposal.t = state.t + dt;
    const double delta = detail::max_abs_diff(proposal, next);
    next = proposal;
    if (delta <= tol) return {next, it};
    if (!detail::all_finite(next)) break;
  }
  throw std::runtime_error(
      "implicit midpoint fixed-point iteration did not converge; dt too large "
      "for the stiffest retained mode");
}

// March from `initial` to time T sampling every `stride` steps (the initial
// state and the final state are always sampled). The last step is shortened
// so the final sample lands on T exactly. Any coefficient magnitude above
// the threshold, or any non-finite value, halts the run with the blow-up
// flag; the offending state is kept as the last sample only when finite.
inline Trajectory integrate(const GalerkinOperators& ops, const SourceSpec& spec,
                            const ModalState& initial, double T, double dt,
                            const IntegrateOptions& opts = {}) {
  if (!(T > 0.0) || !(dt > 0.0)) throw std::invalid_argument("T and dt must be positive");
  if (opts.stride < 1) throw std::invalid_argument("stride must be >= 1");
  if (initial.u.size() != ops.n_wave() || initial.w.size() != ops.n_plate())
    throw std::invalid_argument("initial state dimensions do not match operators");

  Trajectory traj;
  traj.dt = dt;
  traj.stride = opts.stride;
  traj.scheme = opts.scheme;
  traj.halt_time = T;

  ModalState state = initial;
  state.t = 0.0;
  traj.samples.push_back(state);

  const double t_end = T;
  long step = 0;
  while (state.t < t_end - 1e-12 * t_end) {
    const double h = std::min(dt, t_end - state.t);
    if (opts.scheme == Scheme::rk4) {
      state = step_rk4(ops, spec, state, h);
    } else {
      auto result = step_implicit_midpoint(ops, spec, state, h, opts.midpoint_tol,
                                           opts.midpoint_max_iter);
      state = std::move(result.state);
      traj.max_midpoint_iterations =
          std::max(traj.max_midpoint_iterations, result.iterations);
    }
    ++step;

    const bool finite = detail::all_finite(state);
    if (!finite || detail::max_abs(state) > opts.blowup_threshold) {
      traj.blew_up = true;
      traj.halt_time = state.t;
      if (finite) traj.samples.push_back(state);
      return traj;
    }
    const bool is_final = state.t >= t_end - 1e-12 * t_end;
    if (step % opts.stride == 0 || is_final) traj.samples.push_back(state);
  }
  return traj;
}

// L2-orthogonal projection of initial fields onto the truncated bases; the
// plate block solves with the mass matrix, which matters in dim 3 where the
// tensor modes are only orthonormal to quadrature accuracy.
inline ModalState project_initial_data(
    const GalerkinOperators& ops,
    const std::function<double(std::span<const double>)>& u0_fn,
    const std::function<double(std::span<const double>)>& u1_fn,
    const std::function<double(std::span<const double>)>& w0_fn,
    const std::function<double(std::span<const double>)>& w1_fn) {
  const int dim = ops.domain.dim;
  ModalState s = ModalState::zero(ops.n_wave(), ops.n_plate());

  Eigen::VectorXd f0(ops.omega_nodes.rows()), f1(ops.omega_nodes.rows());
  for (Eigen::Index g = 0; g < ops.omega_nodes.rows(); ++g) {
    std::array<double, 3> x{};
    for (int axis = 0; axis < dim; ++axis) x[axis] = ops.omega_nodes(g, axis);
    const std::span<const double> sp(x.data(), dim);
    const double wgt = ops.omega_w[g];
    f0[g] = wgt * u0_fn(sp);
    f1[g] = wgt * u1_fn(sp);
  }
  s.u = ops.wave_nodes.transpose() * f0;
  s.du = ops.wave_nodes.transpose() * f1;

  Eigen::VectorXd g0(ops.gamma_nodes.rows()), g1(ops.gamma_nodes.rows());
  for (Eigen::Index g = 0; g < ops.gamma_nodes.rows(); ++g) {
    std::array<double, 2> x{};
    for (int axis = 0; axis < dim - 1; ++axis) x[axis] = ops.gamma_nodes(g, axis);
    const std::span<const double> sp(x.data(), dim - 1);
    const double wgt = ops.gamma_w[g];
    g0[g] = wgt * w0_fn(sp);
    g1[g] = wgt * w1_fn(sp);
  }
  s.w = ops.plate_mass_llt.solve(ops.plate_nodes.transpose() * g0);
  s.dw = ops.plate_mass_llt.solve(ops.plate_nodes.transpose() * g1);
  return s;
}

}  // namespace waveplate
