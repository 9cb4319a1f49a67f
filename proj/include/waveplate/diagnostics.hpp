#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "waveplate/assembly.hpp"
#include "waveplate/integrator.hpp"

namespace waveplate {

// One row of the energy ledger. The first block is instantaneous; damp_cum,
// work_cum and residual accumulate trapezoid integrals over the sample grid,
// so their accuracy carries an O(sample spacing^2) term on top of the
// integrator's own error.
struct EnergyReport {
  double t = 0.0;
  double ek_wave = 0.0;    // 1/2 ||u_t||^2
  double ep_wave = 0.0;    // 1/2 ||grad u||^2
  double ek_plate = 0.0;   // 1/2 |w_t|^2
  double ep_bend = 0.0;    // 1/2 |Lap w|^2
  double ep_source = 0.0;  // rho_w/(p+1) ||u||_{p+1}^{p+1}
  double e_script = 0.0;   // sum of the five terms above
  double h_int = 0.0;      // int_Gamma H(w)
  double e_total = 0.0;    // e_script - h_int
  double damp_cum = 0.0;   // int_0^t |w_t|^2
  double work_cum = 0.0;   // int_0^t int_Gamma h(w) w_t
  double residual = 0.0;   // e_script + damp_cum - e_script(0) - work_cum
};

inline EnergyReport energy(const GalerkinOperators& ops, const SourceSpec& spec,
                           const ModalState& state) {
  EnergyReport r;
  r.t = state.t;
  r.ek_wave = 0.5 * state.du.squaredNorm();
  r.ep_wave = 0.5 * state.u.dot(ops.wave_stiffness.cwiseProduct(state.u));
  r.ek_plate = 0.5 * state.dw.dot(ops.plate_mass * state.dw);
  r.ep_bend = 0.5 * state.w.dot(ops.plate_bending * state.w);
  r.ep_source = wave_potential_integral(ops, state.u, spec);
  r.e_script = r.ek_wave + r.ep_wave + r.ek_plate + r.ep_bend + r.ep_source;
  r.h_int = plate_potential_integral(ops, state.w, spec);
  r.e_total = r.e_script - r.h_int;
  return r;
}

// Energy ledger for a full trajectory. The damping integrand is w_t' M w_t;
// the work integrand G(w) . w_t equals the Gamma-integral of h(w) w_t exactly
// because both live on the same quadrature nodes.
inline std::vector<EnergyReport> energy_series(const GalerkinOperators& ops,
                                               const SourceSpec& spec,
                                               const Trajectory& traj) {
  std::vector<EnergyReport> rows;
  rows.reserve(traj.samples.size());
  double damp_prev = 0.0, work_prev = 0.0;
  for (std::size_t k = 0; k < traj.samples.size(); ++k) {
    const ModalState& s = traj.samples[k];
    EnergyReport r = energy(ops, spec, s);
    const double damp_now = s.dw.dot(ops.plate_mass * s.dw);
    const double work_now =
        spec.plate_source_off() ? 0.0 : project_plate_source(ops, s.w, spec).dot(s.dw);
    if (k > 0) {
      const double dt = s.t - rows.back().t;
      r.damp_cum = rows.back().damp_cum + 0.5 * dt * (damp_prev + damp_now);
      r.work_cum = rows.back().work_cum + 0.5 * dt * (work_prev + work_now);
    }
    damp_prev = damp_now;
    work_prev = work_now;
    rows.push_back(r);
    rows.back().residual =
        rows.back().e_script + rows.back().damp_cum - rows.front().e_script - rows.back().work_cum;
  }
  return rows;
}

inline std::vector<double> identity_residual(const GalerkinOperators& ops,
                                             const SourceSpec& spec,
                                             const Trajectory& traj) {
  const auto rows = energy_series(ops, spec, traj);
  std::vector<double> r(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) r[k] = rows[k].residual;
  return r;
}

inline double max_abs_residual(const std::vector<EnergyReport>& rows) {
  double m = 0.0;
  for (const auto& r : rows) m = std::max(m, std::abs(r.residual));
  return m;
}

// (E0 + C t) e^{C t}, the closed-form envelope the q = 1 regime must obey
inline double gronwall_bound(double e0, double c, double t) {
  return (e0 + c * t) * std::exp(c * t);
}

// Smallest C >= 0 with E(t_k) <= E(0) + C (t_k + int_0^{t_k} E) at every
// sample; 0 when the energy never exceeds its initial value.
inline double fit_gronwall_constant(const std::vector<EnergyReport>& rows) {
  double c = 0.0;
  double integral = 0.0;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    integral += 0.5 * (rows[k].t - rows[k - 1].t) * (rows[k].e_script + rows[k - 1].e_script);
    const double excess = rows[k].e_script - rows[0].e_script;
    if (excess > 0.0) c = std::max(c, excess / (rows[k].t + integral));
  }
  return c;
}

// Check E(t) <= (E(0) + C t_final) e^{C t_final}-style bound pointwise:
// the envelope uses the run's own horizon T in the exponent, as the global
// existence bound does. A relative slack absorbs roundoff at equality.
inline bool check_gronwall(const std::vector<EnergyReport>& rows, double c, double T,
                           double slack = 1e-9) {
  for (const auto& r : rows) {
    const double bound = gronwall_bound(rows.front().e_script, c, T);
    if (r.e_script > bound * (1.0 + slack)) return false;
  }
  return true;
}

constexpr double kInfiniteBlowup = std::numeric_limits<double>::infinity();

// Blow-up time of the majorant z(t) = (C^{1-q} - C1 (q-1) t)^{-1/(q-1)}
inline double volterra_blowup_time(double c, double c1, double q) {
  if (!(q > 1.0)) throw std::invalid_argument("volterra majorant requires q > 1");
  if (!(c > 0.0) || !(c1 > 0.0)) return kInfiniteBlowup;
  return std::pow(c, 1.0 - q) / (c1 * (q - 1.0));
}

// z(t) solving z = C + C1 int_0^t z^q; returns +infinity at or beyond the
// majorant's own blow-up time rather than throwing.
inline double volterra_majorant(double c, double c1, double q, double t) {
  if (!(q > 1.0)) throw std::invalid_argument("volterra majorant requires q > 1");
  const double denom = std::pow(c, 1.0 - q) - c1 * (q - 1.0) * t;
  if (denom <= 0.0) return kInfiniteBlowup;
  return std::pow(denom, -1.0 / (q - 1.0));
}

// Fit of y(t) <= C + C1 int_0^t y^q on the sampled series y = 1 + E_script:
// C is pinned to y(0) and C1 is the smallest constant validating the
// inequality at every sample (floored at a tiny positive value so the
// majorant is defined even for decaying runs).
struct VolterraFit {
  double c = 0.0;
  double c1 = 0.0;
};

inline VolterraFit fit_volterra_constants(const std::vector<EnergyReport>& rows,
                                          double q) {
  if (rows.empty()) throw std::invalid_argument("empty energy series");
  VolterraFit fit;
  fit.c = 1.0 + rows.front().e_script;
  fit.c1 = 1e-12;
  double integral = 0.0;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const double ya = 1.0 + rows[k - 1].e_script;
    const double yb = 1.0 + rows[k].e_script;
    integral += 0.5 * (rows[k].t - rows[k - 1].t) *
                (std::pow(ya, q) + std::pow(yb, q));
    const double excess = yb - fit.c;
    if (excess > 0.0 && integral > 0.0) fit.c1 = std::max(fit.c1, excess / integral);
  }
  return fit;
}

// Majorant-domination check, discrete analogue of y_N <= z <= C0: every
// sample with t <= horizon_fraction * (majorant blow-up time) must satisfy
// 1 + E_script <= z(t) (times a slack). The fit holds with equality at one
// sample, where z can undershoot the series by the trapezoid-vs-exact
// integration gap, an O(sample spacing^2) effect; the default slack absorbs
// that, not just roundoff.
inline bool check_majorant_domination(const std::vector<EnergyReport>& rows,
                                      const VolterraFit& fit, double q,
                                      double horizon_fraction = 0.9,
                                      double slack = 1e-6) {
  const double t_star = volterra_blowup_time(fit.c, fit.c1, q);
  const double horizon =
      std::isfinite(t_star) ? horizon_fraction * t_star : kInfiniteBlowup;
  for (const auto& r : rows) {
    if (r.t > horizon) break;
    const double z = volterra_majorant(fit.c, fit.c1, q, r.t);
    if (!(1.0 + r.e_script <= z * (1.0 + slack))) return false;
  }
  return true;
}

struct BlowupEstimate {
  double t1 = 0.0;      // majorant blow-up time for data level E0 + C T
  double t_prime = 0.0; // min(T, t1/2), the certified local horizon
};

inline BlowupEstimate blowup_time_estimate(double e0, double c, double T, double q) {
  if (!(q > 1.0) || !(c > 0.0))
    throw std::invalid_argument("blow-up estimate requires q > 1 and C > 0");
  BlowupEstimate est;
  est.t1 = std::pow(e0 + c * T, 1.0 - q) / (c * (q - 1.0));
  est.t_prime = std::min(T, 0.5 * est.t1);
  return est;
}

enum class WeakForm { wave, plate };

// Residual of the variational identity for one time-independent modal test
// function, evaluated at the final sample; all time integrals by trapezoid.
// The evaluation operators may be finer than the ones that produced the
// trajectory (their mode lists must extend the producing ones, which the
// deterministic nested ordering guarantees); coefficients are zero-padded,
// so test indices beyond the producing truncation measure the truncation
// residual of the run.
inline Eigen::VectorXd weak_form_residuals(const GalerkinOperators& eval_ops,
                                           const SourceSpec& spec,
                                           const Trajectory& traj, WeakForm which) {
  if (traj.samples.size() < 2)
    throw std::invalid_argument("weak-form residual needs at least two samples");
  const int nw = eval_ops.n_wave();
  const int np = eval_ops.n_plate();
  const int nw_run = static_cast<int>(traj.samples.front().u.size());
  const int np_run = static_cast<int>(traj.samples.front().w.size());
  if (nw_run > nw || np_run > np)
    throw std::invalid_argument("evaluation basis must be at least as fine as the run basis");

  auto pad = [](const Eigen::VectorXd& v, int n) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    out.head(v.size()) = v;
    return out;
  };

  // trapezoid accumulators over the whole trajectory
  Eigen::VectorXd int_u = Eigen::VectorXd::Zero(nw);       // int u
  Eigen::VectorXd int_dw = Eigen::VectorXd::Zero(np);      // int w_t
  Eigen::VectorXd int_F = Eigen::VectorXd::Zero(nw);       // int F(u)
  Eigen::VectorXd int_w = Eigen::VectorXd::Zero(np);       // int w
  Eigen::VectorXd int_G = Eigen::VectorXd::Zero(np);       // int G(w)

  Eigen::VectorXd prev_u, prev_dw, prev_F, prev_w, prev_G;
  double prev_t = 0.0;
  for (std::size_t k = 0; k < traj.samples.size(); ++k) {
    const ModalState& s = traj.samples[k];
    const Eigen::VectorXd u = pad(s.u, nw);
    const Eigen::VectorXd w = pad(s.w, np);
    const Eigen::VectorXd dw = pad(s.dw, np);
    const Eigen::VectorXd F = project_wave_source(eval_ops, u, spec);
    const Eigen::VectorXd G = project_plate_source(eval_ops, w, spec);
    if (k > 0) {
      const double half = 0.5 * (s.t - prev_t);
      int_u += half * (prev_u + u);
      int_dw += half * (prev_dw + dw);
      int_F += half * (prev_F + F);
      int_w += half * (prev_w + w);
      int_G += half * (prev_G + G);
    }
    prev_u = u;
    prev_dw = dw;
    prev_F = F;
    prev_w = w;
    prev_G = G;
    prev_t = s.t;
  }

  const ModalState& first = traj.samples.front();
  const ModalState& last = traj.samples.back();
  if (which == WeakForm::wave) {
    Eigen::VectorXd r = pad(last.du, nw) - pad(first.du, nw);
    r += eval_ops.wave_stiffness.cwiseProduct(int_u);
    r.noalias() -= eval_ops.coupling * int_dw;
    r += int_F;
    return r;
  }
  Eigen::VectorXd r =
      eval_ops.plate_mass * (pad(last.dw, np) - pad(first.dw, np));
  r.noalias() += eval_ops.coupling.transpose() * (pad(last.u, nw) - pad(first.u, nw));
  r.noalias() += eval_ops.plate_bending * int_w;
  r.noalias() += eval_ops.plate_mass * int_dw;
  r -= int_G;
  return r;
}

inline double weak_form_residual(const GalerkinOperators& eval_ops,
                                 const SourceSpec& spec, const Trajectory& traj,
                                 int test_index, WeakForm which) {
  const Eigen::VectorXd r = weak_form_residuals(eval_ops, spec, traj, which);
  if (test_index < 0 || test_index >= r.size())
    throw std::invalid_argument("test index out of range of the evaluation basis");
  return r[test_index];
}

// Quadratic energy of the difference state on a shared sampling grid
inline std::vector<double> perturbation_energy(const GalerkinOperators& ops,
                                               const Trajectory& traj_a,
                                               const Trajectory& traj_b) {
  if (traj_a.samples.size() != traj_b.samples.size())
    throw std::invalid_argument("perturbation energy requires matching sample counts");
  std::vector<double> e(traj_a.samples.size());
  for (std::size_t k = 0; k < traj_a.samples.size(); ++k) {
    const ModalState& a = traj_a.samples[k];
    const ModalState& b = traj_b.samples[k];
    if (std::abs(a.t - b.t) > 1e-12 * (1.0 + std::abs(a.t)))
      throw std::invalid_argument("perturbation energy requires a shared time grid");
    const Eigen::VectorXd du = a.u - b.u;
    const Eigen::VectorXd ddu = a.du - b.du;
    const Eigen::VectorXd dw = a.w - b.w;
    const Eigen::VectorXd ddw = a.dw - b.dw;
    e[k] = 0.5 * (ddu.squaredNorm() + du.dot(ops.wave_stiffness.cwiseProduct(du)) +
                  ddw.dot(ops.plate_mass * ddw) + dw.dot(ops.plate_bending * dw));
  }
  return e;
}

// Smallest C_R >= 0 with E~(t_k) <= E~(0) e^{C_R t_k} at every sample
inline double fit_exponential_rate(const std::vector<double>& e,
                                   const std::vector<double>& t) {
  if (e.size() != t.size() || e.empty())
    throw std::invalid_argument("rate fit requires matching nonempty series");
  if (!(e.front() > 0.0)) return 0.0;
  double rate = 0.0;
  for (std::size_t k = 1; k < e.size(); ++k) {
    if (t[k] <= 0.0) continue;
    if (e[k] > e.front()) rate = std::max(rate, std::log(e[k] / e.front()) / t[k]);
  }
  return rate;
}

}  // namespace waveplate
