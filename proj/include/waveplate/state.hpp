#pragma once

#include <Eigen/Dense>

namespace waveplate {

// Modal coefficients of the coupled state at one instant: u carries the
// chamber displacement, w the wall displacement, du/dw their velocities.
// All entries stay finite unless a trajectory's blow-up flag is set.
struct ModalState {
  double t = 0.0;
  Eigen::VectorXd u;
  Eigen::VectorXd du;
  Eigen::VectorXd w;
  Eigen::VectorXd dw;

  static ModalState zero(int n_wave, int n_plate) {
    ModalState s;
    s.u = Eigen::VectorXd::Zero(n_wave);
    s.du = Eigen::VectorXd::Zero(n_wave);
    s.w = Eigen::VectorXd::Zero(n_plate);
    s.dw = Eigen::VectorXd::Zero(n_plate);
    return s;
  }
};

}  // namespace waveplate
