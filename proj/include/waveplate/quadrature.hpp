#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace waveplate {

// Gauss-Legendre rule mapped to (0,1). Nodes and weights come from the
// Golub-Welsch eigenproblem of the Jacobi matrix, so they are accurate to
// machine precision for any order accepted here. Weights are positive and
// sum to 1; the rule is exact for polynomials of degree <= 2*order-1.
struct Quadrature {
  int order = 0;
  Eigen::VectorXd nodes;    // ascending, strictly inside (0,1)
  Eigen::VectorXd weights;

  static Quadrature gauss_legendre(int order) {
    if (order < 1 || order > 256)
      throw std::invalid_argument("quadrature order must lie in [1,256]");
    Quadrature q;
    q.order = order;
    q.nodes.resize(order);
    q.weights.resize(order);
    if (order == 1) {
      q.nodes[0] = 0.5;
      q.weights[0] = 1.0;
      return q;
    }
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(order, order);
    for (int k = 1; k < order; ++k) {
      const double off = k / std::sqrt(4.0 * k * k - 1.0);
      jacobi(k, k - 1) = off;
      jacobi(k - 1, k) = off;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
    for (int i = 0; i < order; ++i) {
      q.nodes[i] = 0.5 * (es.eigenvalues()[i] + 1.0);
      const double v0 = es.eigenvectors()(0, i);
      // weight on [-1,1] is 2*v0^2; the affine map to (0,1) halves it
      q.weights[i] = v0 * v0;
    }
    return q;
  }
};

}  // namespace waveplate
