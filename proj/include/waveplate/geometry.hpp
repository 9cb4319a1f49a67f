#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "waveplate/quadrature.hpp"

namespace waveplate {

// The chamber is the open unit box (0,1)^dim. The elastic wall Gamma is the
// top face {x_dim = 1}; every other face belongs to the rigid part Gamma_0
// where the chamber field vanishes.
struct Domain {
  int dim = 2;

  static Domain unit_box(int dim) {
    if (dim != 2 && dim != 3)
      throw std::invalid_argument("domain dimension must be 2 or 3");
    return Domain{dim};
  }
};

// Chamber eigenfunction: homogeneous Dirichlet on Gamma_0, Neumann-free
// vertical factor on Gamma,
//   e(x) = 2^{dim/2} prod_i sin(k_i pi x_i) * sin((m - 1/2) pi x_dim),
// with eigenvalue lambda = pi^2 (sum_i k_i^2 + (m - 1/2)^2). The family is
// L2(Omega)-orthonormal. Its trace on Gamma is
//   2^{dim/2} (-1)^{m+1} prod_i sin(k_i pi x_i).
struct WaveMode {
  int dim = 2;
  std::array<int, 2> k{1, 0};  // tangential indices; k[1] used only in dim 3
  int m = 1;                   // vertical index >= 1
  double lambda = 0.0;
  double amplitude = 2.0;      // 2^{dim/2}

  double value(std::span<const double> x) const {
    const double pi = std::numbers::pi;
    double v = amplitude * std::sin((m - 0.5) * pi * x[dim - 1]);
    for (int i = 0; i < dim - 1; ++i) v *= std::sin(k[i] * pi * x[i]);
    return v;
  }

  // Restriction to the top face; xg carries the dim-1 tangential coordinates.
  double value_trace(std::span<const double> xg) const {
    const double pi = std::numbers::pi;
    double v = amplitude * (m % 2 == 1 ? 1.0 : -1.0);
    for (int i = 0; i < dim - 1; ++i) v *= std::sin(k[i] * pi * xg[i]);
    return v;
  }
};

// First n_modes chamber modes ordered by eigenvalue, ties broken
// lexicographically on (k_1[, k_2], m). The ordering is deterministic and
// nested: the first N modes of a larger basis equal the N-mode basis, which
// the truncation refinement study relies on.
inline std::vector<WaveMode> build_wave_modes(const Domain& domain, int n_modes) {
  if (n_modes < 1 || n_modes > 64)
    throw std::invalid_argument("wave mode count must lie in [1,64]");
  const double pi = std::numbers::pi;
  const int bound = n_modes + 1;  // candidate box provably contains the first n_modes
  std::vector<WaveMode> all;
  for (int k1 = 1; k1 <= bound; ++k1) {
    for (int k2 = 1; k2 <= (domain.dim == 3 ? bound : 1); ++k2) {
      for (int m = 1; m <= bound; ++m) {
        WaveMode mode;
        mode.dim = domain.dim;
        mode.k = {k1, domain.dim == 3 ? k2 : 0};
        mode.m = m;
        double sum = static_cast<double>(k1) * k1 + (m - 0.5) * (m - 0.5);
        if (domain.dim == 3) sum += static_cast<double>(k2) * k2;
        mode.lambda = pi * pi * sum;
        mode.amplitude = std::pow(2.0, 0.5 * domain.dim);
        all.push_back(mode);
      }
    }
  }
  std::sort(all.begin(), all.end(), [](const WaveMode& a, const WaveMode& b) {
    if (a.lambda != b.lambda) return a.lambda < b.lambda;
    if (a.k[0] != b.k[0]) return a.k[0] < b.k[0];
    if (a.k[1] != b.k[1]) return a.k[1] < b.k[1];
    return a.m < b.m;
  });
  all.resize(n_modes);
  return all;
}

// Scaled characteristic function of the clamped-clamped beam,
//   g(b) = exp(-b) (cos b cosh b - 1) = cos(b)(1 + exp(-2b))/2 - exp(-b).
// The unscaled residual loses all significance once cosh(b) ~ 1e16, so roots
// and residual checks work with this form, which keeps O(1) conditioning for
// every admissible index.
inline double beam_char(double b) {
  return std::cos(b) * 0.5 * (1.0 + std::exp(-2.0 * b)) - std::exp(-b);
}

inline double beam_char_deriv(double b) {
  return -std::sin(b) * 0.5 * (1.0 + std::exp(-2.0 * b)) -
         std::cos(b) * std::exp(-2.0 * b) + std::exp(-b);
}

// First `count` positive roots of cos b cosh b = 1. The n-th root lies in
// ((n + 1/4) pi, (n + 3/4) pi); bisection narrows the bracket and a short
// Newton polish lands on machine precision.
inline std::vector<double> solve_beam_roots(int count) {
  if (count < 1 || count > 64)
    throw std::invalid_argument("beam root count must lie in [1,64]");
  const double pi = std::numbers::pi;
  std::vector<double> roots;
  roots.reserve(count);
  for (int n = 1; n <= count; ++n) {
    double lo = (n + 0.25) * pi;
    double hi = (n + 0.75) * pi;
    double flo = beam_char(lo);
    if (beam_char(hi) * flo > 0.0)
      throw std::runtime_error("beam root bracket failed to straddle a sign change");
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double fmid = beam_char(mid);
      if (flo * fmid <= 0.0) {
        hi = mid;
      } else {
        lo = mid;
        flo = fmid;
      }
    }
    double b = 0.5 * (lo + hi);
    for (int it = 0; it < 8; ++it) {
      const double step = beam_char(b) / beam_char_deriv(b);
      b -= step;
      if (std::abs(step) < 1e-15 * b) break;
    }
    if (!(b > lo - 1e-6 && b < hi + 1e-6) || std::abs(beam_char(b)) > 1e-12)
      throw std::runtime_error("beam root refinement failed to converge");
    roots.push_back(b);
  }
  return roots;
}

// Clamped-clamped beam eigenfunction on (0,1),
//   sigma(x) = cosh(bx) - cos(bx) - alpha (sinh(bx) - sin(bx)),
//   alpha = (cosh b - cos b)/(sinh b - sin b),
// scaled to unit L2 norm. Evaluation goes through delta = alpha - 1 computed
// as (exp(-b) + sin b - cos b)/(sinh b - sin b) and the split exponential
// terms below: the textbook form cancels catastrophically near x = 1 once
// b exceeds ~18, while this arrangement keeps the clamped-end values at
// roundoff scale for every admissible index.
struct BeamMode {
  int index = 1;
  double beta = 0.0;
  double mu = 0.0;     // beta^4, the bending eigenvalue
  double alpha = 0.0;
  double delta = 0.0;  // alpha - 1
  double scale = 1.0;  // L2 normalization factor

  double value(double x) const {
    const double t = beta * x;
    const double ep = -0.5 * delta * std::exp(t);
    const double em = (1.0 + 0.5 * delta) * std::exp(-t);
    return scale * (ep + em - std::cos(t) + alpha * std::sin(t));
  }

  double deriv(double x) const {
    const double t = beta * x;
    const double ep = -0.5 * delta * std::exp(t);
    const double em = (1.0 + 0.5 * delta) * std::exp(-t);
    return scale * beta * (ep - em + std::sin(t) + alpha * std::cos(t));
  }

  double deriv2(double x) const {
    const double t = beta * x;
    const double ep = -0.5 * delta * std::exp(t);
    const double em = (1.0 + 0.5 * delta) * std::exp(-t);
    return scale * beta * beta * (ep + em + std::cos(t) - alpha * std::sin(t));
  }
};

inline BeamMode make_beam_mode(int index, double beta, const Quadrature& quad) {
  BeamMode mode;
  mode.index = index;
  mode.beta = beta;
  mode.mu = beta * beta * beta * beta;
  const double sb = std::sin(beta);
  const double cb = std::cos(beta);
  // cosh - sinh = exp(-b) exactly, so delta carries no large-term cancellation
  mode.delta = (std::exp(-beta) + sb - cb) / (std::sinh(beta) - sb);
  mode.alpha = 1.0 + mode.delta;
  double nrm2 = 0.0;
  for (int i = 0; i < quad.order; ++i) {
    const double v = mode.value(quad.nodes[i]);
    nrm2 += quad.weights[i] * v * v;
  }
  mode.scale = 1.0 / std::sqrt(nrm2);
  return mode;
}

// Wall basis. In dim 2 the wall is the interval (0,1) and the basis is the
// beam family itself; in dim 3 it is the tensor product of two beam factors.
// Either way the family is L2(Gamma)-orthonormal to quadrature accuracy.
// Tensor modes are not eigenfunctions of the squared Laplacian, so the
// bending Gram is a full SPD matrix in dim 3 and diag(mu) in dim 2.
struct PlateBasis {
  int dim = 2;                             // chamber dimension
  std::vector<BeamMode> beams;             // 1-D factors, beams[i] has index i+1
  std::vector<std::array<int, 2>> modes;   // per mode: beam indices, second = 0 in dim 2
  Eigen::MatrixXd l2_gram;                 // mass matrix
  Eigen::MatrixXd bending_gram;            // (Lap sigma_i, Lap sigma_j)

  int n_modes() const { return static_cast<int>(modes.size()); }

  double value(int i, std::span<const double> xg) const {
    const auto& id = modes[i];
    double v = beams[id[0] - 1].value(xg[0]);
    if (dim == 3) v *= beams[id[1] - 1].value(xg[1]);
    return v;
  }

  double laplacian(int i, std::span<const double> xg) const {
    const auto& id = modes[i];
    if (dim == 2) return beams[id[0] - 1].deriv2(xg[0]);
    const BeamMode& s1 = beams[id[0] - 1];
    const BeamMode& s2 = beams[id[1] - 1];
    return s1.deriv2(xg[0]) * s2.value(xg[1]) + s1.value(xg[0]) * s2.deriv2(xg[1]);
  }
};

inline PlateBasis build_plate_basis(const Domain& domain, int n_modes,
                                    const Quadrature& quad) {
  if (n_modes < 1 || n_modes > 64)
    throw std::invalid_argument("plate mode count must lie in [1,64]");
  PlateBasis basis;
  basis.dim = domain.dim;

  // Roots are cheap, so solve up to n_modes of them before deciding which
  // beam factors the tensor selection actually uses.
  const auto roots = solve_beam_roots(n_modes);
  int n_beams = n_modes;
  if (domain.dim == 2) {
    for (int i = 1; i <= n_modes; ++i) basis.modes.push_back({i, 0});
  } else {
    auto mu = [&roots](int i) {
      const double b = roots[i - 1];
      return b * b * b * b;
    };
    std::vector<std::array<int, 2>> all;
    for (int a = 1; a <= n_modes; ++a)
      for (int b = 1; b <= n_modes; ++b) all.push_back({a, b});
    std::sort(all.begin(), all.end(),
              [&mu](const std::array<int, 2>& x, const std::array<int, 2>& y) {
                const double sx = mu(x[0]) + mu(x[1]);
                const double sy = mu(y[0]) + mu(y[1]);
                if (sx != sy) return sx < sy;
                if (x[0] != y[0]) return x[0] < y[0];
                return x[1] < y[1];
              });
    all.resize(n_modes);
    basis.modes = std::move(all);
    n_beams = 0;
    for (const auto& id : basis.modes) n_beams = std::max({n_beams, id[0], id[1]});
  }
  basis.beams.reserve(n_beams);
  for (int i = 0; i < n_beams; ++i)
    basis.beams.push_back(make_beam_mode(i + 1, roots[i], quad));

  // 1-D building blocks: A = (s_i, s_j), B = (s_i'', s_j''), D = (s_i'', s_j).
  // Clamped ends make D symmetric (it equals -(s_i', s_j')).
  const int nb = n_beams;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(nb, nb);
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(nb, nb);
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(nb, nb);
  for (int g = 0; g < quad.order; ++g) {
    const double x = quad.nodes[g];
    const double wgt = quad.weights[g];
    Eigen::VectorXd v(nb), d2(nb);
    for (int i = 0; i < nb; ++i) {
      v[i] = basis.beams[i].value(x);
      d2[i] = basis.beams[i].deriv2(x);
    }
    A.noalias() += wgt * v * v.transpose();
    B.noalias() += wgt * d2 * d2.transpose();
    D.noalias() += wgt * d2 * v.transpose();
  }
  A = 0.5 * (A + A.transpose()).eval();
  B = 0.5 * (B + B.transpose()).eval();
  D = 0.5 * (D + D.transpose()).eval();

  const int n = basis.n_modes();
  basis.l2_gram.resize(n, n);
  basis.bending_gram.resize(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const auto& I = basis.modes[i];
      const auto& J = basis.modes[j];
      if (domain.dim == 2) {
        basis.l2_gram(i, j) = A(I[0] - 1, J[0] - 1);
        basis.bending_gram(i, j) = B(I[0] - 1, J[0] - 1);
      } else {
        const int a = I[0] - 1, b = I[1] - 1, c = J[0] - 1, d = J[1] - 1;
        basis.l2_gram(i, j) = A(a, c) * A(b, d);
        basis.bending_gram(i, j) = B(a, c) * A(b, d) + D(a, c) * D(d, b) +
                                   D(c, a) * D(b, d) + A(a, c) * B(b, d);
      }
    }
  }
  basis.l2_gram = 0.5 * (basis.l2_gram + basis.l2_gram.transpose()).eval();
  basis.bending_gram = 0.5 * (basis.bending_gram + basis.bending_gram.transpose()).eval();

  const double dev =
      (basis.l2_gram - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
  if (dev > 1e-6)
    throw std::runtime_error(
        "quadrature order too low for requested plate modes (Gram deviation)");
  return basis;
}

}  // namespace waveplate
