#pragma once

#include <string>

#include <Eigen/Cholesky>

#include "wdrc/dr_riccati.hpp"
#include "wdrc/errors.hpp"
#include "wdrc/linalg.hpp"
#include "wdrc/model.hpp"

namespace wdrc {

// Discounted LQR via Riccati fixed-point iteration from P = 0. Sign
// convention u = K x, so K carries the minus. The default discount is a
// hair below 1: the reference comparisons use the undiscounted regulator
// while the solver interface requires alpha < 1.
inline PolicyPair lqr_gain(const LtiSystem& sys, const CostSpec& cost,
                           double alpha = 1.0 - 1e-9, double tol = 1e-12,
                           int max_iter = 1000000, Matrix* P_out = nullptr) {
  require(alpha > 0.0 && alpha <= 1.0, "lqr_gain: alpha must lie in (0,1]");
  const int n = sys.state_dim();
  const int m = sys.input_dim();
  Matrix P = Matrix::Zero(n, n);
  double residual = 0.0;
  bool done = false;
  for (int i = 0; i < max_iter; ++i) {
    const Matrix BtPA = sys.B.transpose() * P * sys.A;
    const Matrix Ruu = cost.R + alpha * sys.B.transpose() * P * sys.B;
    const Matrix P_next = symmetrized(cost.Q + alpha * sys.A.transpose() * P * sys.A -
                                      alpha * alpha * BtPA.transpose() *
                                          Ruu.llt().solve(BtPA));
    residual = (P_next - P).cwiseAbs().maxCoeff();
    P = P_next;
    if (residual <= tol) {
      done = true;
      break;
    }
  }
  if (!done) {
    throw NonConvergence("lqr_gain: Riccati iteration did not converge; is (A,B) stabilizable?",
                         residual);
  }
  if (P_out) *P_out = P;
  const Matrix Ruu = cost.R + alpha * sys.B.transpose() * P * sys.B;
  PolicyPair p = PolicyPair::zero(n, m, sys.disturbance_dim());
  p.K = -Ruu.llt().solve(alpha * sys.B.transpose() * P * sys.A);
  return p;
}

// H-infinity game controller: the zero-mean, zero-covariance special case
// of the sampled game, so it shares the solver code path. The affine
// offsets come out exactly zero.
inline PolicyPair hinf_policy(const LtiSystem& sys, const CostSpec& cost, double tol = 1e-10,
                              int max_iter = 100000) {
  const int d = sys.disturbance_dim();
  const SampleStats stats{Vector::Zero(d), Matrix::Zero(d, d)};
  const ValueFunction vf = value_iterate(sys, cost, stats, tol, max_iter);
  const HBlocks blocks = detail::assemble_core(sys, cost, vf, stats);
  return extract_policy(blocks);
}

}  // namespace wdrc
