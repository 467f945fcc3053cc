#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "wdrc/empirical.hpp"
#include "wdrc/errors.hpp"
#include "wdrc/linalg.hpp"
#include "wdrc/model.hpp"

namespace wdrc {

// Quadratic game value V(x) = x'Px + g'x + z.
struct ValueFunction {
  Matrix P;
  Vector g;
  double z = 0.0;

  static ValueFunction zero(int n) {
    return ValueFunction{Matrix::Zero(n, n), Vector::Zero(n), 0.0};
  }
};

// Q-function blocks of the game at a given value function.
//   H_uu = R + a B'PB is positive definite; H_ww = a E'PE - lambda I is
//   negative definite whenever the penalty is feasible.
struct HBlocks {
  Matrix H_xx, H_xu, H_xw, H_uu, H_uw, H_ww;
  Vector G_x, G_u, G_w;
  std::vector<Vector> G_wj;  // per-sample w-gradients, averaging to G_w
};

// Discrete worst-case disturbance distribution: uniform weight 1/N on the
// affine atoms L x + offsets[j].
struct WorstCaseDistribution {
  Matrix L;
  std::vector<Vector> offsets;
};

struct SolveReport {
  ValueFunction value;
  PolicyPair policy;
  WorstCaseDistribution worst_case;
  int iterations = 0;
  double residual = 0.0;
  double rho_closed = 0.0;  // spectral radius of A + BK
  double rho_game = 0.0;    // spectral radius of A + BK + EL
  bool feasible = false;
};

namespace detail {

inline HBlocks assemble_core(const LtiSystem& sys, const CostSpec& cost,
                             const ValueFunction& vf, const SampleStats& stats) {
  const double a = cost.alpha;
  const Matrix& P = vf.P;
  const int d = sys.disturbance_dim();
  HBlocks b;
  b.H_xx = cost.Q + a * sys.A.transpose() * P * sys.A;
  b.H_xu = a * sys.A.transpose() * P * sys.B;
  b.H_xw = a * sys.A.transpose() * P * sys.E;
  b.H_uu = cost.R + a * sys.B.transpose() * P * sys.B;
  b.H_uw = a * sys.B.transpose() * P * sys.E;
  b.H_ww = a * sys.E.transpose() * P * sys.E - cost.lambda * Matrix::Identity(d, d);
  b.G_x = a * sys.A.transpose() * vf.g;
  b.G_u = a * sys.B.transpose() * vf.g;
  b.G_w = a * sys.E.transpose() * vf.g + 2.0 * cost.lambda * stats.mean;
  return b;
}

// Minimum eigenvalue of lambda I - a E'PE; positive means the inner
// maximization over w stays concave.
inline double feasibility_margin(const LtiSystem& sys, const CostSpec& cost, const Matrix& P) {
  const int d = sys.disturbance_dim();
  const Matrix F = cost.lambda * Matrix::Identity(d, d) -
                   cost.alpha * sys.E.transpose() * P * sys.E;
  return min_symmetric_eigenvalue(F);
}

}  // namespace detail

inline HBlocks assemble_blocks(const LtiSystem& sys, const CostSpec& cost,
                               const ValueFunction& vf, const SampleStats& stats,
                               const DisturbanceSamples& samples) {
  require(vf.P.rows() == sys.state_dim() && vf.g.size() == sys.state_dim(),
          "assemble_blocks: value function dimension mismatch");
  require(samples.dim() == sys.disturbance_dim(),
          "assemble_blocks: sample dimension mismatch");
  HBlocks b = detail::assemble_core(sys, cost, vf, stats);
  const double a = cost.alpha;
  const Vector Eg = a * sys.E.transpose() * vf.g;
  b.G_wj.reserve(samples.atoms.size());
  for (const auto& atom : samples.atoms) {
    b.G_wj.push_back(Eg + 2.0 * cost.lambda * atom);
  }
  return b;
}

// One sweep of the value iteration: positive-definite penalty margin is
// checked before inverting the (u,w) block.
inline ValueFunction riccati_step(const LtiSystem& sys, const CostSpec& cost,
                                  const SampleStats& stats, const ValueFunction& vf,
                                  int iteration = -1) {
  const double margin = detail::feasibility_margin(sys, cost, vf.P);
  if (margin <= 0.0) {
    throw InfeasiblePenalty(
        "value iteration infeasible at iteration " + std::to_string(iteration) +
            ": min eig(lambda I - alpha E'PE) = " + std::to_string(margin) +
            "; increase lambda",
        iteration, margin);
  }

  const HBlocks b = detail::assemble_core(sys, cost, vf, stats);
  const int m = sys.input_dim();
  const int d = sys.disturbance_dim();
  const int n = sys.state_dim();

  Matrix M(m + d, m + d);
  M << b.H_uu, b.H_uw, b.H_uw.transpose(), b.H_ww;
  Eigen::PartialPivLU<Matrix> lu(M);

  Matrix rhs(m + d, n);
  rhs << b.H_xu.transpose(), b.H_xw.transpose();
  const Matrix X = lu.solve(rhs);

  Vector gv(m + d);
  gv << b.G_u, b.G_w;
  const Vector y = lu.solve(gv);

  Matrix side(n, m + d);
  side << b.H_xu, b.H_xw;

  ValueFunction next;
  next.P = symmetrized(b.H_xx - side * X);
  next.g = b.G_x - side * y;

  // Constant recursion; the empirical mean-square term is
  // (1/N) sum_j ||w_j||^2 = tr(Sigma) + ||w_bar||^2.
  const double mean_sq = stats.covariance.trace() + stats.mean.squaredNorm();
  const Matrix neg_ww = -b.H_ww;  // positive definite under feasibility
  Eigen::LLT<Matrix> llt(neg_ww);
  const double tr_winv_sigma = -llt.solve(stats.covariance).trace();
  next.z = cost.alpha * vf.z - cost.lambda * mean_sq -
           cost.lambda * cost.lambda * tr_winv_sigma - 0.25 * gv.dot(y);
  return next;
}

// Fixed-point solve of the Riccati-type iteration from (0, 0, 0).
inline ValueFunction value_iterate(const LtiSystem& sys, const CostSpec& cost,
                                   const SampleStats& stats, double tol = 1e-10,
                                   int max_iter = 100000, int* iterations_out = nullptr,
                                   double* residual_out = nullptr) {
  require(stats.mean.size() == sys.disturbance_dim(),
          "value_iterate: sample stats dimension mismatch");
  require(tol > 0.0 && max_iter >= 1, "value_iterate: bad tolerance or iteration cap");

  ValueFunction vf = ValueFunction::zero(sys.state_dim());
  double residual = 0.0;
  for (int i = 0; i < max_iter; ++i) {
    ValueFunction next = riccati_step(sys, cost, stats, vf, i);
    residual = (next.P - vf.P).cwiseAbs().maxCoeff() +
               (next.g - vf.g).cwiseAbs().maxCoeff() + std::abs(next.z - vf.z);
    vf = std::move(next);
    if (residual <= tol) {
      if (iterations_out) *iterations_out = i + 1;
      if (residual_out) *residual_out = residual;
      return vf;
    }
  }
  throw NonConvergence("value_iterate: no convergence after " + std::to_string(max_iter) +
                           " iterations; last residual " + std::to_string(residual),
                       residual);
}

// Affine saddle-point policies from the converged blocks.
inline PolicyPair extract_policy(const HBlocks& b) {
  const Matrix Huu_inv_Huw = b.H_uu.llt().solve(b.H_uw);
  const Matrix neg_ww = -b.H_ww;
  Eigen::LLT<Matrix> ww(neg_ww);
  if (ww.info() != Eigen::Success) {
    throw SaddleStructureError("extract_policy: H_ww is not negative definite");
  }
  const Matrix Hww_inv_Hxw_t = -ww.solve(b.H_xw.transpose());
  const Matrix Hww_inv_Huw_t = -ww.solve(b.H_uw.transpose());
  const Vector Hww_inv_Gw = -ww.solve(b.G_w);

  const Matrix Su = symmetrized(b.H_uu - b.H_uw * Hww_inv_Huw_t);
  const Matrix Sw = symmetrized(b.H_ww - b.H_uw.transpose() * Huu_inv_Huw);
  if (!(min_symmetric_eigenvalue(Su) > 0.0)) {
    throw SaddleStructureError("extract_policy: control Schur complement lost definiteness");
  }
  if (!(min_symmetric_eigenvalue(-Sw) > 0.0)) {
    throw SaddleStructureError("extract_policy: adversary Schur complement lost definiteness");
  }

  Eigen::LLT<Matrix> su(Su);
  Eigen::LLT<Matrix> nsw(Matrix(-Sw));

  PolicyPair p;
  p.K = su.solve(b.H_uw * Hww_inv_Hxw_t - b.H_xu.transpose());
  p.r = -0.5 * su.solve(b.G_u - b.H_uw * Hww_inv_Gw);
  p.L = -nsw.solve(b.H_uw.transpose() * b.H_uu.llt().solve(b.H_xu.transpose()) -
                   b.H_xw.transpose());
  p.l = 0.5 * nsw.solve(b.G_w - b.H_uw.transpose() * b.H_uu.llt().solve(b.G_u));
  if (!(p.K.allFinite() && p.r.allFinite() && p.L.allFinite() && p.l.allFinite())) {
    throw NumericalConditioning("extract_policy: Schur solves produced non-finite gains");
  }
  return p;
}

// Worst-case discrete distribution. The shared gain L and the mean offset
// follow the joint saddle; each atom's offset deviates from the mean by the
// per-sample best response -1/2 H_ww^{-1} (G_wj - G_w), so that L x + l_j
// maximizes the inner objective for sample j at the optimal control.
inline WorstCaseDistribution worst_case_distribution(const HBlocks& b,
                                                     const DisturbanceSamples& samples) {
  require(b.G_wj.size() == samples.atoms.size(),
          "worst_case_distribution: blocks were assembled for a different sample set");
  const PolicyPair p = extract_policy(b);
  Eigen::LLT<Matrix> ww(Matrix(-b.H_ww));

  WorstCaseDistribution wc;
  wc.L = p.L;
  wc.offsets.reserve(samples.atoms.size());
  for (const auto& Gj : b.G_wj) {
    wc.offsets.push_back(p.l + 0.5 * ww.solve(Gj - b.G_w));
  }
  return wc;
}

// Spectral radii of the control loop and of the full game loop.
inline std::pair<double, double> stability_check(const LtiSystem& sys, const PolicyPair& p) {
  const Matrix closed = sys.A + sys.B * p.K;
  const Matrix game = closed + sys.E * p.L;
  return {spectral_radius(closed), spectral_radius(game)};
}

inline SolveReport solve_dr(const LtiSystem& sys, const CostSpec& cost,
                            const DisturbanceSamples& samples, double tol = 1e-10,
                            int max_iter = 100000) {
  const SampleStats stats = sample_stats(samples);
  SolveReport rep;
  rep.value = value_iterate(sys, cost, stats, tol, max_iter, &rep.iterations, &rep.residual);
  const HBlocks blocks = assemble_blocks(sys, cost, rep.value, stats, samples);
  rep.policy = extract_policy(blocks);
  rep.worst_case = worst_case_distribution(blocks, samples);
  std::tie(rep.rho_closed, rep.rho_game) = stability_check(sys, rep.policy);
  rep.feasible = detail::feasibility_margin(sys, cost, rep.value.P) > 0.0;
  return rep;
}

// Finite-horizon value function: exactly `horizon` backward sweeps from
// the zero terminal value.
inline ValueFunction finite_horizon_value(const LtiSystem& sys, const CostSpec& cost,
                                          const SampleStats& stats, int horizon) {
  require(horizon >= 0, "finite_horizon_value: horizon must be >= 0");
  ValueFunction vf = ValueFunction::zero(sys.state_dim());
  for (int i = 0; i < horizon; ++i) vf = riccati_step(sys, cost, stats, vf, i);
  return vf;
}

// ---------------------------------------------------------------------------
// Brute-force dynamic-programming oracle (scalar systems).
//
// Backs up the finite-horizon value on a state grid by nested grid
// optimization: minimize over u, and for each sample maximize over w, the
// one-step objective with the tabulated continuation. Entirely independent
// of the Riccati algebra above.
// ---------------------------------------------------------------------------

struct DpGridSpec {
  double u_lo = -4.0, u_hi = 4.0;
  double w_lo = -4.0, w_hi = 4.0;
  double x_lo = -3.0, x_hi = 3.0;
  int x_points = 161;
  int coarse_points = 41;
  int refine_points = 17;
  int refine_passes = 2;
};

namespace detail {

// Local quadratic interpolation through the three grid points nearest to x;
// exact on quadratics, including evaluation beyond the table edges.
inline double interp3(const std::vector<double>& table, double x_lo, double dx, double x) {
  const int n = static_cast<int>(table.size());
  int i = static_cast<int>(std::floor((x - x_lo) / dx + 0.5));
  if (i < 1) i = 1;
  if (i > n - 2) i = n - 2;
  const double xc = x_lo + i * dx;
  const double t = (x - xc) / dx;
  const double ym = table[static_cast<std::size_t>(i - 1)];
  const double y0 = table[static_cast<std::size_t>(i)];
  const double yp = table[static_cast<std::size_t>(i + 1)];
  return y0 + 0.5 * t * (yp - ym) + 0.5 * t * t * (yp - 2.0 * y0 + ym);
}

// Grid search with refinement and a final parabolic polish. `maximize`
// flips the objective. Throws when the coarse optimum sits on the boundary.
template <typename F>
double grid_optimize(F&& objective, double lo, double hi, const DpGridSpec& grid, bool maximize,
                     double* arg_out = nullptr) {
  auto value = [&](double v) { return maximize ? -objective(v) : objective(v); };
  int npts = grid.coarse_points;
  double best_arg = lo, best_val = std::numeric_limits<double>::infinity();
  double step = (hi - lo) / (npts - 1);
  int best_idx = 0;
  for (int i = 0; i < npts; ++i) {
    const double v = lo + i * step;
    const double f = value(v);
    if (f < best_val) {
      best_val = f;
      best_arg = v;
      best_idx = i;
    }
  }
  if (best_idx == 0 || best_idx == npts - 1) {
    throw GridBoundsError("grid_optimize: optimum on search boundary; widen bounds");
  }
  for (int pass = 0; pass < grid.refine_passes; ++pass) {
    const double span = step;
    npts = grid.refine_points;
    step = 2.0 * span / (npts - 1);
    const double start = best_arg - span;
    for (int i = 0; i < npts; ++i) {
      const double v = start + i * step;
      const double f = value(v);
      if (f < best_val) {
        best_val = f;
        best_arg = v;
      }
    }
  }
  // parabolic vertex through (best-step, best, best+step)
  const double fm = value(best_arg - step);
  const double fp = value(best_arg + step);
  const double denom = fm - 2.0 * best_val + fp;
  if (denom > 0.0) {
    const double shift = 0.5 * step * (fm - fp) / denom;
    if (std::abs(shift) <= step) {
      const double cand = best_arg + shift;
      const double fc = value(cand);
      if (fc < best_val) {
        best_val = fc;
        best_arg = cand;
      }
    }
  }
  if (arg_out) *arg_out = best_arg;
  return maximize ? -best_val : best_val;
}

}  // namespace detail

// Batched oracle evaluation; the value table is built once per call.
inline std::vector<double> dp_oracle_many(const LtiSystem& sys, const CostSpec& cost,
                                          const DisturbanceSamples& samples, int horizon,
                                          const std::vector<double>& queries,
                                          const DpGridSpec& grid = DpGridSpec{}) {
  require(sys.state_dim() == 1 && sys.input_dim() == 1 && sys.disturbance_dim() == 1,
          "dp_oracle: implemented for scalar systems");
  require(horizon >= 0 && horizon <= 50, "dp_oracle: horizon must lie in [0, 50]");
  if (horizon == 0) return std::vector<double>(queries.size(), 0.0);

  const double a = sys.A(0, 0), bb = sys.B(0, 0), e = sys.E(0, 0);
  const double q = cost.Q(0, 0), r = cost.R(0, 0);
  const double alpha = cost.alpha, lambda = cost.lambda;

  const int nx = grid.x_points;
  const double dx = (grid.x_hi - grid.x_lo) / (nx - 1);
  std::vector<double> table(static_cast<std::size_t>(nx), 0.0);

  auto bellman_at = [&](double x, const std::vector<double>& next) {
    auto control_objective = [&](double u) {
      double avg = 0.0;
      for (const auto& atom : samples.atoms) {
        const double what = atom(0);
        auto adversary_objective = [&](double w) {
          const double xn = a * x + bb * u + e * w;
          return alpha * detail::interp3(next, grid.x_lo, dx, xn) -
                 lambda * (w - what) * (w - what);
        };
        avg += detail::grid_optimize(adversary_objective, grid.w_lo, grid.w_hi, grid, true);
      }
      avg /= static_cast<double>(samples.count());
      return q * x * x + r * u * u + avg;
    };
    return detail::grid_optimize(control_objective, grid.u_lo, grid.u_hi, grid, false);
  };

  std::vector<double> scratch(table.size(), 0.0);
  for (int k = 0; k < horizon - 1; ++k) {
    for (int i = 0; i < nx; ++i) {
      const double x = grid.x_lo + i * dx;
      scratch[static_cast<std::size_t>(i)] = bellman_at(x, table);
    }
    table.swap(scratch);
  }
  // `table` holds the value with horizon-1 stages to go; one more backup at
  // each query point applies exactly `horizon` stages.
  std::vector<double> out;
  out.reserve(queries.size());
  for (double x : queries) out.push_back(bellman_at(x, table));
  return out;
}

inline double dp_oracle(const LtiSystem& sys, const CostSpec& cost,
                        const DisturbanceSamples& samples, int horizon, double x,
                        const DpGridSpec& grid = DpGridSpec{}) {
  return dp_oracle_many(sys, cost, samples, horizon, {x}, grid).front();
}

}  // namespace wdrc
