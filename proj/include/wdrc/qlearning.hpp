#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "wdrc/empirical.hpp"
#include "wdrc/errors.hpp"
#include "wdrc/linalg.hpp"
#include "wdrc/model.hpp"
#include "wdrc/qfunction.hpp"
#include "wdrc/random.hpp"

namespace wdrc {

struct LearnConfig {
  int M = 0;                  // transitions collected per iteration
  double epsilon = 1e-6;      // termination threshold on ||theta_{i+1} - theta_i||
  int max_iters = 100;
  ExplorationSpec exploration;
  Vector x0_lo, x0_hi;        // fresh-start box, per dimension
  std::uint64_t seed = 0;
  double ridge = 0.0;         // recovery knob after excitation failures
  Vector x0_ref;              // reference start for the cost indicator J
  int saddle_retries = 3;
  // Trajectory segment length; 0 picks twice the uniqueness bound. Early
  // policies can drift the state far enough that one long trajectory leaves
  // the regression numerically rank deficient; pooling short segments from
  // fresh starts keeps the data informative.
  int segment_length = 0;

  static LearnConfig defaults(const LtiSystem& sys, int M, double epsilon, int max_iters,
                              double sigma = 0.1, std::uint64_t seed = 0) {
    LearnConfig c;
    c.M = M;
    c.epsilon = epsilon;
    c.max_iters = max_iters;
    c.exploration = ExplorationSpec::isotropic(sys.input_dim(), sys.disturbance_dim(), sigma);
    c.x0_lo = -Vector::Ones(sys.state_dim());
    c.x0_hi = Vector::Ones(sys.state_dim());
    c.seed = seed;
    c.x0_ref = Vector::Ones(sys.state_dim());
    return c;
  }
};

struct IterationLog {
  int index = 0;
  ThetaVector theta;
  double delta = 0.0;
  double J = 0.0;
  double design_condition = 0.0;
};

struct LearnResult {
  QParams qp;
  PolicyPair policy;
  std::vector<IterationLog> logs;
  bool converged = false;
  double final_delta = 0.0;
};

// Number of transitions required for a unique least-squares solution.
inline int uniqueness_bound(int q) { return (q + 1) * (q + 2) / 2; }

// Regression target for one recorded transition: realized stage cost of the
// recorded inputs plus the discounted Q-value of the next state under the
// current (noise-free) policy pair.
inline double target_value(const CostSpec& cost, const SampleStats& stats, const QParams& qp_i,
                           const PolicyPair& policy_i, const Transition& t) {
  require(t.x.size() == qp_i.n && t.u.size() == qp_i.m && t.w.size() == qp_i.d,
          "target_value: transition dimension mismatch");
  const double stage = t.x.dot(cost.Q * t.x) + t.u.dot(cost.R * t.u) -
                       cost.lambda * (t.w - stats.mean).squaredNorm();
  const Vector u_next = policy_i.K * t.x_next + policy_i.r;
  const Vector w_next = policy_i.L * t.x_next + policy_i.l;
  return stage + cost.alpha * eval_q(qp_i, t.x_next, u_next, w_next);
}

namespace detail {

struct NormalSystem {
  Matrix N;
  Vector rhs;
};

inline NormalSystem accumulate_normal(const std::vector<Transition>& transitions,
                                      const QParams& qp_i, const PolicyPair& policy_i,
                                      const CostSpec& cost, const SampleStats& stats) {
  const int len = theta_length(qp_i.q());
  NormalSystem sys{Matrix::Zero(len, len), Vector::Zero(len)};
  for (const auto& t : transitions) {
    const ThetaVector e = basis_vector(t.x, t.u, t.w);
    const double d = target_value(cost, stats, qp_i, policy_i, t);
    sys.N.selfadjointView<Eigen::Lower>().rankUpdate(e);
    sys.rhs += e * d;
  }
  sys.N = Matrix(sys.N.selfadjointView<Eigen::Lower>());
  return sys;
}

}  // namespace detail

// Least-squares parameter update via equilibrated normal equations with one
// step of iterative refinement. The reported condition number is that of
// the equilibrated normal matrix: raw feature scales vary over orders of
// magnitude and would mask genuine rank deficiency.
inline ThetaVector lstsq_update(const std::vector<Transition>& transitions, const QParams& qp_i,
                                const PolicyPair& policy_i, const CostSpec& cost,
                                const SampleStats& stats, double ridge = 0.0,
                                double* condition_out = nullptr) {
  const int q = qp_i.q();
  const int bound = uniqueness_bound(q);
  if (static_cast<int>(transitions.size()) <= bound) {
    throw ContractViolation("lstsq_update: need M > (q+1)(q+2)/2 transitions");
  }
  require(ridge >= 0.0, "lstsq_update: ridge must be >= 0");

  detail::NormalSystem nsys =
      detail::accumulate_normal(transitions, qp_i, policy_i, cost, stats);
  const int len = static_cast<int>(nsys.N.rows());
  if (ridge > 0.0) nsys.N += ridge * Matrix::Identity(len, len);

  Vector scale(len);
  for (int i = 0; i < len; ++i) {
    const double dii = nsys.N(i, i);
    scale(i) = dii > 0.0 ? std::sqrt(dii) : 1.0;
  }
  const Matrix Ns = scale.cwiseInverse().asDiagonal() * nsys.N * scale.cwiseInverse().asDiagonal();

  Eigen::SelfAdjointEigenSolver<Matrix> es(Ns, Eigen::EigenvaluesOnly);
  const double emin = es.eigenvalues().minCoeff();
  const double emax = es.eigenvalues().maxCoeff();
  const double condition =
      (emin <= 0.0 || !std::isfinite(emin)) ? std::numeric_limits<double>::infinity()
                                            : emax / emin;
  if (condition_out) *condition_out = condition;
  if (!(condition < 1e12)) {
    throw ExcitationError(
        "lstsq_update: regression data is rank deficient (condition " +
            std::to_string(condition) + "); increase exploration noise or M",
        condition);
  }

  Eigen::LDLT<Matrix> ldlt(Ns);
  const Vector rhs_s = nsys.rhs.cwiseQuotient(scale);
  Vector ys = ldlt.solve(rhs_s);
  ys += ldlt.solve(rhs_s - Ns * ys);  // one refinement step
  return ys.cwiseQuotient(scale);
}

// Exact parameter iteration when the model is known; test-side oracle for
// the sampled update.
inline QParams closed_form_iterate(const LtiSystem& sys, const CostSpec& cost,
                                   const SampleStats& stats, const QParams& qp_i,
                                   const PolicyPair& policy_i) {
  const int n = sys.state_dim(), m = sys.input_dim(), d = sys.disturbance_dim();
  require(qp_i.n == n && qp_i.m == m && qp_i.d == d, "closed_form_iterate: dimension mismatch");
  const int q = n + m + d;

  Matrix W = Matrix::Zero(q, q);
  W.block(0, 0, n, n) = cost.Q;
  W.block(n, n, m, m) = cost.R;
  W.block(n + m, n + m, d, d) = -cost.lambda * Matrix::Identity(d, d);

  Matrix ABE(n, q);
  ABE << sys.A, sys.B, sys.E;
  Matrix closure(q, n);  // [I; K; L]
  closure.block(0, 0, n, n) = Matrix::Identity(n, n);
  closure.block(n, 0, m, n) = policy_i.K;
  closure.block(n + m, 0, d, n) = policy_i.L;
  const Matrix F = closure * ABE;

  Vector offset(q);  // [0; r; l]
  offset << Vector::Zero(n), policy_i.r, policy_i.l;

  Matrix H_next = W + cost.alpha * F.transpose() * qp_i.H * F;
  Vector G_next = cost.alpha * F.transpose() * (qp_i.G + 2.0 * qp_i.H * offset);
  G_next.segment(n + m, d) += 2.0 * cost.lambda * stats.mean;
  const double s_next =
      cost.alpha * (qp_i.s + qp_i.G.dot(offset) + offset.dot(qp_i.H * offset)) -
      cost.lambda * stats.mean.squaredNorm();
  return QParams(symmetrized(H_next), std::move(G_next), s_next, n, m, d);
}

// Discounted cost indicator of a policy pair along a noise-free closed
// loop of h = M steps from the reference start.
inline double cost_indicator(const LtiSystem& sys, const CostSpec& cost, const SampleStats& stats,
                             const PolicyPair& policy, const Vector& x0, int horizon) {
  double J = 0.0;
  double discount = 1.0;
  Vector x = x0;
  for (int k = 0; k <= horizon; ++k) {
    const Vector u = policy.K * x + policy.r;
    const Vector w = policy.L * x + policy.l;
    J += discount * (x.dot(cost.Q * x) + u.dot(cost.R * u) -
                     cost.lambda * (w - stats.mean).squaredNorm());
    discount *= cost.alpha;
    if (!std::isfinite(J)) return J;
    x = step(sys, x, u, w);
  }
  return J;
}

// Model-free learning loop: collect an exploratory trajectory, fit theta by
// least squares against the bootstrapped targets, improve both policies
// greedily, repeat until the parameter increment drops below epsilon.
inline LearnResult learn(const LtiSystem& sys, const CostSpec& cost,
                         const DisturbanceSamples& samples, const LearnConfig& config) {
  const int n = sys.state_dim(), m = sys.input_dim(), d = sys.disturbance_dim();
  const int q = n + m + d;
  require(samples.dim() == d, "learn: sample dimension mismatch");
  require(config.epsilon > 0.0, "learn: epsilon must be positive");
  require(config.max_iters >= 1, "learn: max_iters must be >= 1");
  if (config.M <= uniqueness_bound(q)) {
    throw ContractViolation("learn: M must exceed (q+1)(q+2)/2 = " +
                            std::to_string(uniqueness_bound(q)) +
                            " for a unique least-squares solution");
  }
  if (sys.B.isZero(0.0)) {
    throw ContractViolation("learn: B = 0 leaves the plant uncontrollable");
  }
  require(config.x0_lo.size() == n && config.x0_hi.size() == n &&
              (config.x0_hi - config.x0_lo).minCoeff() >= 0.0,
          "learn: x0 box malformed");
  require(config.x0_ref.size() == n, "learn: x0_ref dimension mismatch");

  const SampleStats stats = sample_stats(samples);
  RandomStream rng(config.seed);

  auto draw_x0 = [&]() {
    Vector x0(n);
    for (int i = 0; i < n; ++i) x0(i) = rng.uniform(config.x0_lo(i), config.x0_hi(i));
    return x0;
  };

  const int segment =
      config.segment_length > 0 ? config.segment_length
                                : std::min(config.M, 2 * uniqueness_bound(q));
  require(segment >= 1, "learn: segment_length must be >= 1");

  LearnResult result;
  result.qp = QParams::zero(n, m, d);
  result.policy = PolicyPair::zero(n, m, d);
  ThetaVector theta = pack_theta(result.qp);
  int saddle_failures = 0;
  constexpr int kMaxRestarts = 50;

  for (int i = 0; i < config.max_iters; ++i) {
    std::vector<Transition> transitions;
    transitions.reserve(static_cast<std::size_t>(config.M));
    int restarts = 0;
    while (static_cast<int>(transitions.size()) < config.M) {
      const int want = std::min(segment, config.M - static_cast<int>(transitions.size()));
      try {
        auto chunk = rollout(sys, result.policy, config.exploration, draw_x0(), want, rng);
        transitions.insert(transitions.end(), std::make_move_iterator(chunk.begin()),
                           std::make_move_iterator(chunk.end()));
      } catch (const RolloutDivergence& e) {
        if (++restarts >= kMaxRestarts) {
          throw RolloutDivergence(
              "learn: iteration " + std::to_string(i) + ": " + e.what(), e.step);
        }
      }
    }

    double condition = 0.0;
    ThetaVector theta_next;
    try {
      theta_next = lstsq_update(transitions, result.qp, result.policy, cost, stats,
                                config.ridge, &condition);
    } catch (const ExcitationError& e) {
      throw ExcitationError("learn: iteration " + std::to_string(i) + ": " + e.what(),
                            e.condition);
    }

    const double delta = (theta_next - theta).norm();
    const QParams qp_next = unpack_theta(theta_next, n, m, d);
    PolicyPair policy_next = result.policy;
    try {
      policy_next = greedy_policies(qp_next);
      saddle_failures = 0;
    } catch (const SaddleStructureError& e) {
      if (++saddle_failures > config.saddle_retries) {
        throw SaddleStructureError("learn: iteration " + std::to_string(i) + ": " + e.what());
      }
    }

    const double J = cost_indicator(sys, cost, stats, policy_next, config.x0_ref, config.M);
    result.logs.push_back(IterationLog{i, theta_next, delta, J, condition});

    theta = std::move(theta_next);
    result.qp = qp_next;
    result.policy = policy_next;
    result.final_delta = delta;
    if (delta <= config.epsilon) {
      result.converged = true;
      break;
    }
  }
  return result;
}

}  // namespace wdrc
