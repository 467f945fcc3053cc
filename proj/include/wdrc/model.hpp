#pragma once

#include <cmath>
#include <utility>
#include <variant>
#include <vector>


#include "wdrc/errors.hpp"
#include "wdrc/linalg.hpp"
#include "wdrc/random.hpp"

namespace wdrc {

// Linear time-invariant plant x' = A x + B u + E w.
struct LtiSystem {
  Matrix A;  // n x n
  Matrix B;  // n x m
  Matrix E;  // n x d

  LtiSystem(Matrix A_, Matrix B_, Matrix E_)
      : A(std::move(A_)), B(std::move(B_)), E(std::move(E_)) {
    require(A.rows() >= 1 && A.rows() == A.cols(), "LtiSystem: A must be square, n >= 1");
    require(B.rows() == A.rows() && B.cols() >= 1, "LtiSystem: B must be n x m, m >= 1");
    require(E.rows() == A.rows() && E.cols() >= 1, "LtiSystem: E must be n x d, d >= 1");
    require(A.allFinite() && B.allFinite() && E.allFinite(),
            "LtiSystem: matrix entries must be finite");
  }

  int state_dim() const { return static_cast<int>(A.rows()); }
  int input_dim() const { return static_cast<int>(B.cols()); }
  int disturbance_dim() const { return static_cast<int>(E.cols()); }
};

// Quadratic stage-cost weights, discount and distribution-deviation penalty.
struct CostSpec {
  Matrix Q;  // n x n, symmetric PSD
  Matrix R;  // m x m, symmetric PD
  double alpha;
  double lambda;

  CostSpec(Matrix Q_, Matrix R_, double alpha_, double lambda_)
      : Q(std::move(Q_)), R(std::move(R_)), alpha(alpha_), lambda(lambda_) {
    require(is_symmetric(Q), "CostSpec: Q must be symmetric");
    require(is_symmetric(R), "CostSpec: R must be symmetric");
    require(is_positive_semidefinite(Q), "CostSpec: Q must be positive semi-definite");
    require(is_positive_definite(R) && min_symmetric_eigenvalue(R) > 0.0,
            "CostSpec: R must be positive definite");
    require(alpha > 0.0 && alpha < 1.0, "CostSpec: alpha must lie in (0,1)");
    require(lambda > 0.0, "CostSpec: lambda must be positive");
  }
};

struct GaussianSpec {
  Vector mean;
  Vector var;  // per-dimension variances
};

struct MixtureComponent {
  double weight;
  Vector mean;
  Vector var;
};

struct MixtureSpec {
  std::vector<MixtureComponent> components;
};

struct EmpiricalSpec {
  std::vector<Vector> atoms;  // uniform weights
};

// Generative disturbance models; used only to drive closed-loop evaluation.
class DisturbanceGenerator {
 public:
  explicit DisturbanceGenerator(GaussianSpec g) : spec_(std::move(g)) {
    const auto& gs = std::get<GaussianSpec>(spec_);
    require(gs.mean.size() >= 1 && gs.mean.size() == gs.var.size(),
            "DisturbanceGenerator: mean/var dimensions must agree");
    require((gs.var.array() >= 0.0).all(), "DisturbanceGenerator: variances must be >= 0");
  }

  explicit DisturbanceGenerator(MixtureSpec m) : spec_(std::move(m)) {
    const auto& ms = std::get<MixtureSpec>(spec_);
    require(!ms.components.empty(), "DisturbanceGenerator: mixture needs components");
    double total = 0.0;
    const Eigen::Index dim = ms.components.front().mean.size();
    for (const auto& c : ms.components) {
      require(c.weight >= 0.0, "DisturbanceGenerator: mixture weights must be >= 0");
      require(c.mean.size() == dim && c.var.size() == dim,
              "DisturbanceGenerator: mixture component dimensions must agree");
      require((c.var.array() >= 0.0).all(), "DisturbanceGenerator: variances must be >= 0");
      total += c.weight;
    }
    require(std::abs(total - 1.0) <= 1e-12,
            "DisturbanceGenerator: mixture weights must sum to 1");
  }

  explicit DisturbanceGenerator(EmpiricalSpec e) : spec_(std::move(e)) {
    const auto& es = std::get<EmpiricalSpec>(spec_);
    require(!es.atoms.empty(), "DisturbanceGenerator: empirical variant needs atoms");
    const Eigen::Index dim = es.atoms.front().size();
    for (const auto& a : es.atoms) {
      require(a.size() == dim && a.allFinite(),
              "DisturbanceGenerator: atoms must be finite and same-dimensional");
    }
  }

  int dim() const {
    if (const auto* g = std::get_if<GaussianSpec>(&spec_)) return static_cast<int>(g->mean.size());
    if (const auto* m = std::get_if<MixtureSpec>(&spec_))
      return static_cast<int>(m->components.front().mean.size());
    return static_cast<int>(std::get<EmpiricalSpec>(spec_).atoms.front().size());
  }

  const std::variant<GaussianSpec, MixtureSpec, EmpiricalSpec>& spec() const { return spec_; }

 private:
  std::variant<GaussianSpec, MixtureSpec, EmpiricalSpec> spec_;
};

// One simulator sample: x_next = A x + B u + E w exactly.
struct Transition {
  Vector x;
  Vector u;
  Vector w;
  Vector x_next;
};

// Affine controller u = K x + r and affine adversary w = L x + l.
struct PolicyPair {
  Matrix K;  // m x n
  Vector r;  // m
  Matrix L;  // d x n
  Vector l;  // d

  static PolicyPair zero(int n, int m, int d) {
    return PolicyPair{Matrix::Zero(m, n), Vector::Zero(m), Matrix::Zero(d, n), Vector::Zero(d)};
  }
};

inline Vector step(const LtiSystem& sys, const Vector& x, const Vector& u, const Vector& w) {
  require(x.size() == sys.state_dim(), "step: x dimension mismatch");
  require(u.size() == sys.input_dim(), "step: u dimension mismatch");
  require(w.size() == sys.disturbance_dim(), "step: w dimension mismatch");
  return sys.A * x + sys.B * u + sys.E * w;
}

inline double stage_cost(const CostSpec& cost, const Vector& x, const Vector& u) {
  require(x.size() == cost.Q.rows(), "stage_cost: x dimension mismatch");
  require(u.size() == cost.R.rows(), "stage_cost: u dimension mismatch");
  return x.dot(cost.Q * x) + u.dot(cost.R * u);
}

inline Vector sample_disturbance(const DisturbanceGenerator& gen, RandomStream& rng) {
  const auto& spec = gen.spec();
  if (const auto* g = std::get_if<GaussianSpec>(&spec)) {
    Vector w(g->mean.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      w(i) = g->mean(i) + std::sqrt(g->var(i)) * rng.normal();
    }
    return w;
  }
  if (const auto* m = std::get_if<MixtureSpec>(&spec)) {
    const double pick = rng.uniform01();
    double cum = 0.0;
    const MixtureComponent* chosen = &m->components.back();
    for (const auto& c : m->components) {
      cum += c.weight;
      if (pick < cum) {
        chosen = &c;
        break;
      }
    }
    Vector w(chosen->mean.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      w(i) = chosen->mean(i) + std::sqrt(chosen->var(i)) * rng.normal();
    }
    return w;
  }
  const auto& atoms = std::get<EmpiricalSpec>(spec).atoms;
  return atoms[static_cast<std::size_t>(rng.uniform_index(static_cast<int>(atoms.size())))];
}

// Zero-mean Gaussian exploration added to both players' inputs during
// data collection.
struct ExplorationSpec {
  Matrix sigma_u;  // m x m covariance
  Matrix sigma_w;  // d x d covariance

  static ExplorationSpec isotropic(int m, int d, double sigma) {
    return ExplorationSpec{sigma * sigma * Matrix::Identity(m, m),
                           sigma * sigma * Matrix::Identity(d, d)};
  }

  static ExplorationSpec none(int m, int d) { return isotropic(m, d, 0.0); }
};

// Rollout aborts when the state leaves this box; early learning iterates
// can destabilize the plant and the caller restarts from a fresh x0.
inline constexpr double kDivergenceGuard = 1e6;

// Simulates M consecutive transitions from x0 under the given policy pair,
// with exploration noise drawn per step (controller noise first, then
// adversary noise).
inline std::vector<Transition> rollout(const LtiSystem& sys, const PolicyPair& policy,
                                       const ExplorationSpec& noise, const Vector& x0, int M,
                                       RandomStream& rng) {
  require(M >= 1, "rollout: M must be >= 1");
  const int m = sys.input_dim();
  const int d = sys.disturbance_dim();
  require(x0.size() == sys.state_dim(), "rollout: x0 dimension mismatch");
  require(noise.sigma_u.rows() == m && noise.sigma_u.cols() == m,
          "rollout: sigma_u must be m x m");
  require(noise.sigma_w.rows() == d && noise.sigma_w.cols() == d,
          "rollout: sigma_w must be d x d");

  const Matrix root_u = psd_sqrt(noise.sigma_u);
  const Matrix root_w = psd_sqrt(noise.sigma_w);

  std::vector<Transition> out;
  out.reserve(static_cast<std::size_t>(M));
  Vector x = x0;
  for (int k = 0; k < M; ++k) {
    if (!x.allFinite() || x.cwiseAbs().maxCoeff() > kDivergenceGuard) {
      throw RolloutDivergence("rollout: state left the guarded region", k);
    }
    const Vector u = policy.K * x + policy.r + root_u * rng.normal_vector(m);
    const Vector w = policy.L * x + policy.l + root_w * rng.normal_vector(d);
    Vector x_next = step(sys, x, u, w);
    out.push_back(Transition{x, u, w, x_next});
    x = std::move(x_next);
  }
  if (!x.allFinite() || x.cwiseAbs().maxCoeff() > kDivergenceGuard) {
    throw RolloutDivergence("rollout: state left the guarded region", M);
  }
  return out;
}

}  // namespace wdrc
