#pragma once

#include <utility>
#include <vector>

#include <Eigen/LU>

#include "wdrc/dr_riccati.hpp"
#include "wdrc/errors.hpp"
#include "wdrc/linalg.hpp"
#include "wdrc/model.hpp"

namespace wdrc {

using ThetaVector = Vector;

// Quadratic Q-function Q(x,u,w) = e'He + G'e + s over e = [x; u; w].
struct QParams {
  Matrix H;  // (n+m+d) x (n+m+d), symmetric
  Vector G;
  double s = 0.0;
  int n = 0, m = 0, d = 0;

  QParams() = default;
  QParams(Matrix H_, Vector G_, double s_, int n_, int m_, int d_)
      : H(std::move(H_)), G(std::move(G_)), s(s_), n(n_), m(m_), d(d_) {
    require(n >= 1 && m >= 1 && d >= 1, "QParams: dimensions must be positive");
    require(H.rows() == n + m + d && H.cols() == n + m + d, "QParams: H size mismatch");
    require(G.size() == n + m + d, "QParams: G size mismatch");
    require(is_symmetric(H), "QParams: H must be symmetric");
  }

  static QParams zero(int n, int m, int d) {
    const int q = n + m + d;
    return QParams(Matrix::Zero(q, q), Vector::Zero(q), 0.0, n, m, d);
  }

  int q() const { return n + m + d; }

  auto H_xx() const { return H.block(0, 0, n, n); }
  auto H_xu() const { return H.block(0, n, n, m); }
  auto H_xw() const { return H.block(0, n + m, n, d); }
  auto H_uu() const { return H.block(n, n, m, m); }
  auto H_uw() const { return H.block(n, n + m, m, d); }
  auto H_ww() const { return H.block(n + m, n + m, d, d); }
  auto G_x() const { return G.segment(0, n); }
  auto G_u() const { return G.segment(n, m); }
  auto G_w() const { return G.segment(n + m, d); }
};

inline int theta_length(int q) { return q * (q + 1) / 2 + q + 1; }

// Feature vector [e_bar; e; 1] with e = [x; u; w] and e_bar the row-major
// upper-triangle monomials e_i e_j, i <= j. The ordering is frozen: packed
// theta vectors are durable artifacts.
inline ThetaVector basis_vector(const Vector& x, const Vector& u, const Vector& w) {
  const int q = static_cast<int>(x.size() + u.size() + w.size());
  Vector e(q);
  e << x, u, w;
  ThetaVector out(theta_length(q));
  int idx = 0;
  for (int i = 0; i < q; ++i) {
    for (int j = i; j < q; ++j) {
      out(idx++) = e(i) * e(j);
    }
  }
  out.segment(idx, q) = e;
  out(idx + q) = 1.0;
  return out;
}

// Packs (H, G, s) into theta. H's diagonal is stored as-is and each
// off-diagonal pair once with value 2*H_ij, so theta' * basis reproduces
// e'He exactly.
inline ThetaVector pack_theta(const QParams& qp) {
  const int q = qp.q();
  ThetaVector out(theta_length(q));
  int idx = 0;
  for (int i = 0; i < q; ++i) {
    for (int j = i; j < q; ++j) {
      out(idx++) = (i == j) ? qp.H(i, i) : 2.0 * qp.H(i, j);
    }
  }
  out.segment(idx, q) = qp.G;
  out(idx + q) = qp.s;
  return out;
}

inline QParams unpack_theta(const ThetaVector& theta, int n, int m, int d) {
  const int q = n + m + d;
  require(theta.size() == theta_length(q), "unpack_theta: length mismatch");
  Matrix H(q, q);
  int idx = 0;
  for (int i = 0; i < q; ++i) {
    for (int j = i; j < q; ++j) {
      const double v = theta(idx++);
      if (i == j) {
        H(i, i) = v;
      } else {
        H(i, j) = 0.5 * v;
        H(j, i) = 0.5 * v;
      }
    }
  }
  Vector G = theta.segment(idx, q);
  return QParams(std::move(H), std::move(G), theta(idx + q), n, m, d);
}

inline double eval_q(const QParams& qp, const Vector& x, const Vector& u, const Vector& w) {
  require(x.size() == qp.n && u.size() == qp.m && w.size() == qp.d,
          "eval_q: dimension mismatch");
  Vector e(qp.q());
  e << x, u, w;
  return e.dot(qp.H * e) + qp.G.dot(e) + qp.s;
}

// Constant term of the single-adversary deterministic game sharing (P, g)
// with the sampled game. Differs from the sampled game's z by
// covariance-driven terms; callers that care record the gap, nothing
// reconciles it silently.
inline double deterministic_z(const LtiSystem& sys, const CostSpec& cost,
                              const ValueFunction& vf, const SampleStats& stats) {
  const HBlocks b = detail::assemble_core(sys, cost, vf, stats);
  const int m = sys.input_dim();
  const int d = sys.disturbance_dim();
  Matrix M(m + d, m + d);
  M << b.H_uu, b.H_uw, b.H_uw.transpose(), b.H_ww;
  Vector gv(m + d);
  gv << b.G_u, b.G_w;
  const Vector offsets = -0.5 * Eigen::PartialPivLU<Matrix>(M).solve(gv);  // (r; l)
  const double affine_part = gv.dot(offsets) + offsets.dot(M * offsets);
  return (affine_part - cost.lambda * stats.mean.squaredNorm()) / (1.0 - cost.alpha);
}

// Q-function parameters of the deterministic game at a converged value
// function; block algebra identical to assemble_blocks.
inline QParams q_from_value(const LtiSystem& sys, const CostSpec& cost, const ValueFunction& vf,
                            const SampleStats& stats) {
  const int n = sys.state_dim(), m = sys.input_dim(), d = sys.disturbance_dim();
  const HBlocks b = detail::assemble_core(sys, cost, vf, stats);
  const int q = n + m + d;
  Matrix H(q, q);
  H.setZero();
  H.block(0, 0, n, n) = b.H_xx;
  H.block(0, n, n, m) = b.H_xu;
  H.block(0, n + m, n, d) = b.H_xw;
  H.block(n, 0, m, n) = b.H_xu.transpose();
  H.block(n, n, m, m) = b.H_uu;
  H.block(n, n + m, m, d) = b.H_uw;
  H.block(n + m, 0, d, n) = b.H_xw.transpose();
  H.block(n + m, n, d, m) = b.H_uw.transpose();
  H.block(n + m, n + m, d, d) = b.H_ww;
  Vector G(q);
  G << b.G_x, b.G_u, b.G_w;
  const double z_det = deterministic_z(sys, cost, vf, stats);
  const double s = cost.alpha * z_det - cost.lambda * stats.mean.squaredNorm();
  return QParams(symmetrized(H), std::move(G), s, n, m, d);
}

// Greedy saddle policies of a quadratic Q-function.
inline PolicyPair greedy_policies(const QParams& qp) {
  HBlocks b;
  b.H_xx = qp.H_xx();
  b.H_xu = qp.H_xu();
  b.H_xw = qp.H_xw();
  b.H_uu = qp.H_uu();
  b.H_uw = qp.H_uw();
  b.H_ww = qp.H_ww();
  b.G_x = qp.G_x();
  b.G_u = qp.G_u();
  b.G_w = qp.G_w();
  if (!(min_symmetric_eigenvalue(b.H_uu) > 0.0)) {
    throw SaddleStructureError("greedy_policies: H_uu block is not positive definite");
  }
  if (!(min_symmetric_eigenvalue(Matrix(-b.H_ww)) > 0.0)) {
    throw SaddleStructureError("greedy_policies: H_ww block is not negative definite");
  }
  return extract_policy(b);
}

// min over u / max over per-sample adversary atoms of the sampled-game
// Q-function, evaluated through its stacked quadratic form. Atom blocks
// carry weight 1/N; cross-blocks between distinct atoms are zero.
struct TildeAssembly {
  Matrix H;   // (n + m + N d) square
  Vector G;
  double s = 0.0;
};

inline TildeAssembly assemble_tilde(const LtiSystem& sys, const CostSpec& cost,
                                    const ValueFunction& vf, const SampleStats& stats,
                                    const DisturbanceSamples& samples) {
  const int n = sys.state_dim(), m = sys.input_dim(), d = sys.disturbance_dim();
  const int N = samples.count();
  const HBlocks b = assemble_blocks(sys, cost, vf, stats, samples);
  const double invN = 1.0 / static_cast<double>(N);
  const int dim = n + m + N * d;

  TildeAssembly t;
  t.H = Matrix::Zero(dim, dim);
  t.G = Vector::Zero(dim);
  t.H.block(0, 0, n, n) = b.H_xx;
  t.H.block(0, n, n, m) = b.H_xu;
  t.H.block(n, 0, m, n) = b.H_xu.transpose();
  t.H.block(n, n, m, m) = b.H_uu;
  t.G.segment(0, n) = b.G_x;
  t.G.segment(n, m) = b.G_u;
  double atom_sq = 0.0;
  for (int j = 0; j < N; ++j) {
    const int off = n + m + j * d;
    t.H.block(0, off, n, d) = invN * b.H_xw;
    t.H.block(off, 0, d, n) = invN * b.H_xw.transpose();
    t.H.block(n, off, m, d) = invN * b.H_uw;
    t.H.block(off, n, d, m) = invN * b.H_uw.transpose();
    t.H.block(off, off, d, d) = invN * b.H_ww;
    t.G.segment(off, d) = invN * b.G_wj[static_cast<std::size_t>(j)];
    atom_sq += samples.atoms[static_cast<std::size_t>(j)].squaredNorm();
  }
  t.s = cost.alpha * vf.z - cost.lambda * invN * atom_sq;
  return t;
}

struct TildeMinMax {
  double value = 0.0;
  Vector u_star;
  std::vector<Vector> atoms;
};

inline TildeMinMax tilde_q_minmax(const LtiSystem& sys, const CostSpec& cost,
                                  const ValueFunction& vf, const SampleStats& stats,
                                  const DisturbanceSamples& samples, const Vector& x) {
  require(x.size() == sys.state_dim(), "tilde_q_minmax: state dimension mismatch");
  const int n = sys.state_dim(), m = sys.input_dim(), d = sys.disturbance_dim();
  const int N = samples.count();
  const TildeAssembly t = assemble_tilde(sys, cost, vf, stats, samples);

  const Matrix H_uu = t.H.block(n, n, m, m);
  const Matrix H_ww_scaled = t.H.block(n + m, n + m, d, d);  // (1/N) H_ww
  if (!(min_symmetric_eigenvalue(H_uu) > 0.0)) {
    throw SaddleStructureError("tilde_q_minmax: H_uu block is not positive definite");
  }
  if (!(min_symmetric_eigenvalue(Matrix(-H_ww_scaled)) > 0.0)) {
    throw SaddleStructureError("tilde_q_minmax: H_ww block is not negative definite");
  }

  // Stationarity of the stacked quadratic in (u, w_1..w_N) at fixed x:
  //   2 H_vv v = -(2 H_vx x + G_v).
  const int vdim = m + N * d;
  const Matrix H_vv = t.H.block(n, n, vdim, vdim);
  const Matrix H_vx = t.H.block(n, 0, vdim, n);
  const Vector rhs = -(2.0 * H_vx * x + t.G.segment(n, vdim));
  const Vector v = Eigen::PartialPivLU<Matrix>(2.0 * H_vv).solve(rhs);

  Vector full(n + vdim);
  full << x, v;
  TildeMinMax out;
  out.value = full.dot(t.H * full) + t.G.dot(full) + t.s;
  out.u_star = v.segment(0, m);
  out.atoms.reserve(static_cast<std::size_t>(N));
  for (int j = 0; j < N; ++j) {
    out.atoms.push_back(v.segment(m + j * d, d));
  }
  return out;
}

}  // namespace wdrc
