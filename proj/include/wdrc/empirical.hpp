#pragma once

#include <algorithm>
#include <limits>
#include <utility>
#include <vector>

#include "wdrc/errors.hpp"
#include "wdrc/linalg.hpp"

namespace wdrc {

// The N observed disturbance vectors; the empirical distribution puts
// weight 1/N on each.
struct DisturbanceSamples {
  std::vector<Vector> atoms;

  explicit DisturbanceSamples(std::vector<Vector> atoms_) : atoms(std::move(atoms_)) {
    require(!atoms.empty(), "DisturbanceSamples: need at least one atom");
    const Eigen::Index dim = atoms.front().size();
    require(dim >= 1, "DisturbanceSamples: atoms must be nonempty vectors");
    for (const auto& a : atoms) {
      require(a.size() == dim, "DisturbanceSamples: atoms must share a dimension");
      require(a.allFinite(), "DisturbanceSamples: atoms must be finite");
    }
  }

  int count() const { return static_cast<int>(atoms.size()); }
  int dim() const { return static_cast<int>(atoms.front().size()); }
};

struct SampleStats {
  Vector mean;        // w-bar
  Matrix covariance;  // biased, divisor N
};

// Mean and covariance with divisor N; the value-iteration constant term
// consumes exactly this covariance.
inline SampleStats sample_stats(const DisturbanceSamples& samples) {
  const int n = samples.count();
  const int d = samples.dim();
  Vector mean = Vector::Zero(d);
  for (const auto& a : samples.atoms) mean += a;
  mean /= static_cast<double>(n);
  Matrix cov = Matrix::Zero(d, d);
  for (const auto& a : samples.atoms) {
    const Vector c = a - mean;
    cov += c * c.transpose();
  }
  cov /= static_cast<double>(n);
  return SampleStats{std::move(mean), std::move(cov)};
}

namespace detail {

// Kuhn-Munkres on a square cost matrix; returns the minimal total cost.
inline double solve_assignment(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, std::numeric_limits<double>::infinity());
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = 0;
      double delta = std::numeric_limits<double>::infinity();
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  double total = 0.0;
  for (int j = 1; j <= n; ++j) {
    if (p[j]) total += cost[p[j] - 1][j - 1];
  }
  return total;
}

}  // namespace detail

// Squared 2-Wasserstein distance between two uniform discrete distributions
// with the same number of atoms, solved exactly as an assignment problem
// under squared Euclidean ground cost.
inline double wasserstein2_uniform(const std::vector<Vector>& p_atoms,
                                   const std::vector<Vector>& q_atoms) {
  require(!p_atoms.empty(), "wasserstein2_uniform: empty atom list");
  require(p_atoms.size() == q_atoms.size(), "wasserstein2_uniform: atom counts must match");
  const Eigen::Index dim = p_atoms.front().size();
  for (const auto& a : p_atoms) {
    require(a.size() == dim, "wasserstein2_uniform: dimension mismatch");
  }
  for (const auto& a : q_atoms) {
    require(a.size() == dim, "wasserstein2_uniform: dimension mismatch");
  }
  const int k = static_cast<int>(p_atoms.size());
  std::vector<std::vector<double>> cost(static_cast<std::size_t>(k),
                                        std::vector<double>(static_cast<std::size_t>(k)));
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      cost[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          (p_atoms[static_cast<std::size_t>(i)] - q_atoms[static_cast<std::size_t>(j)])
              .squaredNorm();
    }
  }
  return detail::solve_assignment(cost) / static_cast<double>(k);
}

}  // namespace wdrc
