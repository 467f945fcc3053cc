#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "wdrc/empirical.hpp"
#include "wdrc/errors.hpp"
#include "wdrc/linalg.hpp"
#include "wdrc/model.hpp"
#include "wdrc/qlearning.hpp"
#include "wdrc/serialize.hpp"

namespace wdrc {

struct EvalConfig {
  int horizon = 200;
  int trials = 500;
  std::uint64_t seed = 0;
  DisturbanceGenerator disturbance;
  Vector x0;
  int steady_time_index = 180;
};

struct ExperimentConfig {
  LtiSystem system;
  CostSpec cost;
  DisturbanceSamples samples;
  std::optional<LearnConfig> learning;
  std::optional<EvalConfig> eval;
};

namespace config_detail {

using Json = nlohmann::ordered_json;

struct Collector {
  std::vector<std::string> violations;

  void add(const std::string& path, const std::string& what) {
    violations.push_back(path + ": " + what);
  }
  bool ok() const { return violations.empty(); }
};

inline const Json* field(const Json& j, const std::string& path, const std::string& key,
                         Collector& c, bool required = true) {
  if (!j.is_object() || !j.contains(key)) {
    if (required) c.add(path.empty() ? key : path + "." + key, "missing");
    return nullptr;
  }
  return &j.at(key);
}

inline std::optional<double> number(const Json& j, const std::string& path, Collector& c) {
  if (!j.is_number()) {
    c.add(path, "must be a number");
    return std::nullopt;
  }
  return j.get<double>();
}

inline std::optional<int> integer(const Json& j, const std::string& path, Collector& c) {
  if (!j.is_number_integer()) {
    c.add(path, "must be an integer");
    return std::nullopt;
  }
  return j.get<int>();
}

inline std::optional<Vector> vector(const Json& j, const std::string& path, Collector& c) {
  if (!j.is_array() || j.empty()) {
    c.add(path, "must be a nonempty numeric array");
    return std::nullopt;
  }
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) {
      c.add(path, "must contain only numbers");
      return std::nullopt;
    }
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

inline std::optional<Matrix> matrix(const Json& j, const std::string& path, Collector& c) {
  if (!j.is_array() || j.empty()) {
    c.add(path, "must be a nonempty array of rows");
    return std::nullopt;
  }
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  if (cols == 0) {
    c.add(path, "rows must be nonempty numeric arrays");
    return std::nullopt;
  }
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols) {
      c.add(path, "rows must all have the same width");
      return std::nullopt;
    }
    for (std::size_t k = 0; k < cols; ++k) {
      if (!j[i][k].is_number()) {
        c.add(path, "must contain only numbers");
        return std::nullopt;
      }
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = j[i][k].get<double>();
    }
  }
  return m;
}

inline std::optional<DisturbanceGenerator> generator(const Json& j, const std::string& path,
                                                     Collector& c) {
  const Json* type = field(j, path, "type", c);
  if (!type || !type->is_string()) {
    if (type) c.add(path + ".type", "must be a string");
    return std::nullopt;
  }
  const std::string kind = type->get<std::string>();
  if (kind == "gaussian") {
    const Json* mean_j = field(j, path, "mean", c);
    const Json* var_j = field(j, path, "var", c);
    if (!mean_j || !var_j) return std::nullopt;
    auto mean = vector(*mean_j, path + ".mean", c);
    auto var = vector(*var_j, path + ".var", c);
    if (!mean || !var) return std::nullopt;
    if (mean->size() != var->size()) {
      c.add(path, "mean and var must have the same dimension");
      return std::nullopt;
    }
    if ((var->array() < 0.0).any()) {
      c.add(path + ".var", "variances must be >= 0");
      return std::nullopt;
    }
    return DisturbanceGenerator(GaussianSpec{std::move(*mean), std::move(*var)});
  }
  if (kind == "mixture") {
    const Json* comps = field(j, path, "components", c);
    if (!comps || !comps->is_array() || comps->empty()) {
      if (comps) c.add(path + ".components", "must be a nonempty array");
      return std::nullopt;
    }
    MixtureSpec spec;
    double total = 0.0;
    for (std::size_t i = 0; i < comps->size(); ++i) {
      const std::string cp = path + ".components[" + std::to_string(i) + "]";
      const Json& comp = (*comps)[i];
      const Json* wj = field(comp, cp, "weight", c);
      const Json* mj = field(comp, cp, "mean", c);
      const Json* vj = field(comp, cp, "var", c);
      if (!wj || !mj || !vj) return std::nullopt;
      auto w = number(*wj, cp + ".weight", c);
      auto mean = vector(*mj, cp + ".mean", c);
      auto var = vector(*vj, cp + ".var", c);
      if (!w || !mean || !var) return std::nullopt;
      if (*w < 0.0) {
        c.add(cp + ".weight", "must be >= 0");
        return std::nullopt;
      }
      if (mean->size() != var->size() || (var->array() < 0.0).any()) {
        c.add(cp, "mean/var must match and variances must be >= 0");
        return std::nullopt;
      }
      total += *w;
      spec.components.push_back(MixtureComponent{*w, std::move(*mean), std::move(*var)});
    }
    if (std::abs(total - 1.0) > 1e-12) {
      c.add(path + ".components", "weights must sum to 1");
      return std::nullopt;
    }
    return DisturbanceGenerator(std::move(spec));
  }
  if (kind == "empirical") {
    const Json* atoms_j = field(j, path, "atoms", c);
    if (!atoms_j) return std::nullopt;
    auto atoms_m = matrix(*atoms_j, path + ".atoms", c);
    if (!atoms_m) return std::nullopt;
    EmpiricalSpec spec;
    for (Eigen::Index i = 0; i < atoms_m->rows(); ++i) {
      spec.atoms.push_back(Vector(atoms_m->row(i).transpose()));
    }
    return DisturbanceGenerator(std::move(spec));
  }
  c.add(path + ".type", "must be one of gaussian|mixture|empirical");
  return std::nullopt;
}

}  // namespace config_detail

inline ExperimentConfig parse_config_json(const nlohmann::ordered_json& root,
                                          const std::filesystem::path& base_dir) {
  using config_detail::field;
  config_detail::Collector c;

  // --- system ---
  std::optional<Matrix> A, B, E;
  if (const auto* sys_j = field(root, "", "system", c)) {
    if (const auto* a = field(*sys_j, "system", "A", c)) A = config_detail::matrix(*a, "system.A", c);
    if (const auto* b = field(*sys_j, "system", "B", c)) B = config_detail::matrix(*b, "system.B", c);
    if (const auto* e = field(*sys_j, "system", "E", c)) E = config_detail::matrix(*e, "system.E", c);
  }
  if (A && A->rows() != A->cols()) c.add("system.A", "must be square");
  if (A && B && B->rows() != A->rows()) c.add("system.B", "row count must equal state dimension");
  if (A && E && E->rows() != A->rows()) c.add("system.E", "row count must equal state dimension");
  const int n = A ? static_cast<int>(A->rows()) : 0;
  const int m = B ? static_cast<int>(B->cols()) : 0;
  const int d = E ? static_cast<int>(E->cols()) : 0;

  // --- cost ---
  std::optional<Matrix> Q, R;
  std::optional<double> alpha, lambda;
  if (const auto* cost_j = field(root, "", "cost", c)) {
    if (const auto* qj = field(*cost_j, "cost", "Q", c)) Q = config_detail::matrix(*qj, "cost.Q", c);
    if (const auto* rj = field(*cost_j, "cost", "R", c)) R = config_detail::matrix(*rj, "cost.R", c);
    if (const auto* aj = field(*cost_j, "cost", "alpha", c))
      alpha = config_detail::number(*aj, "cost.alpha", c);
    if (const auto* lj = field(*cost_j, "cost", "lambda", c))
      lambda = config_detail::number(*lj, "cost.lambda", c);
  }
  if (Q) {
    if (A && (Q->rows() != n || Q->cols() != n)) c.add("cost.Q", "must be n x n");
    if (!is_symmetric(*Q)) {
      c.add("cost.Q", "must be symmetric");
    } else if (!is_positive_semidefinite(*Q)) {
      c.add("cost.Q", "must be positive semi-definite");
    }
  }
  if (R) {
    if (B && (R->rows() != m || R->cols() != m)) c.add("cost.R", "must be m x m");
    if (!is_symmetric(*R)) {
      c.add("cost.R", "must be symmetric");
    } else if (!(is_positive_definite(*R) && min_symmetric_eigenvalue(*R) > 0.0)) {
      c.add("cost.R", "must be positive definite");
    }
  }
  if (alpha && !(*alpha > 0.0 && *alpha < 1.0)) c.add("cost.alpha", "must lie in (0,1)");
  if (lambda && !(*lambda > 0.0)) c.add("cost.lambda", "must be positive");

  // --- samples ---
  std::vector<Vector> atoms;
  if (const auto* samples_j = field(root, "", "samples", c)) {
    const bool has_atoms = samples_j->contains("atoms");
    const bool has_csv = samples_j->contains("csv");
    const bool has_gen = samples_j->contains("generator");
    if (has_atoms + has_csv + has_gen != 1) {
      c.add("samples", "must provide exactly one of atoms|csv|generator");
    } else if (has_atoms) {
      if (auto am = config_detail::matrix(samples_j->at("atoms"), "samples.atoms", c)) {
        for (Eigen::Index i = 0; i < am->rows(); ++i) {
          atoms.push_back(Vector(am->row(i).transpose()));
        }
      }
    } else if (has_csv) {
      if (!samples_j->at("csv").is_string()) {
        c.add("samples.csv", "must be a path string");
      } else {
        const std::filesystem::path p = samples_j->at("csv").get<std::string>();
        const std::filesystem::path resolved = p.is_absolute() ? p : base_dir / p;
        try {
          atoms = read_atoms_csv(resolved);
        } catch (const ContractViolation& e) {
          c.add("samples.csv", e.what());
        }
        if (atoms.empty() && c.ok()) c.add("samples.csv", "file holds no atoms");
      }
    } else {
      const auto* gen_j = field(*samples_j, "samples", "generator", c);
      const auto* n_j = field(*samples_j, "samples", "N", c);
      const auto* seed_j = field(*samples_j, "samples", "seed", c);
      std::optional<DisturbanceGenerator> gen;
      std::optional<int> count;
      if (gen_j) gen = config_detail::generator(*gen_j, "samples.generator", c);
      if (n_j) count = config_detail::integer(*n_j, "samples.N", c);
      if (count && *count < 1) c.add("samples.N", "must be >= 1");
      if (gen && count && *count >= 1 && seed_j && seed_j->is_number_integer()) {
        RandomStream rng(seed_j->get<std::uint64_t>());
        for (int i = 0; i < *count; ++i) atoms.push_back(sample_disturbance(*gen, rng));
      }
    }
  }
  if (!atoms.empty() && E) {
    for (const auto& a : atoms) {
      if (a.size() != d) {
        c.add("samples", "atom dimension must equal disturbance dimension");
        break;
      }
    }
  }

  // --- learning (optional) ---
  std::optional<LearnConfig> learning;
  if (root.contains("learning")) {
    const Json& lj = root.at("learning");
    LearnConfig lc;
    bool usable = (n > 0 && m > 0 && d > 0);
    if (const auto* mj = field(lj, "learning", "M", c)) {
      if (auto v = config_detail::integer(*mj, "learning.M", c)) {
        lc.M = *v;
        if (usable && lc.M <= uniqueness_bound(n + m + d)) {
          c.add("learning.M",
                "must exceed (q+1)(q+2)/2 = " + std::to_string(uniqueness_bound(n + m + d)) +
                    " for a unique least-squares solution");
        }
      }
    }
    if (const auto* ej = field(lj, "learning", "epsilon", c)) {
      if (auto v = config_detail::number(*ej, "learning.epsilon", c)) {
        lc.epsilon = *v;
        if (!(lc.epsilon > 0.0)) c.add("learning.epsilon", "must be positive");
      }
    }
    if (const auto* ij = field(lj, "learning", "max_iters", c)) {
      if (auto v = config_detail::integer(*ij, "learning.max_iters", c)) {
        lc.max_iters = *v;
        if (lc.max_iters < 1) c.add("learning.max_iters", "must be >= 1");
      }
    }
    double sigma = 0.1;
    if (lj.contains("sigma")) {
      if (auto v = config_detail::number(lj.at("sigma"), "learning.sigma", c)) {
        sigma = *v;
        if (sigma < 0.0) c.add("learning.sigma", "must be >= 0");
      }
    }
    if (usable) {
      lc.exploration = ExplorationSpec::isotropic(m, d, sigma);
      if (lj.contains("Sigma1")) {
        if (auto v = config_detail::matrix(lj.at("Sigma1"), "learning.Sigma1", c)) {
          if (v->rows() != m || v->cols() != m) {
            c.add("learning.Sigma1", "must be m x m");
          } else {
            lc.exploration.sigma_u = *v;
          }
        }
      }
      if (lj.contains("Sigma2")) {
        if (auto v = config_detail::matrix(lj.at("Sigma2"), "learning.Sigma2", c)) {
          if (v->rows() != d || v->cols() != d) {
            c.add("learning.Sigma2", "must be d x d");
          } else {
            lc.exploration.sigma_w = *v;
          }
        }
      }
      lc.x0_lo = -Vector::Ones(n);
      lc.x0_hi = Vector::Ones(n);
      if (lj.contains("x0_box")) {
        const Json& box = lj.at("x0_box");
        if (box.is_number()) {
          const double b = box.get<double>();
          if (b <= 0.0) {
            c.add("learning.x0_box", "half-width must be positive");
          } else {
            lc.x0_lo = -b * Vector::Ones(n);
            lc.x0_hi = b * Vector::Ones(n);
          }
        } else if (auto bm = config_detail::matrix(box, "learning.x0_box", c)) {
          if (bm->rows() != n || bm->cols() != 2) {
            c.add("learning.x0_box", "must be scalar or n rows of [lo, hi]");
          } else {
            lc.x0_lo = bm->col(0);
            lc.x0_hi = bm->col(1);
            if ((lc.x0_hi - lc.x0_lo).minCoeff() < 0.0) {
              c.add("learning.x0_box", "each hi must be >= lo");
            }
          }
        }
      }
      lc.x0_ref = Vector::Ones(n);
      if (lj.contains("x0_ref")) {
        if (auto v = config_detail::vector(lj.at("x0_ref"), "learning.x0_ref", c)) {
          if (v->size() != n) {
            c.add("learning.x0_ref", "must have state dimension");
          } else {
            lc.x0_ref = *v;
          }
        }
      }
    }
    if (lj.contains("seed")) {
      if (!lj.at("seed").is_number_integer()) {
        c.add("learning.seed", "must be an integer");
      } else {
        lc.seed = lj.at("seed").get<std::uint64_t>();
      }
    }
    if (lj.contains("ridge")) {
      if (auto v = config_detail::number(lj.at("ridge"), "learning.ridge", c)) {
        lc.ridge = *v;
        if (lc.ridge < 0.0) c.add("learning.ridge", "must be >= 0");
      }
    }
    if (lj.contains("segment_length")) {
      if (auto v = config_detail::integer(lj.at("segment_length"), "learning.segment_length", c)) {
        lc.segment_length = *v;
        if (lc.segment_length < 0) c.add("learning.segment_length", "must be >= 0");
      }
    }
    learning = std::move(lc);
  }

  // --- eval (optional) ---
  bool eval_present = root.contains("eval");
  std::optional<int> ev_horizon, ev_trials, ev_steady;
  std::optional<std::uint64_t> ev_seed;
  std::optional<Vector> ev_x0;
  std::optional<DisturbanceGenerator> ev_gen;
  if (eval_present) {
    const Json& ej = root.at("eval");
    if (const auto* hj = field(ej, "eval", "horizon", c)) {
      ev_horizon = config_detail::integer(*hj, "eval.horizon", c);
      if (ev_horizon && *ev_horizon < 1) c.add("eval.horizon", "must be >= 1");
    }
    if (const auto* tj = field(ej, "eval", "trials", c)) {
      ev_trials = config_detail::integer(*tj, "eval.trials", c);
      if (ev_trials && *ev_trials < 1) c.add("eval.trials", "must be >= 1");
    }
    if (const auto* sj = field(ej, "eval", "seed", c)) {
      if (!sj->is_number_integer()) {
        c.add("eval.seed", "must be an integer");
      } else {
        ev_seed = sj->get<std::uint64_t>();
      }
    }
    if (const auto* dj = field(ej, "eval", "disturbance", c)) {
      ev_gen = config_detail::generator(*dj, "eval.disturbance", c);
      if (ev_gen && E && ev_gen->dim() != d) {
        c.add("eval.disturbance", "dimension must equal disturbance dimension");
      }
    }
    if (const auto* xj = field(ej, "eval", "x0", c)) {
      ev_x0 = config_detail::vector(*xj, "eval.x0", c);
      if (ev_x0 && A && ev_x0->size() != n) c.add("eval.x0", "must have state dimension");
    }
    if (const auto* kj = field(ej, "eval", "steady_time_index", c)) {
      ev_steady = config_detail::integer(*kj, "eval.steady_time_index", c);
      if (ev_steady && ev_horizon && (*ev_steady < 0 || *ev_steady > *ev_horizon)) {
        c.add("eval.steady_time_index", "must lie in [0, horizon]");
      }
    }
  }

  if (!c.ok()) throw ConfigError(std::move(c.violations));

  try {
    ExperimentConfig cfg{
        LtiSystem(std::move(*A), std::move(*B), std::move(*E)),
        CostSpec(std::move(*Q), std::move(*R), *alpha, *lambda),
        DisturbanceSamples(std::move(atoms)),
        std::move(learning),
        std::nullopt,
    };
    if (eval_present) {
      cfg.eval = EvalConfig{*ev_horizon, *ev_trials, *ev_seed, std::move(*ev_gen),
                            std::move(*ev_x0), *ev_steady};
    }
    return cfg;
  } catch (const ContractViolation& e) {
    throw ConfigError({std::string("config: ") + e.what()});
  }
}

inline ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError({"config: cannot open " + path.string()});
  nlohmann::ordered_json root;
  try {
    root = nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError({std::string("config: invalid JSON: ") + e.what()});
  }
  return parse_config_json(root, path.parent_path());
}

}  // namespace wdrc
