#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wdrc/baselines.hpp"
#include "wdrc/config.hpp"
#include "wdrc/dr_riccati.hpp"
#include "wdrc/evaluate.hpp"
#include "wdrc/qlearning.hpp"
#include "wdrc/serialize.hpp"

namespace wdrc {

inline SolveReport cmd_solve(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const SolveReport rep = solve_dr(cfg.system, cfg.cost, cfg.samples);
  detail::write_file(out_dir / "report.json", solve_report_json(rep).dump(2) + "\n");
  detail::write_file(out_dir / "policy.csv", policy_csv(rep.policy));
  return rep;
}

inline LearnResult cmd_learn(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                             bool dump_theta = false) {
  if (!cfg.learning) {
    throw ConfigError({"learning: section required by the learn command"});
  }
  std::filesystem::create_directories(out_dir);
  const LearnResult res = learn(cfg.system, cfg.cost, cfg.samples, *cfg.learning);
  detail::write_file(out_dir / "iterations.csv", iterations_csv(res.logs));
  detail::write_file(out_dir / "policy.csv", policy_csv(res.policy));
  detail::write_file(out_dir / "theta.csv", theta_csv(pack_theta(res.qp)));
  if (dump_theta) {
    for (const auto& log : res.logs) {
      char name[32];
      std::snprintf(name, sizeof(name), "theta_iter_%04d.csv", log.index);
      detail::write_file(out_dir / name, theta_csv(log.theta));
    }
  }
  return res;
}

// Builds the requested controller: the robust game solution, the LQR
// reference (designed at the near-undiscounted default), or the H-infinity
// game controller.
inline PolicyPair controller_policy(const ExperimentConfig& cfg, const std::string& controller) {
  if (controller == "wdr") return solve_dr(cfg.system, cfg.cost, cfg.samples).policy;
  if (controller == "lqr") return lqr_gain(cfg.system, cfg.cost);
  if (controller == "hinf") return hinf_policy(cfg.system, cfg.cost);
  throw ConfigError({"controller: must be one of wdr|lqr|hinf, got '" + controller + "'"});
}

inline EvalSummary cmd_eval(const ExperimentConfig& cfg, const std::string& controller,
                            const std::optional<std::filesystem::path>& policy_path,
                            const std::filesystem::path& out_dir) {
  if (!cfg.eval) {
    throw ConfigError({"eval: section required by the eval command"});
  }
  std::filesystem::create_directories(out_dir);
  PolicyPair policy =
      policy_path ? read_policy_csv(*policy_path, cfg.system.state_dim(),
                                    cfg.system.input_dim(), cfg.system.disturbance_dim())
                  : controller_policy(cfg, controller);
  const EvalSummary summary = run_eval(cfg.system, cfg.cost, policy, *cfg.eval, controller);
  detail::write_file(out_dir / "trials.csv", trials_csv(summary));
  detail::write_file(out_dir / "summary.json", summary_json(summary).dump(2) + "\n");
  return summary;
}

struct SweepRow {
  double lambda = 0.0;
  double mean_x1 = 0.0;
  double var_x1 = 0.0;
  double mean_cost = 0.0;
  bool feasible = false;
};

// Per-penalty study: solve (or learn) and evaluate at each lambda.
// Infeasible or otherwise failed penalties become rows, not aborts.
inline std::vector<SweepRow> cmd_sweep(const ExperimentConfig& cfg,
                                       const std::vector<double>& lambdas,
                                       const std::string& controller, bool use_learn,
                                       const std::filesystem::path& out_dir) {
  if (!cfg.eval) {
    throw ConfigError({"eval: section required by the sweep command"});
  }
  if (controller != "wdr" && controller != "hinf") {
    throw ConfigError({"controller: lambda sweep applies to wdr|hinf"});
  }
  if (use_learn && !cfg.learning) {
    throw ConfigError({"learning: section required for a learned sweep"});
  }
  std::filesystem::create_directories(out_dir);

  std::vector<SweepRow> rows;
  for (double lam : lambdas) {
    SweepRow row;
    row.lambda = lam;
    try {
      const CostSpec cost(cfg.cost.Q, cfg.cost.R, cfg.cost.alpha, lam);
      PolicyPair policy;
      if (controller == "hinf") {
        policy = hinf_policy(cfg.system, cost);
      } else if (use_learn) {
        policy = learn(cfg.system, cost, cfg.samples, *cfg.learning).policy;
      } else {
        policy = solve_dr(cfg.system, cost, cfg.samples).policy;
      }
      const EvalSummary summary = run_eval(cfg.system, cost, policy, *cfg.eval, controller);
      row.mean_x1 = summary.mean_state(0);
      row.var_x1 = summary.var_state(0);
      row.mean_cost = summary.mean_cost;
      row.feasible = true;
    } catch (const std::exception&) {
      row.mean_x1 = std::nan("");
      row.var_x1 = std::nan("");
      row.mean_cost = std::nan("");
      row.feasible = false;
    }
    rows.push_back(row);
  }

  std::string csv = "lambda,mean_x1,var_x1,mean_cost,feasible\n";
  for (const auto& r : rows) {
    csv += format_double(r.lambda);
    csv += ',';
    csv += format_double(r.mean_x1);
    csv += ',';
    csv += format_double(r.var_x1);
    csv += ',';
    csv += format_double(r.mean_cost);
    csv += ',';
    csv += r.feasible ? '1' : '0';
    csv += '\n';
  }
  detail::write_file(out_dir / "sweep.csv", csv);
  return rows;
}

}  // namespace wdrc
