#pragma once

#include <string>
#include <utility>
#include <vector>

#include "wdrc/config.hpp"
#include "wdrc/linalg.hpp"
#include "wdrc/model.hpp"
#include "wdrc/random.hpp"
#include "wdrc/serialize.hpp"

namespace wdrc {

struct EvalSummary {
  std::string controller;
  std::vector<Vector> steady_states;  // state at steady_time_index, per trial
  std::vector<double> costs;          // discounted realized cost, per trial
  Vector mean_state;
  Vector var_state;  // population variance per dimension
  double mean_cost = 0.0;
  int trials = 0;
  int steady_time_index = 0;
};

// Monte Carlo closed-loop study: `trials` independent rollouts of `horizon`
// steps under the configured disturbance. Trial t draws from a stream
// seeded with seed + t, so runs are reproducible and controllers compared
// under identical seeds see identical disturbance realizations.
inline EvalSummary run_eval(const LtiSystem& sys, const CostSpec& cost, const PolicyPair& policy,
                            const EvalConfig& eval, const std::string& controller_id) {
  const int n = sys.state_dim();
  EvalSummary summary;
  summary.controller = controller_id;
  summary.trials = eval.trials;
  summary.steady_time_index = eval.steady_time_index;
  summary.steady_states.reserve(static_cast<std::size_t>(eval.trials));
  summary.costs.reserve(static_cast<std::size_t>(eval.trials));

  for (int t = 0; t < eval.trials; ++t) {
    RandomStream rng(eval.seed + static_cast<std::uint64_t>(t));
    Vector x = eval.x0;
    Vector steady = x;
    double cost_acc = 0.0;
    double discount = 1.0;
    for (int k = 0; k < eval.horizon; ++k) {
      if (k == eval.steady_time_index) steady = x;
      const Vector u = policy.K * x + policy.r;
      cost_acc += discount * (x.dot(cost.Q * x) + u.dot(cost.R * u));
      const Vector w = sample_disturbance(eval.disturbance, rng);
      x = step(sys, x, u, w);
      discount *= cost.alpha;
    }
    if (eval.steady_time_index == eval.horizon) steady = x;
    summary.steady_states.push_back(std::move(steady));
    summary.costs.push_back(cost_acc);
  }

  summary.mean_state = Vector::Zero(n);
  for (const auto& s : summary.steady_states) summary.mean_state += s;
  summary.mean_state /= static_cast<double>(eval.trials);
  summary.var_state = Vector::Zero(n);
  for (const auto& s : summary.steady_states) {
    summary.var_state += (s - summary.mean_state).cwiseAbs2();
  }
  summary.var_state /= static_cast<double>(eval.trials);
  summary.mean_cost = 0.0;
  for (double v : summary.costs) summary.mean_cost += v;
  summary.mean_cost /= static_cast<double>(eval.trials);
  return summary;
}

inline std::string trials_csv(const EvalSummary& s) {
  std::string out = "trial";
  const int n = static_cast<int>(s.mean_state.size());
  for (int i = 1; i <= n; ++i) out += ",x" + std::to_string(i);
  out += ",cost\n";
  for (int t = 0; t < s.trials; ++t) {
    out += std::to_string(t);
    const Vector& st = s.steady_states[static_cast<std::size_t>(t)];
    for (int i = 0; i < n; ++i) {
      out += ',';
      out += format_double(st(i));
    }
    out += ',';
    out += format_double(s.costs[static_cast<std::size_t>(t)]);
    out += '\n';
  }
  return out;
}

inline Json summary_json(const EvalSummary& s) {
  Json j;
  j["controller"] = s.controller;
  j["trials"] = s.trials;
  j["steady_time_index"] = s.steady_time_index;
  j["mean_state"] = detail::vector_json(s.mean_state);
  j["var_state"] = detail::vector_json(s.var_state);
  j["mean_cost"] = s.mean_cost;
  return j;
}

}  // namespace wdrc
