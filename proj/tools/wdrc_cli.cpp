// Command-line front end: solve | learn | eval | sweep over experiment
// config files. Exit codes: 0 success, 1 config error, 2 solver error,
// 3 learning error.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wdrc/commands.hpp"

namespace {

std::vector<double> parse_lambda_grid(const std::string& text) {
  // "a:b:k" -> k points linearly spaced from a to b.
  const auto first = text.find(':');
  const auto second = text.find(':', first == std::string::npos ? 0 : first + 1);
  if (first == std::string::npos || second == std::string::npos) {
    throw wdrc::ConfigError({"lambda-grid: expected a:b:k, got '" + text + "'"});
  }
  const double a = wdrc::parse_double(text.substr(0, first));
  const double b = wdrc::parse_double(text.substr(first + 1, second - first - 1));
  const int k = std::stoi(text.substr(second + 1));
  if (k < 1) throw wdrc::ConfigError({"lambda-grid: need at least one point"});
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    grid.push_back(k == 1 ? a : a + (b - a) * i / (k - 1));
  }
  return grid;
}

struct Options {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::string controller = "wdr";
  std::string lambda_grid = "0.22:10:20";
  std::string policy_path;
  bool dump_theta = false;
  bool use_learn = false;
};

wdrc::ExperimentConfig load_config(const Options& opt) {
  wdrc::ExperimentConfig cfg = wdrc::parse_config(opt.config_path);
  if (opt.seed) {
    if (cfg.learning) cfg.learning->seed = *opt.seed;
    if (cfg.eval) cfg.eval->seed = *opt.seed;
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wasserstein distributionally robust LQ control toolkit"};
  app.require_subcommand(1);

  Options opt;
  auto add_common = [&opt](CLI::App* cmd) {
    cmd->add_option("--config", opt.config_path, "experiment config JSON")->required();
    cmd->add_option("--out", opt.out_dir, "output directory")->required();
    cmd->add_option("--seed", opt.seed, "override learning/eval seeds");
  };

  CLI::App* solve = app.add_subcommand("solve", "model-based game solve");
  add_common(solve);

  CLI::App* learn = app.add_subcommand("learn", "model-free Q-learning");
  add_common(learn);
  learn->add_flag("--dump-theta", opt.dump_theta, "write a theta CSV per iteration");

  CLI::App* eval = app.add_subcommand("eval", "Monte Carlo closed-loop evaluation");
  add_common(eval);
  eval->add_option("--controller", opt.controller, "wdr|lqr|hinf")
      ->check(CLI::IsMember({"wdr", "lqr", "hinf"}));
  eval->add_option("--policy", opt.policy_path, "evaluate a policy.csv instead of solving");

  CLI::App* sweep = app.add_subcommand("sweep", "evaluate over a lambda grid");
  add_common(sweep);
  sweep->add_option("--controller", opt.controller, "wdr|hinf")
      ->check(CLI::IsMember({"wdr", "lqr", "hinf"}));
  sweep->add_option("--lambda-grid", opt.lambda_grid, "a:b:k linear grid (default 0.22:10:20)");
  sweep->add_flag("--use-learn", opt.use_learn, "learn instead of solving at each lambda");

  CLI11_PARSE(app, argc, argv);

  const bool learning_command = learn->parsed() || (sweep->parsed() && opt.use_learn);
  try {
    const wdrc::ExperimentConfig cfg = load_config(opt);
    if (solve->parsed()) {
      const wdrc::SolveReport rep = wdrc::cmd_solve(cfg, opt.out_dir);
      std::cout << "solve: feasible=" << (rep.feasible ? "true" : "false")
                << " iterations=" << rep.iterations << " rho_closed=" << rep.rho_closed
                << " rho_game=" << rep.rho_game << "\n";
    } else if (learn->parsed()) {
      const wdrc::LearnResult res = wdrc::cmd_learn(cfg, opt.out_dir, opt.dump_theta);
      std::cout << "learn: iterations=" << res.logs.size()
                << " converged=" << (res.converged ? "true" : "false")
                << " final_delta=" << res.final_delta << "\n";
    } else if (eval->parsed()) {
      std::optional<std::filesystem::path> policy;
      if (!opt.policy_path.empty()) policy = opt.policy_path;
      const wdrc::EvalSummary s = wdrc::cmd_eval(cfg, opt.controller, policy, opt.out_dir);
      std::cout << "eval: controller=" << s.controller << " trials=" << s.trials
                << " mean_x1=" << s.mean_state(0) << " mean_cost=" << s.mean_cost << "\n";
    } else if (sweep->parsed()) {
      const auto rows = wdrc::cmd_sweep(cfg, parse_lambda_grid(opt.lambda_grid), opt.controller,
                                        opt.use_learn, opt.out_dir);
      int feasible = 0;
      for (const auto& r : rows) feasible += r.feasible ? 1 : 0;
      std::cout << "sweep: " << rows.size() << " rows, " << feasible << " feasible\n";
    }
    return 0;
  } catch (const wdrc::ConfigError& e) {
    std::cerr << "config error:\n" << e.what() << "\n";
    return 1;
  } catch (const wdrc::ExcitationError& e) {
    std::cerr << "learning error: " << e.what() << "\n";
    return 3;
  } catch (const wdrc::RolloutDivergence& e) {
    std::cerr << "learning error: " << e.what() << "\n";
    return 3;
  } catch (const wdrc::SaddleStructureError& e) {
    std::cerr << (learning_command ? "learning error: " : "solver error: ") << e.what() << "\n";
    return learning_command ? 3 : 2;
  } catch (const wdrc::ContractViolation& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 2;
  }
}
