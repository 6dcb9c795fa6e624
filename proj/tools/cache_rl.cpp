// cache-rl: run caching scenarios, list presets, dump the optimal policy.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "edgecache/experiments.hpp"

namespace ec = edgecache;

namespace {

constexpr int kConfigError = 2;
constexpr int kDiverged = 3;

struct RunArgs {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> horizon;
  std::optional<std::size_t> realizations;
  std::optional<std::string> learner;
  std::string out;
  bool oracle_compare = false;
  std::size_t threads = 0;
  std::size_t stride = 100;
};

int cmd_run(const RunArgs& args) {
  ec::Scenario s = ec::load_scenario(args.scenario);
  if (args.seed) s.seed = *args.seed;
  if (args.horizon) s.horizon = *args.horizon;
  if (args.realizations) s.realizations = *args.realizations;
  if (args.learner) s.learner = ec::parse_learner_kind(*args.learner);

  ec::RunOptions opt;
  opt.threads = args.threads;
  opt.oracle_compare = args.oracle_compare;
  opt.error_stride = args.stride;
  const auto m = ec::run_scenario(s, opt);

  std::printf("scenario      %s (%s learner)\n", s.name.c_str(), ec::to_string(s.learner).c_str());
  std::printf("realizations  %zu completed, %zu diverged\n", m.realizations, m.failures());
  for (const auto& r : m.runs) {
    if (r.diverged) std::fprintf(stderr, "realization %zu (seed %llu): %s\n", r.index,
                                 static_cast<unsigned long long>(r.seed), r.error.c_str());
  }
  if (m.realizations > 0) {
    const auto& w = m.windows.front();
    const auto cost = ec::window_cost_stats(m, 0);
    const auto hit = ec::window_hit_stats(m, 0);
    std::printf("slots         %zu\n", s.horizon);
    std::printf("window        [%zu, %zu)\n", w.begin, w.end);
    std::printf("avg cost      %.6g +- %.2g\n", cost.mean, cost.std_error);
    std::printf("hit fraction  %.6g +- %.2g\n", hit.mean, hit.std_error);
    std::printf("run avg cost  %.6g\n", m.run_avg_cost.back());
    if (m.has_norm_error()) std::printf("norm error    %.6g\n", m.norm_error.back());
  }
  if (!args.out.empty()) {
    ec::export_metrics(m, args.out);
    std::printf("wrote         %s\n", args.out.c_str());
  }
  return m.failures() > 0 ? kDiverged : 0;
}

int cmd_presets() {
  for (const auto& name : ec::preset_names()) {
    const auto s = ec::preset(name);
    std::printf("%-8s %-7s", name.c_str(), ec::to_string(s.learner).c_str());
    for (const auto& iv : s.lambdas.intervals()) {
      std::printf(" [from %zu: l1=%g l2=%g l3=%g]", iv.start, iv.params.lambda1, iv.params.lambda2,
                  iv.params.lambda3);
    }
    std::printf("\n         %s\n", s.description.c_str());
  }
  std::printf("\nnetworks\n");
  const auto small = ec::small_network();
  std::printf("  small    F=%zu M=%zu |P_G|=%zu |P_L|=%zu |A|=%zu\n", small.global_chain.catalog_size(),
              small.capacity, small.global_chain.num_states(), small.local_chain.num_states(),
              ec::ActionSpace(small.global_chain.catalog_size(), small.capacity).size());
  std::printf("  large    F=1000 M=10 |P_G|=50 |P_L|=40, random Zipf chains (eta in (2,4))\n");
  return 0;
}

int cmd_oracle(const std::string& scenario, const std::string& out_dir) {
  const auto s = ec::load_scenario(scenario);
  if (!s.lambdas.is_constant()) throw std::invalid_argument("the oracle needs constant cost weights");
  const ec::StateSpace space(s.global_chain, s.local_chain, s.capacity);
  const auto sol = ec::policy_iteration(space, s.gamma, s.lambdas.at(0));
  if (out_dir.empty()) {
    ec::write_policy_csv(std::cout, space, sol.policy, sol.value);
    std::cout << '\n';
    ec::write_qtable_csv(std::cout, space, sol.q);
    return 0;
  }
  std::filesystem::create_directories(out_dir);
  const auto policy_path = std::filesystem::path(out_dir) / "policy.csv";
  const auto q_path = std::filesystem::path(out_dir) / "qtable.csv";
  std::ofstream policy_out(policy_path), q_out(q_path);
  if (!policy_out || !q_out) throw std::runtime_error("cannot write into '" + out_dir + "'");
  ec::write_policy_csv(policy_out, space, sol.policy, sol.value);
  ec::write_qtable_csv(q_out, space, sol.q);
  std::printf("|S|=%zu |A|=%zu, %zu policy iterations, Bellman residual %.3g\n", space.size(),
              space.num_actions(), sol.iterations,
              ec::bellman_optimality_residual(space, sol.q, s.gamma, s.lambdas.at(0)));
  std::printf("wrote %s and %s\n", policy_path.c_str(), q_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reinforcement-learning cache placement for a small basestation"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "simulate a scenario and report averaged metrics");
  run_cmd->add_option("--scenario", run.scenario, "preset name or scenario JSON file")->required();
  run_cmd->add_option("--seed", run.seed, "base seed");
  run_cmd->add_option("--horizon", run.horizon, "slots per realization");
  run_cmd->add_option("--realizations", run.realizations, "Monte Carlo realizations");
  run_cmd->add_option("--learner", run.learner, "exact | linear | oracle | random");
  run_cmd->add_option("--out", run.out, "metrics CSV path");
  run_cmd->add_flag("--oracle-compare", run.oracle_compare, "track the normalized Q error against policy iteration");
  run_cmd->add_option("--error-stride", run.stride, "slots between normalized-error evaluations");
  run_cmd->add_option("--threads", run.threads, "worker threads (0: all cores)");

  app.add_subcommand("presets", "list the built-in scenarios and networks");

  std::string oracle_scenario, oracle_out;
  auto* oracle_cmd = app.add_subcommand("oracle", "solve a scenario by policy iteration; print pi*, V*, Q* as CSV");
  oracle_cmd->add_option("--scenario", oracle_scenario, "preset name or scenario JSON file")->required();
  oracle_cmd->add_option("--out-dir", oracle_out, "write policy.csv and qtable.csv here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigError;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*oracle_cmd) return cmd_oracle(oracle_scenario, oracle_out);
    return cmd_presets();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "cache-rl: %s\n", e.what());
    return kConfigError;
  }
}
