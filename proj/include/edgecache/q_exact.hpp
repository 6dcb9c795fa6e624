#pragma once

// Tabular Q-learning over the full state-action table. The learner never
// sees transition probabilities, only realized costs.

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "edgecache/mdp.hpp"
#include "edgecache/schedules.hpp"
#include "edgecache/simulation.hpp"

namespace edgecache {

struct QLearnerConfig {
  StepSchedule beta = StepSchedule::constant(0.8);
  EpsilonSchedule epsilon = EpsilonSchedule::constant(0.05);
  double gamma = 0.8;

  void validate() const {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("discount must lie in [0, 1)");
  }
};

class ExactQLearner {
 public:
  ExactQLearner(const StateSpace& space, QLearnerConfig config)
      : space_(&space),
        config_(std::move(config)),
        q_(QTable::Zero(static_cast<Eigen::Index>(space.size()), static_cast<Eigen::Index>(space.num_actions()))) {
    config_.validate();
    if (config_.beta.counts_visits()) visits_.assign(space.size() * space.num_actions(), 0);
  }

  const QTable& q() const noexcept { return q_; }
  const StateSpace& space() const noexcept { return *space_; }
  const QLearnerConfig& config() const noexcept { return config_; }

  std::size_t greedy_action(std::size_t s) const { return argmin_row(q_, s); }

  /// Greedy w.p. 1-eps, uniform over A w.p. eps. Always consumes one uniform
  /// draw for the coin, and one more when exploring.
  std::size_t epsilon_greedy_action(std::size_t s, double eps, Rng& rng) const {
    if (s >= space_->size()) throw std::out_of_range("state index out of range");
    if (bernoulli(rng, eps)) return uniform_index(rng, space_->num_actions());
    return greedy_action(s);
  }

  /// Q(s,a) <- (1-beta) Q(s,a) + beta [cost + gamma min_alpha Q(s', alpha)].
  double td_update(std::size_t s_prev, std::size_t a, std::size_t s_next, double cost, double beta, double gamma) {
    const double target = cost + gamma * q_.row(static_cast<Eigen::Index>(s_next)).minCoeff();
    double& entry = q_(static_cast<Eigen::Index>(s_prev), static_cast<Eigen::Index>(a));
    entry = (1.0 - beta) * entry + beta * target;
    return entry;
  }

  CacheAction select(const SystemState& s, std::size_t t, Rng& rng) {
    last_epsilon_ = config_.epsilon.at(t);
    const std::size_t a = epsilon_greedy_action(space_->index_of(s), last_epsilon_, rng);
    return space_->action(a);
  }

  void learn(const SystemState& prev, const CacheAction& a, const SystemState& next, double cost, std::size_t) {
    const std::size_t s = space_->index_of(prev);
    const std::size_t ai = space_->actions().index_of(a);
    const std::size_t s2 = space_->index_of(next);
    std::size_t seen = 0;
    if (!visits_.empty()) seen = visits_[s * space_->num_actions() + ai]++;
    last_step_ = config_.beta.at(seen);
    td_update(s, ai, s2, cost, last_step_, config_.gamma);
  }

  double last_epsilon() const noexcept { return last_epsilon_; }
  double last_step() const noexcept { return last_step_; }

 private:
  const StateSpace* space_;
  QLearnerConfig config_;
  QTable q_;
  std::vector<std::uint64_t> visits_;
  double last_epsilon_ = 0.0;
  double last_step_ = 0.0;
};

struct ExactRun {
  Trace trace;
  QTable q;
};

/// One realization of tabular Q-learning. Deterministic given `seed`.
inline ExactRun run_exact(const StateSpace& space, const QLearnerConfig& config, const LambdaSchedule& lambdas,
                          RevealConfig reveal, std::size_t horizon, std::uint64_t seed) {
  ExactQLearner learner(space, config);
  auto streams = SimulationStreams::from_seed(seed);
  ExactRun run;
  run.trace.reserve(horizon);
  simulate(space.global_chain(), space.local_chain(), space.actions().capacity(), lambdas, reveal, horizon, learner,
           streams, [&run](SlotRecord r) { run.trace.push_back(std::move(r)); });
  run.q = learner.q();
  return run;
}

}  // namespace edgecache
