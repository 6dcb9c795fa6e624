#pragma once

// Scenarios, Monte Carlo runs and metrics.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"

#include "edgecache/caching.hpp"
#include "edgecache/csv.hpp"
#include "edgecache/environment.hpp"
#include "edgecache/mdp.hpp"
#include "edgecache/popularity.hpp"
#include "edgecache/q_exact.hpp"
#include "edgecache/q_linear.hpp"
#include "edgecache/rng.hpp"
#include "edgecache/schedules.hpp"
#include "edgecache/simulation.hpp"

namespace edgecache {

// ---------------------------------------------------------------------------
// Networks

struct NetworkSpec {
  std::string preset = "small";
  std::uint64_t seed = 1;
};

struct Network {
  MarkovChain global_chain;
  MarkovChain local_chain;
  std::size_t capacity = 0;
};

/// F = 10, M = 2. Two Zipf states per chain (global exponents 1 and 1.5,
/// local 0.7 and 2.5), each with its own random file ranking drawn from `seed`.
inline Network small_network(std::uint64_t seed = 1) {
  constexpr std::size_t kFiles = 10;
  Rng rng(seed);
  auto state = [&](double eta) { return zipf_profile(kFiles, eta, random_permutation(kFiles, rng)); };
  auto pg1 = state(1.0);
  auto pg2 = state(1.5);
  auto pl1 = state(0.7);
  auto pl2 = state(2.5);
  MarkovChain global({pg1, pg2}, {{0.8, 0.2}, {0.75, 0.25}});
  MarkovChain local({pl1, pl2}, {{0.6, 0.4}, {0.2, 0.8}});
  return {std::move(global), std::move(local), 2};
}

/// F = 1000, M = 10, |P_G| = 50, |P_L| = 40 random chains with Zipf
/// exponents uniform on (2, 4).
inline Network large_network(std::uint64_t seed = 1) {
  Rng rng(seed);
  auto global = random_zipf_chain(50, 1000, 2.0, 4.0, rng);
  auto local = random_zipf_chain(40, 1000, 2.0, 4.0, rng);
  return {std::move(global), std::move(local), 10};
}

inline Network make_network(const NetworkSpec& spec) {
  if (spec.preset == "small") return small_network(spec.seed);
  if (spec.preset == "large") return large_network(spec.seed);
  throw std::invalid_argument("unknown network preset '" + spec.preset + "'");
}

// ---------------------------------------------------------------------------
// Scenario

enum class LearnerKind { Exact, Linear, OraclePolicy, RandomBaseline };

inline std::string to_string(LearnerKind k) {
  switch (k) {
    case LearnerKind::Exact: return "exact";
    case LearnerKind::Linear: return "linear";
    case LearnerKind::OraclePolicy: return "oracle";
    case LearnerKind::RandomBaseline: return "random";
  }
  return "unknown";
}

inline LearnerKind parse_learner_kind(const std::string& s) {
  if (s == "exact") return LearnerKind::Exact;
  if (s == "linear") return LearnerKind::Linear;
  if (s == "oracle" || s == "oracle-policy") return LearnerKind::OraclePolicy;
  if (s == "random" || s == "random-baseline") return LearnerKind::RandomBaseline;
  throw std::invalid_argument("unknown learner kind '" + s + "'");
}

struct Scenario {
  std::string name;
  std::string description;
  std::optional<NetworkSpec> network;  // set when the chains came from a network preset
  MarkovChain global_chain;
  MarkovChain local_chain;
  std::size_t capacity = 2;
  double gamma = 0.8;
  LambdaSchedule lambdas;
  LearnerKind learner = LearnerKind::Exact;
  StepSchedule beta = StepSchedule::constant(0.8);
  EpsilonSchedule epsilon = EpsilonSchedule::constant(0.05);
  double alpha_g = 0.005;
  double alpha_l = 0.005;
  double alpha_r = 0.005;
  std::size_t horizon = 10000;
  std::size_t realizations = 100;
  std::uint64_t seed = 1;
  RevealConfig reveal;

  void set_network(const NetworkSpec& spec) {
    auto net = make_network(spec);
    network = spec;
    global_chain = std::move(net.global_chain);
    local_chain = std::move(net.local_chain);
    capacity = net.capacity;
  }

  std::size_t catalog_size() const noexcept { return global_chain.catalog_size(); }

  QLearnerConfig exact_config() const { return {beta, epsilon, gamma}; }
  LinearLearnerConfig linear_config() const { return {alpha_g, alpha_l, alpha_r, epsilon, gamma}; }

  void validate() const {
    if (global_chain.num_states() == 0 || local_chain.num_states() == 0) {
      throw std::invalid_argument("scenario '" + name + "' has no popularity chains");
    }
    if (global_chain.catalog_size() != local_chain.catalog_size()) {
      throw std::invalid_argument("scenario '" + name + "': chains disagree on the catalog size");
    }
    if (capacity == 0 || capacity > catalog_size()) throw std::invalid_argument("scenario '" + name + "': need 1 <= M <= F");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("scenario '" + name + "': discount must lie in [0, 1)");
    if (horizon == 0) throw std::invalid_argument("scenario '" + name + "': horizon must be >= 1");
    if (realizations == 0) throw std::invalid_argument("scenario '" + name + "': realizations must be >= 1");
    if (learner == LearnerKind::Linear) linear_config().validate();
  }
};

inline void to_json(nlohmann::json& j, const Scenario& s) {
  j = nlohmann::json::object();
  j["name"] = s.name;
  if (!s.description.empty()) j["description"] = s.description;
  if (s.network) {
    j["network"] = {{"preset", s.network->preset}, {"seed", s.network->seed}};
  } else {
    j["global_chain"] = s.global_chain;
    j["local_chain"] = s.local_chain;
  }
  j["cache_size"] = s.capacity;
  j["gamma"] = s.gamma;
  j["lambda_schedule"] = s.lambdas;
  nlohmann::json learner = {{"kind", to_string(s.learner)}, {"epsilon", s.epsilon}, {"beta", s.beta}};
  learner["alpha"] = {{"global", s.alpha_g}, {"local", s.alpha_l}, {"refresh", s.alpha_r}};
  j["learner"] = std::move(learner);
  j["horizon"] = s.horizon;
  j["realizations"] = s.realizations;
  j["seed"] = s.seed;
  j["reveal"] = s.reveal;
}

inline void from_json(const nlohmann::json& j, Scenario& s) {
  s = Scenario{};
  s.name = j.value("name", std::string("custom"));
  s.description = j.value("description", std::string());
  if (j.contains("network")) {
    const auto& n = j.at("network");
    s.set_network({n.value("preset", std::string("small")), n.value("seed", std::uint64_t{1})});
  } else {
    s.global_chain = j.at("global_chain").get<MarkovChain>();
    s.local_chain = j.at("local_chain").get<MarkovChain>();
  }
  if (j.contains("cache_size")) s.capacity = j.at("cache_size").get<std::size_t>();
  s.gamma = j.value("gamma", 0.8);
  s.lambdas = j.at("lambda_schedule").get<LambdaSchedule>();
  if (j.contains("learner")) {
    const auto& l = j.at("learner");
    s.learner = parse_learner_kind(l.value("kind", std::string("exact")));
    if (l.contains("epsilon")) s.epsilon = l.at("epsilon").get<EpsilonSchedule>();
    if (l.contains("beta")) s.beta = l.at("beta").get<StepSchedule>();
    if (l.contains("alpha")) {
      const auto& a = l.at("alpha");
      s.alpha_g = a.value("global", 0.005);
      s.alpha_l = a.value("local", 0.005);
      s.alpha_r = a.value("refresh", 0.005);
    }
  }
  s.horizon = j.value("horizon", std::size_t{10000});
  s.realizations = j.value("realizations", std::size_t{100});
  s.seed = j.value("seed", std::uint64_t{1});
  if (j.contains("reveal")) s.reveal = j.at("reveal").get<RevealConfig>();
  s.validate();
}

// ---------------------------------------------------------------------------
// Presets

/// Large-network exploration: epsilon = 1 for the first 7e5 slots, then 1/(t - 7e5).
inline constexpr std::size_t kLargeNetworkExploreSlots = 700000;
/// SGD step for the large network: 0.005 scaled by the ratio of updated
/// weights per slot, (2 * 8) / (2 * 990), rounded.
inline constexpr double kLargeNetworkStep = 5e-5;

inline std::vector<std::string> preset_names() {
  return {"s1", "s2", "s3", "s4", "s5", "s6", "s7", "s8", "s9", "dynamic"};
}

inline CostParams preset_weights(const std::string& name) {
  if (name == "s1") return {10, 600, 1000};
  if (name == "s2") return {600, 10, 1000};
  if (name == "s3") return {10, 10, 1000};
  if (name == "s4") return {0, 1000, 0};
  if (name == "s5") return {0, 0, 1000};
  if (name == "s6") return {60, 10, 10};
  if (name == "s7") return {100, 20, 20};
  if (name == "s8") return {0, 0, 1000};
  if (name == "s9") return {0, 1000, 600};
  throw std::invalid_argument("no cost weights for preset '" + name + "'");
}

inline Scenario preset(const std::string& name) {
  Scenario s;
  s.name = name;
  if (name == "s1" || name == "s2" || name == "s3") {
    s.set_network({"small", 1});
    s.lambdas = preset_weights(name);
    s.learner = LearnerKind::Exact;
    s.beta = StepSchedule::constant(0.8);
    s.epsilon = EpsilonSchedule::constant(0.05);
    s.description = "small network, tabular Q-learning, beta = 0.8, epsilon = 0.05";
  } else if (name == "s4" || name == "s5") {
    s.set_network({"small", 1});
    s.lambdas = preset_weights(name);
    s.learner = LearnerKind::Linear;
    s.epsilon = EpsilonSchedule::constant(0.05);
    s.description = "small network, linear Q-learning, alpha = 0.005, epsilon = 0.05";
  } else if (name == "s6") {
    s.set_network({"small", 1});
    s.lambdas = preset_weights(name);
    s.learner = LearnerKind::Linear;
    s.beta = StepSchedule::constant(0.7);
    s.epsilon = EpsilonSchedule(ExploreThenExploit{5000});
    s.description = "small network, pure exploration for 5000 slots then pure exploitation";
  } else if (name == "s7" || name == "s8" || name == "s9") {
    s.set_network({"large", 1});
    s.lambdas = preset_weights(name);
    s.learner = LearnerKind::Linear;
    s.epsilon = EpsilonSchedule(ExploreThenInverse{kLargeNetworkExploreSlots});
    // Each update moves 2(F - M) + 1 weights; 0.005 is unstable at F = 1000.
    s.alpha_g = s.alpha_l = s.alpha_r = kLargeNetworkStep;
    s.horizon = 1000000;
    s.realizations = 1;
    s.description = "large network (F = 1000, M = 10), linear Q-learning";
  } else if (name == "dynamic") {
    s.set_network({"small", 1});
    // Illustrative values: local-mismatch weights for the first half,
    // global-mismatch weights for the second.
    s.lambdas = LambdaSchedule({{0, preset_weights("s4")}, {5000, preset_weights("s5")}});
    s.learner = LearnerKind::Linear;
    s.epsilon = EpsilonSchedule::constant(0.05);
    s.description = "operator-steered weights (illustrative): s4 weights, then s5 weights from slot 5000";
  } else {
    throw std::invalid_argument("unknown scenario preset '" + name + "'");
  }
  s.validate();
  return s;
}

/// A preset name, or the path of a JSON scenario file.
inline Scenario load_scenario(const std::string& name_or_path) {
  const auto names = preset_names();
  if (std::find(names.begin(), names.end(), name_or_path) != names.end()) return preset(name_or_path);
  std::ifstream in(name_or_path);
  if (!in) throw std::runtime_error("cannot open scenario file '" + name_or_path + "'");
  try {
    return nlohmann::json::parse(in).get<Scenario>();
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("invalid scenario file '" + name_or_path + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Baseline agents

/// Follows a fixed policy over an enumerated state space.
class PolicyAgent {
 public:
  PolicyAgent(const StateSpace& space, const Policy& policy) : space_(&space), policy_(&policy) {}

  CacheAction select(const SystemState& s, std::size_t, Rng&) { return space_->action((*policy_)[space_->index_of(s)]); }
  void learn(const SystemState&, const CacheAction&, const SystemState&, double, std::size_t) {}
  double last_epsilon() const noexcept { return 0.0; }
  double last_step() const noexcept { return 0.0; }

 private:
  const StateSpace* space_;
  const Policy* policy_;
};

/// Caches a uniformly random M-subset every slot.
class RandomAgent {
 public:
  RandomAgent(std::size_t catalog_size, std::size_t capacity) : files_(catalog_size), capacity_(capacity) {}

  CacheAction select(const SystemState&, std::size_t, Rng& rng) { return random_cache_action(files_, capacity_, rng); }
  void learn(const SystemState&, const CacheAction&, const SystemState&, double, std::size_t) {}
  double last_epsilon() const noexcept { return 1.0; }
  double last_step() const noexcept { return 0.0; }

 private:
  std::size_t files_;
  std::size_t capacity_;
};

/// Uniform action index, drawn as a uniform M-subset rather than by enumerating A.
inline std::size_t random_baseline_action(const ActionSpace& space, Rng& rng) {
  return space.index_of(random_cache_action(space.catalog_size(), space.capacity(), rng));
}

// ---------------------------------------------------------------------------
// Metrics

/// Approximate Q-function of a linear learner over every state-action pair.
inline QTable materialize_q(const LinearParams& params, const StateSpace& space) {
  QTable q(space.size(), space.num_actions());
  std::vector<double> scores(params.catalog_size());
  for (std::size_t s = 0; s < space.size(); ++s) {
    psi_into(params, space.system_state(s), scores);
    for (std::size_t a = 0; a < space.num_actions(); ++a) q(s, a) = uncached_mass(space.action(a), scores);
  }
  return q;
}

/// ||Qhat - Q*||_F / ||Q*||_F.
inline double normalized_q_error(const QTable& qhat, const QTable& qstar) {
  if (qhat.rows() != qstar.rows() || qhat.cols() != qstar.cols()) {
    throw std::invalid_argument("normalized_q_error: shape mismatch");
  }
  const double denom = qstar.norm();
  if (denom == 0.0) throw std::invalid_argument("normalized_q_error: reference Q-function is identically zero");
  return (qhat - qstar).norm() / denom;
}

inline double normalized_q_error(const LinearParams& params, const StateSpace& space, const QTable& qstar) {
  return normalized_q_error(materialize_q(params, space), qstar);
}

/// Half-open slot range [begin, end).
struct SlotWindow {
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct RealizationSummary {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  bool diverged = false;
  std::string error;
  std::vector<double> window_cost;  // mean realized cost per requested window
  std::vector<double> window_hit;   // mean hit fraction per requested window
};

struct MetricsTrace {
  std::size_t horizon = 0;
  std::size_t realizations = 0;  // completed (non-diverged) realizations averaged
  std::vector<double> avg_cost;
  std::vector<double> run_avg_cost;
  std::vector<double> hit_fraction;
  std::vector<double> norm_error;  // NaN on slots without an evaluation; empty when disabled
  std::vector<SlotWindow> windows;
  std::vector<RealizationSummary> runs;
  nlohmann::json metadata = nlohmann::json::object();

  bool has_norm_error() const noexcept { return !norm_error.empty(); }

  std::size_t failures() const {
    return static_cast<std::size_t>(std::count_if(runs.begin(), runs.end(), [](const auto& r) { return r.diverged; }));
  }
};

/// Mean and standard error across realizations of a per-realization statistic.
struct SampleStats {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
};

inline SampleStats sample_stats(const std::vector<double>& xs) {
  SampleStats st;
  st.n = xs.size();
  if (xs.empty()) return st;
  for (double x : xs) st.mean += x;
  st.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - st.mean) * (x - st.mean);
    st.std_error = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
  }
  return st;
}

inline SampleStats window_cost_stats(const MetricsTrace& m, std::size_t w) {
  std::vector<double> xs;
  for (const auto& r : m.runs) {
    if (!r.diverged) xs.push_back(r.window_cost.at(w));
  }
  return sample_stats(xs);
}

inline SampleStats window_hit_stats(const MetricsTrace& m, std::size_t w) {
  std::vector<double> xs;
  for (const auto& r : m.runs) {
    if (!r.diverged) xs.push_back(r.window_hit.at(w));
  }
  return sample_stats(xs);
}

/// Mean over [begin, end) of a per-slot series.
inline double series_mean(const std::vector<double>& xs, std::size_t begin, std::size_t end) {
  if (begin >= end || end > xs.size()) throw std::out_of_range("series_mean: bad range");
  double sum = 0.0;
  for (std::size_t i = begin; i < end; ++i) sum += xs[i];
  return sum / static_cast<double>(end - begin);
}

struct RunOptions {
  std::size_t threads = 0;  // 0: hardware concurrency
  /// Track normalized_q_error against the policy-iteration Q* (small networks only).
  bool oracle_compare = false;
  /// Evaluate the normalized error every `error_stride` slots and at the last slot.
  std::size_t error_stride = 100;
  /// Per-realization summary windows. Empty: the final min(10^4, horizon) slots
  /// plus one window per lambda interval.
  std::vector<SlotWindow> windows;
  /// Every realization reuses the base seed (determinism checks).
  bool identical_seeds = false;
};

namespace detail {

struct RealizationResult {
  std::vector<double> cost;
  std::vector<double> hit;
  std::vector<double> error;  // per checkpoint
  RealizationSummary summary;
};

template <class F>
void parallel_for(std::size_t n, std::size_t threads, F&& body) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t k = 0; k < threads; ++k) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

inline std::vector<SlotWindow> default_windows(const Scenario& s) {
  std::vector<SlotWindow> w;
  const std::size_t tail = std::min<std::size_t>(10000, s.horizon);
  w.push_back({s.horizon - tail, s.horizon});
  const auto& iv = s.lambdas.intervals();
  if (iv.size() > 1) {
    for (std::size_t i = 0; i < iv.size() && iv[i].start < s.horizon; ++i) {
      const std::size_t end = i + 1 < iv.size() ? std::min(iv[i + 1].start, s.horizon) : s.horizon;
      w.push_back({iv[i].start, end});
    }
  }
  return w;
}

}  // namespace detail

inline std::vector<std::size_t> error_checkpoints(std::size_t horizon, std::size_t stride) {
  std::vector<std::size_t> slots;
  if (stride == 0) stride = horizon;
  for (std::size_t k = stride - 1; k < horizon; k += stride) slots.push_back(k);
  if (slots.empty() || slots.back() != horizon - 1) slots.push_back(horizon - 1);
  return slots;
}

/// Runs every realization of `scenario` and averages the per-slot metrics.
/// The result is bit-identical for any thread count: realizations run in
/// fixed blocks and are reduced in index order.
inline MetricsTrace run_scenario(const Scenario& scenario, const RunOptions& options = {}) {
  scenario.validate();
  const std::size_t horizon = scenario.horizon;
  const bool needs_oracle = options.oracle_compare || scenario.learner == LearnerKind::OraclePolicy;
  const bool track_error = options.oracle_compare &&
                           (scenario.learner == LearnerKind::Exact || scenario.learner == LearnerKind::Linear);
  if (scenario.learner == LearnerKind::Exact || needs_oracle) {
    // Tabular methods need an indexable action space; this throws for large catalogs.
    (void)ActionSpace(scenario.catalog_size(), scenario.capacity);
  }

  std::unique_ptr<StateSpace> space;
  if (scenario.learner == LearnerKind::Exact || needs_oracle) {
    space = std::make_unique<StateSpace>(scenario.global_chain, scenario.local_chain, scenario.capacity);
  }
  std::optional<OracleSolution> oracle;
  if (needs_oracle) {
    if (!scenario.lambdas.is_constant()) {
      throw std::invalid_argument("the policy-iteration oracle needs constant cost weights");
    }
    oracle = policy_iteration(*space, scenario.gamma, scenario.lambdas.at(0));
  }

  const auto windows = options.windows.empty() ? detail::default_windows(scenario) : options.windows;
  for (const auto& w : windows) {
    if (w.begin >= w.end || w.end > horizon) throw std::invalid_argument("summary window outside the horizon");
  }
  const auto checkpoints = track_error ? error_checkpoints(horizon, options.error_stride) : std::vector<std::size_t>{};

  auto run_one = [&](std::size_t r) {
    detail::RealizationResult res;
    res.summary.index = r;
    res.summary.seed = options.identical_seeds ? scenario.seed : realization_seed(scenario.seed, r);
    res.cost.reserve(horizon);
    res.hit.reserve(horizon);
    auto streams = SimulationStreams::from_seed(res.summary.seed);
    std::size_t next_checkpoint = 0;

    auto drive = [&](auto& agent, auto&& evaluate) {
      simulate(scenario.global_chain, scenario.local_chain, scenario.capacity, scenario.lambdas, scenario.reveal,
               horizon, agent, streams, [&](const SlotRecord& rec) {
                 res.cost.push_back(rec.cost);
                 res.hit.push_back(rec.hit_fraction);
                 if (next_checkpoint < checkpoints.size() && checkpoints[next_checkpoint] == rec.slot) {
                   res.error.push_back(evaluate(agent));
                   ++next_checkpoint;
                 }
               });
    };

    try {
      switch (scenario.learner) {
        case LearnerKind::Exact: {
          ExactQLearner agent(*space, scenario.exact_config());
          drive(agent, [&](const ExactQLearner& a) { return normalized_q_error(a.q(), oracle->q); });
          break;
        }
        case LearnerKind::Linear: {
          LinearQLearner agent(scenario.global_chain.num_states(), scenario.local_chain.num_states(),
                               scenario.catalog_size(), scenario.capacity, scenario.linear_config());
          drive(agent, [&](const LinearQLearner& a) { return normalized_q_error(a.params(), *space, oracle->q); });
          break;
        }
        case LearnerKind::OraclePolicy: {
          PolicyAgent agent(*space, oracle->policy);
          drive(agent, [](const PolicyAgent&) { return 0.0; });
          break;
        }
        case LearnerKind::RandomBaseline: {
          RandomAgent agent(scenario.catalog_size(), scenario.capacity);
          drive(agent, [](const RandomAgent&) { return 0.0; });
          break;
        }
      }
    } catch (const DivergenceError& e) {
      res.summary.diverged = true;
      res.summary.error = e.what();
      return res;
    }
    for (const auto& w : windows) {
      res.summary.window_cost.push_back(series_mean(res.cost, w.begin, w.end));
      res.summary.window_hit.push_back(series_mean(res.hit, w.begin, w.end));
    }
    return res;
  };

  MetricsTrace m;
  m.horizon = horizon;
  m.windows = windows;
  std::vector<double> cost_sum(horizon, 0.0), hit_sum(horizon, 0.0), err_sum(checkpoints.size(), 0.0);

  constexpr std::size_t kBlock = 16;
  const std::size_t threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  for (std::size_t start = 0; start < scenario.realizations; start += kBlock) {
    const std::size_t n = std::min(kBlock, scenario.realizations - start);
    std::vector<detail::RealizationResult> block(n);
    detail::parallel_for(n, threads, [&](std::size_t i) { block[i] = run_one(start + i); });
    for (auto& res : block) {
      if (!res.summary.diverged) {
        ++m.realizations;
        for (std::size_t k = 0; k < horizon; ++k) {
          cost_sum[k] += res.cost[k];
          hit_sum[k] += res.hit[k];
        }
        for (std::size_t c = 0; c < res.error.size(); ++c) err_sum[c] += res.error[c];
      }
      m.runs.push_back(std::move(res.summary));
    }
  }

  const double count = static_cast<double>(m.realizations);
  if (m.realizations > 0) {
    m.avg_cost.resize(horizon);
    m.run_avg_cost.resize(horizon);
    m.hit_fraction.resize(horizon);
    double running = 0.0;
    for (std::size_t k = 0; k < horizon; ++k) {
      m.avg_cost[k] = cost_sum[k] / count;
      m.hit_fraction[k] = hit_sum[k] / count;
      running += m.avg_cost[k];
      m.run_avg_cost[k] = running / static_cast<double>(k + 1);
    }
    if (track_error) {
      m.norm_error.assign(horizon, std::numeric_limits<double>::quiet_NaN());
      for (std::size_t c = 0; c < checkpoints.size(); ++c) m.norm_error[checkpoints[c]] = err_sum[c] / count;
    }
  }

  m.metadata = {
      {"scenario", scenario.name},
      {"learner", to_string(scenario.learner)},
      {"gamma", scenario.gamma},
      {"horizon", horizon},
      {"seed", scenario.seed},
      {"seed_mixing", options.identical_seeds ? "identical: every realization uses the base seed"
                                              : "realization r uses mix64(mix64(seed) ^ r), mix64 = SplitMix64"},
      {"realizations_requested", scenario.realizations},
      {"realizations_completed", m.realizations},
      {"realizations_diverged", m.failures()},
      {"lambda_schedule", scenario.lambdas},
      {"hit_metric", scenario.reveal.mode == RevealMode::Empirical
                         ? "realized share of sampled local requests served from cache"
                         : "local popularity mass of the cached files"},
  };
  if (track_error) {
    m.metadata["norm_error_metric"] = "||Qhat - Q*||_F / ||Q*||_F, Q* from policy iteration";
    m.metadata["norm_error_stride"] = options.error_stride;
  }
  if (oracle) m.metadata["oracle_policy_iterations"] = oracle->iterations;
  return m;
}

// ---------------------------------------------------------------------------
// Export

/// CSV `slot,avg_cost,run_avg_cost,hit_fraction[,norm_error]` plus a
/// `<path>.meta.json` sidecar with the run metadata.
inline void export_metrics(const MetricsTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << "slot,avg_cost,run_avg_cost,hit_fraction";
  if (trace.has_norm_error()) out << ",norm_error";
  out << '\n';
  for (std::size_t k = 0; k < trace.avg_cost.size(); ++k) {
    out << k << ',' << format_double(trace.avg_cost[k]) << ',' << format_double(trace.run_avg_cost[k]) << ','
        << format_double(trace.hit_fraction[k]);
    if (trace.has_norm_error()) {
      out << ',';
      if (!std::isnan(trace.norm_error[k])) out << format_double(trace.norm_error[k]);
    }
    out << '\n';
  }
  out.flush();
  if (!out) throw std::runtime_error("write to '" + path + "' failed");

  const std::string meta_path = path + ".meta.json";
  std::ofstream meta(meta_path);
  if (!meta) throw std::runtime_error("cannot open '" + meta_path + "' for writing");
  meta << trace.metadata.dump(2) << '\n';
  if (!meta) throw std::runtime_error("write to '" + meta_path + "' failed");
}

/// Reads the per-slot columns written by export_metrics.
inline MetricsTrace read_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("'" + path + "' is empty");
  const bool with_error = line.find("norm_error") != std::string::npos;
  MetricsTrace m;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (with_error && cells.size() == 4) cells.emplace_back();
    if (cells.size() != (with_error ? 5u : 4u)) throw std::runtime_error("malformed row in '" + path + "': " + line);
    m.avg_cost.push_back(std::strtod(cells[1].c_str(), nullptr));
    m.run_avg_cost.push_back(std::strtod(cells[2].c_str(), nullptr));
    m.hit_fraction.push_back(std::strtod(cells[3].c_str(), nullptr));
    if (with_error) {
      m.norm_error.push_back(cells[4].empty() ? std::numeric_limits<double>::quiet_NaN()
                                              : std::strtod(cells[4].c_str(), nullptr));
    }
  }
  m.horizon = m.avg_cost.size();
  return m;
}

}  // namespace edgecache
