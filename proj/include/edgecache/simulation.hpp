#pragma once

// Slot loop shared by every caching agent: cache placement, popularity
// reveal, cost, learning update.

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "json.hpp"

#include "edgecache/caching.hpp"
#include "edgecache/csv.hpp"
#include "edgecache/environment.hpp"
#include "edgecache/popularity.hpp"
#include "edgecache/rng.hpp"

namespace edgecache {

/// Piecewise-constant cost weights over 0-based slots. Each entry applies from
/// its start slot (inclusive) up to the next entry's start.
class LambdaSchedule {
 public:
  struct Interval {
    std::size_t start = 0;
    CostParams params;
  };

  LambdaSchedule() : intervals_{{0, CostParams{}}} {}
  LambdaSchedule(CostParams constant) : intervals_{{0, constant}} {  // NOLINT(google-explicit-constructor)
    constant.validate();
  }
  explicit LambdaSchedule(std::vector<Interval> intervals) : intervals_(std::move(intervals)) {
    if (intervals_.empty() || intervals_.front().start != 0) {
      throw std::invalid_argument("lambda schedule must start at slot 0");
    }
    for (std::size_t i = 0; i < intervals_.size(); ++i) {
      intervals_[i].params.validate();
      if (i > 0 && intervals_[i].start <= intervals_[i - 1].start) {
        throw std::invalid_argument("lambda schedule starts must be strictly increasing");
      }
    }
  }

  const CostParams& at(std::size_t slot) const {
    std::size_t i = intervals_.size() - 1;
    while (intervals_[i].start > slot) --i;
    return intervals_[i].params;
  }

  bool is_constant() const noexcept { return intervals_.size() == 1; }
  const std::vector<Interval>& intervals() const noexcept { return intervals_; }

 private:
  std::vector<Interval> intervals_;
};

inline void to_json(nlohmann::json& j, const LambdaSchedule& s) {
  j = nlohmann::json::array();
  for (const auto& iv : s.intervals()) {
    nlohmann::json e = iv.params;
    e["start"] = iv.start;
    j.push_back(std::move(e));
  }
}

inline void from_json(const nlohmann::json& j, LambdaSchedule& s) {
  std::vector<LambdaSchedule::Interval> intervals;
  for (const auto& e : j) intervals.push_back({e.value("start", std::size_t{0}), e.get<CostParams>()});
  s = LambdaSchedule(std::move(intervals));
}

/// Share of the local demand served from cache, taken as the cached local mass.
inline double cache_hit_fraction(const CacheAction& a, std::span<const double> local_profile) {
  if (local_profile.size() != a.catalog_size()) throw std::invalid_argument("cache_hit_fraction: dimension mismatch");
  double hit = 0.0;
  for (auto f : a.files()) hit += local_profile[f];
  return hit;
}

inline double cache_hit_fraction(const CacheAction& a, const PopularityProfile& local_profile) {
  return cache_hit_fraction(a, local_profile.probs());
}

/// Realized share of the slot's requests that hit the cache.
inline double cache_hit_fraction(const CacheAction& a, const RequestBatch& requests) {
  if (requests.counts.size() != a.catalog_size()) throw std::invalid_argument("cache_hit_fraction: dimension mismatch");
  const auto total = requests.total();
  if (total == 0) return 0.0;
  std::uint64_t hits = 0;
  for (auto f : a.files()) hits += requests.counts[f];
  return static_cast<double>(hits) / static_cast<double>(total);
}

struct SlotRecord {
  std::size_t slot = 0;  // 0-based
  std::size_t g = 0;     // revealed state after the slot
  std::size_t l = 0;
  CacheAction action;
  double cost = 0.0;
  double hit_fraction = 0.0;
  double epsilon = 0.0;
  double step = 0.0;
};

using Trace = std::vector<SlotRecord>;

inline void write_trace_csv(std::ostream& os, const Trace& trace) {
  os << "slot,g_state,l_state,action,realized_cost,epsilon,beta\n";
  for (const auto& r : trace) {
    os << r.slot << ',' << r.g << ',' << r.l << ',' << r.action.to_string() << ',' << format_double(r.cost) << ','
       << format_double(r.epsilon) << ',' << format_double(r.step) << '\n';
  }
}

/// A cache controller. `select` picks the cache contents for slot t (t >= 1)
/// given the state at the end of slot t-1; `learn` sees the realized cost.
template <class A>
concept CachingAgent = requires(A agent, const A& cagent, const SystemState& s, const CacheAction& a, double cost,
                                std::size_t t, Rng& rng) {
  { agent.select(s, t, rng) } -> std::same_as<CacheAction>;
  agent.learn(s, a, s, cost, t);
  { cagent.last_epsilon() } -> std::convertible_to<double>;
  { cagent.last_step() } -> std::convertible_to<double>;
};

/// Initial state: uniform chain states, files {1..M} cached.
inline SystemState initial_state(const MarkovChain& global_chain, const MarkovChain& local_chain,
                                 std::size_t capacity, Rng& rng) {
  const std::size_t g = uniform_index(rng, global_chain.num_states());
  const std::size_t l = uniform_index(rng, local_chain.num_states());
  return {g, l, CacheAction::first_files(global_chain.catalog_size(), capacity)};
}

struct SimulationStreams {
  Rng environment;
  Rng agent;

  /// Separate streams keep the popularity trajectory of a seed identical
  /// whichever agent runs on it.
  static SimulationStreams from_seed(std::uint64_t seed) { return {substream(seed, 0), substream(seed, 1)}; }
};

/// Runs `horizon` slots and hands every SlotRecord to `sink`. Returns the final state.
template <CachingAgent Agent, class Sink>
SystemState simulate(const MarkovChain& global_chain, const MarkovChain& local_chain, std::size_t capacity,
                     const LambdaSchedule& lambdas, RevealConfig reveal, std::size_t horizon, Agent& agent,
                     SimulationStreams& streams, Sink&& sink) {
  if (horizon == 0) throw std::invalid_argument("horizon must be >= 1");
  SystemState state = initial_state(global_chain, local_chain, capacity, streams.environment);
  PopularityEnvironment env(global_chain, local_chain, reveal, state.g, state.l);
  for (std::size_t slot = 0; slot < horizon; ++slot) {
    const std::size_t t = slot + 1;
    CacheAction action = agent.select(state, t, streams.agent);
    const Observation obs = env.step(streams.environment);
    const double cost = aggregate_cost(state, action, obs.global_profile, obs.local_profile, lambdas.at(slot));
    const double hit = obs.local_requests ? cache_hit_fraction(action, *obs.local_requests)
                                          : cache_hit_fraction(action, obs.local_profile);
    SystemState next{obs.g, obs.l, std::move(action)};
    agent.learn(state, next.action, next, cost, t);
    sink(SlotRecord{slot, next.g, next.l, next.action, cost, hit, agent.last_epsilon(), agent.last_step()});
    state = std::move(next);
  }
  return state;
}

}  // namespace edgecache
