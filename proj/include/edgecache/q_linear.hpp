#pragma once

// Q-learning with a linear approximation of the Q-function,
//
//   Qhat(s, a') = psi(s)^T (1 - a'),
//   psi(s)      = ThetaG[g] + ThetaL[l] + thetaR * a,
//
// for s = (g, l, a). The greedy action caches the M largest entries of psi,
// so the action space is never enumerated.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "edgecache/caching.hpp"
#include "edgecache/csv.hpp"
#include "edgecache/schedules.hpp"
#include "edgecache/simulation.hpp"

namespace edgecache {

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// ThetaG (|P_G| x F), ThetaL (|P_L| x F) and the scalar thetaR, zero-initialized.
class LinearParams {
 public:
  LinearParams(std::size_t global_states, std::size_t local_states, std::size_t catalog_size)
      : global_states_(global_states),
        local_states_(local_states),
        files_(catalog_size),
        theta_g_(global_states * catalog_size, 0.0),
        theta_l_(local_states * catalog_size, 0.0) {
    if (global_states == 0 || local_states == 0 || catalog_size == 0) {
      throw std::invalid_argument("linear parameters need non-empty dimensions");
    }
  }

  std::size_t global_states() const noexcept { return global_states_; }
  std::size_t local_states() const noexcept { return local_states_; }
  std::size_t catalog_size() const noexcept { return files_; }
  std::size_t parameter_count() const noexcept { return theta_g_.size() + theta_l_.size() + 1; }

  std::span<double> global_row(std::size_t g) { return {theta_g_.data() + row_offset(g, global_states_), files_}; }
  std::span<const double> global_row(std::size_t g) const {
    return {theta_g_.data() + row_offset(g, global_states_), files_};
  }
  std::span<double> local_row(std::size_t l) { return {theta_l_.data() + row_offset(l, local_states_), files_}; }
  std::span<const double> local_row(std::size_t l) const {
    return {theta_l_.data() + row_offset(l, local_states_), files_};
  }

  double& refresh() noexcept { return theta_r_; }
  double refresh() const noexcept { return theta_r_; }

  bool all_finite() const {
    auto finite = [](double x) { return std::isfinite(x); };
    return std::isfinite(theta_r_) && std::all_of(theta_g_.begin(), theta_g_.end(), finite) &&
           std::all_of(theta_l_.begin(), theta_l_.end(), finite);
  }

  LinearParams scaled(double c) const {
    LinearParams out = *this;
    for (auto& x : out.theta_g_) x *= c;
    for (auto& x : out.theta_l_) x *= c;
    out.theta_r_ *= c;
    return out;
  }

  friend bool operator==(const LinearParams&, const LinearParams&) = default;

 private:
  std::size_t row_offset(std::size_t i, std::size_t rows) const {
    if (i >= rows) throw std::out_of_range("parameter row out of range");
    return i * files_;
  }

  std::size_t global_states_;
  std::size_t local_states_;
  std::size_t files_;
  std::vector<double> theta_g_;
  std::vector<double> theta_l_;
  double theta_r_ = 0.0;
};

struct LinearLearnerConfig {
  double alpha_g = 0.005;
  double alpha_l = 0.005;
  double alpha_r = 0.005;
  EpsilonSchedule epsilon = EpsilonSchedule::constant(0.05);
  double gamma = 0.8;

  void validate() const {
    if (!(alpha_g > 0.0 && alpha_l > 0.0 && alpha_r > 0.0)) throw std::invalid_argument("step sizes must be > 0");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("discount must lie in [0, 1)");
  }
};

inline void check_dimensions(const LinearParams& params, const SystemState& s) {
  if (s.action.catalog_size() != params.catalog_size()) throw std::invalid_argument("catalog size mismatch");
  if (s.g >= params.global_states() || s.l >= params.local_states()) {
    throw std::out_of_range("chain state outside the parameter table");
  }
}

inline void psi_into(const LinearParams& params, const SystemState& s, std::span<double> out) {
  check_dimensions(params, s);
  const auto rg = params.global_row(s.g);
  const auto rl = params.local_row(s.l);
  for (std::size_t f = 0; f < out.size(); ++f) out[f] = rg[f] + rl[f];
  for (auto f : s.action.files()) out[f] += params.refresh();
}

/// Per-file score of leaving the file out of the cache.
inline std::vector<double> psi(const LinearParams& params, const SystemState& s) {
  std::vector<double> out(params.catalog_size());
  psi_into(params, s, out);
  return out;
}

/// Sum of psi over the files `a_next` leaves uncached.
inline double q_hat(const LinearParams& params, const SystemState& s, const CacheAction& a_next) {
  if (a_next.catalog_size() != params.catalog_size()) throw std::invalid_argument("catalog size mismatch");
  return uncached_mass(a_next, psi(params, s));
}

/// The M files with the largest scores; ties go to the lowest file index.
inline CacheAction greedy_top_m(std::span<const double> scores, std::size_t m) {
  if (m == 0 || m > scores.size()) throw std::invalid_argument("greedy_top_m: need 1 <= M <= F");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m), order.end(),
                    [&scores](std::size_t i, std::size_t j) {
                      return scores[i] > scores[j] || (scores[i] == scores[j] && i < j);
                    });
  order.resize(m);
  return CacheAction(scores.size(), std::move(order));
}

inline CacheAction greedy_top_m(const LinearParams& params, const SystemState& s, std::size_t m) {
  return greedy_top_m(psi(params, s), m);
}

/// min over a' of Qhat(s, a'): the psi mass outside the top-M files.
inline double min_q_hat(const LinearParams& params, const SystemState& s, std::size_t m) {
  const auto scores = psi(params, s);
  return uncached_mass(greedy_top_m(scores, m), scores);
}

/// e = cost + gamma min_a' Qhat(s_next, a') - Qhat(s_prev, a).
inline double linear_td_error(const LinearParams& params, const SystemState& s_prev, const CacheAction& a,
                              const SystemState& s_next, double cost, double gamma) {
  return cost + gamma * min_q_hat(params, s_next, a.capacity()) - q_hat(params, s_prev, a);
}

/// Semi-gradient step along +e * grad Qhat(s_prev, a): the uncached entries of
/// ThetaG[g] and ThetaL[l] and, through a_prev^T (1 - a), thetaR.
inline void sgd_update(LinearParams& params, const SystemState& s_prev, const CacheAction& a, double error,
                       const LinearLearnerConfig& config) {
  if (!std::isfinite(error)) throw DivergenceError("linear Q-learning diverged: non-finite TD error");
  check_dimensions(params, s_prev);
  auto rg = params.global_row(s_prev.g);
  auto rl = params.local_row(s_prev.l);
  const auto cached = a.files();
  std::size_t k = 0;
  for (std::size_t f = 0; f < params.catalog_size(); ++f) {
    if (k < cached.size() && cached[k] == f) {
      ++k;
      continue;
    }
    rg[f] += config.alpha_g * error;
    rl[f] += config.alpha_l * error;
  }
  // a_prev^T (1 - a): files of a_prev that a drops.
  const double dropped = static_cast<double>(newly_fetched(s_prev.action, a));
  params.refresh() += config.alpha_r * error * dropped;
  if (!params.all_finite()) throw DivergenceError("linear Q-learning diverged: non-finite parameter");
}

class LinearQLearner {
 public:
  LinearQLearner(std::size_t global_states, std::size_t local_states, std::size_t catalog_size,
                 std::size_t capacity, LinearLearnerConfig config)
      : params_(global_states, local_states, catalog_size), capacity_(capacity), config_(std::move(config)) {
    config_.validate();
    if (capacity == 0 || capacity > catalog_size) throw std::invalid_argument("need 1 <= M <= F");
  }

  const LinearParams& params() const noexcept { return params_; }
  LinearParams& params() noexcept { return params_; }
  const LinearLearnerConfig& config() const noexcept { return config_; }

  CacheAction select(const SystemState& s, std::size_t t, Rng& rng) {
    last_epsilon_ = config_.epsilon.at(t);
    if (bernoulli(rng, last_epsilon_)) return random_cache_action(params_.catalog_size(), capacity_, rng);
    return greedy_top_m(params_, s, capacity_);
  }

  void learn(const SystemState& prev, const CacheAction& a, const SystemState& next, double cost, std::size_t) {
    const double e = linear_td_error(params_, prev, a, next, cost, config_.gamma);
    sgd_update(params_, prev, a, e, config_);
    last_error_ = e;
  }

  double last_epsilon() const noexcept { return last_epsilon_; }
  double last_step() const noexcept { return config_.alpha_g; }
  double last_error() const noexcept { return last_error_; }

 private:
  LinearParams params_;
  std::size_t capacity_;
  LinearLearnerConfig config_;
  double last_epsilon_ = 0.0;
  double last_error_ = 0.0;
};

struct LinearRun {
  Trace trace;
  LinearParams params;
};

/// One realization of linear Q-learning. Deterministic given `seed`.
inline LinearRun run_linear(const MarkovChain& global_chain, const MarkovChain& local_chain, std::size_t capacity,
                            const LinearLearnerConfig& config, const LambdaSchedule& lambdas, RevealConfig reveal,
                            std::size_t horizon, std::uint64_t seed) {
  LinearQLearner learner(global_chain.num_states(), local_chain.num_states(), global_chain.catalog_size(), capacity,
                         config);
  auto streams = SimulationStreams::from_seed(seed);
  Trace trace;
  trace.reserve(horizon);
  simulate(global_chain, local_chain, capacity, lambdas, reveal, horizon, learner, streams,
           [&trace](SlotRecord r) { trace.push_back(std::move(r)); });
  return {std::move(trace), learner.params()};
}

/// Matrices as CSV: one row per chain state, then the scalar.
inline void write_params_csv(std::ostream& os, const LinearParams& params) {
  os << "block,row";
  for (std::size_t f = 0; f < params.catalog_size(); ++f) os << ",file_" << (f + 1);
  os << '\n';
  auto rows = [&](const char* name, std::size_t n, auto get) {
    for (std::size_t i = 0; i < n; ++i) {
      os << name << ',' << i;
      for (double x : get(i)) os << ',' << format_double(x);
      os << '\n';
    }
  };
  rows("theta_g", params.global_states(), [&](std::size_t i) { return params.global_row(i); });
  rows("theta_l", params.local_states(), [&](std::size_t i) { return params.local_row(i); });
  os << "theta_r,0," << format_double(params.refresh()) << '\n';
}

}  // namespace edgecache
