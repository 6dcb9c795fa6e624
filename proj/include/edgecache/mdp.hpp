#pragma once

// The caching problem as a finite MDP with known transition probabilities,
// solved exactly by policy iteration. This is the reference every learner is
// compared against, so it is only meant for small catalogs.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "edgecache/caching.hpp"
#include "edgecache/csv.hpp"
#include "edgecache/popularity.hpp"

namespace edgecache {

using Policy = std::vector<std::size_t>;
using ValueFunction = Eigen::VectorXd;
using QTable = Eigen::MatrixXd;

/// Decoded state index.
struct StateIndex {
  std::size_t g;
  std::size_t l;
  std::size_t a;
};

/// S = P_G x P_L x A, indexed g-major, then l, then action index.
class StateSpace {
 public:
  StateSpace(MarkovChain global_chain, MarkovChain local_chain, std::size_t capacity)
      : global_(std::move(global_chain)),
        local_(std::move(local_chain)),
        actions_(global_.catalog_size(), capacity) {
    if (local_.catalog_size() != global_.catalog_size()) {
      throw std::invalid_argument("global and local chains disagree on the catalog size");
    }
    const std::size_t na = actions_.size();
    action_cache_.reserve(na);
    for (std::size_t a = 0; a < na; ++a) action_cache_.push_back(actions_.at(a));

    global_mismatch_.assign(global_.num_states() * na, 0.0);
    for (std::size_t g = 0; g < global_.num_states(); ++g) {
      const auto mean = global_.expected_next(g);
      for (std::size_t a = 0; a < na; ++a) global_mismatch_[g * na + a] = uncached_mass(action_cache_[a], mean);
    }
    local_mismatch_.assign(local_.num_states() * na, 0.0);
    for (std::size_t l = 0; l < local_.num_states(); ++l) {
      const auto mean = local_.expected_next(l);
      for (std::size_t a = 0; a < na; ++a) local_mismatch_[l * na + a] = uncached_mass(action_cache_[a], mean);
    }
    fetched_.assign(na * na, 0.0);
    for (std::size_t b = 0; b < na; ++b) {
      for (std::size_t a = 0; a < na; ++a) {
        fetched_[b * na + a] = static_cast<double>(newly_fetched(action_cache_[a], action_cache_[b]));
      }
    }
  }

  const MarkovChain& global_chain() const noexcept { return global_; }
  const MarkovChain& local_chain() const noexcept { return local_; }
  const ActionSpace& actions() const noexcept { return actions_; }
  const CacheAction& action(std::size_t a) const { return action_cache_.at(a); }

  std::size_t num_actions() const noexcept { return action_cache_.size(); }
  std::size_t size() const noexcept { return global_.num_states() * local_.num_states() * num_actions(); }

  std::size_t index(std::size_t g, std::size_t l, std::size_t a) const {
    if (g >= global_.num_states() || l >= local_.num_states() || a >= num_actions()) {
      throw std::out_of_range("state component out of range");
    }
    return (g * local_.num_states() + l) * num_actions() + a;
  }

  std::size_t index_of(const SystemState& s) const { return index(s.g, s.l, actions_.index_of(s.action)); }

  StateIndex decode(std::size_t s) const {
    if (s >= size()) throw std::out_of_range("state index out of range");
    const std::size_t na = num_actions();
    const std::size_t a = s % na;
    const std::size_t gl = s / na;
    return {gl / local_.num_states(), gl % local_.num_states(), a};
  }

  SystemState system_state(std::size_t s) const {
    const auto d = decode(s);
    return {d.g, d.l, action_cache_[d.a]};
  }

  /// Mean cost of choosing action `a` in state `s`.
  double expected_cost(std::size_t s, std::size_t a, const CostParams& p) const {
    const auto d = decode(s);
    const std::size_t na = num_actions();
    return p.lambda1 * fetched_[d.a * na + a] + p.lambda2 * local_mismatch_[d.l * na + a] +
           p.lambda3 * global_mismatch_[d.g * na + a];
  }

 private:
  MarkovChain global_;
  MarkovChain local_;
  ActionSpace actions_;
  std::vector<CacheAction> action_cache_;
  std::vector<double> global_mismatch_;  // [g][a]: E[(1-a)^T p_G' | g]
  std::vector<double> local_mismatch_;   // [l][a]
  std::vector<double> fetched_;          // [prev][a]: |a \ prev|
};

/// |S| x |A| table of mean slot costs.
inline Eigen::MatrixXd expected_cost_table(const StateSpace& space, const CostParams& params) {
  Eigen::MatrixXd c(space.size(), space.num_actions());
  for (std::size_t s = 0; s < space.size(); ++s) {
    for (std::size_t a = 0; a < space.num_actions(); ++a) c(s, a) = space.expected_cost(s, a, params);
  }
  return c;
}

inline double transition_prob(const StateSpace& space, std::size_t s, std::size_t a, std::size_t s_next) {
  if (a >= space.num_actions()) throw std::out_of_range("action index out of range");
  const auto from = space.decode(s);
  const auto to = space.decode(s_next);
  if (to.a != a) return 0.0;
  return space.global_chain().transition(from.g, to.g) * space.local_chain().transition(from.l, to.l);
}

namespace detail {

/// E[v(g', l', a) | g, l] for every (g, l, a), laid out like the state index.
inline Eigen::VectorXd expected_next_value(const StateSpace& space, const Eigen::VectorXd& v) {
  const auto& G = space.global_chain();
  const auto& L = space.local_chain();
  const std::size_t na = space.num_actions();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(space.size()));
  for (std::size_t g = 0; g < G.num_states(); ++g) {
    for (std::size_t l = 0; l < L.num_states(); ++l) {
      const std::size_t base = space.index(g, l, 0);
      for (std::size_t g2 = 0; g2 < G.num_states(); ++g2) {
        const double pg = G.transition(g, g2);
        if (pg == 0.0) continue;
        for (std::size_t l2 = 0; l2 < L.num_states(); ++l2) {
          const double p = pg * L.transition(l, l2);
          if (p == 0.0) continue;
          const std::size_t next = space.index(g2, l2, 0);
          for (std::size_t a = 0; a < na; ++a) out(base + a) += p * v(next + a);
        }
      }
    }
  }
  return out;
}

inline void check_gamma(double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("discount must lie in [0, 1)");
}

}  // namespace detail

/// Solves V = c^pi + gamma P^pi V by a dense LU factorization.
inline ValueFunction policy_evaluation(const StateSpace& space, const Policy& policy, double gamma,
                                       const CostParams& params) {
  detail::check_gamma(gamma);
  const std::size_t n = space.size();
  if (policy.size() != n) throw std::invalid_argument("policy length differs from |S|");
  const auto& G = space.global_chain();
  const auto& L = space.local_chain();
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  Eigen::VectorXd c(static_cast<Eigen::Index>(n));
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t a = policy[s];
    if (a >= space.num_actions()) throw std::out_of_range("policy holds an invalid action index");
    const auto d = space.decode(s);
    c(s) = space.expected_cost(s, a, params);
    for (std::size_t g2 = 0; g2 < G.num_states(); ++g2) {
      for (std::size_t l2 = 0; l2 < L.num_states(); ++l2) {
        A(s, space.index(g2, l2, a)) -= gamma * G.transition(d.g, g2) * L.transition(d.l, l2);
      }
    }
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
  ValueFunction v = lu.solve(c);
  if (!v.allFinite()) throw std::runtime_error("policy evaluation: singular system");
  return v;
}

inline QTable q_from_value(const StateSpace& space, const ValueFunction& v, double gamma,
                           const CostParams& params) {
  detail::check_gamma(gamma);
  if (static_cast<std::size_t>(v.size()) != space.size()) {
    throw std::invalid_argument("value function length differs from |S|");
  }
  const Eigen::VectorXd ev = detail::expected_next_value(space, v);
  const std::size_t na = space.num_actions();
  QTable q(space.size(), na);
  for (std::size_t s = 0; s < space.size(); ++s) {
    const auto d = space.decode(s);
    const std::size_t base = space.index(d.g, d.l, 0);
    for (std::size_t a = 0; a < na; ++a) q(s, a) = space.expected_cost(s, a, params) + gamma * ev(base + a);
  }
  return q;
}

/// Row-wise argmin; the lowest action index wins ties.
inline std::size_t argmin_row(const QTable& q, std::size_t s) {
  std::size_t best = 0;
  for (Eigen::Index a = 1; a < q.cols(); ++a) {
    if (q(s, a) < q(s, best)) best = static_cast<std::size_t>(a);
  }
  return best;
}

inline Policy policy_improvement(const StateSpace& space, const QTable& q) {
  if (static_cast<std::size_t>(q.rows()) != space.size()) throw std::invalid_argument("Q table has wrong shape");
  Policy policy(space.size());
  for (std::size_t s = 0; s < policy.size(); ++s) policy[s] = argmin_row(q, s);
  return policy;
}

/// Cache files {1..M} in every state.
inline Policy default_initial_policy(const StateSpace& space) {
  return Policy(space.size(), space.actions().index_of(CacheAction::first_files(
                                  space.actions().catalog_size(), space.actions().capacity())));
}

struct OracleSolution {
  Policy policy;
  ValueFunction value;
  QTable q;
  std::size_t iterations = 0;
};

/// Called after each evaluation with the policy and its value.
using PolicyIterationObserver = std::function<void(const Policy&, const ValueFunction&)>;

inline OracleSolution policy_iteration(const StateSpace& space, double gamma, const CostParams& params,
                                       Policy initial, const PolicyIterationObserver& observer = {},
                                       std::size_t max_iterations = 10000) {
  detail::check_gamma(gamma);
  params.validate();
  OracleSolution sol;
  sol.policy = std::move(initial);
  for (sol.iterations = 1; sol.iterations <= max_iterations; ++sol.iterations) {
    sol.value = policy_evaluation(space, sol.policy, gamma, params);
    if (observer) observer(sol.policy, sol.value);
    sol.q = q_from_value(space, sol.value, gamma, params);
    Policy next = policy_improvement(space, sol.q);
    if (next == sol.policy) return sol;
    sol.policy = std::move(next);
  }
  throw std::runtime_error("policy iteration did not reach a fixed point");
}

inline OracleSolution policy_iteration(const StateSpace& space, double gamma, const CostParams& params) {
  return policy_iteration(space, gamma, params, default_initial_policy(space));
}

/// max_{s,a} |Q(s,a) - cbar(s,a) - gamma sum_s' P min_alpha Q(s', alpha)|
inline double bellman_optimality_residual(const StateSpace& space, const QTable& q, double gamma,
                                          const CostParams& params) {
  if (static_cast<std::size_t>(q.rows()) != space.size() ||
      static_cast<std::size_t>(q.cols()) != space.num_actions()) {
    throw std::invalid_argument("Q table has wrong shape");
  }
  const ValueFunction vmin = q.rowwise().minCoeff();
  const QTable target = q_from_value(space, vmin, gamma, params);
  return (q - target).cwiseAbs().maxCoeff();
}

inline void write_policy_csv(std::ostream& os, const StateSpace& space, const Policy& policy,
                             const ValueFunction& value) {
  os << "state,g_state,l_state,cached,action_index,action,value\n";
  for (std::size_t s = 0; s < space.size(); ++s) {
    const auto d = space.decode(s);
    os << s << ',' << d.g << ',' << d.l << ',' << space.action(d.a).to_string() << ',' << policy[s] << ','
       << space.action(policy[s]).to_string() << ',' << format_double(value(s)) << '\n';
  }
}

inline void write_qtable_csv(std::ostream& os, const StateSpace& space, const QTable& q) {
  os << "state,action_index,action,q\n";
  for (std::size_t s = 0; s < space.size(); ++s) {
    for (std::size_t a = 0; a < space.num_actions(); ++a) {
      os << s << ',' << a << ',' << space.action(a).to_string() << ',' << format_double(q(s, a)) << '\n';
    }
  }
}

}  // namespace edgecache
