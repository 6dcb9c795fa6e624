#pragma once

// Content popularity profiles and the Markov chains that drive them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "edgecache/rng.hpp"

namespace edgecache {

inline constexpr double kProbabilityTolerance = 1e-9;

/// Probability mass over the F files of the catalog. File indices are 0-based
/// in the API; outputs render them 1-based.
class PopularityProfile {
 public:
  PopularityProfile() = default;

  explicit PopularityProfile(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) {
      throw std::invalid_argument("popularity profile needs at least one file");
    }
    double total = 0.0;
    for (double p : probs_) {
      if (!(p >= 0.0) || !std::isfinite(p)) {
        throw std::invalid_argument("popularity entries must be finite and non-negative");
      }
      total += p;
    }
    if (std::abs(total - 1.0) > kProbabilityTolerance) {
      throw std::invalid_argument("popularity entries sum to " + std::to_string(total) +
                                  ", expected 1");
    }
  }

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t f) const { return probs_[f]; }
  std::span<const double> probs() const noexcept { return probs_; }

  friend bool operator==(const PopularityProfile&, const PopularityProfile&) = default;

 private:
  std::vector<double> probs_;
};

/// Total-variation distance, half the L1 norm of the difference.
inline double total_variation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("total_variation: dimension mismatch");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
  return 0.5 * sum;
}

/// Finite set of popularity profiles with a row-stochastic transition matrix.
class MarkovChain {
 public:
  MarkovChain() = default;

  MarkovChain(std::vector<PopularityProfile> states, std::vector<std::vector<double>> transition)
      : states_(std::move(states)), transition_(std::move(transition)) {
    if (states_.empty()) throw std::invalid_argument("Markov chain needs at least one state");
    const std::size_t n = states_.size();
    const std::size_t files = states_.front().size();
    for (const auto& s : states_) {
      if (s.size() != files) {
        throw std::invalid_argument("Markov chain states must share the catalog size");
      }
    }
    if (transition_.size() != n) {
      throw std::invalid_argument("transition matrix must be |states| x |states|");
    }
    for (const auto& row : transition_) {
      if (row.size() != n) {
        throw std::invalid_argument("transition matrix must be |states| x |states|");
      }
      double total = 0.0;
      for (double p : row) {
        if (!(p >= 0.0 && p <= 1.0)) {
          throw std::invalid_argument("transition probabilities must lie in [0,1]");
        }
        total += p;
      }
      if (std::abs(total - 1.0) > kProbabilityTolerance) {
        throw std::invalid_argument("transition rows must sum to 1");
      }
    }
  }

  std::size_t num_states() const noexcept { return states_.size(); }
  std::size_t catalog_size() const noexcept { return states_.empty() ? 0 : states_.front().size(); }
  const PopularityProfile& state(std::size_t i) const { return states_.at(i); }
  const std::vector<PopularityProfile>& states() const noexcept { return states_; }
  std::span<const double> row(std::size_t i) const { return transition_.at(i); }
  double transition(std::size_t from, std::size_t to) const { return transition_.at(from).at(to); }

  /// One-step conditional mean of the next profile: sum_j P[i][j] * states[j].
  std::vector<double> expected_next(std::size_t i) const {
    std::vector<double> mean(catalog_size(), 0.0);
    const auto r = row(i);
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (r[j] == 0.0) continue;
      const auto p = states_[j].probs();
      for (std::size_t f = 0; f < mean.size(); ++f) mean[f] += r[j] * p[f];
    }
    return mean;
  }

  friend bool operator==(const MarkovChain&, const MarkovChain&) = default;

 private:
  std::vector<PopularityProfile> states_;
  std::vector<std::vector<double>> transition_;
};

/// Requests per file observed during one slot.
struct RequestBatch {
  std::vector<std::uint64_t> counts;

  std::uint64_t total() const noexcept {
    std::uint64_t t = 0;
    for (auto c : counts) t += c;
    return t;
  }
};

/// Zipf profile. `ranking[k]` is the file holding popularity rank k+1, so the
/// identity ranking makes file 0 the most popular.
inline PopularityProfile zipf_profile(std::size_t num_files, double eta,
                                      std::span<const std::size_t> ranking) {
  if (num_files == 0) throw std::invalid_argument("zipf_profile: catalog size must be >= 1");
  if (!(eta >= 0.0) || !std::isfinite(eta)) {
    throw std::invalid_argument("zipf_profile: exponent must be finite and >= 0");
  }
  if (ranking.size() != num_files) {
    throw std::invalid_argument("zipf_profile: ranking must be a permutation of the catalog");
  }
  std::vector<char> seen(num_files, 0);
  for (std::size_t f : ranking) {
    if (f >= num_files || seen[f]) {
      throw std::invalid_argument("zipf_profile: ranking must be a permutation of the catalog");
    }
    seen[f] = 1;
  }
  std::vector<double> weight(num_files);
  double norm = 0.0;
  for (std::size_t k = 0; k < num_files; ++k) {
    weight[k] = std::pow(static_cast<double>(k + 1), -eta);
    norm += weight[k];
  }
  std::vector<double> probs(num_files);
  for (std::size_t k = 0; k < num_files; ++k) probs[ranking[k]] = weight[k] / norm;
  return PopularityProfile(std::move(probs));
}

inline PopularityProfile zipf_profile(std::size_t num_files, double eta) {
  std::vector<std::size_t> identity(num_files);
  for (std::size_t i = 0; i < num_files; ++i) identity[i] = i;
  return zipf_profile(num_files, eta, identity);
}

inline std::size_t step_chain(const MarkovChain& chain, std::size_t current, Rng& rng) {
  if (current >= chain.num_states()) throw std::out_of_range("step_chain: state index out of range");
  return sample_categorical(chain.row(current), rng);
}

inline RequestBatch sample_requests(const PopularityProfile& profile, std::uint64_t n, Rng& rng) {
  if (n == 0) throw std::invalid_argument("sample_requests: request count must be >= 1");
  RequestBatch batch{std::vector<std::uint64_t>(profile.size(), 0)};
  // Cumulative table plus binary search keeps large batches cheap.
  std::vector<double> cdf(profile.size());
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t f = 0; f < profile.size(); ++f) {
    acc += profile[f];
    cdf[f] = acc;
    if (profile[f] > 0.0) last_positive = f;
  }
  for (std::uint64_t i = 0; i < n; ++i) {
    const double u = uniform01(rng);
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    std::size_t f = static_cast<std::size_t>(it - cdf.begin());
    if (f > last_positive) f = last_positive;
    ++batch.counts[f];
  }
  return batch;
}

inline PopularityProfile estimate_empirical(const RequestBatch& batch) {
  const std::uint64_t total = batch.total();
  if (total == 0) throw std::invalid_argument("estimate_empirical: batch holds no requests");
  std::vector<double> probs(batch.counts.size());
  for (std::size_t f = 0; f < probs.size(); ++f) {
    probs[f] = static_cast<double>(batch.counts[f]) / static_cast<double>(total);
  }
  return PopularityProfile(std::move(probs));
}

/// Nearest chain state in total variation; ties go to the lowest index.
inline std::size_t quantize_to_state(std::span<const double> profile, const MarkovChain& chain) {
  if (profile.size() != chain.catalog_size()) {
    throw std::invalid_argument("quantize_to_state: dimension mismatch");
  }
  std::size_t best = 0;
  double best_dist = total_variation(profile, chain.state(0).probs());
  for (std::size_t i = 1; i < chain.num_states(); ++i) {
    const double d = total_variation(profile, chain.state(i).probs());
    if (d < best_dist) {
      best = i;
      best_dist = d;
    }
  }
  return best;
}

inline std::size_t quantize_to_state(const PopularityProfile& profile, const MarkovChain& chain) {
  return quantize_to_state(profile.probs(), chain);
}

/// Random chain: Dirichlet(1) transition rows, one Zipf state per row with an
/// exponent uniform on (eta_lo, eta_hi) and a uniformly random file ranking.
inline MarkovChain random_zipf_chain(std::size_t num_states, std::size_t num_files, double eta_lo,
                                     double eta_hi, Rng& rng) {
  if (num_states == 0) throw std::invalid_argument("random_zipf_chain: need at least one state");
  std::vector<PopularityProfile> states;
  states.reserve(num_states);
  for (std::size_t i = 0; i < num_states; ++i) {
    const double eta = eta_lo + (eta_hi - eta_lo) * uniform01(rng);
    const auto ranking = random_permutation(num_files, rng);
    states.push_back(zipf_profile(num_files, eta, ranking));
  }
  std::vector<std::vector<double>> transition;
  transition.reserve(num_states);
  for (std::size_t i = 0; i < num_states; ++i) transition.push_back(dirichlet_uniform(num_states, rng));
  return MarkovChain(std::move(states), std::move(transition));
}

inline void to_json(nlohmann::json& j, const MarkovChain& chain) {
  nlohmann::json states = nlohmann::json::array();
  for (const auto& s : chain.states()) {
    states.push_back(std::vector<double>(s.probs().begin(), s.probs().end()));
  }
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < chain.num_states(); ++i) {
    const auto r = chain.row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  j = nlohmann::json{{"states", std::move(states)}, {"transition", std::move(rows)}};
}

inline void from_json(const nlohmann::json& j, MarkovChain& chain) {
  std::vector<PopularityProfile> states;
  for (const auto& s : j.at("states")) states.emplace_back(s.get<std::vector<double>>());
  chain = MarkovChain(std::move(states), j.at("transition").get<std::vector<std::vector<double>>>());
}

}  // namespace edgecache
