#pragma once

// Popularity process seen by a cache controller: two independent Markov
// chains whose profiles are revealed once per slot.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "edgecache/popularity.hpp"
#include "edgecache/rng.hpp"

namespace edgecache {

enum class RevealMode {
  /// The true chain states and profiles are revealed.
  TrueState,
  /// Requests are sampled from the true profiles; the revealed profiles are
  /// the empirical frequencies and the revealed states their nearest chain
  /// states.
  Empirical,
};

struct RevealConfig {
  RevealMode mode = RevealMode::TrueState;
  std::uint64_t requests_per_slot = 100;
};

struct Observation {
  std::size_t g;
  std::size_t l;
  std::span<const double> global_profile;
  std::span<const double> local_profile;
  /// Local request counts in empirical mode, null otherwise.
  const RequestBatch* local_requests = nullptr;
};

class PopularityEnvironment {
 public:
  PopularityEnvironment(const MarkovChain& global_chain, const MarkovChain& local_chain, RevealConfig reveal,
                        std::size_t g0, std::size_t l0)
      : global_(global_chain), local_(local_chain), reveal_(reveal), g_(g0), l_(l0) {
    if (g0 >= global_chain.num_states() || l0 >= local_chain.num_states()) {
      throw std::out_of_range("initial chain state out of range");
    }
    if (global_chain.catalog_size() != local_chain.catalog_size()) {
      throw std::invalid_argument("global and local chains disagree on the catalog size");
    }
    if (reveal_.mode == RevealMode::Empirical && reveal_.requests_per_slot == 0) {
      throw std::invalid_argument("empirical mode needs at least one request per slot");
    }
  }

  std::size_t global_state() const noexcept { return g_; }
  std::size_t local_state() const noexcept { return l_; }

  /// Advance both chains one slot and reveal the new popularity information.
  /// The returned spans stay valid until the next call.
  Observation step(Rng& rng) {
    g_ = step_chain(global_, g_, rng);
    l_ = step_chain(local_, l_, rng);
    if (reveal_.mode == RevealMode::TrueState) {
      return {g_, l_, global_.state(g_).probs(), local_.state(l_).probs(), nullptr};
    }
    global_requests_ = sample_requests(global_.state(g_), reveal_.requests_per_slot, rng);
    local_requests_ = sample_requests(local_.state(l_), reveal_.requests_per_slot, rng);
    global_estimate_ = estimate_empirical(global_requests_);
    local_estimate_ = estimate_empirical(local_requests_);
    return {quantize_to_state(global_estimate_, global_), quantize_to_state(local_estimate_, local_),
            global_estimate_.probs(), local_estimate_.probs(), &local_requests_};
  }

 private:
  const MarkovChain& global_;
  const MarkovChain& local_;
  RevealConfig reveal_;
  std::size_t g_;
  std::size_t l_;
  RequestBatch global_requests_;
  RequestBatch local_requests_;
  PopularityProfile global_estimate_;
  PopularityProfile local_estimate_;
};

inline void to_json(nlohmann::json& j, const RevealConfig& r) {
  if (r.mode == RevealMode::TrueState) {
    j = {{"mode", "true_state"}};
  } else {
    j = {{"mode", "empirical"}, {"requests_per_slot", r.requests_per_slot}};
  }
}

inline void from_json(const nlohmann::json& j, RevealConfig& r) {
  const auto mode = j.at("mode").get<std::string>();
  if (mode == "true_state") {
    r = RevealConfig{};
  } else if (mode == "empirical") {
    r = RevealConfig{RevealMode::Empirical, j.value("requests_per_slot", std::uint64_t{100})};
  } else {
    throw std::invalid_argument("unknown reveal mode '" + mode + "'");
  }
}

}  // namespace edgecache
