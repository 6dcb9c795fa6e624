#pragma once

// Caching actions, the feasible action set, and the slot cost model.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "edgecache/popularity.hpp"
#include "edgecache/rng.hpp"

namespace edgecache {

/// The set of M files held in cache, stored as sorted 0-based indices into a
/// catalog of F files.
class CacheAction {
 public:
  CacheAction() = default;

  CacheAction(std::size_t catalog_size, std::vector<std::size_t> files)
      : catalog_size_(catalog_size), files_(std::move(files)) {
    std::sort(files_.begin(), files_.end());
    if (files_.empty()) throw std::invalid_argument("cache action must hold at least one file");
    if (std::adjacent_find(files_.begin(), files_.end()) != files_.end()) {
      throw std::invalid_argument("cache action holds a duplicate file");
    }
    if (files_.back() >= catalog_size_) {
      throw std::invalid_argument("cache action file index outside the catalog");
    }
  }

  /// Files {0..M-1}.
  static CacheAction first_files(std::size_t catalog_size, std::size_t m) {
    std::vector<std::size_t> files(m);
    for (std::size_t i = 0; i < m; ++i) files[i] = i;
    return CacheAction(catalog_size, std::move(files));
  }

  std::size_t catalog_size() const noexcept { return catalog_size_; }
  std::size_t capacity() const noexcept { return files_.size(); }
  std::span<const std::size_t> files() const noexcept { return files_; }

  bool contains(std::size_t f) const {
    return std::binary_search(files_.begin(), files_.end(), f);
  }

  /// The 0/1 vector a.
  std::vector<double> indicator() const {
    std::vector<double> a(catalog_size_, 0.0);
    for (auto f : files_) a[f] = 1.0;
    return a;
  }

  /// Rendered with 1-based file ids, e.g. "1 3".
  std::string to_string() const {
    std::string out;
    for (std::size_t i = 0; i < files_.size(); ++i) {
      if (i) out += ' ';
      out += std::to_string(files_[i] + 1);
    }
    return out;
  }

  friend bool operator==(const CacheAction&, const CacheAction&) = default;
  friend auto operator<=>(const CacheAction& a, const CacheAction& b) { return a.files_ <=> b.files_; }

 private:
  std::size_t catalog_size_ = 0;
  std::vector<std::size_t> files_;
};

/// Binomial coefficient, saturating at UINT64_MAX.
inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 result = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    result = result * (n - k + i) / i;
    if (result > std::numeric_limits<std::uint64_t>::max()) {
      return std::numeric_limits<std::uint64_t>::max();
    }
  }
  return static_cast<std::uint64_t>(result);
}

/// All C(F, M) actions in lexicographic order. Actions are ranked and unranked
/// on demand through the combinatorial number system, never stored.
class ActionSpace {
 public:
  /// Upper bound on |A| for spaces that are indexed.
  static constexpr std::uint64_t kMaxIndexable = std::uint64_t{1} << 32;

  ActionSpace(std::size_t catalog_size, std::size_t capacity)
      : catalog_size_(catalog_size), capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("cache capacity M must be >= 1");
    if (capacity > catalog_size) throw std::invalid_argument("cache capacity M exceeds catalog size F");
    size_ = binomial(catalog_size, capacity);
    if (size_ > kMaxIndexable) {
      throw std::length_error("action space C(" + std::to_string(catalog_size) + "," +
                              std::to_string(capacity) + ") is too large to index");
    }
  }

  std::size_t catalog_size() const noexcept { return catalog_size_; }
  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(size_); }

  CacheAction at(std::size_t index) const {
    if (index >= size()) throw std::out_of_range("action index out of range");
    std::vector<std::size_t> files;
    files.reserve(capacity_);
    std::uint64_t rest = index;
    std::size_t next = 0;
    for (std::size_t pos = 0; pos < capacity_; ++pos) {
      const std::size_t remaining = capacity_ - pos - 1;
      for (std::size_t f = next;; ++f) {
        const std::uint64_t block = binomial(catalog_size_ - f - 1, remaining);
        if (rest < block) {
          files.push_back(f);
          next = f + 1;
          break;
        }
        rest -= block;
      }
    }
    return CacheAction(catalog_size_, std::move(files));
  }

  std::size_t index_of(const CacheAction& action) const {
    if (action.catalog_size() != catalog_size_ || action.capacity() != capacity_) {
      throw std::invalid_argument("action does not belong to this action space");
    }
    std::uint64_t rank = 0;
    std::size_t next = 0;
    const auto files = action.files();
    for (std::size_t pos = 0; pos < capacity_; ++pos) {
      const std::size_t remaining = capacity_ - pos - 1;
      for (std::size_t f = next; f < files[pos]; ++f) rank += binomial(catalog_size_ - f - 1, remaining);
      next = files[pos] + 1;
    }
    return static_cast<std::size_t>(rank);
  }

 private:
  std::size_t catalog_size_;
  std::size_t capacity_;
  std::uint64_t size_ = 0;
};

inline ActionSpace enumerate_actions(std::size_t catalog_size, std::size_t capacity) {
  return ActionSpace(catalog_size, capacity);
}

/// Uniform M-subset of the catalog (Floyd's sampling; O(M^2), independent of |A|).
inline CacheAction random_cache_action(std::size_t catalog_size, std::size_t capacity, Rng& rng) {
  if (capacity == 0 || capacity > catalog_size) throw std::invalid_argument("need 1 <= M <= F");
  std::vector<std::size_t> files;
  files.reserve(capacity);
  for (std::size_t j = catalog_size - capacity; j < catalog_size; ++j) {
    const std::size_t t = uniform_index(rng, j + 1);
    if (std::find(files.begin(), files.end(), t) == files.end()) {
      files.push_back(t);
    } else {
      files.push_back(j);
    }
  }
  return CacheAction(catalog_size, std::move(files));
}

/// Weights of the refresh, local-mismatch, and global-mismatch costs.
struct CostParams {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double lambda3 = 0.0;

  void validate() const {
    if (!(lambda1 >= 0.0 && lambda2 >= 0.0 && lambda3 >= 0.0)) {
      throw std::invalid_argument("cost weights must be non-negative");
    }
  }

  friend bool operator==(const CostParams&, const CostParams&) = default;
};

inline void to_json(nlohmann::json& j, const CostParams& p) {
  j = nlohmann::json{{"lambda1", p.lambda1}, {"lambda2", p.lambda2}, {"lambda3", p.lambda3}};
}

inline void from_json(const nlohmann::json& j, CostParams& p) {
  p.lambda1 = j.at("lambda1").get<double>();
  p.lambda2 = j.at("lambda2").get<double>();
  p.lambda3 = j.at("lambda3").get<double>();
  p.validate();
}

/// s = (global state, local state, cached files).
struct SystemState {
  std::size_t g = 0;
  std::size_t l = 0;
  CacheAction action;
};

/// Number of files in `a_new` that are not in `a_prev`.
inline std::size_t newly_fetched(const CacheAction& a_new, const CacheAction& a_prev) {
  if (a_new.catalog_size() != a_prev.catalog_size()) {
    throw std::invalid_argument("refresh cost: mismatched catalog sizes");
  }
  const auto x = a_new.files();
  const auto y = a_prev.files();
  std::size_t i = 0, j = 0, common = 0;
  while (i < x.size() && j < y.size()) {
    if (x[i] == y[j]) {
      ++common;
      ++i;
      ++j;
    } else if (x[i] < y[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return x.size() - common;
}

inline double refresh_cost(const CacheAction& a_new, const CacheAction& a_prev, double lambda1) {
  return lambda1 * static_cast<double>(newly_fetched(a_new, a_prev));
}

/// Popularity mass of the files left out of the cache.
inline double uncached_mass(const CacheAction& a, std::span<const double> profile) {
  if (profile.size() != a.catalog_size()) throw std::invalid_argument("mismatch cost: dimension mismatch");
  const auto files = a.files();
  double sum = 0.0;
  std::size_t k = 0;
  for (std::size_t f = 0; f < profile.size(); ++f) {
    if (k < files.size() && files[k] == f) {
      ++k;
      continue;
    }
    sum += profile[f];
  }
  return sum;
}

inline double mismatch_cost(const CacheAction& a, std::span<const double> profile, double lambda) {
  return lambda * uncached_mass(a, profile);
}

inline double mismatch_cost(const CacheAction& a, const PopularityProfile& profile, double lambda) {
  return mismatch_cost(a, profile.probs(), lambda);
}

/// Realized slot cost of caching `a` after `prev`, once the next profiles are revealed.
inline double aggregate_cost(const SystemState& prev, const CacheAction& a,
                             std::span<const double> pG_next, std::span<const double> pL_next,
                             const CostParams& params) {
  return refresh_cost(a, prev.action, params.lambda1) + mismatch_cost(a, pL_next, params.lambda2) +
         mismatch_cost(a, pG_next, params.lambda3);
}

inline double aggregate_cost(const SystemState& prev, const CacheAction& a,
                             const PopularityProfile& pG_next, const PopularityProfile& pL_next,
                             const CostParams& params) {
  return aggregate_cost(prev, a, pG_next.probs(), pL_next.probs(), params);
}

/// Mean slot cost given the current chain states: the mismatch terms use the
/// one-step conditional mean of each next profile.
inline double expected_cost(const SystemState& prev, const CacheAction& a, const MarkovChain& g_chain,
                            const MarkovChain& l_chain, const CostParams& params) {
  if (prev.g >= g_chain.num_states() || prev.l >= l_chain.num_states()) {
    throw std::out_of_range("expected_cost: chain state index out of range");
  }
  if (g_chain.catalog_size() != a.catalog_size() || l_chain.catalog_size() != a.catalog_size()) {
    throw std::invalid_argument("expected_cost: dimension mismatch");
  }
  const auto pG = g_chain.expected_next(prev.g);
  const auto pL = l_chain.expected_next(prev.l);
  return refresh_cost(a, prev.action, params.lambda1) + mismatch_cost(a, pL, params.lambda2) +
         mismatch_cost(a, pG, params.lambda3);
}

}  // namespace edgecache
