#pragma once

// Exploration and step-size schedules. Iterations are counted from t = 1.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <variant>

#include "json.hpp"

namespace edgecache {

struct ConstantEpsilon {
  double value = 0.05;
};
/// epsilon_t = 1/t.
struct InverseTimeEpsilon {};
/// epsilon_t = 1 for t <= explore_slots, then 0.
struct ExploreThenExploit {
  std::size_t explore_slots = 0;
};
/// epsilon_t = 1 for t <= explore_slots, then 1/(t - explore_slots).
struct ExploreThenInverse {
  std::size_t explore_slots = 0;
};

class EpsilonSchedule {
 public:
  using Kind = std::variant<ConstantEpsilon, InverseTimeEpsilon, ExploreThenExploit, ExploreThenInverse>;

  EpsilonSchedule() = default;
  EpsilonSchedule(Kind kind) : kind_(kind) {  // NOLINT(google-explicit-constructor)
    if (const auto* c = std::get_if<ConstantEpsilon>(&kind_); c && !(c->value >= 0.0 && c->value <= 1.0)) {
      throw std::invalid_argument("epsilon must lie in [0, 1]");
    }
  }

  static EpsilonSchedule constant(double eps) { return EpsilonSchedule(ConstantEpsilon{eps}); }

  double at(std::size_t t) const {
    if (t == 0) throw std::invalid_argument("iterations are counted from 1");
    return std::visit(
        [t](const auto& k) -> double {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, ConstantEpsilon>) {
            return k.value;
          } else if constexpr (std::is_same_v<K, InverseTimeEpsilon>) {
            return 1.0 / static_cast<double>(t);
          } else if constexpr (std::is_same_v<K, ExploreThenExploit>) {
            return t <= k.explore_slots ? 1.0 : 0.0;
          } else {
            return t <= k.explore_slots ? 1.0 : 1.0 / static_cast<double>(t - k.explore_slots);
          }
        },
        kind_);
  }

  const Kind& kind() const noexcept { return kind_; }

 private:
  Kind kind_ = ConstantEpsilon{};
};

struct ConstantStep {
  double value = 0.8;
};
/// beta = 1 / (1 + number of earlier updates of the same state-action pair).
struct VisitCountStep {};

class StepSchedule {
 public:
  using Kind = std::variant<ConstantStep, VisitCountStep>;

  StepSchedule() = default;
  StepSchedule(Kind kind) : kind_(kind) {  // NOLINT(google-explicit-constructor)
    if (const auto* c = std::get_if<ConstantStep>(&kind_); c && !(c->value > 0.0 && c->value <= 1.0)) {
      throw std::invalid_argument("step size must lie in (0, 1]");
    }
  }

  static StepSchedule constant(double beta) { return StepSchedule(ConstantStep{beta}); }

  /// `visits` is how often the pair was updated before.
  double at(std::size_t visits) const {
    if (const auto* c = std::get_if<ConstantStep>(&kind_)) return c->value;
    return 1.0 / (1.0 + static_cast<double>(visits));
  }

  bool counts_visits() const noexcept { return std::holds_alternative<VisitCountStep>(kind_); }
  const Kind& kind() const noexcept { return kind_; }

 private:
  Kind kind_ = ConstantStep{};
};

inline void to_json(nlohmann::json& j, const EpsilonSchedule& e) {
  std::visit(
      [&j](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, ConstantEpsilon>) {
          j = {{"kind", "constant"}, {"value", k.value}};
        } else if constexpr (std::is_same_v<K, InverseTimeEpsilon>) {
          j = {{"kind", "inverse_time"}};
        } else if constexpr (std::is_same_v<K, ExploreThenExploit>) {
          j = {{"kind", "explore_then_exploit"}, {"explore_slots", k.explore_slots}};
        } else {
          j = {{"kind", "explore_then_inverse"}, {"explore_slots", k.explore_slots}};
        }
      },
      e.kind());
}

inline void from_json(const nlohmann::json& j, EpsilonSchedule& e) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "constant") {
    e = EpsilonSchedule(ConstantEpsilon{j.at("value").get<double>()});
  } else if (kind == "inverse_time") {
    e = EpsilonSchedule(InverseTimeEpsilon{});
  } else if (kind == "explore_then_exploit") {
    e = EpsilonSchedule(ExploreThenExploit{j.at("explore_slots").get<std::size_t>()});
  } else if (kind == "explore_then_inverse") {
    e = EpsilonSchedule(ExploreThenInverse{j.at("explore_slots").get<std::size_t>()});
  } else {
    throw std::invalid_argument("unknown epsilon schedule '" + kind + "'");
  }
}

inline void to_json(nlohmann::json& j, const StepSchedule& s) {
  if (const auto* c = std::get_if<ConstantStep>(&s.kind())) {
    j = {{"kind", "constant"}, {"value", c->value}};
  } else {
    j = {{"kind", "visit_count"}};
  }
}

inline void from_json(const nlohmann::json& j, StepSchedule& s) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "constant") {
    s = StepSchedule(ConstantStep{j.at("value").get<double>()});
  } else if (kind == "visit_count") {
    s = StepSchedule(VisitCountStep{});
  } else {
    throw std::invalid_argument("unknown step schedule '" + kind + "'");
  }
}

}  // namespace edgecache
