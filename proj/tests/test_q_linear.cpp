#include <gtest/gtest.h>

#include <sstream>

#include "edgecache/experiments.hpp"
#include "oracles.hpp"

using namespace edgecache;

namespace {

CacheAction act(std::size_t f, std::vector<std::size_t> one_based) {
  for (auto& x : one_based) --x;
  return CacheAction(f, std::move(one_based));
}

void fill_random(LinearParams& p, Rng& rng, double scale = 10.0) {
  for (std::size_t g = 0; g < p.global_states(); ++g) {
    for (auto& x : p.global_row(g)) x = scale * (2 * uniform01(rng) - 1);
  }
  for (std::size_t l = 0; l < p.local_states(); ++l) {
    for (auto& x : p.local_row(l)) x = scale * (2 * uniform01(rng) - 1);
  }
  p.refresh() = scale * (2 * uniform01(rng) - 1);
}

/// Parameters as one flat vector: ThetaG, ThetaL, thetaR.
std::vector<double*> flat(LinearParams& p) {
  std::vector<double*> out;
  for (std::size_t g = 0; g < p.global_states(); ++g) {
    for (auto& x : p.global_row(g)) out.push_back(&x);
  }
  for (std::size_t l = 0; l < p.local_states(); ++l) {
    for (auto& x : p.local_row(l)) out.push_back(&x);
  }
  out.push_back(&p.refresh());
  return out;
}

}  // namespace

TEST(Psi, Examples) {
  LinearParams p(2, 3, 4);
  const SystemState s{1, 2, act(4, {1, 3})};
  EXPECT_EQ(psi(p, s), (std::vector<double>{0, 0, 0, 0}));
  p.refresh() = 2;
  EXPECT_EQ(psi(p, s), (std::vector<double>{2, 0, 2, 0}));
  p.refresh() = 0;
  for (auto& x : p.global_row(1)) x = 1;
  const std::vector<double> l{0, 1, 0, 1};
  std::copy(l.begin(), l.end(), p.local_row(2).begin());
  EXPECT_EQ(psi(p, s), (std::vector<double>{1, 2, 1, 2}));
  EXPECT_THROW(psi(p, SystemState{2, 0, act(4, {1})}), std::out_of_range);
  EXPECT_THROW(psi(p, SystemState{0, 0, act(5, {1})}), std::invalid_argument);
}

TEST(QHat, Examples) {
  LinearParams p(1, 1, 3);
  const std::vector<double> g{5, 1, 3};
  std::copy(g.begin(), g.end(), p.global_row(0).begin());
  const SystemState s{0, 0, act(3, {2})};
  EXPECT_EQ(q_hat(p, s, act(3, {1, 3})), 1.0);
  EXPECT_EQ(q_hat(p, s, act(3, {1, 2, 3})), 0.0);
  EXPECT_EQ(q_hat(LinearParams(1, 1, 3), s, act(3, {2})), 0.0);
}

TEST(QHat, LinearInParameters) {
  Rng rng(1);
  LinearParams p(3, 2, 7);
  fill_random(p, rng);
  for (int trial = 0; trial < 200; ++trial) {
    const SystemState s{uniform_index(rng, 3), uniform_index(rng, 2), random_cache_action(7, 3, rng)};
    const auto a = random_cache_action(7, 3, rng);
    const double c = 4 * uniform01(rng) - 2;
    EXPECT_NEAR(q_hat(p.scaled(c), s, a), c * q_hat(p, s, a), 1e-12);
  }
}

TEST(GreedyTopM, Examples) {
  const std::vector<double> scores{5, 1, 3};
  EXPECT_EQ(greedy_top_m(scores, 2), act(3, {1, 3}));
  EXPECT_EQ(greedy_top_m(std::vector<double>(5, 0.5), 2), act(5, {1, 2}));
  EXPECT_THROW(greedy_top_m(scores, 0), std::invalid_argument);
  EXPECT_THROW(greedy_top_m(scores, 4), std::invalid_argument);
}

TEST(GreedyTopM, EqualsExhaustiveArgmin) {
  Rng rng(2);
  std::size_t mismatches = 0, cases = 0;
  for (std::size_t f = 1; f <= 8; ++f) {
    for (std::size_t m = 1; m <= f; ++m) {
      for (int draw = 0; draw < 40; ++draw) {
        LinearParams p(2, 2, f);
        // Integer-valued draws make ties common.
        fill_random(p, rng, 3.0);
        for (auto* x : flat(p)) *x = draw % 2 ? std::round(*x) : *x;
        const SystemState s{uniform_index(rng, 2), uniform_index(rng, 2), random_cache_action(f, m, rng)};
        mismatches += greedy_top_m(p, s, m) == oracle::exhaustive_greedy(p, s, m) ? 0 : 1;
        ++cases;
      }
    }
  }
  EXPECT_EQ(mismatches, 0u) << "of " << cases;
}

TEST(TdError, Examples) {
  LinearParams p(2, 2, 3);
  const SystemState s{0, 1, act(3, {1})}, s2{1, 0, act(3, {2})};
  EXPECT_EQ(linear_td_error(p, s, act(3, {2}), s2, 17.5, 0.9), 17.5);
  EXPECT_EQ(linear_td_error(p, s, act(3, {2}), s2, 0.0, 0.9), 0.0);

  // psi(s) = [1,2,3] + [0,0,1] + 1*[1,0,0] = [2,2,4];
  // psi(s2) = [4,0,1] + [1,1,1] + 1*[0,1,0] = [5,2,2].
  const std::vector<double> g0{1, 2, 3}, g1{4, 0, 1}, l0{1, 1, 1}, l1{0, 0, 1};
  std::copy(g0.begin(), g0.end(), p.global_row(0).begin());
  std::copy(g1.begin(), g1.end(), p.global_row(1).begin());
  std::copy(l0.begin(), l0.end(), p.local_row(0).begin());
  std::copy(l1.begin(), l1.end(), p.local_row(1).begin());
  p.refresh() = 1;
  // Qhat(s, {2}) = 2 + 4 = 6; min Qhat(s2, .) keeps file 1: 2 + 2 = 4.
  EXPECT_DOUBLE_EQ(linear_td_error(p, s, act(3, {2}), s2, 10.0, 0.5), 10.0 + 0.5 * 4.0 - 6.0);
}

TEST(SgdUpdate, Examples) {
  const LinearLearnerConfig cfg{0.1, 0.2, 0.3, EpsilonSchedule::constant(0.0), 0.8};
  LinearParams p(2, 2, 3);
  const SystemState s{1, 0, act(3, {2})};
  sgd_update(p, s, act(3, {1}), 0.0, cfg);
  EXPECT_EQ(p, LinearParams(2, 2, 3));

  sgd_update(p, s, act(3, {1}), 2.0, cfg);
  EXPECT_EQ(std::vector<double>(p.global_row(1).begin(), p.global_row(1).end()),
            (std::vector<double>{0.0, 0.2, 0.2}));
  EXPECT_NEAR(p.local_row(0)[1], 0.4, 1e-15);
  EXPECT_EQ(p.local_row(0)[0], 0.0);
  EXPECT_EQ(p.global_row(0)[1], 0.0);
  // a drops file 2 of a_prev: a_prev^T (1 - a) = 1.
  EXPECT_NEAR(p.refresh(), 0.3 * 2.0, 1e-15);

  const double r = p.refresh();
  sgd_update(p, s, s.action, 5.0, cfg);
  EXPECT_EQ(p.refresh(), r);

  EXPECT_THROW(sgd_update(p, s, act(3, {1}), std::nan(""), cfg), DivergenceError);
  EXPECT_THROW(sgd_update(p, s, act(3, {1}), 1e308, LinearLearnerConfig{1e10, 1, 1, {}, 0.5}), DivergenceError);
}

// Semi-gradient check: with the TD target y frozen, the update equals
// -alpha * d/dtheta [ (y - Qhat(s, a))^2 / 2 ].
TEST(SgdUpdate, MatchesFiniteDifferences) {
  Rng rng(3);
  const double h = 1e-5;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t ng = 1 + uniform_index(rng, 3), nl = 1 + uniform_index(rng, 3);
    const std::size_t f = 2 + uniform_index(rng, 8), m = 1 + uniform_index(rng, f - 1);
    LinearParams p(ng, nl, f);
    fill_random(p, rng, 1.0);
    const SystemState s{uniform_index(rng, ng), uniform_index(rng, nl), random_cache_action(f, m, rng)};
    const SystemState s2{uniform_index(rng, ng), uniform_index(rng, nl), random_cache_action(f, m, rng)};
    const auto a = s2.action;
    const double cost = 10 * uniform01(rng), gamma = 0.8;
    const double e = linear_td_error(p, s, a, s2, cost, gamma);
    const double target = e + q_hat(p, s, a);

    const LinearLearnerConfig cfg{1.0, 1.0, 1.0, {}, gamma};
    LinearParams stepped = p;
    sgd_update(stepped, s, a, e, cfg);

    LinearParams probe = p;
    auto theta = flat(probe);
    const auto before = flat(p), after = flat(stepped);
    // Blocks: ThetaG, ThetaL, thetaR.
    const std::size_t sizes[3] = {ng * f, nl * f, 1};
    std::size_t offset = 0;
    for (std::size_t block = 0; block < 3; ++block) {
      double diff2 = 0.0, norm2 = 0.0;
      for (std::size_t i = offset; i < offset + sizes[block]; ++i) {
        const double saved = *theta[i];
        *theta[i] = saved + h;
        const double up = 0.5 * std::pow(target - q_hat(probe, s, a), 2);
        *theta[i] = saved - h;
        const double down = 0.5 * std::pow(target - q_hat(probe, s, a), 2);
        *theta[i] = saved;
        const double numeric = (up - down) / (2 * h);
        const double analytic = -(*after[i] - *before[i]);
        diff2 += (numeric - analytic) * (numeric - analytic);
        norm2 += analytic * analytic;
      }
      offset += sizes[block];
      if (norm2 == 0.0) {
        EXPECT_LT(std::sqrt(diff2), 1e-8);
      } else {
        EXPECT_LT(std::sqrt(diff2 / norm2), 1e-6) << "block " << block << " trial " << trial;
      }
    }
  }
}

TEST(RunLinear, SingleSlotTouchesOneRowPerBlock) {
  const auto net = small_network(1);
  LinearLearnerConfig cfg;
  cfg.epsilon = EpsilonSchedule::constant(1.0);
  const auto run = run_linear(net.global_chain, net.local_chain, 2, cfg, CostParams{10, 600, 1000}, {}, 1, 3);
  std::size_t rows_g = 0, rows_l = 0;
  for (std::size_t g = 0; g < 2; ++g) {
    const auto r = run.params.global_row(g);
    const auto nz = std::count_if(r.begin(), r.end(), [](double x) { return x != 0.0; });
    if (nz) {
      ++rows_g;
      EXPECT_EQ(nz, 8);
    }
  }
  for (std::size_t l = 0; l < 2; ++l) {
    const auto r = run.params.local_row(l);
    const auto nz = std::count_if(r.begin(), r.end(), [](double x) { return x != 0.0; });
    if (nz) {
      ++rows_l;
      EXPECT_EQ(nz, 8);
    }
  }
  EXPECT_EQ(rows_g, 1u);
  EXPECT_EQ(rows_l, 1u);
}

TEST(RunLinear, EachUpdateIsSparse) {
  const auto net = small_network(2);
  LinearQLearner learner(2, 2, 10, 2, {});
  Rng rng(4);
  SystemState s{0, 0, CacheAction::first_files(10, 2)};
  for (std::size_t t = 1; t <= 300; ++t) {
    const LinearParams before = learner.params();
    auto a = learner.select(s, t, rng);
    const SystemState next{step_chain(net.global_chain, s.g, rng), step_chain(net.local_chain, s.l, rng), a};
    const double cost = aggregate_cost(s, a, net.global_chain.state(next.g), net.local_chain.state(next.l),
                                       {10, 600, 1000});
    learner.learn(s, a, next, cost, t);
    for (std::size_t g = 0; g < 2; ++g) {
      if (g == s.g) continue;
      const auto x = std::as_const(learner).params().global_row(g);
      const auto y = before.global_row(g);
      EXPECT_TRUE(std::equal(x.begin(), x.end(), y.begin()));
    }
    for (std::size_t l = 0; l < 2; ++l) {
      if (l == s.l) continue;
      const auto x = std::as_const(learner).params().local_row(l);
      const auto y = before.local_row(l);
      EXPECT_TRUE(std::equal(x.begin(), x.end(), y.begin()));
    }
    for (auto f : a.files()) {
      EXPECT_EQ(learner.params().global_row(s.g)[f], before.global_row(s.g)[f]);
      EXPECT_EQ(learner.params().local_row(s.l)[f], before.local_row(s.l)[f]);
    }
    s = next;
  }
}

TEST(RunLinear, ReachesOracleCostOnS1) {
  auto sc = preset("s1");
  sc.learner = LearnerKind::Linear;
  sc.horizon = 10000;
  sc.realizations = 32;
  const auto learned = run_scenario(sc);
  sc.learner = LearnerKind::OraclePolicy;
  const auto optimal = run_scenario(sc);
  EXPECT_LT(learned.run_avg_cost.back(), 1.1 * optimal.run_avg_cost.back());
}

TEST(RunLinear, LargeCatalogWithoutEnumeration) {
  EXPECT_EQ(LinearParams(50, 40, 1000).parameter_count(), 90001u);
  EXPECT_THROW(ActionSpace(1000, 10), std::length_error);
  const auto net = large_network(1);
  LinearLearnerConfig cfg;
  cfg.alpha_g = cfg.alpha_l = cfg.alpha_r = kLargeNetworkStep;
  const auto run = run_linear(net.global_chain, net.local_chain, 10, cfg, CostParams{100, 20, 20}, {}, 2000, 1);
  EXPECT_EQ(run.trace.size(), 2000u);
  EXPECT_TRUE(run.params.all_finite());
}

TEST(RunLinear, DivergenceIsReported) {
  const auto net = small_network(1);
  const LinearLearnerConfig cfg{5.0, 5.0, 5.0, EpsilonSchedule::constant(0.5), 0.8};
  EXPECT_THROW(run_linear(net.global_chain, net.local_chain, 2, cfg, CostParams{10, 600, 1000}, {}, 5000, 1),
               DivergenceError);
}

TEST(RunLinear, SameSeedSameParams) {
  const auto net = small_network(1);
  const auto a = run_linear(net.global_chain, net.local_chain, 2, {}, CostParams{10, 600, 1000}, {}, 2000, 9);
  const auto b = run_linear(net.global_chain, net.local_chain, 2, {}, CostParams{10, 600, 1000}, {}, 2000, 9);
  EXPECT_EQ(a.params, b.params);
}

TEST(ParamsCsv, Shape) {
  LinearParams p(2, 3, 4);
  p.refresh() = 0.5;
  std::ostringstream os;
  write_params_csv(os, p);
  const std::string text = os.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "block,row,file_1,file_2,file_3,file_4");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1 + 2 + 3 + 1);
  EXPECT_NE(text.find("theta_r,0,0.5\n"), std::string::npos);
}
