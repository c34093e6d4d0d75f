#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "letfsim/sim_engine.hpp"

using namespace letfsim;

namespace {

// A small market that runs fast: 100 agents, short horizons.
SimConfig small(std::uint64_t seed = 5) {
  SimConfig c;
  c.num_agents = 100;
  c.max_lookback = 500;
  c.learning_lookback = 500;
  c.order_lifetime = 1000;
  c.max_steps = 5000;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(Simulation, ZeroStepsGivesFundamentalOnly) {
  auto c = small();
  c.max_steps = 0;
  const auto r = run(c);
  EXPECT_EQ(r.prices, (std::vector<Price>{10000}));
  EXPECT_EQ(r.step_count, 0);
  EXPECT_FALSE(r.collapsed);
  EXPECT_TRUE(r.rebalances.empty());
}

TEST(Simulation, RejectsInvalidConfig) {
  auto c = small();
  c.num_agents = 0;
  EXPECT_THROW(Simulation{c}, ConfigError);
  c = small();
  c.cash_multiplier = 10;
  c.normalized_threshold = 0.01;
  try {
    Simulation s{c};
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "normalized_threshold");
  }
}

TEST(Simulation, DefaultInitialState) {
  SimConfig c;
  c.max_steps = 0;
  const Simulation sim(c);
  EXPECT_EQ(sim.agents().size(), 1000u);
  EXPECT_EQ(sim.letf().shares, 200 * c.cash_multiplier);
  EXPECT_EQ(sim.letf().cash, -1e7);
  EXPECT_EQ(sim.market_price(), 10000);
  EXPECT_TRUE(sim.book().empty());
  for (const auto& a : sim.agents()) {
    ASSERT_GE(a.lookback, 1);
    ASSERT_LE(a.lookback, 15000);
    ASSERT_LE(a.weights.fundamental, 1.0);
    ASSERT_LE(a.weights.technical, 5.0);
    ASSERT_LE(a.weights.noise, 1.0);
  }
  const Simulation twin(c);
  EXPECT_EQ(sim.agents(), twin.agents());
}

TEST(Simulation, SameSeedSameRun) {
  const auto c = small(9);
  std::ostringstream j1, j2;
  const auto a = run(c, &j1);
  const auto b = run(c, &j2);
  EXPECT_EQ(a, b);
  EXPECT_EQ(j1.str(), j2.str());
  EXPECT_FALSE(j1.str().empty());
  auto other = c;
  other.seed = 10;
  EXPECT_NE(run(other).prices, a.prices);
}

TEST(Simulation, FirstOrderRestsOnEmptyBook) {
  auto c = small();
  c.letf_enabled = false;
  Simulation sim(c);
  const auto report = sim.step();
  ASSERT_TRUE(report.order);
  EXPECT_EQ(report.fills, 0u);
  EXPECT_EQ(sim.market_price(), 10000);
  EXPECT_EQ(sim.book().size(), 1u);
  EXPECT_EQ(sim.time(), 1);
}

TEST(Simulation, PriceSeriesLength) {
  auto c = small();
  c.letf_enabled = false;
  c.collapse_band = 0.0;
  c.max_steps = 4321;
  const auto r = run(c);
  ASSERT_FALSE(r.collapsed);
  EXPECT_EQ(r.prices.size(), 4321u / 100 + 1);
  EXPECT_EQ(r.step_count, 4321);
}

TEST(Simulation, RoundFairnessHygieneAndPositivity) {
  auto c = small(11);
  c.collapse_band = 0.0;
  c.failed_rebalance_limit = -1;
  c.collapse_on_nonpositive_nav = false;
  Simulation sim(c);
  std::set<std::size_t> round;
  for (int i = 0; i < 3000 && !sim.finished(); ++i) {
    const auto report = sim.step();
    ASSERT_TRUE(round.insert(report.agent_index).second) << "agent ordered twice in one round";
    if (round.size() == static_cast<std::size_t>(c.num_agents)) {
      ASSERT_EQ(sim.remaining_in_round(), 0u);
      round.clear();
    } else {
      ASSERT_EQ(round.size() + sim.remaining_in_round(), static_cast<std::size_t>(c.num_agents));
    }
    ASSERT_GE(sim.market_price(), c.tick_size);
    if (const auto oldest = sim.book().oldest_placement()) {
      ASSERT_LT(sim.time() + (report.time_advanced ? 0 : 1) - *oldest, c.order_lifetime);
    }
    if (sim.book().best_bid() && sim.book().best_ask()) {
      ASSERT_LT(*sim.book().best_bid(), *sim.book().best_ask());
    }
  }
}

TEST(Simulation, PriceBandCollapse) {
  auto c = small();
  c.letf_enabled = false;
  Simulation sim(c);
  EXPECT_EQ(sim.collapse_check(), CollapseReason::none);
  // A resting bid at 3.1 P_f: the first crossing sell trades at the maker's price.
  sim.book().submit_limit(Order{sim.book().next_order_id(), 999, Side::buy, 31000, 1000, 0}, 0);
  while (!sim.finished()) sim.step();
  EXPECT_EQ(sim.market_price(), 31000);
  const auto r = sim.result();
  EXPECT_TRUE(r.collapsed);
  EXPECT_EQ(r.collapse_reason, CollapseReason::price_band);
  EXPECT_EQ(r.collapse_time, sim.time());
  EXPECT_EQ(r.prices.back(), 31000);
}

TEST(Simulation, NonPositiveNavCollapse) {
  auto c = small();
  Simulation sim(c);
  EXPECT_EQ(sim.collapse_check(), CollapseReason::none);
  sim.letf().cash = -10000.0 * static_cast<double>(sim.letf().shares) - 1.0;
  EXPECT_EQ(nav(sim.letf(), 10000), -1.0);
  EXPECT_EQ(sim.collapse_check(), CollapseReason::nonpositive_nav);
  c.collapse_on_nonpositive_nav = false;
  Simulation off(c);
  off.letf().cash = -10000.0 * static_cast<double>(off.letf().shares) - 1.0;
  EXPECT_EQ(off.collapse_check(), CollapseReason::none);
}

TEST(Simulation, UnfilledRebalanceHoldsTime) {
  for (const bool hold : {true, false}) {
    auto c = small(13);
    c.hold_time_on_failed_rebalance = hold;
    c.failed_rebalance_limit = -1;
    Simulation sim(c);
    // All cash, no shares: the agent wants to buy 2000 shares at once.
    sim.letf() = LetfState{0, 1e7};
    int failures = 0;
    for (int i = 0; i < 200; ++i) {
      const Time before = sim.time();
      const auto report = sim.step();
      const bool failed = report.rebalance && report.rebalance->filled == 0;
      failures += failed;
      EXPECT_EQ(report.time_advanced, !(failed && hold));
      EXPECT_EQ(sim.time(), before + (report.time_advanced ? 1 : 0));
    }
    EXPECT_GT(failures, 0);
    const auto r = sim.result();
    EXPECT_EQ(r.held_steps, hold ? failures : 0);
  }
}

TEST(Simulation, ConsecutiveFailuresCollapse) {
  auto c = small(13);
  c.failed_rebalance_limit = 3;
  c.collapse_band = 0.0;
  Simulation sim(c);
  sim.letf() = LetfState{0, 1e7};
  while (!sim.finished()) sim.step();
  EXPECT_EQ(sim.collapse_reason(), CollapseReason::failed_rebalances);
  const auto& ev = sim.rebalances();
  ASSERT_GE(ev.size(), 3u);
  for (std::size_t k = ev.size() - 3; k < ev.size(); ++k) EXPECT_EQ(ev[k].filled, 0);
}

TEST(Simulation, RebalanceEventsAreConsistent) {
  auto c = small(17);
  c.max_steps = 20000;
  const auto r = run(c);
  Quantity shares = init_state(c.letf_params(), c.fundamental_price).shares;
  for (const auto& e : r.rebalances) {
    ASSERT_GE(e.requested, c.letf_params().threshold);
    ASSERT_LE(e.filled, e.requested);
    if (e.filled > 0) {
      ASSERT_GT(e.avg_price, 0.0);
    }
    shares += e.side == Side::buy ? e.filled : -e.filled;
  }
  EXPECT_EQ(shares, r.final_letf.shares);
}

TEST(Simulation, LateStartInitializesAtMarketPrice) {
  auto c = small(19);
  c.letf_start_step = 300;
  c.collapse_band = 0.0;
  Simulation sim(c);
  EXPECT_EQ(sim.letf(), LetfState{});
  EXPECT_FALSE(sim.letf_active());
  while (sim.time() < 300) {
    const auto report = sim.step();
    ASSERT_FALSE(report.rebalance);
  }
  EXPECT_FALSE(sim.letf_active());
  // Initialized after this step's order at the price it left; no rebalance is
  // due at the initialization price.
  sim.step();
  EXPECT_TRUE(sim.letf_active());
  EXPECT_TRUE(sim.rebalances().empty());
  EXPECT_EQ(sim.letf(), init_state(c.letf_params(), sim.market_price()));
}

TEST(Simulation, LearningRuleSwitchChangesPath) {
  auto c = small(23);
  c.letf_enabled = false;
  c.collapse_band = 0.0;
  auto alt = c;
  alt.learning_rule = LearningRule::previous_prediction;
  const auto a = run(c);
  const auto b = run(alt);
  EXPECT_NE(a.prices, b.prices);
  EXPECT_EQ(run(alt), b);
}
