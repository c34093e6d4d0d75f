#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "letfsim/leveraged_etf.hpp"
#include "letfsim/matching_engine.hpp"
#include "letfsim/normal_agents.hpp"
#include "letfsim/rng.hpp"

namespace letfsim {

/// Raised for an invalid configuration value; `field()` names the key.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Which strategy returns an agent scores against the realised return.
enum class LearningRule : std::uint8_t {
  literal,              // the returns computed for the current order vs the trailing t_l return
  previous_prediction,  // the agent's previous order's returns vs the return realised since then
};

/// Parameters of one simulation run. Defaults reproduce the reference
/// parameterization of the model (1,000 agents, 10^6 steps, leverage 2).
struct SimConfig {
  std::int64_t num_agents = 1000;
  double max_fundamental_weight = 1.0;
  double max_technical_weight = 5.0;
  double max_noise_weight = 1.0;
  std::int64_t max_lookback = 15000;
  double noise_sigma = 0.03;
  double price_spread = 1000.0;
  std::int64_t order_lifetime = 10000;
  std::int64_t learning_lookback = 10000;
  double learning_gain = 4.0;
  double reset_probability = 0.01;
  LearningRule learning_rule = LearningRule::literal;
  std::int64_t tick_size = 1;
  std::int64_t fundamental_price = 10000;
  std::int64_t max_steps = 1'000'000;

  bool letf_enabled = true;
  double target_leverage = 2.0;
  std::int64_t cash_multiplier = 10;
  double normalized_threshold = 0.1;
  QuantityRounding quantity_rounding = QuantityRounding::floor;
  bool hold_time_on_failed_rebalance = true;
  std::int64_t letf_start_step = 0;  // the agent is initialized at the market price of this step

  std::uint64_t seed = 1;
  std::int64_t sampling_interval = 100;

  double collapse_band = 1.0986122886681098;  // ln 3; <= 0 disables
  bool collapse_on_nonpositive_nav = true;
  std::int64_t failed_rebalance_limit = 0;  // 0: num_agents, < 0: disabled

  WeightCaps caps() const noexcept {
    return {max_fundamental_weight, max_technical_weight, max_noise_weight};
  }

  LetfParams letf_params() const {
    return {target_leverage, cash_multiplier, LetfParams::threshold_for(cash_multiplier, normalized_threshold)};
  }

  std::int64_t effective_failed_rebalance_limit() const noexcept {
    return failed_rebalance_limit == 0 ? num_agents : failed_rebalance_limit;
  }

  void validate() const {
    const auto require = [](bool ok, const char* field, const char* msg) {
      if (!ok) throw ConfigError(field, msg);
    };
    require(num_agents >= 1, "num_agents", "must be >= 1");
    require(max_fundamental_weight >= 0.0, "max_fundamental_weight", "must be >= 0");
    require(max_technical_weight >= 0.0, "max_technical_weight", "must be >= 0");
    require(max_noise_weight >= 0.0, "max_noise_weight", "must be >= 0");
    require(max_fundamental_weight + max_technical_weight + max_noise_weight > 0.0, "max_noise_weight",
            "weight caps must not all be zero");
    require(max_lookback >= 1, "max_lookback", "must be >= 1");
    require(noise_sigma >= 0.0, "noise_sigma", "must be >= 0");
    require(price_spread >= 0.0, "price_spread", "must be >= 0");
    require(order_lifetime >= 1, "order_lifetime", "must be >= 1");
    require(learning_lookback >= 1, "learning_lookback", "must be >= 1");
    require(learning_gain >= 0.0, "learning_gain", "must be >= 0");
    require(reset_probability >= 0.0 && reset_probability <= 1.0, "reset_probability", "must be in [0, 1]");
    require(tick_size >= 1, "tick_size", "must be >= 1");
    require(fundamental_price >= 1, "fundamental_price", "must be >= 1");
    require(fundamental_price % tick_size == 0, "fundamental_price", "must be a multiple of tick_size");
    require(max_steps >= 0, "max_steps", "must be >= 0");
    require(sampling_interval >= 1, "sampling_interval", "must be >= 1");
    require(letf_start_step >= 0, "letf_start_step", "must be >= 0");
    if (letf_enabled) {
      require(target_leverage > 1.0, "target_leverage", "must be > 1");
      require(cash_multiplier >= 1, "cash_multiplier", "must be >= 1");
      require(normalized_threshold > 0.0, "normalized_threshold", "must be > 0");
      require(letf_params().threshold >= 1, "normalized_threshold",
              "threshold in shares (normalized_threshold * cash_multiplier) rounds below 1");
    }
  }
};

/// Visits every configuration field as (key, reference). Keys are the names
/// accepted in config files and as command-line overrides.
template <class Config, class Visitor>
  requires std::same_as<std::remove_const_t<Config>, SimConfig>
void for_each_field(Config& c, Visitor&& visit) {
  visit("num_agents", c.num_agents);
  visit("max_fundamental_weight", c.max_fundamental_weight);
  visit("max_technical_weight", c.max_technical_weight);
  visit("max_noise_weight", c.max_noise_weight);
  visit("max_lookback", c.max_lookback);
  visit("noise_sigma", c.noise_sigma);
  visit("price_spread", c.price_spread);
  visit("order_lifetime", c.order_lifetime);
  visit("learning_lookback", c.learning_lookback);
  visit("learning_gain", c.learning_gain);
  visit("reset_probability", c.reset_probability);
  visit("learning_rule", c.learning_rule);
  visit("tick_size", c.tick_size);
  visit("fundamental_price", c.fundamental_price);
  visit("max_steps", c.max_steps);
  visit("letf_enabled", c.letf_enabled);
  visit("target_leverage", c.target_leverage);
  visit("cash_multiplier", c.cash_multiplier);
  visit("normalized_threshold", c.normalized_threshold);
  visit("quantity_rounding", c.quantity_rounding);
  visit("hold_time_on_failed_rebalance", c.hold_time_on_failed_rebalance);
  visit("letf_start_step", c.letf_start_step);
  visit("seed", c.seed);
  visit("sampling_interval", c.sampling_interval);
  visit("collapse_band", c.collapse_band);
  visit("collapse_on_nonpositive_nav", c.collapse_on_nonpositive_nav);
  visit("failed_rebalance_limit", c.failed_rebalance_limit);
}

enum class CollapseReason : std::uint8_t { none, price_band, nonpositive_nav, failed_rebalances };

constexpr const char* to_string(CollapseReason r) noexcept {
  switch (r) {
    case CollapseReason::none: return "none";
    case CollapseReason::price_band: return "price_band";
    case CollapseReason::nonpositive_nav: return "nonpositive_nav";
    case CollapseReason::failed_rebalances: return "failed_rebalances";
  }
  return "none";
}

struct RunResult {
  SimConfig config;
  std::vector<Price> prices;  // every sampling_interval steps from t = 0
  std::vector<RebalanceEvent> rebalances;
  bool collapsed = false;
  std::optional<Time> collapse_time;
  CollapseReason collapse_reason = CollapseReason::none;
  Time step_count = 0;
  std::int64_t held_steps = 0;  // iterations that did not advance time
  LetfState final_letf;

  bool operator==(const RunResult& other) const {
    return prices == other.prices && rebalances == other.rebalances && collapsed == other.collapsed &&
           collapse_time == other.collapse_time && collapse_reason == other.collapse_reason &&
           step_count == other.step_count && held_steps == other.held_steps && final_letf == other.final_letf;
  }
};

/// What happened during one call to Simulation::step().
struct StepReport {
  std::size_t agent_index = 0;
  std::optional<OrderIntent> order;
  std::size_t fills = 0;
  std::optional<RebalanceEvent> rebalance;
  bool time_advanced = true;
};

/// One run of the market. Sequential by construction; not thread-safe, but
/// distinct instances share nothing.
class Simulation {
 public:
  explicit Simulation(SimConfig config)
      : cfg_(std::move(config)), rng_(cfg_.seed), book_((cfg_.validate(), cfg_.tick_size)) {
    price_ = cfg_.fundamental_price;
    history_.reserve(static_cast<std::size_t>(cfg_.max_steps) + 1);
    history_.push_back(price_);
    samples_.push_back(price_);

    const WeightCaps caps = cfg_.caps();
    agents_.reserve(static_cast<std::size_t>(cfg_.num_agents));
    for (std::int64_t i = 0; i < cfg_.num_agents; ++i) {
      agents_.push_back(make_agent(i, caps, cfg_.max_lookback, rng_));
    }
    schedule_.resize(agents_.size());
    std::iota(schedule_.begin(), schedule_.end(), std::size_t{0});
    cursor_ = schedule_.size();

    if (cfg_.letf_enabled) {
      letf_params_ = cfg_.letf_params();
      if (cfg_.letf_start_step == 0) {
        letf_ = init_state(letf_params_, price_);
        letf_ready_ = true;
      }
    }
    if (cfg_.learning_rule == LearningRule::previous_prediction) memory_.resize(agents_.size());
    band_hi_ = static_cast<double>(cfg_.fundamental_price) * std::exp(cfg_.collapse_band);
    band_lo_ = static_cast<double>(cfg_.fundamental_price) * std::exp(-cfg_.collapse_band);
    fills_.reserve(64);
  }

  const SimConfig& config() const noexcept { return cfg_; }
  Time time() const noexcept { return t_; }
  Price market_price() const noexcept { return price_; }
  const OrderBook& book() const noexcept { return book_; }
  OrderBook& book() noexcept { return book_; }
  const std::vector<NormalAgent>& agents() const noexcept { return agents_; }
  const LetfState& letf() const noexcept { return letf_; }
  LetfState& letf() noexcept { return letf_; }
  const std::vector<Price>& price_history() const noexcept { return history_; }
  const std::vector<RebalanceEvent>& rebalances() const noexcept { return rebalances_; }
  bool letf_active() const noexcept { return letf_ready_; }
  bool collapsed() const noexcept { return reason_ != CollapseReason::none; }
  CollapseReason collapse_reason() const noexcept { return reason_; }
  bool finished() const noexcept { return collapsed() || t_ >= cfg_.max_steps; }

  /// Agents still due to order in the current permutation round.
  std::size_t remaining_in_round() const noexcept { return schedule_.size() - cursor_; }

  void set_journal(std::ostream* journal) noexcept { book_.set_journal(journal); }

  StepReport step() {
    StepReport report;
    const Time now = t_ + 1;
    const double prev = static_cast<double>(price_);

    report.agent_index = next_agent();
    NormalAgent& agent = agents_[report.agent_index];

    const double fundamental = std::log(static_cast<double>(cfg_.fundamental_price) / prev);
    const double technical = std::log(prev / price_ago(agent.lookback));
    const double realised = std::log(prev / price_ago(cfg_.learning_lookback));

    if (cfg_.learning_rule == LearningRule::literal) {
      learn(agent.weights, fundamental, technical, realised, cfg_.learning_gain, cfg_.caps(), rng_);
    } else {
      Memory& m = memory_[report.agent_index];
      const double since = m.price > 0.0 ? std::log(prev / m.price) : 0.0;
      learn(agent.weights, m.fundamental, m.technical, since, cfg_.learning_gain, cfg_.caps(), rng_);
      m = {fundamental, technical, prev};
    }
    maybe_reset_weights(agent.weights, cfg_.reset_probability, cfg_.caps(), rng_);

    const double noise = normal(rng_, 0.0, cfg_.noise_sigma);
    const double expected = prev * std::exp(expected_return(agent.weights, fundamental, technical, noise));
    report.order = draw_order(expected, cfg_.price_spread, cfg_.tick_size, rng_);
    if (report.order) {
      fills_.clear();
      const Order order{book_.next_order_id(), agent.id, report.order->side, report.order->price, 1, now};
      book_.submit_limit(order, now, fills_);
      report.fills = fills_.size();
      if (!fills_.empty()) price_ = fills_.back().price;
    }

    bool failed_rebalance = false;
    if (cfg_.letf_enabled && !letf_ready_ && t_ >= cfg_.letf_start_step) {
      letf_ = init_state(letf_params_, price_);
      letf_ready_ = true;
    }
    if (letf_active()) {
      report.rebalance = rebalance(now);
      if (report.rebalance) failed_rebalance = report.rebalance->filled == 0;
    }

    book_.expire_orders(now, cfg_.order_lifetime);

    report.time_advanced = !(failed_rebalance && cfg_.hold_time_on_failed_rebalance);
    if (report.time_advanced) {
      t_ = now;
      history_.push_back(price_);
      if (t_ % cfg_.sampling_interval == 0) samples_.push_back(price_);
    } else {
      ++held_;
    }
    reason_ = collapse_check();
    return report;
  }

  /// Collapse criterion for the current state: price outside the band around
  /// the fundamental price, non-positive NAV, or too many consecutive
  /// unfilled rebalances.
  CollapseReason collapse_check() const noexcept {
    const auto p = static_cast<double>(price_);
    if (cfg_.collapse_band > 0.0 && (p > band_hi_ || p < band_lo_)) return CollapseReason::price_band;
    if (letf_active()) {
      if (cfg_.collapse_on_nonpositive_nav && !(nav(letf_, p) > 0.0)) return CollapseReason::nonpositive_nav;
      const auto limit = cfg_.effective_failed_rebalance_limit();
      if (limit > 0 && consecutive_failures_ >= limit) return CollapseReason::failed_rebalances;
    }
    return CollapseReason::none;
  }

  void run_to_end() {
    while (!finished()) step();
  }

  RunResult result() const {
    RunResult out;
    out.config = cfg_;
    out.prices = samples_;
    if (collapsed()) {
      if (t_ % cfg_.sampling_interval != 0 || price_ != samples_.back()) out.prices.push_back(price_);
      out.collapse_time = t_;
    }
    out.rebalances = rebalances_;
    out.collapsed = collapsed();
    out.collapse_reason = reason_;
    out.step_count = t_;
    out.held_steps = held_;
    out.final_letf = letf_;
    return out;
  }

 private:
  std::size_t next_agent() {
    if (cursor_ == schedule_.size()) {
      for (std::size_t i = schedule_.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_int(rng_, 0, static_cast<std::int64_t>(i) - 1));
        std::swap(schedule_[i - 1], schedule_[j]);
      }
      cursor_ = 0;
    }
    return schedule_[cursor_++];
  }

  // P^{t-1-lag} for the step being computed; the fundamental price before t = 0.
  double price_ago(std::int64_t lag) const noexcept {
    const Time index = t_ - lag;
    return static_cast<double>(index < 0 ? cfg_.fundamental_price : history_[static_cast<std::size_t>(index)]);
  }

  std::optional<RebalanceEvent> rebalance(Time now) {
    const auto p = static_cast<double>(price_);
    if (!(nav(letf_, p) > 0.0)) return std::nullopt;
    const double delta = rebalance_quantity(letf_, letf_params_.target_leverage, p);
    const auto order = desired_order(delta, letf_params_.threshold, cfg_.quantity_rounding);
    if (!order) return std::nullopt;

    RebalanceEvent ev;
    ev.time = now;
    ev.side = order->side;
    ev.requested = order->quantity;
    ev.leverage_before = actual_leverage(letf_, p);

    fills_.clear();
    book_.submit_market(order->side, order->quantity, kLetfAgentId, now, fills_);
    apply_fills(letf_, order->side, fills_);
    double notional = 0.0;
    for (const Fill& f : fills_) {
      ev.filled += f.quantity;
      notional += static_cast<double>(f.quantity) * static_cast<double>(f.price);
    }
    if (!fills_.empty()) {
      price_ = fills_.back().price;
      ev.avg_price = notional / static_cast<double>(ev.filled);
    }
    const double after = nav(letf_, static_cast<double>(price_));
    ev.leverage_after = after > 0.0 ? static_cast<double>(price_) * static_cast<double>(letf_.shares) / after
                                    : std::nan("");
    consecutive_failures_ = ev.filled == 0 ? consecutive_failures_ + 1 : 0;
    rebalances_.push_back(ev);
    return ev;
  }

  SimConfig cfg_;
  RunRng rng_;
  OrderBook book_;
  std::vector<NormalAgent> agents_;
  std::vector<std::size_t> schedule_;
  std::size_t cursor_ = 0;

  struct Memory {
    double fundamental = 0.0;
    double technical = 0.0;
    double price = 0.0;
  };
  std::vector<Memory> memory_;

  LetfParams letf_params_;
  LetfState letf_;
  bool letf_ready_ = false;
  std::vector<RebalanceEvent> rebalances_;
  std::int64_t consecutive_failures_ = 0;

  Price price_ = 0;
  Time t_ = 0;
  std::int64_t held_ = 0;
  std::vector<Price> history_;
  std::vector<Price> samples_;
  std::vector<Fill> fills_;

  double band_hi_ = 0.0;
  double band_lo_ = 0.0;
  CollapseReason reason_ = CollapseReason::none;
};

/// Executes a full run: init, step until max_steps or collapse.
inline RunResult run(const SimConfig& config, std::ostream* journal = nullptr) {
  Simulation sim(config);
  sim.set_journal(journal);
  sim.run_to_end();
  return sim.result();
}

}  // namespace letfsim
