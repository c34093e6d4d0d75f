#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "letfsim/leveraged_etf.hpp"
#include "letfsim/matching_engine.hpp"
#include "letfsim/sim_engine.hpp"

namespace letfsim {

/// A statistic is not defined for the given data (too short, zero variance).
class UndefinedStatistic : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Log returns between every `interval`-th price of a series.
template <class T>
std::vector<double> sampled_log_returns(std::span<const T> prices, std::size_t interval = 1) {
  if (interval == 0) throw std::invalid_argument("sampling interval must be >= 1");
  if (prices.size() < 2) throw std::invalid_argument("need at least two prices");
  std::vector<double> out;
  out.reserve((prices.size() - 1) / interval);
  for (std::size_t i = interval; i < prices.size(); i += interval) {
    const auto now = static_cast<double>(prices[i]);
    const auto before = static_cast<double>(prices[i - interval]);
    if (!(now > 0.0) || !(before > 0.0)) throw std::invalid_argument("prices must be positive");
    out.push_back(std::log(now / before));
  }
  return out;
}

inline std::vector<double> sampled_log_returns(const std::vector<Price>& prices, std::size_t interval = 1) {
  return sampled_log_returns(std::span<const Price>(prices), interval);
}

namespace detail {

inline double mean(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

}  // namespace detail

/// m4 / m2^2 with central sample moments. Normal data gives 3.
inline double raw_kurtosis(std::span<const double> r) {
  if (r.size() < 4) throw UndefinedStatistic("kurtosis needs at least 4 observations");
  const double mu = detail::mean(r);
  double m2 = 0.0;
  double m4 = 0.0;
  for (double v : r) {
    const double d2 = (v - mu) * (v - mu);
    m2 += d2;
    m4 += d2 * d2;
  }
  m2 /= static_cast<double>(r.size());
  m4 /= static_cast<double>(r.size());
  if (!(m2 > 0.0)) throw UndefinedStatistic("kurtosis of a constant series");
  return m4 / (m2 * m2);
}

inline double excess_kurtosis(std::span<const double> r) { return raw_kurtosis(r) - 3.0; }

/// Autocorrelation of r^2 at `lag`, biased (1/N) normalization around the
/// global mean of the squared series.
inline double acf_squared(std::span<const double> r, std::size_t lag) {
  const std::size_t n = r.size();
  if (lag < 1 || 2 * lag > n) throw UndefinedStatistic("lag must be in [1, N/2]");
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) sq[i] = r[i] * r[i];
  const double mu = detail::mean(sq);
  double var = 0.0;
  for (double v : sq) var += (v - mu) * (v - mu);
  if (!(var > 0.0)) throw UndefinedStatistic("squared returns have zero variance");
  double cov = 0.0;
  for (std::size_t i = lag; i < n; ++i) cov += (sq[i] - mu) * (sq[i - lag] - mu);
  return cov / var;
}

/// Sample standard deviation (n - 1 denominator).
inline double volatility(std::span<const double> r) {
  if (r.size() < 2) throw UndefinedStatistic("volatility needs at least 2 observations");
  const double mu = detail::mean(r);
  double ss = 0.0;
  for (double v : r) ss += (v - mu) * (v - mu);
  return std::sqrt(ss / static_cast<double>(r.size() - 1));
}

struct RebalanceMetrics {
  std::int64_t count = 0;  // events with at least one share filled
  std::int64_t total_quantity = 0;
  double quantity_per_trade = 0.0;

  bool operator==(const RebalanceMetrics&) const = default;
};

inline RebalanceMetrics rebalance_metrics(std::span<const RebalanceEvent> events) {
  RebalanceMetrics m;
  for (const auto& e : events) {
    if (e.filled >= 1) ++m.count;
    m.total_quantity += e.filled;
  }
  if (m.count > 0) m.quantity_per_trade = static_cast<double>(m.total_quantity) / static_cast<double>(m.count);
  return m;
}

inline constexpr std::size_t kAcfLags = 5;

/// Per-run statistics feeding the cell averages.
struct RunStatistics {
  bool collapsed = false;
  RebalanceMetrics rebalancing;
  std::optional<double> volatility;
  std::optional<double> kurtosis;  // excess unless raw was requested
  std::array<std::optional<double>, kAcfLags> acf_sq{};
};

inline RunStatistics run_statistics(const RunResult& run, bool raw = false) {
  RunStatistics s;
  s.collapsed = run.collapsed;
  s.rebalancing = rebalance_metrics(run.rebalances);
  if (run.prices.size() < 2) return s;
  const auto r = sampled_log_returns(run.prices);
  const auto attempt = [](auto&& f) -> std::optional<double> {
    try {
      return f();
    } catch (const UndefinedStatistic&) {
      return std::nullopt;
    }
  };
  s.volatility = attempt([&] { return volatility(r); });
  s.kurtosis = attempt([&] { return raw ? raw_kurtosis(r) : excess_kurtosis(r); });
  for (std::size_t lag = 1; lag <= kAcfLags; ++lag) {
    s.acf_sq[lag - 1] = attempt([&] { return acf_squared(r, lag); });
  }
  return s;
}

/// Averages of one (cash multiplier, normalized threshold) cell over its
/// non-collapsed runs. Metrics are empty when the cell is not reported.
struct CellSummary {
  std::int64_t cash_multiplier = 0;
  double normalized_threshold = 0.0;
  std::int64_t threshold = 0;
  std::int64_t runs = 0;
  std::int64_t failed_runs = 0;
  std::int64_t collapsed_runs = 0;
  double collapse_fraction = 0.0;
  bool reported = false;
  std::optional<double> mean_rebalance_count;
  std::optional<double> mean_total_rebalance_qty;
  std::optional<double> mean_qty_per_trade;
  std::optional<double> mean_volatility;
  std::optional<double> mean_kurtosis;
  std::array<std::optional<double>, kAcfLags> mean_acf_sq{};

  bool operator==(const CellSummary&) const = default;
};

/// Cells where more than half the usable runs collapsed are not reported.
inline constexpr double kMaxReportedCollapseFraction = 0.5;

inline CellSummary summarize_cell(std::span<const RunStatistics> stats, std::int64_t cash_multiplier,
                                  double normalized_threshold, std::int64_t failed_runs = 0) {
  CellSummary c;
  c.cash_multiplier = cash_multiplier;
  c.normalized_threshold = normalized_threshold;
  c.threshold = LetfParams::threshold_for(cash_multiplier, normalized_threshold);
  c.runs = static_cast<std::int64_t>(stats.size()) + failed_runs;
  c.failed_runs = failed_runs;

  struct Mean {
    double sum = 0.0;
    std::int64_t n = 0;
    void add(std::optional<double> v) {
      if (v) {
        sum += *v;
        ++n;
      }
    }
    std::optional<double> get() const { return n > 0 ? std::optional(sum / static_cast<double>(n)) : std::nullopt; }
  };
  Mean count, total, per_trade, vol, kurt;
  std::array<Mean, kAcfLags> acf;

  for (std::size_t i = 0; i < stats.size(); ++i) {
    if (stats[i].collapsed) {
      ++c.collapsed_runs;
      continue;
    }
    const auto& s = stats[i];
    count.add(static_cast<double>(s.rebalancing.count));
    total.add(static_cast<double>(s.rebalancing.total_quantity));
    per_trade.add(s.rebalancing.quantity_per_trade);
    vol.add(s.volatility);
    kurt.add(s.kurtosis);
    for (std::size_t k = 0; k < kAcfLags; ++k) acf[k].add(s.acf_sq[k]);
  }
  const auto usable = static_cast<std::int64_t>(stats.size());
  c.collapse_fraction = usable > 0 ? static_cast<double>(c.collapsed_runs) / static_cast<double>(usable) : 1.0;
  c.reported = usable > c.collapsed_runs && c.collapse_fraction <= kMaxReportedCollapseFraction;
  if (c.reported) {
    c.mean_rebalance_count = count.get();
    c.mean_total_rebalance_qty = total.get();
    c.mean_qty_per_trade = per_trade.get();
    c.mean_volatility = vol.get();
    c.mean_kurtosis = kurt.get();
    for (std::size_t k = 0; k < kAcfLags; ++k) c.mean_acf_sq[k] = acf[k].get();
  }
  return c;
}

inline CellSummary summarize_cell(std::span<const RunResult> results, std::int64_t cash_multiplier,
                                  double normalized_threshold, bool raw_kurtosis = false) {
  std::vector<RunStatistics> stats;
  stats.reserve(results.size());
  for (const auto& r : results) stats.push_back(run_statistics(r, raw_kurtosis));
  return summarize_cell(stats, cash_multiplier, normalized_threshold);
}

}  // namespace letfsim
