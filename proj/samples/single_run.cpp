// One market run with the reference parameters, printed as a short report.
//
//   single_run [c_mag] [v_nor] [max_steps] [seed]
//
// c_mag = 0 disables the leveraged ETF.

#include <cstdlib>
#include <iostream>
#include <string>

#include "letfsim/analytics.hpp"
#include "letfsim/sim_engine.hpp"

int main(int argc, char** argv) {
  letfsim::SimConfig config;
  try {
    if (argc > 1) config.cash_multiplier = std::stoll(argv[1]);
    if (argc > 2) config.normalized_threshold = std::stod(argv[2]);
    if (argc > 3) config.max_steps = std::stoll(argv[3]);
    if (argc > 4) config.seed = std::stoull(argv[4]);
  } catch (const std::exception&) {
    std::cerr << "usage: single_run [c_mag] [v_nor] [max_steps] [seed]\n";
    return 2;
  }
  if (config.cash_multiplier == 0) {
    config.letf_enabled = false;
    config.cash_multiplier = 10;
  }

  letfsim::RunResult result;
  try {
    result = letfsim::run(config);
  } catch (const std::exception& e) {
    std::cerr << "single_run: " << e.what() << '\n';
    return 1;
  }
  const auto stats = letfsim::run_statistics(result);

  std::cout << "steps          " << result.step_count << " (" << result.held_steps << " held)\n";
  std::cout << "collapsed      " << (result.collapsed ? letfsim::to_string(result.collapse_reason) : "no") << '\n';
  std::cout << "final price    " << result.prices.back() << '\n';
  if (config.letf_enabled) {
    std::cout << "threshold      " << config.letf_params().threshold << " shares\n";
    std::cout << "rebalances     " << stats.rebalancing.count << " trades, " << stats.rebalancing.total_quantity
              << " shares\n";
    std::cout << "letf           S=" << result.final_letf.shares << " C=" << result.final_letf.cash << '\n';
  }
  const auto show = [](const std::optional<double>& v) { return v ? std::to_string(*v) : std::string("n/a"); };
  std::cout << "volatility     " << show(stats.volatility) << '\n';
  std::cout << "kurtosis       " << show(stats.kurtosis) << " (excess)\n";
  std::cout << "acf r^2 1..5  ";
  for (const auto& a : stats.acf_sq) std::cout << ' ' << show(a);
  std::cout << '\n';
  return 0;
}
