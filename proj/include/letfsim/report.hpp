#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "letfsim/analytics.hpp"
#include "letfsim/config.hpp"
#include "letfsim/sweep.hpp"

namespace letfsim {

/// Marker for an unreported cell in the text tables.
inline constexpr std::string_view kDash = "—";

/// Shortest decimal text that reads back as the same double.
inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) throw std::runtime_error("cannot format number");
  return std::string(buf.data(), end);
}

inline double parse_double(std::string_view s, std::string_view column) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size()) {
    throw std::runtime_error("column " + std::string(column) + ": not a number: '" + std::string(s) + "'");
  }
  return v;
}

inline std::int64_t parse_int(std::string_view s, std::string_view column) {
  std::int64_t v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size()) {
    throw std::runtime_error("column " + std::string(column) + ": not an integer: '" + std::string(s) + "'");
  }
  return v;
}

// ---------------------------------------------------------------------------
// cells.csv

inline const std::vector<std::string>& cells_csv_columns() {
  static const std::vector<std::string> cols{"c_mag",
                                              "v_nor",
                                              "v_thr",
                                              "runs",
                                              "failed_runs",
                                              "collapsed_runs",
                                              "collapse_fraction",
                                              "reported",
                                              "mean_rebalance_count",
                                              "mean_total_rebalance_qty",
                                              "mean_qty_per_trade",
                                              "mean_volatility",
                                              "mean_kurtosis",
                                              "mean_acf_sq_1",
                                              "mean_acf_sq_2",
                                              "mean_acf_sq_3",
                                              "mean_acf_sq_4",
                                              "mean_acf_sq_5"};
  return cols;
}

namespace detail {

inline std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace detail

inline void write_cells_csv(std::ostream& out, const std::vector<CellSummary>& cells) {
  const auto& cols = cells_csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const auto& c : cells) {
    out << c.cash_multiplier << ',' << format_double(c.normalized_threshold) << ',' << c.threshold << ','
        << c.runs << ',' << c.failed_runs << ',' << c.collapsed_runs << ',' << format_double(c.collapse_fraction)
        << ',' << (c.reported ? 1 : 0) << ',' << detail::opt(c.mean_rebalance_count) << ','
        << detail::opt(c.mean_total_rebalance_qty) << ',' << detail::opt(c.mean_qty_per_trade) << ','
        << detail::opt(c.mean_volatility) << ',' << detail::opt(c.mean_kurtosis);
    for (const auto& a : c.mean_acf_sq) out << ',' << detail::opt(a);
    out << '\n';
  }
}

/// Reads a file produced by write_cells_csv. Columns are located by name.
inline std::vector<CellSummary> read_cells_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("cells.csv: missing header");
  const auto header = detail::split_csv_line(line);
  std::vector<std::size_t> pos;
  for (const auto& name : cells_csv_columns()) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::runtime_error("cells.csv: missing column " + name);
    pos.push_back(static_cast<std::size_t>(it - header.begin()));
  }
  std::vector<CellSummary> cells;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != header.size()) throw std::runtime_error("cells.csv: wrong field count in: " + line);
    const auto& cols = cells_csv_columns();
    const auto get = [&](std::size_t k) -> const std::string& { return f[pos[k]]; };
    const auto opt = [&](std::size_t k) -> std::optional<double> {
      if (get(k).empty()) return std::nullopt;
      return parse_double(get(k), cols[k]);
    };
    CellSummary c;
    c.cash_multiplier = parse_int(get(0), cols[0]);
    c.normalized_threshold = parse_double(get(1), cols[1]);
    c.threshold = parse_int(get(2), cols[2]);
    c.runs = parse_int(get(3), cols[3]);
    c.failed_runs = parse_int(get(4), cols[4]);
    c.collapsed_runs = parse_int(get(5), cols[5]);
    c.collapse_fraction = parse_double(get(6), cols[6]);
    c.reported = parse_int(get(7), cols[7]) != 0;
    c.mean_rebalance_count = opt(8);
    c.mean_total_rebalance_qty = opt(9);
    c.mean_qty_per_trade = opt(10);
    c.mean_volatility = opt(11);
    c.mean_kurtosis = opt(12);
    for (std::size_t k = 0; k < kAcfLags; ++k) c.mean_acf_sq[k] = opt(13 + k);
    cells.push_back(c);
  }
  return cells;
}

inline void write_stylized_csv(std::ostream& out, const std::vector<CellSummary>& cells) {
  out << "c_mag,v_nor,reported,mean_kurtosis";
  for (std::size_t k = 1; k <= kAcfLags; ++k) out << ",mean_acf_sq_" << k;
  out << '\n';
  for (const auto& c : cells) {
    out << c.cash_multiplier << ',' << format_double(c.normalized_threshold) << ',' << (c.reported ? 1 : 0) << ','
        << detail::opt(c.mean_kurtosis);
    for (const auto& a : c.mean_acf_sq) out << ',' << detail::opt(a);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Text tables

struct TableSpec {
  int number;
  std::string title;
  std::function<std::optional<double>(const CellSummary&)> value;
  double scale = 1.0;
  int decimals = 1;
};

inline std::vector<TableSpec> result_tables() {
  return {
      {3, "Number of rebalancing trades", [](const CellSummary& c) { return c.mean_rebalance_count; }, 1.0, 1},
      {4, "Total rebalancing order quantity", [](const CellSummary& c) { return c.mean_total_rebalance_qty; }, 1.0, 1},
      {5, "Rebalancing order quantity per trade", [](const CellSummary& c) { return c.mean_qty_per_trade; }, 1.0, 2},
      {6, "Underlying market volatility (x 10^-3)", [](const CellSummary& c) { return c.mean_volatility; }, 1e3, 2},
  };
}

namespace detail {

inline std::size_t display_width(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char ch : s) n += (ch & 0xC0) != 0x80;
  return n;
}

inline std::string pad_left(std::string_view s, std::size_t width) {
  const std::size_t w = display_width(s);
  return std::string(w < width ? width - w : 0, ' ') + std::string(s);
}

inline std::string fixed(double v, int decimals) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(decimals) << v;
  return os.str();
}

}  // namespace detail

/// A C_mag x V_nor grid; unreported cells print as a dash.
inline void write_table(std::ostream& out, const TableSpec& table, const std::vector<CellSummary>& cells) {
  std::vector<std::int64_t> rows;
  std::vector<double> cols;
  for (const auto& c : cells) {
    if (std::find(rows.begin(), rows.end(), c.cash_multiplier) == rows.end()) rows.push_back(c.cash_multiplier);
    if (std::find(cols.begin(), cols.end(), c.normalized_threshold) == cols.end()) {
      cols.push_back(c.normalized_threshold);
    }
  }
  std::sort(rows.begin(), rows.end());
  std::sort(cols.begin(), cols.end());

  constexpr std::size_t width = 12;
  out << "Table " << table.number << ": " << table.title << "\n\n";
  out << detail::pad_left("C_mag \\ V_nor", 14);
  for (double v : cols) out << detail::pad_left(format_double(v), width);
  out << '\n';
  for (std::int64_t r : rows) {
    out << detail::pad_left(std::to_string(r), 14);
    for (double v : cols) {
      std::string text(kDash);
      for (const auto& c : cells) {
        if (c.cash_multiplier != r || c.normalized_threshold != v || !c.reported) continue;
        if (const auto x = table.value(c)) text = detail::fixed(*x * table.scale, table.decimals);
      }
      out << detail::pad_left(text, width);
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// runs.jsonl

inline nlohmann::ordered_json to_json(const RebalanceEvent& e) {
  nlohmann::ordered_json j;
  j["time"] = e.time;
  j["side"] = to_string(e.side);
  j["requested"] = e.requested;
  j["filled"] = e.filled;
  j["avg_price"] = e.avg_price;
  j["leverage_before"] = e.leverage_before;
  j["leverage_after"] = std::isfinite(e.leverage_after) ? nlohmann::ordered_json(e.leverage_after) : nullptr;
  return j;
}

/// One runs.jsonl line: {params, collapsed, ..., prices, rebalances}.
inline nlohmann::ordered_json run_to_json(const RunRecord& rec, const SweepSpec& spec) {
  const SimConfig config = spec.cell_config(rec.cell, rec.run);
  nlohmann::ordered_json j;
  j["params"] = {{"cell", rec.cell},
                 {"run", rec.run},
                 {"c_mag", config.cash_multiplier},
                 {"v_nor", config.normalized_threshold},
                 {"v_thr", config.letf_params().threshold},
                 {"seed", rec.seed}};
  if (rec.error) {
    j["error"] = *rec.error;
    return j;
  }
  j["collapsed"] = rec.stats.collapsed;
  if (!rec.result) return j;
  const RunResult& r = *rec.result;
  j["collapse_time"] = r.collapse_time ? nlohmann::ordered_json(*r.collapse_time) : nullptr;
  j["collapse_reason"] = to_string(r.collapse_reason);
  j["step_count"] = r.step_count;
  j["held_steps"] = r.held_steps;
  j["sampling_interval"] = r.config.sampling_interval;
  j["final_letf"] = {{"shares", r.final_letf.shares}, {"cash", r.final_letf.cash}};
  j["prices"] = r.prices;
  auto& rb = j["rebalances"] = nlohmann::ordered_json::array();
  for (const auto& e : r.rebalances) rb.push_back(to_json(e));
  return j;
}

/// Inverse of run_to_json for the fields a RunResult carries.
inline RunResult run_from_json(const nlohmann::json& j) {
  RunResult r;
  r.collapsed = j.at("collapsed").get<bool>();
  if (!j.at("collapse_time").is_null()) r.collapse_time = j.at("collapse_time").get<Time>();
  const std::string reason = j.at("collapse_reason").get<std::string>();
  for (auto c : {CollapseReason::none, CollapseReason::price_band, CollapseReason::nonpositive_nav,
                 CollapseReason::failed_rebalances}) {
    if (reason == to_string(c)) r.collapse_reason = c;
  }
  r.step_count = j.at("step_count").get<Time>();
  r.held_steps = j.at("held_steps").get<std::int64_t>();
  r.config.sampling_interval = j.at("sampling_interval").get<std::int64_t>();
  r.final_letf.shares = j.at("final_letf").at("shares").get<Quantity>();
  r.final_letf.cash = j.at("final_letf").at("cash").get<double>();
  r.prices = j.at("prices").get<std::vector<Price>>();
  for (const auto& e : j.at("rebalances")) {
    RebalanceEvent ev;
    ev.time = e.at("time").get<Time>();
    ev.side = e.at("side").get<std::string>() == "buy" ? Side::buy : Side::sell;
    ev.requested = e.at("requested").get<Quantity>();
    ev.filled = e.at("filled").get<Quantity>();
    ev.avg_price = e.at("avg_price").get<double>();
    ev.leverage_before = e.at("leverage_before").get<double>();
    ev.leverage_after = e.at("leverage_after").is_null() ? std::nan("") : e.at("leverage_after").get<double>();
    r.rebalances.push_back(ev);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Output directory

struct OutputOptions {
  bool runs_jsonl = false;
};

/// Writes config.json, cells.csv, stylized.csv, table_3..6.txt and,
/// optionally, runs.jsonl into `dir`.
inline void write_outputs(const std::filesystem::path& dir, const SweepSpec& spec, const SweepResult& result,
                          const OutputOptions& options = {}) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());

  const auto open = [&](const char* name) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
    return f;
  };
  {
    auto f = open("config.json");
    f << to_json(spec).dump(2) << '\n';
  }
  {
    auto f = open("cells.csv");
    write_cells_csv(f, result.cells);
  }
  {
    auto f = open("stylized.csv");
    write_stylized_csv(f, result.cells);
  }
  for (const auto& table : result_tables()) {
    const std::string name = "table_" + std::to_string(table.number) + ".txt";
    auto f = open(name.c_str());
    write_table(f, table, result.cells);
  }
  if (options.runs_jsonl) {
    auto f = open("runs.jsonl");
    for (const auto& rec : result.runs) f << run_to_json(rec, spec).dump() << '\n';
  }
}

}  // namespace letfsim
