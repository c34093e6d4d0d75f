#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include <json.hpp>

#include "letfsim/leveraged_etf.hpp"
#include "letfsim/sim_engine.hpp"

namespace letfsim {

/// A (cash multiplier x normalized threshold) grid of Monte Carlo runs.
struct SweepSpec {
  SimConfig base;
  std::vector<std::int64_t> c_mag_values{10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
  std::vector<double> v_nor_values{0.1, 0.2, 0.3, 0.4, 0.5};
  std::int64_t runs_per_cell = 10;
  std::uint64_t base_seed = 1;
  std::int64_t parallelism = 0;  // 0: LETFSIM_JOBS or the hardware thread count
  bool raw_kurtosis = false;

  std::size_t cell_count() const noexcept { return c_mag_values.size() * v_nor_values.size(); }

  /// Configuration of the run `run` of cell `cell` (row-major over c_mag, v_nor).
  SimConfig cell_config(std::size_t cell, std::int64_t run) const {
    SimConfig c = base;
    c.cash_multiplier = c_mag_values.at(cell / v_nor_values.size());
    c.normalized_threshold = v_nor_values.at(cell % v_nor_values.size());
    c.seed = derive_seed(base_seed, cell, static_cast<std::uint64_t>(run));
    return c;
  }

  /// Sorts and deduplicates the grid axes so cells come out in ascending order.
  void normalize() {
    std::sort(c_mag_values.begin(), c_mag_values.end());
    c_mag_values.erase(std::unique(c_mag_values.begin(), c_mag_values.end()), c_mag_values.end());
    std::sort(v_nor_values.begin(), v_nor_values.end());
    v_nor_values.erase(std::unique(v_nor_values.begin(), v_nor_values.end()), v_nor_values.end());
  }

  void validate() const {
    if (c_mag_values.empty()) throw ConfigError("c_mag_values", "must not be empty");
    if (v_nor_values.empty()) throw ConfigError("v_nor_values", "must not be empty");
    if (runs_per_cell < 1) throw ConfigError("runs_per_cell", "must be >= 1");
    if (parallelism < 0) throw ConfigError("parallelism", "must be >= 0");
    base.validate();
    if (!base.letf_enabled) return;
    for (std::int64_t c : c_mag_values) {
      if (c < 1) throw ConfigError("c_mag_values", "entries must be >= 1");
      for (double v : v_nor_values) {
        if (!(v > 0.0)) throw ConfigError("v_nor_values", "entries must be > 0");
        if (LetfParams::threshold_for(c, v) < 1) {
          throw ConfigError("v_nor_values", "v_nor " + nlohmann::json(v).dump() + " with c_mag " +
                                                std::to_string(c) + " gives a threshold below one share");
        }
      }
    }
  }
};

namespace detail {

/// Alternative spellings accepted for configuration keys.
inline constexpr std::pair<std::string_view, std::string_view> kKeyAliases[] = {
    {"n", "num_agents"},
    {"w1_max", "max_fundamental_weight"},
    {"w2_max", "max_technical_weight"},
    {"u_max", "max_noise_weight"},
    {"tau_max", "max_lookback"},
    {"sigma_eps", "noise_sigma"},
    {"p_d", "price_spread"},
    {"t_c", "order_lifetime"},
    {"t_l", "learning_lookback"},
    {"k_l", "learning_gain"},
    {"m", "reset_probability"},
    {"delta_p", "tick_size"},
    {"p_f", "fundamental_price"},
    {"t_max", "max_steps"},
    {"L", "target_leverage"},
    {"time_hold_on_failed_rebalance", "hold_time_on_failed_rebalance"},
    {"c_mag", "cash_multiplier"},
    {"v_nor", "normalized_threshold"},
};

inline std::string canonical_key(std::string_view key) {
  for (const auto& [alias, name] : kKeyAliases) {
    if (key == alias) return std::string(name);
  }
  return std::string(key);
}

template <class E>
struct EnumNames;

template <>
struct EnumNames<QuantityRounding> {
  static constexpr std::pair<QuantityRounding, std::string_view> values[] = {
      {QuantityRounding::floor, "floor"}, {QuantityRounding::nearest, "nearest"}};
};

template <>
struct EnumNames<LearningRule> {
  static constexpr std::pair<LearningRule, std::string_view> values[] = {
      {LearningRule::literal, "literal"}, {LearningRule::previous_prediction, "previous_prediction"}};
};

template <class E>
std::string enum_name(E value) {
  for (const auto& [v, name] : EnumNames<E>::values) {
    if (v == value) return std::string(name);
  }
  return "?";
}

template <class T>
T read_value(const std::string& field, const nlohmann::json& v) {
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ConfigError(field, "expected true or false, got " + v.dump());
    return v.get<bool>();
  } else if constexpr (std::is_enum_v<T>) {
    if (v.is_string()) {
      for (const auto& [value, name] : EnumNames<T>::values) {
        if (v.get<std::string>() == name) return value;
      }
    }
    std::string allowed;
    for (const auto& [value, name] : EnumNames<T>::values) allowed += (allowed.empty() ? "" : ", ") + std::string(name);
    throw ConfigError(field, "expected one of {" + allowed + "}, got " + v.dump());
  } else if constexpr (std::is_integral_v<T>) {
    if (v.is_number_integer()) {
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_unsigned() || v.get<std::int64_t>() >= 0) return v.get<T>();
        throw ConfigError(field, "must be >= 0, got " + v.dump());
      } else {
        if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(std::numeric_limits<T>::max())) {
          throw ConfigError(field, "out of range: " + v.dump());
        }
        return v.get<T>();
      }
    }
    if (v.is_number_float()) {
      const double d = v.get<double>();
      if (std::isfinite(d) && d == std::floor(d) && std::abs(d) < 9.0e15) {
        if (std::is_unsigned_v<T> && d < 0) throw ConfigError(field, "must be >= 0, got " + v.dump());
        return static_cast<T>(d);
      }
    }
    throw ConfigError(field, "expected an integer, got " + v.dump());
  } else {
    static_assert(std::is_same_v<T, double>);
    if (!v.is_number()) throw ConfigError(field, "expected a number, got " + v.dump());
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(field, "must be finite");
    return d;
  }
}

template <class T>
std::vector<T> read_list(const std::string& field, const nlohmann::json& v) {
  if (!v.is_array()) return {read_value<T>(field, v)};
  std::vector<T> out;
  for (const auto& item : v) out.push_back(read_value<T>(field, item));
  return out;
}

template <class T>
nlohmann::json write_value(const T& value) {
  if constexpr (std::is_enum_v<T>) {
    return enum_name(value);
  } else {
    return value;
  }
}

}  // namespace detail

/// Applies one `key = value` setting. Unknown keys and bad values raise a
/// ConfigError naming the key.
inline void apply_setting(SweepSpec& spec, std::string_view raw_key, const nlohmann::json& value) {
  const std::string key = detail::canonical_key(raw_key);
  if (key == "c_mag_values") {
    spec.c_mag_values = detail::read_list<std::int64_t>(key, value);
    return;
  }
  if (key == "v_nor_values") {
    spec.v_nor_values = detail::read_list<double>(key, value);
    return;
  }
  if (key == "cash_multiplier") {
    spec.c_mag_values = {detail::read_value<std::int64_t>(key, value)};
    spec.base.cash_multiplier = spec.c_mag_values.front();
    return;
  }
  if (key == "normalized_threshold") {
    spec.v_nor_values = {detail::read_value<double>(key, value)};
    spec.base.normalized_threshold = spec.v_nor_values.front();
    return;
  }
  if (key == "runs_per_cell") {
    spec.runs_per_cell = detail::read_value<std::int64_t>(key, value);
    return;
  }
  if (key == "base_seed") {
    spec.base_seed = detail::read_value<std::uint64_t>(key, value);
    return;
  }
  if (key == "parallelism") {
    spec.parallelism = detail::read_value<std::int64_t>(key, value);
    return;
  }
  if (key == "raw_kurtosis") {
    spec.raw_kurtosis = detail::read_value<bool>(key, value);
    return;
  }
  if (key == "seed") throw ConfigError(key, "per-run seeds are derived from base_seed; set base_seed instead");
  bool found = false;
  for_each_field(spec.base, [&](const char* name, auto& field) {
    if (key == name) {
      field = detail::read_value<std::decay_t<decltype(field)>>(key, value);
      found = true;
    }
  });
  if (!found) throw ConfigError(std::string(raw_key), "unknown configuration key");
}

/// Parses a `key=value` command-line override. The value is read as JSON when
/// it parses, then as a bare comma list (`10,30`), otherwise as a plain string.
inline void apply_override(SweepSpec& spec, std::string_view text) {
  if (text.starts_with("--")) text.remove_prefix(2);
  const auto eq = text.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError(std::string(text), "override must have the form key=value");
  }
  const std::string key(text.substr(0, eq));
  const std::string raw(text.substr(eq + 1));
  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded() && raw.find(',') != std::string::npos) {
    value = nlohmann::json::parse("[" + raw + "]", nullptr, false);
  }
  if (value.is_discarded()) value = raw;
  apply_setting(spec, key, value);
}

/// Builds a sweep from a flat JSON object plus overrides applied in order.
inline SweepSpec parse_config(const nlohmann::json& doc, std::span<const std::string> overrides = {}) {
  SweepSpec spec;
  if (!doc.is_null()) {
    if (!doc.is_object()) throw ConfigError("<config>", "top level must be a JSON object");
    for (const auto& [key, value] : doc.items()) apply_setting(spec, key, value);
  }
  for (const auto& o : overrides) apply_override(spec, o);
  spec.normalize();
  spec.validate();
  return spec;
}

/// Reads a JSON config file; an empty file yields the defaults.
inline SweepSpec parse_config_file(const std::string& path, std::span<const std::string> overrides = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<config>", "cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  nlohmann::json doc;
  if (text.find_first_not_of(" \t\r\n") != std::string::npos) {
    try {
      doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("<config>", std::string("invalid JSON in ") + path + ": " + e.what());
    }
  }
  return parse_config(doc, overrides);
}

/// The fully resolved sweep with canonical keys, in a stable order. The
/// worker count is left out because it never changes results.
inline nlohmann::ordered_json to_json(const SweepSpec& spec) {
  nlohmann::ordered_json out;
  for_each_field(spec.base, [&](const char* name, const auto& field) {
    const std::string_view key = name;
    if (key == "seed" || key == "cash_multiplier" || key == "normalized_threshold") return;
    out[name] = detail::write_value(field);
  });
  out["c_mag_values"] = spec.c_mag_values;
  out["v_nor_values"] = spec.v_nor_values;
  out["runs_per_cell"] = spec.runs_per_cell;
  out["base_seed"] = spec.base_seed;
  out["raw_kurtosis"] = spec.raw_kurtosis;
  return out;
}

}  // namespace letfsim
