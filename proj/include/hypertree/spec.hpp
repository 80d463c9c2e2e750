#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

namespace hypertree {

using ojson = nlohmann::ordered_json;

struct Diagnostic {
  int line = 0;  // 0 when not tied to a line
  std::string key;
  std::string message;

  std::string str() const {
    std::string s = "spec";
    if (line > 0) s += ":" + std::to_string(line);
    s += ": ";
    if (!key.empty()) s += key + ": ";
    return s + message;
  }
};

enum class ValueKind { integer, real, int_list, real_list, text, boolean, optional_real };

struct KeyDef {
  std::string name;
  ValueKind kind;
  std::string default_value;
};

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"collapse", "wavelet", "embed", "protocol", "separation"};
  return names;
}

/// Keys understood by each suite, with defaults. Common keys: seed, leaf_cap.
inline const std::vector<KeyDef>& suite_keys(const std::string& suite) {
  using K = ValueKind;
  static const std::map<std::string, std::vector<KeyDef>> table{
      {"collapse",
       {{"m", K::int_list, "2"}, {"R", K::int_list, "8..16"}, {"k", K::integer, "2"}, {"B", K::real, "1"},
        {"eta", K::real, "0.1"}, {"trials", K::integer, "20"}, {"strategy", K::text, "random_uniform"},
        {"c", K::optional_real, ""}, {"oracle_max_leaves", K::integer, "16384"}}},
      {"wavelet",
       {{"m", K::int_list, "2,3"}, {"R", K::int_list, "1..5"}, {"k", K::int_list, "1,4,16"},
        {"subspaces", K::integer, "200"}, {"eps", K::real, "0.5"}}},
      {"embed",
       {{"m", K::int_list, "3"}, {"R", K::int_list, "6"}, {"k", K::int_list, "2"}, {"epsilon", K::real, "0.1"},
        {"kappa", K::optional_real, ""}, {"c_k", K::optional_real, ""}, {"pair_budget", K::integer, "2000000"},
        {"eta", K::real, "0.1"}, {"dump", K::boolean, "true"}}},
      {"protocol",
       {{"m", K::int_list, "8"}, {"R", K::int_list, "4..12"}, {"rho", K::real_list, "0.1"}, {"eps", K::real, "0"},
        {"delta", K::real, "0.1"}, {"trials", K::integer, "500"}, {"mode", K::text, "oracle"},
        {"representation", K::text, "none"}, {"k", K::integer, "2"}, {"kappa", K::optional_real, ""},
        {"kl_samples", K::integer, "0"}}},
      {"separation",
       {{"m", K::integer, "2"}, {"R", K::int_list, "4..12"}, {"k", K::integer, "2"}, {"B", K::real, "1"},
        {"rho", K::real, "0.1"}, {"eps", K::real, "0"}, {"delta", K::real, "0.1"}, {"eta", K::real, "0.1"},
        {"epsilon", K::real, "0.1"}, {"trials", K::integer, "200"}, {"euclid_trials", K::integer, "20"}}},
  };
  auto it = table.find(suite);
  if (it == table.end()) throw std::invalid_argument("unknown suite '" + suite + "'");
  return it->second;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::optional<long long> parse_int(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (*end != '\0') return std::nullopt;
  return v;
}

inline std::optional<double> parse_real(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (*end != '\0' || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, ',')) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

/// Parses `text` as `kind`; returns an error message on failure.
inline std::optional<std::string> parse_value(ValueKind kind, const std::string& text, ojson& out) {
  switch (kind) {
    case ValueKind::integer: {
      auto v = parse_int(text);
      if (!v) return "expected an integer, got '" + text + "'";
      out = *v;
      return std::nullopt;
    }
    case ValueKind::real: {
      auto v = parse_real(text);
      if (!v) return "expected a number, got '" + text + "'";
      out = *v;
      return std::nullopt;
    }
    case ValueKind::optional_real: {
      if (text.empty() || text == "auto") {
        out = nullptr;
        return std::nullopt;
      }
      auto v = parse_real(text);
      if (!v) return "expected a number or 'auto', got '" + text + "'";
      out = *v;
      return std::nullopt;
    }
    case ValueKind::boolean: {
      if (text == "true" || text == "1" || text == "yes") out = true;
      else if (text == "false" || text == "0" || text == "no") out = false;
      else return "expected true/false, got '" + text + "'";
      return std::nullopt;
    }
    case ValueKind::text:
      out = text;
      return std::nullopt;
    case ValueKind::int_list: {
      out = ojson::array();
      for (const auto& tok : split_commas(text)) {
        const auto dots = tok.find("..");
        if (dots != std::string::npos) {
          auto a = parse_int(trim(tok.substr(0, dots))), b = parse_int(trim(tok.substr(dots + 2)));
          if (!a || !b) return "bad range '" + tok + "' (expected a..b)";
          if (*b < *a) return "empty range '" + tok + "'";
          if (*b - *a > 100000) return "range '" + tok + "' too long";
          for (long long x = *a; x <= *b; ++x) out.push_back(x);
        } else {
          auto v = parse_int(tok);
          if (!v) return "expected integers, got '" + tok + "'";
          out.push_back(*v);
        }
      }
      return std::nullopt;
    }
    case ValueKind::real_list: {
      out = ojson::array();
      for (const auto& tok : split_commas(text)) {
        auto v = parse_real(tok);
        if (!v) return "expected numbers, got '" + tok + "'";
        out.push_back(*v);
      }
      return std::nullopt;
    }
  }
  return "unsupported value kind";
}

}  // namespace detail

/// A parsed experiment spec: the suite, the master seed, the leaf cap and
/// every suite key resolved (defaults filled in), plus source lines.
struct ExperimentSpec {
  std::string suite;
  std::uint64_t seed = 1;
  std::size_t leaf_cap = std::size_t{1} << 24;
  ojson params = ojson::object();
  std::map<std::string, int> lines;

  int line_of(const std::string& key) const {
    auto it = lines.find(key);
    return it == lines.end() ? 0 : it->second;
  }

  ojson to_json(const std::string& version) const {
    ojson j;
    j["suite"] = suite;
    j["seed"] = seed;
    j["leaf_cap"] = leaf_cap;
    j["version"] = version;
    j["params"] = params;
    return j;
  }

  std::vector<long long> ints(const std::string& key) const {
    const auto& v = params.at(key);
    if (v.is_array()) return v.get<std::vector<long long>>();
    return {v.get<long long>()};
  }
  std::vector<double> reals(const std::string& key) const {
    const auto& v = params.at(key);
    if (v.is_array()) return v.get<std::vector<double>>();
    return {v.get<double>()};
  }
  long long integer(const std::string& key) const { return params.at(key).get<long long>(); }
  double real(const std::string& key) const { return params.at(key).get<double>(); }
  std::optional<double> optional_real(const std::string& key) const {
    const auto& v = params.at(key);
    if (v.is_null()) return std::nullopt;
    return v.get<double>();
  }
  std::string text(const std::string& key) const { return params.at(key).get<std::string>(); }
  bool flag(const std::string& key) const { return params.at(key).get<bool>(); }
};

/// Reads `key = value` lines ('#' starts a comment). Parse problems are
/// appended to `diags` with their line numbers.
inline ExperimentSpec parse_spec(std::istream& in, const std::string& suite, std::vector<Diagnostic>& diags) {
  ExperimentSpec spec;
  spec.suite = suite;
  const auto& defs = suite_keys(suite);
  std::map<std::string, std::pair<std::string, int>> raw;
  std::string line;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      diags.push_back({no, "", "expected 'key = value'"});
      continue;
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) {
      diags.push_back({no, "", "missing key"});
      continue;
    }
    if (raw.count(key)) {
      diags.push_back({no, key, "duplicate key (first set on line " + std::to_string(raw[key].second) + ")"});
      continue;
    }
    raw[key] = {value, no};
    spec.lines[key] = no;
  }
  for (const auto& [key, vl] : raw) {
    if (key == "suite") {
      if (vl.first != suite) diags.push_back({vl.second, key, "spec is for suite '" + vl.first + "', not '" + suite + "'"});
      continue;
    }
    if (key == "seed") {
      auto v = detail::parse_int(vl.first);
      if (!v || *v < 0) diags.push_back({vl.second, key, "expected a non-negative integer"});
      else spec.seed = static_cast<std::uint64_t>(*v);
      continue;
    }
    if (key == "leaf_cap") {
      auto v = detail::parse_int(vl.first);
      if (!v || *v < 1) diags.push_back({vl.second, key, "expected a positive integer"});
      else spec.leaf_cap = static_cast<std::size_t>(*v);
      continue;
    }
    bool known = false;
    for (const auto& d : defs) known = known || d.name == key;
    if (!known) diags.push_back({vl.second, key, "unknown key for suite '" + suite + "'"});
  }
  for (const auto& d : defs) {
    auto it = raw.find(d.name);
    const std::string text = it == raw.end() ? d.default_value : it->second.first;
    ojson v;
    if (auto err = detail::parse_value(d.kind, text, v)) {
      diags.push_back({it == raw.end() ? 0 : it->second.second, d.name, *err});
      continue;
    }
    spec.params[d.name] = v;
  }
  return spec;
}

inline std::optional<std::size_t> leaf_count_capped(long long m, long long R, std::size_t cap) {
  if (m < 1 || R < 0) return std::nullopt;
  std::size_t n = 1;
  for (long long i = 0; i < R; ++i) {
    if (n > cap / static_cast<std::size_t>(m)) return std::nullopt;
    n *= static_cast<std::size_t>(m);
  }
  return n;
}

/// Semantic checks; never mutates the spec.
inline std::vector<Diagnostic> validate(const ExperimentSpec& spec) {
  std::vector<Diagnostic> d;
  auto has = [&](const char* k) { return spec.params.contains(k); };
  auto L = [&](const std::string& k) { return spec.line_of(k); };
  auto fmt = [](double x) {
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
  };

  std::vector<long long> ms = has("m") ? spec.ints("m") : std::vector<long long>{};
  for (long long m : ms)
    if (m < 2) d.push_back({L("m"), "m", "m must be >= 2 (got " + std::to_string(m) + ")"});
  if (has("R"))
    for (long long R : spec.ints("R"))
      if (R < 1) d.push_back({L("R"), "R", "R must be >= 1 (got " + std::to_string(R) + ")"});
  if (has("k"))
    for (long long k : spec.ints("k")) {
      const long long kmin = spec.suite == "wavelet" ? 1 : (spec.suite == "collapse" ? 1 : 2);
      if (k < kmin) d.push_back({L("k"), "k", "k must be >= " + std::to_string(kmin)});
    }
  if (has("rho"))
    for (double rho : spec.reals("rho")) {
      if (rho == 0.5) d.push_back({L("rho"), "rho", "noise at channel capacity zero (rho = 1/2)"});
      else if (!(rho > 0.0 && rho < 0.5)) d.push_back({L("rho"), "rho", "rho must lie in (0, 1/2), got " + fmt(rho)});
    }
  if (has("eta") && spec.suite != "embed") {
    const double eta = spec.real("eta");
    for (long long m : ms) {
      if (m < 2) continue;
      const double hi = 0.25 * std::log(static_cast<double>(m));
      if (!(eta > 0.0 && eta < hi))
        d.push_back({L("eta"), "eta", "eta = " + fmt(eta) + " outside (0, log(m)/4) = (0, " + fmt(hi) + ") for m = " +
                                          std::to_string(m)});
    }
  }
  for (const char* key : {"epsilon", "delta"})
    if (has(key)) {
      const double v = spec.real(key);
      if (!(v > 0.0 && v < 1.0)) d.push_back({L(key), key, std::string(key) + " must lie in (0, 1)"});
    }
  if (has("eps")) {
    const double v = spec.real("eps");
    if (!(v >= 0.0 && v <= 1.0)) d.push_back({L("eps"), "eps", "eps must lie in [0, 1]"});
  }
  for (const char* key : {"trials", "subspaces", "euclid_trials", "pair_budget", "oracle_max_leaves"})
    if (has(key) && spec.integer(key) < 1) d.push_back({L(key), key, std::string(key) + " must be >= 1"});
  if (has("kl_samples") && spec.integer("kl_samples") < 0) d.push_back({L("kl_samples"), "kl_samples", "must be >= 0"});
  if (has("B") && !(spec.real("B") > 0.0)) d.push_back({L("B"), "B", "B must be positive"});
  if (has("strategy")) {
    const auto s = spec.text("strategy");
    if (s != "random_uniform" && s != "stress_min")
      d.push_back({L("strategy"), "strategy", "expected random_uniform or stress_min"});
  }
  if (has("mode")) {
    const auto s = spec.text("mode");
    if (s != "oracle" && s != "protocol") d.push_back({L("mode"), "mode", "expected oracle or protocol"});
  }
  if (has("representation")) {
    const auto s = spec.text("representation");
    if (s != "none" && s != "hyperbolic" && s != "euclidean")
      d.push_back({L("representation"), "representation", "expected none, hyperbolic or euclidean"});
    else if (s == "euclidean" && spec.text("mode") == "protocol")
      d.push_back({L("representation"), "representation",
                   "a Euclidean representation exposes no child membership to the estimator"});
  }
  for (const char* key : {"kappa", "c_k"})
    if (has(key))
      if (auto v = spec.optional_real(key); v && !(*v > 0.0))
        d.push_back({L(key), key, std::string(key) + " must be positive"});

  // leaf cap: every suite except protocol materializes m^R leaves
  if (spec.suite != "protocol" && has("R")) {
    for (long long m : ms)
      for (long long R : spec.ints("R")) {
        if (m < 2 || R < 1) continue;
        if (!leaf_count_capped(m, R, spec.leaf_cap)) {
          const double need = std::pow(static_cast<double>(m), static_cast<double>(R));
          const std::string need_s = need < 9e18 ? std::to_string(static_cast<unsigned long long>(std::llround(need))) : fmt(need);
          d.push_back({L("R"), "R", "m^R = " + need_s + " leaves for m = " + std::to_string(m) + ", R = " +
                                        std::to_string(R) + " exceeds leaf cap " + std::to_string(spec.leaf_cap) +
                                        "; required cap >= " + need_s});
        }
      }
  }
  // curvature condition, when both kappa and C_k are fixed
  if (spec.suite == "embed" && has("kappa") && has("c_k")) {
    const auto kappa = spec.optional_real("kappa"), ck = spec.optional_real("c_k");
    if (kappa && ck && *kappa > 0.0)
      for (long long m : ms) {
        if (m < 2) continue;
        const double need = *ck * std::log(static_cast<double>(m)) / spec.real("epsilon");
        if (std::sqrt(*kappa) < need)
          d.push_back({L("kappa"), "kappa", "curvature condition fails for m = " + std::to_string(m) + ": sqrt(kappa) = " +
                                                fmt(std::sqrt(*kappa)) + " < C_k log(m) / epsilon = " + fmt(need)});
      }
  }
  return d;
}

}  // namespace hypertree
