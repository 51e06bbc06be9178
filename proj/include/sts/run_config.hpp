#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <string>

#include <json.hpp>

#include "sts/error.hpp"
#include "sts/ssm_core.hpp"
#include "sts/transfer.hpp"

namespace sts {

struct RunConfig {
  std::size_t state_size = 0;
  std::size_t channels = 0;
  double dt_min = 0.001;
  double dt_max = 0.1;
  std::uint64_t seed = 0;
  std::size_t segment_len = 0;
  ReadoutPolicy readout_policy = ReadoutPolicy::last_token_per_segment;
  std::optional<std::uint64_t> declared_total;

  SsmConfig ssm() const { return {channels, state_size, dt_min, dt_max, seed}; }
};

inline const char* policy_name(ReadoutPolicy p) {
  switch (p) {
    case ReadoutPolicy::all_tokens: return "all";
    case ReadoutPolicy::last_token_per_segment: return "last_per_segment";
    case ReadoutPolicy::final_token_only: return "final";
  }
  return "?";
}

inline ReadoutPolicy parse_policy(const std::string& s) {
  if (s == "all") return ReadoutPolicy::all_tokens;
  if (s == "last_per_segment") return ReadoutPolicy::last_token_per_segment;
  if (s == "final") return ReadoutPolicy::final_token_only;
  throw ConfigError("readout_policy: expected \"all\", \"last_per_segment\" or \"final\", got \"" + s + "\"");
}

// Strict parse: unknown keys, missing required keys and wrong types are all
// configuration errors.
inline RunConfig parse_run_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("run config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");

  static const std::set<std::string> known{"state_size", "channels",       "dt_min",        "dt_max",
                                           "seed",       "segment_len",    "readout_policy", "declared_total"};
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("run config: unknown key \"" + key + "\"");
  }

  auto positive_int = [&](const char* key) -> std::uint64_t {
    if (!j.contains(key)) throw ConfigError(std::string("run config: missing required key \"") + key + "\"");
    const auto& v = j.at(key);
    if (!v.is_number_unsigned()) throw ConfigError(std::string("run config: \"") + key + "\" must be a non-negative integer");
    return v.get<std::uint64_t>();
  };
  auto real = [&](const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_number()) throw ConfigError(std::string("run config: \"") + key + "\" must be a number");
    return v.get<double>();
  };

  RunConfig c;
  c.state_size = positive_int("state_size");
  c.channels = positive_int("channels");
  c.seed = positive_int("seed");
  c.segment_len = positive_int("segment_len");
  c.dt_min = real("dt_min", c.dt_min);
  c.dt_max = real("dt_max", c.dt_max);
  if (j.contains("readout_policy")) {
    if (!j.at("readout_policy").is_string()) throw ConfigError("run config: \"readout_policy\" must be a string");
    c.readout_policy = parse_policy(j.at("readout_policy").get<std::string>());
  }
  if (j.contains("declared_total") && !j.at("declared_total").is_null()) {
    c.declared_total = positive_int("declared_total");
    if (*c.declared_total == 0) throw ConfigError("run config: \"declared_total\" must be >= 1");
  }
  if (c.segment_len == 0) throw ConfigError("run config: \"segment_len\" must be >= 1");
  c.ssm().validate();
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open run config: " + path);
  const std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_run_config(text);
}

}  // namespace sts
