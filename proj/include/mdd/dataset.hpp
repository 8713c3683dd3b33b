#pragma once

#include "mdd/core.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace mdd {

/// Reads `id,x_m,y_m,parcel_mass_kg,demand_window` rows. Result is sorted by demand window, then id.
/// Throws std::runtime_error with the file name and row number on any malformed or invalid row.
std::vector<Request> load_requests(const std::filesystem::path& path, const ScenarioConfig& config,
                                   const DroneSpec& spec);

void write_requests(const std::filesystem::path& path, const std::vector<Request>& requests);

/// Mixture-of-Gaussians demand. Cluster layout comes from `config.layout_seed`, samples from
/// `config.rng_seed`; each window receives exactly `requests_per_window` requests.
std::vector<Request> generate_synthetic(const ScenarioConfig& config, const DroneSpec& spec,
                                        int cluster_count, int requests_per_window);

/// Flat `key = value` file; `#` starts a comment. Duplicate keys are an error.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;
  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  // Each getter leaves `out` untouched when the key is absent and marks the key as consumed.
  void get(const std::string& key, double& out) const;
  void get(const std::string& key, int& out) const;
  void get(const std::string& key, std::uint64_t& out) const;
  void get(const std::string& key, bool& out) const;
  void get(const std::string& key, std::string& out) const;

  /// Keys that no getter asked for; used to reject typos.
  std::vector<std::string> unused_keys() const;

 private:
  std::map<std::string, std::string> values_;
  mutable std::map<std::string, bool> used_;
};

void apply(const KeyValueConfig& kv, ScenarioConfig& config);
void apply(const KeyValueConfig& kv, DroneSpec& spec);
void apply(const KeyValueConfig& kv, EnvironmentConstants& consts);

}  // namespace mdd
