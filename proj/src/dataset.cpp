#include "mdd/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>

namespace mdd {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(trim(field));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

template <typename T>
bool parse_number(const std::string& s, T& out) {
  if (s.empty()) return false;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  if constexpr (std::is_floating_point_v<T>) {
    // std::from_chars for double is not available on every libstdc++ we target.
    std::istringstream in(s);
    in.imbue(std::locale::classic());
    in >> out;
    return !in.fail() && in.peek() == std::char_traits<char>::eof();
  } else {
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end;
  }
}

}  // namespace

std::vector<Request> load_requests(const std::filesystem::path& path, const ScenarioConfig& config,
                                   const DroneSpec& spec) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open request file " + path.string());

  const std::string where = path.string() + ":";
  std::string line;
  std::size_t row = 0;
  if (!std::getline(in, line)) return {};
  ++row;
  const auto header = split(trim(line), ',');
  const std::vector<std::string> expected{"id", "x_m", "y_m", "parcel_mass_kg", "demand_window"};
  if (header != expected) {
    throw std::runtime_error(where + "1: expected header id,x_m,y_m,parcel_mass_kg,demand_window");
  }

  std::vector<Request> requests;
  std::set<RequestId> seen;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto fields = split(trim(line), ',');
    const std::string at = where + std::to_string(row) + ": ";
    if (fields.size() != 5) throw std::runtime_error(at + "expected 5 fields");

    Request r;
    double x = 0.0, y = 0.0;
    if (!parse_number(fields[0], r.id)) throw std::runtime_error(at + "bad id '" + fields[0] + "'");
    if (!parse_number(fields[1], x) || !parse_number(fields[2], y)) {
      throw std::runtime_error(at + "bad coordinates");
    }
    if (!parse_number(fields[3], r.parcel_mass)) throw std::runtime_error(at + "bad parcel mass");
    if (!parse_number(fields[4], r.demand_window)) throw std::runtime_error(at + "bad demand window");
    r.location = Point2D(x, y);

    if (!seen.insert(r.id).second) {
      throw std::runtime_error(at + "duplicate request id " + std::to_string(r.id));
    }
    try {
      validate_request(r, config, spec);
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(at + e.what());
    }
    requests.push_back(r);
  }

  std::stable_sort(requests.begin(), requests.end(), [](const Request& a, const Request& b) {
    return a.demand_window != b.demand_window ? a.demand_window < b.demand_window : a.id < b.id;
  });
  return requests;
}

void write_requests(const std::filesystem::path& path, const std::vector<Request>& requests) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write request file " + path.string());
  out << "id,x_m,y_m,parcel_mass_kg,demand_window\n";
  out << std::setprecision(17);
  for (const auto& r : requests) {
    out << r.id << ',' << r.location.x() << ',' << r.location.y() << ',' << r.parcel_mass << ','
        << r.demand_window << '\n';
  }
}

std::vector<Request> generate_synthetic(const ScenarioConfig& config, const DroneSpec& spec,
                                        int cluster_count, int requests_per_window) {
  validate(config);
  if (cluster_count < 1) throw std::invalid_argument("cluster_count must be >= 1");
  if (requests_per_window < 0) throw std::invalid_argument("requests_per_window must be >= 0");
  if (requests_per_window == 0) return {};

  const Bounds& b = config.map_bounds;
  const double sigma = config.cluster_sigma;

  struct Cluster {
    Point2D center;
    double sigma;
  };
  std::vector<Cluster> clusters;
  std::vector<double> weights;
  {
    Rng layout(config.layout_seed);
    const double mx = std::min(1.5 * sigma, 0.25 * b.width);
    const double my = std::min(1.5 * sigma, 0.25 * b.height);
    std::uniform_real_distribution<double> ux(mx, b.width - mx), uy(my, b.height - my);
    std::uniform_real_distribution<double> spread(0.6, 1.4), weight(0.2, 1.0);
    for (int k = 0; k < cluster_count; ++k) {
      Cluster c{Point2D(ux(layout), uy(layout)), sigma * spread(layout)};
      clusters.push_back(c);
      weights.push_back(weight(layout));
    }
  }

  Rng rng(config.rng_seed);
  std::discrete_distribution<int> pick(weights.begin(), weights.end());
  std::normal_distribution<double> normal(0.0, 1.0);
  const double mass_hi = std::min(config.parcel_mass_max, spec.max_payload);
  const double mass_lo = std::min(config.parcel_mass_min, mass_hi);
  std::uniform_real_distribution<double> mass(mass_lo, mass_hi);

  std::vector<Request> out;
  out.reserve(static_cast<std::size_t>(requests_per_window) * config.num_windows);
  RequestId next_id = 1;
  for (int w = 1; w <= config.num_windows; ++w) {
    for (int i = 0; i < requests_per_window; ++i) {
      const Cluster& c = clusters[pick(rng)];
      Point2D p = c.center;
      for (int attempt = 0; attempt < 64; ++attempt) {
        p = c.center + c.sigma * Point2D(normal(rng), normal(rng));
        if (b.contains(p)) break;
      }
      p = p.cwiseMax(Point2D::Zero()).cwiseMin(Point2D(b.width, b.height));
      Request r;
      r.id = next_id++;
      r.location = p;
      r.parcel_mass = mass(rng);
      r.demand_window = w;
      out.push_back(r);
    }
  }
  return out;
}

KeyValueConfig KeyValueConfig::parse(const std::string& text) {
  KeyValueConfig cfg;
  std::istringstream in(text);
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(row) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw std::invalid_argument("config line " + std::to_string(row) + ": empty key");
    if (cfg.values_.count(key)) {
      throw std::invalid_argument("config line " + std::to_string(row) + ": duplicate key " + key);
    }
    cfg.values_[key] = value;
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void KeyValueConfig::get(const std::string& key, double& out) const {
  auto it = values_.find(key);
  if (it == values_.end()) return;
  used_[key] = true;
  if (!parse_number(it->second, out)) throw std::invalid_argument("config key " + key + ": not a number");
}

void KeyValueConfig::get(const std::string& key, int& out) const {
  auto it = values_.find(key);
  if (it == values_.end()) return;
  used_[key] = true;
  if (!parse_number(it->second, out)) throw std::invalid_argument("config key " + key + ": not an integer");
}

void KeyValueConfig::get(const std::string& key, std::uint64_t& out) const {
  auto it = values_.find(key);
  if (it == values_.end()) return;
  used_[key] = true;
  if (!parse_number(it->second, out)) {
    throw std::invalid_argument("config key " + key + ": not an unsigned integer");
  }
}

void KeyValueConfig::get(const std::string& key, bool& out) const {
  auto it = values_.find(key);
  if (it == values_.end()) return;
  used_[key] = true;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes") {
    out = true;
  } else if (v == "false" || v == "0" || v == "no") {
    out = false;
  } else {
    throw std::invalid_argument("config key " + key + ": not a boolean");
  }
}

void KeyValueConfig::get(const std::string& key, std::string& out) const {
  auto it = values_.find(key);
  if (it == values_.end()) return;
  used_[key] = true;
  out = it->second;
}

std::vector<std::string> KeyValueConfig::unused_keys() const {
  std::vector<std::string> out;
  for (const auto& [key, value] : values_) {
    if (!used_.count(key)) out.push_back(key);
  }
  return out;
}

void apply(const KeyValueConfig& kv, ScenarioConfig& c) {
  kv.get("map_width", c.map_bounds.width);
  kv.get("map_height", c.map_bounds.height);
  kv.get("num_depots", c.num_depots);
  kv.get("num_drones", c.num_drones);
  kv.get("num_windows", c.num_windows);
  kv.get("window_duration", c.window_duration);
  kv.get("alpha", c.alpha);
  std::string scope = c.reward_scope == RewardScope::fleet ? "fleet" : "observed";
  kv.get("reward_scope", scope);
  if (scope != "fleet" && scope != "observed") {
    throw std::invalid_argument("reward_scope must be fleet or observed");
  }
  c.reward_scope = scope == "fleet" ? RewardScope::fleet : RewardScope::observed;
  kv.get("max_parcels_per_drone", c.max_parcels_per_drone);
  kv.get("rng_seed", c.rng_seed);
  kv.get("action_neighbors", c.action_neighbors);
  kv.get("release_lead_windows", c.release_lead_windows);
  kv.get("layout_seed", c.layout_seed);
  kv.get("cluster_count", c.cluster_count);
  kv.get("cluster_sigma", c.cluster_sigma);
  kv.get("requests_per_window", c.requests_per_window);
  kv.get("parcel_mass_min", c.parcel_mass_min);
  kv.get("parcel_mass_max", c.parcel_mass_max);
  validate(c);
}

void apply(const KeyValueConfig& kv, DroneSpec& s) {
  kv.get("drone_body_mass", s.body_mass);
  kv.get("drone_battery_mass", s.battery_mass);
  kv.get("drone_rotor_diameter", s.rotor_diameter);
  kv.get("drone_rotor_count", s.rotor_count);
  kv.get("drone_ground_speed", s.ground_speed);
  kv.get("drone_power_efficiency", s.power_efficiency);
  kv.get("drone_max_payload", s.max_payload);
  kv.get("drone_max_range", s.max_range);
  validate(s);
}

void apply(const KeyValueConfig& kv, EnvironmentConstants& c) {
  kv.get("gravity", c.gravity);
  kv.get("air_density", c.air_density);
  double pitch_deg = c.pitch_angle * 180.0 / std::numbers::pi;
  kv.get("pitch_deg", pitch_deg);
  c.pitch_angle = pitch_deg * std::numbers::pi / 180.0;
  validate(c);
}

}  // namespace mdd
