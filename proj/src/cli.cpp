#include "mdd/cli.hpp"

#include "mdd/experiments.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <vector>

namespace mdd {
namespace {

namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InfeasibleScenario : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::string config;
  std::string requests;
  std::vector<std::string> overrides;
  std::string out_dir = ".";
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "key = value scenario and learning config");
  cmd->add_option("--requests", o.requests, "request CSV (id,x_m,y_m,parcel_mass_kg,demand_window)");
  cmd->add_option("--set", o.overrides, "config override key=value, applied after --config");
  cmd->add_option("--out", o.out_dir, "output directory");
}

KeyValueConfig read_config(const std::string& path, const std::vector<std::string>& overrides) {
  KeyValueConfig kv = path.empty() ? KeyValueConfig{} : KeyValueConfig::load(path);
  for (const auto& s : overrides) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + s + "'");
    kv.set(s.substr(0, eq), s.substr(eq + 1));
  }
  return kv;
}

struct Setup {
  LoadedConfig config;
  Scenario scenario;
};

Setup load_setup(const CommonOptions& o) {
  if (o.config.empty() && o.requests.empty()) {
    throw UsageError("a scenario is required: pass --config and/or --requests");
  }
  Setup s;
  s.config = load_config(read_config(o.config, o.overrides));
  const auto& c = s.config;
  if (o.requests.empty()) {
    s.scenario = synthetic_scenario(c.scenario, c.drone, c.constants);
  } else {
    s.scenario.config = c.scenario;
    s.scenario.drone = c.drone;
    s.scenario.constants = c.constants;
    s.scenario.synthetic = false;
    try {
      s.scenario.requests = load_requests(o.requests, c.scenario, c.drone);
    } catch (const std::runtime_error& e) {
      throw UsageError(e.what());
    }
  }
  return s;
}

ServiceMap checked_map(const Scenario& scenario, MapKind kind) {
  try {
    return build_map(scenario, kind);
  } catch (const std::invalid_argument& e) {
    if (kind == MapKind::kmeans) throw InfeasibleScenario(std::string("segmentation failed: ") + e.what());
    throw;
  }
}

// Unreachable requests stay pending and are counted in the report; a map that reaches none is rejected.
ServiceMap feasible_kmeans_map(const Scenario& scenario) {
  auto map = checked_map(scenario, MapKind::kmeans);
  const auto bad = unreachable_requests(method_context(scenario, MethodId::mar_ops, map, scenario.requests));
  if (bad.size() == scenario.requests.size()) {
    throw InfeasibleScenario("all " + std::to_string(bad.size()) + " request(s) unreachable from every depot");
  }
  return map;
}

ServiceMap method_map(const Scenario& scenario, MethodId m, const ServiceMap& kmeans_map) {
  return map_kind(m) == MapKind::kmeans ? kmeans_map : checked_map(scenario, map_kind(m));
}

MethodId method_arg(const std::string& name) {
  const auto m = parse_method(name);
  if (!m) throw UsageError("unknown method '" + name + "'");
  return *m;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  return f;
}

void write_json(const fs::path& path, const nlohmann::json& j) { open_out(path) << j.dump(2) << '\n'; }

void write_curves(const fs::path& path, const std::vector<CurvePoint>& curves) {
  auto f = open_out(path);
  write_curves_csv(f, curves);
}

void write_trace(const fs::path& path, const Scenario& scenario, MethodId m, const ServiceMap& map,
                 const EpisodeResult& first, std::uint64_t seed) {
  auto f = open_out(path);
  write_trace_csv(f, method_context(scenario, m, map, episode_requests(scenario, seed)), first.trace);
}

void print_summary(std::ostream& out, const MetricsReport& r) {
  out << to_string(r.method) << ": energy " << r.mean_energy_kj.mean << " +- " << r.mean_energy_kj.std
      << " kJ, delay " << r.avg_delay.mean << " +- " << r.avg_delay.std << " h, combined "
      << r.combined_cost.mean << ", delivered " << r.delivered_fraction.mean << '\n';
}

int run_segment(const CommonOptions& o, const std::string& kind, std::ostream& out) {
  const auto s = load_setup(o);
  if (kind != "kmeans" && kind != "grid") throw UsageError("--kind must be kmeans or grid");
  const auto map = kind == "kmeans" ? feasible_kmeans_map(s.scenario) : checked_map(s.scenario, MapKind::grid);
  write_json(fs::path(o.out_dir) / "servicemap.json", to_json(map));
  out << kind << " map with " << map.size() << " areas written to " << o.out_dir << '\n';
  return kExitOk;
}

int run_train(const CommonOptions& o, const std::string& method_name, std::optional<int> episodes,
              std::ostream& out) {
  auto s = load_setup(o);
  const auto m = method_arg(method_name);
  if (!is_learned(m)) throw UsageError(method_name + " has no policy to train");
  if (episodes) {
    s.config.experiment.learning.episodes = *episodes;
    validate(s.config.experiment.learning);
  }
  const auto map = method_map(s.scenario, m, feasible_kmeans_map(s.scenario));
  const auto agent = train_method(s.scenario, m, map, s.config.experiment);
  auto ck = checkpoint_json(agent_kind(m), agent);
  ck["method"] = to_string(m);
  const fs::path dir(o.out_dir);
  write_json(dir / "checkpoint.json", ck);
  write_curves(dir / "curves.csv", agent.curves);
  write_json(dir / "servicemap.json", to_json(map));
  out << to_string(m) << " trained for " << agent.curves.size() << " episodes, checkpoint in " << o.out_dir
      << '\n';
  return kExitOk;
}

int run_evaluate(const CommonOptions& o, const std::string& method_name, const std::string& checkpoint,
                 std::optional<int> reps, std::ostream& out) {
  auto s = load_setup(o);
  const auto m = method_arg(method_name);
  auto& e = s.config.experiment;
  if (reps) {
    if (*reps < 1) throw UsageError("--reps must be >= 1");
    e.repetitions = *reps;
  }
  std::shared_ptr<const PolicyNetwork> policy;
  if (is_learned(m)) {
    if (checkpoint.empty()) throw UsageError(method_name + " needs --checkpoint");
    std::ifstream f(checkpoint);
    if (!f) throw UsageError("cannot open checkpoint " + checkpoint);
    AgentKind kind{};
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& ex) {
      throw UsageError("bad checkpoint " + checkpoint + ": " + ex.what());
    }
    policy = load_checkpoint(j, &kind).actor;
    if (kind != agent_kind(m)) throw UsageError("checkpoint agent kind does not match " + method_name);
  }
  const auto map = method_map(s.scenario, m, feasible_kmeans_map(s.scenario));
  auto run = run_method(s.scenario, m, map, policy, e);
  std::vector<MetricsReport> reports{run.report};
  const auto norm = apply_combined_cost(reports);
  const fs::path dir(o.out_dir);
  write_json(dir / "report.json", report_json(s.scenario, e, reports, norm, {}));
  write_json(dir / "timing.json", timing_json(reports));
  write_json(dir / "servicemap.json", to_json(map));
  write_trace(dir / "trace.csv", s.scenario, m, map, run.first, e.eval_seed);
  print_summary(out, reports.front());
  return kExitOk;
}

int run_compare(const CommonOptions& o, std::optional<int> reps, std::optional<int> episodes,
                std::ostream& out) {
  auto s = load_setup(o);
  auto& e = s.config.experiment;
  if (reps) {
    if (*reps < 1) throw UsageError("--reps must be >= 1");
    e.repetitions = *reps;
  }
  if (episodes) {
    e.learning.episodes = *episodes;
    validate(e.learning);
  }
  const auto kmap = feasible_kmeans_map(s.scenario);
  const fs::path dir(o.out_dir);
  std::vector<MetricsReport> reports;
  std::vector<EpisodeResult> firsts;
  std::map<MethodId, std::vector<CurvePoint>> curves;
  for (const auto m : kAllMethods) {
    const auto map = method_map(s.scenario, m, kmap);
    std::shared_ptr<const PolicyNetwork> policy;
    if (is_learned(m)) {
      auto agent = train_method(s.scenario, m, map, e);
      policy = agent.actor;
      write_curves(dir / to_string(m) / "curves.csv", agent.curves);
      curves[m] = std::move(agent.curves);
    }
    auto run = run_method(s.scenario, m, map, policy, e);
    write_trace(dir / to_string(m) / "trace.csv", s.scenario, m, map, run.first, e.eval_seed);
    write_json(dir / to_string(m) / "servicemap.json", to_json(map));
    reports.push_back(std::move(run.report));
  }
  const auto norm = apply_combined_cost(reports);
  write_json(dir / "report.json", report_json(s.scenario, e, reports, norm, curves));
  write_json(dir / "timing.json", timing_json(reports));
  write_json(dir / "servicemap.json", to_json(kmap));
  for (const auto& r : reports) print_summary(out, r);
  return kExitOk;
}

int run_generate(const CommonOptions& o, std::optional<std::uint64_t> seed, const std::string& file,
                 std::ostream& out) {
  if (file.empty()) throw UsageError("generate needs --out FILE");
  auto c = load_config(read_config(o.config, o.overrides));
  if (seed) c.scenario.rng_seed = *seed;
  const auto requests =
      generate_synthetic(c.scenario, c.drone, c.scenario.cluster_count, c.scenario.requests_per_window);
  const fs::path path(file);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_requests(path, requests);
  out << requests.size() << " requests written to " << file << '\n';
  return kExitOk;
}

}  // namespace

int cli_main(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-depot drone delivery: segmentation, training and evaluation", "mdd"};
  app.require_subcommand(1);

  CommonOptions seg_o, train_o, eval_o, cmp_o, gen_o;
  std::string kind = "kmeans", train_method_name, eval_method_name, checkpoint, gen_file;
  std::optional<int> train_episodes, eval_reps, cmp_reps, cmp_episodes;
  std::optional<std::uint64_t> gen_seed;

  auto* seg = app.add_subcommand("segment", "build a service map and write servicemap.json");
  add_common(seg, seg_o);
  seg->add_option("--kind", kind, "kmeans or grid");

  auto* tr = app.add_subcommand("train", "train a learned method; writes checkpoint.json and curves.csv");
  add_common(tr, train_o);
  tr->add_option("--method", train_method_name, "mar_ops, mappo or squares")->required();
  tr->add_option("--episodes", train_episodes, "training episodes");

  auto* ev = app.add_subcommand("evaluate", "evaluate one method; writes report.json and trace.csv");
  add_common(ev, eval_o);
  ev->add_option("--method", eval_method_name, "method name")->required();
  ev->add_option("--checkpoint", checkpoint, "checkpoint.json of a learned method");
  ev->add_option("--reps", eval_reps, "repetitions");

  auto* cmp = app.add_subcommand("compare", "train and evaluate all five methods");
  add_common(cmp, cmp_o);
  cmp->add_option("--reps", cmp_reps, "repetitions");
  cmp->add_option("--episodes", cmp_episodes, "training episodes per learned method");

  auto* gen = app.add_subcommand("generate", "write a synthetic request file");
  gen->add_option("--config", gen_o.config, "key = value scenario config");
  gen->add_option("--set", gen_o.overrides, "config override key=value");
  gen->add_option("--seed", gen_seed, "request sampling seed");
  gen->add_option("--out", gen_file, "request CSV to write");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitConfig;
  }

  try {
    if (seg->parsed()) return run_segment(seg_o, kind, out);
    if (tr->parsed()) return run_train(train_o, train_method_name, train_episodes, out);
    if (ev->parsed()) return run_evaluate(eval_o, eval_method_name, checkpoint, eval_reps, out);
    if (cmp->parsed()) return run_compare(cmp_o, cmp_reps, cmp_episodes, out);
    if (gen->parsed()) return run_generate(gen_o, gen_seed, gen_file, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InfeasibleScenario& e) {
    err << "infeasible scenario: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitConfig;
}

int cli_main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cli_main(args, std::cout, std::cerr);
}

}  // namespace mdd
