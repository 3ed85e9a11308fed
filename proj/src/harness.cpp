#include "adaptivity/harness.hpp"

#include <CLI11.hpp>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "adaptivity/serialization.hpp"

namespace adaptivity {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const json& require_field(const json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key)) throw ConfigError(path.empty() ? key : path + "." + key, "missing field");
  return j[key];
}

EnvConfig env_config_from_json(const json& j) {
  EnvConfig env;
  env.type = require_field(j, "type", "env").get<std::string>();
  if (env.type == "CounterexampleD6") {
    env.gamma = j.value("gamma", 1e4);
    if (env.gamma <= 0.0) throw ConfigError("env.gamma", "must be positive");
  } else if (env.type == "FiniteMultiset") {
    env.sets = context_sets_from_json(require_field(j, "sets", "env"), "env.sets");
    env.probs = require_field(j, "probs", "env").get<std::vector<double>>();
    if (env.probs.size() != env.sets.size()) {
      throw ConfigError("env.probs", "length must match env.sets");
    }
    double total = 0.0;
    for (double p : env.probs) {
      if (p < 0.0) throw ConfigError("env.probs", "negative probability");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("env.probs", "must sum to 1");
  } else if (env.type == "LowerBound") {
    try {
      env.lower_bound = lower_bound_spec_from_json(j);
    } catch (const ConfigError& e) {
      throw ConfigError("env." + e.field, "invalid");
    }
  } else if (env.type != "UniformSphere") {
    throw ConfigError("env.type", "unknown environment '" + env.type + "'");
  }
  if (j.contains("theta")) {
    auto v = j["theta"].get<std::vector<double>>();
    env.theta = Eigen::Map<Eigen::VectorXd>(v.data(), long(v.size()));
  }
  env.noise_scale = j.value("noise_scale", 1.0);
  if (env.noise_scale < 0.0) throw ConfigError("env.noise_scale", "must be >= 0");
  return env;
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  cfg.schema_version = j.value("schema_version", 1);
  cfg.algo = require_field(j, "algo", "").get<std::string>();
  if (cfg.algo != "BatchLinUCB" && cfg.algo != "BatchLinUCB-KW" && cfg.algo != "BatchLinUCB-DG" &&
      cfg.algo != "SupLinUCB") {
    throw ConfigError("algo", "unknown algorithm '" + cfg.algo + "'");
  }
  cfg.env = env_config_from_json(require_field(j, "env", ""));
  cfg.d = require_field(j, "d", "").get<int>();
  cfg.k = require_field(j, "K", "").get<int>();
  cfg.t_horizon = require_field(j, "T", "").get<long>();
  cfg.delta = require_field(j, "delta", "").get<double>();
  cfg.seeds = require_field(j, "seeds", "").get<std::vector<std::uint64_t>>();
  cfg.c_factor = j.value("C", 2.0);
  if (j.contains("design")) {
    const json& dj = j["design"];
    cfg.block_multiplier = dj.value("block_multiplier", 1.0);
    cfg.tol_factor = dj.value("tol_factor", 2.0);
    cfg.alpha_scale = dj.value("alpha_scale", 1.0);
  }
  cfg.output = j.value("output", std::string());

  if (cfg.d < 1) throw ConfigError("d", "must be >= 1");
  if (cfg.k < 1) throw ConfigError("K", "must be >= 1");
  if (cfg.t_horizon < 4) throw ConfigError("T", "must be >= 4");
  if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) throw ConfigError("delta", "must lie in (0,1)");
  if (cfg.seeds.empty()) throw ConfigError("seeds", "must be non-empty");
  if (cfg.algo == "SupLinUCB" && cfg.c_factor < 2.0) throw ConfigError("C", "must be >= 2");
  if (cfg.block_multiplier <= 0.0) throw ConfigError("design.block_multiplier", "must be > 0");
  if (cfg.tol_factor < 1.0) throw ConfigError("design.tol_factor", "must be >= 1");
  if (cfg.alpha_scale <= 0.0) throw ConfigError("design.alpha_scale", "must be > 0");
  if (cfg.env.type == "LowerBound") {
    if (cfg.env.lower_bound.d != cfg.d) throw ConfigError("env.d", "must match top-level d");
    if (cfg.env.lower_bound.T < cfg.t_horizon) throw ConfigError("env.T", "shorter than T");
  }
  if (cfg.env.theta && cfg.env.theta->size() != cfg.d) {
    throw ConfigError("env.theta", "dimension must equal d");
  }
  return cfg;
}

Environment build_environment(const ExperimentConfig& cfg, std::uint64_t seed) {
  Environment env = [&] {
    if (cfg.env.type == "LowerBound") {
      return lower_bound_instance(cfg.env.lower_bound, seed);
    }
    StochasticSpec spec = [&]() -> StochasticSpec {
      if (cfg.env.type == "UniformSphere") return UniformSphereSpec{};
      if (cfg.env.type == "CounterexampleD6") return CounterexampleD6Spec{cfg.env.gamma};
      return FiniteMultisetSpec{cfg.env.sets, cfg.env.probs};
    }();
    if (cfg.env.theta) {
      return stochastic_env_with_theta(std::move(spec), cfg.k, cfg.t_horizon, *cfg.env.theta, seed,
                                       seed);
    }
    return stochastic_env(std::move(spec), cfg.d, cfg.k, cfg.t_horizon, seed, seed, seed);
  }();
  env.set_noise_scale(cfg.env.noise_scale);
  return env;
}

namespace {

LearnerRecord run_one(const ExperimentConfig& cfg, std::uint64_t seed) {
  Environment env = build_environment(cfg, seed);
  LearnerOptions opts;
  opts.alpha_scale = cfg.alpha_scale;
  opts.design_params.tol_factor = cfg.tol_factor;
  opts.block_multiplier = cfg.block_multiplier;
  if (cfg.algo == "BatchLinUCB") {
    return run_batch_elimination(env, cfg.t_horizon, cfg.delta, SamplerMode::Uniform, seed, opts);
  }
  if (cfg.algo == "BatchLinUCB-KW") {
    return run_batch_elimination(env, cfg.t_horizon, cfg.delta, SamplerMode::GOptimal, seed, opts);
  }
  if (cfg.algo == "BatchLinUCB-DG") {
    return run_batch_linucb_dg(env, cfg.t_horizon, cfg.delta, seed, opts);
  }
  return run_sup_linucb(env, cfg.t_horizon, cfg.delta, cfg.c_factor, seed, opts);
}

unsigned worker_count(size_t n_seeds) {
  unsigned w = std::thread::hardware_concurrency();
  if (const char* e = std::getenv("ADAPTIVITY_WORKERS")) {
    long v = std::atol(e);
    if (v >= 1) w = unsigned(v);
  }
  if (w < 1) w = 1;
  return unsigned(std::min<size_t>(w, n_seeds));
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const size_t n = cfg.seeds.size();
  std::vector<std::optional<LearnerRecord>> slots(n);

  std::atomic<size_t> next{0};
  std::mutex err_mutex;
  std::string first_error;
  auto work = [&] {
    for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      try {
        slots[i] = run_one(cfg, cfg.seeds[i]);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (first_error.empty()) {
          first_error = "seed " + std::to_string(cfg.seeds[i]) + ": " + e.what();
        }
      }
    }
  };

  const unsigned workers = worker_count(n);
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned i = 0; i < workers; ++i) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (!first_error.empty()) throw std::runtime_error(first_error);

  ExperimentResult result;
  result.runs.reserve(n);
  for (size_t i = 0; i < n; ++i) result.runs.emplace_back(cfg.seeds[i], std::move(*slots[i]));

  Summary& s = result.summary;
  s.n_seeds = int(n);
  double sum = 0.0, sum_sq = 0.0, sw = 0.0, batches = 0.0;
  for (const auto& [seed, rec] : result.runs) {
    sum += rec.total_regret;
    sw += double(rec.switches);
    batches += double(rec.batches_used);
  }
  s.mean_regret = sum / double(n);
  for (const auto& [seed, rec] : result.runs) {
    sum_sq += (rec.total_regret - s.mean_regret) * (rec.total_regret - s.mean_regret);
  }
  s.std_regret = n > 1 ? std::sqrt(sum_sq / double(n - 1)) : 0.0;
  s.mean_switches = sw / double(n);
  s.mean_batches = batches / double(n);
  s.wall_time_s =
      std::chrono::duration_cast<std::chrono::duration<double>>(std::chrono::steady_clock::now() -
                                                                start)
          .count();

  if (!cfg.output.empty()) {
    fs::path prefix(cfg.output);
    if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path());
    std::ofstream csv(cfg.output + ".csv", std::ios::binary);
    if (!csv) throw std::runtime_error("cannot open " + cfg.output + ".csv");
    write_trace_csv(csv, result.runs, cfg.algo);
    std::ofstream js(cfg.output + ".json", std::ios::binary);
    if (!js) throw std::runtime_error("cannot open " + cfg.output + ".json");
    json summary = summary_to_json(cfg, s);
    json per_seed = json::array();
    for (const auto& [seed, rec] : result.runs) {
      per_seed.push_back(json{{"seed", seed},
                              {"regret", rec.total_regret},
                              {"switches", rec.switches},
                              {"batches", rec.batches_used}});
    }
    summary["per_seed"] = per_seed;
    js << summary.dump(2) << "\n";
  }
  return result;
}

json summary_to_json(const ExperimentConfig& cfg, const Summary& s) {
  return json{{"schema_version", 1},
              {"algo", cfg.algo},
              {"d", cfg.d},
              {"K", cfg.k},
              {"T", cfg.t_horizon},
              {"delta", cfg.delta},
              {"n_seeds", s.n_seeds},
              {"mean_regret", s.mean_regret},
              {"std_regret", s.std_regret},
              {"mean_switches", s.mean_switches},
              {"mean_batches", s.mean_batches},
              {"wall_time_s", s.wall_time_s}};
}

namespace {

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open file");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path, std::string("invalid JSON: ") + e.what());
  }
}

void emit(const std::string& out_path, const json& payload) {
  if (out_path.empty() || out_path == "-") {
    std::cout << payload.dump(2) << std::endl;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + out_path);
  out << payload.dump(2) << "\n";
}

bool wildcard_match(const std::string& pattern, const std::string& name) {
  size_t p = 0, n = 0, star = std::string::npos, mark = 0;
  while (n < name.size()) {
    if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == name[n])) {
      ++p;
      ++n;
    } else if (p < pattern.size() && pattern[p] == '*') {
      star = p++;
      mark = n;
    } else if (star != std::string::npos) {
      p = star + 1;
      n = ++mark;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

int cmd_run(const std::string& config_path) {
  ExperimentConfig cfg = config_from_json(load_json_file(config_path));
  ExperimentResult res = run_experiment(cfg);
  std::cout << summary_to_json(cfg, res.summary).dump(2) << std::endl;
  return 0;
}

int cmd_design(const std::string& contexts_path, const std::string& mode, double lambda,
               const std::string& flavor, double block_multiplier, double jitter,
               double tol_factor, const std::string& out_path) {
  json input = load_json_file(contexts_path);
  const json& sets_json = input.is_array() ? input : require_field(input, "sets", "");
  std::vector<ContextSet> sets = context_sets_from_json(sets_json, "sets");
  int k_max = 1;
  for (const ContextSet& s : sets) k_max = std::max(k_max, s.size());

  GOptimalParams params{jitter, tol_factor, 10000};
  PolicyEngine engine(params);
  json payload{{"schema_version", 1}};
  if (mode == "gopt") {
    json designs = json::array();
    for (const ContextSet& s : sets) {
      designs.push_back(design_to_json(g_optimal_design(s, jitter, tol_factor)));
    }
    payload["designs"] = designs;
  } else if (mode == "mixed") {
    DesignFlavor fl = flavor == "argmax" ? DesignFlavor::Argmax : DesignFlavor::Softmax;
    MixedDesignParams mp = build_mixed_design(sets, lambda, fl, k_max, block_multiplier, engine);
    payload = mixed_params_to_json(mp);
  } else {  // core
    CoreResult core = core_identification(sets, lambda, 6, engine);
    SamplePolicy pi = core_learning(sets, lambda, k_max, engine, block_multiplier);
    payload["policy"] = policy_to_json(pi);
    payload["core"] = json{{"kept", core.kept_indices.size()},
                           {"total", sets.size()},
                           {"iterations", core.iterations}};
  }
  emit(out_path, payload);
  return 0;
}

int cmd_lbgen(const std::string& spec_path, const std::string& out_path) {
  LowerBoundSpec spec = lower_bound_spec_from_json(load_json_file(spec_path));
  Environment env = lower_bound_instance(spec);  // validates norms
  LowerBoundLayout layout(spec);

  json blocks = json::array();
  for (int b = 0; b < spec.d / 2; ++b) {
    json stages = json::array();
    for (long j = 1; j <= layout.stages_per_block(); ++j) {
      long lo = (j - 1) * layout.block_steps() / layout.stages_per_block() + 1;
      long hi = (j * layout.block_steps() + layout.stages_per_block() - 1) /
                layout.stages_per_block();
      long global = long(b) * layout.block_steps();
      ContextSet x = layout.contexts(global + lo);
      double gap = std::abs(env.meter_theta().dot(x.vector(0) - x.vector(1)));
      stages.push_back(json{{"stage", j},
                            {"t_lo", global + lo},
                            {"t_hi", global + hi},
                            {"x1", json::array({x.vector(0)(2 * b), 0.0})},
                            {"x2", json::array({0.0, x.vector(1)(2 * b + 1)})},
                            {"gap", gap}});
    }
    blocks.push_back(json{{"u", spec.u[size_t(b)]}, {"stages", stages}});
  }
  json theta = json::array();
  for (int i = 0; i < spec.d; ++i) theta.push_back(env.meter_theta()(i));
  emit(out_path, json{{"schema_version", 1},
                      {"d", spec.d},
                      {"T", spec.T},
                      {"M", spec.M},
                      {"L", layout.stages_per_block()},
                      {"upsilon", layout.upsilon()},
                      {"theta", theta},
                      {"blocks", blocks}});
  return 0;
}

int cmd_summarize(const std::string& pattern, const std::string& out_path) {
  fs::path pat(pattern);
  fs::path dir = pat.has_parent_path() ? pat.parent_path() : fs::path(".");
  std::string name_pattern = pat.filename().string();

  struct SeedFinal {
    double regret = 0.0;
    long switches = 0;
    int batches = 0;
    long last_t = -1;
  };
  std::map<std::string, std::map<std::uint64_t, SeedFinal>> groups;
  int files = 0;
  if (fs::exists(dir)) {
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (!entry.is_regular_file() || !wildcard_match(name_pattern, entry.path().filename().string())) {
        continue;
      }
      std::ifstream in(entry.path());
      std::string line;
      if (!std::getline(in, line)) continue;
      if (line != kTraceHeader) continue;
      ++files;
      while (std::getline(in, line)) {
        std::array<std::string, 8> cols;
        size_t start = 0;
        for (int c = 0; c < 8; ++c) {
          size_t end = c == 7 ? line.size() : line.find(',', start);
          if (end == std::string::npos) break;
          cols[size_t(c)] = line.substr(start, end - start);
          start = end + 1;
        }
        long t = std::atol(cols[0].c_str());
        SeedFinal& sf = groups[cols[7]][std::strtoull(cols[6].c_str(), nullptr, 10)];
        if (t > sf.last_t) {
          sf.last_t = t;
          sf.regret = std::atof(cols[3].c_str());
          sf.switches = std::atol(cols[5].c_str());
          sf.batches = std::atoi(cols[4].c_str());
        }
      }
    }
  }
  json out_groups = json::array();
  for (const auto& [algo, seeds] : groups) {
    double sum = 0.0, sw = 0.0, batches = 0.0;
    for (const auto& [seed, sf] : seeds) {
      sum += sf.regret;
      sw += double(sf.switches);
      batches += double(sf.batches);
    }
    const double n = double(seeds.size());
    double mean = sum / n;
    double ss = 0.0;
    for (const auto& [seed, sf] : seeds) ss += (sf.regret - mean) * (sf.regret - mean);
    out_groups.push_back(json{{"algo", algo},
                              {"n_seeds", seeds.size()},
                              {"mean_regret", mean},
                              {"std_regret", seeds.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0},
                              {"mean_switches", sw / n},
                              {"mean_batches", batches / n}});
  }
  emit(out_path, json{{"schema_version", 1}, {"files", files}, {"groups", out_groups}});
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"limited-adaptivity linear contextual bandit simulator"};
  app.require_subcommand(1);

  std::string run_config;
  CLI::App* run = app.add_subcommand("run", "run an experiment config and write trace/summary");
  run->add_option("config", run_config, "experiment config JSON")->required();

  std::string design_file, design_mode = "gopt", design_flavor = "softmax", design_out = "-";
  double design_lambda = 0.1, design_bm = 1.0, design_jitter = 1e-9, design_tol = 2.0;
  CLI::App* design = app.add_subcommand("design", "standalone design computations");
  design->add_option("contexts", design_file, "context sets JSON")->required();
  design->add_option("--mode", design_mode, "gopt | mixed | core")
      ->check(CLI::IsMember({"gopt", "mixed", "core"}));
  design->add_option("--lambda", design_lambda, "regularizer in (0,1)");
  design->add_option("--flavor", design_flavor, "argmax | softmax")
      ->check(CLI::IsMember({"argmax", "softmax"}));
  design->add_option("--block-multiplier", design_bm, "trajectory length multiplier");
  design->add_option("--jitter", design_jitter, "G-optimal solver jitter");
  design->add_option("--tol-factor", design_tol, "G-optimal relaxation factor");
  design->add_option("--out", design_out, "output path, - for stdout");

  std::string lbgen_file, lbgen_out = "-";
  CLI::App* lbgen = app.add_subcommand("lbgen", "emit a lower-bound instance schedule");
  lbgen->add_option("spec", lbgen_file, "instance spec JSON")->required();
  lbgen->add_option("--out", lbgen_out, "output path, - for stdout");

  std::string sum_glob, sum_out = "-";
  CLI::App* summarize = app.add_subcommand("summarize", "aggregate trace CSVs matching a glob");
  summarize->add_option("glob", sum_glob, "e.g. 'out/*.csv'")->required();
  summarize->add_option("--out", sum_out, "output path, - for stdout");

  try {
    app.parse(argc, const_cast<char**>(argv));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (run->parsed()) return cmd_run(run_config);
    if (design->parsed()) {
      return cmd_design(design_file, design_mode, design_lambda, design_flavor, design_bm,
                        design_jitter, design_tol, design_out);
    }
    if (lbgen->parsed()) return cmd_lbgen(lbgen_file, lbgen_out);
    return cmd_summarize(sum_glob, sum_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace adaptivity
