#pragma once

#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "adaptivity/bandits.hpp"
#include "adaptivity/envgen.hpp"

namespace adaptivity {

struct EnvConfig {
  std::string type;  // UniformSphere | FiniteMultiset | CounterexampleD6 | LowerBound
  double gamma = 1e4;                       // CounterexampleD6
  std::vector<ContextSet> sets;             // FiniteMultiset
  std::vector<double> probs;                // FiniteMultiset
  LowerBoundSpec lower_bound;               // LowerBound
  std::optional<Eigen::VectorXd> theta;     // overrides the seeded draw
  double noise_scale = 1.0;
};

struct ExperimentConfig {
  int schema_version = 1;
  std::string algo;  // BatchLinUCB | BatchLinUCB-KW | BatchLinUCB-DG | SupLinUCB
  EnvConfig env;
  int d = 0;
  int k = 0;
  long t_horizon = 0;
  double delta = 0.05;
  double c_factor = 2.0;  // SupLinUCB only
  std::vector<std::uint64_t> seeds;
  double block_multiplier = 1.0;
  double tol_factor = 2.0;
  double alpha_scale = 1.0;
  std::string output;  // path prefix; "" keeps results in memory
};

ExperimentConfig config_from_json(const nlohmann::json& j);  // throws ConfigError

struct Summary {
  int n_seeds = 0;
  double mean_regret = 0.0;
  double std_regret = 0.0;  // n-1 denominator
  double mean_switches = 0.0;
  double mean_batches = 0.0;
  double wall_time_s = 0.0;
};

struct ExperimentResult {
  std::vector<std::pair<std::uint64_t, LearnerRecord>> runs;  // in seed order
  Summary summary;
};

// Environment for one master seed of this config (theta, contexts and noise
// all derive from the seed through disjoint streams).
Environment build_environment(const ExperimentConfig& cfg, std::uint64_t seed);

// One independent learner run per seed; seed-level parallelism bounded by the
// ADAPTIVITY_WORKERS environment variable.  With a non-empty output prefix,
// writes <output>.csv (trace) and <output>.json (summary).
ExperimentResult run_experiment(const ExperimentConfig& cfg);

nlohmann::json summary_to_json(const ExperimentConfig& cfg, const Summary& s);

// Entry point behind the `adaptivity` binary.  Exit codes: 0 success,
// 2 configuration error, 1 runtime error.
int cli_main(int argc, const char* const* argv);

}  // namespace adaptivity
