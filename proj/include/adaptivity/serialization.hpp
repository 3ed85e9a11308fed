#pragma once

#include <json.hpp>
#include <ostream>
#include <string>

#include "adaptivity/bandits.hpp"
#include "adaptivity/dist_design.hpp"
#include "adaptivity/envgen.hpp"

namespace adaptivity {

// Shortest round-trip decimal form; keeps trace files byte-stable.
std::string format_double(double v);

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);  // row-major flat array
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, int d, const std::string& field);

nlohmann::json design_to_json(const Design& design);

nlohmann::json policy_to_json(const SamplePolicy& pi);
SamplePolicy policy_from_json(const nlohmann::json& j, const std::string& field = "policy");

nlohmann::json mixed_params_to_json(const MixedDesignParams& params);
MixedDesignParams mixed_params_from_json(const nlohmann::json& j);

std::vector<ContextSet> context_sets_from_json(const nlohmann::json& j, const std::string& field);
nlohmann::json context_sets_to_json(std::span<const ContextSet> sets);

LowerBoundSpec lower_bound_spec_from_json(const nlohmann::json& j);

// Trace rows: t,arm,regret_step,regret_cum,batch,switches,seed,algo.
extern const char* const kTraceHeader;
void write_trace_csv(std::ostream& out,
                     std::span<const std::pair<std::uint64_t, LearnerRecord>> runs,
                     const std::string& algo);

}  // namespace adaptivity
