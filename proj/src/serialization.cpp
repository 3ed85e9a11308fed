#include "adaptivity/serialization.hpp"

#include <charconv>

namespace adaptivity {

using nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  json arr = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) arr.push_back(m(r, c));
  }
  return arr;
}

Eigen::MatrixXd matrix_from_json(const json& j, int d, const std::string& field) {
  if (!j.is_array() || int(j.size()) != d * d) {
    throw ConfigError(field, "expected a row-major array of " + std::to_string(d * d) + " numbers");
  }
  Eigen::MatrixXd m(d, d);
  int i = 0;
  for (int r = 0; r < d; ++r) {
    for (int c = 0; c < d; ++c) m(r, c) = j[size_t(i++)].get<double>();
  }
  return m;
}

nlohmann::json design_to_json(const Design& design) {
  json arr = json::array();
  for (int i = 0; i < design.size(); ++i) arr.push_back(design.weights(i));
  return arr;
}

nlohmann::json policy_to_json(const SamplePolicy& pi) {
  return std::visit(
      [&](const auto& node) -> json {
        using T = std::decay_t<decltype(node)>;
        if constexpr (std::is_same_v<T, UniformPolicy>) {
          return json{{"type", "uniform"}};
        } else if constexpr (std::is_same_v<T, GOptimalPolicy>) {
          return json{{"type", "g_optimal"}};
        } else if constexpr (std::is_same_v<T, ArgmaxPolicy>) {
          return json{{"type", "argmax"}, {"matrix", matrix_to_json(node.v.mat())}};
        } else if constexpr (std::is_same_v<T, SoftmaxPolicy>) {
          return json{{"type", "softmax"},
                      {"alpha", node.alpha},
                      {"matrix", matrix_to_json(node.m.mat())}};
        } else {
          json comps = json::array();
          for (const auto& [w, sub] : node.components) {
            comps.push_back(json{{"weight", w}, {"policy", policy_to_json(sub)}});
          }
          return json{{"type", "mixed"}, {"components", comps}};
        }
      },
      pi.node());
}

SamplePolicy policy_from_json(const json& j, const std::string& field) {
  if (!j.is_object() || !j.contains("type")) throw ConfigError(field + ".type", "missing");
  const std::string type = j["type"].get<std::string>();
  if (type == "uniform") return SamplePolicy::uniform();
  if (type == "g_optimal") return SamplePolicy::g_optimal();
  if (type == "argmax" || type == "softmax") {
    if (!j.contains("matrix")) throw ConfigError(field + ".matrix", "missing");
    const auto& arr = j["matrix"];
    int d = int(std::llround(std::sqrt(double(arr.size()))));
    PsdMatrix m(matrix_from_json(arr, d, field + ".matrix"));
    try {
      m.validate();
    } catch (const NotPsdError& e) {
      throw ConfigError(field + ".matrix", e.what());
    }
    if (type == "argmax") return SamplePolicy::argmax(std::move(m));
    double alpha = j.value("alpha", 1.0);
    return SamplePolicy::softmax(std::move(m), alpha);
  }
  if (type == "mixed") {
    if (!j.contains("components")) throw ConfigError(field + ".components", "missing");
    std::vector<std::pair<double, SamplePolicy>> comps;
    int i = 0;
    for (const auto& c : j["components"]) {
      std::string sub = field + ".components[" + std::to_string(i++) + "]";
      if (!c.contains("weight") || !c.contains("policy")) {
        throw ConfigError(sub, "needs weight and policy");
      }
      comps.emplace_back(c["weight"].get<double>(), policy_from_json(c["policy"], sub + ".policy"));
    }
    return SamplePolicy::mixed(std::move(comps));
  }
  throw ConfigError(field + ".type", "unknown policy type '" + type + "'");
}

nlohmann::json mixed_params_to_json(const MixedDesignParams& params) {
  json comps = json::array();
  for (const auto& [p, m] : params.components) {
    comps.push_back(json{{"p", p}, {"matrix", matrix_to_json(m.mat())}});
  }
  return json{{"schema_version", 1},
              {"flavor", params.flavor == DesignFlavor::Argmax ? "argmax" : "softmax"},
              {"k_max", params.k_max},
              {"components", comps}};
}

MixedDesignParams mixed_params_from_json(const json& j) {
  MixedDesignParams params;
  std::string flavor = j.value("flavor", "softmax");
  if (flavor != "argmax" && flavor != "softmax") {
    throw ConfigError("flavor", "must be argmax or softmax");
  }
  params.flavor = flavor == "argmax" ? DesignFlavor::Argmax : DesignFlavor::Softmax;
  params.k_max = j.value("k_max", 1);
  if (!j.contains("components")) throw ConfigError("components", "missing");
  for (const auto& c : j["components"]) {
    const auto& arr = c.at("matrix");
    int d = int(std::llround(std::sqrt(double(arr.size()))));
    PsdMatrix m(matrix_from_json(arr, d, "components.matrix"));
    try {
      m.validate();
    } catch (const NotPsdError& e) {
      throw ConfigError("components.matrix", e.what());
    }
    params.components.emplace_back(c.at("p").get<double>(), std::move(m));
  }
  return params;
}

std::vector<ContextSet> context_sets_from_json(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) throw ConfigError(field, "expected a non-empty array of sets");
  std::vector<ContextSet> sets;
  int si = 0;
  for (const auto& set : j) {
    std::string sf = field + "[" + std::to_string(si++) + "]";
    if (!set.is_array() || set.empty()) throw ConfigError(sf, "expected a non-empty array of vectors");
    const size_t d = set[0].size();
    Eigen::MatrixXd m(d, set.size());
    int col = 0;
    for (const auto& vec : set) {
      if (!vec.is_array() || vec.size() != d) {
        throw ConfigError(sf, "all vectors in a set must share one dimension");
      }
      for (size_t r = 0; r < d; ++r) m(long(r), col) = vec[r].get<double>();
      ++col;
    }
    try {
      sets.emplace_back(std::move(m));
    } catch (const NormViolationError& e) {
      throw ConfigError(sf, e.what());
    }
  }
  return sets;
}

nlohmann::json context_sets_to_json(std::span<const ContextSet> sets) {
  json out = json::array();
  for (const ContextSet& s : sets) {
    json set = json::array();
    for (int i = 0; i < s.size(); ++i) {
      json vec = json::array();
      for (int r = 0; r < s.dim(); ++r) vec.push_back(s.vector(i)(r));
      set.push_back(vec);
    }
    out.push_back(set);
  }
  return out;
}

LowerBoundSpec lower_bound_spec_from_json(const json& j) {
  LowerBoundSpec spec;
  for (const char* key : {"d", "T", "M"}) {
    if (!j.contains(key)) throw ConfigError(key, "missing");
  }
  spec.d = j["d"].get<int>();
  spec.T = j["T"].get<long>();
  spec.M = j["M"].get<long>();
  if (spec.d < 2 || spec.d % 2 != 0) throw ConfigError("d", "must be even and >= 2");
  if ((8 * spec.M) % spec.d != 0) throw ConfigError("M", "8M must be divisible by d");
  const long stages = 8 * spec.M / spec.d;
  if (j.contains("u") && j["u"].is_string()) {
    if (j["u"].get<std::string>() != "auto") {
      throw ConfigError("u", "expected sign arrays or \"auto\"");
    }
    return feasible_lower_bound_spec(spec.d, spec.T, spec.M);
  }
  if (j.contains("u")) {
    for (const auto& block : j["u"]) {
      std::vector<int> u;
      for (const auto& s : block) u.push_back(s.get<int>());
      spec.u.push_back(std::move(u));
    }
  } else {
    std::uint64_t useed = j.value("u_seed", std::uint64_t(0));
    CounterRng rng(useed, 0x75);
    for (int b = 0; b < spec.d / 2; ++b) {
      auto u = std::vector<int>(size_t(stages));
      for (auto& s : u) s = (rng.next_u64() & 1) ? 1 : -1;
      spec.u.push_back(std::move(u));
    }
  }
  return spec;
}

const char* const kTraceHeader = "t,arm,regret_step,regret_cum,batch,switches,seed,algo";

void write_trace_csv(std::ostream& out,
                     std::span<const std::pair<std::uint64_t, LearnerRecord>> runs,
                     const std::string& algo) {
  out << kTraceHeader << "\n";
  for (const auto& [seed, rec] : runs) {
    for (const StepRecord& s : rec.steps) {
      out << s.t << ',' << s.arm << ',' << format_double(s.regret_step) << ','
          << format_double(s.regret_cum) << ',' << s.batch << ',' << s.switches << ',' << seed
          << ',' << algo << "\n";
    }
  }
}

}  // namespace adaptivity
