#include "adaptivity/envgen.hpp"

#include <cmath>

namespace adaptivity {

Eigen::VectorXd sphere_point(int d, CounterRng& rng) {
  Eigen::VectorXd v(d);
  double n2 = 0.0;
  do {
    for (int i = 0; i < d; ++i) v(i) = rng.normal();
    n2 = v.squaredNorm();
  } while (n2 == 0.0);
  return v / std::sqrt(n2);
}

namespace {

std::vector<ContextSet> counterexample_sets(int d, double gamma) {
  const double eps = std::sqrt(double(d) / gamma);
  if (!(eps <= 1.0)) {
    throw std::invalid_argument("CounterexampleD6: gamma must be >= d");
  }
  std::vector<ContextSet> sets;
  sets.reserve(size_t(d));
  Eigen::VectorXd e1 = Eigen::VectorXd::Unit(d, 0);
  sets.emplace_back(ContextSet{e1});
  for (int i = 1; i < d; ++i) {
    Eigen::VectorXd ei = Eigen::VectorXd::Unit(d, i);
    Eigen::VectorXd tilted = std::sqrt(1.0 - eps * eps) * ei + eps * e1;
    sets.emplace_back(ContextSet{tilted, ei});
  }
  return sets;
}

}  // namespace

LowerBoundLayout::LowerBoundLayout(LowerBoundSpec spec) : spec_(std::move(spec)) {
  if (spec_.d < 2 || spec_.d % 2 != 0) {
    throw std::invalid_argument("LowerBoundSpec: d must be even and >= 2");
  }
  const long blocks = spec_.d / 2;
  if ((8 * spec_.M) % spec_.d != 0) {
    throw std::invalid_argument("LowerBoundSpec: 8M must be divisible by d");
  }
  stages_ = 8 * spec_.M / spec_.d;  // L = 4M / (d/2)
  if (stages_ < 1) throw std::invalid_argument("LowerBoundSpec: switch budget too small");
  if (spec_.T % blocks != 0) {
    throw std::invalid_argument("LowerBoundSpec: T must be divisible by d/2");
  }
  block_steps_ = spec_.T / blocks;
  if (block_steps_ < stages_) {
    throw std::invalid_argument("LowerBoundSpec: fewer steps than stages per block");
  }
  if (long(spec_.u.size()) != blocks) {
    throw std::invalid_argument("LowerBoundSpec: need one sign sequence per 2-d block");
  }
  for (const auto& u : spec_.u) {
    if (long(u.size()) != stages_) {
      throw std::invalid_argument("LowerBoundSpec: sign sequence length must be L = 8M/d");
    }
    for (int s : u) {
      if (s != 1 && s != -1) throw std::invalid_argument("LowerBoundSpec: signs must be +-1");
    }
  }
  upsilon_ = std::pow(double(block_steps_), -1.0 / (2.0 * double(stages_ + 1)));
}

double LowerBoundLayout::z(long j) const {
  return std::pow(upsilon_, -double(j + 1)) / std::sqrt(double(block_steps_));
}

double LowerBoundLayout::psi(int block, long j) const {
  double v = 0.5;
  for (long i = 1; i <= j; ++i) {
    v += double(spec_.u[size_t(block)][size_t(i - 1)]) * std::pow(upsilon_, double(i));
  }
  return v;
}

long LowerBoundLayout::stage_of(long step_in_block) const {
  // Stage j covers (t_{j-1}, t_j] with t_j = ceil(j * block_steps / L).
  for (long j = 1; j <= stages_; ++j) {
    long hi = (j * block_steps_ + stages_ - 1) / stages_;
    if (step_in_block <= hi) return j;
  }
  return stages_;
}

int LowerBoundLayout::block_of(long t) const { return int((t - 1) / block_steps_); }

ContextSet LowerBoundLayout::contexts(long t) const {
  const int d = spec_.d;
  int block = block_of(t);
  long within = t - long(block) * block_steps_;
  long j = stage_of(within);
  double zj = z(j);
  Eigen::VectorXd x1 = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd x2 = Eigen::VectorXd::Zero(d);
  x1(2 * block) = zj;
  x2(2 * block + 1) = 1.5 * zj * psi(block, j - 1);
  return ContextSet{x1, x2};
}

Eigen::VectorXd LowerBoundLayout::theta() const {
  Eigen::VectorXd th(spec_.d);
  for (int b = 0; b < spec_.d / 2; ++b) {
    th(2 * b) = psi(b, stages_);
    th(2 * b + 1) = 2.0 / 3.0;
  }
  return th;
}

ContextSet Environment::contexts(long t) const {
  if (t < 1 || t > t_horizon_) {
    throw EnvironmentExhaustedError("contexts: step " + std::to_string(t) + " outside [1, " +
                                    std::to_string(t_horizon_) + "]");
  }
  if (const auto* sched = std::get_if<Scheduled>(&source_)) {
    return sched->sets[size_t(t - 1)];
  }
  if (const auto* lb = std::get_if<LowerBoundLayout>(&source_)) {
    return lb->contexts(t);
  }
  const auto& spec = std::get<StochasticSpec>(source_);
  CounterRng rng(ctx_seed_, streams::kContextBase + std::uint64_t(t));
  if (const auto* fm = std::get_if<FiniteMultisetSpec>(&spec)) {
    double u = rng.uniform();
    double cum = 0.0;
    for (size_t i = 0; i < fm->sets.size(); ++i) {
      cum += fm->probs[i];
      if (u < cum) return fm->sets[i];
    }
    return fm->sets.back();
  }
  if (std::get_if<UniformSphereSpec>(&spec)) {
    Eigen::MatrixXd m(d(), k_);
    for (int i = 0; i < k_; ++i) m.col(i) = sphere_point(d(), rng);
    return ContextSet(std::move(m));
  }
  const auto& ce = std::get<CounterexampleD6Spec>(spec);
  const double p1 = 1.0 / (double(d()) * ce.gamma);
  std::vector<ContextSet> sets = counterexample_sets(d(), ce.gamma);
  double u = rng.uniform();
  if (u < p1) return sets[0];
  int idx = 1 + int((u - p1) / ((1.0 - p1) / double(d() - 1)));
  return sets[size_t(std::min(idx, d() - 1))];
}

Environment::Outcome Environment::step(long t, int i, CounterRng& noise_rng) const {
  ContextSet x = contexts(t);
  if (i < 0 || i >= x.size()) {
    throw EnvironmentExhaustedError("step: arm " + std::to_string(i) + " out of range");
  }
  Eigen::VectorXd means = x.matrix().transpose() * theta_;
  double reward = means(i) + noise_scale_ * noise_rng.normal();
  double regret = means.maxCoeff() - means(i);
  return {reward, regret};
}

namespace {

void check_spec_probs(const StochasticSpec& spec, int d, int k) {
  if (const auto* fm = std::get_if<FiniteMultisetSpec>(&spec)) {
    if (fm->sets.empty() || fm->sets.size() != fm->probs.size()) {
      throw std::invalid_argument("FiniteMultiset: sets/probs mismatch");
    }
    double total = 0.0;
    for (double p : fm->probs) {
      if (p < 0.0) throw std::invalid_argument("FiniteMultiset: negative probability");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw std::invalid_argument("FiniteMultiset: probabilities sum to " + std::to_string(total));
    }
    for (const ContextSet& x : fm->sets) {
      if (x.dim() != d || x.size() > k) {
        throw std::invalid_argument("FiniteMultiset: set shape violates (d, K)");
      }
    }
  }
}

}  // namespace

Environment stochastic_env(StochasticSpec spec, int d, int k, long t_horizon,
                           std::uint64_t theta_seed, std::uint64_t ctx_seed,
                           std::uint64_t noise_seed) {
  CounterRng rng(theta_seed, streams::kTheta);
  return stochastic_env_with_theta(std::move(spec), k, t_horizon, sphere_point(d, rng), ctx_seed,
                                   noise_seed);
}

Environment stochastic_env_with_theta(StochasticSpec spec, int k, long t_horizon,
                                      Eigen::VectorXd theta, std::uint64_t ctx_seed,
                                      std::uint64_t noise_seed) {
  if (theta.norm() > 1.0 + 1e-12) {
    throw NormViolationError("stochastic_env: |theta| = " + std::to_string(theta.norm()));
  }
  check_spec_probs(spec, int(theta.size()), k);
  Environment env;
  env.theta_ = std::move(theta);
  env.k_ = k;
  env.t_horizon_ = t_horizon;
  env.ctx_seed_ = ctx_seed;
  env.noise_seed_ = noise_seed;
  env.source_ = std::move(spec);
  return env;
}

Environment scheduled_env(std::vector<ContextSet> schedule, Eigen::VectorXd theta,
                          std::uint64_t noise_seed) {
  if (schedule.empty()) throw std::invalid_argument("scheduled_env: empty schedule");
  if (theta.norm() > 1.0 + 1e-12) {
    throw NormViolationError("scheduled_env: |theta| = " + std::to_string(theta.norm()));
  }
  Environment env;
  env.theta_ = std::move(theta);
  env.k_ = 0;
  for (const ContextSet& x : schedule) env.k_ = std::max(env.k_, x.size());
  env.t_horizon_ = long(schedule.size());
  env.noise_seed_ = noise_seed;
  env.source_ = Environment::Scheduled{std::move(schedule)};
  return env;
}

LowerBoundSpec feasible_lower_bound_spec(int d, long t_horizon, long switch_budget) {
  LowerBoundSpec skeleton;
  skeleton.d = d;
  skeleton.T = t_horizon;
  skeleton.M = switch_budget;
  const long blocks = d / 2;
  if (d < 2 || d % 2 != 0 || (8 * switch_budget) % d != 0 || t_horizon % blocks != 0) {
    throw std::invalid_argument("feasible_lower_bound_spec: inconsistent (d, T, M)");
  }
  const long stages = 8 * switch_budget / d;
  const double block_steps = double(t_horizon / blocks);
  const double upsilon = std::pow(block_steps, -1.0 / (2.0 * double(stages + 1)));

  struct State {
    double tau;                 // sum_{i >= j} u_i upsilon^i
    std::vector<int8_t> signs;  // u_L, u_{L-1}, ..., u_j
  };
  const size_t beam_width = 1024;
  std::vector<State> beam{{std::pow(upsilon, double(stages)), {1}},
                          {-std::pow(upsilon, double(stages)), {-1}}};
  for (long j = stages - 1; j >= 1; --j) {
    const double uj = std::pow(upsilon, double(j));
    std::vector<State> next;
    next.reserve(2 * beam.size());
    for (const State& s : beam) {
      for (int sign : {-1, 1}) {
        double tau = s.tau + double(sign) * uj;
        // Keep the gap certificate |tau_j| >= upsilon^j / 2 with margin.
        if (std::abs(tau) < 0.5 * uj * (1.0 + 1e-9)) continue;
        if (std::abs(tau) > 3.0 * uj) continue;
        State ns{tau, s.signs};
        ns.signs.push_back(int8_t(sign));
        next.push_back(std::move(ns));
      }
    }
    // Steer toward tau_1 ~ -upsilon so psi_L lands inside the theta ball.
    std::stable_sort(next.begin(), next.end(), [&](const State& a, const State& b) {
      return std::abs(a.tau + uj) < std::abs(b.tau + uj);
    });
    if (next.size() > beam_width) next.resize(beam_width);
    beam = std::move(next);
    if (beam.empty()) {
      throw std::runtime_error("feasible_lower_bound_spec: beam search exhausted");
    }
  }

  for (const State& s : beam) {
    const double psi_final = 0.5 + s.tau;
    if (psi_final * psi_final + 4.0 / 9.0 > 1.0 - 1e-9) continue;
    std::vector<int> u(s.signs.rbegin(), s.signs.rend());
    // Full forward validation: context norms and the gap floor, every stage.
    bool ok = true;
    double psi = 0.5;
    for (long j = 1; j <= stages && ok; ++j) {
      const double zj = std::pow(upsilon, -double(j + 1)) / std::sqrt(block_steps);
      if (zj > 1.0 + 1e-12) ok = false;
      if (std::abs(1.5 * zj * psi) > 1.0 - 1e-12) ok = false;
      const double gap_scale = std::abs(psi_final - psi);  // |tau_j|
      if (gap_scale < 0.5 * std::pow(upsilon, double(j))) ok = false;
      psi += double(u[size_t(j - 1)]) * std::pow(upsilon, double(j));
    }
    if (!ok) continue;
    skeleton.u.assign(size_t(blocks), u);
    return skeleton;
  }
  throw std::runtime_error("feasible_lower_bound_spec: no candidate passed validation");
}

Environment lower_bound_instance(const LowerBoundSpec& spec, std::uint64_t noise_seed) {
  LowerBoundLayout layout(spec);
  Eigen::VectorXd theta = layout.theta();
  if (theta.norm() > 1.0) {
    throw NormViolationError("lower_bound_instance: |theta| = " + std::to_string(theta.norm()) +
                             " > 1; parameter regime unsupported");
  }
  // The per-stage contexts z_j and 1.5 z_j psi_{j-1} must stay in the ball.
  for (int b = 0; b < spec.d / 2; ++b) {
    for (long j = 1; j <= layout.stages_per_block(); ++j) {
      double n1 = layout.z(j);
      double n2 = 1.5 * layout.z(j) * layout.psi(b, j - 1);
      if (n1 > 1.0 + 1e-12 || n2 > 1.0 + 1e-12) {
        throw NormViolationError("lower_bound_instance: context norm exceeds 1 in stage " +
                                 std::to_string(j));
      }
    }
  }
  Environment env;
  env.theta_ = std::move(theta);
  env.k_ = 2;
  env.t_horizon_ = spec.T;
  env.noise_seed_ = noise_seed;
  env.source_ = std::move(layout);
  return env;
}

}  // namespace adaptivity
