#pragma once

#include <span>
#include <vector>

#include "adaptivity/optimal_design.hpp"

namespace adaptivity {

enum class DesignFlavor { Argmax, Softmax };

// Parameters of a mixed-argmax / mixed-softmax policy: a weighted family of
// PSD score matrices plus the flavor and the arm-count bound that pins the
// softmax temperature (alpha = ln k_max).
struct MixedDesignParams {
  DesignFlavor flavor = DesignFlavor::Softmax;
  int k_max = 1;
  std::vector<std::pair<double, PsdMatrix>> components;

  int count() const { return int(components.size()); }

  // Structural bounds: weights sum to 1, count <= 4 d log2 d, each
  // p_i >= 1/d^3, and d^{-1} I <= M_i <= lambda^{-1} I up to 1e-8 slack.
  void validate(double lambda) const;
};

// Trajectory diagnostics for tests: stage bookkeeping and determinant growth.
struct MixedDesignDiag {
  int stages_total = 0;                // before discarding short stages
  double log_det_u0 = 0.0;
  double log_det_final = 0.0;
  std::vector<long> stage_lengths;     // all stages, pre-discard
  std::vector<double> log_det_steps;   // log det U_t after every step
};

// Replays the determinant-doubling design trajectory over N blocks of the
// sample list S and extracts one component per surviving stage.  N is
// ceil(block_multiplier * 2 d^2 log2 d) clamped to [1, d^3]; the upper clamp
// keeps p_i >= 1/d^3 attainable at small d.  Throws EmptyOutputError if every
// stage is shorter than |S|.
MixedDesignParams build_mixed_design(std::span<const ContextSet> s, double lambda,
                                     DesignFlavor flavor, int k_max, double block_multiplier,
                                     PolicyEngine& engine, MixedDesignDiag* diag = nullptr);

// Mixed(1/2 GOptimal, 1/2 p_i on Argmax(M_i) or Softmax(M_i, ln k_max)).
SamplePolicy assemble_policy(const MixedDesignParams& params);

struct CoreResult {
  std::vector<int> kept_indices;
  int iterations = 0;
  std::vector<long> pruned_per_iteration;
};

// Iteratively prunes sample sets whose directions are underexplored by the
// G-optimal sampler restricted to the survivors.  The information matrix is
// normalized by the FULL sample count; the prune threshold is d^c / 2 and the
// stop certificate d^c.  Iterations are capped at ceil(3 d log2(2/lambda)).
CoreResult core_identification(std::span<const ContextSet> s, double lambda, int c,
                               PolicyEngine& engine);

// core_identification (c = 6), then a softmax-flavor mixed design on the kept
// subsample, assembled into a sample policy.  Requires lambda in (e^{-d}, 1).
SamplePolicy core_learning(std::span<const ContextSet> s, double lambda, int k_max,
                           PolicyEngine& engine, double block_multiplier = 1.0);

}  // namespace adaptivity
