#pragma once

#include <cstdint>

#include "geclab/agents.hpp"
#include "geclab/complexity.hpp"
#include "geclab/hypotheses.hpp"
#include "geclab/psr.hpp"

namespace geclab {

// Traces of completed runs. Training errors are exact expectations under the
// exploration policies of the earlier rounds.

// Hellinger distance between next-state laws at step h - 1, weighted by the
// occupancy of pi_{f^s}.
GecTrace model_based_gec_trace(const TabularMDP& env, const ModelClass& cls, const RunResult& run);

// Squared Bellman residual at step h - 1 under pi_exp(f^s, h).
GecTrace model_free_gec_trace(const TabularMDP& env, const LayeredValueClass& cls, const RunResult& run,
                              ExplorationKind explore);

// D_H^2(P_{f^t}^{pi_exp(f^s, h)}, P_*^{pi_exp(f^s, h)}) over full trajectories,
// h = 0..H-1. Exact when (O A)^H <= exact_cap, Monte Carlo otherwise with the
// largest standard error reported as mc_tolerance.
GecTrace psr_gec_trace(const Model& env, const ModelClass& cls, const RunResult& run, const CoreTestSet& core,
                       std::int64_t exact_cap = 100000, int mc_samples = 4000, std::uint64_t seed = 0);

}  // namespace geclab
