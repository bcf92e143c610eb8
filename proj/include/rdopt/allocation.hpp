#pragma once

#include <vector>

#include "rdopt/types.hpp"

namespace rdopt {

// Fraction of corpus chunks per cluster; nonnegative, sums to 1.
struct CorpusDistribution {
  Vec weights;
};

void validate(const CorpusDistribution& w);

// Quality floors, in dB. All module interfaces speak quality (PSNR,
// higher is better): the average and worst-case distortion ceilings
// become minimum-quality thresholds. The two constraints are independent.
struct QualityConstraints {
  double min_avg_quality = 0.0;
  double min_worst_quality = 0.0;
};

struct AllocationSolution {
  std::vector<int> op_index;  // chosen grid index per cluster (or per chunk)
  Vec op_values;              // operating-point values at those indices
  double avg_rate = 0.0;      // kbps, weighted
  double avg_quality = 0.0;   // dB, weighted
  double worst_quality = 0.0; // dB, min over all units
  double lambda_star = 0.0;
  bool exact = false;         // true only for the exhaustive oracle
};

// w_l = count_l / total with exact integer counts divided once at the end.
CorpusDistribution estimate_weights(const std::vector<int>& predictions, int k);

// Minimizes the weighted average bitrate over per-cluster grid choices
// subject to the average-quality and worst-cluster-quality floors.
// The worst-case constraint decomposes per cluster exactly; the average
// constraint is handled by bisection on a Lagrange multiplier, keeping the
// cheapest constraint-satisfying candidate encountered. Optimal over each
// cluster's lower convex hull; `exact` is false.
// Throws InfeasibleError naming the binding constraint when no assignment
// exists.
AllocationSolution solve_allocation(const ClusterModel& model,
                                    const CorpusDistribution& w,
                                    const QualityConstraints& c);

// Enumerates all grid combinations (guard: s^k <= 1e7) and returns the
// feasible one with minimum average rate; ties break lexicographically by
// op_index. `exact` is true.
AllocationSolution exhaustive_allocation(const ClusterModel& model,
                                         const CorpusDistribution& w,
                                         const QualityConstraints& c);

// Treats every chunk as its own cluster of weight 1/n and runs the same
// allocation; the oracle lower envelope for the given chunks.
AllocationSolution per_chunk_allocation(const RDDataset& dataset,
                                        const QualityConstraints& c);

}  // namespace rdopt
