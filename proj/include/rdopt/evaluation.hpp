#pragma once

#include <string>
#include <vector>

#include "rdopt/allocation.hpp"
#include "rdopt/classifier.hpp"
#include "rdopt/types.hpp"

namespace rdopt {

enum class SweepKind {
  baseline_expected,
  optimal_expected,
  baseline_actual,
  optimal_actual,
  oracle_actual,
};

std::string to_string(SweepKind kind);
SweepKind sweep_kind_from_string(const std::string& s);

struct SweepPoint {
  std::string label;  // baseline CRF value, doubling as the constraint id
  double avg_rate = 0.0;
  double avg_quality = 0.0;
  double worst_quality = 0.0;
};

struct Sweep {
  SweepKind kind = SweepKind::baseline_expected;
  std::vector<SweepPoint> points;  // sorted by avg_rate
};

// Sorts by avg_rate and rejects sweeps whose avg_quality is not strictly
// increasing with avg_rate.
Sweep make_sweep(SweepKind kind, std::vector<SweepPoint> points);

// One point per CRF: every cluster at the same grid point, aggregated with
// the corpus weights (worst quality over all clusters).
Sweep baseline_sweep_expected(const ClusterModel& model,
                              const CorpusDistribution& w,
                              const std::vector<double>& crf_list);

struct ExpectedEvaluation {
  Sweep baseline;
  Sweep optimal;
  // Aligned with baseline.points: the CRF and allocation behind each
  // constraint point.
  std::vector<double> crfs;
  std::vector<AllocationSolution> solutions;
};

// For each baseline point, sets the constraints to that point's average
// and worst quality and solves the allocation. The uniform assignment at
// the baseline CRF is itself feasible for those constraints, so it is kept
// as a candidate; every optimal point's rate is <= its paired baseline's.
ExpectedEvaluation optimal_sweep_expected(const ClusterModel& model,
                                          const CorpusDistribution& w,
                                          const Sweep& baseline);

ExpectedEvaluation evaluate_expected(const ClusterModel& model,
                                     const CorpusDistribution& w,
                                     const std::vector<double>& crf_list);

struct ActualSweeps {
  Sweep baseline;
  Sweep optimal;
};

// Chunk-level aggregation with the chunks' own R-D curves: baseline uses
// one CRF for every chunk; optimal gives chunk i the operating point its
// predicted cluster was allocated. `predictions` is aligned with
// dataset.samples.
ActualSweeps actual_sweeps_from_predictions(
    const RDDataset& dataset, const std::vector<int>& predictions,
    const std::vector<double>& crfs,
    const std::vector<AllocationSolution>& solutions);

// Classifies every chunk with the model first (error lists chunk ids
// missing from `features`).
ActualSweeps actual_sweeps(const RDDataset& dataset,
                           const std::vector<FeatureVector>& features,
                           const ClassifierModel& classifier,
                           const std::vector<double>& crfs,
                           const std::vector<AllocationSolution>& solutions);

// Per-chunk direct optimization at each baseline_actual point's constraint
// values; the best possible rate allocation for the given chunks.
Sweep oracle_actual_sweep(const RDDataset& dataset, const Sweep& baseline_actual);

// Bjontegaard delta rate between two sweeps, percent. Fits a plain cubic
// polynomial of log10(avg_rate) against avg_quality for each sweep,
// integrates both over the overlapping quality interval, and returns
// (10^(mean difference) - 1) * 100. Negative means `test` saves rate.
// Requires >= 4 points per sweep and a nonempty quality overlap.
double bd_rate(const Sweep& reference, const Sweep& test);

// Piecewise-linear quality of the sweep at a given average rate; used for
// curve-vs-curve dominance checks. Rate must lie within the sweep's range.
double quality_at_rate(const Sweep& sweep, double rate);

}  // namespace rdopt
