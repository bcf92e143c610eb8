#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace rdopt {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Degenerate per-component standard deviations are clamped to this value
// (in component units) before any division.
inline constexpr double kEpsilonStd = 1e-8;

// Relative tolerance for the non-increasing checks on ingested R-D samples.
inline constexpr double kMonotoneRelTol = 1e-6;

// Ordered encoder operating points (CRF/QP values), strictly increasing.
struct OperatingPointGrid {
  Vec points;

  int size() const { return static_cast<int>(points.size()); }

  // Index of the grid point equal to q (relative tolerance 1e-9), -1 if absent.
  int index_of(double q) const;
};

// Throws ValidationError unless the grid has >= 2 strictly increasing,
// finite points.
void validate(const OperatingPointGrid& grid);

// Measured (bitrate, quality) values of one chunk at every grid point.
// Rates are kbps (> 0), qualities are PSNR in dB. Both are non-increasing
// in grid index: a higher CRF yields a lower bitrate and a lower quality.
struct RDSample {
  std::string chunk_id;
  Vec rates;
  Vec qualities;
};

// Ingestion-time validation: shape match against the grid, finiteness,
// positivity, and monotonicity within kMonotoneRelTol. Samples violating
// monotonicity beyond tolerance are rejected, not repaired.
void validate(const RDSample& sample, const OperatingPointGrid& grid);

// A corpus of samples sharing one grid.
struct RDDataset {
  OperatingPointGrid grid;
  std::vector<RDSample> samples;

  int size() const { return static_cast<int>(samples.size()); }
};

void validate(const RDDataset& dataset);

// Per-component mean/std for standardizing vectors. Used both for 2s-dim
// R-D vectors and for f-dim feature vectors.
struct NormalizationStats {
  Vec means;
  Vec stds;

  int size() const { return static_cast<int>(means.size()); }
};

void validate(const NormalizationStats& stats);

// Denormalized cluster-mean R-D curve over the grid. After monotonicity
// repair both sequences are non-increasing (plateaus allowed).
struct CentroidCurve {
  int cluster_id = 0;
  Vec rates;
  Vec qualities;
};

// Grid + normalization + k repaired centroid curves; the output of the
// clustering stage and the input to allocation and evaluation.
struct ClusterModel {
  OperatingPointGrid grid;
  NormalizationStats stats;
  std::vector<CentroidCurve> centroids;
  int k = 0;
  std::uint64_t seed = 0;  // RNG seed the clustering ran with
};

// Checks k >= 1, centroid ids are exactly 0..k-1, and all curve lengths
// match the grid.
void validate(const ClusterModel& model);

// Per-cluster centroid rates/qualities as k x s matrices (row l = cluster l).
Mat centroid_rate_matrix(const ClusterModel& model);
Mat centroid_quality_matrix(const ClusterModel& model);

}  // namespace rdopt
