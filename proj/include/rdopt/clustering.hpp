#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "rdopt/types.hpp"

namespace rdopt {

struct KMeansConfig {
  int k = 1;
  int max_iters = 300;
  double rel_tol = 1e-6;  // relative inertia decrease below which a run stops
  int n_init = 10;        // k-means++ restarts; best inertia wins
  std::uint64_t seed = 0;
};

struct ClusterAssignment {
  std::vector<int> labels;  // one cluster id in [0, k) per input row
  double inertia = 0.0;     // sum of squared L2 distances to assigned centroids
};

struct KMeansResult {
  Mat centroids;  // k x d, same space as the input rows
  ClusterAssignment assignment;
  std::vector<double> inertia_history;  // per Lloyd iteration of the best run
};

// Lloyd's algorithm with k-means++ initialization over the rows of X.
// Restart seeds are derived deterministically from cfg.seed; the run with
// the lowest inertia wins. Empty clusters are re-seeded with the point
// farthest from its assigned centroid. Deterministic given cfg.seed.
KMeansResult kmeans_fit(const Mat& X, const KMeansConfig& cfg);

// Argmin over centroid rows of squared L2 distance; ties break toward the
// lowest cluster id.
int assign_nearest(const Vec& v, const Mat& centroids);

// Same, against a ClusterModel; v must be in normalized space.
int assign_nearest(const Vec& v, const ClusterModel& model);

// Model centroid curves mapped back into normalized space, one row per
// cluster id.
Mat normalized_centroid_matrix(const ClusterModel& model);

// sum_i |x_i - mu_{l(i)}| / sum_i |x_i| over L2 norms. Errors if the
// denominator is zero.
double mean_relative_error(const Mat& X, const Mat& centroids,
                           const std::vector<int>& labels);

// kmeans_fit per k (seeds derived per k from cfg.seed) and the resulting
// mean relative error; the Fig-2-style diagnostic for choosing k.
std::vector<std::pair<int, double>> error_vs_k_sweep(
    const Mat& X, const std::vector<int>& k_values, const KMeansConfig& cfg);

// Full clustering stage: fit normalization, k-means in normalized space,
// denormalize centroids and repair their monotonicity. Labels of the
// winning run are returned through `assignment` when non-null.
ClusterModel build_cluster_model(const RDDataset& dataset,
                                 const KMeansConfig& cfg,
                                 ClusterAssignment* assignment = nullptr);

}  // namespace rdopt
