#include "rdopt/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "rdopt/errors.hpp"
#include "rdopt/rd_model.hpp"
#include "rdopt/rng.hpp"

namespace rdopt {

namespace {

void validate_config(const KMeansConfig& cfg, Eigen::Index n) {
  if (cfg.k < 1) throw ValidationError("k-means needs k >= 1");
  if (cfg.k > n)
    throw ValidationError("k-means needs k <= n samples (k = " +
                          std::to_string(cfg.k) + ", n = " + std::to_string(n) + ")");
  if (cfg.max_iters < 1 || cfg.n_init < 1)
    throw ValidationError("k-means iteration/restart counts must be positive");
  if (!(cfg.rel_tol >= 0.0))
    throw ValidationError("k-means rel_tol must be nonnegative");
}

// Weighted draw by cumulative scan; deterministic given the rng state.
Eigen::Index sample_weighted(const Vec& weights, double total,
                             std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double target = unif(rng) * total;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (acc >= target) return i;
  }
  return weights.size() - 1;
}

Mat kmeanspp_init(const Mat& X, int k, std::mt19937_64& rng) {
  const auto n = X.rows();
  Mat centroids(k, X.cols());
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  centroids.row(0) = X.row(first(rng));
  Vec d2 = (X.rowwise() - centroids.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index pick;
    if (total > 0.0) {
      pick = sample_weighted(d2, total, rng);
    } else {
      // all remaining mass at already-chosen locations
      pick = first(rng);
    }
    centroids.row(c) = X.row(pick);
    d2 = d2.cwiseMin((X.rowwise() - centroids.row(c)).rowwise().squaredNorm());
  }
  return centroids;
}

struct LloydRun {
  Mat centroids;
  std::vector<int> labels;
  double inertia = std::numeric_limits<double>::infinity();
  std::vector<double> history;
};

LloydRun lloyd(const Mat& X, const KMeansConfig& cfg, std::mt19937_64 rng) {
  const auto n = X.rows();
  const int k = cfg.k;
  LloydRun run;
  run.centroids = kmeanspp_init(X, k, rng);
  run.labels.assign(n, 0);

  double prev_inertia = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    // assignment step
    std::vector<int> counts(k, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      run.labels[i] = assign_nearest(X.row(i).transpose(), run.centroids);
      ++counts[run.labels[i]];
    }

    // re-seed empty clusters with the point farthest from its centroid
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      Eigen::Index far = -1;
      double far_d2 = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (counts[run.labels[i]] <= 1) continue;  // keep donors nonempty
        const double d2 =
            (X.row(i) - run.centroids.row(run.labels[i])).squaredNorm();
        if (d2 > far_d2) {
          far_d2 = d2;
          far = i;
        }
      }
      if (far < 0) continue;  // n >= k guarantees this stays unreachable
      --counts[run.labels[far]];
      run.labels[far] = c;
      ++counts[c];
    }

    // update step
    run.centroids.setZero();
    for (Eigen::Index i = 0; i < n; ++i) run.centroids.row(run.labels[i]) += X.row(i);
    for (int c = 0; c < k; ++c) run.centroids.row(c) /= double(counts[c]);

    double inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      inertia += (X.row(i) - run.centroids.row(run.labels[i])).squaredNorm();
    run.history.push_back(inertia);

    const double drop = prev_inertia - inertia;
    if (iter > 0 && drop <= cfg.rel_tol * std::max(prev_inertia, 1e-300)) {
      run.inertia = inertia;
      break;
    }
    prev_inertia = inertia;
    run.inertia = inertia;
  }
  return run;
}

}  // namespace

KMeansResult kmeans_fit(const Mat& X, const KMeansConfig& cfg) {
  validate_config(cfg, X.rows());
  if (!X.allFinite()) throw ValidationError("k-means input has non-finite values");

  LloydRun best;
  for (int r = 0; r < cfg.n_init; ++r) {
    LloydRun run = lloyd(X, cfg, make_rng(cfg.seed, r));
    if (run.inertia < best.inertia) best = std::move(run);
  }

  KMeansResult result;
  result.centroids = std::move(best.centroids);
  result.assignment.labels = std::move(best.labels);
  result.assignment.inertia = best.inertia;
  result.inertia_history = std::move(best.history);
  return result;
}

int assign_nearest(const Vec& v, const Mat& centroids) {
  if (v.size() != centroids.cols())
    throw ValidationError("assign_nearest: vector length does not match centroids");
  int best = 0;
  double best_d2 = (v.transpose() - centroids.row(0)).squaredNorm();
  for (int c = 1; c < centroids.rows(); ++c) {
    const double d2 = (v.transpose() - centroids.row(c)).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = c;
    }
  }
  return best;
}

int assign_nearest(const Vec& v, const ClusterModel& model) {
  return assign_nearest(v, normalized_centroid_matrix(model));
}

Mat normalized_centroid_matrix(const ClusterModel& model) {
  Mat out(model.k, 2 * model.grid.size());
  for (const auto& c : model.centroids) {
    Vec rd(2 * model.grid.size());
    rd << c.rates, c.qualities;
    out.row(c.cluster_id) = normalize(rd, model.stats);
  }
  return out;
}

double mean_relative_error(const Mat& X, const Mat& centroids,
                           const std::vector<int>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != X.rows())
    throw ValidationError("mean_relative_error: labels/vectors length mismatch");
  double residual = 0.0;
  double magnitude = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const int l = labels[i];
    if (l < 0 || l >= centroids.rows())
      throw ValidationError("mean_relative_error: label out of range");
    residual += (X.row(i) - centroids.row(l)).norm();
    magnitude += X.row(i).norm();
  }
  if (magnitude == 0.0)
    throw ValidationError("mean_relative_error: all-zero vectors");
  return residual / magnitude;
}

std::vector<std::pair<int, double>> error_vs_k_sweep(
    const Mat& X, const std::vector<int>& k_values, const KMeansConfig& cfg) {
  std::vector<std::pair<int, double>> out;
  out.reserve(k_values.size());
  for (const int k : k_values) {
    KMeansConfig per_k = cfg;
    per_k.k = k;
    per_k.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(k));
    const KMeansResult result = kmeans_fit(X, per_k);
    out.emplace_back(
        k, mean_relative_error(X, result.centroids, result.assignment.labels));
  }
  return out;
}

ClusterModel build_cluster_model(const RDDataset& dataset, const KMeansConfig& cfg,
                                 ClusterAssignment* assignment) {
  validate(dataset);
  const Mat X = to_rd_matrix(dataset);
  ClusterModel model;
  model.grid = dataset.grid;
  model.stats = fit_normalization(X);
  model.k = cfg.k;
  model.seed = cfg.seed;

  const Mat Xn = normalize_rows(X, model.stats);
  KMeansResult result = kmeans_fit(Xn, cfg);

  model.centroids.reserve(cfg.k);
  for (int c = 0; c < cfg.k; ++c) {
    const Vec rd = denormalize(result.centroids.row(c).transpose(), model.stats);
    auto [rates, qualities] = split_rd_vector(rd);
    model.centroids.push_back(
        repair_monotonicity({c, std::move(rates), std::move(qualities)}));
  }
  if (assignment) *assignment = std::move(result.assignment);
  validate(model);
  return model;
}

}  // namespace rdopt
