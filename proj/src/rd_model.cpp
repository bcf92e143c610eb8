#include "rdopt/rd_model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "rdopt/errors.hpp"

namespace rdopt {

namespace {

bool non_increasing_within_tol(const Vec& v) {
  for (int j = 0; j + 1 < v.size(); ++j) {
    const double scale = std::max({std::abs(v[j]), std::abs(v[j + 1]), 1.0});
    if (v[j + 1] - v[j] > kMonotoneRelTol * scale) return false;
  }
  return true;
}

}  // namespace

int OperatingPointGrid::index_of(double q) const {
  for (int j = 0; j < size(); ++j) {
    const double scale = std::max({std::abs(points[j]), std::abs(q), 1.0});
    if (std::abs(points[j] - q) <= 1e-9 * scale) return j;
  }
  return -1;
}

void validate(const OperatingPointGrid& grid) {
  if (grid.size() < 2)
    throw ValidationError("operating-point grid needs at least 2 points, got " +
                          std::to_string(grid.size()));
  if (!grid.points.allFinite())
    throw ValidationError("operating-point grid has non-finite values");
  for (int j = 0; j + 1 < grid.size(); ++j)
    if (!(grid.points[j] < grid.points[j + 1]))
      throw ValidationError("operating-point grid must be strictly increasing");
}

void validate(const RDSample& sample, const OperatingPointGrid& grid) {
  const auto where = [&] { return "chunk '" + sample.chunk_id + "': "; };
  if (sample.rates.size() != grid.size() || sample.qualities.size() != grid.size())
    throw ValidationError(where() + "expected " + std::to_string(grid.size()) +
                          " grid points, got " + std::to_string(sample.rates.size()) +
                          " rates / " + std::to_string(sample.qualities.size()) +
                          " qualities");
  if (!sample.rates.allFinite() || !sample.qualities.allFinite())
    throw ValidationError(where() + "non-finite rate or quality value");
  if ((sample.rates.array() <= 0.0).any())
    throw ValidationError(where() + "rates must be strictly positive");
  if (!non_increasing_within_tol(sample.rates))
    throw ValidationError(where() + "rates increase with the operating point "
                          "beyond tolerance; rejecting corrupt measurement");
  if (!non_increasing_within_tol(sample.qualities))
    throw ValidationError(where() + "qualities increase with the operating point "
                          "beyond tolerance; rejecting corrupt measurement");
}

void validate(const RDDataset& dataset) {
  validate(dataset.grid);
  std::set<std::string> seen;
  for (const auto& s : dataset.samples) {
    validate(s, dataset.grid);
    if (!seen.insert(s.chunk_id).second)
      throw ValidationError("duplicate chunk_id '" + s.chunk_id + "'");
  }
}

void validate(const NormalizationStats& stats) {
  if (stats.means.size() != stats.stds.size())
    throw ValidationError("normalization means/stds length mismatch");
  if (!stats.means.allFinite() || !stats.stds.allFinite())
    throw ValidationError("normalization stats must be finite");
  if ((stats.stds.array() < kEpsilonStd).any())
    throw ValidationError("normalization stds below epsilon clamp");
}

void validate(const ClusterModel& model) {
  validate(model.grid);
  validate(model.stats);
  if (model.k < 1) throw ValidationError("cluster model needs k >= 1");
  if (static_cast<int>(model.centroids.size()) != model.k)
    throw ValidationError("cluster model has " +
                          std::to_string(model.centroids.size()) +
                          " centroids, expected k = " + std::to_string(model.k));
  if (model.stats.size() != 2 * model.grid.size())
    throw ValidationError("normalization stats length must be 2s");
  std::vector<bool> present(model.k, false);
  for (const auto& c : model.centroids) {
    if (c.cluster_id < 0 || c.cluster_id >= model.k || present[c.cluster_id])
      throw ValidationError("centroid cluster_ids must be distinct in [0, k)");
    present[c.cluster_id] = true;
    if (c.rates.size() != model.grid.size() || c.qualities.size() != model.grid.size())
      throw ValidationError("centroid curve length does not match grid");
    if (!c.rates.allFinite() || !c.qualities.allFinite())
      throw ValidationError("centroid curve has non-finite values");
  }
}

Mat centroid_rate_matrix(const ClusterModel& model) {
  Mat out(model.k, model.grid.size());
  for (const auto& c : model.centroids) out.row(c.cluster_id) = c.rates;
  return out;
}

Mat centroid_quality_matrix(const ClusterModel& model) {
  Mat out(model.k, model.grid.size());
  for (const auto& c : model.centroids) out.row(c.cluster_id) = c.qualities;
  return out;
}

Vec to_rd_vector(const RDSample& sample) {
  Vec v(sample.rates.size() + sample.qualities.size());
  v << sample.rates, sample.qualities;
  return v;
}

std::pair<Vec, Vec> split_rd_vector(const Vec& v) {
  if (v.size() % 2 != 0)
    throw ValidationError("R-D vector length must be even (2s)");
  const auto s = v.size() / 2;
  return {v.head(s), v.tail(s)};
}

Mat to_rd_matrix(const RDDataset& dataset) {
  const int s = dataset.grid.size();
  Mat X(dataset.size(), 2 * s);
  for (int i = 0; i < dataset.size(); ++i)
    X.row(i) = to_rd_vector(dataset.samples[i]);
  return X;
}

NormalizationStats fit_normalization(const Mat& rows) {
  const auto n = rows.rows();
  if (n < 2)
    throw ValidationError("normalization needs at least 2 samples, got " +
                          std::to_string(n));
  if (!rows.allFinite())
    throw ValidationError("normalization input has non-finite values");
  NormalizationStats stats;
  stats.means = rows.colwise().mean();
  const Mat centered = rows.rowwise() - stats.means.transpose();
  stats.stds = (centered.array().square().colwise().sum() / double(n - 1))
                   .sqrt()
                   .matrix()
                   .transpose();
  stats.stds = stats.stds.cwiseMax(kEpsilonStd);
  return stats;
}

NormalizationStats fit_normalization(const RDDataset& dataset) {
  return fit_normalization(to_rd_matrix(dataset));
}

Vec normalize(const Vec& v, const NormalizationStats& stats) {
  if (v.size() != stats.size())
    throw ValidationError("normalize: vector length " + std::to_string(v.size()) +
                          " does not match stats length " +
                          std::to_string(stats.size()));
  return (v - stats.means).cwiseQuotient(stats.stds);
}

Vec denormalize(const Vec& v, const NormalizationStats& stats) {
  if (v.size() != stats.size())
    throw ValidationError("denormalize: vector length mismatch");
  return v.cwiseProduct(stats.stds) + stats.means;
}

Mat normalize_rows(const Mat& rows, const NormalizationStats& stats) {
  if (rows.cols() != stats.size())
    throw ValidationError("normalize_rows: column count mismatch");
  return (rows.rowwise() - stats.means.transpose()).array().rowwise() /
         stats.stds.transpose().array();
}

// Pool-adjacent-violators for the non-decreasing case; weights are uniform
// so pooled blocks carry their running means.
static Vec pava_non_decreasing(const Vec& v) {
  const auto n = v.size();
  std::vector<double> value;   // block means
  std::vector<Eigen::Index> count;  // block sizes
  value.reserve(n);
  count.reserve(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    value.push_back(v[i]);
    count.push_back(1);
    while (value.size() > 1 && value[value.size() - 2] > value.back()) {
      const double merged = (value[value.size() - 2] * count[count.size() - 2] +
                             value.back() * count.back()) /
                            double(count[count.size() - 2] + count.back());
      count[count.size() - 2] += count.back();
      value[value.size() - 2] = merged;
      value.pop_back();
      count.pop_back();
    }
  }
  Vec out(n);
  Eigen::Index pos = 0;
  for (std::size_t b = 0; b < value.size(); ++b)
    for (Eigen::Index r = 0; r < count[b]; ++r) out[pos++] = value[b];
  return out;
}

Vec isotonic_non_increasing(const Vec& v) {
  return pava_non_decreasing(v.reverse()).reverse();
}

CentroidCurve repair_monotonicity(const CentroidCurve& curve) {
  CentroidCurve out = curve;
  out.rates = isotonic_non_increasing(curve.rates);
  out.qualities = isotonic_non_increasing(curve.qualities);
  return out;
}

std::pair<double, double> interpolate_curve(const CentroidCurve& curve,
                                            const OperatingPointGrid& grid,
                                            double q) {
  const int s = grid.size();
  if (curve.rates.size() != s || curve.qualities.size() != s)
    throw ValidationError("interpolate_curve: curve length does not match grid");
  if (q < grid.points[0] || q > grid.points[s - 1])
    throw ValidationError("interpolate_curve: q = " + std::to_string(q) +
                          " outside grid range [" + std::to_string(grid.points[0]) +
                          ", " + std::to_string(grid.points[s - 1]) + "]");
  int j = 0;
  while (j + 2 < s && grid.points[j + 1] < q) ++j;
  const double t = (q - grid.points[j]) / (grid.points[j + 1] - grid.points[j]);
  return {curve.rates[j] + t * (curve.rates[j + 1] - curve.rates[j]),
          curve.qualities[j] + t * (curve.qualities[j + 1] - curve.qualities[j])};
}

}  // namespace rdopt
