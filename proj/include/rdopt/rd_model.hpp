#pragma once

#include <utility>

#include "rdopt/types.hpp"

namespace rdopt {

// [r_1..r_s, d_1..d_s] concatenation, order matching grid index.
Vec to_rd_vector(const RDSample& sample);

// Inverse of to_rd_vector: splits a 2s-vector into (rates, qualities).
std::pair<Vec, Vec> split_rd_vector(const Vec& v);

// Stacks to_rd_vector(sample) for every sample into an n x 2s matrix.
Mat to_rd_matrix(const RDDataset& dataset);

// Per-component sample mean and sample standard deviation (divisor n-1)
// over the rows; stds below kEpsilonStd are clamped. Requires >= 2 rows.
NormalizationStats fit_normalization(const Mat& rows);
NormalizationStats fit_normalization(const RDDataset& dataset);

// Componentwise (x - m) / s and its inverse.
Vec normalize(const Vec& v, const NormalizationStats& stats);
Vec denormalize(const Vec& v, const NormalizationStats& stats);
Mat normalize_rows(const Mat& rows, const NormalizationStats& stats);

// Best non-increasing approximation under least squares
// (pool-adjacent-violators on the reversed sequence).
Vec isotonic_non_increasing(const Vec& v);

// Applies isotonic_non_increasing to both the rate and quality sequences.
// Idempotent and mean-preserving; output stays within [min, max] of the
// input values.
CentroidCurve repair_monotonicity(const CentroidCurve& curve);

// Piecewise-linear interpolation of (rate, quality) at operating point q.
// q must lie within [grid.front, grid.back]; no extrapolation.
std::pair<double, double> interpolate_curve(const CentroidCurve& curve,
                                            const OperatingPointGrid& grid,
                                            double q);

}  // namespace rdopt
