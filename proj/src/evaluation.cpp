#include "rdopt/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <string>

#include "rdopt/errors.hpp"

namespace rdopt {

namespace {

std::string format_label(double crf) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", crf);
  return buf;
}

double parse_label(const std::string& label) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(label, &pos);
    if (pos != label.size()) throw std::invalid_argument(label);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("sweep label '" + label + "' is not a CRF value");
  }
}

int grid_index_or_throw(const OperatingPointGrid& grid, double crf) {
  const int j = grid.index_of(crf);
  if (j < 0)
    throw ValidationError("CRF " + format_label(crf) +
                          " is not an operating-point grid value");
  return j;
}

}  // namespace

std::string to_string(SweepKind kind) {
  switch (kind) {
    case SweepKind::baseline_expected: return "baseline_expected";
    case SweepKind::optimal_expected: return "optimal_expected";
    case SweepKind::baseline_actual: return "baseline_actual";
    case SweepKind::optimal_actual: return "optimal_actual";
    case SweepKind::oracle_actual: return "oracle_actual";
  }
  throw ValidationError("unknown sweep kind");
}

SweepKind sweep_kind_from_string(const std::string& s) {
  for (const auto kind :
       {SweepKind::baseline_expected, SweepKind::optimal_expected,
        SweepKind::baseline_actual, SweepKind::optimal_actual,
        SweepKind::oracle_actual})
    if (to_string(kind) == s) return kind;
  throw ValidationError("unknown sweep kind '" + s + "'");
}

Sweep make_sweep(SweepKind kind, std::vector<SweepPoint> points) {
  if (points.empty()) throw ValidationError("empty sweep");
  for (const auto& p : points)
    if (!std::isfinite(p.avg_rate) || !std::isfinite(p.avg_quality) ||
        !std::isfinite(p.worst_quality))
      throw ValidationError("sweep point with non-finite values");
  std::stable_sort(points.begin(), points.end(),
                   [](const SweepPoint& a, const SweepPoint& b) {
                     return a.avg_rate < b.avg_rate;
                   });
  for (std::size_t i = 0; i + 1 < points.size(); ++i)
    if (!(points[i].avg_quality < points[i + 1].avg_quality))
      throw ValidationError(
          "sweep '" + to_string(kind) +
          "' is not strictly increasing in quality with rate (labels '" +
          points[i].label + "', '" + points[i + 1].label + "')");
  return {kind, std::move(points)};
}

Sweep baseline_sweep_expected(const ClusterModel& model,
                              const CorpusDistribution& w,
                              const std::vector<double>& crf_list) {
  validate(model);
  validate(w);
  if (w.weights.size() != model.k)
    throw ValidationError("weights length does not match model k");
  if (crf_list.empty()) throw ValidationError("empty CRF list");
  const Mat rates = centroid_rate_matrix(model);
  const Mat quals = centroid_quality_matrix(model);
  std::vector<SweepPoint> points;
  points.reserve(crf_list.size());
  for (const double crf : crf_list) {
    const int j = grid_index_or_throw(model.grid, crf);
    SweepPoint p;
    p.label = format_label(crf);
    p.avg_rate = w.weights.dot(rates.col(j));
    p.avg_quality = w.weights.dot(quals.col(j));
    p.worst_quality = quals.col(j).minCoeff();
    points.push_back(std::move(p));
  }
  return make_sweep(SweepKind::baseline_expected, std::move(points));
}

ExpectedEvaluation optimal_sweep_expected(const ClusterModel& model,
                                          const CorpusDistribution& w,
                                          const Sweep& baseline) {
  if (baseline.points.empty()) throw ValidationError("empty baseline sweep");
  ExpectedEvaluation out;
  out.baseline = baseline;
  std::vector<SweepPoint> points;
  points.reserve(baseline.points.size());
  for (const auto& base : baseline.points) {
    const double crf = parse_label(base.label);
    const int j = grid_index_or_throw(model.grid, crf);
    const QualityConstraints c{base.avg_quality, base.worst_quality};
    AllocationSolution sol = solve_allocation(model, w, c);
    if (sol.avg_rate > base.avg_rate) {
      // the uniform assignment at this CRF meets the same constraints;
      // never return a costlier point than the baseline it was derived from
      sol.op_index.assign(model.k, j);
      sol.op_values = Vec::Constant(model.k, model.grid.points[j]);
      sol.avg_rate = base.avg_rate;
      sol.avg_quality = base.avg_quality;
      sol.worst_quality = base.worst_quality;
      sol.lambda_star = 0.0;
      sol.exact = false;
    }
    SweepPoint p;
    p.label = base.label;
    p.avg_rate = sol.avg_rate;
    p.avg_quality = sol.avg_quality;
    p.worst_quality = sol.worst_quality;
    points.push_back(std::move(p));
    out.crfs.push_back(crf);
    out.solutions.push_back(std::move(sol));
  }
  out.optimal = make_sweep(SweepKind::optimal_expected, std::move(points));
  return out;
}

ExpectedEvaluation evaluate_expected(const ClusterModel& model,
                                     const CorpusDistribution& w,
                                     const std::vector<double>& crf_list) {
  return optimal_sweep_expected(model, w,
                                baseline_sweep_expected(model, w, crf_list));
}

ActualSweeps actual_sweeps_from_predictions(
    const RDDataset& dataset, const std::vector<int>& predictions,
    const std::vector<double>& crfs,
    const std::vector<AllocationSolution>& solutions) {
  if (dataset.size() == 0) throw ValidationError("empty dataset");
  if (static_cast<int>(predictions.size()) != dataset.size())
    throw ValidationError("one prediction per chunk required");
  if (crfs.size() != solutions.size())
    throw ValidationError("one allocation per constraint point required");
  if (crfs.empty()) throw ValidationError("empty constraint ladder");

  const int n = dataset.size();
  const auto aggregate = [&](const std::vector<int>& op_of_chunk,
                             const std::string& label) {
    SweepPoint p;
    p.label = label;
    double rate = 0.0, quality = 0.0;
    double worst = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      const auto& s = dataset.samples[i];
      rate += s.rates[op_of_chunk[i]];
      quality += s.qualities[op_of_chunk[i]];
      worst = std::min(worst, s.qualities[op_of_chunk[i]]);
    }
    p.avg_rate = rate / n;
    p.avg_quality = quality / n;
    p.worst_quality = worst;
    return p;
  };

  std::vector<SweepPoint> baseline_points, optimal_points;
  for (std::size_t t = 0; t < crfs.size(); ++t) {
    const int j = grid_index_or_throw(dataset.grid, crfs[t]);
    const std::string label = format_label(crfs[t]);
    baseline_points.push_back(aggregate(std::vector<int>(n, j), label));

    const auto& sol = solutions[t];
    std::vector<int> op_of_chunk(n);
    for (int i = 0; i < n; ++i) {
      const int cls = predictions[i];
      if (cls < 0 || cls >= static_cast<int>(sol.op_index.size()))
        throw ValidationError("prediction " + std::to_string(cls) +
                              " outside the allocation's cluster range");
      op_of_chunk[i] = sol.op_index[cls];
    }
    optimal_points.push_back(aggregate(op_of_chunk, label));
  }
  return {make_sweep(SweepKind::baseline_actual, std::move(baseline_points)),
          make_sweep(SweepKind::optimal_actual, std::move(optimal_points))};
}

ActualSweeps actual_sweeps(const RDDataset& dataset,
                           const std::vector<FeatureVector>& features,
                           const ClassifierModel& classifier,
                           const std::vector<double>& crfs,
                           const std::vector<AllocationSolution>& solutions) {
  std::map<std::string, const FeatureVector*> by_id;
  for (const auto& f : features) by_id[f.chunk_id] = &f;
  std::vector<int> predictions(dataset.size());
  std::string missing;
  int missing_count = 0;
  for (int i = 0; i < dataset.size(); ++i) {
    const auto it = by_id.find(dataset.samples[i].chunk_id);
    if (it == by_id.end()) {
      missing += (missing_count++ ? ", " : "") + dataset.samples[i].chunk_id;
      continue;
    }
    predictions[i] = predict(classifier, it->second->values);
  }
  if (missing_count)
    throw ValidationError("chunks without features: " + missing);
  return actual_sweeps_from_predictions(dataset, predictions, crfs, solutions);
}

Sweep oracle_actual_sweep(const RDDataset& dataset, const Sweep& baseline_actual) {
  std::vector<SweepPoint> points;
  points.reserve(baseline_actual.points.size());
  for (const auto& base : baseline_actual.points) {
    const QualityConstraints c{base.avg_quality, base.worst_quality};
    const AllocationSolution sol = per_chunk_allocation(dataset, c);
    SweepPoint p;
    p.label = base.label;
    p.avg_rate = sol.avg_rate;
    p.avg_quality = sol.avg_quality;
    p.worst_quality = sol.worst_quality;
    points.push_back(std::move(p));
  }
  return make_sweep(SweepKind::oracle_actual, std::move(points));
}

namespace {

// Least-squares cubic fit of log10(rate) against (quality - shift).
Eigen::Vector4d fit_log_rate_poly(const Sweep& sweep, double shift) {
  const auto m = sweep.points.size();
  Mat A(m, 4);
  Vec b(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double u = sweep.points[i].avg_quality - shift;
    A(i, 0) = 1.0;
    A(i, 1) = u;
    A(i, 2) = u * u;
    A(i, 3) = u * u * u;
    if (!(sweep.points[i].avg_rate > 0.0))
      throw ValidationError("BD-rate needs strictly positive rates");
    b[i] = std::log10(sweep.points[i].avg_rate);
  }
  return A.colPivHouseholderQr().solve(b);
}

double integrate_poly(const Eigen::Vector4d& coef, double a, double b) {
  const auto antideriv = [&](double u) {
    return coef[0] * u + coef[1] * u * u / 2.0 + coef[2] * u * u * u / 3.0 +
           coef[3] * u * u * u * u / 4.0;
  };
  return antideriv(b) - antideriv(a);
}

}  // namespace

double bd_rate(const Sweep& reference, const Sweep& test) {
  if (reference.points.size() < 4 || test.points.size() < 4)
    throw ValidationError("BD-rate needs at least 4 points per sweep");
  const auto range = [](const Sweep& s) {
    return std::pair<double, double>{s.points.front().avg_quality,
                                     s.points.back().avg_quality};
  };
  const auto [ref_lo, ref_hi] = range(reference);
  const auto [test_lo, test_hi] = range(test);
  const double lo = std::max(ref_lo, test_lo);
  const double hi = std::min(ref_hi, test_hi);
  if (!(hi > lo))
    throw ValidationError("BD-rate: sweep quality ranges do not overlap");

  const double shift = 0.5 * (lo + hi);
  const Eigen::Vector4d ref_fit = fit_log_rate_poly(reference, shift);
  const Eigen::Vector4d test_fit = fit_log_rate_poly(test, shift);
  const double mean_diff = (integrate_poly(test_fit, lo - shift, hi - shift) -
                            integrate_poly(ref_fit, lo - shift, hi - shift)) /
                           (hi - lo);
  return (std::pow(10.0, mean_diff) - 1.0) * 100.0;
}

double quality_at_rate(const Sweep& sweep, double rate) {
  const auto& pts = sweep.points;
  if (pts.empty()) throw ValidationError("empty sweep");
  if (rate < pts.front().avg_rate || rate > pts.back().avg_rate)
    throw ValidationError("rate outside sweep range");
  std::size_t j = 0;
  while (j + 2 < pts.size() && pts[j + 1].avg_rate < rate) ++j;
  const double span = pts[j + 1].avg_rate - pts[j].avg_rate;
  const double t = span > 0.0 ? (rate - pts[j].avg_rate) / span : 0.0;
  return pts[j].avg_quality + t * (pts[j + 1].avg_quality - pts[j].avg_quality);
}

}  // namespace rdopt
