#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "rdopt/types.hpp"

namespace rdopt {

// Complexity features for one chunk; f opaque numeric columns.
struct FeatureVector {
  std::string chunk_id;
  Vec values;
};

using FeatureScaler = NormalizationStats;

struct SvmHyperparams {
  double c = 1.0;      // soft-margin regularization, > 0
  double gamma = 0.1;  // RBF width, > 0
};

struct SmoOptions {
  double kkt_tol = 1e-3;  // KKT violation tolerance
  int max_passes = 200;   // cap on full passes over the training set
};

// One soft-margin binary machine trained by SMO. dual_coefs holds
// alpha_i * y_i for the support vectors, so |dual_coefs_i| <= C.
// Decision value: sum_i dual_coefs_i * K(sv_i, x) + bias.
struct BinarySvm {
  Mat support_vectors;  // one row per support vector
  Vec dual_coefs;
  double bias = 0.0;
  bool converged = true;
};

// One-vs-one multi-class machine: one BinarySvm per unordered class pair,
// in lexicographic pair order over `classes`; the smaller class id is the
// +1 side of its machine.
struct MulticlassSvm {
  std::vector<int> classes;  // ascending
  std::vector<BinarySvm> machines;
  SvmHyperparams hyperparams;
};

struct ClassifierModel {
  FeatureScaler scaler;
  MulticlassSvm svm;
};

void validate(const ClassifierModel& model);

struct GridCell {
  double c = 0.0;
  double gamma = 0.0;
  double mean_cv_accuracy = 0.0;
};

struct TrainReport {
  std::vector<GridCell> cv_grid;
  SvmHyperparams best;
  double test_accuracy = 0.0;
  Eigen::MatrixXi confusion;  // [true][predicted] counts over report classes
  std::vector<int> classes;
  int n_train = 0;
  int n_test = 0;
};

// Stratified train/test split: per-class proportions preserved within one
// sample, both sides nonempty per class. Deterministic given seed. Errors
// on any class with a single member.
std::pair<std::vector<int>, std::vector<int>> split_train_test(
    const std::vector<int>& labels, double ratio, std::uint64_t seed);

// Stratified fold assignment in [0, folds) per sample. Errors on any class
// with fewer than `folds` members.
std::vector<int> stratified_folds(const std::vector<int>& labels, int folds,
                                  std::uint64_t seed);

// RBF kernel value exp(-gamma * |a - b|^2).
double rbf_kernel(const Vec& a, const Vec& b, double gamma);

// Solves the soft-margin dual by sequential minimal optimization.
// X holds already-scaled feature rows, y is +/-1. At return either every
// point satisfies KKT within opts.kkt_tol or max_passes was reached
// (converged = false). Dual feasibility 0 <= alpha <= C, sum alpha*y = 0
// holds to 1e-9.
BinarySvm train_binary_svm(const Mat& X, const std::vector<int>& y,
                           const SvmHyperparams& hp, const SmoOptions& opts = {});

double decision_value(const BinarySvm& machine, const Vec& x, double gamma);

// Trains the one-vs-one machine set over scaled features.
MulticlassSvm train_multiclass(const Mat& X, const std::vector<int>& labels,
                               const SvmHyperparams& hp,
                               const SmoOptions& opts = {});

// Majority vote over the pair machines; vote ties break by summed absolute
// decision values of the tied classes, then by lowest class id.
int predict(const MulticlassSvm& svm, const Vec& x_scaled);

// Scales the raw features with the stored scaler, then votes.
int predict(const ClassifierModel& model, const Vec& x_raw);

struct CvResult {
  std::vector<GridCell> grid;
  SvmHyperparams best;
};

// Grid search over (c, gamma) with stratified k-fold cross-validation on
// scaled features. Best cell by highest mean validation accuracy; ties
// break toward smaller c, then smaller gamma.
CvResult grid_search_cv(const Mat& X, const std::vector<int>& labels,
                        const std::vector<double>& c_grid,
                        const std::vector<double>& gamma_grid, int folds,
                        std::uint64_t seed, const SmoOptions& opts = {});

Eigen::MatrixXi confusion_matrix(const std::vector<int>& classes,
                                 const std::vector<int>& y_true,
                                 const std::vector<int>& y_pred);

// accuracy = trace(confusion) / sum(confusion); matrix indexed
// [true][predicted] over model.svm.classes.
std::pair<double, Eigen::MatrixXi> evaluate(
    const ClassifierModel& model, const std::vector<FeatureVector>& features,
    const std::vector<int>& y_true);

inline const std::vector<double> kDefaultCGrid{0.1, 1.0, 10.0, 100.0};
inline const std::vector<double> kDefaultGammaGrid{0.01, 0.1, 1.0, 10.0};

struct TrainedClassifier {
  ClassifierModel model;
  TrainReport report;
};

// Full training stage: stratified split, grid search CV on the training
// side, final fit on the whole training side, evaluation on the test side.
TrainedClassifier train_classifier(const std::vector<FeatureVector>& features,
                                   const std::vector<int>& labels,
                                   double split_ratio, int folds,
                                   std::uint64_t seed,
                                   const std::vector<double>& c_grid = kDefaultCGrid,
                                   const std::vector<double>& gamma_grid = kDefaultGammaGrid,
                                   const SmoOptions& opts = {});

}  // namespace rdopt
