#include "rdopt/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <string>

#include "rdopt/errors.hpp"
#include "rdopt/rd_model.hpp"
#include "rdopt/rng.hpp"

namespace rdopt {

namespace {

// Class id -> member indices, classes in ascending id order.
std::map<int, std::vector<int>> group_by_class(const std::vector<int>& labels) {
  std::map<int, std::vector<int>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i)
    groups[labels[i]].push_back(static_cast<int>(i));
  return groups;
}

void validate_hyperparams(const SvmHyperparams& hp) {
  if (!(hp.c > 0.0) || !std::isfinite(hp.c))
    throw ValidationError("SVM regularization c must be positive and finite");
  if (!(hp.gamma > 0.0) || !std::isfinite(hp.gamma))
    throw ValidationError("SVM gamma must be positive and finite");
}

}  // namespace

void validate(const ClassifierModel& model) {
  validate(model.scaler);
  validate_hyperparams(model.svm.hyperparams);
  const auto& classes = model.svm.classes;
  if (classes.size() < 2)
    throw ValidationError("classifier needs at least 2 classes");
  if (!std::is_sorted(classes.begin(), classes.end()) ||
      std::adjacent_find(classes.begin(), classes.end()) != classes.end())
    throw ValidationError("classifier classes must be ascending and distinct");
  const std::size_t pairs = classes.size() * (classes.size() - 1) / 2;
  if (model.svm.machines.size() != pairs)
    throw ValidationError("classifier needs one binary machine per class pair");
  for (const auto& m : model.svm.machines) {
    if (m.support_vectors.rows() == 0)
      throw ValidationError("binary machine without support vectors");
    if (m.dual_coefs.size() != m.support_vectors.rows())
      throw ValidationError("binary machine dual/support size mismatch");
    if ((m.dual_coefs.array().abs() > model.svm.hyperparams.c * (1 + 1e-12)).any())
      throw ValidationError("binary machine dual coefficient exceeds C");
    if (m.support_vectors.cols() != model.scaler.size())
      throw ValidationError("binary machine feature dimension mismatch");
  }
}

std::pair<std::vector<int>, std::vector<int>> split_train_test(
    const std::vector<int>& labels, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0))
    throw ValidationError("split ratio must be in (0, 1)");
  if (labels.empty()) throw ValidationError("split: empty dataset");

  std::vector<int> train, test;
  for (auto& [cls, members] : group_by_class(labels)) {
    const int n = static_cast<int>(members.size());
    if (n < 2)
      throw ValidationError("class " + std::to_string(cls) +
                            " has a single sample; cannot split");
    auto rng = make_rng(seed, static_cast<std::uint64_t>(cls));
    std::shuffle(members.begin(), members.end(), rng);
    // keep both sides nonempty per class
    const int n_train = std::clamp(static_cast<int>(std::lround(ratio * n)), 1, n - 1);
    train.insert(train.end(), members.begin(), members.begin() + n_train);
    test.insert(test.end(), members.begin() + n_train, members.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {train, test};
}

std::vector<int> stratified_folds(const std::vector<int>& labels, int folds,
                                  std::uint64_t seed) {
  if (folds < 2) throw ValidationError("cross-validation needs folds >= 2");
  std::vector<int> assignment(labels.size(), -1);
  for (auto& [cls, members] : group_by_class(labels)) {
    if (static_cast<int>(members.size()) < folds)
      throw ValidationError("class " + std::to_string(cls) + " has " +
                            std::to_string(members.size()) +
                            " samples, fewer than " + std::to_string(folds) +
                            " folds");
    auto rng = make_rng(seed, 0x0f01d5ULL ^ static_cast<std::uint64_t>(cls));
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t i = 0; i < members.size(); ++i)
      assignment[members[i]] = static_cast<int>(i % folds);
  }
  return assignment;
}

double rbf_kernel(const Vec& a, const Vec& b, double gamma) {
  return std::exp(-gamma * (a - b).squaredNorm());
}

namespace {

// Platt-style SMO working state over a precomputed kernel matrix.
struct SmoState {
  const Mat& K;
  const std::vector<int>& y;
  double C;
  double tol;
  Vec alpha;
  Vec error;  // f(x_i) - y_i
  double b = 0.0;

  SmoState(const Mat& kernel, const std::vector<int>& labels, double c, double t)
      : K(kernel), y(labels), C(c), tol(t) {
    const auto m = K.rows();
    alpha = Vec::Zero(m);
    // with alpha = 0 and b = 0, f(x_i) = 0
    error = Vec(m);
    for (Eigen::Index i = 0; i < m; ++i) error[i] = -double(y[i]);
  }

  bool take_step(int i1, int i2) {
    if (i1 == i2) return false;
    const double a1_old = alpha[i1], a2_old = alpha[i2];
    const double y1 = y[i1], y2 = y[i2];
    const double e1 = error[i1], e2 = error[i2];
    const double s = y1 * y2;

    double lo, hi;
    if (y1 != y2) {
      lo = std::max(0.0, a2_old - a1_old);
      hi = std::min(C, C + a2_old - a1_old);
    } else {
      lo = std::max(0.0, a1_old + a2_old - C);
      hi = std::min(C, a1_old + a2_old);
    }
    if (lo >= hi) return false;

    const double k11 = K(i1, i1), k12 = K(i1, i2), k22 = K(i2, i2);
    const double eta = k11 + k22 - 2.0 * k12;
    double a2;
    if (eta > 0.0) {
      a2 = std::clamp(a2_old + y2 * (e1 - e2) / eta, lo, hi);
    } else {
      // degenerate curvature: evaluate the dual objective at both ends
      // (e - b is the kernel expansion minus the label)
      const double f1 = y1 * (e1 - b) - a1_old * k11 - s * a2_old * k12;
      const double f2 = y2 * (e2 - b) - s * a1_old * k12 - a2_old * k22;
      const double l1 = a1_old + s * (a2_old - lo);
      const double h1 = a1_old + s * (a2_old - hi);
      const double obj_lo =
          l1 * f1 + lo * f2 + 0.5 * l1 * l1 * k11 + 0.5 * lo * lo * k22 + s * lo * l1 * k12;
      const double obj_hi =
          h1 * f1 + hi * f2 + 0.5 * h1 * h1 * k11 + 0.5 * hi * hi * k22 + s * hi * h1 * k12;
      if (obj_lo < obj_hi - 1e-12)
        a2 = lo;
      else if (obj_lo > obj_hi + 1e-12)
        a2 = hi;
      else
        return false;
    }
    if (std::abs(a2 - a2_old) < 1e-12 * (a2 + a2_old + 1e-12)) return false;

    double a1 = a1_old + s * (a2_old - a2);
    // rounding guards; the pair constraint stays exact to fp
    if (a1 < 0.0) a1 = 0.0;
    if (a1 > C) a1 = C;

    const double d1 = y1 * (a1 - a1_old);
    const double d2 = y2 * (a2 - a2_old);
    const double b1 = b - e1 - d1 * k11 - d2 * k12;
    const double b2 = b - e2 - d1 * k12 - d2 * k22;
    double b_new;
    if (a1 > 0.0 && a1 < C)
      b_new = b1;
    else if (a2 > 0.0 && a2 < C)
      b_new = b2;
    else
      b_new = 0.5 * (b1 + b2);

    error += d1 * K.col(i1) + d2 * K.col(i2);
    error.array() += b_new - b;
    alpha[i1] = a1;
    alpha[i2] = a2;
    b = b_new;
    return true;
  }

  // Second-choice heuristic: max |E1 - E2| over non-bound points, then
  // sweeps over non-bound and over all points.
  bool examine(int i2) {
    const double y2 = y[i2];
    const double a2 = alpha[i2];
    const double r2 = error[i2] * y2;
    const bool violates = (r2 < -tol && a2 < C) || (r2 > tol && a2 > 0.0);
    if (!violates) return false;

    const auto m = static_cast<int>(alpha.size());
    int best = -1;
    double best_gap = -1.0;
    for (int j = 0; j < m; ++j) {
      if (alpha[j] > 0.0 && alpha[j] < C) {
        const double gap = std::abs(error[i2] - error[j]);
        if (gap > best_gap) {
          best_gap = gap;
          best = j;
        }
      }
    }
    if (best >= 0 && take_step(best, i2)) return true;
    for (int j = 0; j < m; ++j)
      if (alpha[j] > 0.0 && alpha[j] < C && take_step(j, i2)) return true;
    for (int j = 0; j < m; ++j)
      if (take_step(j, i2)) return true;
    return false;
  }
};

}  // namespace

BinarySvm train_binary_svm(const Mat& X, const std::vector<int>& y,
                           const SvmHyperparams& hp, const SmoOptions& opts) {
  validate_hyperparams(hp);
  const auto m = X.rows();
  if (static_cast<Eigen::Index>(y.size()) != m)
    throw ValidationError("binary SVM: labels/rows mismatch");
  bool has_pos = false, has_neg = false;
  for (const int yi : y) {
    if (yi == 1)
      has_pos = true;
    else if (yi == -1)
      has_neg = true;
    else
      throw ValidationError("binary SVM labels must be +1 or -1");
  }
  if (!has_pos || !has_neg)
    throw ValidationError("binary SVM needs both labels present");

  Mat K(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    K(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const double v = rbf_kernel(X.row(i).transpose(), X.row(j).transpose(), hp.gamma);
      K(i, j) = v;
      K(j, i) = v;
    }
  }

  SmoState state(K, y, hp.c, opts.kkt_tol);
  int passes = 0;
  bool examine_all = true;
  bool converged = false;
  while (passes < opts.max_passes) {
    int changed = 0;
    if (examine_all) {
      for (int i = 0; i < m; ++i) changed += state.examine(i) ? 1 : 0;
    } else {
      for (int i = 0; i < m; ++i)
        if (state.alpha[i] > 0.0 && state.alpha[i] < hp.c)
          changed += state.examine(i) ? 1 : 0;
    }
    ++passes;
    if (examine_all) {
      if (changed == 0) {
        converged = true;  // a full pass found no KKT violators
        break;
      }
      examine_all = false;
    } else if (changed == 0) {
      examine_all = true;
    }
  }

  BinarySvm machine;
  machine.converged = converged;
  machine.bias = state.b;
  std::vector<int> sv;
  for (int i = 0; i < m; ++i)
    if (state.alpha[i] > 0.0) sv.push_back(i);
  machine.support_vectors.resize(sv.size(), X.cols());
  machine.dual_coefs.resize(sv.size());
  for (std::size_t r = 0; r < sv.size(); ++r) {
    machine.support_vectors.row(r) = X.row(sv[r]);
    machine.dual_coefs[r] = state.alpha[sv[r]] * y[sv[r]];
  }
  return machine;
}

double decision_value(const BinarySvm& machine, const Vec& x, double gamma) {
  double sum = machine.bias;
  for (Eigen::Index r = 0; r < machine.support_vectors.rows(); ++r)
    sum += machine.dual_coefs[r] *
           rbf_kernel(machine.support_vectors.row(r).transpose(), x, gamma);
  return sum;
}

MulticlassSvm train_multiclass(const Mat& X, const std::vector<int>& labels,
                               const SvmHyperparams& hp, const SmoOptions& opts) {
  if (static_cast<Eigen::Index>(labels.size()) != X.rows())
    throw ValidationError("multiclass SVM: labels/rows mismatch");
  const auto groups = group_by_class(labels);
  if (groups.size() < 2)
    throw ValidationError("multiclass SVM needs at least 2 classes");

  MulticlassSvm svm;
  svm.hyperparams = hp;
  for (const auto& [cls, members] : groups) svm.classes.push_back(cls);

  // one machine per unordered pair; the smaller class id is the +1 side
  for (std::size_t a = 0; a < svm.classes.size(); ++a) {
    for (std::size_t b = a + 1; b < svm.classes.size(); ++b) {
      const auto& pos = groups.at(svm.classes[a]);
      const auto& neg = groups.at(svm.classes[b]);
      Mat Xp(pos.size() + neg.size(), X.cols());
      std::vector<int> yp(pos.size() + neg.size());
      Eigen::Index r = 0;
      for (const int i : pos) {
        Xp.row(r) = X.row(i);
        yp[r++] = 1;
      }
      for (const int i : neg) {
        Xp.row(r) = X.row(i);
        yp[r++] = -1;
      }
      svm.machines.push_back(train_binary_svm(Xp, yp, hp, opts));
    }
  }
  return svm;
}

int predict(const MulticlassSvm& svm, const Vec& x_scaled) {
  const auto nc = svm.classes.size();
  if (nc == 0) throw ValidationError("predict: untrained model");
  std::vector<int> votes(nc, 0);
  std::vector<double> strength(nc, 0.0);  // summed |decision| of won votes
  std::size_t pair = 0;
  for (std::size_t a = 0; a < nc; ++a) {
    for (std::size_t b = a + 1; b < nc; ++b, ++pair) {
      const double v =
          decision_value(svm.machines[pair], x_scaled, svm.hyperparams.gamma);
      const std::size_t winner = (v >= 0.0) ? a : b;
      ++votes[winner];
      strength[winner] += std::abs(v);
    }
  }
  std::size_t best = 0;
  for (std::size_t cand = 1; cand < nc; ++cand) {
    if (votes[cand] > votes[best] ||
        (votes[cand] == votes[best] && strength[cand] > strength[best]))
      best = cand;
  }
  return svm.classes[best];
}

int predict(const ClassifierModel& model, const Vec& x_raw) {
  if (x_raw.size() != model.scaler.size())
    throw ValidationError("predict: feature dimension " + std::to_string(x_raw.size()) +
                          " does not match model (" +
                          std::to_string(model.scaler.size()) + ")");
  return predict(model.svm, normalize(x_raw, model.scaler));
}

CvResult grid_search_cv(const Mat& X, const std::vector<int>& labels,
                        const std::vector<double>& c_grid,
                        const std::vector<double>& gamma_grid, int folds,
                        std::uint64_t seed, const SmoOptions& opts) {
  if (c_grid.empty() || gamma_grid.empty())
    throw ValidationError("grid search needs nonempty c and gamma grids");
  const std::vector<int> fold_of = stratified_folds(labels, folds, seed);

  CvResult result;
  double best_acc = -1.0;
  for (const double c : c_grid) {
    for (const double gamma : gamma_grid) {
      double acc_sum = 0.0;
      for (int f = 0; f < folds; ++f) {
        std::vector<int> tr, va;
        for (std::size_t i = 0; i < labels.size(); ++i)
          (fold_of[i] == f ? va : tr).push_back(static_cast<int>(i));
        Mat Xtr(tr.size(), X.cols());
        std::vector<int> ytr(tr.size());
        for (std::size_t i = 0; i < tr.size(); ++i) {
          Xtr.row(i) = X.row(tr[i]);
          ytr[i] = labels[tr[i]];
        }
        const MulticlassSvm svm = train_multiclass(Xtr, ytr, {c, gamma}, opts);
        int hits = 0;
        for (const int i : va)
          if (predict(svm, X.row(i).transpose()) == labels[i]) ++hits;
        acc_sum += double(hits) / double(va.size());
      }
      const double mean_acc = acc_sum / folds;
      result.grid.push_back({c, gamma, mean_acc});
      if (mean_acc > best_acc) {  // ties keep the earlier (smaller c, gamma) cell
        best_acc = mean_acc;
        result.best = {c, gamma};
      }
    }
  }
  return result;
}

Eigen::MatrixXi confusion_matrix(const std::vector<int>& classes,
                                 const std::vector<int>& y_true,
                                 const std::vector<int>& y_pred) {
  if (y_true.size() != y_pred.size())
    throw ValidationError("confusion matrix: prediction count mismatch");
  std::map<int, int> index;
  for (std::size_t i = 0; i < classes.size(); ++i)
    index[classes[i]] = static_cast<int>(i);
  Eigen::MatrixXi m = Eigen::MatrixXi::Zero(classes.size(), classes.size());
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const auto t = index.find(y_true[i]);
    const auto p = index.find(y_pred[i]);
    if (t == index.end() || p == index.end())
      throw ValidationError("confusion matrix: label outside class list");
    ++m(t->second, p->second);
  }
  return m;
}

std::pair<double, Eigen::MatrixXi> evaluate(
    const ClassifierModel& model, const std::vector<FeatureVector>& features,
    const std::vector<int>& y_true) {
  if (features.empty()) throw ValidationError("evaluate: empty test set");
  if (features.size() != y_true.size())
    throw ValidationError("evaluate: feature/label count mismatch");
  std::vector<int> y_pred(features.size());
  for (std::size_t i = 0; i < features.size(); ++i)
    y_pred[i] = predict(model, features[i].values);
  const Eigen::MatrixXi confusion =
      confusion_matrix(model.svm.classes, y_true, y_pred);
  const double accuracy = double(confusion.trace()) / double(confusion.sum());
  return {accuracy, confusion};
}

TrainedClassifier train_classifier(const std::vector<FeatureVector>& features,
                                   const std::vector<int>& labels,
                                   double split_ratio, int folds,
                                   std::uint64_t seed,
                                   const std::vector<double>& c_grid,
                                   const std::vector<double>& gamma_grid,
                                   const SmoOptions& opts) {
  if (features.size() != labels.size())
    throw ValidationError("train: feature/label count mismatch");
  if (features.empty()) throw ValidationError("train: empty dataset");
  const auto f = features.front().values.size();
  Mat X(features.size(), f);
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].values.size() != f)
      throw ValidationError("train: inconsistent feature dimension at chunk '" +
                            features[i].chunk_id + "'");
    X.row(i) = features[i].values;
  }

  const auto [train_idx, test_idx] = split_train_test(labels, split_ratio, seed);

  TrainedClassifier out;
  out.model.scaler = [&] {
    Mat Xtr(train_idx.size(), f);
    for (std::size_t i = 0; i < train_idx.size(); ++i)
      Xtr.row(i) = X.row(train_idx[i]);
    return fit_normalization(Xtr);
  }();

  Mat Xtr_scaled(train_idx.size(), f);
  std::vector<int> ytr(train_idx.size());
  for (std::size_t i = 0; i < train_idx.size(); ++i) {
    Xtr_scaled.row(i) = normalize(X.row(train_idx[i]).transpose(), out.model.scaler);
    ytr[i] = labels[train_idx[i]];
  }

  const CvResult cv =
      grid_search_cv(Xtr_scaled, ytr, c_grid, gamma_grid, folds, seed, opts);
  out.model.svm = train_multiclass(Xtr_scaled, ytr, cv.best, opts);
  validate(out.model);

  std::vector<FeatureVector> test_features;
  std::vector<int> yte;
  test_features.reserve(test_idx.size());
  for (const int i : test_idx) {
    test_features.push_back(features[i]);
    yte.push_back(labels[i]);
  }
  const auto [accuracy, confusion] = evaluate(out.model, test_features, yte);

  out.report.cv_grid = cv.grid;
  out.report.best = cv.best;
  out.report.test_accuracy = accuracy;
  out.report.confusion = confusion;
  out.report.classes = out.model.svm.classes;
  out.report.n_train = static_cast<int>(train_idx.size());
  out.report.n_test = static_cast<int>(test_idx.size());
  return out;
}

}  // namespace rdopt
