#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "rdopt/classifier.hpp"
#include "rdopt/errors.hpp"
#include "rdopt/rd_model.hpp"

using namespace rdopt;

namespace {

// Two 2-D Gaussian blobs, labels +1 / -1, separation `gap` along x.
std::pair<Mat, std::vector<int>> separable_blobs(int per_class, double gap,
                                                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.5);
  Mat X(2 * per_class, 2);
  std::vector<int> y(2 * per_class);
  for (int i = 0; i < per_class; ++i) {
    X(i, 0) = normal(rng) - gap / 2;
    X(i, 1) = normal(rng);
    y[i] = 1;
    X(per_class + i, 0) = normal(rng) + gap / 2;
    X(per_class + i, 1) = normal(rng);
    y[per_class + i] = -1;
  }
  return {X, y};
}

void check_dual_feasibility(const BinarySvm& m, double c) {
  double sum_alpha_y = 0.0;
  for (Eigen::Index r = 0; r < m.dual_coefs.size(); ++r) {
    CHECK(std::abs(m.dual_coefs[r]) <= c + 1e-9);
    CHECK(std::abs(m.dual_coefs[r]) > 0.0);
    sum_alpha_y += m.dual_coefs[r];
  }
  CHECK(std::abs(sum_alpha_y) < 1e-9);
}

}  // namespace

TEST_CASE("two points separate") {
  Mat X(2, 2);
  X << 0, 0, 1, 1;
  const std::vector<int> y{1, -1};
  const SvmHyperparams hp{10.0, 1.0};
  const auto m = train_binary_svm(X, y, hp);
  CHECK(decision_value(m, X.row(0).transpose(), hp.gamma) > 0.0);
  CHECK(decision_value(m, X.row(1).transpose(), hp.gamma) < 0.0);
}

TEST_CASE("linearly separable blobs reach 100% training accuracy") {
  const auto [X, y] = separable_blobs(40, 6.0, 2024);
  const SvmHyperparams hp{100.0, 0.5};
  const auto m = train_binary_svm(X, y, hp);
  CHECK(m.converged);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double f = decision_value(m, X.row(i).transpose(), hp.gamma);
    CHECK((f > 0) == (y[i] > 0));
  }
  check_dual_feasibility(m, hp.c);
}

TEST_CASE("RBF kernel separates the XOR pattern") {
  Mat X(4, 2);
  X << 0, 0, 1, 1, 0, 1, 1, 0;
  const std::vector<int> y{1, 1, -1, -1};
  const SvmHyperparams hp{10.0, 1.0};
  const auto m = train_binary_svm(X, y, hp);
  for (int i = 0; i < 4; ++i) {
    const double f = decision_value(m, X.row(i).transpose(), hp.gamma);
    CHECK((f > 0) == (y[i] > 0));
  }
}

TEST_CASE("dual feasibility and KKT margins hold after training") {
  const SmoOptions opts;
  std::mt19937_64 rng(5150);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const int m_count = 30;
    Mat X(m_count, 3);
    std::vector<int> y(m_count);
    for (int i = 0; i < m_count; ++i) {
      for (int j = 0; j < 3; ++j) X(i, j) = normal(rng);
      y[i] = (i % 2 == 0) ? 1 : -1;
      X(i, 0) += y[i] * 1.5;  // partially separable, keeps bound SVs around
    }
    const SvmHyperparams hp{5.0, 0.7};
    const auto machine = train_binary_svm(X, y, hp, opts);
    check_dual_feasibility(machine, hp.c);

    // margin condition: free support vectors sit on |f| = 1
    for (Eigen::Index r = 0; r < machine.dual_coefs.size(); ++r) {
      const double alpha = std::abs(machine.dual_coefs[r]);
      if (alpha > 1e-8 && alpha < hp.c - 1e-8) {
        const double f = decision_value(
            machine, machine.support_vectors.row(r).transpose(), hp.gamma);
        CHECK(std::abs(std::abs(f) - 1.0) <= 10 * opts.kkt_tol);
      }
    }
  }
}

TEST_CASE("single-class input is rejected") {
  Mat X(3, 2);
  X << 0, 0, 1, 1, 2, 2;
  CHECK_THROWS_AS(train_binary_svm(X, {1, 1, 1}, SvmHyperparams{1, 1}),
                  ValidationError);
}

TEST_CASE("stratified split") {
  SUBCASE("80/20 on 100 samples") {
    std::vector<int> labels(100);
    for (int i = 0; i < 100; ++i) labels[i] = i % 10;
    const auto [train, test] = split_train_test(labels, 0.8, 42);
    CHECK(train.size() == 80);
    CHECK(test.size() == 20);
    std::map<int, int> per_class;
    for (const int i : train) ++per_class[labels[i]];
    for (const auto& [cls, count] : per_class) CHECK(count == 8);
  }

  SUBCASE("two per class at ratio 0.5") {
    const std::vector<int> labels{0, 0, 1, 1};
    const auto [train, test] = split_train_test(labels, 0.5, 1);
    CHECK(train.size() == 2);
    CHECK(test.size() == 2);
  }

  SUBCASE("deterministic given the seed") {
    std::vector<int> labels(60);
    for (int i = 0; i < 60; ++i) labels[i] = i % 3;
    const auto a = split_train_test(labels, 0.7, 9);
    const auto b = split_train_test(labels, 0.7, 9);
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
  }

  SUBCASE("singleton class is an error") {
    CHECK_THROWS_AS(split_train_test({0, 0, 1}, 0.5, 1), ValidationError);
  }
}

TEST_CASE("stratified folds") {
  std::vector<int> labels(20);
  for (int i = 0; i < 20; ++i) labels[i] = i % 2;

  SUBCASE("per-class spread") {
    const auto folds = stratified_folds(labels, 5, 11);
    std::map<int, std::map<int, int>> count;  // fold -> class -> n
    for (std::size_t i = 0; i < labels.size(); ++i)
      ++count[folds[i]][labels[i]];
    for (int f = 0; f < 5; ++f) {
      CHECK(count[f][0] == 2);
      CHECK(count[f][1] == 2);
    }
  }

  SUBCASE("fold count bounded by class size") {
    CHECK_THROWS_AS(stratified_folds(labels, 11, 1), ValidationError);
  }

  SUBCASE("leave-one-out per class: every member lands in its own fold") {
    std::vector<int> wide(20);
    for (int i = 0; i < 20; ++i) wide[i] = i < 10 ? 0 : 1;
    const auto folds = stratified_folds(wide, 10, 11);
    std::map<int, std::map<int, int>> count;
    for (std::size_t i = 0; i < wide.size(); ++i) ++count[folds[i]][wide[i]];
    for (int f = 0; f < 10; ++f) {
      CHECK(count[f][0] == 1);
      CHECK(count[f][1] == 1);
    }
  }
}

TEST_CASE("multiclass predict") {
  // three separated blobs in 2-D
  std::mt19937_64 rng(31);
  std::normal_distribution<double> normal(0.0, 0.4);
  const double cx[3] = {0.0, 6.0, 0.0};
  const double cy[3] = {0.0, 0.0, 6.0};
  Mat X(90, 2);
  std::vector<int> labels(90);
  for (int i = 0; i < 90; ++i) {
    const int cls = i / 30;
    X(i, 0) = cx[cls] + normal(rng);
    X(i, 1) = cy[cls] + normal(rng);
    labels[i] = cls;
  }
  const SvmHyperparams hp{10.0, 0.5};
  const auto svm = train_multiclass(X, labels, hp);

  SUBCASE("training points deep inside a class predict it") {
    int hits = 0;
    for (int i = 0; i < 90; ++i)
      if (predict(svm, X.row(i).transpose()) == labels[i]) ++hits;
    CHECK(hits == 90);
  }

  SUBCASE("prediction is pure") {
    Vec probe(2);
    probe << 3.0, 3.0;
    CHECK(predict(svm, probe) == predict(svm, probe));
  }

  SUBCASE("k = 2 equals the sign of a single machine") {
    std::vector<int> two_labels(60);
    Mat X2(60, 2);
    for (int i = 0; i < 60; ++i) {
      X2.row(i) = X.row(i);
      two_labels[i] = i < 30 ? 0 : 1;
    }
    const auto pair_svm = train_multiclass(X2, two_labels, hp);
    REQUIRE(pair_svm.machines.size() == 1);
    std::mt19937_64 probe_rng(8);
    std::uniform_real_distribution<double> unif(-2.0, 8.0);
    for (int t = 0; t < 50; ++t) {
      Vec probe(2);
      probe << unif(probe_rng), unif(probe_rng);
      const double f = decision_value(pair_svm.machines[0], probe, hp.gamma);
      CHECK(predict(pair_svm, probe) == (f >= 0 ? 0 : 1));
    }
  }

  SUBCASE("duplicating a non-support training point changes nothing") {
    int plain = -1;
    for (int i = 0; i < 90 && plain < 0; ++i) {
      bool is_sv = false;
      for (const auto& m : svm.machines)
        for (Eigen::Index r = 0; r < m.support_vectors.rows(); ++r)
          if (m.support_vectors.row(r) == X.row(i)) is_sv = true;
      if (!is_sv) plain = i;
    }
    REQUIRE(plain >= 0);

    Mat X_dup(91, 2);
    X_dup.topRows(90) = X;
    X_dup.row(90) = X.row(plain);
    std::vector<int> labels_dup = labels;
    labels_dup.push_back(labels[plain]);
    const auto svm_dup = train_multiclass(X_dup, labels_dup, hp);

    std::mt19937_64 probe_rng(77);
    std::uniform_real_distribution<double> unif(-2.0, 8.0);
    for (int t = 0; t < 40; ++t) {
      Vec probe(2);
      probe << unif(probe_rng), unif(probe_rng);
      CHECK(predict(svm, probe) == predict(svm_dup, probe));
    }
  }
}

TEST_CASE("grid search CV") {
  const auto [X, y01] = separable_blobs(15, 8.0, 99);
  std::vector<int> labels(y01.size());
  for (std::size_t i = 0; i < y01.size(); ++i) labels[i] = y01[i] > 0 ? 0 : 1;

  SUBCASE("separable data reaches CV accuracy 1.0") {
    const auto cv = grid_search_cv(X, labels, {1.0, 10.0}, {0.1, 1.0}, 5, 3);
    double best = 0.0;
    for (const auto& cell : cv.grid) best = std::max(best, cell.mean_cv_accuracy);
    CHECK(best == 1.0);
    CHECK(cv.grid.size() == 4);
  }

  SUBCASE("deterministic given the seed") {
    const auto a = grid_search_cv(X, labels, {1.0, 10.0}, {0.1, 1.0}, 5, 3);
    const auto b = grid_search_cv(X, labels, {1.0, 10.0}, {0.1, 1.0}, 5, 3);
    CHECK(a.best.c == b.best.c);
    CHECK(a.best.gamma == b.best.gamma);
    for (std::size_t i = 0; i < a.grid.size(); ++i)
      CHECK(a.grid[i].mean_cv_accuracy == b.grid[i].mean_cv_accuracy);
  }

  SUBCASE("ties prefer smaller c then smaller gamma") {
    const auto cv = grid_search_cv(X, labels, {0.5, 1.0, 10.0}, {0.1, 1.0}, 5, 3);
    double best = 0.0;
    for (const auto& cell : cv.grid) best = std::max(best, cell.mean_cv_accuracy);
    for (const auto& cell : cv.grid) {
      if (cell.mean_cv_accuracy == best) {
        CHECK(cv.best.c == cell.c);
        CHECK(cv.best.gamma == cell.gamma);
        break;
      }
    }
  }
}

TEST_CASE("evaluation accuracy and confusion") {
  SUBCASE("chance level for a constant predictor") {
    const std::vector<int> classes{0, 1, 2, 3};
    std::vector<int> y_true, y_pred;
    for (int cls = 0; cls < 4; ++cls)
      for (int i = 0; i < 5; ++i) {
        y_true.push_back(cls);
        y_pred.push_back(2);
      }
    const auto confusion = confusion_matrix(classes, y_true, y_pred);
    CHECK(double(confusion.trace()) / confusion.sum() == doctest::Approx(0.25));
    for (int r = 0; r < 4; ++r) CHECK(confusion.row(r).sum() == 5);
  }

  SUBCASE("perfect predictions give a diagonal matrix") {
    const std::vector<int> classes{0, 1};
    const std::vector<int> y{0, 1, 0, 1, 1};
    const auto confusion = confusion_matrix(classes, y, y);
    CHECK(confusion(0, 1) == 0);
    CHECK(confusion(1, 0) == 0);
    CHECK(double(confusion.trace()) / confusion.sum() == 1.0);
  }
}

TEST_CASE("full training pipeline on separable data") {
  // three well-separated classes in 4-D, constant shifts
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal(0.0, 0.3);
  std::vector<FeatureVector> features;
  std::vector<int> labels;
  for (int cls = 0; cls < 3; ++cls) {
    for (int i = 0; i < 25; ++i) {
      Vec v(4);
      for (int j = 0; j < 4; ++j) v[j] = (j == cls ? 5.0 : 0.0) + normal(rng);
      features.push_back({"chunk" + std::to_string(cls * 25 + i), v});
      labels.push_back(cls);
    }
  }
  const auto trained =
      train_classifier(features, labels, 0.8, 5, 7, {1.0, 10.0}, {0.1, 1.0});
  CHECK(trained.report.test_accuracy == 1.0);
  CHECK(trained.report.n_train == 60);
  CHECK(trained.report.n_test == 15);
  CHECK(trained.report.confusion.rows() == 3);
  // row sums equal per-class test counts
  for (int r = 0; r < 3; ++r) CHECK(trained.report.confusion.row(r).sum() == 5);

  SUBCASE("scaler is internal: raw prediction equals scale-then-predict") {
    for (int t = 0; t < 10; ++t) {
      const auto& fv = features[t * 7];
      const int via_model = predict(trained.model, fv.values);
      const int via_svm = predict(trained.model.svm,
                                  normalize(fv.values, trained.model.scaler));
      CHECK(via_model == via_svm);
    }
  }

  SUBCASE("dimension mismatch is rejected") {
    CHECK_THROWS_AS(predict(trained.model, Vec::Zero(3)), ValidationError);
  }

  SUBCASE("empty test set is rejected") {
    CHECK_THROWS_AS(evaluate(trained.model, {}, {}), ValidationError);
  }
}
