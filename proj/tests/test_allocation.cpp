#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "rdopt/allocation.hpp"
#include "rdopt/errors.hpp"
#include "rdopt/rd_model.hpp"

using namespace rdopt;

namespace {

Vec make_vec(std::initializer_list<double> values) {
  Vec v(values.size());
  Eigen::Index i = 0;
  for (const double x : values) v[i++] = x;
  return v;
}

// ClusterModel straight from curves; identity normalization keeps the
// model valid without caring about stats here.
ClusterModel model_from_curves(const Vec& grid_points,
                               std::vector<CentroidCurve> curves) {
  ClusterModel model;
  model.grid.points = grid_points;
  model.k = static_cast<int>(curves.size());
  model.centroids = std::move(curves);
  model.stats.means = Vec::Zero(2 * grid_points.size());
  model.stats.stds = Vec::Ones(2 * grid_points.size());
  return model;
}

// Random monotone exponential-rate / linear-quality instance.
ClusterModel random_model(int k, int s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ua(32.0, 48.0);
  std::uniform_real_distribution<double> ub(0.15, 0.9);
  std::uniform_real_distribution<double> uc(1500.0, 16000.0);
  std::uniform_real_distribution<double> ud(0.03, 0.12);
  const Vec grid = Vec::LinSpaced(s, 20.0, 20.0 + 4.0 * (s - 1));
  std::vector<CentroidCurve> curves;
  for (int l = 0; l < k; ++l) {
    const double a = ua(rng), b = ub(rng), c = uc(rng), d = ud(rng);
    CentroidCurve curve;
    curve.cluster_id = l;
    curve.rates.resize(s);
    curve.qualities.resize(s);
    for (int j = 0; j < s; ++j) {
      curve.rates[j] = c * std::exp(-d * grid[j]);
      curve.qualities[j] = a - b * grid[j];
    }
    curves.push_back(std::move(curve));
  }
  return model_from_curves(grid, std::move(curves));
}

CorpusDistribution random_weights(int k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.2, 1.0);
  Vec w(k);
  for (int l = 0; l < k; ++l) w[l] = unif(rng);
  w /= w.sum();
  return {w};
}

void check_constraints(const AllocationSolution& sol, const QualityConstraints& c) {
  CHECK(sol.avg_quality >= c.min_avg_quality - 1e-9);
  CHECK(sol.worst_quality >= c.min_worst_quality - 1e-9);
}

}  // namespace

TEST_CASE("weight estimation") {
  SUBCASE("direct counting") {
    const auto w = estimate_weights({0, 0, 1, 1}, 2);
    CHECK(w.weights[0] == 0.5);
    CHECK(w.weights[1] == 0.5);
  }

  SUBCASE("degenerate mass") {
    const auto w = estimate_weights({3, 3, 3}, 5);
    CHECK(w.weights[3] == 1.0);
    CHECK(w.weights.sum() == 1.0);
    CHECK(w.weights[0] == 0.0);
  }

  SUBCASE("multinomial sample lands within 3 sigma") {
    const Vec p = make_vec({0.5, 0.3, 0.2});
    std::mt19937_64 rng(404);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<int> draws;
    for (int i = 0; i < 10000; ++i) {
      const double u = unif(rng);
      draws.push_back(u < p[0] ? 0 : (u < p[0] + p[1] ? 1 : 2));
    }
    const auto w = estimate_weights(draws, 3);
    for (int l = 0; l < 3; ++l) {
      const double sigma = std::sqrt(p[l] * (1 - p[l]) / 10000.0);
      CHECK(std::abs(w.weights[l] - p[l]) <= 3 * sigma);
    }
  }

  SUBCASE("duplicated predictions leave weights unchanged") {
    std::vector<int> preds{0, 1, 1, 2, 2, 2};
    std::vector<int> doubled = preds;
    doubled.insert(doubled.end(), preds.begin(), preds.end());
    CHECK(estimate_weights(preds, 3).weights ==
          estimate_weights(doubled, 3).weights);
  }

  SUBCASE("errors") {
    CHECK_THROWS_AS(estimate_weights({}, 2), ValidationError);
    CHECK_THROWS_AS(estimate_weights({5}, 2), ValidationError);
  }
}

TEST_CASE("single cluster picks the cheapest feasible point") {
  const auto model = model_from_curves(
      make_vec({20, 24, 28, 32}),
      {{0, make_vec({900, 700, 500, 300}), make_vec({42, 39, 36, 33})}});
  const CorpusDistribution w{make_vec({1.0})};

  const auto sol = solve_allocation(model, w, {37.0, 37.0});
  CHECK(sol.op_index == std::vector<int>{1});  // quality 39 is the cheapest >= 37
  CHECK(sol.avg_rate == 700.0);
  CHECK(sol.lambda_star == 0.0);

  const auto oracle = exhaustive_allocation(model, w, {37.0, 37.0});
  CHECK(oracle.op_index == sol.op_index);
  CHECK(oracle.exact);
  CHECK_FALSE(sol.exact);
}

TEST_CASE("slack constraints take every cluster to its cheapest point") {
  std::mt19937_64 rng(8);
  const auto model = random_model(4, 6, rng);
  const auto w = random_weights(4, rng);
  const auto sol = solve_allocation(model, w, {-1e3, -1e3});
  CHECK(sol.lambda_star == 0.0);
  for (int l = 0; l < 4; ++l) CHECK(sol.op_index[l] == 5);  // highest CRF
}

TEST_CASE("hand-enumerated 2x2 instance") {
  // grid {20, 30}; cluster 0: rates 1000/400, quality 40/30
  //                cluster 1: rates  800/500, quality 38/34
  const auto model = model_from_curves(
      make_vec({20, 30}), {{0, make_vec({1000, 400}), make_vec({40, 30})},
                           {1, make_vec({800, 500}), make_vec({38, 34})}});
  const CorpusDistribution w{make_vec({0.5, 0.5})};

  // need avg >= 35, worst >= 30; candidates (avg rate, avg q, worst q):
  //  (0,0): 900, 39, 38   (0,1): 750, 37, 34   (1,0): 600, 34, 30  (1,1): 450, 32, 30
  const QualityConstraints c{35.0, 30.0};
  const auto oracle = exhaustive_allocation(model, w, c);
  CHECK(oracle.op_index == std::vector<int>{0, 1});
  CHECK(oracle.avg_rate == doctest::Approx(750.0));
  check_constraints(oracle, c);

  const auto sol = solve_allocation(model, w, c);
  check_constraints(sol, c);
  CHECK(sol.avg_rate >= oracle.avg_rate);
  CHECK(sol.avg_rate <= oracle.avg_rate * 1.005);
}

TEST_CASE("infeasible constraints name the binding threshold") {
  const auto model = model_from_curves(
      make_vec({20, 30}), {{0, make_vec({1000, 400}), make_vec({40, 30})}});
  const CorpusDistribution w{make_vec({1.0})};

  SUBCASE("worst-quality floor unreachable") {
    try {
      solve_allocation(model, w, {10.0, 45.0});
      FAIL("expected InfeasibleError");
    } catch (const InfeasibleError& e) {
      CHECK(e.constraint() == "min_worst_quality");
    }
  }

  SUBCASE("average floor unreachable") {
    try {
      solve_allocation(model, w, {41.0, 25.0});
      FAIL("expected InfeasibleError");
    } catch (const InfeasibleError& e) {
      CHECK(e.constraint() == "min_avg_quality");
    }
  }

  SUBCASE("exhaustive shares the error taxonomy") {
    try {
      exhaustive_allocation(model, w, {10.0, 45.0});
      FAIL("expected InfeasibleError");
    } catch (const InfeasibleError& e) {
      CHECK(e.constraint() == "min_worst_quality");
    }
  }
}

TEST_CASE("random instances: solver within 0.5% of the oracle") {
  std::mt19937_64 rng(20260810);
  for (int trial = 0; trial < 60; ++trial) {
    const int k = 2 + static_cast<int>(rng() % 3);  // 2..4
    const int s = 4 + static_cast<int>(rng() % 3);  // 4..6
    const auto model = random_model(k, s, rng);
    const auto w = random_weights(k, rng);

    // constraints anchored at an achievable uniform point with slack drawn
    // around it, so most instances are feasible and none trivially so
    const Mat quals = centroid_quality_matrix(model);
    const int anchor = static_cast<int>(rng() % s);
    std::uniform_real_distribution<double> jitter(-0.5, 0.5);
    const QualityConstraints c{
        w.weights.dot(quals.col(anchor)) + jitter(rng),
        quals.col(anchor).minCoeff() + jitter(rng) - 0.5};

    AllocationSolution sol, oracle;
    try {
      oracle = exhaustive_allocation(model, w, c);
    } catch (const InfeasibleError&) {
      CHECK_THROWS_AS(solve_allocation(model, w, c), InfeasibleError);
      continue;
    }
    sol = solve_allocation(model, w, c);
    check_constraints(sol, c);
    check_constraints(oracle, c);
    CHECK(sol.avg_rate >= oracle.avg_rate - 1e-9);
    CHECK(sol.avg_rate <= oracle.avg_rate * 1.005);
  }
}

TEST_CASE("relaxing a floor never raises the returned rate") {
  std::mt19937_64 rng(55);
  const auto model = random_model(3, 6, rng);
  const auto w = random_weights(3, rng);
  const Mat quals = centroid_quality_matrix(model);
  const double top = w.weights.dot(quals.col(0));
  const double bottom = w.weights.dot(quals.col(5));

  double prev_rate = -1.0;
  for (int step = 10; step >= 0; --step) {
    const double avg_floor = bottom + (top - bottom) * step / 10.0;
    const QualityConstraints c{avg_floor, quals.col(5).minCoeff() - 1.0};
    const auto sol = solve_allocation(model, w, c);
    if (prev_rate >= 0.0) CHECK(sol.avg_rate <= prev_rate + 1e-9);
    prev_rate = sol.avg_rate;
  }
}

TEST_CASE("lambda = 0 solutions equal the cheapest-feasible assignment") {
  std::mt19937_64 rng(92);
  for (int trial = 0; trial < 20; ++trial) {
    const auto model = random_model(3, 5, rng);
    const auto w = random_weights(3, rng);
    const Mat quals = centroid_quality_matrix(model);
    const QualityConstraints c{quals.col(4).minCoeff() - 5.0,
                               quals.col(4).minCoeff() - 1.0};
    const auto sol = solve_allocation(model, w, c);
    if (sol.lambda_star == 0.0) {
      // cheapest feasible per cluster, computed independently
      for (int l = 0; l < 3; ++l) {
        int best = -1;
        for (int j = 0; j < 5; ++j) {
          if (model.centroids[l].qualities[j] < c.min_worst_quality - 1e-9)
            continue;
          if (best < 0 ||
              model.centroids[l].rates[j] < model.centroids[l].rates[best])
            best = j;
        }
        CHECK(sol.op_index[l] == best);
      }
    }
  }
}

TEST_CASE("per-chunk allocation") {
  const Vec grid = make_vec({20, 24, 28, 32});

  SUBCASE("single chunk gets its cheapest feasible point") {
    RDDataset data;
    data.grid.points = grid;
    data.samples.push_back(
        {"only", make_vec({900, 700, 500, 300}), make_vec({42, 39, 36, 33})});
    const auto sol = per_chunk_allocation(data, {36.0, 36.0});
    CHECK(sol.op_index == std::vector<int>{2});
    CHECK(sol.avg_rate == 500.0);
  }

  SUBCASE("identical chunks share one operating point") {
    RDDataset data;
    data.grid.points = grid;
    for (int i = 0; i < 5; ++i)
      data.samples.push_back({"c" + std::to_string(i),
                              make_vec({900, 700, 500, 300}),
                              make_vec({42, 39, 36, 33})});
    const auto sol = per_chunk_allocation(data, {36.0, 33.0});
    for (int i = 1; i < 5; ++i) CHECK(sol.op_index[i] == sol.op_index[0]);
    CHECK(sol.avg_rate == 500.0);
    CHECK(sol.avg_quality == 36.0);
  }

  SUBCASE("n = 5, s = 4 matches brute force over 1024 combinations") {
    std::mt19937_64 rng(7070);
    const auto chunk_model = random_model(5, 4, rng);
    RDDataset data;
    data.grid.points = chunk_model.grid.points;
    for (int l = 0; l < 5; ++l)
      data.samples.push_back({"c" + std::to_string(l),
                              chunk_model.centroids[l].rates,
                              chunk_model.centroids[l].qualities});
    const Mat quals = centroid_quality_matrix(chunk_model);
    const CorpusDistribution uniform{Vec::Constant(5, 0.2)};
    const QualityConstraints c{uniform.weights.dot(quals.col(1)),
                               quals.col(1).minCoeff()};

    const auto direct = per_chunk_allocation(data, c);
    const auto oracle = exhaustive_allocation(chunk_model, uniform, c);
    check_constraints(direct, c);
    CHECK(direct.avg_rate >= oracle.avg_rate - 1e-9);
    CHECK(direct.avg_rate <= oracle.avg_rate * 1.005);
  }
}

TEST_CASE("zero-weight clusters still bind the worst-quality floor") {
  // cluster 1 carries no corpus mass but its quality still counts for the
  // max-distortion constraint
  const auto model = model_from_curves(
      make_vec({20, 30}), {{0, make_vec({1000, 400}), make_vec({40, 34})},
                           {1, make_vec({800, 500}), make_vec({30, 25})}});
  const CorpusDistribution w{make_vec({1.0, 0.0})};

  const auto sol = solve_allocation(model, w, {34.0, 28.0});
  CHECK(sol.avg_rate == 400.0);  // cluster 0 alone carries the averages
  CHECK(sol.avg_quality == 34.0);
  CHECK(sol.worst_quality <= 30.0);  // reported over all clusters
  CHECK(sol.worst_quality >= 28.0 - 1e-9);

  // the weightless cluster can still make the instance infeasible
  try {
    solve_allocation(model, w, {34.0, 32.0});
    FAIL("expected InfeasibleError");
  } catch (const InfeasibleError& e) {
    CHECK(e.constraint() == "min_worst_quality");
  }
}

TEST_CASE("exhaustive guard rejects huge instances") {
  std::mt19937_64 rng(3);
  const auto model = random_model(10, 8, rng);  // 8^10 > 1e7
  const CorpusDistribution w{Vec::Constant(10, 0.1)};
  CHECK_THROWS_AS(exhaustive_allocation(model, w, {0.0, 0.0}), ValidationError);
}
