#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "rdopt/classifier.hpp"
#include "rdopt/clustering.hpp"
#include "rdopt/errors.hpp"
#include "rdopt/rd_model.hpp"
#include "rdopt/synth_corpus.hpp"

using namespace rdopt;

TEST_CASE("noiseless corpus reproduces the archetypes exactly") {
  SynthConfig cfg = default_synth_config(200, 4, 11);
  cfg.rd_noise_rel = 0.0;
  cfg.feature_noise = 0.0;
  const auto corpus = generate(cfg);

  for (int i = 0; i < 200; ++i) {
    const auto& arch = cfg.archetypes[corpus.true_labels[i]];
    const auto& s = corpus.dataset.samples[i];
    for (int j = 0; j < cfg.grid.size(); ++j) {
      const double q = cfg.grid.points[j];
      CHECK(s.rates[j] == arch.c * std::exp(-arch.d * q));
      CHECK(s.qualities[j] == arch.a - arch.b * q);
    }
  }

  SUBCASE("k-means recovers the generating labels") {
    const Mat X = to_rd_matrix(corpus.dataset);
    const Mat Xn = normalize_rows(X, fit_normalization(X));
    KMeansConfig kc;
    kc.k = 4;
    kc.seed = 5;
    const auto result = kmeans_fit(Xn, kc);
    CHECK(result.assignment.inertia == doctest::Approx(0.0).epsilon(1e-9));
    // same generating label <=> same cluster label
    for (int i = 1; i < 200; ++i)
      for (int j = 0; j < i; ++j)
        CHECK((corpus.true_labels[i] == corpus.true_labels[j]) ==
              (result.assignment.labels[i] == result.assignment.labels[j]));
  }

  SUBCASE("classifier separates the noiseless features perfectly") {
    const auto trained = train_classifier(corpus.features, corpus.true_labels,
                                          0.8, 5, 21, {10.0}, {0.1});
    CHECK(trained.report.test_accuracy == 1.0);
  }
}

TEST_CASE("same seed, same corpus") {
  const SynthConfig cfg = default_synth_config(60, 5, 909);
  const auto a = generate(cfg);
  const auto b = generate(cfg);
  CHECK(a.true_labels == b.true_labels);
  for (int i = 0; i < 60; ++i) {
    CHECK(a.dataset.samples[i].chunk_id == b.dataset.samples[i].chunk_id);
    CHECK(a.dataset.samples[i].rates == b.dataset.samples[i].rates);
    CHECK(a.dataset.samples[i].qualities == b.dataset.samples[i].qualities);
    CHECK(a.features[i].values == b.features[i].values);
  }

  SynthConfig other = cfg;
  other.seed = 910;
  const auto c = generate(other);
  bool any_diff = false;
  for (int i = 0; i < 60 && !any_diff; ++i)
    any_diff = a.dataset.samples[i].rates != c.dataset.samples[i].rates;
  CHECK(any_diff);
}

TEST_CASE("generated samples always pass ingestion validation") {
  for (const std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL}) {
    SynthConfig cfg = default_synth_config(100, 6, seed);
    cfg.rd_noise_rel = 0.08;  // well above default, still monotone
    const auto corpus = generate(cfg);
    CHECK_NOTHROW(validate(corpus.dataset));
    for (const auto& s : corpus.dataset.samples) {
      for (int j = 0; j + 1 < cfg.grid.size(); ++j) {
        CHECK(s.rates[j] > s.rates[j + 1]);
        CHECK(s.qualities[j] > s.qualities[j + 1]);
      }
    }
  }
}

TEST_CASE("empirical mixture matches within 3 sigma") {
  SynthConfig cfg = default_synth_config(4000, 3, 77);
  Vec mixture(3);
  mixture << 0.6, 0.3, 0.1;
  cfg.mixture = mixture;
  cfg.archetypes.resize(3);
  const auto corpus = generate(cfg);
  Vec counts = Vec::Zero(3);
  for (const int l : corpus.true_labels) counts[l] += 1.0;
  for (int l = 0; l < 3; ++l) {
    const double sigma = std::sqrt(4000 * mixture[l] * (1 - mixture[l]));
    CHECK(std::abs(counts[l] - 4000 * mixture[l]) <= 3 * sigma);
  }
}

TEST_CASE("config validation") {
  SynthConfig cfg = default_synth_config(10, 2, 1);

  SUBCASE("mixture must sum to one") {
    cfg.mixture[0] = 0.9;
    CHECK_THROWS_AS(generate(cfg), ValidationError);
  }

  SUBCASE("archetype count must match k_true") {
    cfg.archetypes.pop_back();
    CHECK_THROWS_AS(generate(cfg), ValidationError);
  }

  SUBCASE("negative noise is rejected") {
    cfg.rd_noise_rel = -0.1;
    CHECK_THROWS_AS(generate(cfg), ValidationError);
  }

  SUBCASE("default archetypes are distinct") {
    const SynthConfig big = default_synth_config(10, 10, 1);
    std::set<std::pair<double, double>> seen;
    for (const auto& p : big.archetypes) {
      CHECK(seen.insert({p.a, p.c}).second);
      CHECK(p.b > 0);
      CHECK(p.d > 0);
    }
  }
}

TEST_CASE("feature dimension and chunk ids") {
  SynthConfig cfg = default_synth_config(25, 2, 5);
  cfg.feature_dim = 7;
  const auto corpus = generate(cfg);
  CHECK(corpus.features.size() == 25);
  for (const auto& f : corpus.features) CHECK(f.values.size() == 7);
  CHECK(corpus.features[0].chunk_id == "c000000");
  CHECK(corpus.features[24].chunk_id == "c000024");
  CHECK(corpus.dataset.samples[13].chunk_id == corpus.features[13].chunk_id);
}
