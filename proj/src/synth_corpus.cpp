#include "rdopt/synth_corpus.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <string>

#include "rdopt/errors.hpp"
#include "rdopt/rng.hpp"

namespace rdopt {

namespace {

constexpr std::uint64_t kProjectionStream = 0x50726f6aULL;  // "Proj"
constexpr std::uint64_t kChunkStreamBase = 1000;

std::string chunk_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "c%06d", index);
  return buf;
}

}  // namespace

void validate(const SynthConfig& cfg) {
  if (cfg.n_chunks < 1) throw ValidationError("synth config needs n_chunks >= 1");
  if (cfg.k_true < 1) throw ValidationError("synth config needs k_true >= 1");
  validate(cfg.grid);
  if (static_cast<int>(cfg.archetypes.size()) != cfg.k_true)
    throw ValidationError("synth config needs one archetype per true cluster");
  if (cfg.mixture.size() != cfg.k_true)
    throw ValidationError("synth mixture length must equal k_true");
  if ((cfg.mixture.array() < 0.0).any() ||
      std::abs(cfg.mixture.sum() - 1.0) > 1e-9)
    throw ValidationError("synth mixture must be nonnegative and sum to 1");
  if (cfg.rd_noise_rel < 0.0 || cfg.feature_noise < 0.0)
    throw ValidationError("synth noise levels must be nonnegative");
  if (cfg.feature_dim < 1) throw ValidationError("synth feature_dim must be >= 1");
  for (const auto& p : cfg.archetypes)
    if (!(p.a > 0.0) || !(p.b > 0.0) || !(p.c > 0.0) || !(p.d > 0.0))
      throw ValidationError("archetype parameters must be positive");
}

SynthCorpus generate(const SynthConfig& cfg) {
  validate(cfg);
  const int s = cfg.grid.size();
  const int n = cfg.n_chunks;

  // corpus-wide random affine embedding of the chunk log-parameters
  auto proj_rng = make_rng(cfg.seed, kProjectionStream);
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat projection(cfg.feature_dim, 4);
  Vec offset(cfg.feature_dim);
  for (int r = 0; r < cfg.feature_dim; ++r) {
    for (int col = 0; col < 4; ++col) projection(r, col) = normal(proj_rng);
    offset[r] = normal(proj_rng);
  }

  Vec cumulative(cfg.k_true);
  double acc = 0.0;
  for (int l = 0; l < cfg.k_true; ++l) {
    acc += cfg.mixture[l];
    cumulative[l] = acc;
  }

  SynthCorpus corpus;
  corpus.dataset.grid = cfg.grid;
  corpus.dataset.samples.reserve(n);
  corpus.features.reserve(n);
  corpus.true_labels.reserve(n);

  for (int i = 0; i < n; ++i) {
    auto rng = make_rng(cfg.seed, kChunkStreamBase + static_cast<std::uint64_t>(i));
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    const double u = unif(rng);
    int label = cfg.k_true - 1;
    for (int l = 0; l < cfg.k_true; ++l)
      if (u <= cumulative[l]) {
        label = l;
        break;
      }

    // multiplicative log-normal jitter keeps b, c, d positive, so the
    // chunk's curves stay strictly monotone
    const auto& base = cfg.archetypes[label];
    const double a = base.a * std::exp(cfg.rd_noise_rel * normal(rng));
    const double b = base.b * std::exp(cfg.rd_noise_rel * normal(rng));
    const double c = base.c * std::exp(cfg.rd_noise_rel * normal(rng));
    const double d = base.d * std::exp(cfg.rd_noise_rel * normal(rng));

    RDSample sample;
    sample.chunk_id = chunk_name(i);
    sample.rates.resize(s);
    sample.qualities.resize(s);
    for (int j = 0; j < s; ++j) {
      const double q = cfg.grid.points[j];
      sample.rates[j] = c * std::exp(-d * q);
      sample.qualities[j] = a - b * q;
    }

    Eigen::Vector4d log_params(std::log(a), std::log(b), std::log(c), std::log(d));
    Vec values = projection * log_params + offset;
    for (int r = 0; r < cfg.feature_dim; ++r)
      values[r] += cfg.feature_noise * normal(rng);

    corpus.dataset.samples.push_back(std::move(sample));
    corpus.features.push_back({chunk_name(i), std::move(values)});
    corpus.true_labels.push_back(label);
  }
  validate(corpus.dataset);
  return corpus;
}

SynthConfig default_synth_config(int n_chunks, int k_true, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.n_chunks = n_chunks;
  cfg.k_true = k_true;
  cfg.seed = seed;
  cfg.grid.points = Vec::LinSpaced(13, 20.0, 44.0);

  // spread quality intercept/slope and rate scale/decay over distinct,
  // non-collinear combinations so archetypes separate in R-D space
  cfg.archetypes.reserve(k_true);
  for (int t = 0; t < k_true; ++t) {
    const double frac = k_true > 1 ? double(t) / double(k_true - 1) : 0.0;
    const double alt = k_true > 1
                           ? double((t * 2) % k_true + t / ((k_true + 1) / 2)) /
                                 double(k_true)
                           : 0.0;
    const double rev = 1.0 - frac;
    ArchetypeParams p;
    p.a = 32.0 + 18.0 * frac;
    p.b = 0.1 + 0.75 * alt;
    p.c = 2000.0 * std::pow(9.0, rev);
    p.d = 0.03 + 0.09 * alt * rev + 0.025 * frac;
    cfg.archetypes.push_back(p);
  }
  cfg.mixture = Vec::Constant(k_true, 1.0 / double(k_true));
  return cfg;
}

}  // namespace rdopt
