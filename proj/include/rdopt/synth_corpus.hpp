#pragma once

#include <cstdint>
#include <vector>

#include "rdopt/classifier.hpp"
#include "rdopt/types.hpp"

namespace rdopt {

// Parametric R-D archetype: quality(q) = a - b*q, rate(q) = c*exp(-d*q).
// With b, c, d > 0 both curves are strictly decreasing in q.
struct ArchetypeParams {
  double a = 40.0;  // quality intercept, dB
  double b = 0.5;   // quality slope, dB per CRF unit
  double c = 8000;  // rate scale, kbps
  double d = 0.08;  // rate decay, per CRF unit
};

struct SynthConfig {
  int n_chunks = 0;
  int k_true = 1;
  OperatingPointGrid grid;
  std::vector<ArchetypeParams> archetypes;  // k_true entries
  Vec mixture;                              // k_true probabilities, sums to 1
  double rd_noise_rel = 0.03;   // log-normal sigma on a, b, c, d per chunk
  int feature_dim = 22;
  double feature_noise = 0.1;   // additive Gaussian sigma on features
  std::uint64_t seed = 0;
};

void validate(const SynthConfig& cfg);

struct SynthCorpus {
  RDDataset dataset;
  std::vector<FeatureVector> features;
  std::vector<int> true_labels;
};

// Draws each chunk's archetype from the mixture, perturbs (a, b, c, d)
// multiplicatively (log-normal, sigma = rd_noise_rel) so curves stay
// monotone by construction, and embeds the perturbed log-parameters into
// feature_dim dimensions through a seeded random affine projection plus
// Gaussian noise. Per-chunk sub-seeds are derived by counter, so the
// corpus is deterministic given cfg.seed.
SynthCorpus generate(const SynthConfig& cfg);

// A ready-to-use config: 13 CRF grid points (20..44 step 2) and k_true
// archetypes spread over quality intercept/slope and rate scale/decay.
SynthConfig default_synth_config(int n_chunks, int k_true, std::uint64_t seed);

}  // namespace rdopt
