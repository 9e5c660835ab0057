#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "pmv/rng.hpp"
#include "pmv/types.hpp"

namespace pmv {

struct IdentityGroup {
  std::uint64_t id = 0;
  Matrix features;  // one sample per row
};

// Identity-grouped feature collection; immutable after construction.
struct IdentityDataset {
  std::vector<IdentityGroup> groups;
  Index dim = 0;

  void validate() const;
  Index identity_count() const { return static_cast<Index>(groups.size()); }
  Index total_samples() const;
};

struct VerificationPair {
  Vector a;
  Vector b;
  bool same = false;
};

struct PairBatch {
  std::vector<VerificationPair> pairs;

  Index size() const { return static_cast<Index>(pairs.size()); }
  Index count_same() const;
};

enum class DistanceMetric { kEuclidean, kCosineDistance };

struct MiningConfig {
  double tau_neg = 1.0;  // keep a negative pair iff distance < tau_neg
  double tau_pos = 1.0;  // keep a positive pair iff distance > tau_pos
  DistanceMetric metric = DistanceMetric::kEuclidean;

  void validate() const;
};

// Exactly batch_size/2 same-identity pairs (distinct identities, distinct
// sample indices) and batch_size/2 different-identity pairs, shuffled.
PairBatch sample_balanced_batch(const IdentityDataset& ds, Index batch_size, RngStream& rng);

double pair_distance(const Vector& a, const Vector& b, DistanceMetric metric);

// Hard-pair mining: close negatives and far positives survive, order preserved.
PairBatch filter_hard(const PairBatch& batch, const MiningConfig& cfg);

// Spherical Gaussian identity centers with sigma-scaled Gaussian spread.
IdentityDataset synth_identities(Index num_ids, Index per_id, Index dim, double sigma,
                                 RngStream& rng);

// Concatenation [f_orig | f_flip] of a feature and its flipped-input feature.
Vector combine_flipped(const Vector& f_orig, const Vector& f_flip);

// Per identity, the last eval_per_id samples form the second dataset.
std::pair<IdentityDataset, IdentityDataset> split_identity_dataset(const IdentityDataset& ds,
                                                                   Index eval_per_id);

// Median distance over randomly drawn sample pairs; the data-dependent
// default for the mining thresholds.
double median_pair_distance(const IdentityDataset& ds, DistanceMetric metric, Index sample_pairs,
                            RngStream& rng);

}  // namespace pmv
