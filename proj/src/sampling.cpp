#include "pmv/sampling.hpp"

#include <algorithm>
#include <cmath>

namespace pmv {

void IdentityDataset::validate() const {
  if (groups.size() < 2) {
    throw DatasetError("dataset: need at least 2 identities, have " +
                       std::to_string(groups.size()));
  }
  for (const auto& g : groups) {
    if (g.features.rows() < 1) {
      throw DatasetError("dataset: identity " + std::to_string(g.id) + " has no samples");
    }
    if (g.features.cols() != dim) {
      throw DimensionError("dataset: identity " + std::to_string(g.id) + " has width " +
                           std::to_string(g.features.cols()) + ", expected " +
                           std::to_string(dim));
    }
  }
}

Index IdentityDataset::total_samples() const {
  Index n = 0;
  for (const auto& g : groups) n += g.features.rows();
  return n;
}

Index PairBatch::count_same() const {
  return static_cast<Index>(std::count_if(pairs.begin(), pairs.end(),
                                          [](const VerificationPair& p) { return p.same; }));
}

void MiningConfig::validate() const {
  if (!(tau_neg > 0.0)) throw ConfigError("mining: tau_neg must be > 0");
  if (!(tau_pos > 0.0)) throw ConfigError("mining: tau_pos must be > 0");
}

PairBatch sample_balanced_batch(const IdentityDataset& ds, Index batch_size, RngStream& rng) {
  if (batch_size < 2 || batch_size % 2 != 0) {
    throw ConfigError("sampler: batch size must be even and positive, got " +
                      std::to_string(batch_size));
  }
  ds.validate();
  const Index half = batch_size / 2;

  std::vector<Index> multi_sample;
  for (Index g = 0; g < ds.identity_count(); ++g) {
    if (ds.groups[static_cast<std::size_t>(g)].features.rows() >= 2) multi_sample.push_back(g);
  }
  if (static_cast<Index>(multi_sample.size()) < half) {
    throw DatasetError("sampler: need " + std::to_string(half) +
                       " identities with >= 2 samples, have " +
                       std::to_string(multi_sample.size()));
  }

  PairBatch batch;
  batch.pairs.reserve(static_cast<std::size_t>(batch_size));

  // Positives: `half` distinct identities via a partial Fisher-Yates draw.
  for (Index i = 0; i < half; ++i) {
    const Index pick = i + rng.uniform_index(static_cast<Index>(multi_sample.size()) - i);
    std::swap(multi_sample[static_cast<std::size_t>(i)], multi_sample[static_cast<std::size_t>(pick)]);
    const auto& g = ds.groups[static_cast<std::size_t>(multi_sample[static_cast<std::size_t>(i)])];
    const Index n = g.features.rows();
    const Index s1 = rng.uniform_index(n);
    Index s2 = rng.uniform_index(n - 1);
    if (s2 >= s1) ++s2;
    batch.pairs.push_back({g.features.row(s1).transpose(), g.features.row(s2).transpose(), true});
  }

  // Negatives: two samples from two distinct identities.
  const Index id_count = ds.identity_count();
  for (Index i = 0; i < half; ++i) {
    const Index g1 = rng.uniform_index(id_count);
    Index g2 = rng.uniform_index(id_count - 1);
    if (g2 >= g1) ++g2;
    const auto& a = ds.groups[static_cast<std::size_t>(g1)];
    const auto& b = ds.groups[static_cast<std::size_t>(g2)];
    batch.pairs.push_back({a.features.row(rng.uniform_index(a.features.rows())).transpose(),
                           b.features.row(rng.uniform_index(b.features.rows())).transpose(),
                           false});
  }

  rng.shuffle(batch.pairs);
  return batch;
}

double pair_distance(const Vector& a, const Vector& b, DistanceMetric metric) {
  if (a.size() != b.size()) {
    throw DimensionError("pair distance: lengths " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  }
  if (metric == DistanceMetric::kEuclidean) return (a - b).norm();
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) {
    throw DegenerateInputError("pair distance: zero-norm feature under cosine distance");
  }
  const double c = std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
  return 1.0 - c;
}

PairBatch filter_hard(const PairBatch& batch, const MiningConfig& cfg) {
  cfg.validate();
  PairBatch kept;
  for (const auto& p : batch.pairs) {
    const double d = pair_distance(p.a, p.b, cfg.metric);
    const bool hard = p.same ? (d > cfg.tau_pos) : (d < cfg.tau_neg);
    if (hard) kept.pairs.push_back(p);
  }
  return kept;
}

IdentityDataset synth_identities(Index num_ids, Index per_id, Index dim, double sigma,
                                 RngStream& rng) {
  if (num_ids < 2) throw ConfigError("synth: need at least 2 identities, got " + std::to_string(num_ids));
  if (per_id < 1) throw ConfigError("synth: need at least 1 sample per identity, got " + std::to_string(per_id));
  if (dim < 1) throw ConfigError("synth: dimension must be positive, got " + std::to_string(dim));
  if (sigma < 0.0) throw ConfigError("synth: sigma must be >= 0, got " + std::to_string(sigma));

  IdentityDataset ds;
  ds.dim = dim;
  ds.groups.reserve(static_cast<std::size_t>(num_ids));
  for (Index id = 0; id < num_ids; ++id) {
    Vector center(dim);
    for (Index d = 0; d < dim; ++d) center[d] = rng.normal();
    IdentityGroup g;
    g.id = static_cast<std::uint64_t>(id);
    g.features = Matrix(per_id, dim);
    for (Index s = 0; s < per_id; ++s) {
      for (Index d = 0; d < dim; ++d) g.features(s, d) = center[d] + sigma * rng.normal();
    }
    ds.groups.push_back(std::move(g));
  }
  return ds;
}

Vector combine_flipped(const Vector& f_orig, const Vector& f_flip) {
  if (f_orig.size() != f_flip.size()) {
    throw DimensionError("combine_flipped: lengths " + std::to_string(f_orig.size()) + " vs " +
                         std::to_string(f_flip.size()));
  }
  Vector out(2 * f_orig.size());
  out << f_orig, f_flip;
  return out;
}

std::pair<IdentityDataset, IdentityDataset> split_identity_dataset(const IdentityDataset& ds,
                                                                   Index eval_per_id) {
  ds.validate();
  if (eval_per_id < 1) throw ConfigError("split: eval_per_id must be positive");
  IdentityDataset train, eval;
  train.dim = eval.dim = ds.dim;
  for (const auto& g : ds.groups) {
    const Index n = g.features.rows();
    if (n <= eval_per_id) {
      throw DatasetError("split: identity " + std::to_string(g.id) + " has " + std::to_string(n) +
                         " samples, cannot hold out " + std::to_string(eval_per_id));
    }
    train.groups.push_back({g.id, g.features.topRows(n - eval_per_id)});
    eval.groups.push_back({g.id, g.features.bottomRows(eval_per_id)});
  }
  return {std::move(train), std::move(eval)};
}

double median_pair_distance(const IdentityDataset& ds, DistanceMetric metric, Index sample_pairs,
                            RngStream& rng) {
  ds.validate();
  if (sample_pairs < 1) throw ConfigError("median distance: need at least one sampled pair");
  const Index total = ds.total_samples();
  if (total < 2) throw DatasetError("median distance: need at least two samples");

  // Flat index -> (group, row) lookup in group order.
  std::vector<std::pair<Index, Index>> flat;
  flat.reserve(static_cast<std::size_t>(total));
  for (Index g = 0; g < ds.identity_count(); ++g) {
    for (Index r = 0; r < ds.groups[static_cast<std::size_t>(g)].features.rows(); ++r) {
      flat.emplace_back(g, r);
    }
  }

  std::vector<double> distances;
  distances.reserve(static_cast<std::size_t>(sample_pairs));
  for (Index i = 0; i < sample_pairs; ++i) {
    const Index u = rng.uniform_index(total);
    Index v = rng.uniform_index(total - 1);
    if (v >= u) ++v;
    const auto [ga, ra] = flat[static_cast<std::size_t>(u)];
    const auto [gb, rb] = flat[static_cast<std::size_t>(v)];
    distances.push_back(pair_distance(
        ds.groups[static_cast<std::size_t>(ga)].features.row(ra).transpose(),
        ds.groups[static_cast<std::size_t>(gb)].features.row(rb).transpose(), metric));
  }
  std::sort(distances.begin(), distances.end());
  const std::size_t n = distances.size();
  if (n % 2 == 1) return distances[n / 2];
  return 0.5 * (distances[n / 2 - 1] + distances[n / 2]);
}

}  // namespace pmv
