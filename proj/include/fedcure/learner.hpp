#pragma once

// Synthetic non-IID data and a multinomial logistic regression learner,
// enough to watch loss and accuracy move through the federated pipeline.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "fedcure/core.hpp"

namespace fedcure {

struct DataSplit {
  std::size_t dim = 0;
  std::vector<double> x;  // row-major, size() * dim
  std::vector<std::size_t> y;

  std::size_t size() const noexcept { return y.size(); }
  std::span<const double> row(std::size_t i) const { return {x.data() + i * dim, dim}; }
};

struct SyntheticDataset {
  std::size_t n_classes = 0;
  std::size_t dim = 0;
  std::vector<std::vector<double>> means;
  DataSplit train;
  DataSplit test;
};

namespace detail {

inline std::vector<std::vector<double>> class_means(std::size_t k, std::size_t d, double class_sep,
                                                    RandomSource& rng) {
  std::vector<std::vector<double>> means(k, std::vector<double>(d, 0.0));
  if (k < 2 || class_sep == 0.0) return means;
  if (d >= k) {
    // Scaled basis vectors: every pair sits exactly class_sep apart.
    for (std::size_t c = 0; c < k; ++c) means[c][c] = class_sep / std::sqrt(2.0);
    return means;
  }
  for (auto& m : means)
    for (double& v : m) v = rng.normal();
  double min_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < d; ++t) s += (means[i][t] - means[j][t]) * (means[i][t] - means[j][t]);
      min_dist = std::min(min_dist, std::sqrt(s));
    }
  double scale = min_dist > 0.0 ? class_sep / min_dist : 0.0;
  for (auto& m : means)
    for (double& v : m) v *= scale;
  return means;
}

inline void fill_split(DataSplit& split, const std::vector<std::vector<double>>& means, std::size_t per_class,
                       RandomSource& rng) {
  const std::size_t d = split.dim;
  for (std::size_t c = 0; c < means.size(); ++c)
    for (std::size_t i = 0; i < per_class; ++i) {
      for (std::size_t t = 0; t < d; ++t) split.x.push_back(means[c][t] + rng.normal());
      split.y.push_back(c);
    }
}

}  // namespace detail

/// Gaussian blobs with unit covariance, one per class, means pairwise at
/// least class_sep apart. The test split carries every class equally.
inline SyntheticDataset generate(std::size_t n_classes, std::size_t dim, std::size_t per_class_count,
                                 std::size_t test_per_class, double class_sep, RandomSource& rng) {
  if (n_classes < 1 || dim < 1 || per_class_count < 1)
    throw Error(ErrorCode::InvalidArgument, "generate needs K, d and per-class counts >= 1");
  SyntheticDataset ds;
  ds.n_classes = n_classes;
  ds.dim = dim;
  RandomSource mean_rng = rng.child("means");
  RandomSource train_rng = rng.child("train");
  RandomSource test_rng = rng.child("test");
  ds.means = detail::class_means(n_classes, dim, class_sep, mean_rng);
  ds.train.dim = ds.test.dim = dim;
  detail::fill_split(ds.train, ds.means, per_class_count, train_rng);
  detail::fill_split(ds.test, ds.means, test_per_class, test_rng);
  return ds;
}

/// Labels held by coalition m: a contiguous (wrapping) block of
/// max(labels_per_coalition, ceil(K / M)) labels starting at m * block.
inline std::vector<std::size_t> coalition_labels(std::size_t m, std::size_t n_coalitions, std::size_t n_classes,
                                                 std::size_t labels_per_coalition) {
  std::size_t block = std::max(labels_per_coalition, (n_classes + n_coalitions - 1) / n_coalitions);
  if (block > n_classes) throw Error(ErrorCode::InfeasibleShard, "more labels per coalition than classes");
  std::vector<std::size_t> out(block);
  for (std::size_t j = 0; j < block; ++j) out[j] = (m * block + j) % n_classes;
  return out;
}

/// Edge non-IID sharding: clients of coalition m only receive samples of
/// coalition m's labels. Each label's samples are shuffled and dealt
/// round-robin to every client that holds that label.
inline std::vector<std::vector<std::size_t>> shard_non_iid(const SyntheticDataset& dataset,
                                                           const Partition& partition,
                                                           std::size_t labels_per_coalition, RandomSource& rng) {
  const std::size_t k = dataset.n_classes;
  const std::size_t m_count = partition.n_coalitions();
  if (labels_per_coalition < 1) throw Error(ErrorCode::InfeasibleShard, "labels_per_coalition must be >= 1");

  std::vector<std::vector<std::size_t>> holders(k);
  for (std::size_t m = 0; m < m_count; ++m) {
    auto members = partition.members(m);
    for (std::size_t label : coalition_labels(m, m_count, k, labels_per_coalition))
      holders[label].insert(holders[label].end(), members.begin(), members.end());
  }
  std::vector<std::vector<std::size_t>> by_label(k);
  for (std::size_t i = 0; i < dataset.train.size(); ++i) by_label[dataset.train.y[i]].push_back(i);

  std::vector<std::vector<std::size_t>> shards(partition.n_clients());
  for (std::size_t label = 0; label < k; ++label) {
    auto& h = holders[label];
    if (h.empty()) continue;
    std::sort(h.begin(), h.end());
    if (by_label[label].size() < h.size())
      throw Error(ErrorCode::InfeasibleShard,
                  "label " + std::to_string(label) + " has fewer samples than clients that need it");
    RandomSource label_rng = rng.child("label", label);
    auto idx = by_label[label];
    label_rng.shuffle(idx.begin(), idx.end());
    for (std::size_t i = 0; i < idx.size(); ++i) shards[h[i % h.size()]].push_back(idx[i]);
  }
  for (auto& s : shards) std::sort(s.begin(), s.end());
  return shards;
}

inline std::vector<std::size_t> label_counts_of(const DataSplit& split, std::span<const std::size_t> shard,
                                                std::size_t n_classes) {
  std::vector<std::size_t> counts(n_classes, 0);
  for (std::size_t i : shard) ++counts.at(split.y[i]);
  return counts;
}

// ---------------------------------------------------------------------------
// Model

/// K x d weight matrix followed by K biases.
struct ModelParams {
  std::size_t n_classes = 0;
  std::size_t dim = 0;
  std::vector<double> w;

  static ModelParams zeros(std::size_t k, std::size_t d) { return {k, d, std::vector<double>(k * d + k, 0.0)}; }
  double weight(std::size_t c, std::size_t t) const { return w[c * dim + t]; }
  double bias(std::size_t c) const { return w[n_classes * dim + c]; }
};

/// Log-softmax of the logits for one feature row.
inline std::vector<double> log_probs(const ModelParams& model, std::span<const double> x) {
  std::vector<double> z(model.n_classes);
  for (std::size_t c = 0; c < model.n_classes; ++c) {
    double s = model.bias(c);
    for (std::size_t t = 0; t < model.dim; ++t) s += model.weight(c, t) * x[t];
    z[c] = s;
  }
  double mx = *std::max_element(z.begin(), z.end());
  double se = 0.0;
  for (double v : z) se += std::exp(v - mx);
  double lse = mx + std::log(se);
  for (double& v : z) v -= lse;
  return z;
}

/// Mean cross-entropy over the given sample indices.
inline double loss(const ModelParams& model, const DataSplit& split, std::span<const std::size_t> indices) {
  if (indices.empty()) throw Error(ErrorCode::EmptyDataset, "loss over no samples");
  double total = 0.0;
  for (std::size_t i : indices) total -= log_probs(model, split.row(i))[split.y[i]];
  return total / static_cast<double>(indices.size());
}

/// Gradient of loss() with respect to model.w.
inline std::vector<double> gradient(const ModelParams& model, const DataSplit& split,
                                    std::span<const std::size_t> indices) {
  if (indices.empty()) throw Error(ErrorCode::EmptyDataset, "gradient over no samples");
  std::vector<double> g(model.w.size(), 0.0);
  const double scale = 1.0 / static_cast<double>(indices.size());
  const std::size_t bias_at = model.n_classes * model.dim;
  for (std::size_t i : indices) {
    auto x = split.row(i);
    auto lp = log_probs(model, x);
    for (std::size_t c = 0; c < model.n_classes; ++c) {
      double r = (std::exp(lp[c]) - (split.y[i] == c ? 1.0 : 0.0)) * scale;
      for (std::size_t t = 0; t < model.dim; ++t) g[c * model.dim + t] += r * x[t];
      g[bias_at + c] += r;
    }
  }
  return g;
}

/// tau_c minibatch SGD steps; batches are drawn with replacement from the shard.
inline ModelParams local_train(ModelParams model, const DataSplit& split, std::span<const std::size_t> shard,
                               int tau_c, double lr, std::size_t batch_size, RandomSource& rng) {
  if (!(lr >= 0.0)) throw Error(ErrorCode::InvalidArgument, "learning rate must be nonnegative");
  if (shard.empty() || batch_size == 0) return model;
  std::vector<std::size_t> batch(batch_size);
  for (int step = 0; step < tau_c; ++step) {
    for (auto& b : batch) b = shard[rng.index(shard.size())];
    if (lr == 0.0) continue;
    auto g = gradient(model, split, batch);
    for (std::size_t p = 0; p < model.w.size(); ++p) model.w[p] -= lr * g[p];
  }
  return model;
}

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Mean cross-entropy and top-1 accuracy; argmax ties go to the lowest class.
inline EvalResult evaluate(const ModelParams& model, const DataSplit& split) {
  if (split.size() == 0) throw Error(ErrorCode::EmptyDataset, "evaluation split is empty");
  double total = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < split.size(); ++i) {
    auto lp = log_probs(model, split.row(i));
    total -= lp[split.y[i]];
    auto pred = static_cast<std::size_t>(std::max_element(lp.begin(), lp.end()) - lp.begin());
    if (pred == split.y[i]) ++correct;
  }
  double n = static_cast<double>(split.size());
  return {total / n, static_cast<double>(correct) / n};
}

}  // namespace fedcure
