#pragma once

// Domain entities shared by every part of the simulator: errors, seeded
// randomness, client profiles, label distributions and coalition partitions.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fedcure {

enum class ErrorCode {
  EmptyCoalition,
  UnboundedDivergence,
  InsufficientCoalitions,
  InvalidCoalition,
  InvalidFrequency,
  InvalidObservation,
  NoAvailableCoalition,
  Undefined,
  ShapeError,
  EmptyDataset,
  InfeasibleShard,
  ConfigError,
  InvalidPartition,
  InvalidArgument,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyCoalition: return "EmptyCoalition";
    case ErrorCode::UnboundedDivergence: return "UnboundedDivergence";
    case ErrorCode::InsufficientCoalitions: return "InsufficientCoalitions";
    case ErrorCode::InvalidCoalition: return "InvalidCoalition";
    case ErrorCode::InvalidFrequency: return "InvalidFrequency";
    case ErrorCode::InvalidObservation: return "InvalidObservation";
    case ErrorCode::NoAvailableCoalition: return "NoAvailableCoalition";
    case ErrorCode::Undefined: return "Undefined";
    case ErrorCode::ShapeError: return "ShapeError";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::InfeasibleShard: return "InfeasibleShard";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::InvalidPartition: return "InvalidPartition";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// ---------------------------------------------------------------------------
// RandomSource

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace detail

/// Deterministic random stream. Child streams are derived from the parent
/// seed and a tag only, so adding a consumer never shifts another
/// consumer's draws.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed) : seed_(seed), engine_(detail::splitmix64(seed)) {}

  std::uint64_t seed() const noexcept { return seed_; }

  RandomSource child(std::uint64_t tag) const {
    return RandomSource(detail::splitmix64(seed_ ^ detail::splitmix64(tag + 0x5851F42D4C957F2DULL)));
  }
  RandomSource child(std::string_view tag) const { return child(detail::fnv1a(tag)); }
  RandomSource child(std::string_view tag, std::uint64_t index) const {
    return child(tag).child(index);
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return std::generate_canonical<double, 64>(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }

  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  template <typename It>
  void shuffle(It first, It last) {
    std::shuffle(first, last, engine_);
  }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

inline RandomSource seeded_rng(std::uint64_t seed) { return RandomSource(seed); }

// ---------------------------------------------------------------------------
// Clients and distributions

struct ClientProfile {
  std::size_t id = 0;
  std::size_t dataset_size = 0;
  std::vector<std::size_t> label_counts;
  double comp_load = 1.0;   // cycles per local step
  double f_max = 1.0;       // cycles per second
  double comm_delay = 0.0;  // seconds

  void validate() const {
    std::size_t total = std::accumulate(label_counts.begin(), label_counts.end(), std::size_t{0});
    if (total != dataset_size)
      throw Error(ErrorCode::InvalidArgument,
                  "client " + std::to_string(id) + ": dataset_size does not match label counts");
    if (!(comp_load > 0.0) || !(f_max > 0.0) || !(comm_delay >= 0.0))
      throw Error(ErrorCode::InvalidArgument,
                  "client " + std::to_string(id) + ": comp_load and f_max must be positive, comm_delay nonnegative");
  }
};

/// Normalized histogram over class labels.
class LabelDistribution {
 public:
  static constexpr double kSumTolerance = 1e-9;

  LabelDistribution() = default;

  explicit LabelDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
    double sum = 0.0;
    for (double p : probs_) {
      if (!(p >= 0.0) || !std::isfinite(p))
        throw Error(ErrorCode::InvalidArgument, "probabilities must be finite and nonnegative");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kSumTolerance)
      throw Error(ErrorCode::InvalidArgument, "probabilities must sum to 1");
  }

  template <typename Count>
  static LabelDistribution from_counts(std::span<const Count> counts) {
    double total = 0.0;
    for (auto c : counts) total += static_cast<double>(c);
    if (!(total > 0.0)) throw Error(ErrorCode::InvalidArgument, "label counts sum to zero");
    std::vector<double> probs(counts.size());
    for (std::size_t k = 0; k < counts.size(); ++k) probs[k] = static_cast<double>(counts[k]) / total;
    return LabelDistribution(std::move(probs));
  }

  static LabelDistribution from_counts(const std::vector<double>& counts) {
    return from_counts(std::span<const double>(counts));
  }

  const std::vector<double>& probs() const noexcept { return probs_; }
  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t k) const { return probs_[k]; }

 private:
  std::vector<double> probs_;
};

/// Assignment of clients to coalitions. Disjointness and coverage hold by
/// construction (one coalition index per client); validate() checks ranges.
class Partition {
 public:
  Partition() = default;
  Partition(std::vector<std::size_t> assignment, std::size_t n_coalitions)
      : assignment_(std::move(assignment)), n_coalitions_(n_coalitions) {
    validate(false);
  }

  /// Contiguous blocks: clients [m*N/M, (m+1)*N/M) go to coalition m.
  static Partition blocks(std::size_t n_clients, std::size_t n_coalitions) {
    std::vector<std::size_t> a(n_clients);
    for (std::size_t n = 0; n < n_clients; ++n) a[n] = n * n_coalitions / n_clients;
    return Partition(std::move(a), n_coalitions);
  }

  std::size_t n_clients() const noexcept { return assignment_.size(); }
  std::size_t n_coalitions() const noexcept { return n_coalitions_; }
  std::size_t coalition_of(std::size_t client) const { return assignment_.at(client); }
  const std::vector<std::size_t>& assignment() const noexcept { return assignment_; }

  std::vector<std::size_t> members(std::size_t m) const {
    std::vector<std::size_t> out;
    for (std::size_t n = 0; n < assignment_.size(); ++n)
      if (assignment_[n] == m) out.push_back(n);
    return out;
  }

  std::size_t size(std::size_t m) const {
    return static_cast<std::size_t>(std::count(assignment_.begin(), assignment_.end(), m));
  }

  void move(std::size_t client, std::size_t to) {
    if (to >= n_coalitions_) throw Error(ErrorCode::InvalidCoalition, "target coalition out of range");
    assignment_.at(client) = to;
  }

  void validate(bool require_nonempty = true) const {
    if (n_coalitions_ == 0) throw Error(ErrorCode::InvalidPartition, "partition has no coalitions");
    std::vector<std::size_t> sizes(n_coalitions_, 0);
    for (std::size_t a : assignment_) {
      if (a >= n_coalitions_)
        throw Error(ErrorCode::InvalidPartition, "client assigned to out-of-range coalition");
      ++sizes[a];
    }
    if (require_nonempty)
      for (std::size_t m = 0; m < n_coalitions_; ++m)
        if (sizes[m] == 0)
          throw Error(ErrorCode::EmptyCoalition, "coalition " + std::to_string(m) + " is empty");
  }

  bool operator==(const Partition&) const = default;

 private:
  std::vector<std::size_t> assignment_;
  std::size_t n_coalitions_ = 0;
};

/// Count-weighted label histogram of coalition m.
inline std::vector<double> coalition_counts(const Partition& partition,
                                            std::span<const ClientProfile> clients, std::size_t m) {
  if (clients.size() != partition.n_clients())
    throw Error(ErrorCode::ShapeError, "client list does not match partition");
  std::vector<double> counts;
  bool any = false;
  for (std::size_t n = 0; n < clients.size(); ++n) {
    if (partition.coalition_of(n) != m) continue;
    const auto& lc = clients[n].label_counts;
    if (counts.empty()) counts.assign(lc.size(), 0.0);
    if (lc.size() != counts.size()) throw Error(ErrorCode::ShapeError, "label count lengths differ");
    for (std::size_t k = 0; k < lc.size(); ++k) counts[k] += static_cast<double>(lc[k]);
    any = true;
  }
  if (!any) throw Error(ErrorCode::EmptyCoalition, "coalition " + std::to_string(m) + " has no members");
  return counts;
}

inline LabelDistribution coalition_distribution(const Partition& partition,
                                                std::span<const ClientProfile> clients, std::size_t m) {
  return LabelDistribution::from_counts(coalition_counts(partition, clients, m));
}

inline std::vector<LabelDistribution> coalition_distributions(const Partition& partition,
                                                              std::span<const ClientProfile> clients) {
  std::vector<LabelDistribution> out;
  out.reserve(partition.n_coalitions());
  for (std::size_t m = 0; m < partition.n_coalitions(); ++m)
    out.push_back(coalition_distribution(partition, clients, m));
  return out;
}

/// Total sample count |D_m| per coalition.
inline std::vector<double> coalition_sizes(const Partition& partition,
                                           std::span<const ClientProfile> clients) {
  std::vector<double> sizes(partition.n_coalitions(), 0.0);
  for (std::size_t n = 0; n < clients.size(); ++n)
    sizes[partition.coalition_of(n)] += static_cast<double>(clients[n].dataset_size);
  return sizes;
}

}  // namespace fedcure
