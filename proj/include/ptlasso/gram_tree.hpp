#pragma once

// Tree-based aggregation of the joint Gram matrix G_t = sum_s b_s b_s' with
// b_s = (x_s, r_s). Every dyadic node stores its exact partial sum; a node's
// Wishart noise is drawn the first time a prefix query uses it and is cached
// afterwards.

#include <Eigen/Dense>

#include <bit>
#include <cstdint>
#include <cstring>
#include <memory>
#include <optional>
#include <ostream>
#include <vector>

#include "ptlasso/error.hpp"
#include "ptlasso/lasso.hpp"
#include "ptlasso/privacy.hpp"
#include "ptlasso/random.hpp"

namespace ptlasso {

/// Dyadic node: level 0 holds single rounds; node (level, index) covers
/// rounds [index * 2^level + 1, (index + 1) * 2^level].
struct NodeId {
  int level = 0;
  std::int64_t index = 0;

  std::int64_t first_round() const { return (index << level) + 1; }
  std::int64_t last_round() const { return (index + 1) << level; }
  friend bool operator==(const NodeId&, const NodeId&) = default;
};

enum class Retention {
  kFull,      // every node kept; any prefix t <= count can be queried
  kFrontier,  // nodes no later prefix can use are freed
};

class NoisyGramTree {
 public:
  /// `noise == nullopt` disables privacy noise entirely.
  NoisyGramTree(std::int64_t horizon, int dim, std::optional<WishartParams> noise,
                std::uint64_t seed, Retention retention = Retention::kFull)
      : horizon_(horizon), dim_(dim), noise_(noise), rng_(seed), retention_(retention) {
    if (horizon < 1 || dim < 1) {
      throw Error(ErrorCode::kInvalidArgument, "tree needs horizon >= 1 and dim >= 1");
    }
    if (noise_ && noise_->dim != dim) {
      throw Error(ErrorCode::kInvalidDimensions, "Wishart dimension must match the tree");
    }
    padded_ = std::int64_t{1} << ceil_log2_exact(horizon);
    levels_ = static_cast<int>(std::bit_width(static_cast<std::uint64_t>(padded_)));
    offsets_.resize(levels_ + 1, 0);
    for (int j = 0; j < levels_; ++j) offsets_[j + 1] = offsets_[j] + (padded_ >> j);
    nodes_.resize(offsets_[levels_]);
    released_.assign(offsets_[levels_], false);
  }

  std::int64_t horizon() const { return horizon_; }
  std::int64_t padded_horizon() const { return padded_; }
  int dim() const { return dim_; }
  int levels() const { return levels_; }
  std::int64_t count() const { return count_; }
  std::int64_t noise_matrices_sampled() const { return noise_samples_; }
  const std::optional<WishartParams>& noise_params() const { return noise_; }

  /// Adds (x, r)(x, r)' to every node containing round count + 1.
  template <typename Derived>
  void insert(const Eigen::MatrixBase<Derived>& x, double r) {
    if (count_ >= horizon_) throw Error(ErrorCode::kHorizonExceeded, "tree horizon exhausted");
    if (x.size() != dim_ - 1) throw Error(ErrorCode::kInvalidDimensions, "context length != dim - 1");
    Eigen::VectorXd b(dim_);
    b.head(dim_ - 1) = x;
    b[dim_ - 1] = r;
    const Eigen::MatrixXd outer = b * b.transpose();
    for (int j = 0; j < levels_; ++j) {
      auto& node = nodes_[flat({j, count_ >> j})];
      if (!node) node = std::make_unique<Node>(Node{Eigen::MatrixXd::Zero(dim_, dim_), std::nullopt});
      node->sum += outer;
    }
    ++count_;
    if (retention_ == Retention::kFrontier) prune();
  }

  /// Canonical dyadic cover of [1, t]: one node per set bit of t.
  std::vector<NodeId> canonical_nodes(std::int64_t t) const {
    std::vector<NodeId> ids;
    for (int j = levels_ - 1; j >= 0; --j) {
      if ((t >> j) & 1) ids.push_back({j, (t >> j) - 1});
    }
    return ids;
  }

  /// Noisy prefix sum over rounds [1, t].
  Eigen::MatrixXd query_prefix(std::int64_t t) { return accumulate(t, true, true); }

  /// Exact prefix sum over rounds [1, t] (no noise, no budget spent).
  Eigen::MatrixXd exact_prefix(std::int64_t t) const {
    return const_cast<NoisyGramTree*>(this)->accumulate(t, true, false);
  }

  /// Noise part of query_prefix(t).
  Eigen::MatrixXd query_noise(std::int64_t t) { return accumulate(t, false, true); }

  std::size_t last_query_nodes() const { return last_query_nodes_; }

  /// Cached noise of a node, or nullptr if it was never released.
  const Eigen::MatrixXd* node_noise(const NodeId& id) const {
    if (!valid(id)) return nullptr;
    const auto& node = nodes_[flat(id)];
    return node && node->noise ? &*node->noise : nullptr;
  }

  /// Exact partial sum of a node, or nullptr if untouched or freed.
  const Eigen::MatrixXd* node_sum(const NodeId& id) const {
    if (!valid(id)) return nullptr;
    const auto& node = nodes_[flat(id)];
    return node ? &node->sum : nullptr;
  }

  bool released(const NodeId& id) const { return valid(id) && released_[flat(id)]; }

  /// Largest number of released nodes that contain one inserted round.
  int max_released_nodes_per_round() const {
    int worst = 0;
    for (std::int64_t s = 0; s < count_; ++s) {
      int c = 0;
      for (int j = 0; j < levels_; ++j) c += released_[flat({j, s >> j})] ? 1 : 0;
      worst = std::max(worst, c);
    }
    return worst;
  }

  /// Binary dump of the exact and noisy prefix at t: "PTGT", u32 version (1),
  /// u32 dim, i64 t, then dim*dim exact and dim*dim noisy float64 values in
  /// row-major order. All fields little-endian.
  void write_prefix_dump(std::ostream& out, std::int64_t t) {
    const Eigen::MatrixXd exact = exact_prefix(t);
    const Eigen::MatrixXd noisy = query_prefix(t);
    out.write("PTGT", 4);
    write_le(out, std::uint32_t{1});
    write_le(out, static_cast<std::uint32_t>(dim_));
    write_le(out, static_cast<std::int64_t>(t));
    for (const auto* m : {&exact, &noisy})
      for (int i = 0; i < dim_; ++i)
        for (int j = 0; j < dim_; ++j) write_le(out, (*m)(i, j));
    if (!out) throw Error(ErrorCode::kIoError, "failed to write tree dump");
  }

 private:
  struct Node {
    Eigen::MatrixXd sum;
    std::optional<Eigen::MatrixXd> noise;
  };

  static int ceil_log2_exact(std::int64_t T) {
    return T <= 1 ? 0 : static_cast<int>(std::bit_width(static_cast<std::uint64_t>(T - 1)));
  }

  bool valid(const NodeId& id) const {
    return id.level >= 0 && id.level < levels_ && id.index >= 0 && id.index < (padded_ >> id.level);
  }
  std::size_t flat(const NodeId& id) const {
    return static_cast<std::size_t>(offsets_[id.level] + id.index);
  }

  Eigen::MatrixXd accumulate(std::int64_t t, bool with_sum, bool with_noise) {
    if (t < 1 || t > count_) throw Error(ErrorCode::kOutOfRange, "prefix length outside [1, count]");
    Eigen::MatrixXd total = Eigen::MatrixXd::Zero(dim_, dim_);
    const auto ids = canonical_nodes(t);
    for (const auto& id : ids) {
      auto& node = nodes_[flat(id)];
      if (!node) throw Error(ErrorCode::kOutOfRange, "prefix uses a node that was freed");
      if (with_sum) total += node->sum;
      if (with_noise && noise_) {
        if (!node->noise) {
          node->noise = wishart_noise(*noise_, rng_);
          ++noise_samples_;
        }
        released_[flat(id)] = true;
        total += *node->noise;
      }
    }
    last_query_nodes_ = ids.size();
    return total;
  }

  // Node (j, i) serves prefixes t in [(i + 1) 2^j, (i + 2) 2^j - 1] when i
  // is even and no prefix at all when i is odd.
  void prune() {
    for (int j = 0; j < levels_; ++j) {
      const std::int64_t size = std::int64_t{1} << j;
      const std::int64_t current = (count_ - 1) >> j;
      for (std::int64_t i = std::max<std::int64_t>(0, current - 2); i <= current; ++i) {
        auto& node = nodes_[flat({j, i})];
        if (!node) continue;
        const bool complete = count_ >= (i + 1) * size;
        const bool expired = (i % 2 == 1) ? complete : count_ >= (i + 2) * size;
        if (expired) node.reset();
      }
    }
  }

  template <typename T>
  static void write_le(std::ostream& out, T value) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
      for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    }
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
  }

  std::int64_t horizon_;
  int dim_;
  std::optional<WishartParams> noise_;
  Rng rng_;
  Retention retention_;
  std::int64_t padded_ = 1;
  int levels_ = 1;
  std::vector<std::int64_t> offsets_;
  std::vector<std::unique_ptr<Node>> nodes_;
  std::vector<bool> released_;
  std::int64_t count_ = 0;
  std::int64_t noise_samples_ = 0;
  std::size_t last_query_nodes_ = 0;
};

/// V = G[S, S] and u = G[S, d] of a (d+1) x (d+1) joint Gram matrix.
inline RestrictedGram extract_regression(const Eigen::MatrixXd& gram, const std::vector<int>& support,
                                         std::int64_t count = 0) {
  if (support.empty()) throw Error(ErrorCode::kEmptySupport, "support set is empty");
  const int d = static_cast<int>(gram.rows()) - 1;
  RestrictedGram out;
  out.support = support;
  out.d = d;
  out.count = count;
  const auto s = static_cast<Eigen::Index>(support.size());
  out.V.resize(s, s);
  out.u.resize(s);
  for (Eigen::Index a = 0; a < s; ++a) {
    if (support[a] < 0 || support[a] >= d) throw Error(ErrorCode::kOutOfRange, "support index >= d");
    for (Eigen::Index b = 0; b < s; ++b) out.V(a, b) = gram(support[a], support[b]);
    out.u[a] = gram(support[a], d);
  }
  return out;
}

}  // namespace ptlasso
