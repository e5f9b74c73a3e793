#pragma once

#include <cstdint>
#include <stdexcept>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace veriflow {

enum class SourceKind { state, move, goal };

inline constexpr std::uint64_t kDefaultHashSeed = 0x5eed5eedULL;
inline constexpr int kDefaultEmbedDim = 256;

struct Embedding {
  Eigen::VectorXd values;
  SourceKind source_kind = SourceKind::state;

  int dim() const { return static_cast<int>(values.size()); }
};

// FNV-1a over the bytes, with the seed folded into the offset basis. Fixed
// arithmetic so buckets are identical across processes and platforms.
std::uint64_t hash_bytes(std::string_view bytes, std::uint64_t seed);

// Signed feature hashing of character 3-grams into `dim` buckets, then L2
// normalization. Texts with no 3-grams (or whose counts cancel) map to e1.
Embedding embed(std::string_view text, int dim = kDefaultEmbedDim, std::uint64_t seed = kDefaultHashSeed,
                SourceKind kind = SourceKind::state);

enum class DistanceKind { cosine, learned };

DistanceKind distance_kind_from_name(std::string_view name);
std::string_view distance_kind_name(DistanceKind k);

// cosine: 1 - <a,b>.  learned: ||M (a - b)||^2 with M of shape p x d.
double distance(const Embedding& a, const Embedding& b, DistanceKind kind, const Eigen::MatrixXd* projection = nullptr);

}  // namespace veriflow
