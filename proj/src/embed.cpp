#include "veriflow/embed.hpp"

#include <string>

namespace veriflow {

std::uint64_t hash_bytes(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ (seed * 0x9e3779b97f4a7c15ULL);
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  // final avalanche so low bits are usable as a bucket index
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdULL;
  h ^= h >> 33;
  return h;
}

Embedding embed(std::string_view text, int dim, std::uint64_t seed, SourceKind kind) {
  if (dim < 8) throw std::invalid_argument("embedding dimension must be at least 8");
  Embedding e;
  e.source_kind = kind;
  e.values = Eigen::VectorXd::Zero(dim);
  for (std::size_t i = 0; i + 3 <= text.size(); ++i) {
    std::uint64_t h = hash_bytes(text.substr(i, 3), seed);
    auto bucket = static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dim));
    e.values[bucket] += (h >> 63) ? -1.0 : 1.0;
  }
  double norm = e.values.norm();
  if (norm == 0.0) {
    e.values[0] = 1.0;
  } else {
    e.values /= norm;
  }
  return e;
}

DistanceKind distance_kind_from_name(std::string_view name) {
  if (name == "cosine") return DistanceKind::cosine;
  if (name == "learned") return DistanceKind::learned;
  throw std::invalid_argument("unknown distance kind '" + std::string(name) + "'");
}

std::string_view distance_kind_name(DistanceKind k) { return k == DistanceKind::cosine ? "cosine" : "learned"; }

double distance(const Embedding& a, const Embedding& b, DistanceKind kind, const Eigen::MatrixXd* projection) {
  if (a.dim() != b.dim()) throw std::invalid_argument("embedding dimension mismatch");
  if (kind == DistanceKind::cosine) return std::max(0.0, 1.0 - a.values.dot(b.values));
  if (!projection) throw std::invalid_argument("learned distance needs a projection matrix");
  if (projection->cols() != a.dim()) throw std::invalid_argument("projection/embedding dimension mismatch");
  return (*projection * (a.values - b.values)).squaredNorm();
}

}  // namespace veriflow
