#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rational.hpp"

namespace jiggle {

using VertexId = std::uint32_t;

/// Vertex ids of a simplex, strictly increasing. The increasing order is the
/// simplex's vertex order (complexes are ordered by vertex id throughout).
using SimplexKey = std::vector<VertexId>;

struct SimplexKeyHash {
  std::size_t operator()(const SimplexKey& k) const {
    std::size_t h = 0xcbf29ce484222325ULL;
    for (VertexId v : k) h = hash_combine(h, std::hash<VertexId>()(v));
    return h;
  }
};

inline std::string key_str(const SimplexKey& k) {
  std::string s = "[";
  for (std::size_t i = 0; i < k.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(k[i]);
  }
  return s + "]";
}

/// Exact barycentric combination of root-complex vertices: sorted by vertex
/// id, weights positive and summing to one. Two subdivision vertices are the
/// same vertex iff their keys are equal.
using BarycentricKey = std::vector<std::pair<VertexId, Rat>>;

struct BarycentricKeyHash {
  std::size_t operator()(const BarycentricKey& k) const {
    std::size_t h = 0x84222325cbf29ce4ULL;
    RatHash rh;
    for (const auto& [v, w] : k) {
      h = hash_combine(h, std::hash<VertexId>()(v));
      h = hash_combine(h, rh(w));
    }
    return h;
  }
};

inline BarycentricKey make_barycentric_key(std::vector<std::pair<VertexId, Rat>> terms) {
  std::sort(terms.begin(), terms.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  BarycentricKey out;
  for (auto& [v, w] : terms) {
    if (w.num == 0) continue;
    if (!out.empty() && out.back().first == v) {
      out.back().second = out.back().second + w;
      if (out.back().second.num == 0) out.pop_back();
    } else {
      out.emplace_back(v, w);
    }
  }
  return out;
}

/// Affine combination of keys with rational weights (weights need not be
/// positive individually, but callers keep the result a convex combination).
inline BarycentricKey combine_keys(const std::vector<std::pair<Rat, const BarycentricKey*>>& parts) {
  std::vector<std::pair<VertexId, Rat>> terms;
  for (const auto& [w, key] : parts)
    for (const auto& [v, kw] : *key) terms.emplace_back(v, w * kw);
  return make_barycentric_key(std::move(terms));
}

inline bool is_singleton_key(const BarycentricKey& k, VertexId& out) {
  if (k.size() == 1 && k[0].second == Rat(1)) { out = k[0].first; return true; }
  return false;
}

}  // namespace jiggle
