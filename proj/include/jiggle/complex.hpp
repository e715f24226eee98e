#pragma once

#include <algorithm>
#include <cstring>
#include <functional>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "keys.hpp"
#include "region.hpp"
#include "simplex_geometry.hpp"

namespace jiggle {

/// Where a top simplex of a subdivided complex came from.
///
/// `root_top` is a top simplex of the root complex (root vertex ids stay
/// valid in every descendant). `level` is the dyadic depth: direct children
/// carry the cube address of their cell, cells created by a barycentric cone
/// off are marked `coned` and keep their parent's level.
struct TopLineage {
  SimplexKey root_top;
  int level = 0;
  bool coned = false;
  std::vector<std::int32_t> cube;  ///< subcube offset in {0..2^level-1}^m (direct cells)
  std::vector<std::int8_t> perm;   ///< permutation of 0..m-1 picking the cell in its subcube
};

class SimplicialComplex {
public:
  SimplicialComplex() = default;

  /// Build from explicit simplices. Vertex references must resolve and keys
  /// must be strictly increasing; geometric problems are left to
  /// validate_complex. With close_faces the face closure is generated.
  static SimplicialComplex from_simplices(int ambient_dim, std::vector<Vec> vertices,
                                          const std::vector<SimplexKey>& simplices,
                                          bool close_faces = true) {
    SimplicialComplex K;
    K.ambient_dim_ = ambient_dim;
    K.vertex_coords_ = std::move(vertices);
    for (const auto& v : K.vertex_coords_)
      if (v.size() != ambient_dim) throw std::invalid_argument("vertex dimension mismatch");
    K.vertex_keys_.reserve(K.vertex_coords_.size());
    for (VertexId v = 0; v < K.vertex_coords_.size(); ++v)
      K.vertex_keys_.push_back(BarycentricKey{{v, Rat(1)}});
    for (const auto& s : simplices) {
      if (s.empty()) throw std::invalid_argument("empty simplex");
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] >= K.vertex_coords_.size())
          throw std::invalid_argument("simplex references missing vertex " + std::to_string(s[i]));
        if (i > 0 && s[i] <= s[i - 1])
          throw std::invalid_argument("simplex key not strictly increasing: " + key_str(s));
      }
      K.simplices_.insert(s);
      if (close_faces) K.insert_faces(s);
    }
    K.finalize_structure();
    K.signature_ = K.compute_signature();
    K.root_signature_ = K.signature_;
    K.root_vertex_count_ = static_cast<VertexId>(K.vertex_coords_.size());
    for (const auto& t : K.tops_) {
      TopLineage lin;
      lin.root_top = t;
      lin.level = 0;
      lin.cube.assign(t.size() - 1, 0);
      for (std::size_t i = 0; i + 1 < t.size(); ++i) lin.perm.push_back(static_cast<std::int8_t>(i));
      K.lineage_.push_back(std::move(lin));
    }
    return K;
  }

  int ambient_dim() const { return ambient_dim_; }
  int top_dim() const { return top_dim_; }
  bool pure() const { return pure_; }
  std::size_t vertex_count() const { return vertex_coords_.size(); }
  const std::vector<Vec>& vertex_coords() const { return vertex_coords_; }
  const Vec& vertex(VertexId v) const { return vertex_coords_.at(v); }
  const BarycentricKey& vertex_key(VertexId v) const { return vertex_keys_.at(v); }

  bool contains(const SimplexKey& s) const { return simplices_.count(s) > 0; }
  std::size_t simplex_count() const { return simplices_.size(); }

  /// Simplices of maximal dimension, sorted lexicographically by vertex ids.
  const std::vector<SimplexKey>& tops() const { return tops_; }
  /// Simplices maximal under inclusion (equals tops() iff pure), sorted.
  const std::vector<SimplexKey>& maximal() const { return maximal_; }

  std::optional<std::uint32_t> top_index(const SimplexKey& t) const {
    auto it = std::lower_bound(tops_.begin(), tops_.end(), t);
    if (it == tops_.end() || *it != t) return std::nullopt;
    return static_cast<std::uint32_t>(it - tops_.begin());
  }

  const std::vector<std::uint32_t>& tops_at_vertex(VertexId v) const { return vertex_tops_.at(v); }
  const std::vector<std::uint32_t>& maximal_at_vertex(VertexId v) const { return vertex_maximal_.at(v); }

  std::vector<SimplexKey> all_simplices_sorted() const {
    std::vector<SimplexKey> out(simplices_.begin(), simplices_.end());
    std::sort(out.begin(), out.end(), [](const SimplexKey& a, const SimplexKey& b) {
      if (a.size() != b.size()) return a.size() < b.size();
      return a < b;
    });
    return out;
  }

  Mat points_of(const SimplexKey& s) const {
    Mat P(ambient_dim_, s.size());
    for (std::size_t i = 0; i < s.size(); ++i) P.col(i) = vertex_coords_.at(s[i]);
    return P;
  }

  Vec barycenter_of(const SimplexKey& s) const {
    Vec b = Vec::Zero(ambient_dim_);
    for (VertexId v : s) b += vertex_coords_.at(v);
    return b / static_cast<double>(s.size());
  }

  // Lineage.
  bool has_lineage() const { return !lineage_.empty(); }
  const TopLineage& lineage(std::uint32_t top_index) const { return lineage_.at(top_index); }
  std::uint64_t signature() const { return signature_; }
  std::uint64_t root_signature() const { return root_signature_; }
  std::uint64_t ancestor_signature() const { return ancestor_signature_; }
  bool is_root() const { return signature_ == root_signature_; }
  VertexId root_vertex_count() const { return root_vertex_count_; }

  /// Exact barycentric coordinates of a vertex with respect to an ordered
  /// root simplex, from the lineage keys. Empty if the vertex is not a
  /// combination of that simplex's vertices.
  std::optional<std::vector<Rat>> root_barycentric(VertexId v, const SimplexKey& root_simplex) const {
    const BarycentricKey& key = vertex_keys_.at(v);
    std::vector<Rat> out(root_simplex.size(), Rat(0));
    for (const auto& [rv, w] : key) {
      auto it = std::lower_bound(root_simplex.begin(), root_simplex.end(), rv);
      if (it == root_simplex.end() || *it != rv) return std::nullopt;
      out[it - root_simplex.begin()] = w;
    }
    return out;
  }

  friend class ComplexBuilder;

private:
  void insert_faces(const SimplexKey& s) {
    // All nonempty proper subsets; subsets of a sorted key stay sorted.
    const std::size_t n = s.size();
    for (std::size_t mask = 1; mask + 1 < (1u << n); ++mask) {
      SimplexKey f;
      for (std::size_t i = 0; i < n; ++i)
        if (mask & (1u << i)) f.push_back(s[i]);
      simplices_.insert(std::move(f));
    }
  }

  void finalize_structure() {
    top_dim_ = 0;
    for (const auto& s : simplices_) top_dim_ = std::max(top_dim_, static_cast<int>(s.size()) - 1);
    // Mark non-maximal simplices: every facet of a stored simplex.
    std::unordered_set<SimplexKey, SimplexKeyHash> non_maximal;
    for (const auto& s : simplices_) {
      if (s.size() == 1) continue;
      for (std::size_t skip = 0; skip < s.size(); ++skip) {
        SimplexKey f;
        f.reserve(s.size() - 1);
        for (std::size_t i = 0; i < s.size(); ++i)
          if (i != skip) f.push_back(s[i]);
        non_maximal.insert(std::move(f));
      }
    }
    tops_.clear();
    maximal_.clear();
    pure_ = true;
    for (const auto& s : simplices_) {
      if (static_cast<int>(s.size()) - 1 == top_dim_) tops_.push_back(s);
      if (!non_maximal.count(s)) {
        maximal_.push_back(s);
        if (static_cast<int>(s.size()) - 1 != top_dim_) pure_ = false;
      }
    }
    std::sort(tops_.begin(), tops_.end());
    std::sort(maximal_.begin(), maximal_.end());
    vertex_tops_.assign(vertex_coords_.size(), {});
    for (std::uint32_t i = 0; i < tops_.size(); ++i)
      for (VertexId v : tops_[i]) vertex_tops_[v].push_back(i);
    vertex_maximal_.assign(vertex_coords_.size(), {});
    for (std::uint32_t i = 0; i < maximal_.size(); ++i)
      for (VertexId v : maximal_[i]) vertex_maximal_[v].push_back(i);
  }

  std::uint64_t compute_signature() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t x) {
      h ^= x;
      h *= 0x100000001b3ULL;
    };
    mix(static_cast<std::uint64_t>(ambient_dim_));
    for (const auto& v : vertex_coords_)
      for (int i = 0; i < v.size(); ++i) {
        std::uint64_t bits;
        const double d = v(i);
        std::memcpy(&bits, &d, sizeof(bits));
        mix(bits);
      }
    for (const auto& t : tops_) {
      mix(0xfeedULL);
      for (VertexId v : t) mix(v);
    }
    return h;
  }

  int ambient_dim_ = 0;
  std::vector<Vec> vertex_coords_;
  std::vector<BarycentricKey> vertex_keys_;
  std::unordered_set<SimplexKey, SimplexKeyHash> simplices_;
  std::vector<SimplexKey> tops_;
  std::vector<SimplexKey> maximal_;
  std::vector<std::vector<std::uint32_t>> vertex_tops_;
  std::vector<std::vector<std::uint32_t>> vertex_maximal_;
  int top_dim_ = 0;
  bool pure_ = true;
  std::vector<TopLineage> lineage_;
  std::uint64_t signature_ = 0;
  std::uint64_t root_signature_ = 0;
  std::uint64_t ancestor_signature_ = 0;
  VertexId root_vertex_count_ = 0;
};

/// Incremental construction used by the subdivision routines; keeps exact
/// vertex keys, dedups vertices by key, and wires lineage.
class ComplexBuilder {
public:
  ComplexBuilder(int ambient_dim, std::uint64_t root_signature, std::uint64_t ancestor_signature,
                 VertexId root_vertex_count)
      : ambient_dim_(ambient_dim),
        root_signature_(root_signature),
        ancestor_signature_(ancestor_signature),
        root_vertex_count_(root_vertex_count) {}

  /// Registers a vertex by exact key; reuses the id if the key was seen.
  VertexId add_vertex(const BarycentricKey& key, const Vec& coords) {
    auto it = index_.find(key);
    if (it != index_.end()) return it->second;
    const VertexId id = static_cast<VertexId>(coords_.size());
    index_.emplace(key, id);
    coords_.push_back(coords);
    keys_.push_back(key);
    return id;
  }

  bool has_vertex(const BarycentricKey& key) const { return index_.count(key) > 0; }
  const Vec& coords(VertexId v) const { return coords_.at(v); }
  const BarycentricKey& key(VertexId v) const { return keys_.at(v); }

  void add_top(SimplexKey s, TopLineage lin) {
    std::sort(s.begin(), s.end());
    tops_.emplace_back(std::move(s), std::move(lin));
  }

  SimplicialComplex build() const {
    SimplicialComplex K;
    K.ambient_dim_ = ambient_dim_;
    K.vertex_coords_ = coords_;
    K.vertex_keys_ = keys_;
    for (const auto& [s, lin] : tops_) {
      K.simplices_.insert(s);
      K.insert_faces(s);
    }
    K.finalize_structure();
    // Attach lineage in the sorted top order.
    K.lineage_.resize(K.tops_.size());
    for (const auto& [s, lin] : tops_) {
      auto idx = K.top_index(s);
      if (!idx) throw std::logic_error("ComplexBuilder: top lost during build");
      K.lineage_[*idx] = lin;
    }
    K.signature_ = K.compute_signature();
    K.root_signature_ = root_signature_;
    K.ancestor_signature_ = ancestor_signature_;
    K.root_vertex_count_ = root_vertex_count_;
    return K;
  }

  std::size_t vertex_count() const { return coords_.size(); }

private:
  int ambient_dim_;
  std::uint64_t root_signature_;
  std::uint64_t ancestor_signature_;
  VertexId root_vertex_count_;
  std::vector<Vec> coords_;
  std::vector<BarycentricKey> keys_;
  std::unordered_map<BarycentricKey, VertexId, BarycentricKeyHash> index_;
  std::vector<std::pair<SimplexKey, TopLineage>> tops_;
};

/// Subcomplexes are sorted, unique lists of simplex keys referring to a
/// parent complex's vertex table.
using Subcomplex = std::vector<SimplexKey>;

inline void sort_unique(Subcomplex& s) {
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
}

inline bool subcomplex_contains(const Subcomplex& s, const SimplexKey& k) {
  return std::binary_search(s.begin(), s.end(), k);
}

/// Smallest subcomplex containing the given simplices (adds all faces).
inline Subcomplex closure(const Subcomplex& sims) {
  Subcomplex out;
  for (const auto& s : sims) {
    const std::size_t n = s.size();
    for (std::size_t mask = 1; mask < (1u << n); ++mask) {
      SimplexKey f;
      for (std::size_t i = 0; i < n; ++i)
        if (mask & (1u << i)) f.push_back(s[i]);
      out.push_back(std::move(f));
    }
  }
  sort_unique(out);
  return out;
}

inline std::vector<VertexId> vertex_set(const Subcomplex& Q) {
  std::vector<VertexId> w;
  for (const auto& s : Q) w.insert(w.end(), s.begin(), s.end());
  std::sort(w.begin(), w.end());
  w.erase(std::unique(w.begin(), w.end()), w.end());
  return w;
}

inline bool intersects_sorted(const SimplexKey& a, const std::vector<VertexId>& sorted_set) {
  for (VertexId v : a)
    if (std::binary_search(sorted_set.begin(), sorted_set.end(), v)) return true;
  return false;
}

/// All simplices adjacent to the subcomplex Q (sharing a face, equivalently
/// a vertex, with some simplex of Q). Not closed under faces.
inline Subcomplex adjacent_simplices(const SimplicialComplex& K, const Subcomplex& Q) {
  const auto W = vertex_set(closure(Q));
  std::vector<std::uint32_t> max_idx;
  for (VertexId v : W)
    for (std::uint32_t i : K.maximal_at_vertex(v)) max_idx.push_back(i);
  std::sort(max_idx.begin(), max_idx.end());
  max_idx.erase(std::unique(max_idx.begin(), max_idx.end()), max_idx.end());
  Subcomplex out;
  for (std::uint32_t i : max_idx) {
    const SimplexKey& M = K.maximal()[i];
    const std::size_t n = M.size();
    for (std::size_t mask = 1; mask < (1u << n); ++mask) {
      SimplexKey f;
      for (std::size_t j = 0; j < n; ++j)
        if (mask & (1u << j)) f.push_back(M[j]);
      if (intersects_sorted(f, W)) out.push_back(std::move(f));
    }
  }
  sort_unique(out);
  return out;
}

/// Star of Q: all adjacent simplices together with their faces (a subcomplex).
inline Subcomplex star(const SimplicialComplex& K, const Subcomplex& Q) {
  return closure(adjacent_simplices(K, Q));
}

/// Ring of Q: closure of star(Q) minus Q.
inline Subcomplex ring(const SimplicialComplex& K, const Subcomplex& Q) {
  const Subcomplex qc = closure(Q);
  Subcomplex diff;
  for (const auto& s : star(K, Q))
    if (!subcomplex_contains(qc, s)) diff.push_back(s);
  return closure(diff);
}

/// Maximal subcomplex contained in a region. Exact for regions treated as
/// convex (vertex containment suffices); otherwise vertex + barycentric grid
/// samples are tested and `exact` comes back false.
inline Subcomplex max_subcomplex_in(const SimplicialComplex& K, const Region& U,
                                    bool* exact = nullptr) {
  const bool convex = U.treat_as_convex();
  if (exact) *exact = convex;
  std::vector<char> vert_in(K.vertex_count(), 0);
  for (VertexId v = 0; v < K.vertex_count(); ++v) vert_in[v] = U.contains(K.vertex(v)) ? 1 : 0;
  Subcomplex out;
  for (const auto& s : K.all_simplices_sorted()) {
    bool in = true;
    for (VertexId v : s)
      if (!vert_in[v]) { in = false; break; }
    if (in && !convex && s.size() > 1) {
      // Probe interior points on the denominator-4 barycentric grid.
      const Mat P = K.points_of(s);
      const int m = static_cast<int>(s.size()) - 1;
      std::vector<int> a(m + 1, 0);
      std::function<bool(int, int)> rec = [&](int pos, int left) -> bool {
        if (pos == m) {
          a[m] = left;
          Vec x = Vec::Zero(K.ambient_dim());
          for (int i = 0; i <= m; ++i) x += (a[i] / 4.0) * P.col(i);
          return U.contains(x);
        }
        for (int k = 0; k <= left; ++k) {
          a[pos] = k;
          if (!rec(pos + 1, left - k)) return false;
        }
        return true;
      };
      in = rec(0, 4);
    }
    if (in) out.push_back(s);
  }
  sort_unique(out);
  return out;
}

/// Combinatorial niceness test: for every simplex adjacent to K', its
/// K'-vertices must span a face that belongs to K'.
inline bool is_nice(const SimplicialComplex& K, const Subcomplex& Kp) {
  const Subcomplex kpc = closure(Kp);
  if (kpc.empty()) return true;
  std::vector<VertexId> W;
  for (const auto& s : kpc)
    if (s.size() == 1) W.push_back(s[0]);
  std::sort(W.begin(), W.end());
  for (const auto& t : adjacent_simplices(K, kpc)) {
    SimplexKey span;
    for (VertexId v : t)
      if (std::binary_search(W.begin(), W.end(), v)) span.push_back(v);
    if (span.empty()) continue;
    if (!subcomplex_contains(kpc, span)) return false;
  }
  return true;
}

/// Definitional niceness: for every simplex in star(K'), the set of its
/// faces lying in K' must be exactly the face set of a single face.
inline bool is_nice_definitional(const SimplicialComplex& K, const Subcomplex& Kp) {
  const Subcomplex kpc = closure(Kp);
  if (kpc.empty()) return true;
  for (const auto& t : star(K, kpc)) {
    std::vector<SimplexKey> in_kp;
    const std::size_t n = t.size();
    for (std::size_t mask = 1; mask < (1u << n); ++mask) {
      SimplexKey f;
      for (std::size_t i = 0; i < n; ++i)
        if (mask & (1u << i)) f.push_back(t[i]);
      if (subcomplex_contains(kpc, f)) in_kp.push_back(std::move(f));
    }
    if (in_kp.empty()) continue;
    // The unique maximal element must contain all others.
    const SimplexKey* top = &in_kp[0];
    for (const auto& f : in_kp)
      if (f.size() > top->size()) top = &f;
    for (const auto& f : in_kp) {
      bool sub = std::includes(top->begin(), top->end(), f.begin(), f.end());
      if (!sub) return false;
    }
  }
  return true;
}

}  // namespace jiggle
