#pragma once

/// \file subdivision.hpp
/// Crystalline (Kuhn/Freudenthal) subdivision of ordered simplicial
/// complexes, cone-off refinement, the two-scale localized subdivision used
/// to keep a neighborhood of a region untouched, the catalog of model cells,
/// and nice covers.
///
/// Every derived vertex is identified by an exact rational barycentric key
/// over the root vertices, so cells produced from different root simplices
/// (or in different refinement rounds) agree on shared faces by construction.

#include <algorithm>
#include <cassert>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "coloring.hpp"
#include "complex.hpp"
#include "keys.hpp"
#include "rational.hpp"
#include "region.hpp"
#include "simplex_geometry.hpp"

namespace jiggle {

namespace subdiv_detail {

using IVec = std::vector<std::int64_t>;
using Perm = std::vector<std::int8_t>;

inline std::vector<Perm> all_perms(int m) {
  Perm p(m);
  for (int i = 0; i < m; ++i) p[i] = static_cast<std::int8_t>(i);
  std::vector<Perm> out;
  do {
    out.push_back(p);
  } while (std::next_permutation(p.begin(), p.end()));
  return out;
}

/// Vertices w_0..w_m of the cell (cube, perm) on the integer grid at the
/// cell's own resolution: w_0 = cube, w_j = w_{j-1} + e_{perm[m-j]}.
inline std::vector<IVec> cell_vertex_grid(const IVec& cube, const Perm& perm) {
  const int m = static_cast<int>(cube.size());
  std::vector<IVec> w(m + 1, cube);
  for (int j = 1; j <= m; ++j) {
    w[j] = w[j - 1];
    w[j][perm[m - j]] += 1;
  }
  return w;
}

/// Whether grid point y (at `scale` subdivisions per unit of the cell's own
/// grid) lies in the closed cell (cube, perm). Exact integer test.
inline bool grid_point_in_cell(const IVec& y, const IVec& cube, const Perm& perm,
                               std::int64_t scale) {
  const int m = static_cast<int>(cube.size());
  IVec f(m);
  for (int k = 0; k < m; ++k) {
    f[k] = y[k] - cube[k] * scale;
    if (f[k] < 0 || f[k] > scale) return false;
  }
  for (int j = m - 1; j > 0; --j)
    if (f[perm[j]] < f[perm[j - 1]]) return false;
  return true;
}

/// Barycentric key of a grid point of a root simplex. `y` has m entries at
/// resolution `denom`; the weight of root vertex j is the j-th difference of
/// the padded partial-sum sequence 0, y_0, ..., y_{m-1}, denom read backwards
/// (vertex 0 maps to the all-ones corner of the order region).
inline BarycentricKey grid_point_key(const SimplexKey& root_top, const IVec& y,
                                     std::int64_t denom) {
  const int m = static_cast<int>(y.size());
  std::vector<std::pair<VertexId, Rat>> terms;
  terms.reserve(m + 1);
  for (int j = 0; j <= m; ++j) {
    const std::int64_t lo = (j == 0) ? 0 : y[j - 1];
    const std::int64_t hi = (j == m) ? denom : y[j];
    if (hi != lo) terms.emplace_back(root_top[j], Rat(hi - lo, denom));
  }
  return make_barycentric_key(std::move(terms));
}

/// All grid points of the closed cell (cube, perm) after `extra` more dyadic
/// levels, in coordinate-lexicographic order.
inline std::vector<IVec> cell_grid_points(const IVec& cube, const Perm& perm, int extra) {
  const int m = static_cast<int>(cube.size());
  const std::int64_t scale = std::int64_t{1} << extra;
  std::vector<IVec> out;
  IVec y(m);
  for (int k = 0; k < m; ++k) y[k] = cube[k] * scale;
  while (true) {
    if (grid_point_in_cell(y, cube, perm, scale)) out.push_back(y);
    int k = m - 1;
    while (k >= 0 && y[k] == cube[k] * scale + scale) {
      y[k] = cube[k] * scale;
      --k;
    }
    if (k < 0) break;
    y[k] += 1;
  }
  return out;
}

/// The 2^{extra*m} cells of (cube, perm) after `extra` more dyadic levels,
/// in (subcube, permutation) lexicographic order.
inline std::vector<std::pair<IVec, Perm>> child_cells(const IVec& cube, const Perm& perm,
                                                      int extra) {
  const int m = static_cast<int>(cube.size());
  const std::int64_t scale = std::int64_t{1} << extra;
  const std::vector<Perm> perms = all_perms(m);
  std::vector<std::pair<IVec, Perm>> out;
  IVec c(m);
  for (int k = 0; k < m; ++k) c[k] = cube[k] * scale;
  while (true) {
    for (const Perm& p : perms) {
      const std::vector<IVec> w = cell_vertex_grid(c, p);
      bool inside = true;
      for (const IVec& v : w)
        if (!grid_point_in_cell(v, cube, perm, scale)) {
          inside = false;
          break;
        }
      if (inside) out.emplace_back(c, p);
    }
    int k = m - 1;
    while (k >= 0 && c[k] == cube[k] * scale + scale - 1) {
      c[k] = cube[k] * scale;
      --k;
    }
    if (k < 0) break;
    c[k] += 1;
  }
  std::uint64_t expected = 1;
  for (int k = 0; k < m; ++k) expected *= static_cast<std::uint64_t>(scale);
  if (out.size() != expected)
    throw std::logic_error("child cell enumeration miscounted: got " +
                           std::to_string(out.size()) + ", expected " +
                           std::to_string(expected));
  return out;
}

/// Shared machinery for subdividing the boundary faces of a cell that sits
/// next to refined cells. `intern` resolves an exact barycentric key to a
/// vertex id, `is_fine` says whether a face is currently a face of a refined
/// cell, and `memo` freezes each face's pattern once it is nontrivial so
/// later rounds reproduce it verbatim.
struct PatternContext {
  std::function<VertexId(const BarycentricKey&)> intern;
  std::function<BarycentricKey(VertexId)> key_of;
  std::function<bool(const SimplexKey&)> is_fine;
  std::map<SimplexKey, std::vector<SimplexKey>> memo;
};

inline BarycentricKey face_barycenter_key(PatternContext& ctx, const SimplexKey& face) {
  std::vector<BarycentricKey> keys;
  keys.reserve(face.size());
  for (VertexId v : face) keys.push_back(ctx.key_of(v));
  std::vector<std::pair<Rat, const BarycentricKey*>> parts;
  parts.reserve(keys.size());
  const Rat w(1, static_cast<std::int64_t>(face.size()));
  for (const auto& k : keys) parts.emplace_back(w, &k);
  return combine_keys(parts);
}

/// One dyadic level of subdivision of a single face, with the face's own
/// vertices (ascending id order) as the reference frame. For faces of
/// dimension <= 2 the result is order-independent (midpoints, medial
/// triangles), which is what makes patterns from both sides of a shared face
/// coincide exactly.
inline std::vector<SimplexKey> iota_pattern(PatternContext& ctx, const SimplexKey& face) {
  const int d = static_cast<int>(face.size()) - 1;
  std::vector<BarycentricKey> corner;
  corner.reserve(d + 1);
  for (VertexId v : face) corner.push_back(ctx.key_of(v));
  const IVec zero(d, 0);
  Perm ident(d);
  for (int i = 0; i < d; ++i) ident[i] = static_cast<std::int8_t>(i);
  std::vector<SimplexKey> out;
  for (const auto& [c, p] : child_cells(zero, ident, 1)) {
    SimplexKey cell;
    cell.reserve(d + 1);
    for (const IVec& w : cell_vertex_grid(c, p)) {
      std::vector<std::pair<Rat, const BarycentricKey*>> parts;
      for (int j = 0; j <= d; ++j) {
        const std::int64_t lo = (j == 0) ? 0 : w[j - 1];
        const std::int64_t hi = (j == d) ? 2 : w[j];
        if (hi != lo) parts.emplace_back(Rat(hi - lo, 2), &corner[j]);
      }
      cell.push_back(ctx.intern(combine_keys(parts)));
    }
    std::sort(cell.begin(), cell.end());
    out.push_back(std::move(cell));
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Current subdivision pattern of a face: itself if untouched, the one-level
/// pattern if it is a face of a refined cell, otherwise the cone over its
/// facets' patterns. Only nontrivial results are memoized, so a face that is
/// still plain can pick up a pattern in a later round, while a face that has
/// one keeps it forever.
inline std::vector<SimplexKey> pattern_cells(PatternContext& ctx, const SimplexKey& face) {
  if (face.size() == 1) return {face};
  if (auto it = ctx.memo.find(face); it != ctx.memo.end()) return it->second;
  if (ctx.is_fine(face)) {
    auto cells = iota_pattern(ctx, face);
    ctx.memo.emplace(face, cells);
    return cells;
  }
  const std::size_t n = face.size();
  std::vector<std::vector<SimplexKey>> sub(n);
  bool changed = false;
  for (std::size_t skip = 0; skip < n; ++skip) {
    SimplexKey g;
    g.reserve(n - 1);
    for (std::size_t i = 0; i < n; ++i)
      if (i != skip) g.push_back(face[i]);
    sub[skip] = pattern_cells(ctx, g);
    if (sub[skip].size() != 1 || sub[skip][0] != g) changed = true;
  }
  if (!changed) return {face};
  const VertexId apex = ctx.intern(face_barycenter_key(ctx, face));
  std::vector<SimplexKey> out;
  for (std::size_t skip = 0; skip < n; ++skip)
    for (const SimplexKey& cell : sub[skip]) {
      SimplexKey s = cell;
      s.push_back(apex);
      std::sort(s.begin(), s.end());
      out.push_back(std::move(s));
    }
  std::sort(out.begin(), out.end());
  ctx.memo.emplace(face, out);
  return out;
}

/// Cone a whole cell off at its barycenter, joining the apex with each
/// facet's current pattern. Used for ring cells, which are coned whether or
/// not their boundary was touched.
inline std::vector<SimplexKey> cone_cell(PatternContext& ctx, const SimplexKey& cell) {
  const std::size_t n = cell.size();
  std::vector<std::vector<SimplexKey>> sub(n);
  for (std::size_t skip = 0; skip < n; ++skip) {
    SimplexKey g;
    g.reserve(n - 1);
    for (std::size_t i = 0; i < n; ++i)
      if (i != skip) g.push_back(cell[i]);
    sub[skip] = pattern_cells(ctx, g);
  }
  const VertexId apex = ctx.intern(face_barycenter_key(ctx, cell));
  std::vector<SimplexKey> out;
  for (std::size_t skip = 0; skip < n; ++skip)
    for (const SimplexKey& f : sub[skip]) {
      SimplexKey s = f;
      s.push_back(apex);
      std::sort(s.begin(), s.end());
      out.push_back(std::move(s));
    }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace subdiv_detail

/// Uniform dyadic subdivision: every top cell is replaced by its 2^{levels*m}
/// children, with vertices shared exactly across cell boundaries. Vertex
/// order: all input vertices first, then new vertices per top cell (tops in
/// sorted order) in dyadic-coordinate lexicographic order, first occurrence
/// wins.
inline SimplicialComplex crystalline_subdivide(const SimplicialComplex& K, int levels) {
  using namespace subdiv_detail;
  if (levels < 0) throw std::invalid_argument("subdivision level must be nonnegative");
  if (!K.pure()) throw std::invalid_argument("subdivision requires a pure complex");
  if (levels == 0 || K.top_dim() == 0) return K;

  ComplexBuilder b(K.ambient_dim(), K.root_signature(), K.signature(), K.root_vertex_count());
  for (VertexId v = 0; v < K.vertex_count(); ++v) b.add_vertex(K.vertex_key(v), K.vertex(v));

  auto coords_of = [&](const BarycentricKey& key) {
    Vec x = Vec::Zero(K.ambient_dim());
    for (const auto& [v, w] : key) x += w.to_double() * b.coords(v);
    return x;
  };

  for (std::uint32_t t = 0; t < K.tops().size(); ++t) {
    const TopLineage& lin = K.lineage(t);
    if (lin.coned)
      throw std::invalid_argument("cannot dyadically subdivide a coned cell");
    const IVec cube(lin.cube.begin(), lin.cube.end());
    const std::int64_t denom = std::int64_t{1} << (lin.level + levels);
    for (const IVec& y : cell_grid_points(cube, lin.perm, levels)) {
      const BarycentricKey key = grid_point_key(lin.root_top, y, denom);
      b.add_vertex(key, coords_of(key));
    }
    for (const auto& [c, p] : child_cells(cube, lin.perm, levels)) {
      SimplexKey cell;
      for (const IVec& w : cell_vertex_grid(c, p)) {
        const BarycentricKey key = grid_point_key(lin.root_top, w, denom);
        cell.push_back(b.add_vertex(key, coords_of(key)));
      }
      TopLineage nl;
      nl.root_top = lin.root_top;
      nl.level = lin.level + levels;
      nl.coned = false;
      nl.cube.assign(c.begin(), c.end());
      nl.perm = p;
      b.add_top(std::move(cell), std::move(nl));
    }
  }
  return b.build();
}

/// Replace one m-simplex by the cone from its barycenter over a given
/// subdivision of its boundary. `points` holds the simplex vertices as
/// columns; `boundary` must be a pure (m-1)-complex whose cells tile the
/// boundary facets (checked by per-facet volume sums). The apex is appended
/// after all boundary vertices.
inline SimplicialComplex cone_off(const Mat& points, const SimplicialComplex& boundary) {
  const int m = static_cast<int>(points.cols()) - 1;
  const int N = static_cast<int>(points.rows());
  if (m < 1) throw std::invalid_argument("cone_off needs a simplex of dimension >= 1");
  if (boundary.ambient_dim() != N)
    throw std::invalid_argument("cone_off: ambient dimension mismatch");
  if (!boundary.pure() || boundary.top_dim() != m - 1)
    throw std::invalid_argument("cone_off: boundary complex must be pure of dimension m-1");
  if (degenerate(points)) throw std::invalid_argument("cone_off: degenerate simplex");

  const double scale = rmax(points);
  const double tol = 1e-7 * std::max(1.0, scale);

  // Affine (barycentric) coordinates of every boundary vertex.
  Mat A(N + 1, m + 1);
  A.topRows(N) = points;
  A.bottomRows(1).setOnes();
  const auto solver = A.colPivHouseholderQr();
  std::vector<Vec> bary(boundary.vertex_count());
  for (VertexId v = 0; v < boundary.vertex_count(); ++v) {
    Vec rhs(N + 1);
    rhs.head(N) = boundary.vertex(v);
    rhs(N) = 1.0;
    bary[v] = solver.solve(rhs);
    if ((A * bary[v] - rhs).norm() > tol)
      throw std::invalid_argument("cone_off: boundary vertex lies outside the simplex");
    for (int j = 0; j <= m; ++j)
      if (bary[v](j) < -tol)
        throw std::invalid_argument("cone_off: boundary vertex lies outside the simplex");
  }

  std::vector<double> facet_vol(m + 1, 0.0);
  for (const SimplexKey& top : boundary.tops()) {
    int facet = -1;
    for (int j = 0; j <= m && facet < 0; ++j) {
      bool zero = true;
      for (VertexId v : top)
        if (std::abs(bary[v](j)) > tol) {
          zero = false;
          break;
        }
      if (zero) facet = j;
    }
    if (facet < 0)
      throw std::invalid_argument("cone_off: boundary cell " + key_str(top) +
                                  " is not contained in a facet");
    facet_vol[facet] += simplex_volume(boundary.points_of(top));
  }
  for (int j = 0; j <= m; ++j) {
    Mat F(N, m);
    int col = 0;
    for (int k = 0; k <= m; ++k)
      if (k != j) F.col(col++) = points.col(k);
    const double want = simplex_volume(F);
    if (std::abs(facet_vol[j] - want) > 1e-9 * std::max(1.0, want))
      throw std::invalid_argument("cone_off: boundary does not tile facet " +
                                  std::to_string(j));
  }

  std::vector<Vec> verts;
  verts.reserve(boundary.vertex_count() + 1);
  for (VertexId v = 0; v < boundary.vertex_count(); ++v) verts.push_back(boundary.vertex(v));
  Vec apex = Vec::Zero(N);
  for (int j = 0; j <= m; ++j) apex += points.col(j);
  apex /= static_cast<double>(m + 1);
  verts.push_back(apex);
  const VertexId apex_id = static_cast<VertexId>(verts.size() - 1);

  std::vector<SimplexKey> tops;
  tops.reserve(boundary.tops().size());
  for (const SimplexKey& t : boundary.tops()) {
    SimplexKey s = t;
    s.push_back(apex_id);
    tops.push_back(std::move(s));
  }
  return SimplicialComplex::from_simplices(N, std::move(verts), tops);
}

// ---------------------------------------------------------------------------
// Model catalog

/// Shape of a cell up to translation and its dyadic scale: the sorted list of
/// root-barycentric vertex vectors, shifted so the lexicographically smallest
/// vertex is at the origin and rescaled by 2^level. Exact rationals, so
/// lookup is a string match.
using NormalForm = std::vector<std::vector<Rat>>;

inline NormalForm normalize_cell_form(std::vector<std::vector<Rat>> verts, int level) {
  const Rat scale(std::int64_t{1} << level);
  const auto lex_less = [](const std::vector<Rat>& a, const std::vector<Rat>& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
  };
  std::size_t mn = 0;
  for (std::size_t i = 1; i < verts.size(); ++i)
    if (lex_less(verts[i], verts[mn])) mn = i;
  const std::vector<Rat> base = verts[mn];
  for (auto& v : verts)
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = (v[j] - base[j]) * scale;
  std::sort(verts.begin(), verts.end(), lex_less);
  return verts;
}

inline std::string normal_form_key(const NormalForm& nf) {
  std::string s;
  for (const auto& v : nf) {
    for (const Rat& r : v) {
      s += r.str();
      s += ',';
    }
    s += ';';
  }
  return s;
}

/// Finite list of cell shapes that can occur in any subdivision produced
/// here: the dyadic path shapes (one per permutation) and every cone shape
/// over a path cell with a downward-closed set of its proper faces one level
/// finer. For m >= 4 only the facet-generated cone patterns are enumerated.
struct ModelCatalog {
  int m = 0;
  std::vector<NormalForm> models;                     // sorted by key
  std::unordered_map<std::string, std::size_t> index; // key -> position in models
  std::vector<NormalForm> path_shapes;                // plain dyadic cells only
  bool facet_generated_only = false;
};

namespace subdiv_detail {

/// Downward-closed sets of proper faces (dimension >= 1) of the (m+1)-vertex
/// cell, as sorted lists of sorted vertex-index keys. For m >= 4 only unions
/// of full facets (closed downward) are produced.
inline std::vector<std::vector<SimplexKey>> fine_face_patterns(int m) {
  std::vector<SimplexKey> faces;  // all proper faces of {0..m}, dim >= 1
  for (std::uint32_t mask = 1; mask < (1u << (m + 1)); ++mask) {
    const int bits = __builtin_popcount(mask);
    if (bits < 2 || bits > m) continue;
    SimplexKey f;
    for (int i = 0; i <= m; ++i)
      if (mask & (1u << i)) f.push_back(static_cast<VertexId>(i));
    faces.push_back(std::move(f));
  }
  std::sort(faces.begin(), faces.end());

  std::vector<std::vector<SimplexKey>> out;
  const auto closed_downward = [&](const std::set<SimplexKey>& s) {
    for (const SimplexKey& f : s) {
      const std::size_t n = f.size();
      for (std::uint32_t mask = 1; mask + 1 < (1u << n); ++mask) {
        if (__builtin_popcount(mask) < 2) continue;
        SimplexKey g;
        for (std::size_t i = 0; i < n; ++i)
          if (mask & (1u << i)) g.push_back(f[i]);
        if (!s.count(g)) return false;
      }
    }
    return true;
  };

  if (m <= 3) {
    const std::size_t n = faces.size();
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
      std::set<SimplexKey> s;
      for (std::size_t i = 0; i < n; ++i)
        if (mask & (std::uint64_t{1} << i)) s.insert(faces[i]);
      if (closed_downward(s)) out.emplace_back(s.begin(), s.end());
    }
  } else {
    // facet-generated only: downward closures of facet subsets
    std::vector<SimplexKey> facets;
    for (const SimplexKey& f : faces)
      if (static_cast<int>(f.size()) == m) facets.push_back(f);
    std::set<std::vector<SimplexKey>> seen;
    for (std::uint32_t mask = 0; mask < (1u << facets.size()); ++mask) {
      std::set<SimplexKey> s;
      for (std::size_t i = 0; i < facets.size(); ++i)
        if (mask & (1u << i)) {
          const SimplexKey& f = facets[i];
          s.insert(f);
          const std::size_t n = f.size();
          for (std::uint32_t sub = 1; sub + 1 < (1u << n); ++sub) {
            if (__builtin_popcount(sub) < 2) continue;
            SimplexKey g;
            for (std::size_t j = 0; j < n; ++j)
              if (sub & (1u << j)) g.push_back(f[j]);
            s.insert(std::move(g));
          }
        }
      std::vector<SimplexKey> v(s.begin(), s.end());
      if (seen.insert(v).second) out.push_back(std::move(v));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace subdiv_detail

/// Catalog of all model cell shapes in dimension m. Cached per dimension.
inline ModelCatalog model_catalog_for_dim(int m) {
  using namespace subdiv_detail;
  if (m < 1 || m > 8) throw std::invalid_argument("model catalog: dimension out of range");
  static std::mutex mu;
  static std::map<int, ModelCatalog> cache;
  std::lock_guard<std::mutex> lock(mu);
  if (auto it = cache.find(m); it != cache.end()) return it->second;

  // Realize each permutation shape inside the staircase subcube
  // (0,1,...,m-1), the smallest address where every path stays inside the
  // order region. Everything is scale/translation invariant, so normal forms
  // computed here match cells at any level.
  int lvl = 0;
  while ((std::int64_t{1} << lvl) < m) ++lvl;
  const std::int64_t denom = std::int64_t{1} << lvl;
  IVec cube(m);
  for (int k = 0; k < m; ++k) cube[k] = k;
  SimplexKey root_ids(m + 1);
  for (int j = 0; j <= m; ++j) root_ids[j] = static_cast<VertexId>(j);

  const auto densify = [&](const BarycentricKey& key) {
    std::vector<Rat> v(m + 1, Rat(0));
    for (const auto& [id, w] : key) v[id] = w;
    return v;
  };

  ModelCatalog cat;
  cat.m = m;
  cat.facet_generated_only = (m >= 4);
  std::set<std::string> seen;
  const auto add_model = [&](const NormalForm& nf, bool path_shape) {
    const std::string key = normal_form_key(nf);
    if (seen.insert(key).second) cat.models.push_back(nf);
    if (path_shape) {
      bool dup = false;
      for (const auto& p : cat.path_shapes)
        if (p == nf) {
          dup = true;
          break;
        }
      if (!dup) cat.path_shapes.push_back(nf);
    }
  };

  const auto patterns = fine_face_patterns(m);
  for (const Perm& p : all_perms(m)) {
    const std::vector<IVec> grid = cell_vertex_grid(cube, p);
    std::vector<BarycentricKey> base_keys;
    std::vector<std::vector<Rat>> base_dense;
    for (const IVec& w : grid) {
      base_keys.push_back(grid_point_key(root_ids, w, denom));
      base_dense.push_back(densify(base_keys.back()));
    }
    add_model(normalize_cell_form(base_dense, lvl), true);

    for (const auto& pattern : patterns) {
      // Fresh local vertex table per pattern run; ids 0..m are the cell's
      // own vertices in path order, so pattern faces (subsets of 0..m) refer
      // to them directly.
      std::vector<BarycentricKey> local_keys = base_keys;
      std::map<BarycentricKey, VertexId> local_index;
      for (VertexId v = 0; v <= static_cast<VertexId>(m); ++v)
        local_index.emplace(local_keys[v], v);
      PatternContext ctx;
      ctx.intern = [&](const BarycentricKey& k) {
        auto it = local_index.find(k);
        if (it != local_index.end()) return it->second;
        const VertexId id = static_cast<VertexId>(local_keys.size());
        local_index.emplace(k, id);
        local_keys.push_back(k);
        return id;
      };
      ctx.key_of = [&](VertexId v) { return local_keys.at(v); };
      std::set<SimplexKey> fine(pattern.begin(), pattern.end());
      ctx.is_fine = [&](const SimplexKey& f) { return fine.count(f) > 0; };

      SimplexKey whole(m + 1);
      for (int j = 0; j <= m; ++j) whole[j] = static_cast<VertexId>(j);
      const auto cells = cone_cell(ctx, whole);
      for (const SimplexKey& cell : cells) {
        std::vector<std::vector<Rat>> dense;
        dense.reserve(cell.size());
        for (VertexId v : cell) dense.push_back(densify(local_keys.at(v)));
        add_model(normalize_cell_form(std::move(dense), lvl), false);
      }
    }
  }

  std::sort(cat.models.begin(), cat.models.end(),
            [](const NormalForm& a, const NormalForm& b) {
              return normal_form_key(a) < normal_form_key(b);
            });
  for (std::size_t i = 0; i < cat.models.size(); ++i)
    cat.index.emplace(normal_form_key(cat.models[i]), i);
  std::sort(cat.path_shapes.begin(), cat.path_shapes.end(),
            [](const NormalForm& a, const NormalForm& b) {
              return normal_form_key(a) < normal_form_key(b);
            });
  return cache.emplace(m, std::move(cat)).first->second;
}

/// Catalog for the dimension of K's top cells.
inline ModelCatalog model_simplices(const SimplicialComplex& K) {
  if (!K.pure()) throw std::invalid_argument("model catalog requires a pure complex");
  return model_catalog_for_dim(K.top_dim());
}

/// Normal form of one top cell, or nullopt if its vertices do not all carry
/// exact coordinates over the recorded root simplex.
inline std::optional<NormalForm> normal_form_of_top(const SimplicialComplex& K,
                                                    std::uint32_t top) {
  const TopLineage& lin = K.lineage(top);
  const SimplexKey& cell = K.tops()[top];
  std::vector<std::vector<Rat>> dense;
  dense.reserve(cell.size());
  for (VertexId v : cell) {
    auto b = K.root_barycentric(v, lin.root_top);
    if (!b) return std::nullopt;
    dense.push_back(std::move(*b));
  }
  return normalize_cell_form(std::move(dense), lin.level);
}

/// Index of the catalog model matching a top cell, or nullopt on a miss.
inline std::optional<std::size_t> match_model(const ModelCatalog& cat,
                                              const SimplicialComplex& K,
                                              std::uint32_t top) {
  auto nf = normal_form_of_top(K, top);
  if (!nf) return std::nullopt;
  auto it = cat.index.find(normal_form_key(*nf));
  if (it == cat.index.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------
// Localized (two-scale) subdivision

/// Exact distance between a convex region with exact projection support and
/// a simplex (alternating projections; closed form for balls).
inline double region_simplex_distance(const Region& A, const Mat& P) {
  switch (A.kind()) {
    case Region::Kind::All:
      return 0.0;
    case Region::Kind::Ball:
      return std::max(0.0, point_simplex_distance(A.ball_center(), P) - A.ball_radius());
    case Region::Kind::Box: {
      Vec x = P.rowwise().mean();
      double prev = std::numeric_limits<double>::infinity();
      for (int it = 0; it < 256; ++it) {
        const Vec y = A.project(x);
        const Vec xn = closest_point_in_simplex(y, P);
        const double d = (xn - y).norm();
        if (std::abs(prev - d) <= 1e-13 * (1.0 + d)) return d;
        prev = d;
        x = xn;
      }
      return prev;
    }
    default:
      throw std::invalid_argument("region-simplex distance needs a ball, box or all region");
  }
}

/// Smallest base level at which every cell within distance `delta` of A has
/// diameter at most delta/2. Diameters over all permutation shapes scale
/// exactly by 1/2 per level, so this is a closed-form bound per root cell.
inline int required_base_level(const SimplicialComplex& K, const Region& A, double delta) {
  using namespace subdiv_detail;
  const int m = K.top_dim();
  int L = 0;
  const auto perms = all_perms(m);
  for (std::uint32_t t = 0; t < K.tops().size(); ++t) {
    const Mat P = K.points_of(K.tops()[t]);
    if (region_simplex_distance(A, P) > delta) continue;
    if (rmax(P) <= 0.5 * delta) continue;  // level 0 suffices for this cell
    // max diameter over unit-scale path cells in this root simplex
    double unit = 0.0;
    for (const Perm& p : perms) {
      Mat pts(P.rows(), m + 1);
      pts.col(0).setZero();
      for (int j = 1; j <= m; ++j) {
        const int a = p[m - j];
        pts.col(j) = pts.col(j - 1) + P.col(a) - P.col(a + 1);
      }
      unit = std::max(unit, rmax(pts));
    }
    int l = 1;
    while (std::ldexp(unit, -l) > 0.5 * delta && l < 62) ++l;
    L = std::max(L, l);
  }
  return L;
}

/// Largest number of top cells a vertex can collect inside the two-scale
/// subdivision of a single m-simplex, whatever the levels. The local
/// structure is always one of: lattice interior (the dyadic-lattice ball,
/// saturated by level 3), a cone apex (bounded by the facet count after at
/// most one facet subdivision per facet), or a zone interface where a vertex
/// sees at most one lattice-ball worth of cells per side of the interface.
/// Cached per dimension; used to report a color bound independent of the
/// far level, and cross-checked against every produced subdivision.
inline int uniform_valence_factor(int m) {
  if (m < 1 || m > 8) throw std::invalid_argument("valence factor: dimension out of range");
  static std::mutex mu;
  static std::map<int, int> cache;
  std::lock_guard<std::mutex> lock(mu);
  if (auto it = cache.find(m); it != cache.end()) return it->second;

  std::vector<Vec> vs;
  vs.push_back(Vec::Zero(m));
  for (int i = 0; i < m; ++i) {
    Vec e = Vec::Zero(m);
    e(i) = 1.0;
    vs.push_back(std::move(e));
  }
  SimplexKey top(m + 1);
  for (int j = 0; j <= m; ++j) top[j] = static_cast<VertexId>(j);
  const int probe_level = m <= 4 ? 3 : 2;  // keep the one-time probe tractable
  const auto probe = crystalline_subdivide(
      SimplicialComplex::from_simplices(m, std::move(vs), {top}), probe_level);
  const int lattice = max_tops_per_vertex(probe);
  const int apex = (m + 1) * (1 << (m - 1));
  const int f = 2 * std::max(lattice, apex);
  cache.emplace(m, f);
  return f;
}

/// Result of the localized subdivision: the refined complex, the model
/// catalog for its dimension, and the a-priori color bound.
struct GeneralizedSubdivision {
  SimplicialComplex complex;
  ModelCatalog catalog;
  long long color_bound = 0;
  int required_level = 0;
};

/// Subdivide K to level l1 away from the region A while cells touching A
/// stay at level l0, with one level of change per concentric shell and coned
/// transition annuli. Cells at distance 0 from A are never refined and never
/// coned, so their vertex coordinates survive verbatim.
///
/// Requires an unsubdivided pure complex, a region with exact distances
/// (ball, box, or everything), and l0 >= the level at which near-A cells
/// have diameter <= delta/2 (the thrown message carries that level).
inline GeneralizedSubdivision generalized_subdivide(const SimplicialComplex& K,
                                                    const Region& A, double delta,
                                                    int l0, int l1) {
  using namespace subdiv_detail;
  if (!K.pure() || K.top_dim() < 1)
    throw std::invalid_argument("localized subdivision requires a pure complex of dimension >= 1");
  if (!K.is_root())
    throw std::invalid_argument("localized subdivision must start from an unsubdivided complex");
  if (!A.supports_distance())
    throw std::invalid_argument("localized subdivision needs a ball, box or all region");
  if (!(delta > 0.0) || !std::isfinite(delta))
    throw std::invalid_argument("delta must be positive");
  if (l0 < 0 || l1 < l0) throw std::invalid_argument("need 0 <= l0 <= l1");

  const int m = K.top_dim();
  const int L = required_base_level(K, A, delta);
  if (l0 < L)
    throw std::invalid_argument("base level " + std::to_string(l0) +
                                " is below the required level " + std::to_string(L) +
                                " for this region and delta");

  ComplexBuilder b(K.ambient_dim(), K.root_signature(), K.signature(), K.root_vertex_count());
  for (VertexId v = 0; v < K.vertex_count(); ++v) b.add_vertex(K.vertex_key(v), K.vertex(v));
  auto coords_of = [&](const BarycentricKey& key) {
    Vec x = Vec::Zero(K.ambient_dim());
    for (const auto& [v, w] : key) x += w.to_double() * b.coords(v);
    return x;
  };

  struct SCell {
    std::uint32_t rt = 0;
    int level = 0;
    bool coned = false;
    IVec cube;
    Perm perm;
    SimplexKey verts;
  };
  std::vector<SCell> soup;

  for (std::uint32_t t = 0; t < K.tops().size(); ++t) {
    const SimplexKey& root = K.tops()[t];
    const IVec zero(m, 0);
    Perm ident(m);
    for (int i = 0; i < m; ++i) ident[i] = static_cast<std::int8_t>(i);
    const std::int64_t denom = std::int64_t{1} << l0;
    for (const IVec& y : cell_grid_points(zero, ident, l0)) {
      const BarycentricKey key = grid_point_key(root, y, denom);
      b.add_vertex(key, coords_of(key));
    }
    for (auto& [c, p] : child_cells(zero, ident, l0)) {
      SCell s;
      s.rt = t;
      s.level = l0;
      s.cube = c;
      s.perm = p;
      for (const IVec& w : cell_vertex_grid(c, p)) {
        const BarycentricKey key = grid_point_key(root, w, denom);
        s.verts.push_back(b.add_vertex(key, coords_of(key)));
      }
      std::sort(s.verts.begin(), s.verts.end());
      soup.push_back(std::move(s));
    }
  }

  PatternContext ctx;
  ctx.intern = [&](const BarycentricKey& k) { return b.add_vertex(k, coords_of(k)); };
  ctx.key_of = [&](VertexId v) { return b.key(v); };

  const auto by_verts = [](const SCell& a, const SCell& c) { return a.verts < c.verts; };

  for (int round = 1; round <= l1 - l0; ++round) {
    const double radius = 0.25 * delta * (1.0 - std::ldexp(1.0, -round));
    std::sort(soup.begin(), soup.end(), by_verts);
    const std::size_t n = soup.size();

    std::vector<char> near(n, 0);
    for (std::size_t j = 0; j < n; ++j) {
      if (soup[j].coned) continue;
      Mat P(K.ambient_dim(), soup[j].verts.size());
      for (std::size_t i = 0; i < soup[j].verts.size(); ++i)
        P.col(static_cast<int>(i)) = b.coords(soup[j].verts[i]);
      near[j] = region_simplex_distance(A, P) <= radius + 1e-12 * (1.0 + delta);
    }

    std::vector<char> guard_vert(b.vertex_count(), 0);
    for (std::size_t j = 0; j < n; ++j)
      if (near[j] || soup[j].coned)
        for (VertexId v : soup[j].verts) guard_vert[v] = 1;

    std::vector<char> refine(n, 0);
    bool any = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (soup[j].coned || near[j]) continue;
      bool guarded = false;
      for (VertexId v : soup[j].verts)
        if (guard_vert[v]) {
          guarded = true;
          break;
        }
      if (!guarded) {
        refine[j] = 1;
        any = true;
        if (soup[j].level != l0 + round - 1)
          throw std::logic_error("refinement front is not level-uniform");
      }
    }
    if (!any) break;  // protection only grows; later rounds would also be empty

    std::unordered_map<VertexId, std::vector<std::uint32_t>> refined_at;
    std::vector<char> refine_vert(b.vertex_count(), 0);
    for (std::size_t j = 0; j < n; ++j)
      if (refine[j])
        for (VertexId v : soup[j].verts) {
          refined_at[v].push_back(static_cast<std::uint32_t>(j));
          refine_vert[v] = 1;
        }
    ctx.is_fine = [&](const SimplexKey& f) {
      auto it = refined_at.find(f[0]);
      if (it == refined_at.end()) return false;
      for (std::uint32_t j : it->second)
        if (std::includes(soup[j].verts.begin(), soup[j].verts.end(), f.begin(), f.end()))
          return true;
      return false;
    };

    std::vector<SCell> next;
    next.reserve(n * 2);
    for (std::size_t j = 0; j < n; ++j) {
      if (!refine[j]) continue;
      const SCell& s = soup[j];
      const SimplexKey& root = K.tops()[s.rt];
      const std::int64_t denom = std::int64_t{1} << (s.level + 1);
      for (const IVec& y : cell_grid_points(s.cube, s.perm, 1)) {
        const BarycentricKey key = grid_point_key(root, y, denom);
        b.add_vertex(key, coords_of(key));
      }
      for (auto& [c, p] : child_cells(s.cube, s.perm, 1)) {
        SCell cs;
        cs.rt = s.rt;
        cs.level = s.level + 1;
        cs.cube = c;
        cs.perm = p;
        for (const IVec& w : cell_vertex_grid(c, p)) {
          const BarycentricKey key = grid_point_key(root, w, denom);
          cs.verts.push_back(b.add_vertex(key, coords_of(key)));
        }
        std::sort(cs.verts.begin(), cs.verts.end());
        next.push_back(std::move(cs));
      }
    }

    for (std::size_t j = 0; j < n; ++j) {
      if (refine[j]) continue;
      bool ring = false;
      for (VertexId v : soup[j].verts)
        if (refine_vert[v]) {
          ring = true;
          break;
        }
      if (!ring) {
        next.push_back(std::move(soup[j]));
        continue;
      }
      if (soup[j].coned)
        throw std::logic_error("coned cell adjacent to refinement; guard zone breached");
      for (const SimplexKey& cell : cone_cell(ctx, soup[j].verts)) {
        SCell cs;
        cs.rt = soup[j].rt;
        cs.level = soup[j].level;
        cs.coned = true;
        cs.cube = soup[j].cube;
        cs.perm = soup[j].perm;
        cs.verts = cell;
        next.push_back(std::move(cs));
      }
    }
    soup.swap(next);
  }

  std::sort(soup.begin(), soup.end(), by_verts);
  for (const SCell& s : soup) {
    TopLineage lin;
    lin.root_top = K.tops()[s.rt];
    lin.level = s.level;
    lin.coned = s.coned;
    lin.cube.assign(s.cube.begin(), s.cube.end());
    lin.perm = s.perm;
    b.add_top(s.verts, std::move(lin));
  }

  GeneralizedSubdivision out{b.build(), model_catalog_for_dim(m), 0, L};
  // The reported bound must not depend on l1, so it is built from the root
  // valence and the per-cell uniform factor rather than from a measurement
  // of this particular output. The measurement only cross-checks it.
  const long long valence =
      static_cast<long long>(uniform_valence_factor(m)) * max_tops_per_vertex(K);
  if (max_tops_per_vertex(out.complex) > valence)
    throw std::logic_error("localized subdivision exceeded its uniform valence bound: " +
                           std::to_string(max_tops_per_vertex(out.complex)) + " > " +
                           std::to_string(valence));
  out.color_bound = color_bound_generalized(m, valence);
  return out;
}

// ---------------------------------------------------------------------------
// Nice covers

/// A refinement level together with the per-region nice subcomplexes.
struct NiceCover {
  int level = 0;
  SimplicialComplex complex;
  std::vector<Subcomplex> pieces;
};

/// Subdivide K until every top cell lies in the subcomplex carved out by
/// some cover region and each such subcomplex is nice. Throws if the cover
/// misses part of |K| or no level up to max_level works.
inline NiceCover nice_cover(const SimplicialComplex& K, const std::vector<Region>& cover,
                            int max_level = 12) {
  if (cover.empty()) throw std::invalid_argument("nice_cover: empty cover");
  for (const Region& r : cover)
    if (!r.treat_as_convex())
      throw std::invalid_argument("nice_cover: regions must be convex");

  for (int level = 0; level <= max_level; ++level) {
    SimplicialComplex Kl = crystalline_subdivide(K, level);
    std::vector<Subcomplex> pieces;
    pieces.reserve(cover.size());
    for (const Region& r : cover) pieces.push_back(max_subcomplex_in(Kl, r));

    bool covered = true;
    for (const SimplexKey& t : Kl.tops()) {
      bool hit = false;
      for (const auto& p : pieces)
        if (subcomplex_contains(p, t)) {
          hit = true;
          break;
        }
      if (!hit) {
        covered = false;
        break;
      }
    }
    if (!covered) continue;

    bool all_nice = true;
    for (const auto& p : pieces)
      if (!p.empty() && !is_nice(Kl, p)) {
        all_nice = false;
        break;
      }
    if (all_nice) return {level, std::move(Kl), std::move(pieces)};
  }
  throw std::runtime_error("insufficient Lebesgue margin: no nice refinement up to level " +
                           std::to_string(max_level));
}

// ---------------------------------------------------------------------------
// Plans

/// A reproducible description of one subdivision step.
struct SubdivisionPlan {
  enum class Kind { Crystalline, Generalized };
  Kind kind = Kind::Crystalline;
  int level = 0;               // crystalline
  Region region = Region::all();  // generalized
  double delta = 1.0;
  int l0 = 0;
  int l1 = 0;
};

inline SimplicialComplex apply_plan(const SimplicialComplex& K, const SubdivisionPlan& p) {
  switch (p.kind) {
    case SubdivisionPlan::Kind::Crystalline:
      return crystalline_subdivide(K, p.level);
    case SubdivisionPlan::Kind::Generalized:
      return generalized_subdivide(K, p.region, p.delta, p.l0, p.l1).complex;
  }
  throw std::logic_error("unknown subdivision plan kind");
}

}  // namespace jiggle
