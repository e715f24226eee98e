#pragma once

/// \file linearization.hpp
/// Turning smooth maps into piecewise linear ones over dyadic subdivisions:
/// global secant linearization and the relative variant that preserves an
/// already-linear map on a subcomplex while blending across a collar.

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "complex.hpp"
#include "piecewise_map.hpp"
#include "region.hpp"
#include "subdivision.hpp"

namespace jiggle {

/// Secant approximation: subdivide the map's complex `levels` times and take
/// the PL map through the samples of f at the new vertex set.
inline PiecewiseMap linearize(const PiecewiseMap& f, int levels) {
  auto fine = std::make_shared<SimplicialComplex>(crystalline_subdivide(f.complex(), levels));
  std::vector<Vec> vals;
  vals.reserve(fine->vertex_count());
  const SimplicialComplex& K = f.complex();
  for (VertexId v = 0; v < fine->vertex_count(); ++v) {
    const Vec& x = fine->vertex(v);
    auto t = locate_top(K, x);
    if (!t) throw std::logic_error("linearize: subdivision vertex escaped the polyhedron");
    vals.push_back(f.evaluate_on(*t, x));
  }
  return PiecewiseMap::pl(std::move(fine), f.target_dim(), std::move(vals));
}

/// Secant linearization of a smooth function over a fresh complex.
inline PiecewiseMap linearize(std::shared_ptr<const SimplicialComplex> K, const SmoothMap& s,
                              int levels) {
  return linearize(PiecewiseMap::smooth(std::move(K), s), levels);
}

namespace lin_detail {

/// Tops of K whose closed cell meets the closed subpolyhedron spanned by the
/// given root vertex set (shared vertex, detected on the subdivided complex
/// by membership of all cell vertices... here: cells all of whose vertices
/// descend from the subcomplex are "inside"; cells with some but not all are
/// "ring").
struct ZoneSplit {
  std::vector<char> inside;  // per top: every vertex in the zone
  std::vector<char> ring;    // per top: some but not all vertices in the zone
};

inline ZoneSplit split_by_vertex_zone(const SimplicialComplex& K,
                                      const std::vector<char>& vert_in_zone) {
  ZoneSplit z;
  z.inside.assign(K.tops().size(), 0);
  z.ring.assign(K.tops().size(), 0);
  for (std::uint32_t t = 0; t < K.tops().size(); ++t) {
    bool all = true, any = false;
    for (VertexId v : K.tops()[t]) {
      if (vert_in_zone[v])
        any = true;
      else
        all = false;
    }
    z.inside[t] = (all && any) ? 1 : 0;
    z.ring[t] = (any && !all) ? 1 : 0;
  }
  return z;
}

}  // namespace lin_detail

/// Linearize f only near a subcomplex: on tops inside the open sets U_i the
/// result is the secant PL map at level `levels`; outside their union the
/// original pieces survive; on cells crossing the frontier of each U_i the
/// old and new maps are blended by the join parameter so the result is
/// continuous. Requires every top meeting |sub| to lie inside some U_i
/// ("levels too small" if subdivided cells still cross a U_i frontier while
/// touching |sub|, "cover does not reach the subcomplex" if containment
/// fails outright).
inline PiecewiseMap linearize_relative(const PiecewiseMap& f,
                                       const std::vector<SimplexKey>& sub_tops,
                                       const std::vector<Region>& cover, int levels) {
  if (sub_tops.empty()) return f;
  if (cover.empty()) throw std::invalid_argument("linearize_relative: empty cover");
  if (levels < 0) throw std::invalid_argument("linearize_relative: negative level");
  const SimplicialComplex& K0 = f.complex();
  for (const SimplexKey& s : sub_tops)
    if (!K0.contains(s)) throw std::invalid_argument("linearize_relative: subcomplex not in complex");

  auto fine = std::make_shared<SimplicialComplex>(crystalline_subdivide(K0, levels));
  const SimplicialComplex& K = *fine;

  // Global secant values at the fine vertices.
  std::vector<Vec> lin_vals(K.vertex_count());
  std::vector<std::uint32_t> parent_top(K.vertex_count());
  for (VertexId v = 0; v < K.vertex_count(); ++v) {
    auto t = locate_top(K0, K.vertex(v));
    if (!t) throw std::logic_error("linearize_relative: vertex escaped the polyhedron");
    parent_top[v] = *t;
    lin_vals[v] = f.evaluate_on(*t, K.vertex(v));
  }

  // Zone of the subcomplex: fine vertices lying in some listed closed cell.
  std::vector<char> in_sub(K.vertex_count(), 0);
  for (VertexId v = 0; v < K.vertex_count(); ++v) {
    for (const SimplexKey& s : sub_tops)
      if (point_in_simplex(K0.points_of(s), K.vertex(v))) {
        in_sub[v] = 1;
        break;
      }
  }

  PiecewiseMap out = PiecewiseMap::pl(fine, f.target_dim(), lin_vals);
  if (f.is_pl() && f.complex().signature() == K.signature()) return out;

  // Start from the original map's pieces; then make cells affine or blended
  // one U_i at a time.
  enum class State : char { Original, Linear, Blended };
  std::vector<State> state(K.tops().size(), State::Original);
  std::vector<SmoothMap> piece(K.tops().size());
  for (std::uint32_t t = 0; t < K.tops().size(); ++t) {
    const std::uint32_t pt = parent_top[K.tops()[t][0]];
    if (f.piece_is_affine(pt)) {
      state[t] = State::Linear;  // affine pieces agree with their secants
    } else {
      piece[t] = f.smooth_piece(pt);
    }
  }
  // Vertices where the current map still follows the original smooth pieces
  // must not be assigned linear values; track which cells each pass touches.
  for (const Region& U : cover) {
    std::vector<char> vin(K.vertex_count(), 0);
    for (VertexId v = 0; v < K.vertex_count(); ++v) vin[v] = U.contains(K.vertex(v)) ? 1 : 0;
    auto zones = lin_detail::split_by_vertex_zone(K, vin);
    for (std::uint32_t t = 0; t < K.tops().size(); ++t) {
      if (zones.inside[t]) {
        state[t] = State::Linear;
        continue;
      }
      if (!zones.ring[t] || state[t] == State::Linear) continue;
      // Blend the cell's current map toward the secant: linear on the inner
      // face (vertices in U), unchanged on the outer face. Earlier blends
      // are blended again so faces shared with newly linear cells conform.
      const SimplexKey& s = K.tops()[t];
      std::vector<int> inner, outer;
      for (std::size_t i = 0; i < s.size(); ++i)
        (vin[s[i]] ? inner : outer).push_back(static_cast<int>(i));
      const Mat P = K.points_of(s);
      // affine map through the secant values of the whole cell
      std::vector<int> rest(static_cast<int>(s.size()) - 1);
      for (std::size_t i = 0; i < rest.size(); ++i) rest[i] = static_cast<int>(i) + 1;
      std::vector<Vec> rest_vals;
      for (int i : rest) rest_vals.push_back(lin_vals[s[static_cast<std::size_t>(i)]]);
      const SmoothMap lin_side = join_map(P, {0}, rest, {lin_vals[s[0]]}, rest_vals);
      piece[t] = interpolate(P, outer, inner, lin_side, piece[t]);
      state[t] = State::Blended;
    }
  }

  // Sanity: anything still Original must not touch the subcomplex zone.
  for (std::uint32_t t = 0; t < K.tops().size(); ++t) {
    if (state[t] == State::Linear) continue;
    for (VertexId v : K.tops()[t]) {
      if (!in_sub[v]) continue;
      if (state[t] == State::Original)
        throw std::invalid_argument("linearize_relative: cover does not reach the subcomplex");
      throw std::invalid_argument(
          "linearize_relative: level too small, blend cells touch the subcomplex");
    }
  }

  for (std::uint32_t t = 0; t < K.tops().size(); ++t) {
    if (state[t] == State::Linear) continue;
    out.set_smooth_piece(t, piece[t]);
    // keep vertex values consistent with the piece at its own vertices
  }
  // Vertex values of blended/original cells: the PL table only matters for
  // affine cells, but shared vertices must agree; recompute every vertex
  // value from an owning piece for consistency (linear cells keep secants).
  for (std::uint32_t t = 0; t < K.tops().size(); ++t) {
    if (state[t] == State::Linear) continue;
    for (VertexId v : K.tops()[t]) out.set_vertex_value(v, out.evaluate_on(t, K.vertex(v)));
  }
  return out;
}

}  // namespace jiggle
