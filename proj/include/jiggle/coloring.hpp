#pragma once

#include <algorithm>
#include <vector>

#include "complex.hpp"

namespace jiggle {

struct Coloring {
  std::vector<int> colors;  ///< one entry per top, indexed like K.tops()
  int count = 0;
};

/// Neighbour lists in the 1-skeleton (edges of the complex).
inline std::vector<std::vector<VertexId>> skeleton_adjacency(const SimplicialComplex& K) {
  std::vector<std::vector<VertexId>> adj(K.vertex_count());
  for (const auto& s : K.all_simplices_sorted()) {
    if (s.size() != 2) continue;
    adj[s[0]].push_back(s[1]);
    adj[s[1]].push_back(s[0]);
  }
  for (auto& a : adj) {
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
  }
  return adj;
}

namespace detail {

/// Closed edge-neighbourhood of a top's vertex set. Two tops interact
/// (some simplex is adjacent to both) exactly when one's vertex set meets
/// the other's ball.
inline std::vector<VertexId> interaction_ball(const SimplexKey& top,
                                              const std::vector<std::vector<VertexId>>& adj) {
  std::vector<VertexId> ball(top.begin(), top.end());
  for (VertexId v : top) ball.insert(ball.end(), adj[v].begin(), adj[v].end());
  std::sort(ball.begin(), ball.end());
  ball.erase(std::unique(ball.begin(), ball.end()), ball.end());
  return ball;
}

inline std::vector<std::uint32_t> interacting_tops(const SimplicialComplex& K, std::uint32_t t,
                                                   const std::vector<std::vector<VertexId>>& adj) {
  const auto ball = interaction_ball(K.tops()[t], adj);
  std::vector<std::uint32_t> out;
  for (VertexId v : ball)
    for (std::uint32_t j : K.tops_at_vertex(v)) out.push_back(j);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  out.erase(std::remove(out.begin(), out.end(), t), out.end());
  return out;
}

}  // namespace detail

/// Whether two top simplices interact: some simplex of K is adjacent
/// (shares a vertex) with both. Equivalent to their vertex sets being at
/// distance at most 2 in the 1-skeleton.
inline bool tops_interact(const SimplicialComplex& K, const SimplexKey& a, const SimplexKey& b) {
  const auto adj = skeleton_adjacency(K);
  const auto ball = detail::interaction_ball(a, adj);
  return intersects_sorted(b, ball);
}

/// Greedy colouring of the top simplices in their sorted order: tops that
/// interact receive distinct colours, so simplices of equal colour never
/// share a vertex and are not bridged by a single simplex.
inline Coloring greedy_color(const SimplicialComplex& K) {
  const auto adj = skeleton_adjacency(K);
  Coloring col;
  col.colors.assign(K.tops().size(), -1);
  for (std::uint32_t t = 0; t < K.tops().size(); ++t) {
    std::vector<char> used;
    for (std::uint32_t j : detail::interacting_tops(K, t, adj)) {
      const int c = col.colors[j];
      if (c < 0) continue;
      if (static_cast<std::size_t>(c) >= used.size()) used.resize(c + 1, 0);
      used[c] = 1;
    }
    int c = 0;
    while (static_cast<std::size_t>(c) < used.size() && used[c]) ++c;
    col.colors[t] = c;
    col.count = std::max(col.count, c + 1);
  }
  return col;
}

/// Checks that every interacting pair of tops has distinct colours.
inline bool coloring_valid(const SimplicialComplex& K, const Coloring& col) {
  if (col.colors.size() != K.tops().size()) return false;
  const auto adj = skeleton_adjacency(K);
  for (std::uint32_t t = 0; t < K.tops().size(); ++t)
    for (std::uint32_t j : detail::interacting_tops(K, t, adj))
      if (col.colors[t] == col.colors[j]) return false;
  return true;
}

inline int max_tops_per_vertex(const SimplicialComplex& K) {
  int a = 0;
  for (VertexId v = 0; v < K.vertex_count(); ++v)
    a = std::max(a, static_cast<int>(K.tops_at_vertex(v).size()));
  return a;
}

/// Colour-count bound for crystalline subdivisions of a complex whose
/// vertices meet at most A top simplices.
inline long long color_bound_plain(int m, long long A) {
  long long p3 = 1;
  for (int i = 0; i < m; ++i) p3 *= 3;
  return (p3 - 1) * static_cast<long long>(factorial(m)) * A;
}

/// Colour-count bound for generalized (two-zone) subdivisions.
inline long long color_bound_generalized(int m, long long A) {
  return color_bound_plain(m, A) * (m + (1LL << (m - 1)));
}

}  // namespace jiggle
