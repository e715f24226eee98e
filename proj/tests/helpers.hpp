// Shared fixtures for the test suites: tiny complexes and maps that every
// suite keeps rebuilding.
#pragma once

#include "jiggle/jiggle.hpp"

#include <random>
#include <vector>

namespace fixtures {

using namespace jiggle;

inline Vec v1(double x) {
  Vec p(1);
  p << x;
  return p;
}

inline Vec v2(double x, double y) {
  Vec p(2);
  p << x, y;
  return p;
}

inline Vec v3(double x, double y, double z) {
  Vec p(3);
  p << x, y, z;
  return p;
}

/// Standard m-simplex (0, e_1, ..., e_m) as a closed complex.
inline SimplicialComplex unit_simplex(int m) {
  std::vector<Vec> vs;
  vs.push_back(Vec::Zero(m));
  for (int i = 0; i < m; ++i) {
    Vec e = Vec::Zero(m);
    e(i) = 1.0;
    vs.push_back(std::move(e));
  }
  SimplexKey top;
  for (int i = 0; i <= m; ++i) top.push_back(VertexId(i));
  return SimplicialComplex::from_simplices(m, std::move(vs), {top});
}

/// [0, n] on the line as n unit edges.
inline SimplicialComplex path_complex(int n) {
  std::vector<Vec> vs;
  for (int i = 0; i <= n; ++i) vs.push_back(v1(double(i)));
  std::vector<SimplexKey> tops;
  for (int i = 0; i < n; ++i) tops.push_back({VertexId(i), VertexId(i + 1)});
  return SimplicialComplex::from_simplices(1, std::move(vs), tops);
}

/// Unit square as two triangles sharing the diagonal.
inline SimplicialComplex square_complex() {
  std::vector<Vec> vs = {v2(0, 0), v2(1, 0), v2(0, 1), v2(1, 1)};
  return SimplicialComplex::from_simplices(2, std::move(vs),
                                           {{0, 1, 3}, {0, 2, 3}});
}

/// n x n unit-square grid, each cell split along its up diagonal.
inline SimplicialComplex grid_complex(int n) {
  std::vector<Vec> vs;
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) vs.push_back(v2(double(i), double(j)));
  auto id = [n](int i, int j) { return VertexId(j * (n + 1) + i); };
  std::vector<SimplexKey> tops;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      SimplexKey a{id(i, j), id(i + 1, j), id(i + 1, j + 1)};
      SimplexKey b{id(i, j), id(i, j + 1), id(i + 1, j + 1)};
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      tops.push_back(a);
      tops.push_back(b);
    }
  return SimplicialComplex::from_simplices(2, std::move(vs), tops);
}

/// Unit cube as six tetrahedra around the main diagonal.
inline SimplicialComplex cube_complex() {
  std::vector<Vec> vs;
  for (int z = 0; z <= 1; ++z)
    for (int y = 0; y <= 1; ++y)
      for (int x = 0; x <= 1; ++x) vs.push_back(v3(x, y, z));
  auto id = [](int x, int y, int z) { return VertexId(z * 4 + y * 2 + x); };
  // Kuhn triangulation: one tet per permutation of axes.
  const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                           {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  std::vector<SimplexKey> tops;
  for (const auto& p : perms) {
    int c[3] = {0, 0, 0};
    SimplexKey t{id(0, 0, 0)};
    for (int step = 0; step < 3; ++step) {
      c[p[step]] = 1;
      t.push_back(id(c[0], c[1], c[2]));
    }
    std::sort(t.begin(), t.end());
    tops.push_back(t);
  }
  return SimplicialComplex::from_simplices(3, std::move(vs), tops);
}

/// Random nondegenerate m-simplex in R^m with vertices in [-1, 1]^m.
inline Mat random_simplex(std::mt19937_64& rng, int m) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (;;) {
    Mat P(m, m + 1);
    for (int j = 0; j <= m; ++j)
      for (int i = 0; i < m; ++i) P(i, j) = U(rng);
    if (!degenerate(P) && std::abs(simplex_volume(P)) > 1e-3) return P;
  }
}

}  // namespace fixtures
