#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "complex.hpp"
#include "simplex_geometry.hpp"

namespace jiggle {

struct ValidationIssue {
  std::string kind;    ///< "missing-face", "degenerate", "interior-overlap", "bad-intersection"
  std::string detail;
};

struct ValidationReport {
  bool valid = true;
  bool sampled = false;    ///< geometric checks used point samples
  bool truncated = false;  ///< pair budget exhausted before all candidates were checked
  std::size_t pairs_checked = 0;
  std::vector<ValidationIssue> issues;
};

struct ValidateOptions {
  bool geometric = true;
  std::size_t max_pairs = 2'000'000;
  double tol = 1e-9;
};

namespace detail {

/// Least-squares barycentric membership: returns true when x lies in the
/// simplex with points P, within tol relative to scale.
inline bool point_in_simplex(const Vec& x, const Mat& P, double tol, double scale) {
  const int m = static_cast<int>(P.cols()) - 1;
  if (m == 0) return (x - P.col(0)).norm() <= tol * std::max(1.0, scale);
  Mat Tm(P.rows(), m);
  for (int j = 0; j < m; ++j) Tm.col(j) = P.col(j + 1) - P.col(0);
  Eigen::MatrixXd G = Tm.transpose() * Tm;
  Eigen::VectorXd c = G.ldlt().solve(Tm.transpose() * (x - P.col(0)));
  const double eps = tol * std::max(1.0, scale);
  double s = 0;
  for (int i = 0; i < m; ++i) {
    if (c(i) < -eps) return false;
    s += c(i);
  }
  if (s > 1 + eps) return false;
  return (P.col(0) + Tm * c - x).norm() <= eps;
}

/// Barycentric grid samples with denominator `den`, paired with their
/// support sets (indices of vertices with positive weight).
inline void barycentric_grid(const Mat& P, int den, std::vector<std::pair<Vec, std::vector<int>>>& out) {
  const int m = static_cast<int>(P.cols()) - 1;
  std::vector<int> a(m + 1, 0);
  std::function<void(int, int)> rec = [&](int pos, int left) {
    if (pos == m) {
      a[m] = left;
      Vec x = Vec::Zero(P.rows());
      std::vector<int> support;
      for (int i = 0; i <= m; ++i) {
        x += (static_cast<double>(a[i]) / den) * P.col(i);
        if (a[i] > 0) support.push_back(i);
      }
      out.emplace_back(std::move(x), std::move(support));
      return;
    }
    for (int k = 0; k <= left; ++k) {
      a[pos] = k;
      rec(pos + 1, left - k);
    }
  };
  rec(0, den);
}

/// Separating-axis interior-overlap test for full-dimensional simplices in
/// ambient dimension 2 or 3. Returns true when interiors provably overlap.
inline bool sat_interior_overlap(const Mat& A, const Mat& B, double tol) {
  const int N = static_cast<int>(A.rows());
  std::vector<Vec> axes;
  auto add_facet_normals = [&](const Mat& P) {
    const int m = static_cast<int>(P.cols()) - 1;
    for (int skip = 0; skip <= m; ++skip) {
      // Normal of the facet opposite vertex `skip`.
      Mat E(N, m - 1);
      int c = 0;
      int base = (skip == 0) ? 1 : 0;
      for (int j = 0; j <= m; ++j) {
        if (j == skip || j == base) continue;
        E.col(c++) = P.col(j) - P.col(base);
      }
      Vec n;
      if (N == 2) {
        Vec e = E.col(0);
        n = Vec(2);
        n << -e(1), e(0);
      } else {
        Vec u = E.col(0), v = E.col(1);
        n = Vec(3);
        n << u(1) * v(2) - u(2) * v(1), u(2) * v(0) - u(0) * v(2), u(0) * v(1) - u(1) * v(0);
      }
      if (n.norm() > 1e-14) axes.push_back(n.normalized());
    }
  };
  add_facet_normals(A);
  add_facet_normals(B);
  if (N == 3) {
    auto edges = [&](const Mat& P) {
      std::vector<Vec> es;
      const int k = static_cast<int>(P.cols());
      for (int i = 0; i < k; ++i)
        for (int j = i + 1; j < k; ++j) es.push_back(P.col(j) - P.col(i));
      return es;
    };
    for (const Vec& u : edges(A))
      for (const Vec& v : edges(B)) {
        Vec n(3);
        n << u(1) * v(2) - u(2) * v(1), u(2) * v(0) - u(0) * v(2), u(0) * v(1) - u(1) * v(0);
        if (n.norm() > 1e-14) axes.push_back(n.normalized());
      }
  }
  const double scale = std::max(rmax(A), rmax(B));
  for (const Vec& ax : axes) {
    double aMin = 1e300, aMax = -1e300, bMin = 1e300, bMax = -1e300;
    for (int j = 0; j < A.cols(); ++j) {
      const double p = ax.dot(A.col(j));
      aMin = std::min(aMin, p);
      aMax = std::max(aMax, p);
    }
    for (int j = 0; j < B.cols(); ++j) {
      const double p = ax.dot(B.col(j));
      bMin = std::min(bMin, p);
      bMax = std::max(bMax, p);
    }
    const double gap = std::max(bMin - aMax, aMin - bMax);
    if (gap >= -tol * std::max(1.0, scale)) return false;  // separated or touching
  }
  return true;
}

/// Exact-ish closest approach of two segments; true when they intersect in
/// points interior to at least one of them beyond a shared endpoint.
inline bool segments_cross(const Vec& a0, const Vec& a1, const Vec& b0, const Vec& b1, double tol) {
  const Vec u = a1 - a0, v = b1 - b0, w = a0 - b0;
  const double a = u.dot(u), b = u.dot(v), c = v.dot(v), d = u.dot(w), e = v.dot(w);
  const double den = a * c - b * b;
  double s, t;
  if (den < 1e-14 * a * c + 1e-300) {  // near parallel
    s = 0;
    t = (b > c ? d / b : e / c);
  } else {
    s = (b * e - c * d) / den;
    t = (a * e - b * d) / den;
  }
  s = std::clamp(s, 0.0, 1.0);
  t = std::clamp(t, 0.0, 1.0);
  const Vec pa = a0 + s * u, pb = b0 + t * v;
  const double scale = std::max(u.norm(), v.norm());
  if ((pa - pb).norm() > tol * std::max(1.0, scale)) return false;
  // Touching at shared endpoints is fine.
  const double eps = tol * std::max(1.0, scale);
  auto near_pt = [&](const Vec& x, const Vec& y) { return (x - y).norm() <= eps; };
  const bool a_end = near_pt(pa, a0) || near_pt(pa, a1);
  const bool b_end = near_pt(pb, b0) || near_pt(pb, b1);
  return !(a_end && b_end);
}

}  // namespace detail

/// Structural and geometric consistency checks: face closure, degeneracy,
/// and pairwise compatibility of maximal simplices (intersections must be
/// the shared face). Geometric pair checks combine a separating-axis test
/// for full-dimensional simplices in 2-D/3-D with barycentric grid samples,
/// so the report carries a `sampled` flag.
inline ValidationReport validate_complex(const SimplicialComplex& K, const ValidateOptions& opt = {}) {
  ValidationReport rep;
  auto fail = [&rep](std::string kind, std::string detail) {
    rep.valid = false;
    rep.issues.push_back({std::move(kind), std::move(detail)});
  };

  // Face closure.
  for (const auto& s : K.all_simplices_sorted()) {
    if (s.size() == 1) continue;
    for (std::size_t skip = 0; skip < s.size(); ++skip) {
      SimplexKey f;
      for (std::size_t i = 0; i < s.size(); ++i)
        if (i != skip) f.push_back(s[i]);
      if (!K.contains(f)) fail("missing-face", key_str(f) + " of " + key_str(s));
    }
  }

  // Degeneracy of maximal simplices.
  for (const auto& s : K.maximal()) {
    if (s.size() == 1) continue;
    if (static_cast<int>(s.size()) - 1 > K.ambient_dim()) {
      fail("degenerate", key_str(s) + " exceeds ambient dimension");
      continue;
    }
    if (degenerate(K.points_of(s))) fail("degenerate", key_str(s));
  }

  if (!opt.geometric || !rep.valid) return rep;

  // Pairwise geometric compatibility with a bounding-box sweep prefilter.
  const auto& M = K.maximal();
  const int N = K.ambient_dim();
  std::vector<std::pair<Vec, Vec>> boxes(M.size());
  for (std::size_t i = 0; i < M.size(); ++i) {
    const Mat P = K.points_of(M[i]);
    boxes[i] = {P.rowwise().minCoeff(), P.rowwise().maxCoeff()};
  }
  std::vector<std::size_t> order(M.size());
  for (std::size_t i = 0; i < M.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return boxes[a].first(0) < boxes[b].first(0); });

  double scale = 1e-300;
  for (std::size_t i = 0; i < M.size(); ++i)
    if (M[i].size() > 1) scale = std::max(scale, rmax(K.points_of(M[i])));
  const double pad = opt.tol * std::max(1.0, scale);

  std::vector<std::vector<std::pair<Vec, std::vector<int>>>> samples(M.size());
  auto samples_of = [&](std::size_t i) -> const std::vector<std::pair<Vec, std::vector<int>>>& {
    if (samples[i].empty()) detail::barycentric_grid(K.points_of(M[i]), 4, samples[i]);
    return samples[i];
  };

  for (std::size_t oi = 0; oi < order.size() && !rep.truncated; ++oi) {
    const std::size_t i = order[oi];
    for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
      const std::size_t j = order[oj];
      if (boxes[j].first(0) > boxes[i].second(0) + pad) break;
      bool near = true;
      for (int d = 0; d < N; ++d)
        if (boxes[j].first(d) > boxes[i].second(d) + pad || boxes[i].first(d) > boxes[j].second(d) + pad) {
          near = false;
          break;
        }
      if (!near) continue;
      if (rep.pairs_checked >= opt.max_pairs) {
        rep.truncated = true;
        break;
      }
      ++rep.pairs_checked;

      const SimplexKey &A = M[i], &B = M[j];
      SimplexKey shared;
      std::set_intersection(A.begin(), A.end(), B.begin(), B.end(), std::back_inserter(shared));
      const Mat PA = K.points_of(A), PB = K.points_of(B);
      const int mA = static_cast<int>(A.size()) - 1, mB = static_cast<int>(B.size()) - 1;

      if ((N == 2 || N == 3) && mA == N && mB == N) {
        if (detail::sat_interior_overlap(PA, PB, opt.tol)) {
          fail("interior-overlap", key_str(A) + " vs " + key_str(B));
          continue;
        }
      } else if (mA == 1 && mB == 1) {
        if (detail::segments_cross(PA.col(0), PA.col(1), PB.col(0), PB.col(1), opt.tol)) {
          fail("interior-overlap", key_str(A) + " vs " + key_str(B));
          continue;
        }
      }

      // Sampled check: points of A supported off the shared face must not
      // lie in B, and vice versa.
      rep.sampled = true;
      auto check_dir = [&](const SimplexKey& SA, const Mat& QA, const Mat& QB, std::size_t idx) {
        for (const auto& [x, support] : samples_of(idx)) {
          bool off_shared = false;
          for (int si : support)
            if (!std::binary_search(shared.begin(), shared.end(), SA[si])) {
              off_shared = true;
              break;
            }
          if (!off_shared) continue;
          if (detail::point_in_simplex(x, QB, opt.tol, scale)) {
            fail("bad-intersection",
                 key_str(SA == A ? A : B) + " meets " + key_str(SA == A ? B : A) + " off their shared face");
            return false;
          }
        }
        return true;
      };
      if (!check_dir(A, PA, PB, i)) continue;
      check_dir(B, PB, PA, j);
    }
  }
  return rep;
}

}  // namespace jiggle
