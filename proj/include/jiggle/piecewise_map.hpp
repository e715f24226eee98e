#pragma once

/// \file piecewise_map.hpp
/// Maps over the polyhedron of a simplicial complex that are affine or
/// smooth on each top cell, with jets, continuity checking, C0/C1 distances,
/// and the interpolation/join constructions on a single simplex.

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "complex.hpp"
#include "function_registry.hpp"
#include "jets.hpp"
#include "simplex_geometry.hpp"

namespace jiggle {

/// First top cell (in sorted order) containing x, or nullopt.
inline std::optional<std::uint32_t> locate_top(const SimplicialComplex& K, const Vec& x,
                                               double tol = kGeomTol) {
  for (std::uint32_t t = 0; t < K.tops().size(); ++t)
    if (point_in_simplex(K.points_of(K.tops()[t]), x, tol)) return t;
  return std::nullopt;
}

/// A map |K| -> R^n: affine on each top cell (determined by the vertex value
/// table) unless the cell carries a smooth piece. Copies are cheap; the
/// complex is shared immutably.
class PiecewiseMap {
 public:
  PiecewiseMap() = default;

  /// A piecewise linear map from per-vertex values.
  static PiecewiseMap pl(std::shared_ptr<const SimplicialComplex> K, int target_dim,
                         std::vector<Vec> vertex_values) {
    PiecewiseMap f;
    if (!K) throw std::invalid_argument("PiecewiseMap: null complex");
    if (vertex_values.size() != K->vertex_count())
      throw std::invalid_argument("PiecewiseMap: one value per vertex required");
    for (const Vec& v : vertex_values)
      if (v.size() != target_dim) throw std::invalid_argument("PiecewiseMap: value dim mismatch");
    f.K_ = std::move(K);
    f.n_ = target_dim;
    f.values_ = std::move(vertex_values);
    return f;
  }

  /// A piecewise smooth map: the same smooth function on every top cell.
  static PiecewiseMap smooth(std::shared_ptr<const SimplicialComplex> K, const SmoothMap& s) {
    PiecewiseMap f;
    if (!K) throw std::invalid_argument("PiecewiseMap: null complex");
    if (s.domain_dim != K->ambient_dim())
      throw std::invalid_argument("PiecewiseMap: smooth map domain dim mismatch");
    f.K_ = std::move(K);
    f.n_ = s.target_dim;
    f.values_.reserve(f.K_->vertex_count());
    for (VertexId v = 0; v < f.K_->vertex_count(); ++v)
      f.values_.push_back(s.value(f.K_->vertex(v)));
    for (std::uint32_t t = 0; t < f.K_->tops().size(); ++t) f.pieces_.emplace(t, s);
    return f;
  }

  const SimplicialComplex& complex() const { return *K_; }
  std::shared_ptr<const SimplicialComplex> complex_ptr() const { return K_; }
  int target_dim() const { return n_; }
  const std::vector<Vec>& vertex_values() const { return values_; }
  const Vec& value_at_vertex(VertexId v) const { return values_.at(v); }
  void set_vertex_value(VertexId v, Vec val) {
    if (val.size() != n_) throw std::invalid_argument("set_vertex_value: dim mismatch");
    values_.at(v) = std::move(val);
  }

  bool piece_is_affine(std::uint32_t top) const { return pieces_.find(top) == pieces_.end(); }
  const SmoothMap& smooth_piece(std::uint32_t top) const { return pieces_.at(top); }
  const std::unordered_map<std::uint32_t, SmoothMap>& smooth_pieces() const { return pieces_; }
  void set_smooth_piece(std::uint32_t top, SmoothMap s) { pieces_[top] = std::move(s); }
  void make_piece_affine(std::uint32_t top) { pieces_.erase(top); }

  bool is_pl() const { return pieces_.empty(); }

  /// Evaluate the piece living on the given top cell at ambient point x
  /// (which should lie in that cell).
  Vec evaluate_on(std::uint32_t top, const Vec& x) const {
    auto it = pieces_.find(top);
    if (it != pieces_.end()) return it->second.value(x);
    const SimplexKey& s = K_->tops()[top];
    const Vec lam = affine_coords(K_->points_of(s), x);
    Vec out = Vec::Zero(n_);
    for (std::size_t i = 0; i < s.size(); ++i) out += lam(static_cast<int>(i)) * values_[s[i]];
    return out;
  }

  /// Evaluate anywhere on |K| (first containing cell; continuity makes the
  /// choice immaterial for valid maps).
  Vec evaluate(const Vec& x) const {
    auto t = locate_top(*K_, x);
    if (!t) throw std::invalid_argument("evaluate: point outside the polyhedron");
    return evaluate_on(*t, x);
  }

  /// First-order jet of the piece on `top` at ambient point x, in that
  /// cell's orthonormal chart.
  Jet1 piece_jet(std::uint32_t top, const Vec& x) const {
    const SimplexKey& s = K_->tops()[top];
    const Mat P = K_->points_of(s);
    const OrthoChart ch = ortho_chart(P);
    Jet1 j;
    j.chart = ch.Q;
    j.origin = P.col(0);
    j.base = ch.Q.transpose() * (x - P.col(0));
    auto it = pieces_.find(top);
    if (it != pieces_.end()) {
      j.value = it->second.value(x);
      j.slope = it->second.jacobian(x) * ch.Q;
    } else {
      const int m = static_cast<int>(s.size()) - 1;
      Mat W(n_, m);
      for (int i = 0; i < m; ++i) W.col(i) = values_[s[i + 1]] - values_[s[0]];
      const Mat S = ch.R.triangularView<Eigen::Upper>().solve<Eigen::OnTheRight>(W);
      j.slope = S;
      j.value = Vec::Zero(n_);
      const Vec lam = affine_coords(P, x);
      for (std::size_t i = 0; i < s.size(); ++i)
        j.value += lam(static_cast<int>(i)) * values_[s[i]];
    }
    return j;
  }

  /// Jet at the cell's anchor (lowest vertex id in the sorted key).
  Jet1 anchor_jet(std::uint32_t top) const {
    return piece_jet(top, K_->vertex(K_->tops()[top][0]));
  }

  /// Largest value mismatch across shared faces, sampled at shared vertices
  /// and shared-face barycenters. Zero for consistent maps.
  double continuity_defect() const {
    double worst = 0.0;
    std::unordered_map<SimplexKey, std::vector<std::uint32_t>, SimplexKeyHash> facet_owners;
    for (std::uint32_t t = 0; t < K_->tops().size(); ++t) {
      const SimplexKey& s = K_->tops()[t];
      if (s.size() == 1) continue;
      for (std::size_t skip = 0; skip < s.size(); ++skip) {
        SimplexKey f;
        for (std::size_t i = 0; i < s.size(); ++i)
          if (i != skip) f.push_back(s[i]);
        facet_owners[f].push_back(t);
      }
    }
    for (const auto& [face, owners] : facet_owners) {
      if (owners.size() < 2) continue;
      std::vector<Vec> probes;
      for (VertexId v : face) probes.push_back(K_->vertex(v));
      Vec b = Vec::Zero(K_->ambient_dim());
      for (VertexId v : face) b += K_->vertex(v);
      probes.push_back(b / static_cast<double>(face.size()));
      for (const Vec& x : probes) {
        const Vec ref = evaluate_on(owners[0], x);
        for (std::size_t i = 1; i < owners.size(); ++i)
          worst = std::max(worst, (evaluate_on(owners[i], x) - ref).norm());
      }
    }
    return worst;
  }

  /// Scale of the map's values, for relative tolerances.
  double value_scale() const {
    double s = 1.0;
    for (const Vec& v : values_) s = std::max(s, v.lpNorm<Eigen::Infinity>());
    return s;
  }

 private:
  std::shared_ptr<const SimplicialComplex> K_;
  int n_ = 0;
  std::vector<Vec> values_;
  std::unordered_map<std::uint32_t, SmoothMap> pieces_;
};

namespace map_detail {

/// Sample points of a simplex: all barycentric grid nodes with denominator
/// `den` (vertices included).
inline std::vector<Vec> simplex_grid(const Mat& P, int den) {
  const int k = static_cast<int>(P.cols());
  std::vector<Vec> out;
  std::vector<int> a(k, 0);
  a[0] = den;
  // enumerate compositions of den into k parts
  while (true) {
    Vec x = Vec::Zero(P.rows());
    for (int i = 0; i < k; ++i) x += (static_cast<double>(a[i]) / den) * P.col(i);
    out.push_back(std::move(x));
    int i = k - 2;
    while (i >= 0 && a[i] == 0) --i;
    if (i < 0) break;
    const int tail = a[k - 1];
    a[i] -= 1;
    if (i + 1 != k - 1) a[k - 1] = 0;
    a[i + 1] = tail + 1;
  }
  return out;
}

}  // namespace map_detail

/// Relationship between the complexes of two maps: equal, or one is a
/// refinement of the other (detected by lineage signatures).
inline bool complex_refines(const SimplicialComplex& fine, const SimplicialComplex& coarse) {
  return fine.ancestor_signature() == coarse.signature() ||
         fine.root_signature() == coarse.signature();
}

/// C0 and C1 distance between two maps whose complexes are equal or related
/// by subdivision. Values are compared at barycentric grid samples per top
/// cell of the finer complex (vertices included, so PL-vs-PL value sups are
/// exact); slopes are compared in each sampled cell's own chart by operator
/// norm. `den` is the grid denominator (default 4, i.e. 5 nodes per edge).
inline std::pair<double, double> c0_c1_distance(const PiecewiseMap& f, const PiecewiseMap& g,
                                                int den = 4) {
  if (f.target_dim() != g.target_dim())
    throw std::invalid_argument("c0_c1_distance: target dimensions differ");
  const SimplicialComplex& Kf = f.complex();
  const SimplicialComplex& Kg = g.complex();
  const PiecewiseMap* fine = &f;
  const PiecewiseMap* other = &g;
  bool same = Kf.signature() == Kg.signature();
  if (!same) {
    if (complex_refines(Kg, Kf)) {
      fine = &g;
      other = &f;
    } else if (complex_refines(Kf, Kg)) {
      fine = &f;
      other = &g;
    } else {
      throw std::invalid_argument("c0_c1_distance: incomparable complexes");
    }
  }
  const SimplicialComplex& K = fine->complex();
  double c0 = 0.0, c1 = 0.0;
  for (std::uint32_t t = 0; t < K.tops().size(); ++t) {
    const Mat P = K.points_of(K.tops()[t]);
    std::optional<std::uint32_t> ot;
    if (same) {
      ot = t;
    } else {
      Vec b = P.rowwise().mean();
      ot = locate_top(other->complex(), b);
      if (!ot) throw std::invalid_argument("c0_c1_distance: cell escapes the other complex");
    }
    const bool const_slopes = fine->piece_is_affine(t) && other->piece_is_affine(*ot);
    for (const Vec& x : map_detail::simplex_grid(P, den)) {
      c0 = std::max(c0, (fine->evaluate_on(t, x) - other->evaluate_on(*ot, x)).norm());
      if (!const_slopes) {
        const Jet1 jf = fine->piece_jet(t, x);
        Jet1 jo = other->piece_jet(*ot, x);
        // express the other slope in the fine cell's chart
        const Mat So = jo.ambient_slope() * jf.chart;
        c1 = std::max(c1, operator_norm(jf.slope - So));
      }
    }
    if (const_slopes) {
      const Jet1 jf = fine->piece_jet(t, P.col(0));
      const Jet1 jo = other->piece_jet(*ot, P.col(0));
      const Mat So = jo.ambient_slope() * jf.chart;
      c1 = std::max(c1, operator_norm(jf.slope - So));
    }
  }
  return {c0, c1};
}

// ---------------------------------------------------------------------------
// Interpolation and join over one simplex

namespace map_detail {

inline void check_opposite_faces(int k, const std::vector<int>& A, const std::vector<int>& B) {
  std::vector<char> seen(k, 0);
  if (A.empty() || B.empty())
    throw std::invalid_argument("join/interpolate: faces must be nonempty");
  for (int i : A) {
    if (i < 0 || i >= k || seen[i]) throw std::invalid_argument("join/interpolate: bad face index");
    seen[i] = 1;
  }
  for (int i : B) {
    if (i < 0 || i >= k || seen[i]) throw std::invalid_argument("join/interpolate: faces overlap");
    seen[i] = 1;
  }
  for (int i = 0; i < k; ++i)
    if (!seen[i]) throw std::invalid_argument("join/interpolate: faces do not span the simplex");
}

/// The affine join parameter of Δ = join(A, B): 0 on face A, 1 on face B.
/// Returns (gradient g, offset c) with t(x) = g·x + c.
inline std::pair<Vec, double> join_parameter(const Mat& P, const std::vector<int>& A,
                                             const std::vector<int>& B) {
  check_opposite_faces(static_cast<int>(P.cols()), A, B);
  // t is the affine function with vertex values 0 on A, 1 on B; its ambient
  // gradient lives in the simplex's span.
  const int m = static_cast<int>(P.cols()) - 1;
  const OrthoChart ch = ortho_chart(P);
  Vec vert_t = Vec::Zero(m + 1);
  for (int i : B) vert_t(i) = 1.0;
  Vec w(m);
  for (int i = 0; i < m; ++i) w(i) = vert_t(i + 1) - vert_t(0);
  const Vec s = ch.R.triangularView<Eigen::Upper>().transpose().solve(w);
  // chart slope sᵀ; ambient gradient = Q s
  const Vec g = ch.Q * s;
  const double c = vert_t(0) - g.dot(P.col(0));
  return {g, c};
}

}  // namespace map_detail

/// Convex interpolation of two smooth maps across a simplex spanned by two
/// opposite faces. The literal formula weights s_A by the join parameter t
/// (t = 0 on face A), so the result restricts to s_B on A and to s_A on B;
/// `swap_weights` uses the complementary weighting.
inline SmoothMap interpolate(const Mat& P, const std::vector<int>& A, const std::vector<int>& B,
                             const SmoothMap& sA, const SmoothMap& sB,
                             bool swap_weights = false) {
  if (sA.target_dim != sB.target_dim || sA.domain_dim != sB.domain_dim)
    throw std::invalid_argument("interpolate: map dimensions differ");
  auto [g, c] = map_detail::join_parameter(P, A, B);
  if (swap_weights) {
    g = -g;
    c = 1.0 - c;
  }
  SmoothMap out;
  out.name = "interpolated";
  out.domain_dim = sA.domain_dim;
  out.target_dim = sA.target_dim;
  const SmoothMap fa = sA, fb = sB;
  const Vec gg = g;
  const double cc = c;
  out.value = [fa, fb, gg, cc](const Vec& x) {
    const double t = gg.dot(x) + cc;
    return (t * fa.value(x) + (1.0 - t) * fb.value(x)).eval();
  };
  out.jacobian = [fa, fb, gg, cc](const Vec& x) {
    const double t = gg.dot(x) + cc;
    Mat J = t * fa.jacobian(x) + (1.0 - t) * fb.jacobian(x);
    J += (fa.value(x) - fb.value(x)) * gg.transpose();
    return J;
  };
  return out;
}

/// The unique affine map on the simplex agreeing with the given affine data
/// on two opposite faces: vertex values from each side, interpolated
/// affinely. Exact (vertex-value construction).
inline SmoothMap join_map(const Mat& P, const std::vector<int>& A, const std::vector<int>& B,
                          const std::vector<Vec>& values_A, const std::vector<Vec>& values_B) {
  map_detail::check_opposite_faces(static_cast<int>(P.cols()), A, B);
  if (values_A.size() != A.size() || values_B.size() != B.size())
    throw std::invalid_argument("join_map: one value per face vertex required");
  const int n = static_cast<int>(values_A[0].size());
  for (const Vec& v : values_A)
    if (v.size() != n) throw std::invalid_argument("join_map: value dim mismatch");
  for (const Vec& v : values_B)
    if (v.size() != n) throw std::invalid_argument("join_map: value dim mismatch");
  std::vector<Vec> vals(P.cols());
  for (std::size_t i = 0; i < A.size(); ++i) vals[A[i]] = values_A[i];
  for (std::size_t i = 0; i < B.size(); ++i) vals[B[i]] = values_B[i];
  SmoothMap out;
  out.name = "affine_join";
  out.domain_dim = static_cast<int>(P.rows());
  out.target_dim = n;
  const Mat PP = P;
  const std::vector<Vec> vv = vals;
  out.value = [PP, vv, n](const Vec& x) {
    const Vec lam = affine_coords(PP, x);
    Vec y = Vec::Zero(n);
    for (std::size_t i = 0; i < vv.size(); ++i) y += lam(static_cast<int>(i)) * vv[i];
    return y;
  };
  const OrthoChart ch = ortho_chart(P);
  const int m = static_cast<int>(P.cols()) - 1;
  Mat W(n, m);
  for (int i = 0; i < m; ++i) W.col(i) = vals[i + 1] - vals[0];
  const Mat S = ch.R.triangularView<Eigen::Upper>().solve<Eigen::OnTheRight>(W);
  const Mat Jamb = S * ch.Q.transpose();
  out.jacobian = [Jamb](const Vec&) { return Jamb; };
  return out;
}

}  // namespace jiggle
