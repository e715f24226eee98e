#pragma once

/// \file relations.hpp
/// Open, fiberwise dense first-order relations as margin oracles:
/// transversality to a distribution, maximal rank, 3-D contact forms, and
/// very general position of simplex faces under a map. Each oracle reports a
/// certified containment radius and can nudge a jet's slope into the
/// relation by a deterministic sweep.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "complex.hpp"
#include "jets.hpp"
#include "piecewise_map.hpp"
#include "rational.hpp"
#include "simplex_geometry.hpp"
#include "subdivision.hpp"

namespace jiggle {

/// A constant-rank plane field on a target space: y -> orthonormal n x r
/// frame. Registry identity kept for serialization.
struct Distribution {
  int rank = 0;
  int ambient_dim = 0;
  bool constant = true;
  std::function<Mat(const Vec&)> frame;
  std::string name;
  std::vector<double> params;
};

namespace rel_detail {

inline void require_orthonormal(const Mat& X, const char* who) {
  const Mat G = X.transpose() * X - Mat::Identity(X.cols(), X.cols());
  if (G.cwiseAbs().maxCoeff() > 1e-9)
    throw std::invalid_argument(std::string(who) + ": frame not orthonormal");
}

}  // namespace rel_detail

/// Constant distribution spanned by the given columns (orthonormalized).
inline Distribution constant_distribution(const Mat& span_vectors) {
  if (span_vectors.cols() < 1 || span_vectors.rows() < 1)
    throw std::invalid_argument("constant_distribution: empty span");
  Eigen::HouseholderQR<Mat> qr(span_vectors);
  Mat Q = qr.householderQ() * Mat::Identity(span_vectors.rows(), span_vectors.cols());
  Mat R = qr.matrixQR().topRows(span_vectors.cols()).triangularView<Eigen::Upper>();
  for (int i = 0; i < R.cols(); ++i)
    if (std::abs(R(i, i)) < 1e-12 * (1.0 + span_vectors.cwiseAbs().maxCoeff()))
      throw std::invalid_argument("constant_distribution: vectors do not have full rank");
  Distribution d;
  d.rank = static_cast<int>(span_vectors.cols());
  d.ambient_dim = static_cast<int>(span_vectors.rows());
  d.constant = true;
  const Mat frame = Q;
  d.frame = [frame](const Vec&) { return frame; };
  d.name = "constant";
  for (int j = 0; j < frame.cols(); ++j)
    for (int i = 0; i < frame.rows(); ++i) d.params.push_back(frame(i, j));
  return d;
}

/// Named distributions: "horizontal" (span of the first r axes),
/// "vertical" (span of the last r axes), "full" (all of R^n), "rotating2d"
/// (unit line field in R^2 turning with the first coordinate; params =
/// {omega, phase}).
inline Distribution make_distribution(const std::string& name, int n,
                                      std::vector<double> params = {}) {
  if (n < 1) throw std::invalid_argument("make_distribution: bad ambient dim");
  Distribution d;
  d.ambient_dim = n;
  d.name = name;
  d.params = params;
  if (name == "horizontal" || name == "vertical") {
    const int r = params.empty() ? 1 : static_cast<int>(params[0]);
    if (r < 1 || r > n) throw std::invalid_argument("make_distribution: bad rank");
    Mat X = Mat::Zero(n, r);
    for (int j = 0; j < r; ++j) X(name == "horizontal" ? j : n - r + j, j) = 1.0;
    d.rank = r;
    d.constant = true;
    d.frame = [X](const Vec&) { return X; };
    return d;
  }
  if (name == "full") {
    Mat X = Mat::Identity(n, n);
    d.rank = n;
    d.constant = true;
    d.frame = [X](const Vec&) { return X; };
    return d;
  }
  if (name == "rotating2d") {
    if (n != 2) throw std::invalid_argument("make_distribution: rotating2d needs n = 2");
    const double omega = params.empty() ? 1.0 : params[0];
    const double phase = params.size() > 1 ? params[1] : 0.0;
    d.rank = 1;
    d.constant = false;
    d.frame = [omega, phase](const Vec& y) {
      Mat X(2, 1);
      const double a = omega * y(0) + phase;
      X(0, 0) = std::cos(a);
      X(1, 0) = std::sin(a);
      return X;
    };
    return d;
  }
  throw std::invalid_argument("make_distribution: unknown distribution '" + name + "'");
}

/// A first-order relation probed through jets. margin is a certified radius:
/// margin(j) > 0 implies every jet within that distance (slope operator
/// norm; value changes scaled by openness_scales) stays inside. contains is
/// the membership predicate at numerical tolerance; margin is 0 whenever
/// contains is false. fiber_perturb returns a jet with the same base and
/// value, slope moved by less than eps, and margin above the sweep's
/// acceptance threshold.
struct RelationOracle {
  std::string name;
  int domain_dim = 0;
  int target_dim = 0;
  std::function<double(const Jet1&)> margin;
  std::function<bool(const Jet1&)> contains;
  std::function<Jet1(const Jet1&, double)> fiber_perturb;
  /// {L_slope, L_value}: local Lipschitz bounds of the margin in the slope
  /// and value arguments, used by openness probes to scale perturbations.
  std::function<std::pair<double, double>(const Jet1&)> openness_scales;
};

/// One oracle per top cell of a complex (very general position depends on
/// the hosting simplex; uniform relations ignore it).
using RelationFamily = std::function<RelationOracle(const SimplicialComplex&, std::uint32_t)>;

inline RelationFamily uniform_family(RelationOracle R) {
  return [R](const SimplicialComplex&, std::uint32_t) { return R; };
}

namespace rel_detail {

constexpr double kSweepTheta = 1.0 / 16.0;
constexpr int kSweepDepth = 20;

inline Jet1 with_slope(const Jet1& j, Mat slope) {
  Jet1 out = j;
  out.slope = std::move(slope);
  return out;
}

/// Elementary slope increments +-E_ab (operator norm 1, deterministic order)
/// followed by +-diagonal combinations. A single E_ab has rank one, so it can
/// never lift a zero slope to full rank when min(n, m) >= 2; the trailing
/// diagonals cover that. They come last so earlier-accepting sweeps are
/// unaffected.
inline std::vector<Mat> elementary_directions(int n, int m) {
  std::vector<Mat> out;
  out.reserve(2 * n * m + 4);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < m; ++b)
      for (double s : {1.0, -1.0}) {
        Mat D = Mat::Zero(n, m);
        D(a, b) = s;
        out.push_back(std::move(D));
      }
  if (std::min(n, m) >= 2) {
    for (bool alternate : {false, true})
      for (double s : {1.0, -1.0}) {
        Mat D = Mat::Zero(n, m);
        for (int a = 0; a < std::min(n, m); ++a) D(a, a) = (alternate && a % 2) ? -s : s;
        out.push_back(std::move(D));
      }
  }
  return out;
}

/// Deterministic perturbation search: keep the jet if already deep inside,
/// else try slope + eps(1 - 2^{-k}) D over increasing magnitudes and the
/// given direction set; accept the first candidate with margin >= theta*eps.
inline std::function<Jet1(const Jet1&, double)> sweep_perturb(
    std::string name, std::function<double(const Jet1&)> margin,
    std::function<std::vector<Mat>(const Jet1&)> directions) {
  return [name = std::move(name), margin = std::move(margin),
          directions = std::move(directions)](const Jet1& j, double eps) {
    if (!(eps > 0)) throw std::invalid_argument(name + ": perturbation size must be positive");
    const double accept = kSweepTheta * eps;
    if (margin(j) >= accept) return j;
    const std::vector<Mat> dirs = directions(j);
    for (int k = 1; k <= kSweepDepth; ++k) {
      const double mag = eps * (1.0 - std::ldexp(1.0, -k));
      if (!(mag > 0)) continue;
      for (const Mat& D : dirs) {
        Jet1 cand = with_slope(j, j.slope + mag * D);
        if (margin(cand) >= accept) return cand;
      }
    }
    throw std::runtime_error(name + ": fiber perturbation sweep exhausted");
  };
}

inline void check_jet_dims(const Jet1& j, int m, int n, const char* who) {
  if (j.domain_dim() != m || j.target_dim() != n)
    throw std::invalid_argument(std::string(who) + ": jet dimensions mismatch");
}

constexpr double kRankTol = 1e-12;

}  // namespace rel_detail

/// Jets of maps from an m-dimensional domain whose differential together
/// with the distribution spans as much of the target as possible:
/// rank [slope | frame(value)] = min(n, m + r). Margin is that stacked
/// matrix's min(n, m+r)-th singular value. L_xi bounds the frame field's
/// variation with the value (0 for constant frames).
inline RelationOracle transversality_relation(const Distribution& xi, int m,
                                              double L_xi = 0.0) {
  if (m < 1) throw std::invalid_argument("transversality_relation: bad domain dim");
  const int n = xi.ambient_dim;
  const int need = std::min(n, m + xi.rank);
  const Distribution d = xi;
  auto raw = [d, m, n, need](const Jet1& j) {
    rel_detail::check_jet_dims(j, m, n, "transversality");
    Mat S(n, m + d.rank);
    S.leftCols(m) = j.slope;
    S.rightCols(d.rank) = d.frame(j.value);
    Eigen::JacobiSVD<Mat> svd(S);
    return svd.singularValues()(need - 1);
  };
  RelationOracle R;
  R.name = "transverse";
  R.domain_dim = m;
  R.target_dim = n;
  R.contains = [raw](const Jet1& j) { return raw(j) > rel_detail::kRankTol; };
  R.margin = [raw](const Jet1& j) {
    const double v = raw(j);
    return v > rel_detail::kRankTol ? v : 0.0;
  };
  R.fiber_perturb = rel_detail::sweep_perturb("transverse", R.margin, [n, m](const Jet1&) {
    return rel_detail::elementary_directions(n, m);
  });
  R.openness_scales = [L_xi](const Jet1&) { return std::pair<double, double>(1.0, L_xi); };
  return R;
}

/// Jets whose slope has maximal rank min(m, n); margin = smallest singular
/// value of the slope. Immersions for m < n, submersions for m > n.
inline RelationOracle maxrank_relation(int m, int n) {
  if (m < 1 || n < 1) throw std::invalid_argument("maxrank_relation: bad dims");
  auto raw = [m, n](const Jet1& j) {
    rel_detail::check_jet_dims(j, m, n, "maxrank");
    Eigen::JacobiSVD<Mat> svd(j.slope);
    return svd.singularValues()(std::min(m, n) - 1);
  };
  RelationOracle R;
  R.name = "maxrank";
  R.domain_dim = m;
  R.target_dim = n;
  R.contains = [raw](const Jet1& j) { return raw(j) > rel_detail::kRankTol; };
  R.margin = [raw](const Jet1& j) {
    const double v = raw(j);
    return v > rel_detail::kRankTol ? v : 0.0;
  };
  R.fiber_perturb = rel_detail::sweep_perturb("maxrank", R.margin, [n, m](const Jet1&) {
    return rel_detail::elementary_directions(n, m);
  });
  R.openness_scales = [](const Jet1&) { return std::pair<double, double>(1.0, 0.0); };
  return R;
}

namespace rel_detail {

inline Vec curl3(const Mat& A) {
  Vec c(3);
  c(0) = A(2, 1) - A(1, 2);
  c(1) = A(0, 2) - A(2, 0);
  c(2) = A(1, 0) - A(0, 1);
  return c;
}

}  // namespace rel_detail

/// Jets of nowhere-zero 1-form coefficient fields s: R^3 -> R^3 with
/// s . curl(s) != 0, the contact condition for alpha = s_1 dx + s_2 dy +
/// s_3 dz. Margin = |<s, curl A>| / (1 + |s|), with A the ambient slope.
inline RelationOracle contact3d_relation() {
  auto pairing = [](const Jet1& j) {
    rel_detail::check_jet_dims(j, 3, 3, "contact3d");
    if (j.ambient_dim() != 3)
      throw std::invalid_argument("contact3d: ambient space must be R^3");
    if (j.value.norm() == 0.0)
      throw std::invalid_argument("contact3d: zero value (the form must avoid the zero section)");
    const Mat A = j.ambient_slope();
    return j.value.dot(rel_detail::curl3(A));
  };
  RelationOracle R;
  R.name = "contact3d";
  R.domain_dim = 3;
  R.target_dim = 3;
  R.margin = [pairing](const Jet1& j) {
    const double g = pairing(j);
    const double scale = 1.0 + j.value.norm();
    return std::abs(g) > rel_detail::kRankTol * scale ? std::abs(g) / scale : 0.0;
  };
  R.contains = [pairing](const Jet1& j) {
    return std::abs(pairing(j)) > rel_detail::kRankTol * (1.0 + j.value.norm());
  };
  R.fiber_perturb = rel_detail::sweep_perturb("contact3d", R.margin, [](const Jet1& j) {
    // rotational increments first: they enter the pairing directly
    std::vector<Mat> dirs;
    for (int axis = 0; axis < 3; ++axis)
      for (double s : {1.0, -1.0}) {
        Mat G = Mat::Zero(3, 3);
        const int a = (axis + 1) % 3, b = (axis + 2) % 3;
        G(a, b) = -s;
        G(b, a) = s;
        dirs.push_back(G * j.chart);
      }
    for (const Mat& E : rel_detail::elementary_directions(3, 3)) dirs.push_back(E * j.chart);
    return dirs;
  });
  R.openness_scales = [pairing](const Jet1& j) {
    const Mat A = j.ambient_slope();
    const double s = j.value.norm();
    const double L_slope = 4.0 * std::sqrt(3.0);
    const double L_val =
        2.0 * (rel_detail::curl3(A).norm() + std::abs(pairing(j)) / (1.0 + s)) / (1.0 + s);
    return std::pair<double, double>(L_slope, std::max(L_val, 1e-3));
  };
  return R;
}

// ---------------------------------------------------------------------------
// Very general position

namespace rel_detail {

/// Canonical key of the rational row space of a matrix (reduced row echelon
/// form), exact. Rows are direction vectors in barycentric coordinates.
inline std::string rational_rowspace_key(std::vector<std::vector<Rat>> rows) {
  const std::size_t ncols = rows.empty() ? 0 : rows[0].size();
  std::size_t row = 0;
  for (std::size_t lead = 0; lead < ncols && row < rows.size(); ++lead) {
    std::size_t i = row;
    while (i < rows.size() && rows[i][lead].num == 0) ++i;
    if (i == rows.size()) continue;
    std::swap(rows[row], rows[i]);
    const Rat piv = rows[row][lead];
    for (std::size_t c = 0; c < ncols; ++c) rows[row][c] = rows[row][c] / piv;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if (k == row || rows[k][lead].num == 0) continue;
      const Rat f = rows[k][lead];
      for (std::size_t c = 0; c < ncols; ++c) rows[k][c] = rows[k][c] - f * rows[row][c];
    }
    ++row;
  }
  // drop zero rows, serialize
  std::ostringstream os;
  for (const auto& row : rows) {
    bool zero = true;
    for (const Rat& x : row)
      if (x.num != 0) zero = false;
    if (zero) continue;
    for (const Rat& x : row) os << x.num << '/' << x.den << ',';
    os << ';';
  }
  return os.str();
}

/// Distinct direction spaces (in barycentric coordinates over the hosting
/// simplex) of all faces of dimension >= 1 of all catalog models. Computed
/// once per catalog dimension.
inline std::vector<std::vector<std::vector<Rat>>> catalog_face_spaces(const ModelCatalog& cat) {
  std::map<std::string, std::vector<std::vector<Rat>>> spaces;
  for (const NormalForm& model : cat.models) {
    const std::size_t k = model.size();
    for (std::uint32_t mask = 1; mask < (1u << k); ++mask) {
      if (__builtin_popcount(mask) < 2) continue;
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < k; ++i)
        if (mask & (1u << i)) idx.push_back(i);
      std::vector<std::vector<Rat>> dirs;
      for (std::size_t i = 1; i < idx.size(); ++i) {
        std::vector<Rat> d(model[0].size());
        for (std::size_t c = 0; c < d.size(); ++c)
          d[c] = model[idx[i]][c] - model[idx[0]][c];
        dirs.push_back(std::move(d));
      }
      std::string key = rational_rowspace_key(dirs);
      spaces.emplace(std::move(key), std::move(dirs));
    }
  }
  std::vector<std::vector<std::vector<Rat>>> out;
  out.reserve(spaces.size());
  for (auto& [key, dirs] : spaces) out.push_back(std::move(dirs));
  return out;
}

/// Orthonormal chart bases of the given barycentric direction spaces,
/// realized on a concrete simplex (columns of P) with chart Q.
inline std::vector<Mat> realize_face_spaces(
    const std::vector<std::vector<std::vector<Rat>>>& spaces, const Mat& P, const Mat& Q) {
  std::vector<Mat> out;
  out.reserve(spaces.size());
  for (const auto& dirs : spaces) {
    Mat D(P.cols(), static_cast<int>(dirs.size()));
    for (std::size_t j = 0; j < dirs.size(); ++j)
      for (std::size_t i = 0; i < dirs[j].size(); ++i)
        D(static_cast<int>(i), static_cast<int>(j)) = dirs[j][i].to_double();
    const Mat amb = P * D;
    const Mat C = Q.transpose() * amb;
    Eigen::HouseholderQR<Mat> qr(C);
    out.push_back(qr.householderQ() * Mat::Identity(C.rows(), C.cols()));
  }
  return out;
}

/// Orthonormal basis of the preimage slope^{-1}(span X) inside the chart,
/// with the smallest nonzero singular value of the reduced slope (the
/// conditioning of the plane). Empty optional when the map is not
/// transverse to the distribution (rank deficiency).
struct PreimagePlane {
  Mat basis;          // m x w, orthonormal (w may be 0)
  double conditioning = 1.0;
};

inline std::optional<PreimagePlane> preimage_plane(const Mat& slope, const Mat& X) {
  const int m = static_cast<int>(slope.cols());
  const int n = static_cast<int>(slope.rows());
  const int r = static_cast<int>(X.cols());
  PreimagePlane out;
  if (r >= n) {  // full distribution: preimage is everything, unconditionally
    out.basis = Mat::Identity(m, m);
    out.conditioning = 1.0;
    return out;
  }
  const Mat reduced = slope - X * (X.transpose() * slope);
  Eigen::JacobiSVD<Mat> svd(reduced, Eigen::ComputeFullV);
  const int k = std::min(m, n - r);
  const double sk = svd.singularValues()(k - 1);
  const double smax = svd.singularValues()(0);
  if (sk <= kRankTol * std::max(1.0, smax)) return std::nullopt;
  out.conditioning = sk;
  const int w = m - k;
  out.basis = w > 0 ? Mat(svd.matrixV().rightCols(w)) : Mat(m, 0);
  return out;
}

/// min(m, d+w)-th singular value of [B_F | B_W]: the angle margin of the
/// face space against the foliation by W-translates.
inline double face_plane_margin(const Mat& BF, const Mat& BW) {
  const int m = static_cast<int>(BF.rows());
  const int cols = static_cast<int>(BF.cols() + BW.cols());
  if (BW.cols() == 0) return 1.0;  // point foliation: always transverse
  Mat M(m, cols);
  M.leftCols(BF.cols()) = BF;
  M.rightCols(BW.cols()) = BW;
  Eigen::JacobiSVD<Mat> svd(M);
  return svd.singularValues()(std::min(m, cols) - 1);
}

}  // namespace rel_detail

/// Relation oracle for very general position of one top cell: every face of
/// every catalog model of the cell must stay transverse to the pullback
/// plane slope^{-1}(xi at value). The certified margin is conservative:
/// (face angle margin) * (plane conditioning, capped at 1) / 4, so that a
/// jet ball of that radius cannot rotate the plane past any face.
inline RelationOracle verygenpos_oracle(const SimplicialComplex& K, std::uint32_t top,
                                        const ModelCatalog& cat, const Distribution& xi,
                                        double L_xi = 0.0) {
  if (K.tops().at(top).size() != static_cast<std::size_t>(cat.m) + 1)
    throw std::invalid_argument("verygenpos_oracle: catalog dimension mismatch");
  const int m = cat.m;
  const int n = xi.ambient_dim;
  const Mat P = K.points_of(K.tops()[top]);
  const OrthoChart ch = ortho_chart(P);
  using SpaceKey = std::tuple<int, std::size_t, bool>;
  static std::map<SpaceKey, std::vector<std::vector<std::vector<Rat>>>> space_cache;
  static std::mutex space_mutex;
  std::vector<Mat> faces;
  {
    const SpaceKey key{cat.m, cat.models.size(), cat.facet_generated_only};
    std::lock_guard<std::mutex> lock(space_mutex);
    auto it = space_cache.find(key);
    if (it == space_cache.end())
      it = space_cache.emplace(key, rel_detail::catalog_face_spaces(cat)).first;
    faces = rel_detail::realize_face_spaces(it->second, P, ch.Q);
  }
  const Distribution d = xi;
  auto analyze = [d, m, n, faces](const Jet1& j) -> std::pair<double, double> {
    rel_detail::check_jet_dims(j, m, n, "verygenpos");
    const Mat X = d.frame(j.value);
    auto plane = rel_detail::preimage_plane(j.slope, X);
    if (!plane) return {0.0, 0.0};
    double worst = 1.0;
    for (const Mat& BF : faces)
      worst = std::min(worst, rel_detail::face_plane_margin(BF, plane->basis));
    return {worst, std::min(plane->conditioning, 1.0)};
  };
  RelationOracle R;
  R.name = "verygenpos";
  R.domain_dim = m;
  R.target_dim = n;
  R.contains = [analyze](const Jet1& j) {
    auto [worst, cond] = analyze(j);
    return cond > 0.0 && worst > rel_detail::kRankTol;
  };
  R.margin = [analyze](const Jet1& j) {
    auto [worst, cond] = analyze(j);
    if (cond <= 0.0 || worst <= rel_detail::kRankTol) return 0.0;
    return 0.25 * cond * std::min(worst, 1.0);
  };
  R.fiber_perturb = rel_detail::sweep_perturb("verygenpos", R.margin, [n, m, d](const Jet1& j) {
    std::vector<Mat> dirs;
    // Rank-one increments u v^T with u outside the distribution: they
    // dominate the reduced slope at small conditioning and steer the
    // pullback plane's kernel toward v's orthogonal complement, so a fan
    // of v angles escapes every model-edge tangency. Elementary matrices
    // alone park the kernel on coordinate axes, which ARE model edges.
    const Mat X = d.frame(j.value);
    const int r = static_cast<int>(X.cols());
    if (r < n) {
      Mat full = Eigen::HouseholderQR<Mat>(X).householderQ();
      const Mat U = full.rightCols(n - r);
      std::vector<Vec> fan;
      if (m == 2) {
        for (int a = 0; a < 16; ++a) {
          const double th = (2 * a + 1) * 3.14159265358979323846 / 32.0;
          Vec v(2);
          v << std::cos(th), std::sin(th);
          fan.push_back(std::move(v));
        }
      } else {
        for (int b = 0; b < m; ++b) fan.push_back(Vec::Unit(m, b));
        for (int b = 0; b < m; ++b)
          for (int c = b + 1; c < m; ++c)
            for (double s : {1.0, -1.0}) {
              Vec v = Vec::Unit(m, b) + s * Vec::Unit(m, c);
              fan.push_back(v / v.norm());
            }
      }
      for (int i = 0; i < U.cols(); ++i)
        for (const Vec& v : fan)
          for (double s : {1.0, -1.0}) dirs.push_back(s * U.col(i) * v.transpose());
    }
    for (Mat& E : rel_detail::elementary_directions(n, m)) dirs.push_back(std::move(E));
    return dirs;
  });
  R.openness_scales = [L_xi](const Jet1&) { return std::pair<double, double>(1.0, L_xi); };
  return R;
}

/// Family building the very-general-position oracle of each top cell.
inline RelationFamily verygenpos_family(const Distribution& xi, double L_xi = 0.0) {
  return [xi, L_xi](const SimplicialComplex& K, std::uint32_t top) {
    const int m = static_cast<int>(K.tops().at(top).size()) - 1;
    return verygenpos_oracle(K, top, model_catalog_for_dim(m), xi, L_xi);
  };
}

/// Simultaneous membership in several relations: margin = min, contains =
/// all; the perturbation sweep drives the combined margin.
inline RelationOracle intersect_relations(std::vector<RelationOracle> rs) {
  if (rs.empty()) throw std::invalid_argument("intersect_relations: empty list");
  RelationOracle R;
  R.domain_dim = rs[0].domain_dim;
  R.target_dim = rs[0].target_dim;
  std::string name = "intersection(";
  for (std::size_t i = 0; i < rs.size(); ++i) {
    if (rs[i].domain_dim != R.domain_dim || rs[i].target_dim != R.target_dim)
      throw std::invalid_argument("intersect_relations: dimension mismatch");
    name += (i ? "," : "") + rs[i].name;
  }
  name += ")";
  R.name = name;
  const std::vector<RelationOracle> parts = std::move(rs);
  R.margin = [parts](const Jet1& j) {
    double v = std::numeric_limits<double>::infinity();
    for (const auto& p : parts) v = std::min(v, p.margin(j));
    return v;
  };
  R.contains = [parts](const Jet1& j) {
    for (const auto& p : parts)
      if (!p.contains(j)) return false;
    return true;
  };
  const int n = R.target_dim, m = R.domain_dim;
  R.fiber_perturb = rel_detail::sweep_perturb(name, R.margin, [n, m](const Jet1&) {
    return rel_detail::elementary_directions(n, m);
  });
  R.openness_scales = [parts](const Jet1& j) {
    std::pair<double, double> s(1.0, 0.0);
    for (const auto& p : parts) {
      auto q = p.openness_scales(j);
      s.first = std::max(s.first, q.first);
      s.second = std::max(s.second, q.second);
    }
    return s;
  };
  return R;
}

// ---------------------------------------------------------------------------
// General-position verification of a concrete map

struct GeneralPositionEntry {
  std::uint32_t top = 0;
  SimplexKey face;
  double margin = 0.0;
};

struct GeneralPositionReport {
  bool pass = false;
  double min_margin = 0.0;
  std::vector<GeneralPositionEntry> entries;
  std::string note;
};

/// Checks every face (dimension >= 1) of every top cell of f's complex for
/// transversality against the pullback of xi under the piece's slope,
/// sampled across each cell (one sample when xi is constant and the piece
/// affine; otherwise a barycentric grid of the given density). Margins are
/// raw angle margins; rank failure of the pullback reports 0.
inline GeneralPositionReport verify_general_position(const PiecewiseMap& f,
                                                     const Distribution& xi, int samples = 2) {
  const SimplicialComplex& K = f.complex();
  GeneralPositionReport rep;
  rep.min_margin = std::numeric_limits<double>::infinity();
  for (std::uint32_t t = 0; t < K.tops().size(); ++t) {
    const SimplexKey& s = K.tops()[t];
    const std::size_t k = s.size();
    if (k < 2) continue;
    const Mat P = K.points_of(s);
    const OrthoChart ch = ortho_chart(P);
    const bool one_sample = xi.constant && f.piece_is_affine(t);
    std::vector<Vec> probes;
    if (one_sample)
      probes.push_back(P.rowwise().mean());
    else
      probes = map_detail::simplex_grid(P, std::max(1, samples));
    std::vector<std::optional<rel_detail::PreimagePlane>> planes;
    planes.reserve(probes.size());
    for (const Vec& x : probes) {
      const Jet1 j = f.piece_jet(t, x);
      planes.push_back(rel_detail::preimage_plane(j.slope, xi.frame(j.value)));
    }
    for (std::uint32_t mask = 1; mask < (1u << k); ++mask) {
      if (__builtin_popcount(mask) < 2) continue;
      std::vector<int> idx;
      for (std::size_t i = 0; i < k; ++i)
        if (mask & (1u << i)) idx.push_back(static_cast<int>(i));
      Mat D(P.rows(), static_cast<int>(idx.size()) - 1);
      for (std::size_t i = 1; i < idx.size(); ++i)
        D.col(static_cast<int>(i) - 1) = P.col(idx[i]) - P.col(idx[0]);
      const Mat C = ch.Q.transpose() * D;
      Eigen::HouseholderQR<Mat> qr(C);
      const Mat BF = qr.householderQ() * Mat::Identity(C.rows(), C.cols());
      double worst = std::numeric_limits<double>::infinity();
      for (const auto& plane : planes) {
        if (!plane) {
          worst = 0.0;
          break;
        }
        worst = std::min(worst, rel_detail::face_plane_margin(BF, plane->basis));
      }
      GeneralPositionEntry e;
      e.top = t;
      for (int i : idx) e.face.push_back(s[static_cast<std::size_t>(i)]);
      e.margin = worst;
      rep.min_margin = std::min(rep.min_margin, worst);
      rep.entries.push_back(std::move(e));
    }
  }
  if (rep.entries.empty()) rep.min_margin = 0.0;
  rep.pass = rep.min_margin > 1e-9;
  rep.note = xi.constant ? "exact per-face checks (constant distribution)"
                         : "sampled approximation: margins evaluated on a finite grid";
  return rep;
}

}  // namespace jiggle
