#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace jiggle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kGeomTol = 1e-9;

inline double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

/// Edge frame of an ordered simplex: columns are v_i - v_0 for i = 1..m.
/// `points` holds the vertices as columns (N x (m+1)), in vertex order.
inline Mat edge_frame(const Mat& points) {
  const int m = static_cast<int>(points.cols()) - 1;
  Mat T(points.rows(), m);
  for (int i = 0; i < m; ++i) T.col(i) = points.col(i + 1) - points.col(0);
  return T;
}

/// Largest pairwise vertex distance.
inline double rmax(const Mat& points) {
  double r = 0.0;
  for (int i = 0; i < points.cols(); ++i)
    for (int j = i + 1; j < points.cols(); ++j)
      r = std::max(r, (points.col(i) - points.col(j)).norm());
  return r;
}

/// Affine degeneracy test on the edge-frame Gram determinant:
/// sqrt(det(T^T T)) = m! * volume, compared against 1e-9 * rmax^m.
inline bool degenerate(const Mat& points) {
  const int m = static_cast<int>(points.cols()) - 1;
  if (m == 0) return false;
  const double r = rmax(points);
  if (r == 0.0) return true;
  const Mat T = edge_frame(points);
  const double g = (T.transpose() * T).determinant();
  const double vol_m_fact = std::sqrt(std::max(0.0, g));
  return vol_m_fact <= kGeomTol * std::pow(r, m);
}

/// m-dimensional volume of an m-simplex in R^N.
inline double simplex_volume(const Mat& points) {
  const int m = static_cast<int>(points.cols()) - 1;
  if (m == 0) return 0.0;
  const Mat T = edge_frame(points);
  const double g = (T.transpose() * T).determinant();
  return std::sqrt(std::max(0.0, g)) / factorial(m);
}

/// Signed volume for full-dimensional simplices (m == N).
inline double signed_volume(const Mat& points) {
  const int m = static_cast<int>(points.cols()) - 1;
  if (m != points.rows()) throw std::invalid_argument("signed_volume: simplex not full-dimensional");
  return edge_frame(points).determinant() / factorial(m);
}

/// Smallest distance from a vertex to the affine span of the opposite face.
inline double rmin(const Mat& points) {
  const int m = static_cast<int>(points.cols()) - 1;
  if (m == 0) return 0.0;
  if (degenerate(points)) throw std::domain_error("rmin: degenerate simplex");
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= m; ++i) {
    // Opposite face spanned by all vertices except i; project v_i onto it.
    int base = (i == 0) ? 1 : 0;
    Mat D(points.rows(), m - 1);
    int c = 0;
    for (int j = 0; j <= m; ++j) {
      if (j == i || j == base) continue;
      D.col(c++) = points.col(j) - points.col(base);
    }
    const Vec w = points.col(i) - points.col(base);
    double dist;
    if (m == 1) {
      dist = w.norm();
    } else {
      const Vec coeffs = D.colPivHouseholderQr().solve(w);
      dist = (w - D * coeffs).norm();
    }
    best = std::min(best, dist);
  }
  return best;
}

/// Least-squares left inverse of the edge frame: maps displacements from v_0
/// back to edge coefficients. Rows of it give the coefficient functionals.
inline Mat frame_pseudo_inverse(const Mat& T) {
  return (T.transpose() * T).ldlt().solve(T.transpose());
}

/// Largest coefficient magnitude over unit-norm edge combinations:
/// lambda = max_i max { |c_i| : |T c| = 1 } = max_i ||row_i(T^+)||.
inline double lambda_coeff(const Mat& points) {
  if (degenerate(points)) throw std::domain_error("lambda_coeff: degenerate simplex");
  const Mat Tp = frame_pseudo_inverse(edge_frame(points));
  double best = 0.0;
  for (int i = 0; i < Tp.rows(); ++i) best = std::max(best, Tp.row(i).norm());
  return best;
}

/// lambda_coeff depends on which vertex anchors the edge frame. This is the
/// anchor-free variant (the best anchoring), a genuine shape functional:
/// invariant under all vertex permutations and scaling like 1/t. Level-wise
/// scaling measurements across subdivisions use this one, since subdivision
/// cells carry no preferred anchor.
inline double lambda_coeff_shape(const Mat& points) {
  const int n = static_cast<int>(points.cols());
  double best = std::numeric_limits<double>::infinity();
  Mat P(points.rows(), n);
  for (int a = 0; a < n; ++a) {
    P.col(0) = points.col(a);
    int c = 1;
    for (int j = 0; j < n; ++j)
      if (j != a) P.col(c++) = points.col(j);
    best = std::min(best, lambda_coeff(P));
  }
  return best;
}

struct SimplexFrame {
  Mat T;      ///< edge frame, N x m
  Mat T_inv;  ///< least-squares left inverse, m x N
};

inline SimplexFrame simplex_frame(const Mat& points) {
  if (degenerate(points)) throw std::domain_error("simplex_frame: degenerate simplex");
  SimplexFrame f;
  f.T = edge_frame(points);
  f.T_inv = frame_pseudo_inverse(f.T);
  return f;
}

/// Orthonormal basis of the simplex's affine span (thin QR of the edge
/// frame) plus the triangular factor. The chart map is x = v_0 + Q u; slopes
/// of affine pieces are taken with respect to these coordinates so that a
/// unit slope change moves values by one unit per unit of physical distance.
struct OrthoChart {
  Mat Q;  ///< N x m, orthonormal columns
  Mat R;  ///< m x m, upper triangular, T = Q R
};

inline OrthoChart ortho_chart(const Mat& points) {
  const Mat T = edge_frame(points);
  const int m = static_cast<int>(T.cols());
  Eigen::HouseholderQR<Mat> qr(T);
  Mat thinQ = qr.householderQ() * Mat::Identity(T.rows(), m);
  Mat R = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
  // Fix signs so R has positive diagonal; makes the chart deterministic.
  for (int i = 0; i < m; ++i) {
    if (R(i, i) < 0) {
      R.row(i) = -R.row(i);
      thinQ.col(i) = -thinQ.col(i);
    }
  }
  OrthoChart c;
  c.Q = std::move(thinQ);
  c.R = std::move(R);
  return c;
}

inline double operator_norm(const Mat& A) {
  if (A.size() == 0) return 0.0;
  return A.jacobiSvd().singularValues()(0);
}

/// Nearest point of the simplex with vertex matrix P to x, by checking the
/// affine projection onto every face span (exhaustive; fine for m <= 4).
inline Vec closest_point_in_simplex(const Vec& x, const Mat& P) {
  const int k = static_cast<int>(P.cols());
  Vec best = P.col(0);
  double best_d = (x - best).norm();
  for (unsigned mask = 1; mask < (1u << k); ++mask) {
    std::vector<int> idx;
    for (int i = 0; i < k; ++i)
      if (mask & (1u << i)) idx.push_back(i);
    const int d = static_cast<int>(idx.size()) - 1;
    Vec cand;
    if (d == 0) {
      cand = P.col(idx[0]);
    } else {
      Mat T(P.rows(), d);
      for (int j = 0; j < d; ++j) T.col(j) = P.col(idx[j + 1]) - P.col(idx[0]);
      Eigen::VectorXd c = (T.transpose() * T).ldlt().solve(T.transpose() * (x - P.col(idx[0])));
      double s = 0;
      bool ok = true;
      for (int j = 0; j < d; ++j) {
        if (c(j) < -1e-12) { ok = false; break; }
        s += c(j);
      }
      if (!ok || s > 1 + 1e-12) continue;
      cand = P.col(idx[0]) + T * c;
    }
    const double dd = (x - cand).norm();
    if (dd < best_d) {
      best_d = dd;
      best = cand;
    }
  }
  return best;
}

inline double point_simplex_distance(const Vec& x, const Mat& P) {
  return (x - closest_point_in_simplex(x, P)).norm();
}

/// Affine (barycentric) coordinates of x with respect to the simplex with
/// vertex matrix P, by least squares on [P; 1]. If `residual` is given it
/// receives the distance between x and the affine span.
inline Vec affine_coords(const Mat& P, const Vec& x, double* residual = nullptr) {
  const int N = static_cast<int>(P.rows());
  const int k = static_cast<int>(P.cols());
  Mat A(N + 1, k);
  A.topRows(N) = P;
  A.bottomRows(1).setOnes();
  Vec rhs(N + 1);
  rhs.head(N) = x;
  rhs(N) = 1.0;
  const Vec lam = A.colPivHouseholderQr().solve(rhs);
  if (residual) *residual = (A * lam - rhs).norm();
  return lam;
}

/// Whether x lies in the simplex (affine coordinates nonnegative and the
/// point on the affine span), with scale-relative tolerance.
inline bool point_in_simplex(const Mat& P, const Vec& x, double tol = kGeomTol) {
  const double scale = std::max(1.0, rmax(P));
  double res = 0.0;
  const Vec lam = affine_coords(P, x, &res);
  if (res > tol * scale) return false;
  for (int i = 0; i < lam.size(); ++i)
    if (lam(i) < -tol) return false;
  return true;
}

}  // namespace jiggle
