#pragma once

/// \file function_registry.hpp
/// Named smooth maps R^N -> R^n with value and derivative evaluators. The
/// registry names are what the CLI and the JSON formats refer to; composite
/// maps (interpolations etc.) reuse the same type with closure evaluators
/// and are not serializable.

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "simplex_geometry.hpp"

namespace jiggle {

/// A smooth map with explicit dimensions and evaluators. `name` is a
/// registry id when the map came from the registry ("identity", "constant",
/// "linear", "quadratic", "sin_field"), or a descriptive tag otherwise.
struct SmoothMap {
  std::string name;
  std::vector<double> params;
  int domain_dim = 0;
  int target_dim = 0;
  std::function<Vec(const Vec&)> value;
  std::function<Mat(const Vec&)> jacobian;

  bool serializable() const {
    return name == "identity" || name == "constant" || name == "linear" ||
           name == "quadratic" || name == "sin_field";
  }
};

/// Build a registry map by name.
///  - "identity":  x -> x, n = N, no params
///  - "constant":  x -> c, params = c (n = |params|)
///  - "linear":    x -> A x + b, params = row-major A (n x N) then b; n
///                 deduced from |params| = n (N + 1)
///  - "quadratic": componentwise square, n = N
///  - "sin_field": componentwise sine, n = N
inline SmoothMap make_smooth_map(const std::string& name, int domain_dim,
                                 std::vector<double> params = {}) {
  if (domain_dim < 1) throw std::invalid_argument("smooth map needs domain_dim >= 1");
  SmoothMap f;
  f.name = name;
  f.params = std::move(params);
  f.domain_dim = domain_dim;
  const int N = domain_dim;

  if (name == "identity") {
    f.target_dim = N;
    f.value = [](const Vec& x) { return x; };
    f.jacobian = [N](const Vec&) { return Mat::Identity(N, N); };
  } else if (name == "constant") {
    if (f.params.empty()) throw std::invalid_argument("constant map needs value params");
    const int n = static_cast<int>(f.params.size());
    f.target_dim = n;
    Vec c(n);
    for (int i = 0; i < n; ++i) c(i) = f.params[i];
    f.value = [c](const Vec&) { return c; };
    f.jacobian = [n, N](const Vec&) { return Mat::Zero(n, N); };
  } else if (name == "linear") {
    if (f.params.size() % (N + 1) != 0 || f.params.empty())
      throw std::invalid_argument("linear map params must be a row-major n x N matrix plus offset");
    const int n = static_cast<int>(f.params.size()) / (N + 1);
    f.target_dim = n;
    Mat A(n, N);
    Vec bvec(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < N; ++j) A(i, j) = f.params[i * N + j];
      bvec(i) = f.params[n * N + i];
    }
    f.value = [A, bvec](const Vec& x) { return (A * x + bvec).eval(); };
    f.jacobian = [A](const Vec&) { return A; };
  } else if (name == "quadratic") {
    f.target_dim = N;
    f.value = [](const Vec& x) { return x.array().square().matrix().eval(); };
    f.jacobian = [N](const Vec& x) {
      Mat J = Mat::Zero(N, N);
      for (int i = 0; i < N; ++i) J(i, i) = 2.0 * x(i);
      return J;
    };
  } else if (name == "sin_field") {
    f.target_dim = N;
    f.value = [](const Vec& x) { return x.array().sin().matrix().eval(); };
    f.jacobian = [N](const Vec& x) {
      Mat J = Mat::Zero(N, N);
      for (int i = 0; i < N; ++i) J(i, i) = std::cos(x(i));
      return J;
    };
  } else {
    throw std::invalid_argument("unknown smooth map \"" + name + "\"");
  }
  return f;
}

/// Largest relative finite-difference error of the jacobian at x. The
/// registry invariant is that this stays below 1e-6 at random points.
inline double jacobian_fd_error(const SmoothMap& f, const Vec& x, double h = 1e-6) {
  const Mat J = f.jacobian(x);
  double worst = 0.0;
  for (int j = 0; j < f.domain_dim; ++j) {
    Vec xp = x, xm = x;
    xp(j) += h;
    xm(j) -= h;
    const Vec col = (f.value(xp) - f.value(xm)) / (2.0 * h);
    worst = std::max(worst, (col - J.col(j)).norm() / (1.0 + J.col(j).norm()));
  }
  return worst;
}

}  // namespace jiggle
