#pragma once

/// \file jets.hpp
/// First-order jets of maps over a simplex, expressed in the simplex's own
/// orthonormal chart, and their linear (affine) extensions.

#include <stdexcept>

#include "simplex_geometry.hpp"

namespace jiggle {

/// Value and first derivative of a map at one point of a simplex. The
/// derivative is an n x m matrix in the chart spanned by `chart` (orthonormal
/// columns in R^N); `origin` is the chart's base point, so a domain point x
/// has chart coordinates chartᵀ(x - origin) and the jet sits at chart
/// coordinates `base`.
struct Jet1 {
  Vec base;    // chart coordinates, size m
  Vec value;   // target value, size n
  Mat slope;   // n x m derivative in chart coordinates
  Mat chart;   // N x m orthonormal chart frame
  Vec origin;  // ambient chart origin, size N

  int domain_dim() const { return static_cast<int>(chart.cols()); }
  int ambient_dim() const { return static_cast<int>(chart.rows()); }
  int target_dim() const { return static_cast<int>(value.size()); }

  /// Derivative as a map on ambient coordinates (zero across the chart's
  /// normal directions).
  Mat ambient_slope() const { return slope * chart.transpose(); }

  void check_dims() const {
    if (slope.rows() != value.size() || slope.cols() != chart.cols() ||
        chart.rows() != origin.size() || base.size() != chart.cols())
      throw std::invalid_argument("jet dimensions inconsistent");
  }
};

/// Distance between two jets over the same chart: value gap plus slope gap
/// in operator norm. Used for perturbation budgets.
inline double jet_distance(const Jet1& a, const Jet1& b) {
  if (a.value.size() != b.value.size() || a.slope.cols() != b.slope.cols())
    throw std::invalid_argument("jet_distance: dimension mismatch");
  return (a.value - b.value).norm() + operator_norm(a.slope - b.slope);
}

/// The unique affine map with the jet's value and slope at its base point,
/// evaluated at an ambient point.
inline Vec linear_extension(const Jet1& jet, const Vec& x) {
  jet.check_dims();
  if (x.size() != jet.origin.size())
    throw std::invalid_argument("linear_extension: ambient dimension mismatch");
  const Vec u = jet.chart.transpose() * (x - jet.origin);
  return jet.value + jet.slope * (u - jet.base);
}

/// The jet of linear_extension(jet, .) at ambient point x: same slope, value
/// transported affinely. Round-tripping at the base point returns the input.
inline Jet1 jet_of_extension(const Jet1& jet, const Vec& x) {
  Jet1 out = jet;
  out.base = jet.chart.transpose() * (x - jet.origin);
  out.value = linear_extension(jet, x);
  return out;
}

}  // namespace jiggle
