#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include <catch_amalgamated.hpp>
#include <jiggle/jiggle.hpp>

#include "helpers.hpp"

using namespace jiggle;

namespace {

std::shared_ptr<SimplicialComplex> shared(SimplicialComplex K) {
  return std::make_shared<SimplicialComplex>(std::move(K));
}

double regression_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const int n = static_cast<int>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

TEST_CASE("smooth map registry evaluates and differentiates correctly") {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> U(-2.0, 2.0);

  SECTION("identity") {
    const SmoothMap f = make_smooth_map("identity", 3);
    REQUIRE(f.target_dim == 3);
    const Vec x = fixtures::v3(U(rng), U(rng), U(rng));
    REQUIRE((f.value(x) - x).norm() == 0.0);
    REQUIRE((f.jacobian(x) - Mat::Identity(3, 3)).norm() == 0.0);
  }

  SECTION("constant") {
    const SmoothMap f = make_smooth_map("constant", 2, {3.5, -1.25});
    REQUIRE(f.target_dim == 2);
    const Vec x = fixtures::v2(U(rng), U(rng));
    REQUIRE(f.value(x)(0) == 3.5);
    REQUIRE(f.value(x)(1) == -1.25);
    REQUIRE(f.jacobian(x).norm() == 0.0);
  }

  SECTION("linear deduces target dim from row-major matrix plus offset") {
    // A = [[1,2],[3,4],[5,6]], b = (7,8,9): 3x2 + 3 = 9 params
    const SmoothMap f = make_smooth_map("linear", 2, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    REQUIRE(f.target_dim == 3);
    const Vec x = fixtures::v2(0.5, -1.0);
    const Vec y = f.value(x);
    REQUIRE(y(0) == Catch::Approx(1 * 0.5 + 2 * -1.0 + 7).margin(1e-15));
    REQUIRE(y(1) == Catch::Approx(3 * 0.5 + 4 * -1.0 + 8).margin(1e-15));
    REQUIRE(y(2) == Catch::Approx(5 * 0.5 + 6 * -1.0 + 9).margin(1e-15));
    const Mat J = f.jacobian(x);
    REQUIRE(J(0, 0) == 1.0);
    REQUIRE(J(2, 1) == 6.0);
  }

  SECTION("quadratic and sin_field act componentwise") {
    const SmoothMap q = make_smooth_map("quadratic", 2);
    const SmoothMap s = make_smooth_map("sin_field", 2);
    const Vec x = fixtures::v2(0.3, -0.7);
    REQUIRE(q.value(x)(0) == 0.3 * 0.3);
    REQUIRE(q.value(x)(1) == -0.7 * -0.7);
    REQUIRE(q.jacobian(x)(0, 0) == 0.6);
    REQUIRE(q.jacobian(x)(0, 1) == 0.0);
    REQUIRE(s.value(x)(0) == std::sin(0.3));
    REQUIRE(s.jacobian(x)(1, 1) == std::cos(-0.7));
  }

  SECTION("jacobians match finite differences at random points") {
    const std::vector<SmoothMap> maps{
        make_smooth_map("identity", 2),
        make_smooth_map("constant", 2, {1.0, 2.0, 3.0}),
        make_smooth_map("linear", 2, {1, 2, 3, 4, 5, 6}),
        make_smooth_map("quadratic", 2),
        make_smooth_map("sin_field", 2),
    };
    for (const SmoothMap& f : maps) {
      for (int trial = 0; trial < 20; ++trial) {
        const Vec x = fixtures::v2(U(rng), U(rng));
        REQUIRE(jacobian_fd_error(f, x) < 1e-6);
      }
    }
  }

  SECTION("serializability flags registry names only") {
    REQUIRE(make_smooth_map("identity", 2).serializable());
    SmoothMap f = make_smooth_map("identity", 2);
    f.name = "interpolated";
    REQUIRE_FALSE(f.serializable());
  }

  SECTION("rejects bad constructions") {
    REQUIRE_THROWS_AS(make_smooth_map("wobble", 2), std::invalid_argument);
    REQUIRE_THROWS_WITH(make_smooth_map("wobble", 2),
                        Catch::Matchers::ContainsSubstring("unknown smooth map"));
    REQUIRE_THROWS_AS(make_smooth_map("identity", 0), std::invalid_argument);
    REQUIRE_THROWS_AS(make_smooth_map("constant", 2), std::invalid_argument);
    REQUIRE_THROWS_AS(make_smooth_map("linear", 2, {1.0, 2.0}), std::invalid_argument);
  }
}

TEST_CASE("piecewise maps evaluate, locate, and validate their inputs") {
  auto K = shared(fixtures::path_complex(3));

  SECTION("locate_top scans tops in order and reports misses") {
    REQUIRE(locate_top(*K, fixtures::v1(0.5)).value() == 0);
    REQUIRE(locate_top(*K, fixtures::v1(2.7)).value() == 2);
    REQUIRE_FALSE(locate_top(*K, fixtures::v1(3.5)).has_value());
    REQUIRE_FALSE(locate_top(*K, fixtures::v1(-0.25)).has_value());
    // a shared vertex belongs to some cell
    REQUIRE(locate_top(*K, fixtures::v1(1.0)).has_value());
  }

  SECTION("PL evaluation interpolates vertex values affinely") {
    std::vector<Vec> vals{fixtures::v1(0.0), fixtures::v1(2.0), fixtures::v1(-1.0),
                          fixtures::v1(5.0)};
    const PiecewiseMap f = PiecewiseMap::pl(K, 1, vals);
    REQUIRE(f.is_pl());
    REQUIRE(f.target_dim() == 1);
    REQUIRE(f.evaluate(fixtures::v1(0.5))(0) == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(f.evaluate(fixtures::v1(1.5))(0) == Catch::Approx(0.5).margin(1e-12));
    REQUIRE(f.evaluate(fixtures::v1(1.0))(0) == Catch::Approx(2.0).margin(1e-12));
    REQUIRE_THROWS_AS(f.evaluate(fixtures::v1(4.0)), std::invalid_argument);
    REQUIRE(f.value_at_vertex(3)(0) == 5.0);
  }

  SECTION("smooth construction samples vertex values from the map") {
    const PiecewiseMap f = PiecewiseMap::smooth(K, make_smooth_map("sin_field", 1));
    REQUIRE_FALSE(f.is_pl());
    REQUIRE(f.smooth_pieces().size() == K->tops().size());
    for (VertexId v = 0; v < K->vertex_count(); ++v)
      REQUIRE(f.value_at_vertex(v)(0) == std::sin(K->vertex(v)(0)));
    REQUIRE(f.evaluate(fixtures::v1(1.3))(0) == std::sin(1.3));
  }

  SECTION("piece bookkeeping") {
    PiecewiseMap f = PiecewiseMap::smooth(K, make_smooth_map("sin_field", 1));
    REQUIRE_FALSE(f.piece_is_affine(1));
    f.make_piece_affine(1);
    REQUIRE(f.piece_is_affine(1));
    REQUIRE(f.smooth_pieces().size() == K->tops().size() - 1);
    f.set_smooth_piece(1, make_smooth_map("quadratic", 1));
    REQUIRE_FALSE(f.piece_is_affine(1));
  }

  SECTION("value_scale floors at one") {
    std::vector<Vec> small(4, fixtures::v1(0.25));
    REQUIRE(PiecewiseMap::pl(K, 1, small).value_scale() == 1.0);
    std::vector<Vec> big(4, fixtures::v1(-6.0));
    REQUIRE(PiecewiseMap::pl(K, 1, big).value_scale() == 6.0);
  }

  SECTION("rejects malformed constructions") {
    std::vector<Vec> three(3, fixtures::v1(0.0));
    REQUIRE_THROWS_WITH(PiecewiseMap::pl(K, 1, three),
                        Catch::Matchers::ContainsSubstring("one value per vertex"));
    std::vector<Vec> wrongdim(4, fixtures::v2(0.0, 0.0));
    REQUIRE_THROWS_WITH(PiecewiseMap::pl(K, 1, wrongdim),
                        Catch::Matchers::ContainsSubstring("value dim mismatch"));
    std::vector<Vec> ok(4, fixtures::v1(0.0));
    REQUIRE_THROWS_WITH(PiecewiseMap::pl(nullptr, 1, ok),
                        Catch::Matchers::ContainsSubstring("null complex"));
    REQUIRE_THROWS_WITH(PiecewiseMap::smooth(K, make_smooth_map("identity", 2)),
                        Catch::Matchers::ContainsSubstring("domain dim mismatch"));
    PiecewiseMap f = PiecewiseMap::pl(K, 1, ok);
    REQUIRE_THROWS_AS(f.set_vertex_value(0, fixtures::v2(0, 0)), std::invalid_argument);
  }
}

TEST_CASE("continuity defect is zero for consistent maps and flags broken pieces") {
  auto sq = shared(fixtures::square_complex());
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-1, 1);
  std::vector<Vec> vals;
  for (std::size_t v = 0; v < sq->vertex_count(); ++v)
    vals.push_back(fixtures::v2(U(rng), U(rng)));
  PiecewiseMap f = PiecewiseMap::pl(sq, 2, vals);
  REQUIRE(f.continuity_defect() <= 1e-12);

  const PiecewiseMap g = PiecewiseMap::smooth(sq, make_smooth_map("quadratic", 2));
  REQUIRE(g.continuity_defect() <= 1e-12);

  f.set_smooth_piece(0, make_smooth_map("constant", 2, {10.0, 10.0}));
  REQUIRE(f.continuity_defect() > 1.0);
}

TEST_CASE("jets extend affinely and round trip") {
  auto sq = shared(fixtures::square_complex());
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> U(-1, 1);
  std::vector<Vec> vals;
  for (std::size_t v = 0; v < sq->vertex_count(); ++v)
    vals.push_back(fixtures::v2(U(rng), U(rng)));
  const PiecewiseMap f = PiecewiseMap::pl(sq, 2, vals);

  SECTION("piece jet of a PL piece reproduces the piece") {
    const Jet1 j = f.anchor_jet(0);
    j.check_dims();
    REQUIRE(j.domain_dim() == 2);
    REQUIRE(j.ambient_dim() == 2);
    REQUIRE(j.target_dim() == 2);
    REQUIRE(j.base.norm() == 0.0);  // anchored at the first vertex
    const SimplexKey& s = sq->tops()[0];
    for (VertexId v : s) {
      const Vec x = sq->vertex(v);
      REQUIRE((linear_extension(j, x) - f.value_at_vertex(v)).norm() < 1e-12);
    }
    const Vec mid = (sq->vertex(s[0]) + sq->vertex(s[1]) + sq->vertex(s[2])) / 3.0;
    REQUIRE((linear_extension(j, mid) - f.evaluate_on(0, mid)).norm() < 1e-12);
  }

  SECTION("jet transport keeps the slope and moves the value affinely") {
    const Jet1 j = f.anchor_jet(1);
    const Vec x = fixtures::v2(0.4, 0.9);
    const Jet1 moved = jet_of_extension(j, x);
    REQUIRE((moved.slope - j.slope).norm() == 0.0);
    REQUIRE((moved.value - linear_extension(j, x)).norm() == 0.0);
    // moving back to the original base point restores the jet
    const Vec base_pt = j.origin + j.chart * j.base;
    const Jet1 back = jet_of_extension(moved, base_pt);
    REQUIRE((back.value - j.value).norm() < 1e-12);
    REQUIRE((back.base - j.base).norm() < 1e-12);
  }

  SECTION("jet distance separates values and slopes") {
    Jet1 a = f.anchor_jet(0);
    REQUIRE(jet_distance(a, a) == 0.0);
    Jet1 b = a;
    b.value(0) += 0.5;
    REQUIRE(jet_distance(a, b) == Catch::Approx(0.5).margin(1e-15));
    Jet1 c = a;
    c.slope(0, 0) += 0.25;
    REQUIRE(jet_distance(a, c) == Catch::Approx(0.25).margin(1e-12));
    Jet1 wrong = a;
    wrong.value = fixtures::v3(0, 0, 0);
    REQUIRE_THROWS_AS(jet_distance(a, wrong), std::invalid_argument);
    REQUIRE_THROWS_AS(linear_extension(a, fixtures::v3(0, 0, 0)), std::invalid_argument);
  }

  SECTION("smooth piece jets carry the pointwise jacobian") {
    const PiecewiseMap g = PiecewiseMap::smooth(sq, make_smooth_map("quadratic", 2));
    const Vec x = fixtures::v2(0.3, 0.2);
    const std::uint32_t t = locate_top(*sq, x).value();
    const Jet1 j = g.piece_jet(t, x);
    REQUIRE((j.value - g.evaluate_on(t, x)).norm() == 0.0);
    // ambient slope reconstructs the jacobian restricted to the chart
    const Mat J = make_smooth_map("quadratic", 2).jacobian(x);
    REQUIRE(operator_norm(j.ambient_slope() - J) < 1e-12);
  }
}

TEST_CASE("simplex sampling grids and complex lineage") {
  SECTION("barycentric grid enumerates all compositions") {
    Mat P(2, 3);
    P.col(0) = fixtures::v2(0, 0);
    P.col(1) = fixtures::v2(1, 0);
    P.col(2) = fixtures::v2(0, 1);
    const auto grid = map_detail::simplex_grid(P, 4);
    REQUIRE(grid.size() == 15);  // C(4+2, 2)
    for (const Vec& x : grid) REQUIRE(point_in_simplex(P, x));
    int hits = 0;
    for (const Vec& x : grid)
      for (int i = 0; i < 3; ++i)
        if ((x - P.col(i)).norm() == 0.0) ++hits;
    REQUIRE(hits == 3);  // vertices are grid nodes
  }

  SECTION("refinement is detected through lineage signatures") {
    const SimplicialComplex K = fixtures::square_complex();
    const SimplicialComplex K1 = crystalline_subdivide(K, 1);
    const SimplicialComplex K2 = crystalline_subdivide(K, 2);
    REQUIRE(complex_refines(K1, K));
    REQUIRE(complex_refines(K2, K));
    REQUIRE_FALSE(complex_refines(K, K1));
    REQUIRE_FALSE(complex_refines(fixtures::path_complex(2), K));
  }
}

TEST_CASE("C0/C1 distances between piecewise maps") {
  auto K01 = shared(fixtures::unit_simplex(1));
  const PiecewiseMap s = PiecewiseMap::smooth(K01, make_smooth_map("quadratic", 1));

  SECTION("identical maps are at distance zero") {
    std::vector<Vec> vals{fixtures::v1(0.25), fixtures::v1(0.75)};
    const PiecewiseMap f = PiecewiseMap::pl(K01, 1, vals);
    auto [c0, c1] = c0_c1_distance(f, f);
    REQUIRE(c0 == 0.0);
    REQUIRE(c1 == 0.0);
  }

  SECTION("constant offsets move values but not slopes") {
    std::vector<Vec> va{fixtures::v1(0.0), fixtures::v1(1.0)};
    std::vector<Vec> vb{fixtures::v1(0.3), fixtures::v1(1.3)};
    auto [c0, c1] = c0_c1_distance(PiecewiseMap::pl(K01, 1, va), PiecewiseMap::pl(K01, 1, vb));
    REQUIRE(c0 == Catch::Approx(0.3).margin(1e-12));
    REQUIRE(c1 <= 1e-12);
  }

  SECTION("the quadratic and its chord are at distance (1/4, 1)") {
    std::vector<Vec> chord{fixtures::v1(0.0), fixtures::v1(1.0)};
    auto [c0, c1] = c0_c1_distance(s, PiecewiseMap::pl(K01, 1, chord));
    REQUIRE(c0 == Catch::Approx(0.25).margin(1e-12));
    REQUIRE(c1 == Catch::Approx(1.0).margin(1e-12));
  }

  SECTION("order of arguments does not matter") {
    std::vector<Vec> chord{fixtures::v1(0.0), fixtures::v1(1.0)};
    const PiecewiseMap g = PiecewiseMap::pl(K01, 1, chord);
    auto [a0, a1] = c0_c1_distance(s, g);
    auto [b0, b1] = c0_c1_distance(g, s);
    REQUIRE(a0 == Catch::Approx(b0).margin(1e-12));
    REQUIRE(a1 == Catch::Approx(b1).margin(1e-12));
  }

  SECTION("rejects incomparable inputs") {
    std::vector<Vec> v2{fixtures::v2(0, 0), fixtures::v2(1, 1)};
    REQUIRE_THROWS_WITH(
        c0_c1_distance(s, PiecewiseMap::pl(K01, 2, v2)),
        Catch::Matchers::ContainsSubstring("target dimensions differ"));
    auto other = shared(fixtures::path_complex(2));
    std::vector<Vec> v3(3, fixtures::v1(0.0));
    REQUIRE_THROWS_WITH(c0_c1_distance(s, PiecewiseMap::pl(other, 1, v3)),
                        Catch::Matchers::ContainsSubstring("incomparable complexes"));
  }
}

TEST_CASE("linearization agrees at vertices and converges at the expected rates") {
  auto K01 = shared(fixtures::unit_simplex(1));
  const SmoothMap quad = make_smooth_map("quadratic", 1);
  const PiecewiseMap s = PiecewiseMap::smooth(K01, quad);

  SECTION("secant values are exact at subdivision vertices") {
    const PiecewiseMap lin = linearize(s, 2);
    REQUIRE(lin.is_pl());
    const SimplicialComplex& K2 = lin.complex();
    for (VertexId v = 0; v < K2.vertex_count(); ++v)
      REQUIRE((lin.value_at_vertex(v) - quad.value(K2.vertex(v))).norm() == 0.0);
  }

  SECTION("quadratic C0 error is exactly 2^(-2l-2) and C1 error 2^(-l)") {
    for (int l = 0; l <= 4; ++l) {
      auto [c0, c1] = c0_c1_distance(s, linearize(s, l));
      REQUIRE(std::abs(c0 - std::pow(2.0, -2.0 * l - 2.0)) < 1e-12);
      REQUIRE(std::abs(c1 - std::pow(2.0, -l)) < 1e-12);
    }
  }

  SECTION("level zero returns the chord on the same complex") {
    const PiecewiseMap lin = linearize(s, 0);
    REQUIRE(lin.complex().signature() == K01->signature());
    REQUIRE(lin.value_at_vertex(0)(0) == 0.0);
    REQUIRE(lin.value_at_vertex(1)(0) == 1.0);
  }

  SECTION("an already PL map linearizes to itself as a function") {
    auto sq = shared(fixtures::square_complex());
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(-1, 1);
    std::vector<Vec> vals;
    for (std::size_t v = 0; v < sq->vertex_count(); ++v)
      vals.push_back(fixtures::v2(U(rng), U(rng)));
    const PiecewiseMap f = PiecewiseMap::pl(sq, 2, vals);
    auto [c0, c1] = c0_c1_distance(f, linearize(f, 2));
    REQUIRE(c0 < 1e-12);
    REQUIRE(c1 < 1e-12);
  }

  SECTION("sine on [0,3] converges at least quadratically in C0, linearly in C1") {
    auto K03 = shared(fixtures::path_complex(3));
    const PiecewiseMap f = PiecewiseMap::smooth(K03, make_smooth_map("sin_field", 1));
    std::vector<double> xs, l0s, l1s;
    double prev0 = 0, prev1 = 0;
    for (int l = 1; l <= 5; ++l) {
      auto [c0, c1] = c0_c1_distance(f, linearize(f, l));
      if (l > 1) {
        REQUIRE(c0 / prev0 < 0.30);  // quartering, with slack
        REQUIRE(c1 / prev1 < 0.55);  // halving, with slack
      }
      prev0 = c0;
      prev1 = c1;
      xs.push_back(-l * std::log(2.0));
      l0s.push_back(std::log(c0));
      l1s.push_back(std::log(c1));
    }
    REQUIRE(regression_slope(xs, l0s) >= 1.9);
    REQUIRE(regression_slope(xs, l1s) >= 0.9);
  }
}

TEST_CASE("interpolation across opposite faces") {
  Mat P(2, 3);  // standard triangle
  P.col(0) = fixtures::v2(0, 0);
  P.col(1) = fixtures::v2(1, 0);
  P.col(2) = fixtures::v2(0, 1);
  const std::vector<int> A{0, 1}, B{2};

  SECTION("the join parameter is 0 on A, 1 on B, affine in between") {
    auto [g, c] = map_detail::join_parameter(P, A, B);
    REQUIRE(std::abs(g.dot(P.col(0)) + c) < 1e-12);
    REQUIRE(std::abs(g.dot(P.col(1)) + c) < 1e-12);
    REQUIRE(std::abs(g.dot(P.col(2)) + c - 1.0) < 1e-12);
    REQUIRE(std::abs(g.dot(fixtures::v2(0.25, 0.5)) + c - 0.5) < 1e-12);
  }

  SECTION("equal inputs reproduce the map") {
    const SmoothMap q = make_smooth_map("quadratic", 2);
    const SmoothMap r = interpolate(P, A, B, q, q);
    for (const Vec& x : map_detail::simplex_grid(P, 4)) {
      REQUIRE((r.value(x) - q.value(x)).norm() < 1e-12);
      REQUIRE(operator_norm(r.jacobian(x) - q.jacobian(x)) < 1e-12);
    }
  }

  SECTION("the literal weighting restricts to s_B on A and s_A on B") {
    const SmoothMap sA = make_smooth_map("constant", 2, {5.0});
    const SmoothMap sB = make_smooth_map("constant", 2, {7.0});
    const SmoothMap r = interpolate(P, A, B, sA, sB);
    REQUIRE(r.value(P.col(0))(0) == Catch::Approx(7.0).margin(1e-12));
    REQUIRE(r.value(0.5 * (P.col(0) + P.col(1)))(0) == Catch::Approx(7.0).margin(1e-12));
    REQUIRE(r.value(P.col(2))(0) == Catch::Approx(5.0).margin(1e-12));
    const SmoothMap w = interpolate(P, A, B, sA, sB, /*swap_weights=*/true);
    REQUIRE(w.value(P.col(0))(0) == Catch::Approx(5.0).margin(1e-12));
    REQUIRE(w.value(P.col(2))(0) == Catch::Approx(7.0).margin(1e-12));
  }

  SECTION("on a segment with 0/1 endpoint data the result is linear") {
    Mat E(1, 2);
    E(0, 0) = 0.0;
    E(0, 1) = 1.0;
    const SmoothMap s0 = make_smooth_map("constant", 1, {0.0});
    const SmoothMap s1 = make_smooth_map("constant", 1, {1.0});
    // t(x) = x weights s0, so the value is 1 - x
    const SmoothMap r = interpolate(E, {0}, {1}, s0, s1);
    for (double x : {0.0, 0.25, 0.5, 1.0})
      REQUIRE(r.value(fixtures::v1(x))(0) == Catch::Approx(1.0 - x).margin(1e-12));
  }

  SECTION("interpolated jacobians match finite differences") {
    const SmoothMap r =
        interpolate(P, A, B, make_smooth_map("quadratic", 2), make_smooth_map("sin_field", 2));
    REQUIRE(jacobian_fd_error(r, fixtures::v2(0.2, 0.3)) < 1e-6);
    REQUIRE(jacobian_fd_error(r, fixtures::v2(0.5, 0.25)) < 1e-6);
  }

  SECTION("perturbing one side moves the result by O(eta) in C0, O(eta/rmin) in C1") {
    std::mt19937_64 rng(11);
    const double eta = 0.01;
    for (int trial = 0; trial < 60; ++trial) {
      const int m = 2 + (trial % 2);
      const Mat Q = fixtures::random_simplex(rng, m);
      std::vector<int> idx(m + 1);
      for (int i = 0; i <= m; ++i) idx[i] = i;
      std::shuffle(idx.begin(), idx.end(), rng);
      const int ka = 1 + static_cast<int>(rng() % m);
      std::vector<int> FA, FB;
      for (int i = 0; i <= m; ++i) (i < ka ? FA : FB).push_back(idx[i]);
      const SmoothMap base = make_smooth_map("constant", m, std::vector<double>(m, 0.0));
      const SmoothMap bumped = make_smooth_map("constant", m, std::vector<double>(m, eta));
      const SmoothMap other = make_smooth_map("quadratic", m);
      const SmoothMap r0 = interpolate(Q, FA, FB, base, other);
      const SmoothMap r1 = interpolate(Q, FA, FB, bumped, other);
      const double bumpc0 = eta * std::sqrt(static_cast<double>(m));
      double d0 = 0, d1 = 0;
      for (const Vec& x : map_detail::simplex_grid(Q, 3)) {
        d0 = std::max(d0, (r0.value(x) - r1.value(x)).norm());
        d1 = std::max(d1, operator_norm(r0.jacobian(x) - r1.jacobian(x)));
      }
      REQUIRE(d0 <= bumpc0 * (1 + 1e-9));
      REQUIRE(d1 <= bumpc0 * (m + 1) / rmin(Q));
    }
  }

  SECTION("rejects bad face splits and mismatched maps") {
    const SmoothMap q = make_smooth_map("quadratic", 2);
    REQUIRE_THROWS_WITH(interpolate(P, {}, B, q, q),
                        Catch::Matchers::ContainsSubstring("faces must be nonempty"));
    REQUIRE_THROWS_WITH(interpolate(P, {0, 3}, B, q, q),
                        Catch::Matchers::ContainsSubstring("bad face index"));
    REQUIRE_THROWS_WITH(interpolate(P, {0, 1}, {1, 2}, q, q),
                        Catch::Matchers::ContainsSubstring("faces overlap"));
    REQUIRE_THROWS_WITH(interpolate(P, {0}, {2}, q, q),
                        Catch::Matchers::ContainsSubstring("faces do not span"));
    REQUIRE_THROWS_WITH(interpolate(P, A, B, q, make_smooth_map("identity", 3)),
                        Catch::Matchers::ContainsSubstring("map dimensions differ"));
  }
}

TEST_CASE("affine joins across opposite faces") {
  Mat P(2, 3);
  P.col(0) = fixtures::v2(0, 0);
  P.col(1) = fixtures::v2(1, 0);
  P.col(2) = fixtures::v2(0, 1);
  const std::vector<int> A{0, 1}, B{2};

  SECTION("restrictions reproduce the face data exactly") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> U(-1, 1);
    std::vector<Vec> vA{fixtures::v2(U(rng), U(rng)), fixtures::v2(U(rng), U(rng))};
    std::vector<Vec> vB{fixtures::v2(U(rng), U(rng))};
    const SmoothMap j = join_map(P, A, B, vA, vB);
    REQUIRE((j.value(P.col(0)) - vA[0]).norm() < 1e-12);
    REQUIRE((j.value(P.col(1)) - vA[1]).norm() < 1e-12);
    REQUIRE((j.value(P.col(2)) - vB[0]).norm() < 1e-12);
    // affine along face A
    const Vec mid = 0.5 * (P.col(0) + P.col(1));
    REQUIRE((j.value(mid) - 0.5 * (vA[0] + vA[1])).norm() < 1e-12);
  }

  SECTION("0-on-edge, 1-at-vertex data gives the join parameter") {
    auto [g, c] = map_detail::join_parameter(P, A, B);
    const SmoothMap j =
        join_map(P, A, B, {fixtures::v1(0.0), fixtures::v1(0.0)}, {fixtures::v1(1.0)});
    for (const Vec& x : map_detail::simplex_grid(P, 4))
      REQUIRE(std::abs(j.value(x)(0) - (g.dot(x) + c)) < 1e-12);
  }

  SECTION("restrictions of one affine map rebuild it, matching interpolate") {
    const SmoothMap L = make_smooth_map("linear", 2, {2, -1, 0.5, 3, 0.25, -0.75});
    std::vector<Vec> vA{L.value(P.col(0)), L.value(P.col(1))};
    std::vector<Vec> vB{L.value(P.col(2))};
    const SmoothMap j = join_map(P, A, B, vA, vB);
    const SmoothMap r = interpolate(P, A, B, L, L);
    for (const Vec& x : map_detail::simplex_grid(P, 4)) {
      REQUIRE((j.value(x) - L.value(x)).norm() < 1e-12);
      REQUIRE((j.value(x) - r.value(x)).norm() < 1e-12);
    }
    REQUIRE(operator_norm(j.jacobian(P.col(0)) - L.jacobian(P.col(0))) < 1e-12);
  }

  SECTION("slope response to face-value changes is bounded by the frame coefficient") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> U(-1, 1);
    for (int trial = 0; trial < 60; ++trial) {
      const int m = 2 + (trial % 2);
      const Mat Q = fixtures::random_simplex(rng, m);
      std::vector<int> idx(m + 1);
      for (int i = 0; i <= m; ++i) idx[i] = i;
      std::shuffle(idx.begin(), idx.end(), rng);
      const int ka = 1 + static_cast<int>(rng() % m);
      std::vector<int> FA, FB;
      for (int i = 0; i <= m; ++i) (i < ka ? FA : FB).push_back(idx[i]);
      const double eta = 0.02;
      std::vector<Vec> vA, vB1, vB2;
      for (std::size_t i = 0; i < FA.size(); ++i) vA.push_back(fixtures::v2(U(rng), U(rng)));
      double dc0 = 0;
      for (std::size_t i = 0; i < FB.size(); ++i) {
        const Vec b = fixtures::v2(U(rng), U(rng));
        Vec d = fixtures::v2(U(rng), U(rng));
        d *= eta / std::max(d.norm(), 1e-9);
        vB1.push_back(b);
        vB2.push_back(b + d);
        dc0 = std::max(dc0, d.norm());
      }
      const SmoothMap j1 = join_map(Q, FA, FB, vA, vB1);
      const SmoothMap j2 = join_map(Q, FA, FB, vA, vB2);
      const double dc1 = operator_norm(j1.jacobian(Q.col(0)) - j2.jacobian(Q.col(0)));
      REQUIRE(dc1 <= (m + 1) * dc0 * lambda_coeff(Q));
    }
  }

  SECTION("rejects mismatched value lists") {
    REQUIRE_THROWS_WITH(join_map(P, A, B, {fixtures::v1(0.0)}, {fixtures::v1(1.0)}),
                        Catch::Matchers::ContainsSubstring("one value per face vertex"));
    REQUIRE_THROWS_WITH(
        join_map(P, A, B, {fixtures::v1(0.0), fixtures::v2(0, 0)}, {fixtures::v1(1.0)}),
        Catch::Matchers::ContainsSubstring("value dim mismatch"));
  }
}

TEST_CASE("relative linearization rebuilds the map only near the subcomplex") {
  auto K03 = shared(fixtures::path_complex(3));
  const PiecewiseMap s = PiecewiseMap::smooth(K03, make_smooth_map("sin_field", 1));
  const std::vector<SimplexKey> sub{{0, 1}};
  const std::vector<Region> cover{Region::box(fixtures::v1(-0.1), fixtures::v1(1.4))};

  SECTION("empty subcomplex returns the input unchanged") {
    const PiecewiseMap out = linearize_relative(s, {}, cover, 3);
    REQUIRE(out.complex().signature() == s.complex().signature());
    for (VertexId v = 0; v < out.complex().vertex_count(); ++v)
      REQUIRE((out.value_at_vertex(v) - s.value_at_vertex(v)).norm() == 0.0);
  }

  SECTION("whole complex with a covering region reduces to plain linearization") {
    const std::vector<SimplexKey> all{{0, 1}, {1, 2}, {2, 3}};
    const PiecewiseMap rel = linearize_relative(s, all, {Region::all()}, 3);
    const PiecewiseMap lin = linearize(s, 3);
    REQUIRE(rel.is_pl());
    REQUIRE(rel.complex().signature() == lin.complex().signature());
    for (VertexId v = 0; v < rel.complex().vertex_count(); ++v)
      REQUIRE((rel.value_at_vertex(v) - lin.value_at_vertex(v)).norm() == 0.0);
  }

  SECTION("output is PL over the subcomplex, untouched far away, and continuous") {
    for (int l = 2; l <= 4; ++l) {
      const PiecewiseMap out = linearize_relative(s, sub, cover, l);
      const SimplicialComplex& K = out.complex();
      REQUIRE(out.continuity_defect() <= 1e-12);
      for (std::uint32_t t = 0; t < K.tops().size(); ++t) {
        const Mat P = K.points_of(K.tops()[t]);
        const double lo = std::min(P(0, 0), P(0, 1));
        const double hi = std::max(P(0, 0), P(0, 1));
        if (hi <= 1.0 + 1e-12) REQUIRE(out.piece_is_affine(t));
        if (lo >= 1.5 - 1e-12) {
          const Vec mid = 0.5 * (P.col(0) + P.col(1));
          REQUIRE((out.evaluate_on(t, mid) - s.evaluate(mid)).norm() == 0.0);
        }
      }
    }
  }

  SECTION("distances to the input shrink at the linearization rates") {
    double prev0 = 0, prev1 = 0;
    for (int l = 2; l <= 5; ++l) {
      auto [c0, c1] = c0_c1_distance(s, linearize_relative(s, sub, cover, l));
      if (l > 2) {
        REQUIRE(c0 / prev0 < 0.30);
        REQUIRE(c1 / prev1 < 0.55);
      }
      prev0 = c0;
      prev1 = c1;
    }
  }

  SECTION("rejects covers that miss the subcomplex or levels that are too coarse") {
    REQUIRE_THROWS_WITH(
        linearize_relative(s, sub, {Region::box(fixtures::v1(0.4), fixtures::v1(0.6))}, 3),
        Catch::Matchers::ContainsSubstring("cover does not reach the subcomplex"));
    REQUIRE_THROWS_WITH(
        linearize_relative(s, sub, {Region::box(fixtures::v1(-0.1), fixtures::v1(1.2))}, 2),
        Catch::Matchers::ContainsSubstring("level too small"));
    REQUIRE_THROWS_WITH(linearize_relative(s, sub, {}, 3),
                        Catch::Matchers::ContainsSubstring("empty cover"));
    REQUIRE_THROWS_AS(linearize_relative(s, sub, cover, -1), std::invalid_argument);
    REQUIRE_THROWS_WITH(linearize_relative(s, {{7, 9}}, cover, 3),
                        Catch::Matchers::ContainsSubstring("subcomplex not in complex"));
  }
}
