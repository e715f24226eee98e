// Quick end-to-end exercise of the core headers: builds the standard
// triangle, subdivides it, colors it, cones one cell off, runs the localized
// subdivision, and checks every top cell against the model catalog.

#include <cmath>
#include <cstdio>
#include <memory>
#include <set>

#include "jiggle/coloring.hpp"
#include "jiggle/complex.hpp"
#include "jiggle/io.hpp"
#include "jiggle/jiggling.hpp"
#include "jiggle/linearization.hpp"
#include "jiggle/piecewise_map.hpp"
#include "jiggle/relations.hpp"
#include "jiggle/subdivision.hpp"
#include "jiggle/validate.hpp"

using namespace jiggle;

namespace {
int failures = 0;
void check(bool ok, const char* what) {
  if (!ok) {
    ++failures;
    std::printf("FAIL %s\n", what);
  }
}

SimplicialComplex std_triangle() {
  std::vector<Vec> v(3, Vec::Zero(2));
  v[1](0) = 1.0;
  v[2](1) = 1.0;
  return SimplicialComplex::from_simplices(2, v, {{0, 1, 2}});
}
}  // namespace

int main() {
  const SimplicialComplex tri = std_triangle();
  check(tri.pure() && tri.top_dim() == 2, "triangle basics");

  const SimplicialComplex tri1 = crystalline_subdivide(tri, 1);
  check(tri1.tops().size() == 4, "level-1 triangle has 4 cells");
  check(tri1.vertex_count() == 6, "level-1 triangle has 6 vertices");
  check(validate_complex(tri1).valid, "level-1 triangle valid");

  const SimplicialComplex tri2 = crystalline_subdivide(tri, 2);
  check(tri2.tops().size() == 16, "level-2 triangle has 16 cells");
  check(validate_complex(tri2).valid, "level-2 triangle valid");

  const Coloring col = greedy_color(tri1);
  check(coloring_valid(tri1, col), "greedy coloring valid");

  const ModelCatalog cat = model_simplices(tri2);
  for (std::uint32_t t = 0; t < tri2.tops().size(); ++t)
    check(match_model(cat, tri2, t).has_value(), "level-2 cell matches catalog");

  // localized subdivision around a corner ball
  Vec c = Vec::Zero(2);
  const auto gs = generalized_subdivide(tri, Region::ball(c, 0.05), 0.8, 2, 4);
  check(validate_complex(gs.complex).valid, "localized subdivision valid");
  bool all_match = true;
  std::set<int> levels;
  for (std::uint32_t t = 0; t < gs.complex.tops().size(); ++t) {
    if (!match_model(gs.catalog, gs.complex, t)) all_match = false;
    levels.insert(gs.complex.lineage(t).level);
  }
  check(all_match, "every localized cell matches the catalog");
  check(levels.count(2) == 1 && levels.count(4) == 1, "coarse and fine levels both present");

  // cone off the unsubdivided triangle: 3 cells
  Mat P(2, 3);
  P << 0, 1, 0, 0, 0, 1;
  std::vector<Vec> bv;
  for (int i = 0; i < 3; ++i) bv.push_back(P.col(i));
  const auto bd =
      SimplicialComplex::from_simplices(2, bv, {{0, 1}, {0, 2}, {1, 2}});
  const auto coned = cone_off(P, bd);
  check(coned.tops().size() == 3, "plain cone-off has 3 cells");
  check(validate_complex(coned).valid, "cone-off valid");

  // PL maps: x^2 on [0,1], chord distance (1/4, 1), secant at level 1
  {
    std::vector<Vec> iv(2, Vec::Zero(1));
    iv[1](0) = 1.0;
    auto seg = std::make_shared<SimplicialComplex>(
        SimplicialComplex::from_simplices(1, iv, {{0, 1}}));
    const SmoothMap sq = make_smooth_map("quadratic", 1);
    const PiecewiseMap f = PiecewiseMap::smooth(seg, sq);
    const PiecewiseMap chord = linearize(f, 0);
    check(chord.is_pl(), "level-0 linearization is PL");
    auto [c0, c1] = c0_c1_distance(f, chord, 32);
    check(std::abs(c0 - 0.25) < 1e-3, "quadratic chord C0 distance 1/4");
    check(std::abs(c1 - 1.0) < 1e-12, "quadratic chord C1 distance 1");
    const PiecewiseMap lin1 = linearize(f, 1);
    Vec half = Vec::Constant(1, 0.5);
    check(std::abs(lin1.evaluate(half)(0) - 0.25) < 1e-15, "level-1 secant hits (1/2, 1/4)");
    auto [d0, d1] = c0_c1_distance(chord, lin1);
    check(std::abs(d0 - 0.25) < 1e-12, "chord vs level-1 secant C0 gap 1/4");
    (void)d1;
    check(f.continuity_defect() < 1e-12, "smooth map continuous");
    check(lin1.continuity_defect() < 1e-12, "secant map continuous");
  }

  // relative linearization: sin on [0,3], PL near [0,1], untouched past 1.5
  {
    std::vector<Vec> iv(4, Vec::Zero(1));
    for (int i = 0; i < 4; ++i) iv[i](0) = i;
    auto seg = std::make_shared<SimplicialComplex>(
        SimplicialComplex::from_simplices(1, iv, {{0, 1}, {1, 2}, {2, 3}}));
    const SmoothMap sn = make_smooth_map("sin_field", 1);
    const PiecewiseMap f = PiecewiseMap::smooth(seg, sn);
    Vec lo = Vec::Constant(1, -0.1), hi = Vec::Constant(1, 1.4);
    const PiecewiseMap g =
        linearize_relative(f, {{0, 1}}, {Region::box(lo, hi)}, 2);
    check(g.continuity_defect() < 1e-12, "relative linearization continuous");
    for (double x : {0.1, 0.45, 0.8}) {
      Vec p = Vec::Constant(1, x);
      auto t = locate_top(g.complex(), p);
      check(t && g.piece_is_affine(*t), "PL over the subcomplex");
    }
    for (double x : {1.6, 2.2, 2.9}) {
      Vec p = Vec::Constant(1, x);
      check(std::abs(g.evaluate(p)(0) - std::sin(x)) < 1e-15, "untouched far from subcomplex");
    }
    Vec probe = Vec::Constant(1, 0.625);
    check(std::abs(g.evaluate(probe)(0) - std::sin(0.625)) < 0.05, "close to sin near subcomplex");
  }

  // relation oracles: transversality, maximal rank, contact forms
  {
    Mat frame(2, 1);
    frame << 1, 0;
    const Distribution xi = constant_distribution(frame);
    const RelationOracle R = transversality_relation(xi, 1);
    Jet1 j;
    j.base = Vec::Zero(1);
    j.origin = Vec::Zero(1);
    j.chart = Mat::Identity(1, 1);
    j.value = Vec::Zero(2);
    j.slope = Mat(2, 1);
    j.slope << 1, 0;  // parallel to xi
    check(!R.contains(j) && R.margin(j) == 0.0, "horizontal slope not transverse");
    const Jet1 jp = R.fiber_perturb(j, 0.1);
    check(R.contains(jp) && R.margin(jp) > 0, "perturbed slope transverse");
    check((jp.value - j.value).norm() == 0 && (jp.base - j.base).norm() == 0,
          "fiber perturbation fixes base and value");
    check((jp.slope - j.slope).norm() < 0.1 + 1e-12, "perturbation within budget");
    j.slope << 0, 1;
    check(std::abs(R.margin(j) - 1.0) < 1e-12, "vertical slope margin 1");
    const Jet1 same = R.fiber_perturb(j, 0.1);
    check((same.slope - j.slope).norm() == 0, "solutions left untouched");

    const RelationOracle M = maxrank_relation(2, 2);
    Jet1 q;
    q.base = Vec::Zero(2);
    q.origin = Vec::Zero(2);
    q.chart = Mat::Identity(2, 2);
    q.value = Vec::Zero(2);
    q.slope = Mat::Zero(2, 2);
    q.slope(0, 0) = 1.0;
    check(!M.contains(q), "rank-1 slope rejected");
    check(M.margin(M.fiber_perturb(q, 0.2)) > 0, "rank restored by perturbation");

    const RelationOracle C = contact3d_relation();
    Jet1 a;
    a.base = Vec::Zero(3);
    a.origin = Vec::Zero(3);
    a.chart = Mat::Identity(3, 3);
    a.value = Vec::Zero(3);
    a.value(2) = 1.0;  // the form dz
    a.slope = Mat::Zero(3, 3);
    check(!C.contains(a) && C.margin(a) == 0.0, "dz alone is not contact");
    Jet1 b = a;
    b.slope(1, 0) = 0.05;
    b.slope(0, 1) = -0.05;
    check(C.contains(b) && std::abs(C.margin(b) - 0.05) < 1e-12, "rotated form is contact");
    check(C.margin(C.fiber_perturb(a, 0.2)) > 0, "contact sweep succeeds");
    Jet1 z = a;
    z.value.setZero();
    bool threw = false;
    try {
      (void)C.margin(z);
    } catch (const std::invalid_argument&) {
      threw = true;
    }
    check(threw, "zero section rejected");
  }

  // very general position: generic triangle passes, horizontal edge fails
  {
    Mat frame(2, 1);
    frame << 1, 0;
    const Distribution xi = constant_distribution(frame);
    std::vector<Vec> gv(3, Vec::Zero(2));
    gv[1] << 1.0, 0.3;
    gv[2] << -0.2, 1.0;
    auto gt = std::make_shared<SimplicialComplex>(
        SimplicialComplex::from_simplices(2, gv, {{0, 1, 2}}));
    const PiecewiseMap gid = PiecewiseMap::pl(gt, 2, gv);
    const auto ok = verify_general_position(gid, xi);
    check(ok.pass && ok.min_margin > 1e-3, "generic triangle in general position");
    const RelationOracle vg = verygenpos_family(xi)(*gt, 0);
    const Jet1 bj = gid.piece_jet(0, Vec(gt->points_of(gt->tops()[0]).rowwise().mean()));
    check(vg.contains(bj) && vg.margin(bj) > 0, "identity jet very generic");

    std::vector<Vec> hv(3, Vec::Zero(2));
    hv[1] << 1.0, 0.0;  // horizontal edge 0-1
    hv[2] << 0.0, 1.0;
    auto ht = std::make_shared<SimplicialComplex>(
        SimplicialComplex::from_simplices(2, hv, {{0, 1, 2}}));
    const PiecewiseMap hid = PiecewiseMap::pl(ht, 2, hv);
    check(!verify_general_position(hid, xi).pass, "horizontal edge detected");
  }

  // jiggling: a constant 1-D map gains maximal rank, anchored at vertex 0
  {
    std::vector<Vec> iv(2, Vec::Zero(1));
    iv[1](0) = 1.0;
    auto seg = std::make_shared<SimplicialComplex>(
        SimplicialComplex::from_simplices(1, iv, {{0, 1}}));
    std::vector<Vec> cv(2, Vec::Constant(1, 0.7));
    const PiecewiseMap f = PiecewiseMap::pl(seg, 1, cv);
    JigglingConfig cfg;
    cfg.epsilon = 0.1;
    auto [g, rep] = jiggle_linear(f, uniform_family(maxrank_relation(1, 1)), cfg);
    check(rep.margins.size() == 1 && rep.margins[0] > 0, "constant map gains rank");
    check(rep.c0 + rep.c1 < 0.1, "jiggle within budget");
    check(g.value_at_vertex(0)(0) == 0.7, "anchor value pinned");
    check(g.value_at_vertex(1)(0) != 0.7, "free vertex moved");
  }

  // jiggling an existing solution changes nothing
  {
    std::vector<Vec> sv(4, Vec::Zero(2));
    sv[1] << 1, 0;
    sv[2] << 0, 1;
    sv[3] << 1, 1;
    auto sq = std::make_shared<SimplicialComplex>(
        SimplicialComplex::from_simplices(2, sv, {{0, 1, 2}, {1, 2, 3}}));
    const PiecewiseMap f = PiecewiseMap::pl(sq, 2, sv);
    JigglingConfig cfg;
    cfg.epsilon = 0.2;
    auto [g, rep] = jiggle_linear(f, uniform_family(maxrank_relation(2, 2)), cfg);
    const PiecewiseMap lin = linearize(f, rep.level);
    bool untouched = true;
    for (VertexId v = 0; v < g.complex().vertex_count(); ++v)
      if ((g.value_at_vertex(v) - lin.value_at_vertex(v)).norm() != 0.0) untouched = false;
    check(untouched, "solutions are fixed points");
    check(rep.c0 + rep.c1 < 1e-12, "no measurable drift");
    for (double mgn : rep.margins) check(mgn > 0.9, "identity margins near 1");
  }

  // relative jiggling: sin kept bit for bit over [0,1]
  {
    std::vector<Vec> iv(4, Vec::Zero(1));
    for (int i = 0; i < 4; ++i) iv[i](0) = i;
    auto seg = std::make_shared<SimplicialComplex>(
        SimplicialComplex::from_simplices(1, iv, {{0, 1}, {1, 2}, {2, 3}}));
    const PiecewiseMap f = PiecewiseMap::smooth(seg, make_smooth_map("sin_field", 1));
    JigglingConfig cfg;
    cfg.epsilon = 0.2;
    Vec lo = Vec::Constant(1, -0.1), hi = Vec::Constant(1, 1.4);
    auto [g, rep] = jiggle_relative(f, uniform_family(maxrank_relation(1, 1)), {{0, 1}}, {},
                                    Region::box(lo, hi), Region::all(), cfg);
    check(rep.relative && rep.fixed_vertices > 0, "relative run freezes vertices");
    for (double mgn : rep.margins) check(mgn > 0, "all relative margins positive");
    check(rep.c0 + rep.c1 < 0.2, "relative jiggle within budget");
    const SimplicialComplex& Ko = g.complex();
    const Mat kept = seg->points_of(SimplexKey{0, 1});
    std::size_t frozen_count = 0;
    for (VertexId v = 0; v < Ko.vertex_count(); ++v) {
      if (!point_in_simplex(kept, Ko.vertex(v))) continue;
      ++frozen_count;
      const Vec want = f.evaluate(Ko.vertex(v));
      check((g.value_at_vertex(v) - want).norm() == 0.0, "frozen vertex bit-identical");
    }
    check(frozen_count == rep.fixed_vertices, "hash covers the frozen vertices");
  }

  // JSON round trips keep signatures and bytes
  {
    const SimplicialComplex back = complex_from_json(complex_to_json(tri2));
    check(back.signature() == tri2.signature(), "complex json round trip");
    check(complex_to_json(back).dump() == complex_to_json(tri2).dump(), "complex dump stable");

    auto seg = std::make_shared<SimplicialComplex>(SimplicialComplex::from_simplices(
        1, {Vec::Zero(1), Vec::Constant(1, 1.0)}, {{0, 1}}));
    PiecewiseMap f = PiecewiseMap::smooth(seg, make_smooth_map("sin_field", 1));
    const PiecewiseMap fb = map_from_json(map_to_json(f));
    check(map_to_json(fb).dump() == map_to_json(f).dump(), "map json round trip");
    check(!fb.piece_is_affine(0) && fb.smooth_piece(0).name == "sin_field",
          "smooth pieces survive the round trip");

    const Region r = region_from_json(region_to_json(Region::box(Vec::Zero(2), Vec::Ones(2))));
    check(r.kind() == Region::Kind::Box && r.contains(Vec::Constant(2, 0.5)), "region round trip");

    bool rejected = false;
    try {
      complex_from_json(Json{{"ambient_dim", 1}, {"vertices", Json::array()}, {"typo", 3}});
    } catch (const std::invalid_argument&) {
      rejected = true;
    }
    check(rejected, "unknown keys rejected");

    const std::string off = off_export(tri);
    check(off.rfind("OFF\n3 1 0\n", 0) == 0, "off export header");
  }

  if (failures == 0) std::printf("smoke: all checks passed\n");
  return failures == 0 ? 0 : 1;
}
