#pragma once

/// \file jiggling.hpp
/// The perturbation engine: nudging PL maps into open fiberwise-dense
/// relations color by color with adaptive budgets, the relative variant
/// that freezes subcomplexes bit-exactly, chart-by-chart jiggling of
/// sections, and jiggling triangulations into very general position.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "coloring.hpp"
#include "complex.hpp"
#include "jets.hpp"
#include "linearization.hpp"
#include "piecewise_map.hpp"
#include "region.hpp"
#include "relations.hpp"
#include "simplex_geometry.hpp"
#include "subdivision.hpp"

namespace jiggle {

enum class CertificationMode { Sampled, Lipschitz };

struct JigglingConfig {
  double epsilon = 0.1;     ///< C1 budget for the whole run
  int level_init = -1;      ///< starting subdivision level, -1 = auto
  double eps_shrink = 0.5;  ///< per-retry budget shrink factor
  int max_retries = 30;     ///< per color
  CertificationMode mode = CertificationMode::Sampled;
  double L_xi = 0.0;          ///< frame-field Lipschitz bound (lipschitz mode)
  bool strict_budget = false; ///< enforce the quarter-margin step bound literally
  std::uint64_t seed = 0;     ///< reserved: the perturbation sweep is deterministic
  int level_max = 12;

  void validate() const {
    if (!(epsilon > 0)) throw std::invalid_argument("JigglingConfig: epsilon must be positive");
    if (!(eps_shrink > 0 && eps_shrink < 1))
      throw std::invalid_argument("JigglingConfig: eps_shrink must lie in (0,1)");
    if (max_retries < 1) throw std::invalid_argument("JigglingConfig: max_retries must be >= 1");
    if (level_max < 0 || level_init > level_max)
      throw std::invalid_argument("JigglingConfig: bad level bounds");
  }
};

struct JigglingReport {
  int level = 0;
  int colors = 0;
  std::vector<double> margins;  ///< per top cell of the output complex
  double c0 = 0.0, c1 = 0.0;    ///< distance to the input map
  std::vector<int> retries;     ///< per color
  bool relative = false;
  std::uint64_t fixed_hash = 0;   ///< relative runs: hash over frozen vertex data
  std::size_t fixed_vertices = 0; ///< relative runs: number of hashed vertices
};

namespace jig_detail {

inline std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t len) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

constexpr std::uint64_t kFnvSeed = 1469598103934665603ull;

/// Hash over the raw coordinate and value bytes of the listed vertices, in
/// the listed order. Bit-level: two maps hash equal iff the data agrees
/// down to the last bit.
inline std::uint64_t hash_vertex_data(const SimplicialComplex& K, const PiecewiseMap& f,
                                      const std::vector<VertexId>& verts) {
  std::uint64_t h = kFnvSeed;
  for (VertexId v : verts) {
    const Vec& x = K.vertex(v);
    const Vec& y = f.value_at_vertex(v);
    h = fnv1a(h, x.data(), sizeof(double) * static_cast<std::size_t>(x.size()));
    h = fnv1a(h, y.data(), sizeof(double) * static_cast<std::size_t>(y.size()));
  }
  return h;
}

inline bool vertex_in_any(const Vec& x, const std::vector<Mat>& cells) {
  for (const Mat& P : cells)
    if (point_in_simplex(P, x)) return true;
  return false;
}

}  // namespace jig_detail

/// Margin of an oracle over one cell of a map: minimum over jets sampled at
/// the cell's vertices and barycenter. Lipschitz mode subtracts
/// L_xi * (sampled image diameter), clamped at zero.
inline double certify_cell(const PiecewiseMap& f, std::uint32_t top, const RelationOracle& R,
                           CertificationMode mode = CertificationMode::Sampled,
                           double L_xi = 0.0) {
  const SimplicialComplex& K = f.complex();
  const Mat P = K.points_of(K.tops()[top]);
  std::vector<Vec> probes;
  for (int i = 0; i < P.cols(); ++i) probes.push_back(P.col(i));
  probes.push_back(P.rowwise().mean());
  double worst = std::numeric_limits<double>::infinity();
  std::vector<Vec> values;
  for (const Vec& x : probes) {
    const Jet1 j = f.piece_jet(top, x);
    worst = std::min(worst, R.margin(j));
    values.push_back(j.value);
  }
  if (mode == CertificationMode::Lipschitz) {
    double diam = 0.0;
    for (std::size_t a = 0; a < values.size(); ++a)
      for (std::size_t b = a + 1; b < values.size(); ++b)
        diam = std::max(diam, (values[a] - values[b]).norm());
    worst -= L_xi * diam;
  }
  return std::max(worst, 0.0);
}

/// Perturbs the affine piece on one top cell: the jet at the anchor (lowest
/// vertex id) is pushed into the relation and its linear extension written
/// back at the cell's vertices; neighbors pick the change up through the
/// shared vertex values (the join construction). Returns the new map and
/// the relation margin at the perturbed jet.
inline std::pair<PiecewiseMap, double> slope_perturb_simplex(const PiecewiseMap& s,
                                                             std::uint32_t top,
                                                             const RelationOracle& R,
                                                             double eps) {
  if (!s.piece_is_affine(top))
    throw std::invalid_argument("slope_perturb_simplex: piece is not affine");
  const SimplicialComplex& K = s.complex();
  const SimplexKey& key = K.tops()[top];
  const VertexId anchor = key[0];
  const Jet1 j = s.piece_jet(top, K.vertex(anchor));
  const Jet1 jp = R.fiber_perturb(j, eps);
  if ((jp.slope.array() == j.slope.array()).all()) return {s, R.margin(jp)};
  PiecewiseMap out = s;
  for (VertexId v : key) out.set_vertex_value(v, linear_extension(jp, K.vertex(v)));
  return {std::move(out), R.margin(jp)};
}

/// Perturbs every cell of one color class. Same-color cells have disjoint
/// stars (asserted), so the edits commute: values change only on the
/// pairwise disjoint stars.
inline PiecewiseMap slope_perturb_color(const PiecewiseMap& s, const Coloring& col, int color,
                                        const RelationFamily& family, double eps) {
  const SimplicialComplex& K = s.complex();
  if (col.colors.size() != K.tops().size())
    throw std::invalid_argument("slope_perturb_color: coloring does not match the complex");
  std::vector<char> star_owner(K.tops().size(), 0);
  for (std::uint32_t t = 0; t < K.tops().size(); ++t) {
    if (col.colors[t] != color) continue;
    for (VertexId v : K.tops()[t])
      for (std::uint32_t u : K.tops_at_vertex(v)) {
        if (star_owner[u])
          throw std::logic_error("slope_perturb_color: overlapping stars within one color");
        star_owner[u] = 1;
      }
  }
  PiecewiseMap out = s;
  for (std::uint32_t t = 0; t < K.tops().size(); ++t) {
    if (col.colors[t] != color) continue;
    out = slope_perturb_simplex(out, t, family(K, t), eps).first;
  }
  return out;
}

namespace jig_detail {

struct CertEntry {
  bool done = false;
  bool exempt = false;      ///< never certified nor budget-checked
  bool perturbable = true;  ///< may be anchored by the color loop
  double margin = 0.0;
  Jet1 jet;  ///< anchor jet at certification time
};

inline Jet1 anchor_jet(const PiecewiseMap& f, std::uint32_t top) {
  return f.piece_jet(top, f.complex().vertex(f.complex().tops()[top][0]));
}

struct ColorLoopResult {
  PiecewiseMap map;
  std::vector<int> retries;
  std::vector<CertEntry> certs;
};

/// The inductive color loop shared by the plain and relative runs: walks
/// the colors, perturbs the anchored cells, and after every color verifies
/// that all previously certified cells keep positive margins and stay
/// within their displacement budgets; a violation restores the color's
/// snapshot, shrinks its budget and redoes it. `baseline` is the map the
/// running C1 budget is measured against.
inline ColorLoopResult run_color_loop(const PiecewiseMap& start, const PiecewiseMap& baseline,
                                      const std::vector<RelationOracle>& oracles,
                                      const Coloring& col, std::vector<CertEntry> certs,
                                      const JigglingConfig& cfg, double pl_budget) {
  const SimplicialComplex& K = start.complex();
  ColorLoopResult res{start, std::vector<int>(col.count, 0), std::move(certs)};
  const double eps0 = cfg.epsilon / (4.0 * std::max(1, col.count));
  double delta_min = std::numeric_limits<double>::infinity();
  for (const auto& c : res.certs)
    if (c.done && !c.exempt) delta_min = std::min(delta_min, c.margin);

  for (int color = 0; color < col.count; ++color) {
    double eps_i = std::min(eps0, std::isfinite(delta_min) ? delta_min / 4.0 : eps0);
    const PiecewiseMap snapshot = res.map;
    const std::vector<CertEntry> snapshot_certs = res.certs;
    const double delta_prev = delta_min;
    bool color_done = false;
    std::string last_failure;
    while (!color_done) {
      bool ok = true;
      try {
        for (std::uint32_t t = 0; t < K.tops().size() && ok; ++t) {
          if (col.colors[t] != color || !res.certs[t].perturbable) continue;
          res.map = slope_perturb_simplex(res.map, t, oracles[t], eps_i).first;
          const double cert = certify_cell(res.map, t, oracles[t], cfg.mode, cfg.L_xi);
          if (!(cert > 0)) {
            ok = false;
            last_failure = "cell " + std::to_string(t) + ": sampled margin not positive";
            break;
          }
          res.certs[t].done = true;
          res.certs[t].margin = cert;
          res.certs[t].jet = anchor_jet(res.map, t);
        }
      } catch (const std::runtime_error& e) {
        ok = false;
        last_failure = e.what();
      }
      // budget verification over everything certified before this color
      if (ok) {
        for (std::uint32_t t = 0; t < K.tops().size() && ok; ++t) {
          const CertEntry& prev = snapshot_certs[t];
          if (!prev.done || prev.exempt) continue;
          const Jet1 now = anchor_jet(res.map, t);
          const double moved = jet_distance(now, prev.jet);
          const double cap =
              cfg.strict_budget ? std::min(prev.margin, delta_prev) / 4.0 : prev.margin;
          if (!(moved < cap || moved == 0.0)) {
            ok = false;
            last_failure = "cell " + std::to_string(t) + ": displacement " +
                           std::to_string(moved) + " exceeds budget " + std::to_string(cap);
            break;
          }
          const double re = certify_cell(res.map, t, oracles[t], cfg.mode, cfg.L_xi);
          if (!(re > 0)) {
            ok = false;
            last_failure = "cell " + std::to_string(t) + ": certified margin collapsed";
            break;
          }
          res.certs[t].margin = re;
        }
      }
      if (ok) {
        auto [c0, c1] = c0_c1_distance(baseline, res.map);
        if (!(c0 + c1 < pl_budget)) {
          ok = false;
          last_failure = "cumulative C1 distance " + std::to_string(c0 + c1) +
                         " exceeds the level budget " + std::to_string(pl_budget);
        }
      }
      if (ok) {
        color_done = true;
      } else {
        res.map = snapshot;
        res.certs = snapshot_certs;
        if (++res.retries[color] > cfg.max_retries)
          throw std::runtime_error("jiggle: retries exhausted at color " +
                                   std::to_string(color) + " (" + last_failure + ")");
        eps_i *= cfg.eps_shrink;
      }
    }
    delta_min = std::numeric_limits<double>::infinity();
    for (const auto& c : res.certs)
      if (c.done && !c.exempt) delta_min = std::min(delta_min, c.margin);
  }
  return res;
}

}  // namespace jig_detail

/// The main jiggling run: linearize the map at a level where the secant
/// error fits in half the budget, color the subdivision, and perturb color
/// by color until every top cell is certified inside the relation, keeping
/// the total C1 change below epsilon.
inline std::pair<PiecewiseMap, JigglingReport> jiggle_linear(const PiecewiseMap& s,
                                                             const RelationFamily& family,
                                                             const JigglingConfig& cfg) {
  cfg.validate();
  if (!s.complex().pure()) throw std::invalid_argument("jiggle: complex must be pure");

  // level search: secant map within half the budget
  const int l_start = cfg.level_init >= 0 ? cfg.level_init : 0;
  std::optional<PiecewiseMap> lin;
  double lin_gap = 0.0;
  int level = l_start;
  for (int l = l_start; l <= cfg.level_max; ++l) {
    PiecewiseMap cand = linearize(s, l);
    auto [c0, c1] = c0_c1_distance(s, cand);
    if (c0 + c1 < cfg.epsilon / 2.0) {
      lin = std::move(cand);
      lin_gap = c0 + c1;
      level = l;
      break;
    }
  }
  if (!lin)
    throw std::runtime_error("jiggle: no subdivision level up to " +
                             std::to_string(cfg.level_max) +
                             " brings the secant error under epsilon/2");

  const SimplicialComplex& K = lin->complex();
  const Coloring col = greedy_color(K);
  std::vector<RelationOracle> oracles;
  oracles.reserve(K.tops().size());
  for (std::uint32_t t = 0; t < K.tops().size(); ++t) oracles.push_back(family(K, t));

  std::vector<jig_detail::CertEntry> certs(K.tops().size());
  auto res = jig_detail::run_color_loop(*lin, *lin, oracles, col, std::move(certs), cfg,
                                        cfg.epsilon - lin_gap);

  JigglingReport rep;
  rep.level = level;
  rep.colors = col.count;
  rep.retries = std::move(res.retries);
  rep.margins.resize(K.tops().size());
  for (std::uint32_t t = 0; t < K.tops().size(); ++t) {
    rep.margins[t] = certify_cell(res.map, t, oracles[t], cfg.mode, cfg.L_xi);
    if (!(rep.margins[t] > 0))
      throw std::runtime_error("jiggle: final certification failed on cell " +
                               std::to_string(t));
  }
  auto [c0, c1] = c0_c1_distance(s, res.map);
  rep.c0 = c0;
  rep.c1 = c1;
  if (!(c0 + c1 < cfg.epsilon))
    throw std::runtime_error("jiggle: final distance " + std::to_string(c0 + c1) +
                             " does not fit the budget");
  return {std::move(res.map), std::move(rep)};
}

namespace jig_detail {

/// Zone classification of the cells of a subdivision against closed kept
/// simplices: frozen cells intersect them and keep their original pieces;
/// blend cells share a vertex with a frozen cell and carry the transition
/// piece; passive cells share a vertex with those and stay PL but are
/// never anchored. No vertex of a frozen or blend cell is ever written.
struct Zones {
  std::vector<char> frozen, blend, passive;
  std::vector<char> vert_locked;
  bool degenerate_blend = false;  ///< a blend cell had no free vertex
};

inline Zones classify_zones(const SimplicialComplex& K, const std::vector<Mat>& kept) {
  Zones z;
  const std::size_t T = K.tops().size();
  z.frozen.assign(T, 0);
  z.blend.assign(T, 0);
  z.passive.assign(T, 0);
  std::vector<char> vin(K.vertex_count(), 0);
  for (VertexId v = 0; v < K.vertex_count(); ++v)
    vin[v] = vertex_in_any(K.vertex(v), kept) ? 1 : 0;
  for (std::uint32_t t = 0; t < T; ++t)
    for (VertexId v : K.tops()[t])
      if (vin[v]) {
        z.frozen[t] = 1;
        break;
      }
  std::vector<char> vfrozen(K.vertex_count(), 0);
  for (std::uint32_t t = 0; t < T; ++t)
    if (z.frozen[t])
      for (VertexId v : K.tops()[t]) vfrozen[v] = 1;
  for (std::uint32_t t = 0; t < T; ++t) {
    if (z.frozen[t]) continue;
    bool any = false, all = true;
    for (VertexId v : K.tops()[t]) {
      if (vfrozen[v])
        any = true;
      else
        all = false;
    }
    if (any) {
      z.blend[t] = 1;
      if (all) z.degenerate_blend = true;
    }
  }
  z.vert_locked.assign(K.vertex_count(), 0);
  for (std::uint32_t t = 0; t < T; ++t)
    if (z.frozen[t] || z.blend[t])
      for (VertexId v : K.tops()[t]) z.vert_locked[v] = 1;
  for (std::uint32_t t = 0; t < T; ++t) {
    if (z.frozen[t] || z.blend[t]) continue;
    for (VertexId v : K.tops()[t])
      if (z.vert_locked[v]) {
        z.passive[t] = 1;
        break;
      }
  }
  return z;
}

/// Which subcomplex a guarded cell's zone belongs to, propagated outward
/// from the cells touching each polyhedron: frozen cells by intersection,
/// blends through shared vertices with frozen cells, passives through
/// shared vertices with blends.
struct ZoneSides {
  std::vector<char> keep, frozen;
};

inline ZoneSides zone_sides(const SimplicialComplex& K, const Zones& z,
                            const std::vector<Mat>& keep_cells,
                            const std::vector<Mat>& frozen_cells) {
  const std::size_t T = K.tops().size();
  ZoneSides s;
  s.keep.assign(T, 0);
  s.frozen.assign(T, 0);
  std::vector<char> mkeep(K.vertex_count(), 0), mfroz(K.vertex_count(), 0);
  for (std::uint32_t t = 0; t < T; ++t) {
    if (!z.frozen[t]) continue;
    for (VertexId v : K.tops()[t]) {
      if (vertex_in_any(K.vertex(v), keep_cells)) s.keep[t] = 1;
      if (vertex_in_any(K.vertex(v), frozen_cells)) s.frozen[t] = 1;
    }
  }
  for (std::uint32_t t = 0; t < T; ++t)
    if (z.frozen[t])
      for (VertexId v : K.tops()[t]) {
        if (s.keep[t]) mkeep[v] = 1;
        if (s.frozen[t]) mfroz[v] = 1;
      }
  for (std::uint32_t t = 0; t < T; ++t) {
    if (!z.blend[t]) continue;
    for (VertexId v : K.tops()[t]) {
      if (mkeep[v]) s.keep[t] = 1;
      if (mfroz[v]) s.frozen[t] = 1;
    }
  }
  for (std::uint32_t t = 0; t < T; ++t)
    if (z.blend[t])
      for (VertexId v : K.tops()[t]) {
        if (s.keep[t]) mkeep[v] = 1;
        if (s.frozen[t]) mfroz[v] = 1;
      }
  for (std::uint32_t t = 0; t < T; ++t) {
    if (!z.passive[t]) continue;
    for (VertexId v : K.tops()[t]) {
      if (mkeep[v]) s.keep[t] = 1;
      if (mfroz[v]) s.frozen[t] = 1;
    }
  }
  return s;
}

/// The working map of a relative run at one level: original pieces on
/// frozen cells, secant PL elsewhere, and on each blend cell the join
/// interpolation between the original piece (on the frozen-side face) and
/// the cell's own secant (on the free face). Vertex values are the input
/// map's evaluations, so the map is continuous and agrees with the input
/// bit for bit at every locked vertex.
struct RelativeStage {
  PiecewiseMap map;
  Zones zones;
  std::shared_ptr<const SimplicialComplex> complex;
};

inline RelativeStage build_relative_stage(const PiecewiseMap& f, const std::vector<Mat>& kept,
                                          int level) {
  auto fine = std::make_shared<SimplicialComplex>(crystalline_subdivide(f.complex(), level));
  const SimplicialComplex& K = *fine;
  const SimplicialComplex& K0 = f.complex();

  std::vector<Vec> lin_vals(K.vertex_count());
  for (VertexId v = 0; v < K.vertex_count(); ++v) lin_vals[v] = f.evaluate(K.vertex(v));
  RelativeStage st;
  st.complex = fine;
  st.zones = classify_zones(K, kept);
  st.map = PiecewiseMap::pl(fine, f.target_dim(), lin_vals);
  if (st.zones.degenerate_blend) return st;  // caller refines further

  for (std::uint32_t t = 0; t < K.tops().size(); ++t) {
    if (!st.zones.frozen[t] && !st.zones.blend[t]) continue;
    const SimplexKey& s = K.tops()[t];
    const Mat P = K.points_of(s);
    const auto pt = locate_top(K0, Vec(P.rowwise().mean()));
    if (!pt) throw std::logic_error("relative stage: cell escaped the polyhedron");
    if (f.piece_is_affine(*pt)) continue;  // the secant already reproduces the map
    if (st.zones.frozen[t]) {
      st.map.set_smooth_piece(t, f.smooth_piece(*pt));
      continue;
    }
    std::vector<int> inner, outer;  // inner face carries the original map
    for (std::size_t i = 0; i < s.size(); ++i) {
      bool locked = false;
      for (std::uint32_t u : K.tops_at_vertex(s[i]))
        if (st.zones.frozen[u]) {
          locked = true;
          break;
        }
      (locked ? inner : outer).push_back(static_cast<int>(i));
    }
    std::vector<int> rest(s.size() - 1);
    for (std::size_t i = 0; i + 1 < s.size(); ++i) rest[i] = static_cast<int>(i) + 1;
    std::vector<Vec> rest_vals;
    for (int i : rest) rest_vals.push_back(lin_vals[s[static_cast<std::size_t>(i)]]);
    const SmoothMap secant = join_map(P, {0}, rest, {lin_vals[s[0]]}, rest_vals);
    st.map.set_smooth_piece(t, interpolate(P, inner, outer, secant, f.smooth_piece(*pt)));
  }
  return st;
}

inline std::vector<Mat> cells_as_points(const SimplicialComplex& K,
                                        const std::vector<SimplexKey>& tops, const char* who) {
  std::vector<Mat> out;
  out.reserve(tops.size());
  for (const SimplexKey& s : tops) {
    if (!K.contains(s))
      throw std::invalid_argument(std::string(who) + ": cell not in the complex");
    out.push_back(K.points_of(s));
  }
  return out;
}

inline bool cell_inside_region(const Mat& P, const Region& U) {
  for (int i = 0; i < P.cols(); ++i)
    if (!U.contains(P.col(i))) return false;
  return true;
}

struct RelativeOutcome {
  PiecewiseMap map;
  JigglingReport report;
  std::vector<char> exempt;  ///< per top of the output complex
};

/// Shared engine for the relative runs. In region mode the guarded zones
/// must fit inside the given neighborhoods and exemption is literal
/// membership in U_frozen; in combinatorial mode (chart-by-chart runs) the
/// zones may lie anywhere and exemption follows the zone's side.
inline RelativeOutcome jiggle_relative_impl(const PiecewiseMap& s, const RelationFamily& family,
                                            const std::vector<SimplexKey>& K_keep,
                                            const std::vector<SimplexKey>& K_frozen,
                                            const Region& U_keep, const Region& U_frozen,
                                            bool combinatorial, const JigglingConfig& cfg) {
  cfg.validate();
  const SimplicialComplex& K0 = s.complex();
  if (!K0.pure()) throw std::invalid_argument("jiggle_relative: complex must be pure");
  if (K_keep.empty() && K_frozen.empty()) {
    auto [map, rep] = jiggle_linear(s, family, cfg);
    RelativeOutcome out{std::move(map), std::move(rep), {}};
    out.exempt.assign(out.map.complex().tops().size(), 0);
    return out;
  }

  const std::vector<Mat> keep_cells = cells_as_points(K0, K_keep, "jiggle_relative");
  const std::vector<Mat> frozen_cells = cells_as_points(K0, K_frozen, "jiggle_relative");
  std::vector<Mat> kept_all = keep_cells;
  kept_all.insert(kept_all.end(), frozen_cells.begin(), frozen_cells.end());

  // entry check: the map must be a certified solution near the kept cells
  double entry_margin = std::numeric_limits<double>::infinity();
  if (!K_keep.empty()) {
    for (std::uint32_t t = 0; t < K0.tops().size(); ++t) {
      bool check = false;
      if (combinatorial) {
        for (const SimplexKey& k : K_keep)
          if (K0.tops()[t] == k) {
            check = true;
            break;
          }
      } else {
        check = region_simplex_distance(U_keep, K0.points_of(K0.tops()[t])) <= 0.0;
      }
      if (!check) continue;
      const double m = certify_cell(s, t, family(K0, t), cfg.mode, cfg.L_xi);
      if (!(m > 0))
        throw std::invalid_argument(
            "jiggle_relative: the map is not a certified solution near the kept subcomplex");
      entry_margin = std::min(entry_margin, m);
    }
  }
  if (!std::isfinite(entry_margin)) entry_margin = 0.0;

  // everything kept or frozen: nothing to perturb, return the map as is
  {
    std::vector<char> covered(K0.tops().size(), 0), covered_keep(K0.tops().size(), 0);
    for (std::uint32_t t = 0; t < K0.tops().size(); ++t) {
      for (const SimplexKey& k : K_keep)
        if (K0.tops()[t] == k) covered[t] = covered_keep[t] = 1;
      for (const SimplexKey& k : K_frozen)
        if (K0.tops()[t] == k) covered[t] = 1;
    }
    bool all = true;
    for (char c : covered) all = all && (c != 0);
    if (all) {
      RelativeOutcome out{s, {}, {}};
      out.report.relative = true;
      out.report.margins.assign(K0.tops().size(), entry_margin);
      out.exempt.assign(K0.tops().size(), 0);
      for (std::uint32_t t = 0; t < K0.tops().size(); ++t)
        if (!covered_keep[t]) out.exempt[t] = 1;
      std::vector<VertexId> verts;
      for (VertexId v = 0; v < K0.vertex_count(); ++v)
        if (vertex_in_any(K0.vertex(v), kept_all)) verts.push_back(v);
      out.report.fixed_vertices = verts.size();
      out.report.fixed_hash = hash_vertex_data(K0, s, verts);
      return out;
    }
  }

  // level search: zones must separate, fit their neighborhoods, carry
  // positive margins where claimed, and the stage map must fit half the
  // budget
  const int l_start = cfg.level_init >= 0 ? cfg.level_init : 0;
  std::optional<RelativeStage> stage;
  std::vector<RelationOracle> oracles;
  std::vector<char> exempt;
  double lin_gap = 0.0;
  int level = l_start;
  std::string why = "level search never ran";
  for (int l = l_start; l <= cfg.level_max; ++l) {
    RelativeStage st = build_relative_stage(s, kept_all, l);
    if (st.zones.degenerate_blend) {
      why = "a blend cell has no free vertex";
      continue;
    }
    const SimplicialComplex& K = *st.complex;
    const ZoneSides sd = zone_sides(K, st.zones, keep_cells, frozen_cells);
    std::vector<char> ex(K.tops().size(), 0);
    bool fits = true;
    for (std::uint32_t t = 0; t < K.tops().size() && fits; ++t) {
      const bool zoned = st.zones.frozen[t] || st.zones.blend[t] || st.zones.passive[t];
      if (!zoned) continue;
      if (combinatorial) {
        ex[t] = (sd.frozen[t] && !sd.keep[t]) ? 1 : 0;
        continue;
      }
      const Mat P = K.points_of(K.tops()[t]);
      if (sd.keep[t] && !cell_inside_region(P, U_keep)) fits = false;
      if (sd.frozen[t] && !cell_inside_region(P, U_frozen)) fits = false;
      if (!fits) {
        why = "guarded zones escape the neighborhoods";
        break;
      }
      if (!K_frozen.empty() && cell_inside_region(P, U_frozen)) ex[t] = 1;
    }
    if (!fits) continue;
    auto [c0, c1] = c0_c1_distance(s, st.map);
    if (!(c0 + c1 < cfg.epsilon / 2.0)) {
      why = "stage map misses the half-budget";
      continue;
    }
    std::vector<RelationOracle> ors;
    ors.reserve(K.tops().size());
    for (std::uint32_t t = 0; t < K.tops().size(); ++t) ors.push_back(family(K, t));
    bool certified = true;
    for (std::uint32_t t = 0; t < K.tops().size() && certified; ++t) {
      const bool zoned = st.zones.frozen[t] || st.zones.blend[t] || st.zones.passive[t];
      if (!zoned || ex[t]) continue;
      if (!(certify_cell(st.map, t, ors[t], cfg.mode, cfg.L_xi) > 0)) {
        certified = false;
        why = "a guarded cell near the kept subcomplex lost its margin";
      }
    }
    if (!certified) continue;
    stage = std::move(st);
    oracles = std::move(ors);
    exempt = std::move(ex);
    lin_gap = c0 + c1;
    level = l;
    break;
  }
  if (!stage)
    throw std::runtime_error("jiggle_relative: no level up to " + std::to_string(cfg.level_max) +
                             " realizes the guarded zones (" + why + ")");

  const SimplicialComplex& K = *stage->complex;
  const Coloring col = greedy_color(K);
  std::vector<CertEntry> certs(K.tops().size());
  for (std::uint32_t t = 0; t < K.tops().size(); ++t) {
    const bool zoned =
        stage->zones.frozen[t] || stage->zones.blend[t] || stage->zones.passive[t];
    if (!zoned) continue;
    certs[t].perturbable = false;
    if (exempt[t]) {
      certs[t].exempt = true;
      continue;
    }
    certs[t].done = true;
    certs[t].margin = certify_cell(stage->map, t, oracles[t], cfg.mode, cfg.L_xi);
    certs[t].jet = anchor_jet(stage->map, t);
  }

  auto res = run_color_loop(stage->map, stage->map, oracles, col, std::move(certs), cfg,
                            cfg.epsilon - lin_gap);

  RelativeOutcome out{std::move(res.map), {}, std::move(exempt)};
  out.report.relative = true;
  out.report.level = level;
  out.report.colors = col.count;
  out.report.retries = std::move(res.retries);
  out.report.margins.assign(K.tops().size(), 0.0);
  for (std::uint32_t t = 0; t < K.tops().size(); ++t) {
    if (out.exempt[t]) continue;
    out.report.margins[t] = certify_cell(out.map, t, oracles[t], cfg.mode, cfg.L_xi);
    if (!(out.report.margins[t] > 0))
      throw std::runtime_error("jiggle_relative: final certification failed on cell " +
                               std::to_string(t));
  }
  auto [c0, c1] = c0_c1_distance(s, out.map);
  out.report.c0 = c0;
  out.report.c1 = c1;
  if (!(c0 + c1 < cfg.epsilon))
    throw std::runtime_error("jiggle_relative: final distance does not fit the budget");
  std::vector<VertexId> verts;
  for (VertexId v = 0; v < K.vertex_count(); ++v)
    if (vertex_in_any(K.vertex(v), kept_all)) verts.push_back(v);
  out.report.fixed_vertices = verts.size();
  out.report.fixed_hash = hash_vertex_data(K, out.map, verts);
  return out;
}

}  // namespace jig_detail

/// Jiggles the map while keeping it bit-identical on the kept subcomplex
/// K_keep (where it must already be a certified solution, checked at entry
/// against U_keep) and on the frozen subcomplex K_frozen (no solution
/// claim; cells inside its neighborhood U_frozen are exempt from
/// certification). The guarded zones around each subcomplex must fit
/// inside its neighborhood, refining up to level_max if needed; the
/// neighborhoods must be disjoint for that to succeed when both
/// subcomplexes are present.
inline std::pair<PiecewiseMap, JigglingReport> jiggle_relative(
    const PiecewiseMap& s, const RelationFamily& family,
    const std::vector<SimplexKey>& K_keep, const std::vector<SimplexKey>& K_frozen,
    const Region& U_keep, const Region& U_frozen, const JigglingConfig& cfg) {
  auto out = jig_detail::jiggle_relative_impl(s, family, K_keep, K_frozen, U_keep, U_frozen,
                                              /*combinatorial=*/false, cfg);
  return {std::move(out.map), std::move(out.report)};
}

// ---------------------------------------------------------------------------
// Chart-by-chart jiggling of sections

struct BundleChart {
  std::vector<SimplexKey> tops;  ///< cells of the base complex this chart covers
  SmoothMap to_chart;            ///< value transform into chart coordinates
  SmoothMap from_chart;          ///< its inverse
};

struct BundleReport {
  std::vector<JigglingReport> charts;
};

namespace jig_detail {

/// Composes every piece of the map with a value transform. Identity and
/// linear transforms keep affine pieces affine through their vertex
/// values; everything else becomes a closure piece.
inline PiecewiseMap transform_values(const PiecewiseMap& f, const SmoothMap& phi) {
  if (phi.domain_dim != f.target_dim())
    throw std::invalid_argument("transform_values: transform domain mismatch");
  std::vector<Vec> vals;
  vals.reserve(f.complex().vertex_count());
  for (VertexId v = 0; v < f.complex().vertex_count(); ++v)
    vals.push_back(phi.value(f.value_at_vertex(v)));
  PiecewiseMap out = PiecewiseMap::pl(f.complex_ptr(), phi.target_dim, std::move(vals));
  for (std::uint32_t t = 0; t < f.complex().tops().size(); ++t) {
    const bool aff = f.piece_is_affine(t);
    if (aff && (phi.name == "identity" || phi.name == "linear")) continue;
    if (!aff && phi.name == "identity") {
      out.set_smooth_piece(t, f.smooth_piece(t));
      continue;
    }
    const PiecewiseMap base = f;
    const SmoothMap p = phi;
    const std::uint32_t top = t;
    SmoothMap piece;
    piece.name = "chart_composite";
    piece.domain_dim = f.complex().ambient_dim();
    piece.target_dim = phi.target_dim;
    piece.value = [base, p, top](const Vec& x) { return p.value(base.evaluate_on(top, x)); };
    piece.jacobian = [base, p, top](const Vec& x) {
      const Jet1 j = base.piece_jet(top, x);
      return Mat(p.jacobian(j.value) * j.ambient_slope());
    };
    out.set_smooth_piece(t, piece);
  }
  return out;
}

}  // namespace jig_detail

/// Jiggles a section chart by chart: in each chart the running map is
/// transformed into chart coordinates, jiggled relative to the cells
/// already solved (kept bit-stable, margins re-checked in the new chart's
/// coordinates at entry) with everything unsolved outside the chart
/// frozen, and transformed back. Charts must be ordered so that each
/// chart's guard ring toward unsolved territory falls inside a later
/// chart; the final coverage check fails otherwise.
inline std::pair<PiecewiseMap, BundleReport> jiggle_bundle(const PiecewiseMap& s,
                                                           const std::vector<BundleChart>& charts,
                                                           const RelationFamily& family,
                                                           const JigglingConfig& cfg) {
  cfg.validate();
  if (charts.empty()) throw std::invalid_argument("jiggle_bundle: no charts");
  std::vector<std::vector<Mat>> chart_cells;
  chart_cells.reserve(charts.size());
  for (const BundleChart& ch : charts)
    chart_cells.push_back(jig_detail::cells_as_points(s.complex(), ch.tops, "jiggle_bundle"));
  {
    std::vector<char> covered(s.complex().tops().size(), 0);
    for (const auto& ch : charts)
      for (const SimplexKey& k : ch.tops)
        for (std::uint32_t t = 0; t < s.complex().tops().size(); ++t)
          if (s.complex().tops()[t] == k) covered[t] = 1;
    for (char c : covered)
      if (!c) throw std::invalid_argument("jiggle_bundle: charts do not cover the complex");
  }

  PiecewiseMap cur = s;
  BundleReport rep;
  std::vector<Mat> solved;  // closed cells certified so far, in base coordinates
  for (std::size_t ci = 0; ci < charts.size(); ++ci) {
    const BundleChart& ch = charts[ci];
    const SimplicialComplex& K = cur.complex();
    PiecewiseMap in_chart = jig_detail::transform_values(cur, ch.to_chart);
    std::vector<SimplexKey> keep, frozen;
    for (std::uint32_t t = 0; t < K.tops().size(); ++t) {
      const Vec bc = K.points_of(K.tops()[t]).rowwise().mean();
      bool done = false;
      for (const Mat& Q : solved)
        if (point_in_simplex(Q, bc)) {
          done = true;
          break;
        }
      if (done) {
        keep.push_back(K.tops()[t]);
        continue;
      }
      if (!jig_detail::vertex_in_any(bc, chart_cells[ci])) frozen.push_back(K.tops()[t]);
    }
    auto out = jig_detail::jiggle_relative_impl(in_chart, family, keep, frozen, Region::all(),
                                                Region::all(), /*combinatorial=*/true, cfg);
    rep.charts.push_back(out.report);
    const SimplicialComplex& Ko = out.map.complex();
    for (std::uint32_t t = 0; t < Ko.tops().size(); ++t)
      if (!out.exempt[t]) solved.push_back(Ko.points_of(Ko.tops()[t]));
    cur = jig_detail::transform_values(out.map, ch.from_chart);
  }
  const SimplicialComplex& Kf = cur.complex();
  for (const SimplexKey& k : Kf.tops()) {
    const Vec bc = Kf.points_of(k).rowwise().mean();
    bool done = false;
    for (const Mat& Q : solved)
      if (point_in_simplex(Q, bc)) {
        done = true;
        break;
      }
    if (!done)
      throw std::runtime_error(
          "jiggle_bundle: a cell is left uncovered after guarding; order the charts so "
          "later charts cover earlier guard rings");
  }
  return {std::move(cur), std::move(rep)};
}

// ---------------------------------------------------------------------------
// Triangulations into very general position

/// Jiggles the identity map of the complex into very general position with
/// respect to the distribution and reads the result as new vertex
/// positions: same combinatorics, every cell keeps its orientation
/// (full-dimensional cells) or stays non-degenerate, and the final
/// triangulation passes the general-position verifier; on a violation the
/// run repeats with a smaller budget.
inline std::pair<SimplicialComplex, JigglingReport> jiggle_triangulation(
    const SimplicialComplex& K, const Distribution& xi, const JigglingConfig& cfg) {
  cfg.validate();
  if (!K.pure()) throw std::invalid_argument("jiggle_triangulation: complex must be pure");
  if (K.tops().empty()) throw std::invalid_argument("jiggle_triangulation: empty complex");
  auto Kp = std::make_shared<SimplicialComplex>(K);
  std::vector<Vec> coords;
  coords.reserve(K.vertex_count());
  for (VertexId v = 0; v < K.vertex_count(); ++v) coords.push_back(K.vertex(v));
  const PiecewiseMap id = PiecewiseMap::pl(Kp, K.ambient_dim(), std::move(coords));
  const RelationFamily family = verygenpos_family(xi, cfg.L_xi);
  const bool full_dim = static_cast<int>(K.tops()[0].size()) == K.ambient_dim() + 1;

  JigglingConfig attempt = cfg;
  for (int tries = 0; tries <= cfg.max_retries; ++tries) {
    auto [g, rep] = jiggle_linear(id, family, attempt);
    const SimplicialComplex& Kl = g.complex();
    std::vector<Vec> pos;
    pos.reserve(Kl.vertex_count());
    for (VertexId v = 0; v < Kl.vertex_count(); ++v) pos.push_back(g.value_at_vertex(v));
    bool shape_ok = true;
    for (const SimplexKey& sk : Kl.tops()) {
      Mat B(Kl.ambient_dim(), static_cast<int>(sk.size()));
      for (std::size_t i = 0; i < sk.size(); ++i) B.col(static_cast<int>(i)) = pos[sk[i]];
      if (full_dim) {
        if (!(signed_volume(Kl.points_of(sk)) * signed_volume(B) > 0.0)) shape_ok = false;
      } else if (degenerate(B)) {
        shape_ok = false;
      }
      if (!shape_ok) break;
    }
    if (shape_ok) {
      auto op = std::make_shared<SimplicialComplex>(
          SimplicialComplex::from_simplices(Kl.ambient_dim(), pos, Kl.tops()));
      std::vector<Vec> ocoords;
      ocoords.reserve(op->vertex_count());
      for (VertexId v = 0; v < op->vertex_count(); ++v) ocoords.push_back(op->vertex(v));
      const PiecewiseMap oid = PiecewiseMap::pl(op, op->ambient_dim(), std::move(ocoords));
      if (verify_general_position(oid, xi).pass) return {*op, std::move(rep)};
    }
    attempt.epsilon *= attempt.eps_shrink;
  }
  throw std::runtime_error(
      "jiggle_triangulation: could not keep orientations and general position; "
      "retries exhausted");
}

}  // namespace jiggle
