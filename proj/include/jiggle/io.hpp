#pragma once

/// \file io.hpp
/// JSON serialization of complexes, piecewise maps, regions, relation and
/// run configuration blocks, and reports, plus OFF export. One canonical,
/// diffable format: objects use sorted keys, numbers print in shortest
/// round-trip form, files end in a newline and are written atomically.
///
/// Complexes serialize as geometry plus maximal simplices; subdivision
/// lineage is an in-memory acceleration structure and is not part of the
/// format (reimported complexes keep their signature, so distances between
/// maps over them still work, but refinement relations are forgotten).

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "coloring.hpp"
#include "complex.hpp"
#include "function_registry.hpp"
#include "jiggling.hpp"
#include "piecewise_map.hpp"
#include "region.hpp"
#include "relations.hpp"

namespace jiggle {

using Json = nlohmann::json;

namespace io_detail {

[[noreturn]] inline void fail(const std::string& who, const std::string& msg) {
  throw std::invalid_argument(who + ": " + msg);
}

inline void require_object(const Json& j, const std::string& who) {
  if (!j.is_object()) fail(who, "expected a JSON object");
}

/// Schema hygiene: every key must be known, so typos surface as errors
/// instead of silently ignored settings.
inline void reject_unknown_keys(const Json& j, std::initializer_list<const char*> allowed,
                                const std::string& who) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) { ok = true; break; }
    if (!ok) fail(who, "unknown key \"" + key + "\"");
  }
}

inline const Json& need(const Json& j, const char* key, const std::string& who) {
  auto it = j.find(key);
  if (it == j.end()) fail(who, std::string("missing key \"") + key + "\"");
  return *it;
}

inline Vec vec_from_json(const Json& j, const std::string& who) {
  if (!j.is_array()) fail(who, "expected an array of numbers");
  Vec v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) fail(who, "expected an array of numbers");
    v(static_cast<int>(i)) = j[i].get<double>();
  }
  return v;
}

inline Json vec_to_json(const Vec& v) {
  Json a = Json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

/// Matrix as a list of rows.
inline Mat mat_from_json(const Json& j, const std::string& who) {
  if (!j.is_array() || j.empty()) fail(who, "expected a nonempty array of rows");
  const Vec first = vec_from_json(j[0], who);
  Mat M(j.size(), first.size());
  M.row(0) = first.transpose();
  for (std::size_t i = 1; i < j.size(); ++i) {
    const Vec r = vec_from_json(j[i], who);
    if (r.size() != M.cols()) fail(who, "ragged matrix rows");
    M.row(static_cast<int>(i)) = r.transpose();
  }
  return M;
}

inline Json mat_to_json(const Mat& M) {
  Json a = Json::array();
  for (int i = 0; i < M.rows(); ++i) a.push_back(vec_to_json(M.row(i).transpose()));
  return a;
}

inline std::string hash_to_string(std::uint64_t h) {
  char buf[2 + 16 + 1];
  std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

inline std::uint64_t hash_from_string(const std::string& s, const std::string& who) {
  try {
    return std::stoull(s, nullptr, 16);
  } catch (const std::exception&) {
    fail(who, "bad hash literal \"" + s + "\"");
  }
}

}  // namespace io_detail

// ---------------------------------------------------------------------------
// Complexes

inline Json complex_to_json(const SimplicialComplex& K) {
  Json j;
  j["ambient_dim"] = K.ambient_dim();
  Json verts = Json::array();
  for (VertexId v = 0; v < K.vertex_count(); ++v) verts.push_back(io_detail::vec_to_json(K.vertex(v)));
  j["vertices"] = std::move(verts);
  Json sims = Json::array();
  for (const SimplexKey& s : K.maximal()) {
    Json one = Json::array();
    for (VertexId v : s) one.push_back(v);
    sims.push_back(std::move(one));
  }
  j["simplices"] = std::move(sims);
  return j;
}

inline SimplicialComplex complex_from_json(const Json& j) {
  const std::string who = "complex";
  io_detail::require_object(j, who);
  io_detail::reject_unknown_keys(j, {"ambient_dim", "vertices", "simplices"}, who);
  const Json& jd = io_detail::need(j, "ambient_dim", who);
  if (!jd.is_number_integer() || jd.get<int>() < 1) io_detail::fail(who, "bad ambient_dim");
  const int N = jd.get<int>();
  const Json& jv = io_detail::need(j, "vertices", who);
  if (!jv.is_array()) io_detail::fail(who, "vertices must be an array");
  std::vector<Vec> verts;
  verts.reserve(jv.size());
  for (std::size_t i = 0; i < jv.size(); ++i) {
    Vec v = io_detail::vec_from_json(jv[i], who + ".vertices[" + std::to_string(i) + "]");
    if (v.size() != N)
      io_detail::fail(who, "vertex " + std::to_string(i) + " has wrong dimension");
    verts.push_back(std::move(v));
  }
  const Json& js = io_detail::need(j, "simplices", who);
  if (!js.is_array() || js.empty()) io_detail::fail(who, "simplices must be a nonempty array");
  std::vector<SimplexKey> sims;
  sims.reserve(js.size());
  for (const Json& one : js) {
    if (!one.is_array() || one.empty()) io_detail::fail(who, "each simplex is a nonempty id list");
    SimplexKey s;
    for (const Json& e : one) {
      if (!e.is_number_unsigned()) io_detail::fail(who, "simplex entries must be vertex indices");
      s.push_back(e.get<VertexId>());
    }
    std::sort(s.begin(), s.end());
    for (std::size_t i = 1; i < s.size(); ++i)
      if (s[i] == s[i - 1])
        io_detail::fail(who, "repeated vertex " + std::to_string(s[i]) + " in simplex " + key_str(s));
    sims.push_back(std::move(s));
  }
  return SimplicialComplex::from_simplices(N, std::move(verts), sims);
}

// ---------------------------------------------------------------------------
// Piecewise maps

/// Maps serialize as the complex, the vertex value table and the registry
/// descriptors of smooth pieces. Composite pieces (interpolations, joins)
/// have closure evaluators and cannot be written; jiggling outputs are PL,
/// so this only bites when exporting intermediate constructions.
inline Json map_to_json(const PiecewiseMap& f) {
  Json j;
  j["complex"] = complex_to_json(f.complex());
  j["target_dim"] = f.target_dim();
  Json vals = Json::array();
  for (VertexId v = 0; v < f.complex().vertex_count(); ++v)
    vals.push_back(io_detail::vec_to_json(f.value_at_vertex(v)));
  j["values"] = std::move(vals);
  if (!f.is_pl()) {
    std::vector<std::uint32_t> tops;
    for (const auto& [t, _] : f.smooth_pieces()) tops.push_back(t);
    std::sort(tops.begin(), tops.end());
    Json pieces = Json::array();
    for (std::uint32_t t : tops) {
      const SmoothMap& s = f.smooth_piece(t);
      if (!s.serializable())
        throw std::invalid_argument("map export: piece on top " + std::to_string(t) +
                                    " (\"" + s.name + "\") is not a registry map");
      Json p;
      p["top"] = t;
      p["name"] = s.name;
      p["params"] = s.params;
      pieces.push_back(std::move(p));
    }
    j["pieces"] = std::move(pieces);
  }
  return j;
}

inline PiecewiseMap map_from_json(const Json& j) {
  const std::string who = "map";
  io_detail::require_object(j, who);
  auto K = std::make_shared<SimplicialComplex>(complex_from_json(io_detail::need(j, "complex", who)));

  // Shorthand input form: a registry map sampled over the whole complex.
  if (j.contains("smooth")) {
    io_detail::reject_unknown_keys(j, {"complex", "smooth"}, who);
    const Json& js = j["smooth"];
    io_detail::require_object(js, who + ".smooth");
    io_detail::reject_unknown_keys(js, {"name", "params"}, who + ".smooth");
    const Json& jn = io_detail::need(js, "name", who + ".smooth");
    if (!jn.is_string()) io_detail::fail(who, "smooth.name must be a string");
    std::vector<double> params;
    if (js.contains("params")) params = js["params"].get<std::vector<double>>();
    return PiecewiseMap::smooth(
        std::move(K), make_smooth_map(jn.get<std::string>(), K->ambient_dim(), std::move(params)));
  }

  io_detail::reject_unknown_keys(j, {"complex", "target_dim", "values", "pieces"}, who);
  const Json& jt = io_detail::need(j, "target_dim", who);
  if (!jt.is_number_integer() || jt.get<int>() < 1) io_detail::fail(who, "bad target_dim");
  const int n = jt.get<int>();
  const Json& jv = io_detail::need(j, "values", who);
  if (!jv.is_array() || jv.size() != K->vertex_count())
    io_detail::fail(who, "values must list one entry per vertex");
  std::vector<Vec> vals;
  vals.reserve(jv.size());
  for (std::size_t i = 0; i < jv.size(); ++i) {
    Vec v = io_detail::vec_from_json(jv[i], who + ".values[" + std::to_string(i) + "]");
    if (v.size() != n) io_detail::fail(who, "value " + std::to_string(i) + " has wrong dimension");
    vals.push_back(std::move(v));
  }
  PiecewiseMap f = PiecewiseMap::pl(K, n, std::move(vals));
  if (j.contains("pieces")) {
    const Json& jp = j["pieces"];
    if (!jp.is_array()) io_detail::fail(who, "pieces must be an array");
    for (const Json& p : jp) {
      io_detail::require_object(p, who + ".pieces");
      io_detail::reject_unknown_keys(p, {"top", "name", "params"}, who + ".pieces");
      const Json& pt = io_detail::need(p, "top", who + ".pieces");
      if (!pt.is_number_unsigned()) io_detail::fail(who, "piece top must be an index");
      const std::uint32_t t = pt.get<std::uint32_t>();
      if (t >= K->tops().size())
        io_detail::fail(who, "piece top " + std::to_string(t) + " out of range");
      std::vector<double> params;
      if (p.contains("params")) params = p["params"].get<std::vector<double>>();
      SmoothMap s = make_smooth_map(io_detail::need(p, "name", who + ".pieces").get<std::string>(),
                                    K->ambient_dim(), std::move(params));
      if (s.target_dim != n)
        io_detail::fail(who, "piece on top " + std::to_string(t) + " has wrong target dimension");
      f.set_smooth_piece(t, std::move(s));
    }
  }
  return f;
}

// ---------------------------------------------------------------------------
// Regions

inline Json region_to_json(const Region& r) {
  Json j;
  switch (r.kind()) {
    case Region::Kind::All: j["kind"] = "all"; break;
    case Region::Kind::Ball:
      j["kind"] = "ball";
      j["center"] = io_detail::vec_to_json(r.ball_center());
      j["radius"] = r.ball_radius();
      break;
    case Region::Kind::Box:
      j["kind"] = "box";
      j["lo"] = io_detail::vec_to_json(r.box_lo());
      j["hi"] = io_detail::vec_to_json(r.box_hi());
      break;
    case Region::Kind::Halfspaces:
      j["kind"] = "halfspaces";
      j["normals"] = io_detail::mat_to_json(r.halfspace_normals());
      j["offsets"] = io_detail::vec_to_json(r.halfspace_offsets());
      break;
    case Region::Kind::Predicate:
      throw std::invalid_argument("region export: predicate regions are not serializable");
  }
  return j;
}

inline Region region_from_json(const Json& j) {
  const std::string who = "region";
  io_detail::require_object(j, who);
  const std::string kind = io_detail::need(j, "kind", who).get<std::string>();
  if (kind == "all") {
    io_detail::reject_unknown_keys(j, {"kind"}, who);
    return Region::all();
  }
  if (kind == "ball") {
    io_detail::reject_unknown_keys(j, {"kind", "center", "radius"}, who);
    return Region::ball(io_detail::vec_from_json(io_detail::need(j, "center", who), who),
                        io_detail::need(j, "radius", who).get<double>());
  }
  if (kind == "box") {
    io_detail::reject_unknown_keys(j, {"kind", "lo", "hi"}, who);
    return Region::box(io_detail::vec_from_json(io_detail::need(j, "lo", who), who),
                       io_detail::vec_from_json(io_detail::need(j, "hi", who), who));
  }
  if (kind == "halfspaces") {
    io_detail::reject_unknown_keys(j, {"kind", "normals", "offsets"}, who);
    return Region::halfspaces(io_detail::mat_from_json(io_detail::need(j, "normals", who), who),
                              io_detail::vec_from_json(io_detail::need(j, "offsets", who), who));
  }
  io_detail::fail(who, "unknown kind \"" + kind + "\"");
}

// ---------------------------------------------------------------------------
// Colorings

inline Json coloring_to_json(const Coloring& c) {
  Json j;
  j["count"] = c.count;
  j["colors"] = c.colors;
  return j;
}

inline Coloring coloring_from_json(const Json& j) {
  const std::string who = "coloring";
  io_detail::require_object(j, who);
  io_detail::reject_unknown_keys(j, {"count", "colors"}, who);
  Coloring c;
  c.count = io_detail::need(j, "count", who).get<int>();
  c.colors = io_detail::need(j, "colors", who).get<std::vector<int>>();
  for (int x : c.colors)
    if (x < 0 || x >= c.count) io_detail::fail(who, "color out of range");
  return c;
}

// ---------------------------------------------------------------------------
// Distributions and relation blocks

/// xi blocks: {"kind": "constant", "vectors": [[...], ...]} with the spanning
/// vectors as rows, or {"kind": "registry", "name": ..., "params": [...]}
/// resolved against the ambient dimension of the jiggled map's target.
inline Distribution distribution_from_json(const Json& j, int ambient_dim) {
  const std::string who = "xi";
  io_detail::require_object(j, who);
  const std::string kind = io_detail::need(j, "kind", who).get<std::string>();
  if (kind == "constant") {
    io_detail::reject_unknown_keys(j, {"kind", "vectors"}, who);
    const Mat rows = io_detail::mat_from_json(io_detail::need(j, "vectors", who), who);
    if (rows.cols() != ambient_dim)
      io_detail::fail(who, "spanning vectors must have length " + std::to_string(ambient_dim));
    return constant_distribution(rows.transpose());
  }
  if (kind == "registry") {
    io_detail::reject_unknown_keys(j, {"kind", "name", "params"}, who);
    std::vector<double> params;
    if (j.contains("params")) params = j["params"].get<std::vector<double>>();
    return make_distribution(io_detail::need(j, "name", who).get<std::string>(), ambient_dim,
                             std::move(params));
  }
  io_detail::fail(who, "unknown kind \"" + kind + "\"");
}

inline Json distribution_to_json(const Distribution& d) {
  Json j;
  if (d.name == "constant") {
    j["kind"] = "constant";
    Mat frame(d.ambient_dim, d.rank);
    for (int c = 0; c < d.rank; ++c)
      for (int r = 0; r < d.ambient_dim; ++r)
        frame(r, c) = d.params[static_cast<std::size_t>(c) * d.ambient_dim + r];
    j["vectors"] = io_detail::mat_to_json(frame.transpose());
  } else {
    j["kind"] = "registry";
    j["name"] = d.name;
    j["params"] = d.params;
  }
  return j;
}

/// Parsed relation block; the oracle family is instantiated later, once the
/// domain and target dimensions of the concrete map are known.
struct RelationSpec {
  std::string relation;  ///< transverse | maxrank | contact3d | verygenpos
  Json xi;               ///< empty unless the relation needs a distribution
  CertificationMode mode = CertificationMode::Sampled;
  double L_xi = 0.0;
};

inline RelationSpec relation_spec_from_json(const Json& j) {
  const std::string who = "relation";
  io_detail::require_object(j, who);
  io_detail::reject_unknown_keys(j, {"relation", "xi", "certification", "L_xi"}, who);
  RelationSpec spec;
  spec.relation = io_detail::need(j, "relation", who).get<std::string>();
  if (spec.relation != "transverse" && spec.relation != "maxrank" &&
      spec.relation != "contact3d" && spec.relation != "verygenpos")
    io_detail::fail(who, "unknown relation \"" + spec.relation + "\"");
  const bool needs_xi = spec.relation == "transverse" || spec.relation == "verygenpos";
  if (j.contains("xi")) {
    if (!needs_xi) io_detail::fail(who, spec.relation + " does not take a distribution");
    spec.xi = j["xi"];
  } else if (needs_xi) {
    io_detail::fail(who, spec.relation + " needs an \"xi\" block");
  }
  if (j.contains("certification")) {
    const std::string m = j["certification"].get<std::string>();
    if (m == "sampled")
      spec.mode = CertificationMode::Sampled;
    else if (m == "lipschitz")
      spec.mode = CertificationMode::Lipschitz;
    else
      io_detail::fail(who, "certification must be \"sampled\" or \"lipschitz\"");
  }
  if (j.contains("L_xi")) {
    spec.L_xi = j["L_xi"].get<double>();
    if (spec.L_xi < 0) io_detail::fail(who, "L_xi must be nonnegative");
  }
  return spec;
}

inline Json relation_spec_to_json(const RelationSpec& spec) {
  Json j;
  j["relation"] = spec.relation;
  if (!spec.xi.is_null()) j["xi"] = spec.xi;
  j["certification"] = spec.mode == CertificationMode::Sampled ? "sampled" : "lipschitz";
  j["L_xi"] = spec.L_xi;
  return j;
}

/// Oracle family for a map with the given domain and target dimensions.
inline RelationFamily family_from_spec(const RelationSpec& spec, int domain_dim, int target_dim) {
  if (spec.relation == "maxrank")
    return uniform_family(maxrank_relation(domain_dim, target_dim));
  if (spec.relation == "contact3d") {
    if (domain_dim != 3 || target_dim != 3)
      throw std::invalid_argument("relation: contact3d needs a 3-D map into R^3");
    return uniform_family(contact3d_relation());
  }
  const Distribution xi = distribution_from_json(spec.xi, target_dim);
  if (spec.relation == "transverse")
    return uniform_family(transversality_relation(xi, domain_dim, spec.L_xi));
  return verygenpos_family(xi, spec.L_xi);
}

// ---------------------------------------------------------------------------
// Jiggling configuration and reports

inline JigglingConfig config_from_json(const Json& j) {
  const std::string who = "config";
  io_detail::require_object(j, who);
  io_detail::reject_unknown_keys(j,
                                 {"epsilon", "level_init", "eps_shrink", "max_retries",
                                  "certification", "L_xi", "strict_budget", "seed", "level_max"},
                                 who);
  JigglingConfig cfg;
  if (j.contains("epsilon")) cfg.epsilon = j["epsilon"].get<double>();
  if (j.contains("level_init")) {
    const Json& l = j["level_init"];
    if (l.is_string()) {
      if (l.get<std::string>() != "auto") io_detail::fail(who, "level_init: int or \"auto\"");
      cfg.level_init = -1;
    } else {
      cfg.level_init = l.get<int>();
    }
  }
  if (j.contains("eps_shrink")) cfg.eps_shrink = j["eps_shrink"].get<double>();
  if (j.contains("max_retries")) cfg.max_retries = j["max_retries"].get<int>();
  if (j.contains("certification")) {
    const std::string m = j["certification"].get<std::string>();
    if (m == "sampled")
      cfg.mode = CertificationMode::Sampled;
    else if (m == "lipschitz")
      cfg.mode = CertificationMode::Lipschitz;
    else
      io_detail::fail(who, "certification must be \"sampled\" or \"lipschitz\"");
  }
  if (j.contains("L_xi")) cfg.L_xi = j["L_xi"].get<double>();
  if (j.contains("strict_budget")) cfg.strict_budget = j["strict_budget"].get<bool>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("level_max")) cfg.level_max = j["level_max"].get<int>();
  cfg.validate();
  return cfg;
}

inline Json config_to_json(const JigglingConfig& cfg) {
  Json j;
  j["epsilon"] = cfg.epsilon;
  if (cfg.level_init < 0)
    j["level_init"] = "auto";
  else
    j["level_init"] = cfg.level_init;
  j["eps_shrink"] = cfg.eps_shrink;
  j["max_retries"] = cfg.max_retries;
  j["certification"] = cfg.mode == CertificationMode::Sampled ? "sampled" : "lipschitz";
  j["L_xi"] = cfg.L_xi;
  j["strict_budget"] = cfg.strict_budget;
  j["seed"] = cfg.seed;
  j["level_max"] = cfg.level_max;
  return j;
}

inline Json report_to_json(const JigglingReport& r) {
  Json j;
  j["level"] = r.level;
  j["colors"] = r.colors;
  j["margins"] = r.margins;
  j["c0"] = r.c0;
  j["c1"] = r.c1;
  j["retries"] = r.retries;
  j["relative"] = r.relative;
  j["fixed_hash"] = io_detail::hash_to_string(r.fixed_hash);
  j["fixed_vertices"] = r.fixed_vertices;
  return j;
}

inline JigglingReport report_from_json(const Json& j) {
  const std::string who = "report";
  io_detail::require_object(j, who);
  io_detail::reject_unknown_keys(j,
                                 {"level", "colors", "margins", "c0", "c1", "retries", "relative",
                                  "fixed_hash", "fixed_vertices"},
                                 who);
  JigglingReport r;
  r.level = io_detail::need(j, "level", who).get<int>();
  r.colors = io_detail::need(j, "colors", who).get<int>();
  r.margins = io_detail::need(j, "margins", who).get<std::vector<double>>();
  r.c0 = io_detail::need(j, "c0", who).get<double>();
  r.c1 = io_detail::need(j, "c1", who).get<double>();
  r.retries = io_detail::need(j, "retries", who).get<std::vector<int>>();
  r.relative = io_detail::need(j, "relative", who).get<bool>();
  r.fixed_hash = io_detail::hash_from_string(io_detail::need(j, "fixed_hash", who).get<std::string>(), who);
  r.fixed_vertices = io_detail::need(j, "fixed_vertices", who).get<std::size_t>();
  return r;
}

inline Json gp_report_to_json(const GeneralPositionReport& r) {
  Json j;
  j["pass"] = r.pass;
  j["min_margin"] = r.min_margin;
  j["note"] = r.note;
  Json entries = Json::array();
  for (const GeneralPositionEntry& e : r.entries) {
    Json one;
    one["top"] = e.top;
    one["face"] = e.face;
    one["margin"] = e.margin;
    entries.push_back(std::move(one));
  }
  j["entries"] = std::move(entries);
  return j;
}

// ---------------------------------------------------------------------------
// Files

inline Json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return Json::parse(in);
}

/// Atomic write: the file appears complete or not at all. Sorted keys plus
/// shortest-round-trip numbers make dumps byte-deterministic.
inline void save_text(const std::string& text, const std::string& path) {
  const std::filesystem::path target(path);
  const std::filesystem::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, target);
}

inline void save_json(const Json& j, const std::string& path) {
  save_text(j.dump(2) + "\n", path);
}

// ---------------------------------------------------------------------------
// OFF export

namespace io_detail {

inline std::string off_number(double x) {
  char buf[64];
  const int len = std::snprintf(buf, sizeof(buf), "%.17g", x);
  // trim to the shortest representation that still round-trips
  for (int prec = 1; prec < 17; ++prec) {
    char shorter[64];
    std::snprintf(shorter, sizeof(shorter), "%.*g", prec, x);
    if (std::strtod(shorter, nullptr) == x) return std::string(shorter);
  }
  return std::string(buf, static_cast<std::size_t>(len));
}

}  // namespace io_detail

/// OFF text for complexes embedded in ambient dimension <= 3. Faces are the
/// top cells for surface and curve complexes; solid (3-D) complexes export
/// their boundary triangles, which is what mesh viewers expect.
inline std::string off_export(const SimplicialComplex& K) {
  if (K.ambient_dim() > 3)
    throw std::invalid_argument("off export: ambient dimension must be at most 3");
  std::vector<SimplexKey> faces;
  if (K.top_dim() == 3) {
    std::unordered_map<SimplexKey, int, SimplexKeyHash> owners;
    for (const SimplexKey& t : K.tops())
      for (std::size_t skip = 0; skip < t.size(); ++skip) {
        SimplexKey f;
        for (std::size_t i = 0; i < t.size(); ++i)
          if (i != skip) f.push_back(t[i]);
        owners[f] += 1;
      }
    for (const auto& [f, count] : owners)
      if (count == 1) faces.push_back(f);
    std::sort(faces.begin(), faces.end());
  } else if (K.top_dim() >= 1) {
    faces = K.tops();
  }
  std::string out = "OFF\n";
  out += std::to_string(K.vertex_count()) + " " + std::to_string(faces.size()) + " 0\n";
  for (VertexId v = 0; v < K.vertex_count(); ++v) {
    const Vec& x = K.vertex(v);
    for (int i = 0; i < 3; ++i) {
      if (i) out += " ";
      out += io_detail::off_number(i < x.size() ? x(i) : 0.0);
    }
    out += "\n";
  }
  for (const SimplexKey& f : faces) {
    out += std::to_string(f.size());
    for (VertexId v : f) out += " " + std::to_string(v);
    out += "\n";
  }
  return out;
}

}  // namespace jiggle
