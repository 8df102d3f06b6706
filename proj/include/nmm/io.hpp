#pragma once

#include <json.hpp>

#include <string>
#include <vector>

#include "nmm/equiv.hpp"
#include "nmm/errors.hpp"
#include "nmm/fit.hpp"
#include "nmm/graph.hpp"
#include "nmm/params.hpp"
#include "nmm/search.hpp"
#include "nmm/sim.hpp"
#include "nmm/structure.hpp"

namespace nmm::io {

using Json = nlohmann::ordered_json;

namespace detail {

inline Json names_of(const Admg& g, VertexSet s) {
  Json out = Json::array();
  for (int v : s) out.push_back(g.name(v));
  return out;
}

inline const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw SchemaError(std::string("missing field '") + key + "'");
  return j.at(key);
}

inline std::vector<std::string> string_list(const Json& j, const char* what) {
  if (!j.is_array()) throw SchemaError(std::string(what) + " must be an array");
  std::vector<std::string> out;
  for (const auto& e : j) {
    if (!e.is_string()) throw SchemaError(std::string(what) + " entries must be strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

inline std::vector<Edge> edge_list(const Json& j, const std::vector<std::string>& names, const char* what) {
  if (!j.is_array()) throw SchemaError(std::string(what) + " must be an array");
  std::vector<Edge> out;
  for (const auto& e : j) {
    auto pair = string_list(e, what);
    if (pair.size() != 2) throw SchemaError(std::string(what) + " entries must be name pairs");
    int ends[2];
    for (int k = 0; k < 2; ++k) {
      auto it = std::find(names.begin(), names.end(), pair[k]);
      if (it == names.end()) throw SchemaError("edge names unknown vertex '" + pair[k] + "'");
      ends[k] = static_cast<int>(it - names.begin());
    }
    out.emplace_back(ends[0], ends[1]);
  }
  return out;
}

inline double number(const Json& j, const char* what) {
  if (!j.is_number()) throw SchemaError(std::string(what) + " must be a number");
  return j.get<double>();
}

}  // namespace detail

/// Random vertices are written in index order, then context vertices.
inline Json to_json(const Admg& g) {
  Json j;
  j["vertices"] = detail::names_of(g, g.random());
  j["context"] = detail::names_of(g, g.context());
  Json dir = Json::array();
  for (auto [a, b] : g.directed_edges()) dir.push_back({g.name(a), g.name(b)});
  Json bi = Json::array();
  for (auto [a, b] : g.bidirected_edges()) bi.push_back({g.name(a), g.name(b)});
  j["directed"] = std::move(dir);
  j["bidirected"] = std::move(bi);
  return j;
}

/// Vertex indices follow "vertices" then "context". Graph-level errors
/// (cycles, bad context edges) surface as InvalidGraph.
inline Admg graph_from_json(const Json& j) {
  auto names = detail::string_list(detail::field(j, "vertices"), "vertices");
  std::vector<std::string> ctx;
  if (j.contains("context")) ctx = detail::string_list(j.at("context"), "context");
  VertexSet context;
  for (const auto& c : ctx) {
    context = context.with(static_cast<int>(names.size()));
    names.push_back(c);
  }
  std::vector<Edge> dir;
  std::vector<Edge> bi;
  if (j.contains("directed")) dir = detail::edge_list(j.at("directed"), names, "directed");
  if (j.contains("bidirected")) bi = detail::edge_list(j.at("bidirected"), names, "bidirected");
  return Admg::from_edges(std::move(names), dir, bi, context);
}

inline Json to_json(const ThetaTable& theta) {
  const Admg& g = theta.graph();
  Json params = Json::array();
  for (const auto& b : theta.index().blocks()) {
    Json p;
    p["head"] = detail::names_of(g, b.entry.head);
    p["tail"] = detail::names_of(g, b.entry.tail);
    Json values = Json::array();
    for (std::size_t t = 0; t < b.count(); ++t) values.push_back(theta[b.offset + t]);
    p["values"] = std::move(values);
    params.push_back(std::move(p));
  }
  Json j;
  j["graph"] = to_json(g);
  j["params"] = std::move(params);
  return j;
}

inline ThetaTable theta_from_json(const Json& j) {
  Admg g = graph_from_json(detail::field(j, "graph"));
  auto index = enumerate_params(g);
  std::vector<double> values(index->size(), 0.0);
  std::vector<bool> seen(index->blocks().size(), false);
  const Json& params = detail::field(j, "params");
  if (!params.is_array()) throw SchemaError("params must be an array");
  for (const auto& p : params) {
    VertexSet head;
    for (const auto& name : detail::string_list(detail::field(p, "head"), "head")) {
      head = head.with(g.index_of(name));
    }
    const int b = index->find_head(head);
    if (b < 0) throw SchemaError("params list a head the graph does not have");
    const auto& block = index->blocks()[b];
    VertexSet tail;
    for (const auto& name : detail::string_list(detail::field(p, "tail"), "tail")) {
      tail = tail.with(g.index_of(name));
    }
    if (tail != block.entry.tail) throw SchemaError("param tail does not match the graph");
    const Json& vals = detail::field(p, "values");
    if (!vals.is_array() || vals.size() != block.count()) throw SchemaError("param values have the wrong length");
    if (seen[b]) throw SchemaError("params repeat a head");
    seen[b] = true;
    for (std::size_t t = 0; t < block.count(); ++t) values[block.offset + t] = detail::number(vals[t], "value");
  }
  for (bool s : seen) {
    if (!s) throw SchemaError("params are missing a head");
  }
  return ThetaTable(std::move(index), std::move(values));
}

inline Json to_json(const FitResult& fit, double n) {
  Json j;
  j["loglik"] = fit.loglik;
  j["bic"] = bic(fit.loglik, fit.theta.size(), n);
  j["cycles"] = fit.cycles;
  j["converged"] = fit.converged;
  j["theta"] = to_json(fit.theta);
  return j;
}

inline Json to_json(const SearchResult& res) {
  Json j;
  j["best_bic"] = res.best_bic;
  Json plateau = Json::array();
  for (const auto& g : res.plateau) plateau.push_back(to_json(g));
  j["plateau"] = std::move(plateau);
  j["expansions"] = res.expansions;
  Json trace = Json::array();
  for (const auto& t : res.trace) trace.push_back({{"graph_key", t.graph_key}, {"bic", t.bic}});
  j["trace"] = std::move(trace);
  j["fits"] = res.fits;
  j["failed_fits"] = res.failed_fits;
  return j;
}

/// One entry per vertex: parents, cardinality, and one distribution row per
/// parent configuration (first parent varying fastest).
inline Json cpt_json(const LatentDagModel& m) {
  Json vars = Json::array();
  for (int v = 0; v < m.dag.size(); ++v) {
    Json e;
    e["vertex"] = m.dag.name(v);
    e["observed"] = m.observed.contains(v);
    e["cardinality"] = m.cards[v];
    e["parents"] = detail::names_of(m.dag, m.dag.parents(v));
    Json rows = Json::array();
    const auto card = static_cast<std::size_t>(m.cards[v]);
    for (std::size_t r = 0; r < m.rows(v); ++r) {
      Json row = Json::array();
      for (std::size_t k = 0; k < card; ++k) row.push_back(m.cpts[v][r * card + k]);
      rows.push_back(std::move(row));
    }
    e["rows"] = std::move(rows);
    vars.push_back(std::move(e));
  }
  return vars;
}

inline Json to_json(const CensusSummary& s) {
  Json j;
  j["n"] = s.n;
  j["dags"] = s.dags;
  j["admgs"] = s.admgs;
  j["ci_classes"] = s.ci_classes;
  j["ci_classes_dag"] = s.ci_classes_dag;
  j["ci_classes_mixed"] = s.ci_classes_mixed;
  j["discrepant"] = s.discrepant;
  j["conjectured_classes"] = s.conjectured_classes;
  Json per = Json::object();
  for (const auto& [tag, count] : s.per_type) per[tag] = count;
  j["per_type"] = std::move(per);
  j["checked"] = s.checked;
  j["mismatches"] = s.mismatches;
  return j;
}

}  // namespace nmm::io
