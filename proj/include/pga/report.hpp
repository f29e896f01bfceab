#pragma once

// Report serialization: CSV and versioned JSON forms of the analysis
// artifacts. Every JSON artifact carries schema_version, its kind, and the
// full effective configuration, so outputs are self-describing and
// byte-stable across identical runs.

#include <string>
#include <vector>

#include <json.hpp>

#include "pga/engine.hpp"
#include "pga/fuzz.hpp"
#include "pga/ir.hpp"
#include "pga/oracle.hpp"
#include "pga/taint.hpp"

namespace pga {

inline constexpr int kSchemaVersion = 1;
inline constexpr std::string_view kToolVersion = "0.1.0";

using Json = nlohmann::json;

inline std::string format_double(double v) { return detail::format_f64(v); }

namespace detail {

inline Json artifact_header(std::string_view kind, Json config) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = std::string(kind);
  config["tool_version"] = std::string(kToolVersion);
  j["config"] = std::move(config);
  return j;
}

inline Json sink_ids(const std::vector<SinkSite>& sinks) {
  Json a = Json::array();
  for (const auto& s : sinks) a.push_back(s.id);
  return a;
}

}  // namespace detail

// --- Jacobian ---------------------------------------------------------------

inline std::string jacobian_csv(const Jacobian& jac) {
  std::string out = "source";
  for (const auto& s : jac.sinks) out += "," + s.id;
  out += "\n";
  for (size_t row = 0; row < jac.sources.size(); ++row) {
    out += std::to_string(jac.sources[row]);
    for (size_t col = 0; col < jac.sinks.size(); ++col)
      out += "," + format_double(jac.at(row, col).value);
    out += "\n";
  }
  return out;
}

inline Json stats_json(const AnalysisStats& stats) {
  Json per = Json::array();
  for (const auto& s : stats.per_source) {
    Json e;
    e["source"] = s.source;
    e["labels_allocated"] = s.labels_allocated;
    e["exhausted"] = s.exhausted;
    if (s.exhausted) e["exhaustion_site"] = s.exhaustion_site;
    e["degenerate_events"] = s.degenerate_events;
    e["fast_full_divergences"] = s.divergences;
    per.push_back(std::move(e));
  }
  Json j;
  j["per_source"] = std::move(per);
  Json dl = Json::array();
  for (const auto& d : stats.divergence_log) {
    Json e;
    e["source"] = d.source;
    e["site"] = d.site;
    e["fast"] = d.fast;
    e["full"] = d.full;
    e["direction"] = d.positive_direction ? "pos" : "neg";
    dl.push_back(std::move(e));
  }
  j["divergence_log"] = std::move(dl);
  return j;
}

inline Json exec_json(const ExecResult& exec) {
  Json e;
  e["termination"] = exec.termination.kind == TermKind::ret ? "ret"
                     : exec.termination.kind == TermKind::trap
                         ? "trap(" + std::string(trap_name(exec.termination.trap)) + ")"
                         : "budget-exhausted";
  e["steps"] = exec.steps;
  e["blocks_entered"] = exec.trace.size();
  e["edges_covered"] = exec.coverage.size();
  e["sink_observations"] = exec.sink_values.size();
  return e;
}

inline Json jacobian_json(const Jacobian& jac, const AnalysisStats& stats,
                          const ExecResult& exec, Json config) {
  Json j = detail::artifact_header("jacobian", std::move(config));
  Json srcs = Json::array();
  for (uint32_t s : jac.sources) srcs.push_back(s);
  j["sources"] = std::move(srcs);
  j["sinks"] = detail::sink_ids(jac.sinks);
  Json rows = Json::array();
  Json prov = Json::array();
  for (size_t row = 0; row < jac.sources.size(); ++row) {
    Json r = Json::array();
    for (size_t col = 0; col < jac.sinks.size(); ++col) {
      const JacobianCell& c = jac.at(row, col);
      r.push_back(c.value);
      if (c.value != 0.0) {
        Json pe;
        pe["source"] = jac.sources[row];
        pe["sink"] = jac.sinks[col].id;
        pe["direction"] = c.direction > 0 ? "pos" : "neg";
        pe["occurrence"] = c.occurrence;
        prov.push_back(std::move(pe));
      }
    }
    rows.push_back(std::move(r));
  }
  j["cells"] = std::move(rows);
  j["provenance"] = std::move(prov);
  j["stats"] = stats_json(stats);
  j["execution"] = exec_json(exec);
  j["termination"] = j["execution"]["termination"];
  return j;
}

// --- Taint report -----------------------------------------------------------

inline std::string taint_csv(const TaintReport& rep) {
  std::string out = "source";
  for (const auto& s : rep.sinks) out += "," + s.id;
  out += "\n";
  for (size_t row = 0; row < rep.sources.size(); ++row) {
    out += std::to_string(rep.sources[row]);
    for (size_t col = 0; col < rep.sinks.size(); ++col)
      out += rep.at(row, col) ? ",1" : ",0";
    out += "\n";
  }
  return out;
}

inline Json taint_json(const TaintReport& rep, const ExecResult& exec, Json config) {
  Json j = detail::artifact_header("taint", std::move(config));
  Json srcs = Json::array();
  for (uint32_t s : rep.sources) srcs.push_back(s);
  j["sources"] = std::move(srcs);
  j["sinks"] = detail::sink_ids(rep.sinks);
  Json rows = Json::array();
  for (size_t row = 0; row < rep.sources.size(); ++row) {
    Json r = Json::array();
    for (size_t col = 0; col < rep.sinks.size(); ++col)
      r.push_back(rep.at(row, col) != 0);
    rows.push_back(std::move(r));
  }
  j["cells"] = std::move(rows);
  Json per = Json::array();
  for (const auto& s : rep.per_source) {
    Json e;
    e["source"] = s.source;
    e["labels_allocated"] = s.labels_allocated;
    e["exhausted"] = s.exhausted;
    if (s.exhausted) e["exhaustion_site"] = s.exhaustion_site;
    per.push_back(std::move(e));
  }
  j["stats"]["per_source"] = std::move(per);
  j["execution"] = exec_json(exec);
  j["termination"] = j["execution"]["termination"];
  return j;
}

// --- Ground truth -----------------------------------------------------------

inline std::string ground_truth_csv(const GroundTruth& gt) {
  std::string out = "source";
  for (const auto& s : gt.sinks) out += "," + s.id;
  out += "\n";
  for (size_t row = 0; row < gt.sources.size(); ++row) {
    out += std::to_string(gt.sources[row]);
    for (size_t col = 0; col < gt.sinks.size(); ++col)
      out += gt.at(row, col) ? ",1" : ",0";
    out += "\n";
  }
  return out;
}

inline Json ground_truth_json(const GroundTruth& gt, Json config) {
  Json j = detail::artifact_header("ground_truth", std::move(config));
  Json srcs = Json::array();
  for (uint32_t s : gt.sources) srcs.push_back(s);
  j["sources"] = std::move(srcs);
  j["sinks"] = detail::sink_ids(gt.sinks);
  j["exhaustive"] = gt.exhaustive;
  Json rows = Json::array();
  for (size_t row = 0; row < gt.sources.size(); ++row) {
    Json r = Json::array();
    for (size_t col = 0; col < gt.sinks.size(); ++col) r.push_back(gt.at(row, col) != 0);
    rows.push_back(std::move(r));
  }
  j["cells"] = std::move(rows);
  Json acct = Json::array();
  for (size_t row = 0; row < gt.sources.size(); ++row) {
    Json e;
    e["source"] = gt.sources[row];
    e["samples_run"] = gt.samples_run[row];
    e["samples_excluded"] = gt.samples_excluded[row];
    acct.push_back(std::move(e));
  }
  j["sample_accounting"] = std::move(acct);
  return j;
}

// --- Metrics / comparison ---------------------------------------------------

inline Json metrics_json(const Metrics& m) {
  Json j;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  j["tp"] = m.tp;
  j["fp"] = m.fp;
  j["fn"] = m.fn;
  j["tn"] = m.tn;
  j["excluded_cells"] = m.excluded_cells;
  return j;
}

struct ComparisonReport {
  GroundTruth truth;
  Jacobian pga_jacobian;
  Metrics pga, dta, binary;
  std::vector<uint8_t> pga_cells, dta_cells, binary_cells;  // predictions
};

inline Json comparison_json(const ComparisonReport& rep, Json config) {
  Json j = detail::artifact_header("comparison", std::move(config));
  j["metrics"]["pga"] = metrics_json(rep.pga);
  j["metrics"]["dta"] = metrics_json(rep.dta);
  j["metrics"]["binary"] = metrics_json(rep.binary);
  Json dis = Json::array();
  size_t cols = rep.truth.sinks.size();
  for (size_t row = 0; row < rep.truth.sources.size(); ++row) {
    if (rep.truth.counted(row) == 0) continue;
    for (size_t col = 0; col < cols; ++col) {
      bool truth = rep.truth.at(row, col) != 0;
      bool pga = rep.pga_cells[row * cols + col] != 0;
      bool dta = rep.dta_cells[row * cols + col] != 0;
      bool binary = rep.binary_cells[row * cols + col] != 0;
      if (pga == truth && dta == truth && binary == truth) continue;
      Json e;
      e["source"] = rep.truth.sources[row];
      e["sink"] = rep.truth.sinks[col].id;
      e["truth"] = truth;
      e["pga"] = pga;
      e["dta"] = dta;
      e["binary"] = binary;
      e["pga_cell"] = rep.pga_jacobian.at(row, col).value;
      dis.push_back(std::move(e));
    }
  }
  j["disagreements"] = std::move(dis);
  return j;
}

inline std::string metrics_csv(const ComparisonReport& rep) {
  std::string out = "analysis,precision,recall,f1,tp,fp,fn,tn,excluded\n";
  auto line = [&](std::string_view name, const Metrics& m) {
    out += std::string(name) + "," + format_double(m.precision) + "," +
           format_double(m.recall) + "," + format_double(m.f1) + "," +
           std::to_string(m.tp) + "," + std::to_string(m.fp) + "," +
           std::to_string(m.fn) + "," + std::to_string(m.tn) + "," +
           std::to_string(m.excluded_cells) + "\n";
  };
  line("pga", rep.pga);
  line("dta", rep.dta);
  line("binary", rep.binary);
  return out;
}

// --- Coverage timeline ------------------------------------------------------

inline std::string timeline_csv(const CoverageTimeline& tl) {
  std::string out = "mutations,edges\n";
  for (const auto& [m, e] : tl.checkpoints)
    out += std::to_string(m) + "," + std::to_string(e) + "\n";
  return out;
}

inline Json timeline_json(const CoverageTimeline& tl, const Program& p, Json config) {
  Json j = detail::artifact_header("coverage_timeline", std::move(config));
  j["guidance"] = std::string(guidance_name(tl.guidance));
  j["rng_seed"] = tl.rng_seed;
  Json sel = Json::array();
  for (uint32_t b : tl.selected_bytes) sel.push_back(b);
  j["selected_bytes"] = std::move(sel);
  Json cps = Json::array();
  for (const auto& [m, e] : tl.checkpoints) cps.push_back(Json::array({m, e}));
  j["checkpoints"] = std::move(cps);
  Json edges = Json::array();
  for (const auto& [edge, first] : tl.first_seen) {
    Json e;
    e["from"] = p.blocks[edge.first].name;
    e["to"] = p.blocks[edge.second].name;
    e["first_seen"] = first;
    edges.push_back(std::move(e));
  }
  j["final_edges"] = std::move(edges);
  Json traps = Json::array();
  for (const auto& t : tl.traps) {
    Json e;
    e["mutation"] = t.mutation;
    e["byte"] = t.byte;
    e["value"] = t.value;
    e["trap"] = std::string(trap_name(t.kind));
    traps.push_back(std::move(e));
  }
  j["traps"] = std::move(traps);
  j["mutations_executed"] = tl.mutations_executed;
  return j;
}

inline std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace pga
