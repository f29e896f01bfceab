// Command-line driver: parses and validates an IR program, runs the selected
// analysis (derivative propagation, taint, binary ablation), the perturbation
// oracle, the comparison pipeline, or the guided-fuzzing harness, and writes
// CSV/JSON reports. Exit codes: 0 ok, 1 usage, 2 parse error, 3 validation
// failure, 4 trapped/refused execution, 5 label exhaustion.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pga/engine.hpp"
#include "pga/fuzz.hpp"
#include "pga/ir.hpp"
#include "pga/oracle.hpp"
#include "pga/report.hpp"
#include "pga/taint.hpp"
#include "pga/vm.hpp"

namespace {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kParseError = 2,
  kValidationFailed = 3,
  kTrapped = 4,
  kLabelExhausted = 5,
};

std::optional<std::string> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f.good()) return std::nullopt;
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

bool write_output(const std::string& out_path, const std::string& data) {
  if (out_path.empty()) {
    std::fwrite(data.data(), 1, data.size(), stdout);
    return true;
  }
  std::ofstream f(out_path, std::ios::binary);
  if (!f.good()) return false;
  f.write(data.data(), static_cast<std::streamsize>(data.size()));
  return f.good();
}

// "0,3,5..7" -> {0,3,5,6,7}
std::optional<std::vector<uint32_t>> parse_sources(const std::string& spec) {
  std::vector<uint32_t> out;
  std::stringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, ',')) {
    size_t dots = part.find("..");
    try {
      if (dots == std::string::npos) {
        out.push_back(static_cast<uint32_t>(std::stoul(part)));
      } else {
        uint32_t a = static_cast<uint32_t>(std::stoul(part.substr(0, dots)));
        uint32_t b = static_cast<uint32_t>(std::stoul(part.substr(dots + 2)));
        if (b < a) return std::nullopt;
        for (uint32_t i = a; i <= b; ++i) out.push_back(i);
      }
    } catch (...) {
      return std::nullopt;
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

struct LoadedProgram {
  pga::Program program;
  std::vector<uint8_t> input;
};

// Shared front half of every command: parse, validate, load input bytes.
std::optional<LoadedProgram> load(const std::string& program_path,
                                  const std::string& input_path, int& exit_code) {
  auto text = read_file(program_path);
  if (!text) {
    std::cerr << "error: cannot read program file '" << program_path << "'\n";
    exit_code = kUsage;
    return std::nullopt;
  }
  LoadedProgram lp;
  try {
    lp.program = pga::parse_program(*text);
  } catch (const pga::ParseError& e) {
    std::cerr << program_path << ":" << e.what() << "\n";
    exit_code = kParseError;
    return std::nullopt;
  }
  auto diags = pga::validate(lp.program);
  if (!diags.empty()) {
    for (const auto& d : diags) std::cerr << program_path << ": " << d.to_string() << "\n";
    exit_code = kValidationFailed;
    return std::nullopt;
  }
  if (!input_path.empty()) {
    auto bytes = read_file(input_path);
    if (!bytes) {
      std::cerr << "error: cannot read input file '" << input_path << "'\n";
      exit_code = kUsage;
      return std::nullopt;
    }
    lp.input.assign(bytes->begin(), bytes->end());
    if (lp.input.size() < lp.program.input_len) {
      std::cerr << "error: input is " << lp.input.size() << " bytes, program declares "
                << lp.program.input_len << "\n";
      exit_code = kUsage;
      return std::nullopt;
    }
  }
  return lp;
}

struct CommonFlags {
  std::string program_path;
  std::string input_path;
  std::string out_path;
  std::string format = "json";
  std::string sources_spec;
  int samples = 5;
  bool verify = false;
  uint64_t seed = 0;
};

pga::Json base_config(const CommonFlags& f) {
  pga::Json c;
  c["program"] = f.program_path;
  c["input"] = f.input_path;
  c["samples"] = f.samples;
  c["sampling"] = f.verify ? "verify" : "fast";
  c["step_budget"] = pga::kDefaultStepBudget;
  c["format"] = f.format;
  return c;
}

int cmd_analyze(const CommonFlags& f, const std::string& mode) {
  int ec = kOk;
  auto lp = load(f.program_path, f.input_path, ec);
  if (!lp) return ec;

  pga::SourceSpec sources = pga::SourceSpec::all(lp->program);
  if (!f.sources_spec.empty()) {
    auto s = parse_sources(f.sources_spec);
    if (!s) {
      std::cerr << "error: bad --sources spec\n";
      return kUsage;
    }
    sources.bytes = *s;
    for (uint32_t b : sources.bytes)
      if (b >= lp->program.input_len) {
        std::cerr << "error: source byte " << b << " out of range\n";
        return kUsage;
      }
  }

  pga::Json config = base_config(f);
  config["mode"] = mode;
  pga::Json sj = pga::Json::array();
  for (uint32_t b : sources.bytes) sj.push_back(b);
  config["sources"] = std::move(sj);

  std::string payload;
  bool trapped = false;
  bool exhausted = false;
  if (mode == "dta") {
    auto res = pga::run_dta(lp->program, lp->input, sources);
    trapped = res.exec.termination.kind == pga::TermKind::trap;
    exhausted = res.report.any_exhausted();
    payload = f.format == "csv"
                  ? pga::taint_csv(res.report)
                  : pga::dump_json(pga::taint_json(res.report, res.exec, config));
  } else {
    pga::PgaOptions opt;
    opt.samples = f.samples;
    opt.verify = f.verify;
    opt.binarize = mode == "binary";
    auto res = pga::run_pga(lp->program, lp->input, sources, opt);
    trapped = res.exec.termination.kind == pga::TermKind::trap;
    exhausted = res.stats.any_exhausted();
    payload = f.format == "csv"
                  ? pga::jacobian_csv(res.jacobian)
                  : pga::dump_json(pga::jacobian_json(res.jacobian, res.stats, res.exec,
                                                      config));
  }
  if (!write_output(f.out_path, payload)) {
    std::cerr << "error: cannot write '" << f.out_path << "'\n";
    return kUsage;
  }
  if (trapped) return kTrapped;
  if (exhausted) return kLabelExhausted;
  return kOk;
}

int cmd_oracle(const CommonFlags& f, bool exhaustive) {
  int ec = kOk;
  auto lp = load(f.program_path, f.input_path, ec);
  if (!lp) return ec;
  if (exhaustive && lp->program.input_len > 8) {
    std::cerr << "error: --exhaustive supports inputs of at most 8 bytes\n";
    return kUsage;
  }
  pga::Json config = base_config(f);
  config["exhaustive"] = exhaustive;
  try {
    pga::GroundTruth gt = pga::ground_truth(lp->program, lp->input,
                                            pga::kDefaultStepBudget, exhaustive);
    std::string payload = f.format == "csv"
                              ? pga::ground_truth_csv(gt)
                              : pga::dump_json(pga::ground_truth_json(gt, config));
    if (!write_output(f.out_path, payload)) {
      std::cerr << "error: cannot write '" << f.out_path << "'\n";
      return kUsage;
    }
    return kOk;
  } catch (const pga::OracleRefusal& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kTrapped;
  }
}

int cmd_compare(const CommonFlags& f, bool exhaustive) {
  int ec = kOk;
  auto lp = load(f.program_path, f.input_path, ec);
  if (!lp) return ec;
  if (exhaustive && lp->program.input_len > 8) {
    std::cerr << "error: --exhaustive supports inputs of at most 8 bytes\n";
    return kUsage;
  }

  pga::ComparisonReport rep;
  try {
    rep.truth = pga::ground_truth(lp->program, lp->input, pga::kDefaultStepBudget,
                                  exhaustive);
  } catch (const pga::OracleRefusal& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kTrapped;
  }

  pga::SourceSpec sources = pga::SourceSpec::all(lp->program);
  pga::PgaOptions opt;
  opt.samples = f.samples;
  opt.verify = f.verify;
  auto pga_res = pga::run_pga(lp->program, lp->input, sources, opt);
  auto dta_res = pga::run_dta(lp->program, lp->input, sources);
  auto bin_res = pga::run_binary_pga(lp->program, lp->input, sources, opt);

  size_t cells = rep.truth.cells.size();
  rep.pga_cells.assign(cells, 0);
  rep.dta_cells.assign(cells, 0);
  rep.binary_cells.assign(cells, 0);
  for (size_t i = 0; i < cells; ++i) {
    rep.pga_cells[i] = pga_res.jacobian.cells[i].value != 0.0;
    rep.dta_cells[i] = dta_res.report.cells[i];
    rep.binary_cells[i] = bin_res.jacobian.cells[i].value != 0.0;
  }
  rep.pga = pga::score(rep.pga_cells, rep.truth);
  rep.dta = pga::score(rep.dta_cells, rep.truth);
  rep.binary = pga::score(rep.binary_cells, rep.truth);
  rep.pga_jacobian = std::move(pga_res.jacobian);

  pga::Json config = base_config(f);
  config["exhaustive"] = exhaustive;
  std::string payload = f.format == "csv"
                            ? pga::metrics_csv(rep)
                            : pga::dump_json(pga::comparison_json(rep, config));
  if (!write_output(f.out_path, payload)) {
    std::cerr << "error: cannot write '" << f.out_path << "'\n";
    return kUsage;
  }
  return kOk;
}

std::string suffixed_path(const std::string& path, const std::string& tag) {
  size_t dot = path.rfind('.');
  size_t slash = path.rfind('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
    return path + "." + tag;
  return path.substr(0, dot) + "." + tag + path.substr(dot);
}

int cmd_fuzz(const CommonFlags& f, const std::string& mode, bool both,
             uint32_t byte_budget, uint64_t mutations, uint64_t checkpoint) {
  int ec = kOk;
  auto lp = load(f.program_path, f.input_path, ec);
  if (!lp) return ec;

  pga::FuzzOptions opt;
  opt.byte_budget = byte_budget;
  opt.mutation_budget = mutations;
  opt.checkpoint_interval = checkpoint;
  opt.rng_seed = f.seed;
  opt.samples = f.samples;

  std::vector<pga::Guidance> modes;
  if (both) {
    modes = {pga::Guidance::pga, pga::Guidance::dta};
  } else {
    modes = {mode == "dta" ? pga::Guidance::dta : pga::Guidance::pga};
  }

  for (pga::Guidance g : modes) {
    pga::CoverageTimeline tl;
    try {
      tl = pga::guided_fuzz(lp->program, lp->input, g, opt);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kTrapped;
    }
    pga::Json config = base_config(f);
    config["guidance"] = std::string(pga::guidance_name(g));
    config["byte_budget"] = byte_budget;
    config["mutations"] = mutations;
    config["checkpoint"] = checkpoint;
    config["seed"] = f.seed;
    std::string payload = f.format == "csv"
                              ? pga::timeline_csv(tl)
                              : pga::dump_json(pga::timeline_json(tl, lp->program, config));
    std::string out = f.out_path;
    if (both && !out.empty()) out = suffixed_path(out, std::string(pga::guidance_name(g)));
    if (!write_output(out, payload)) {
      std::cerr << "error: cannot write '" << out << "'\n";
      return kUsage;
    }
    if (both)
      std::cout << pga::guidance_name(g) << " final edges: " << tl.final_edge_count()
                << " after " << tl.mutations_executed << " mutations\n";
  }
  return kOk;
}

int cmd_report(const std::string& artifact_path, const std::string& out_path,
               const std::string& format) {
  auto text = read_file(artifact_path);
  if (!text) {
    std::cerr << "error: cannot read '" << artifact_path << "'\n";
    return kUsage;
  }
  pga::Json j = pga::Json::parse(*text, nullptr, false);
  if (j.is_discarded() || !j.contains("kind") || !j.contains("schema_version")) {
    std::cerr << "error: not a report artifact\n";
    return kUsage;
  }
  std::string kind = j["kind"];
  std::ostringstream sum;
  std::string csv;

  if (kind == "jacobian" || kind == "taint" || kind == "ground_truth") {
    auto& sinks = j["sinks"];
    auto& sources = j["sources"];
    auto& rows = j["cells"];
    size_t nonzero = 0;
    csv = "source";
    for (const auto& s : sinks) csv += "," + s.get<std::string>();
    csv += "\n";
    for (size_t r = 0; r < rows.size(); ++r) {
      csv += std::to_string(sources[r].get<uint64_t>());
      for (const auto& cell : rows[r]) {
        if (cell.is_boolean()) {
          bool v = cell.get<bool>();
          nonzero += v;
          csv += v ? ",1" : ",0";
        } else {
          double v = cell.get<double>();
          nonzero += v != 0.0;
          csv += "," + pga::format_double(v);
        }
      }
      csv += "\n";
    }
    sum << kind << ": " << sources.size() << " sources x " << sinks.size()
        << " sinks, " << nonzero << " flowing cells\n";
  } else if (kind == "comparison") {
    csv = "analysis,precision,recall,f1,tp,fp,fn,tn,excluded\n";
    for (const char* name : {"pga", "dta", "binary"}) {
      auto& m = j["metrics"][name];
      sum << name << ": f1=" << pga::format_double(m["f1"].get<double>())
          << " precision=" << pga::format_double(m["precision"].get<double>())
          << " recall=" << pga::format_double(m["recall"].get<double>()) << "\n";
      csv += std::string(name) + "," + pga::format_double(m["precision"].get<double>()) +
             "," + pga::format_double(m["recall"].get<double>()) + "," +
             pga::format_double(m["f1"].get<double>()) + "," +
             std::to_string(m["tp"].get<uint64_t>()) + "," +
             std::to_string(m["fp"].get<uint64_t>()) + "," +
             std::to_string(m["fn"].get<uint64_t>()) + "," +
             std::to_string(m["tn"].get<uint64_t>()) + "," +
             std::to_string(m["excluded_cells"].get<uint64_t>()) + "\n";
    }
    sum << "disagreements: " << j["disagreements"].size() << "\n";
  } else if (kind == "coverage_timeline") {
    csv = "mutations,edges\n";
    for (const auto& cp : j["checkpoints"])
      csv += std::to_string(cp[0].get<uint64_t>()) + "," +
             std::to_string(cp[1].get<uint64_t>()) + "\n";
    sum << "coverage_timeline (" << j["guidance"].get<std::string>()
        << "): " << j["final_edges"].size() << " edges after "
        << j["mutations_executed"].get<uint64_t>() << " mutations, "
        << j["traps"].size() << " traps\n";
  } else {
    std::cerr << "error: unknown artifact kind '" << kind << "'\n";
    return kUsage;
  }

  std::string payload = format == "csv" ? csv : sum.str();
  if (!write_output(out_path, payload)) {
    std::cerr << "error: cannot write '" << out_path << "'\n";
    return kUsage;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dataflow analysis over a register-machine IR: derivative "
               "propagation, taint tracking, a perturbation oracle, and "
               "dataflow-guided fuzzing"};
  app.require_subcommand(1);

  CommonFlags f;
  std::string mode = "pga";
  bool fast_flag = false;
  bool exhaustive = false;
  bool both = false;
  uint32_t byte_budget = 128;
  uint64_t mutations = 100000;
  uint64_t checkpoint = 10000;
  std::string artifact_path;

  auto add_common = [&](CLI::App* cmd, bool needs_input) {
    cmd->add_option("--program", f.program_path, "IR program file")->required();
    if (needs_input)
      cmd->add_option("--input", f.input_path, "raw input bytes file")->required();
    cmd->add_option("--out", f.out_path, "output path (default: stdout)");
    cmd->add_option("--format", f.format, "json|csv")
        ->check(CLI::IsMember({"json", "csv"}));
    cmd->add_option("--samples", f.samples, "sampling budget per operation")
        ->check(CLI::PositiveNumber);
    auto* fastopt = cmd->add_flag("--fast", fast_flag, "first-changing-sample mode (default)");
    cmd->add_flag("--verify", f.verify, "full argmin sampling, log fast/full divergences")
        ->excludes(fastopt);
  };

  auto* analyze = app.add_subcommand("analyze", "run one analysis and write its matrix");
  add_common(analyze, true);
  analyze->add_option("--mode", mode, "pga|dta|binary")
      ->check(CLI::IsMember({"pga", "dta", "binary"}));
  analyze->add_option("--sources", f.sources_spec, "byte indices, e.g. 0,2,4..7");

  auto* compare = app.add_subcommand("compare",
                                     "score pga/dta/binary against the perturbation oracle");
  add_common(compare, true);
  compare->add_flag("--exhaustive", exhaustive, "all 256 values per byte (inputs <= 8 bytes)");

  auto* oracle = app.add_subcommand("oracle", "run the perturbation ground-truth oracle");
  add_common(oracle, true);
  oracle->add_flag("--exhaustive", exhaustive, "all 256 values per byte (inputs <= 8 bytes)");

  auto* fuzz = app.add_subcommand("fuzz", "deterministic dataflow-guided mutation sweep");
  add_common(fuzz, true);
  fuzz->add_option("--mode", mode, "pga|dta")->check(CLI::IsMember({"pga", "dta"}));
  fuzz->add_flag("--both", both, "run both guidance modes and print final edge counts");
  fuzz->add_option("--byte-budget", byte_budget, "bytes to select")
      ->check(CLI::PositiveNumber);
  fuzz->add_option("--mutations", mutations, "mutation budget")
      ->check(CLI::PositiveNumber);
  fuzz->add_option("--checkpoint", checkpoint, "checkpoint interval")
      ->check(CLI::PositiveNumber);
  fuzz->add_option("--seed", f.seed, "rng seed for dta byte selection");

  auto* report = app.add_subcommand("report", "summarize or convert a JSON artifact");
  report->add_option("artifact", artifact_path, "artifact JSON file")->required();
  report->add_option("--out", f.out_path, "output path (default: stdout)");
  report->add_option("--format", f.format, "json|csv")
      ->check(CLI::IsMember({"json", "csv"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(analyze)) return cmd_analyze(f, mode);
    if (app.got_subcommand(compare)) return cmd_compare(f, exhaustive);
    if (app.got_subcommand(oracle)) return cmd_oracle(f, exhaustive);
    if (app.got_subcommand(fuzz))
      return cmd_fuzz(f, mode, both, byte_budget, mutations, checkpoint);
    if (app.got_subcommand(report)) return cmd_report(artifact_path, f.out_path, f.format);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
