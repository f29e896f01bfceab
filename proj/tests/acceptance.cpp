// Acceptance suite: one checked criterion per section, one PASS/FAIL line
// each. Exits nonzero if any criterion fails. Uses the shipped corpus and
// drives the CLI binary for the end-to-end determinism checks.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pga/engine.hpp"
#include "pga/fuzz.hpp"
#include "pga/ir.hpp"
#include "pga/oracle.hpp"
#include "pga/prox.hpp"
#include "pga/report.hpp"
#include "pga/taint.hpp"
#include "pga/vm.hpp"

using namespace pga;

namespace {

struct CheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define EXPECT(cond, msg)                                         \
  do {                                                            \
    if (!(cond)) throw CheckFailure(std::string("expected ") + #cond + ": " + (msg)); \
  } while (0)

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f.good()) throw CheckFailure("cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Program load_program(const std::string& name) {
  Program p = parse_program(read_file(std::string(PGA_CORPUS_DIR) + "/" + name));
  if (!validate(p).empty()) throw CheckFailure("corpus program fails validation: " + name);
  return p;
}

std::vector<uint8_t> load_input(const std::string& name) {
  std::string s = read_file(std::string(PGA_CORPUS_DIR) + "/inputs/" + name);
  return std::vector<uint8_t>(s.begin(), s.end());
}

struct CorpusEntry {
  std::string name;
  Program program;
  std::vector<uint8_t> seed;
};

std::vector<CorpusEntry> load_corpus() {
  std::vector<CorpusEntry> out;
  for (const auto& e : std::filesystem::directory_iterator(PGA_CORPUS_DIR)) {
    if (e.path().extension() != ".ir") continue;
    std::string stem = e.path().stem().string();
    out.push_back({stem, load_program(stem + ".ir"), load_input(stem + ".bin")});
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.name < b.name; });
  return out;
}

// --- criterion 1: exact reproduction of the mod-4 sampling example ---------

void criterion_mod4_exact() {
  SampleInput x[2] = {{0, kI32}, {4, kI32}};
  double d2[2] = {2.0, 0.0};
  double d4[2] = {4.0, 0.0};
  EXPECT(prox_derivative(Opcode::srem, kI32, x, d2, 5) == 2.0, "step-2 derivative");
  EXPECT(prox_derivative(Opcode::srem, kI32, x, d4, 5) == 0.0, "step-4 derivative");
}

// --- criterion 2: double-then-mask, derivative vs taint ---------------------

void criterion_mul_mask() {
  Program p = load_program("mul_mask.ir");
  auto seed = load_input("mul_mask.bin");
  PgaResult pr = run_pga(p, seed, SourceSpec::all(p));
  EXPECT(pr.jacobian.at(0, 0).value == 2.0, "d(x1)/dx");
  EXPECT(pr.jacobian.at(0, 1).value == 0.0, "d(x2)/dx");
  DtaResult dr = run_dta(p, seed, SourceSpec::all(p));
  EXPECT(dr.report.at(0, 0) == 1, "taint on x1");
  EXPECT(dr.report.at(0, 1) == 1, "taint on x2");
}

// --- criterion 3: production sampling equals the brute-force argmin ---------

void criterion_prox_oracle() {
  std::mt19937_64 rng(0x9E3779B97F4A7C15ull);
  const Opcode sampled[] = {
      Opcode::udiv, Opcode::sdiv,  Opcode::urem,  Opcode::srem,    Opcode::shl,
      Opcode::lshr, Opcode::ashr,  Opcode::band,  Opcode::bor,     Opcode::bxor,
      Opcode::icmp_eq, Opcode::icmp_ne, Opcode::icmp_ult, Opcode::icmp_ule,
      Opcode::icmp_slt, Opcode::icmp_sle, Opcode::icmp_ugt, Opcode::icmp_sgt,
      Opcode::zext, Opcode::sext, Opcode::trunc, Opcode::ftoi, Opcode::frem};
  const uint8_t widths[] = {8, 16, 32, 64};
  std::uniform_int_distribution<int> small(-24, 24);
  std::uniform_real_distribution<double> frac(-5.0, 5.0);
  std::uniform_real_distribution<double> fval(-300.0, 300.0);
  size_t mismatches = 0;
  const size_t total = 12000;
  for (size_t iter = 0; iter < total; ++iter) {
    Opcode op = sampled[rng() % std::size(sampled)];
    ScalarType t{TypeKind::integer, widths[rng() % 4]};
    int n = 1 + int(rng() % 8);
    std::vector<SampleInput> x;
    std::vector<double> dx;
    if (op == Opcode::frem) {
      t = kF64;
      x = {{detail::f64_to_bits(fval(rng)), kF64}, {detail::f64_to_bits(fval(rng)), kF64}};
      dx = {frac(rng), rng() % 2 ? 0.0 : frac(rng)};
    } else if (op == Opcode::ftoi) {
      x = {{detail::f64_to_bits(fval(rng)), kF64}};
      dx = {frac(rng)};
    } else if (op == Opcode::zext || op == Opcode::sext || op == Opcode::trunc) {
      ScalarType src{TypeKind::integer, widths[rng() % 4]};
      x = {{rng(), src}};
      dx = {rng() % 2 ? double(small(rng)) : frac(rng)};
    } else {
      uint64_t a = rng() >> (rng() % 40);
      uint64_t b = iter % 3 == 0 ? uint64_t(int64_t(small(rng))) : rng() >> (rng() % 50);
      x = {{a, t}, {b, t}};
      dx = {rng() % 2 ? double(small(rng)) : frac(rng),
            rng() % 5 ? 0.0 : double(small(rng))};
    }
    double p = prox_derivative(op, t, x, dx, n);
    double q = brute_force_prox(op, t, x, dx, n);
    if (p != q) ++mismatches;
  }
  EXPECT(mismatches == 0, std::to_string(mismatches) + " of " + std::to_string(total));
}

// --- criterion 4: engine derivative vs central finite difference ------------

void criterion_finite_difference() {
  std::mt19937_64 rng(0xFD5AD5ull);
  std::uniform_real_distribution<double> cdist(0.7, 2.5);
  std::uniform_real_distribution<double> adist(-3.0, 3.0);
  size_t failures = 0;
  for (int iter = 0; iter < 100; ++iter) {
    // A straight-line float program: scale the byte down, then a random
    // chain of smooth ops over already-computed registers and constants.
    struct Step {
      Opcode op;
      int lhs;  // index into the chain of computed float registers
      int rhs;  // -1 means a constant operand
      double c;
    };
    int depth = 1 + int(rng() % 6);
    int reg_muls = 0;
    std::vector<Step> steps;
    for (int i = 0; i < depth; ++i) {
      Opcode choices[] = {Opcode::fadd, Opcode::fsub, Opcode::fmul, Opcode::fdiv};
      Opcode op = choices[rng() % 4];
      int lhs = int(rng() % (steps.size() + 1));
      int rhs = -1;
      double c = (op == Opcode::fadd || op == Opcode::fsub) ? adist(rng) : cdist(rng);
      // At most two register-register combines keeps the curvature low
      // enough for the h^2 finite-difference error to stay in tolerance.
      if (op != Opcode::fdiv && reg_muls < 2 && rng() % 3 == 0) {
        rhs = int(rng() % (steps.size() + 1));
        if (op == Opcode::fmul) ++reg_muls;
      }
      steps.push_back({op, lhs, rhs, c});
    }

    std::string text =
        "block e:\n  r1 = input.i8 0\n  r2 = itof.f64 r1\n  r3 = fdiv.f64 r2, 16.0\n";
    int next = 4;
    auto regname = [](int idx) { return "r" + std::to_string(idx + 3); };  // chain[0] = r3
    for (const auto& s : steps) {
      text += "  r" + std::to_string(next) + " = " + std::string(op_info(s.op).name) +
              ".f64 " + regname(s.lhs) + ", ";
      text += s.rhs >= 0 ? regname(s.rhs) : detail::format_f64(s.c);
      text += "\n";
      ++next;
    }
    text += "  sink r" + std::to_string(next - 1) + "\n  ret\n";
    Program p = parse_program(text);
    if (!validate(p).empty()) throw CheckFailure("generated program invalid");

    // Independent evaluation of the same chain in plain doubles.
    auto eval = [&](double byte) {
      std::vector<double> vals = {byte / 16.0};
      for (const auto& s : steps) {
        double a = vals[size_t(s.lhs)];
        double b = s.rhs >= 0 ? vals[size_t(s.rhs)] : s.c;
        switch (s.op) {
          case Opcode::fadd: vals.push_back(a + b); break;
          case Opcode::fsub: vals.push_back(a - b); break;
          case Opcode::fmul: vals.push_back(a * b); break;
          default: vals.push_back(a / b); break;
        }
      }
      return vals.back();
    };

    uint8_t x0 = uint8_t(rng() % 256);
    uint8_t in[] = {x0};
    PgaResult r = run_pga(p, in, SourceSpec::all(p));
    // Smooth chains carry pos = -neg; the recorded cell is the max-magnitude
    // one, so normalize back to the +1-seeded chain for the comparison.
    double engine = r.jacobian.at(0, 0).value;
    if (r.jacobian.at(0, 0).direction == -1) engine = -engine;
    // itof reads the byte as a signed i8; differentiate around that value.
    double sv = double(as_signed(x0, 8));
    const double h = 1e-3;
    double fd = (eval(sv + h) - eval(sv - h)) / (2.0 * h);
    double tol = std::max(1e-9, 1e-6 * std::fabs(fd));
    if (std::fabs(engine - fd) > tol) ++failures;
  }
  EXPECT(failures == 0, std::to_string(failures) + " of 100 programs out of tolerance");
}

// --- criterion 5: non-interference -------------------------------------------

void criterion_non_interference() {
  auto corpus = load_corpus();
  std::mt19937_64 rng(0xACCE55ull);
  for (const auto& entry : corpus) {
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<uint8_t> in(entry.program.input_len);
      for (auto& b : in) b = uint8_t(rng());
      ExecResult plain = execute(entry.program, in);
      SourceSpec all = SourceSpec::all(entry.program);
      EXPECT(run_pga(entry.program, in, all).exec == plain,
             entry.name + ": pga perturbed execution");
      EXPECT(run_dta(entry.program, in, all).exec == plain,
             entry.name + ": dta perturbed execution");
      EXPECT(run_binary_pga(entry.program, in, all).exec == plain,
             entry.name + ": binary perturbed execution");
    }
  }
}

// --- criterion 6: accuracy ordering under exhaustive ground truth ------------

void criterion_accuracy_ordering() {
  auto corpus = load_corpus();
  double pga_sum = 0, dta_sum = 0, bin_sum = 0;
  int scored = 0;
  std::map<std::string, std::pair<double, double>> strict;  // name -> (pga, dta)
  for (const auto& entry : corpus) {
    if (entry.program.input_len > 8) continue;  // exhaustive truth domain
    GroundTruth gt = ground_truth(entry.program, entry.seed, kDefaultStepBudget,
                                  /*exhaustive=*/true);
    SourceSpec all = SourceSpec::all(entry.program);
    PgaResult pr = run_pga(entry.program, entry.seed, all);
    DtaResult dr = run_dta(entry.program, entry.seed, all);
    PgaResult br = run_binary_pga(entry.program, entry.seed, all);
    size_t n = gt.cells.size();
    std::vector<uint8_t> pc(n), dc(n), bc(n);
    for (size_t i = 0; i < n; ++i) {
      pc[i] = pr.jacobian.cells[i].value != 0.0;
      dc[i] = dr.report.cells[i];
      bc[i] = br.jacobian.cells[i].value != 0.0;
    }
    double pf = score(pc, gt).f1, df = score(dc, gt).f1, bf = score(bc, gt).f1;
    pga_sum += pf;
    dta_sum += df;
    bin_sum += bf;
    ++scored;
    strict[entry.name] = {pf, df};
    std::printf("         %-22s f1: pga=%.3f dta=%.3f binary=%.3f\n",
                entry.name.c_str(), pf, df, bf);
  }
  EXPECT(scored >= 8, "corpus coverage");
  double pga_avg = pga_sum / scored, dta_avg = dta_sum / scored, bin_avg = bin_sum / scored;
  EXPECT(pga_avg >= bin_avg, "macro-average pga >= binary");
  EXPECT(pga_avg >= dta_avg, "macro-average pga >= dta");
  for (const char* name : {"compose_mul4_mod4", "mul_mask", "bitfield"}) {
    auto it = strict.find(name);
    EXPECT(it != strict.end(), std::string("missing corpus program ") + name);
    EXPECT(it->second.first > it->second.second,
           std::string(name) + ": pga strictly above dta");
  }
}

// --- criterion 7: guided fuzzing finds the guarded edge ----------------------

void criterion_fuzzing() {
  Program p = load_program("magic_byte.ir");
  auto seed = load_input("magic_byte.bin");
  int hit = p.block_index("hit");
  EXPECT(hit >= 0, "corpus program has the guarded block");
  Edge guarded{0, uint32_t(hit)};

  auto monotone = [](const CoverageTimeline& tl) {
    for (size_t i = 1; i < tl.checkpoints.size(); ++i)
      if (tl.checkpoints[i].second < tl.checkpoints[i - 1].second) return false;
    return true;
  };

  FuzzOptions opt;
  opt.checkpoint_interval = 256;
  CoverageTimeline pga_tl = guided_fuzz(p, seed, Guidance::pga, opt);
  EXPECT(pga_tl.first_seen.count(guarded) == 1, "pga covers the guarded edge");
  uint64_t pga_at = pga_tl.first_seen.at(guarded);
  EXPECT(pga_at <= 256, "guarded edge within the first 256 mutations (at " +
                            std::to_string(pga_at) + ")");
  EXPECT(monotone(pga_tl), "pga timeline monotone");

  std::vector<uint64_t> dta_hits;
  for (uint64_t s = 0; s < 20; ++s) {
    FuzzOptions d = opt;
    d.rng_seed = s;
    CoverageTimeline tl = guided_fuzz(p, seed, Guidance::dta, d);
    EXPECT(monotone(tl), "dta timeline monotone (seed " + std::to_string(s) + ")");
    EXPECT(tl.first_seen.count(guarded) == 1, "dta covers the guarded edge eventually");
    dta_hits.push_back(tl.first_seen.at(guarded));
  }
  std::sort(dta_hits.begin(), dta_hits.end());
  uint64_t median = dta_hits[dta_hits.size() / 2];
  std::printf("         pga first hit: %llu, dta median first hit: %llu\n",
              (unsigned long long)pga_at, (unsigned long long)median);
  EXPECT(median > pga_at, "dta median strictly above the pga index");
}

// --- criterion 8: label economy and structured exhaustion --------------------

void criterion_label_economy() {
  std::string text = "block e:\n  r1 = input.i8 0\n";
  for (int i = 0; i < 1000; ++i) text += "  r1 = add.i32 r1, 1\n";
  text += "  sink r1\n  ret\n";
  Program chain = parse_program(text);
  EXPECT(validate(chain).empty(), "chain program valid");
  uint8_t in[] = {1};
  PgaResult r = run_pga(chain, in, SourceSpec::all(chain));
  EXPECT(r.stats.per_source[0].labels_allocated <= 3,
         "allocated " + std::to_string(r.stats.per_source[0].labels_allocated));

  Program burst = parse_program(
      "block e:\n"
      "  r1 = input.i8 0\n"
      "  r2 = const.i32 0\n"
      "  r3 = const.i32 0\n"
      "  jmp loop\n"
      "block loop:\n"
      "  r2 = add.i32 r2, r1\n"
      "  r3 = add.i32 r3, 1\n"
      "  r4 = icmp.ult.i32 r3, 70000\n"
      "  br r4, loop, out\n"
      "block out:\n"
      "  sink r2\n"
      "  ret\n");
  EXPECT(validate(burst).empty(), "burst program valid");
  PgaOptions opt;
  opt.step_budget = 2'000'000;
  PgaResult b = run_pga(burst, in, SourceSpec::all(burst), opt);  // must not throw
  EXPECT(b.stats.per_source[0].exhausted, "exhaustion reported");
  EXPECT(!b.stats.per_source[0].exhaustion_site.empty(), "exhaustion site recorded");
  EXPECT(b.stats.per_source[0].labels_allocated == 65535, "full table");
}

// --- criterion 9: metrics formula --------------------------------------------

void criterion_metrics() {
  Metrics t2 = Metrics::from_counts(1071, 629, 1029, 0);  // p=0.63, r=0.51
  EXPECT(std::fabs(t2.precision - 0.63) < 1e-9, "precision");
  EXPECT(std::fabs(t2.recall - 0.51) < 1e-9, "recall");
  EXPECT(std::fabs(t2.f1 - 0.57) <= 0.01, "f1 within 0.01 of 0.57");
  Metrics half = Metrics::from_counts(1, 1, 0, 0);  // p=0.5, r=1.0
  EXPECT(half.f1 == 2.0 / 3.0, "exact 2/3");
}

// --- criterion 10: CLI determinism -------------------------------------------

void criterion_cli_determinism() {
  namespace fs = std::filesystem;
  fs::path tool = PGA_TOOL_PATH;
  EXPECT(fs::exists(tool), "CLI binary present");
  fs::path dir = fs::path("acceptance_out");
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::string corpus = PGA_CORPUS_DIR;

  auto run = [&](const std::string& args) {
    std::string cmd = tool.string() + " " + args + " >" + (dir / "stdout.txt").string() +
                      " 2>" + (dir / "stderr.txt").string();
    int rc = std::system(cmd.c_str());
    EXPECT(rc != -1, "system() failed");
    return WEXITSTATUS(rc);
  };
  auto twice = [&](const std::string& name, const std::string& args,
                   const std::vector<std::string>& outputs) {
    for (int round = 1; round <= 2; ++round) {
      std::string full = args;
      size_t pos;
      std::string round_s = "R" + std::to_string(round);
      while ((pos = full.find("{R}")) != std::string::npos)
        full.replace(pos, 3, round_s);
      int rc = run(full);
      EXPECT(rc == 0, name + " exit code " + std::to_string(rc));
    }
    for (const auto& out : outputs) {
      std::string a = (dir / ("R1." + out)).string();
      std::string b = (dir / ("R2." + out)).string();
      EXPECT(read_file(a) == read_file(b), name + ": " + out + " differs across runs");
    }
  };

  auto prog = [&](const std::string& n) { return corpus + "/" + n + ".ir"; };
  auto inp = [&](const std::string& n) { return corpus + "/inputs/" + n + ".bin"; };
  auto out = [&](const std::string& f) { return (dir / ("{R}." + f)).string(); };

  twice("analyze pga json",
        "analyze --program " + prog("compose_mul2_mod4") + " --input " +
            inp("compose_mul2_mod4") + " --mode pga --out " + out("jac.json"),
        {"jac.json"});
  twice("analyze pga csv",
        "analyze --program " + prog("three_source") + " --input " + inp("three_source") +
            " --mode pga --format csv --out " + out("jac.csv"),
        {"jac.csv"});
  twice("analyze dta json",
        "analyze --program " + prog("mul_mask") + " --input " + inp("mul_mask") +
            " --mode dta --out " + out("dta.json"),
        {"dta.json"});
  twice("analyze binary csv",
        "analyze --program " + prog("mul_mask") + " --input " + inp("mul_mask") +
            " --mode binary --format csv --out " + out("bin.csv"),
        {"bin.csv"});
  twice("compare exhaustive",
        "compare --program " + prog("bitfield") + " --input " + inp("bitfield") +
            " --exhaustive --out " + out("cmp.json"),
        {"cmp.json"});
  twice("oracle csv",
        "oracle --program " + prog("checksum") + " --input " + inp("checksum") +
            " --format csv --out " + out("gt.csv"),
        {"gt.csv"});
  twice("fuzz both",
        "fuzz --program " + prog("magic_byte") + " --input " + inp("magic_byte") +
            " --both --seed 7 --checkpoint 512 --out " + out("tl.json"),
        {"tl.pga.json", "tl.dta.json"});

  // report consumes an artifact produced above and must be stable too.
  int rc = run("report " + (dir / "R1.jac.json").string() + " --format csv --out " +
               (dir / "rep1.csv").string());
  EXPECT(rc == 0, "report exit code");
  rc = run("report " + (dir / "R2.jac.json").string() + " --format csv --out " +
           (dir / "rep2.csv").string());
  EXPECT(rc == 0, "report exit code");
  EXPECT(read_file((dir / "rep1.csv").string()) == read_file((dir / "rep2.csv").string()),
         "report output differs");
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<void()> fn;
  };
  const Criterion criteria[] = {
      {1, "mod-4 sampling worked example (exact)", criterion_mod4_exact},
      {2, "double-then-mask composition vs taint (exact)", criterion_mul_mask},
      {3, "sampling equals brute-force argmin on 12000 random tuples",
       criterion_prox_oracle},
      {4, "engine derivative vs central finite difference (100 programs)",
       criterion_finite_difference},
      {5, "analyses do not perturb execution (corpus x 100 inputs)",
       criterion_non_interference},
      {6, "accuracy ordering under exhaustive ground truth",
       criterion_accuracy_ordering},
      {7, "guided fuzzing reaches the guarded edge first", criterion_fuzzing},
      {8, "label reuse economy and structured exhaustion", criterion_label_economy},
      {9, "metrics formula reproduces reference points", criterion_metrics},
      {10, "CLI outputs are byte-identical across reruns", criterion_cli_determinism},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    try {
      c.fn();
      std::printf("[PASS] criterion %2d: %s\n", c.id, c.name);
    } catch (const std::exception& e) {
      ++failed;
      std::printf("[FAIL] criterion %2d: %s\n       %s\n", c.id, c.name, e.what());
    }
    std::fflush(stdout);
  }
  if (failed) std::printf("%d criterion(s) failed\n", failed);
  return failed == 0 ? 0 : 1;
}
