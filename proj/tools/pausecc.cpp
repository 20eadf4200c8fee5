// pausecc: compile circuits into Transformer weights, run and verify them.
//
// Exit codes: 0 success / pass, 1 verification failure, 2 usage error,
// 3 I/O or format error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "pausecc/compiler.hpp"
#include "pausecc/rng.hpp"
#include "pausecc/verify.hpp"
#include "pausecc/vm.hpp"

using namespace pausecc;

namespace {

constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kUsage = 2;
constexpr int kIo = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  if (path == "-") return {std::istreambuf_iterator<char>(std::cin), {}};
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw IoError("cannot write " + path);
}

circuit::Circuit load_circuit(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return circuit::parse_circuit(text);
  } catch (const circuit::CircuitError& e) {
    throw IoError(path + ": " + e.what());
  }
}

model::Model load_model(const std::string& path, bool round) {
  const std::string text = read_file(path);
  try {
    return model::parse_model(text, round);
  } catch (const model::ModelFormatError& e) {
    throw IoError(path + ": " + e.what());
  }
}

// --precision, else PAUSECC_PRECISION, else the compiler's default policy.
std::optional<int> precision_override(const std::optional<int>& flag) {
  if (flag) return flag;
  const char* env = std::getenv("PAUSECC_PRECISION");
  if (!env || !*env || std::string(env) == "default") return std::nullopt;
  try {
    std::size_t used = 0;
    const int p = std::stoi(env, &used);
    if (used != std::string(env).size()) throw std::invalid_argument(env);
    return p;
  } catch (const std::exception&) {
    throw UsageError(std::string("PAUSECC_PRECISION must be an integer or \"default\", got \"") + env + "\"");
  }
}

void check_precision(int p) {
  if (p < 1 || p > fp::kMaxPrecision)
    throw UsageError("precision must be in 1.." + std::to_string(fp::kMaxPrecision) + ", got " + std::to_string(p));
}

model::Model compile_with(const circuit::Circuit& c, const std::optional<int>& precision,
                          const compiler::CompileOptions& opts) {
  const auto p = precision_override(precision);
  if (!p) return compiler::compile(c, opts);
  check_precision(*p);
  return compiler::compile(c, fp::Precision(*p), opts);
}

void dump_encodings(const model::Model& m, std::ostream& out) {
  out << "encodings d=" << m.dim << " index_width=" << m.index_width << "\n";
  for (std::size_t t = 0; t < m.tokens.size(); ++t) {
    const auto& tok = m.tokens[t];
    out << t << " " << encoder::to_string(tok.kind) << " vertex=" << tok.vertex;
    if (tok.kind == encoder::TokenKind::Arg) out << " source=" << tok.source << " arg=" << tok.arg_index;
    out << " :";
    for (const auto& v : tok.embedding) out << " " << fp::to_string(v);
    out << "\n";
  }
}

void print_model_summary(const model::Model& m, std::ostream& out) {
  out << "family: " << circuit::to_string(m.family) << "\n";
  out << "precision: " << m.precision.bits() << "\n";
  out << "inputs: " << m.n_inputs << "\n";
  out << "tokens: " << m.tokens.size() << "\n";
  out << "pause_tokens: " << m.pause_token_count << "\n";
  out << "layers: " << m.layers.size() << "\n";
  out << "dim: " << m.dim << "\n";
}

struct Common {
  std::optional<int> precision;
  bool compat_g = false;
  bool literal_gates = false;
  std::size_t exhaustive_limit = 14;
  std::size_t samples = 4096;
  std::uint64_t seed = 0;
  std::string json_path;

  compiler::CompileOptions options() const {
    compiler::CompileOptions o;
    o.compat_g = compat_g;
    o.clear_gate_values = !literal_gates;
    return o;
  }
  verify::CoverageConfig coverage() const { return {exhaustive_limit, samples, seed}; }
};

void add_compile_flags(CLI::App* sub, Common& c) {
  sub->add_option("-p,--precision", c.precision, "fractional bits (default: PAUSECC_PRECISION or policy)");
  sub->add_flag("--compat-g", c.compat_g, "use the verbatim two-relu indicator");
  sub->add_flag("--literal-gate-values", c.literal_gates, "do not clear gate tokens between layer pairs");
}

void add_coverage_flags(CLI::App* sub, Common& c) {
  sub->add_option("--exhaustive-limit", c.exhaustive_limit, "exhaustive up to this many inputs")->capture_default_str();
  sub->add_option("--samples", c.samples, "sampled inputs beyond the limit")->capture_default_str();
  sub->add_option("--seed", c.seed, "sampling seed")->capture_default_str();
  sub->add_option("--json", c.json_path, "also write a JSON report here ('-' for stdout)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pausecc: circuits to Transformer weights with pause tokens"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "pausecc 0.1.0");

  Common common;
  std::string circuit_path, model_path, out_path, input_bits, family_name = "AC0";
  bool trace = false, encodings = false, round = false, force = false;
  std::uint32_t n = 0;

  auto* compile = app.add_subcommand("compile", "compile a circuit file into a model file");
  compile->add_option("circuit", circuit_path, "circuit file ('-' for stdin)")->required();
  compile->add_option("out", out_path, "model file ('-' for stdout)")->required();
  add_compile_flags(compile, common);
  compile->add_flag("--dump-encodings", encodings, "print every token embedding");

  auto* run = app.add_subcommand("run", "evaluate a model on one input");
  run->add_option("model", model_path, "model file")->required();
  run->add_option("-i,--input", input_bits, "input bits, x_1 first")->required();
  run->add_flag("--trace", trace, "print every layer's token table and attention weights");
  run->add_flag("--round", round, "round off-grid weights instead of rejecting them");

  auto* ver = app.add_subcommand("verify", "check a model against its circuit");
  ver->add_option("circuit", circuit_path, "circuit file")->required();
  ver->add_option("model", model_path, "model file (compiled in memory when omitted)");
  add_compile_flags(ver, common);
  add_coverage_flags(ver, common);
  ver->add_flag("--force", force, "skip the circuit hash check");
  ver->add_flag("--round", round, "round off-grid weights instead of rejecting them");

  auto* par = app.add_subcommand("parity", "write the parity circuit on n inputs");
  par->add_option("n", n, "number of inputs")->required()->check(CLI::Range(1u, 4096u));
  par->add_option("out", out_path, "circuit file (stdout when omitted)");

  circuit::RandomCircuitParams gp;
  auto* gen = app.add_subcommand("gen", "write a random circuit");
  gen->add_option("family", family_name, "AC0 or TC0")->required();
  gen->add_option("out", out_path, "circuit file (stdout when omitted)");
  gen->add_option("--seed", gp.seed, "generator seed")->capture_default_str();
  gen->add_option("-n,--inputs", gp.n_inputs, "number of inputs")->capture_default_str()->check(CLI::Range(1u, 4096u));
  gen->add_option("--depth", gp.depth, "exact depth")->capture_default_str()->check(CLI::Range(1u, 64u));
  gen->add_option("--max-fanin", gp.max_fanin, "maximum fan-in")->capture_default_str()->check(CLI::Range(1u, 4096u));
  gen->add_option("--gates", gp.size_budget, "maximum gate count")->capture_default_str()->check(CLI::Range(1u, 100000u));

  int lo = 1, hi = 16;
  auto* sweep = app.add_subcommand("sweep", "verify at every precision in a range");
  sweep->add_option("circuit", circuit_path, "circuit file")->required();
  sweep->add_option("lo", lo, "lowest precision")->required();
  sweep->add_option("hi", hi, "highest precision")->required();
  sweep->add_flag("--compat-g", common.compat_g, "use the verbatim two-relu indicator");
  sweep->add_flag("--literal-gate-values", common.literal_gates, "do not clear gate tokens between layer pairs");
  add_coverage_flags(sweep, common);

  verify::CampaignConfig cc;
  auto* camp = app.add_subcommand("campaign", "compile and verify many random circuits");
  camp->add_option("--family", family_name, "AC0 or TC0")->capture_default_str();
  camp->add_option("--n-min", cc.n_min)->capture_default_str();
  camp->add_option("--n-max", cc.n_max)->capture_default_str();
  camp->add_option("--depth-min", cc.depth_min)->capture_default_str();
  camp->add_option("--depth-max", cc.depth_max)->capture_default_str();
  camp->add_option("--max-fanin", cc.max_fanin)->capture_default_str();
  camp->add_option("--gates", cc.size_budget, "maximum gate count")->capture_default_str();
  camp->add_option("--count", cc.count)->capture_default_str();
  camp->add_option("-j,--jobs", cc.jobs, "worker threads")->capture_default_str()->check(CLI::Range(1, 1024));
  add_compile_flags(camp, common);
  add_coverage_flags(camp, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kUsage;
  }

  try {
    if (*compile) {
      const auto c = load_circuit(circuit_path);
      const auto m = compile_with(c, common.precision, common.options());
      write_file(out_path, model::serialize_model(m));
      std::ostream& info = (out_path == "-") ? std::cerr : std::cout;
      print_model_summary(m, info);
      if (encodings) dump_encodings(m, info);
      return kPass;
    }

    if (*run) {
      const auto m = load_model(model_path, round);
      circuit::Bits x;
      try {
        x = circuit::parse_bits(input_bits);
      } catch (const std::exception& e) {
        throw UsageError(std::string("--input: ") + e.what());
      }
      if (x.size() != m.n_inputs) {
        throw UsageError("model expects " + std::to_string(m.n_inputs) + " input bits, got " +
                         std::to_string(x.size()));
      }
      try {
        const auto r = vm::forward(m, x, trace);
        if (trace) std::cout << vm::dump_trace(m, *r.trace);
        std::cout << int(r.bit) << "\n";
        return kPass;
      } catch (const vm::ModelMalfunction& e) {
        if (trace) std::cout << vm::dump_trace(m, e.trace());
        std::cerr << "pausecc: model malfunction: readout value " << e.value() << "\n";
        return kFail;
      }
    }

    if (*ver) {
      const auto c = load_circuit(circuit_path);
      const auto m = model_path.empty() ? compile_with(c, common.precision, common.options())
                                        : load_model(model_path, round);
      verify::VerifyReport r;
      try {
        r = verify::check_equivalence(c, m, common.coverage(), force);
      } catch (const verify::HashMismatch& e) {
        std::cerr << "pausecc: " << e.what() << " (use --force to verify anyway)\n";
        return kIo;
      }
      std::cout << verify::to_text(r);
      if (!common.json_path.empty()) write_file(common.json_path, verify::to_json(r).dump(1) + "\n");
      return r.pass() ? kPass : kFail;
    }

    if (*par) {
      write_file(out_path, circuit::serialize_circuit(circuit::build_parity_circuit(n)));
      return kPass;
    }

    if (*gen) {
      try {
        gp.family = circuit::parse_family(family_name);
      } catch (const std::exception& e) {
        throw UsageError(e.what());
      }
      write_file(out_path, circuit::serialize_circuit(circuit::random_circuit(gp)));
      return kPass;
    }

    if (*sweep) {
      if (lo < 1 || hi > fp::kMaxPrecision || lo > hi) {
        throw UsageError("sweep range must satisfy 1 <= lo <= hi <= " + std::to_string(fp::kMaxPrecision));
      }
      const auto c = load_circuit(circuit_path);
      const auto rep = verify::precision_sweep(c, lo, hi, common.coverage(), common.options());
      std::cout << verify::to_text(rep);
      if (!common.json_path.empty()) write_file(common.json_path, verify::to_json(rep).dump(1) + "\n");
      return rep.minimal_passing ? kPass : kFail;
    }

    if (*camp) {
      try {
        cc.family = circuit::parse_family(family_name);
      } catch (const std::exception& e) {
        throw UsageError(e.what());
      }
      if (cc.n_min < 1 || cc.n_min > cc.n_max || cc.depth_min < 1 || cc.depth_min > cc.depth_max) {
        throw UsageError("need 1 <= n-min <= n-max and 1 <= depth-min <= depth-max");
      }
      cc.seed = common.seed;
      cc.coverage = common.coverage();
      cc.options = common.options();
      cc.precision = precision_override(common.precision);
      if (cc.precision) check_precision(*cc.precision);
      const auto rep = verify::campaign(cc);
      std::cout << verify::to_text(rep);
      if (!common.json_path.empty()) write_file(common.json_path, verify::to_json(rep).dump(1) + "\n");
      return rep.pass() ? kPass : kFail;
    }
  } catch (const UsageError& e) {
    std::cerr << "pausecc: " << e.what() << "\n";
    return kUsage;
  } catch (const compiler::PrecisionTooSmall& e) {
    std::cerr << "pausecc: " << e.what() << "\n";
    return kUsage;
  } catch (const IoError& e) {
    std::cerr << "pausecc: " << e.what() << "\n";
    return kIo;
  } catch (const circuit::CircuitError& e) {
    std::cerr << "pausecc: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "pausecc: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
