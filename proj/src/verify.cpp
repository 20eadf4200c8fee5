#include "pausecc/verify.hpp"

#include <sstream>

#include "pausecc/invariant.hpp"
#include "pausecc/rng.hpp"
#include "pausecc/vm.hpp"

namespace pausecc::verify {

using circuit::Bits;
using nlohmann::json;

std::vector<Bits> coverage_inputs(std::uint32_t n, const CoverageConfig& cfg, bool* exhaustive) {
  std::vector<Bits> out;
  const bool all = n <= cfg.exhaustive_limit && n < 63;
  if (exhaustive) *exhaustive = all;
  if (all) {
    out.reserve(std::size_t{1} << n);
    for (std::uint64_t v = 0; v < (std::uint64_t{1} << n); ++v) {
      Bits x(n);
      for (std::uint32_t i = 0; i < n; ++i) x[i] = (v >> i) & 1u;
      out.push_back(std::move(x));
    }
    return out;
  }
  CounterRng rng(cfg.seed);
  out.reserve(cfg.samples);
  for (std::size_t s = 0; s < cfg.samples; ++s) {
    Bits x(n);
    std::uint64_t word = 0;
    for (std::uint32_t i = 0; i < n; ++i) {
      if (i % 64 == 0) word = rng.next();
      x[i] = (word >> (i % 64)) & 1u;
    }
    out.push_back(std::move(x));
  }
  return out;
}

VerifyReport check_equivalence(const circuit::Circuit& c, const model::Model& m, const CoverageConfig& cov,
                               bool force, std::size_t max_recorded) {
  if (!force) {
    if (const auto w = model::hash_warning(m, c)) throw HashMismatch(*w);
  }
  if (m.n_inputs != c.n_inputs) {
    throw HashMismatch("model expects " + std::to_string(m.n_inputs) + " inputs, circuit has " +
                       std::to_string(c.n_inputs));
  }
  VerifyReport r;
  r.family = c.family;
  r.stats = circuit::desc_stats(c);
  r.n_inputs = c.n_inputs;
  r.precision = m.precision.bits();
  r.layers = m.layers.size();
  r.tokens = m.tokens.size();
  r.pause_token_count = m.pause_token_count;
  r.seed = cov.seed;

  const auto inputs = coverage_inputs(c.n_inputs, cov, &r.exhaustive);
  r.checked = inputs.size();
  vm::Session session(m);
  const InvariantChecker checker(c, m);
  for (const Bits& x : inputs) {
    const std::uint8_t want = circuit::evaluate(c, x);
    std::string got;
    std::optional<vm::Trace> trace;
    try {
      const std::uint8_t bit = session.forward(x).bit;
      if (bit == want) continue;
      got = std::to_string(bit);
    } catch (const vm::ModelMalfunction& e) {
      got = e.value();
      trace = e.trace();
    } catch (const vm::VmError& e) {
      got = std::string("error: ") + e.what();
    }
    ++r.mismatch_count;
    if (r.mismatches.size() >= max_recorded) continue;
    Mismatch mm;
    mm.input = x;
    mm.expected = want;
    mm.got = got;
    if (!trace) {
      try {
        trace = session.forward(x, true).trace;
      } catch (const vm::ModelMalfunction& e) {
        trace = e.trace();
      } catch (const vm::VmError&) {
      }
    }
    if (trace) {
      const auto violations = checker.check_trace(*trace, x, 1);
      if (!violations.empty()) {
        mm.divergent_layer = violations.front().layer;
        mm.detail = "token " + std::to_string(violations.front().token) + ": " + violations.front().what;
      }
    }
    r.mismatches.push_back(std::move(mm));
  }
  if (!r.pass()) {
    r.circuit_text = circuit::serialize_circuit(c);
    r.model_text = model::serialize_model(m);
  }
  return r;
}

namespace {

std::string coverage_text(bool exhaustive, std::size_t checked, std::uint64_t seed) {
  if (exhaustive) return "exhaustive " + std::to_string(checked);
  return "sampled " + std::to_string(checked) + " seed " + std::to_string(seed);
}

}  // namespace

std::string to_text(const VerifyReport& r) {
  std::ostringstream out;
  out << "verdict: " << (r.pass() ? "PASS" : "FAIL") << "\n";
  out << "family: " << circuit::to_string(r.family) << "\n";
  out << "inputs: " << r.n_inputs << "\n";
  out << "desc_length: " << r.stats.desc_length << "\n";
  out << "depth: " << r.stats.depth << "\n";
  out << "gates: " << r.stats.size << "\n";
  out << "precision: " << r.precision << "\n";
  out << "layers: " << r.layers << "\n";
  out << "tokens: " << r.tokens << "\n";
  out << "pause_tokens: " << r.pause_token_count << "\n";
  out << "coverage: " << coverage_text(r.exhaustive, r.checked, r.seed) << "\n";
  out << "passed: " << (r.checked - r.mismatch_count) << "/" << r.checked << "\n";
  out << "mismatches: " << r.mismatch_count << "\n";
  for (const Mismatch& m : r.mismatches) {
    out << "  input=" << circuit::bits_to_string(m.input) << " expected=" << int(m.expected) << " got=" << m.got;
    out << " divergent_layer=" << (m.divergent_layer ? std::to_string(*m.divergent_layer) : "none");
    if (!m.detail.empty()) out << " (" << m.detail << ")";
    out << "\n";
  }
  return out.str();
}

json to_json(const VerifyReport& r) {
  json j;
  j["verdict"] = r.pass() ? "pass" : "fail";
  j["family"] = std::string(circuit::to_string(r.family));
  j["inputs"] = r.n_inputs;
  j["desc_length"] = r.stats.desc_length;
  j["depth"] = r.stats.depth;
  j["gates"] = r.stats.size;
  j["precision"] = r.precision;
  j["layers"] = r.layers;
  j["tokens"] = r.tokens;
  j["pause_tokens"] = r.pause_token_count;
  j["coverage"] = {{"mode", r.exhaustive ? "exhaustive" : "sampled"}, {"checked", r.checked}, {"seed", r.seed}};
  j["mismatch_count"] = r.mismatch_count;
  json mm = json::array();
  for (const Mismatch& m : r.mismatches) {
    json e{{"input", circuit::bits_to_string(m.input)}, {"expected", m.expected}, {"got", m.got}};
    e["divergent_layer"] = m.divergent_layer ? json(*m.divergent_layer) : json(nullptr);
    e["detail"] = m.detail;
    mm.push_back(std::move(e));
  }
  j["mismatches"] = std::move(mm);
  if (!r.pass()) {
    j["circuit"] = r.circuit_text;
    j["model"] = json::parse(r.model_text);
  }
  return j;
}

SweepReport precision_sweep(const circuit::Circuit& c, int lo, int hi, const CoverageConfig& cov,
                            compiler::CompileOptions options) {
  if (lo < 1 || hi > fp::kMaxPrecision || lo > hi) {
    throw std::invalid_argument("sweep range must satisfy 1 <= lo <= hi <= " + std::to_string(fp::kMaxPrecision));
  }
  options.enforce_min_precision = false;
  SweepReport rep;
  for (int p = lo; p <= hi; ++p) {
    SweepEntry e;
    e.precision = p;
    const fp::Precision prec(p);
    e.mask_effective = fp::exp(fp::neg(fp::Fp::max(prec))).is_zero();
    try {
      const model::Model m = compiler::compile(c, prec, options);
      e.compiled = true;
      const VerifyReport r = check_equivalence(c, m, cov, false, 1);
      e.pass = r.pass();
      e.checked = r.checked;
      e.mismatches = r.mismatch_count;
      if (!r.mismatches.empty()) e.divergent_layer = r.mismatches.front().divergent_layer;
    } catch (const std::exception& ex) {
      e.note = ex.what();
    }
    rep.entries.push_back(std::move(e));
  }
  bool seen_pass = false;
  for (const SweepEntry& e : rep.entries) {
    if (e.pass && !rep.minimal_passing) rep.minimal_passing = e.precision;
    if (e.pass) seen_pass = true;
    if (!e.pass && seen_pass) {
      rep.monotone = false;
      rep.findings.push_back("p=" + std::to_string(e.precision) + " fails although p=" +
                             std::to_string(*rep.minimal_passing) + " passes");
    }
    if (!e.mask_effective) {
      rep.findings.push_back("p=" + std::to_string(e.precision) + ": exp(-B_p) does not round to 0");
    }
  }
  return rep;
}

std::string to_text(const SweepReport& r) {
  std::ostringstream out;
  out << "p  verdict  checked  mismatches  mask  divergent_layer\n";
  for (const SweepEntry& e : r.entries) {
    out << e.precision << (e.precision < 10 ? "  " : " ") << (e.pass ? "PASS" : "FAIL") << "     " << e.checked
        << "  " << e.mismatches << "  " << (e.mask_effective ? "ok" : "leaks") << "  "
        << (e.divergent_layer ? std::to_string(*e.divergent_layer) : "-");
    if (!e.compiled) out << "  (" << e.note << ")";
    out << "\n";
  }
  out << "minimal_passing_precision: " << (r.minimal_passing ? std::to_string(*r.minimal_passing) : "none") << "\n";
  out << "monotone: " << (r.monotone ? "yes" : "no") << "\n";
  for (const auto& f : r.findings) out << "finding: " << f << "\n";
  return out.str();
}

json to_json(const SweepReport& r) {
  json entries = json::array();
  for (const SweepEntry& e : r.entries) {
    json j{{"precision", e.precision}, {"compiled", e.compiled},          {"pass", e.pass},
           {"checked", e.checked},     {"mismatches", e.mismatches},      {"mask_effective", e.mask_effective}};
    j["divergent_layer"] = e.divergent_layer ? json(*e.divergent_layer) : json(nullptr);
    if (!e.note.empty()) j["note"] = e.note;
    entries.push_back(std::move(j));
  }
  json j{{"entries", std::move(entries)}, {"monotone", r.monotone}, {"findings", r.findings}};
  j["minimal_passing_precision"] = r.minimal_passing ? json(*r.minimal_passing) : json(nullptr);
  return j;
}

std::size_t CampaignReport::passed() const {
  std::size_t n = 0;
  for (const auto& it : items) n += it.pass ? 1 : 0;
  return n;
}

CampaignItem campaign_item(const CampaignConfig& cfg, std::size_t index) {
  CampaignItem item;
  item.index = index;
  item.seed = derive_seed(cfg.seed, index);
  CounterRng rng(item.seed);
  auto& prm = item.params;
  prm.family = cfg.family;
  prm.n_inputs = static_cast<std::uint32_t>(rng.range(cfg.n_min, cfg.n_max));
  prm.depth = static_cast<std::uint32_t>(rng.range(cfg.depth_min, cfg.depth_max));
  prm.max_fanin = cfg.max_fanin;
  prm.size_budget = static_cast<std::uint32_t>(rng.range(prm.depth, std::max(prm.depth, cfg.size_budget)));
  prm.seed = item.seed;
  try {
    const circuit::Circuit c = circuit::random_circuit(prm);
    item.stats = circuit::desc_stats(c);
    item.precision = cfg.precision ? *cfg.precision : compiler::default_precision(c);
    const model::Model m = compiler::compile(c, fp::Precision(item.precision), cfg.options);
    VerifyReport r = check_equivalence(c, m, cfg.coverage);
    item.pass = r.pass();
    item.checked = r.checked;
    item.mismatches = r.mismatch_count;
    if (!item.pass) item.failure = std::move(r);
  } catch (const std::exception& e) {
    item.error = e.what();
    item.pass = false;
  }
  return item;
}

CampaignReport campaign(const CampaignConfig& cfg) {
  if (cfg.n_min < 1 || cfg.n_min > cfg.n_max || cfg.depth_min < 1 || cfg.depth_min > cfg.depth_max) {
    throw std::invalid_argument("campaign: need 1 <= n_min <= n_max and 1 <= depth_min <= depth_max");
  }
  CampaignReport rep;
  rep.config = cfg;
  rep.items.resize(cfg.count);
  const long count = static_cast<long>(cfg.count);
  const int jobs = std::max(1, cfg.jobs);
#pragma omp parallel for schedule(dynamic, 1) num_threads(jobs) if (jobs > 1)
  for (long i = 0; i < count; ++i) rep.items[i] = campaign_item(cfg, static_cast<std::size_t>(i));
  return rep;
}

std::string to_text(const CampaignReport& r) {
  const auto& cfg = r.config;
  std::ostringstream out;
  out << "campaign family=" << circuit::to_string(cfg.family) << " n=" << cfg.n_min << ".." << cfg.n_max
      << " depth=" << cfg.depth_min << ".." << cfg.depth_max << " max_gates=" << cfg.size_budget
      << " count=" << cfg.count << " seed=" << cfg.seed << "\n";
  for (const CampaignItem& it : r.items) {
    out << "  #" << it.index << " n=" << it.params.n_inputs << " depth=" << it.stats.depth
        << " gates=" << it.stats.size << " p=" << it.precision << " " << (it.pass ? "PASS" : "FAIL") << " "
        << (it.checked - it.mismatches) << "/" << it.checked;
    if (!it.error.empty()) out << " error: " << it.error;
    out << "\n";
  }
  out << "passed: " << r.passed() << "/" << r.items.size() << "\n";
  out << "verdict: " << (r.pass() ? "PASS" : "FAIL") << "\n";
  return out.str();
}

json to_json(const CampaignReport& r) {
  const auto& cfg = r.config;
  json items = json::array();
  for (const CampaignItem& it : r.items) {
    json j{{"index", it.index},       {"seed", it.seed},
           {"n", it.params.n_inputs}, {"depth", it.stats.depth},
           {"gates", it.stats.size},  {"desc_length", it.stats.desc_length},
           {"precision", it.precision}, {"pass", it.pass},
           {"checked", it.checked},   {"mismatches", it.mismatches}};
    if (!it.error.empty()) j["error"] = it.error;
    if (it.failure) j["failure"] = to_json(*it.failure);
    items.push_back(std::move(j));
  }
  json conf{{"family", std::string(circuit::to_string(cfg.family))},
            {"n_min", cfg.n_min},
            {"n_max", cfg.n_max},
            {"depth_min", cfg.depth_min},
            {"depth_max", cfg.depth_max},
            {"max_fanin", cfg.max_fanin},
            {"max_gates", cfg.size_budget},
            {"count", cfg.count},
            {"seed", cfg.seed}};
  conf["precision"] = cfg.precision ? json(*cfg.precision) : json("default");
  return json{{"config", std::move(conf)},
              {"items", std::move(items)},
              {"passed", r.passed()},
              {"verdict", r.pass() ? "pass" : "fail"}};
}

}  // namespace pausecc::verify
