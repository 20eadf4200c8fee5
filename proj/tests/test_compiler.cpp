#include <doctest.h>

#include <functional>

#include <json.hpp>

#include "pausecc/compiler.hpp"
#include "pausecc/vm.hpp"

using namespace pausecc;
using circuit::Bits;
using circuit::parse_circuit;
using compiler::CompileOptions;
using encoder::Segments;
using fp::Fp;
using fp::Precision;
using model::FfnRole;

namespace {

Bits bits_of(std::uint64_t v, std::uint32_t n) {
  Bits x(n);
  for (std::uint32_t i = 0; i < n; ++i) x[i] = (v >> i) & 1u;
  return x;
}

bool matches_everywhere(const circuit::Circuit& c, const model::Model& m) {
  vm::Session s(m);
  for (std::uint64_t v = 0; v < (std::uint64_t{1} << c.n_inputs); ++v) {
    const Bits x = bits_of(v, c.n_inputs);
    try {
      if (s.forward(x).bit != circuit::evaluate(c, x)) return false;
    } catch (const vm::ModelMalfunction&) {
      return false;
    }
  }
  return true;
}

// A token row with the given value and flags; pair2.key is k(key2_index).
vm::Row token_row(int width, Precision p, const Fp& value, const Fp& f1, const Fp& f2, const Fp& f3,
                  std::uint64_t key2_index) {
  const Segments seg(width);
  vm::Row row(seg.dim(), Fp::zero(p));
  row[0] = value;
  row[1] = f1;
  row[2] = f2;
  row[3] = f3;
  const auto k = encoder::key_query(key2_index, width, p).key;
  for (std::size_t t = 0; t < k.size(); ++t) row[seg.key2() + t] = k[t];
  return row;
}

Fp apply_ffn(const model::FfnSpec& spec, Precision p, const vm::Row& row) {
  vm::ResidualState s;
  s.tokens.push_back(row);
  return vm::ffn_layer(s, spec, p).tokens[0][0];
}

// All grid values a with |a| <= B_p - 1.
std::vector<Fp> operands(Precision p) {
  std::vector<Fp> out;
  const std::int64_t lim = p.max_raw() - p.one_raw();
  for (std::int64_t r = -lim; r <= lim; ++r) out.push_back(Fp::from_raw(p, r));
  return out;
}

}  // namespace

TEST_CASE("two-input AND compiles to two layers") {
  const auto c = parse_circuit("inputs 2 ; gate 3 AND 1 2 ; output 3");
  const auto m = compiler::compile(c, Precision(8));
  CHECK(m.layers.size() == 2);
  CHECK(m.tokens.size() == 5);
  CHECK(m.pause_token_count == 3);
  CHECK(m.readout_position == 4);
  CHECK(m.dim == 20);
  CHECK(matches_everywhere(c, m));
  CHECK(vm::forward(m, Bits{1, 1}).bit == 1);
}

TEST_CASE("parity n=3 at p=12") {
  const auto c = circuit::build_parity_circuit(3);
  const auto m = compiler::compile(c, Precision(12));
  CHECK(m.layers.size() == 4);
  CHECK(matches_everywhere(c, m));
}

TEST_CASE("depth-0 passthrough") {
  const auto c = parse_circuit("inputs 1 ; output 1");
  const auto m = compiler::compile(c, Precision(8));
  CHECK(m.layers.empty());
  CHECK(m.pause_token_count == 0);
  CHECK(vm::forward(m, Bits{1}).bit == 1);
  CHECK(vm::forward(m, Bits{0}).bit == 0);
  const auto c3 = parse_circuit("inputs 3 ; output 2");
  const auto m3 = compiler::compile(c3, Precision(8));
  CHECK(m3.readout_position == 1);
  CHECK(matches_everywhere(c3, m3));
}

TEST_CASE("attention matrices") {
  const Precision p(8);
  const int L = 3;
  const Segments seg(L);
  for (auto which : {compiler::AttentionLayer::First, compiler::AttentionLayer::Second}) {
    const auto spec = compiler::make_attention(which, L, p);
    REQUIRE(spec.heads.size() == 1);
    CHECK(spec.causal);
    const auto& h = spec.heads[0];
    CHECK(h.wqk.entries().size() == 2 * L);
    const std::size_t q = which == compiler::AttentionLayer::First ? seg.query1() : seg.query2();
    const std::size_t k = which == compiler::AttentionLayer::First ? seg.key1() : seg.key2();
    for (std::size_t t = 0; t < seg.span(); ++t) CHECK(h.wqk.get(q + t, k + t) == Fp::one(p));
    CHECK(h.wv.entries().size() == 1);
    CHECK(h.wv.get(0, 0) == Fp::one(p));
  }
}

TEST_CASE("attention routing") {
  const Precision p(8);
  const auto c = parse_circuit("inputs 3 ; gate 4 OR 1 2 3 ; output 4");
  const auto m = compiler::compile(c, p);
  const auto s0 = vm::embed(m, Bits{1, 0, 1});
  std::vector<vm::AttentionWeights> w1, w2;
  vm::attention_layer(s0, m.layers[0].attention, p, vm::Kernel::Reference, &w1);
  // Arg(4,1) at position 3 reads only Inp(1); inputs attend to themselves.
  REQUIRE(w1[0].rows[3].size() == 1);
  CHECK(w1[0].rows[3][0].key == 0);
  CHECK(w1[0].rows[3][0].weight == Fp::one(p));
  CHECK(w1[0].rows[5][0].key == 2);
  for (std::uint32_t i = 0; i < 3; ++i) {
    REQUIRE(w1[0].rows[i].size() == 1);
    CHECK(w1[0].rows[i][0].key == i);
  }
  vm::attention_layer(s0, m.layers[1].attention, p, vm::Kernel::Reference, &w2);
  // The gate token averages its three Arg tokens and never itself.
  const auto& gate = w2[0].rows[6];
  REQUIRE(gate.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(gate[k].key == 3 + k);
    CHECK(gate[k].weight == encoder::attention_unit_weight(3, p));
  }
  for (std::uint32_t i = 0; i < 3; ++i) {
    REQUIRE(w2[0].rows[i].size() == 1);
    CHECK(w2[0].rows[i][0].key == i);
  }
}

TEST_CASE("ffn role examples") {
  const Precision p(8);
  const int L = 2;
  const Fp z = Fp::zero(p), one = Fp::one(p);
  const auto gate_resolve = compiler::make_ffn(FfnRole::GateResolve, L, p);
  CHECK(apply_ffn(gate_resolve, p, token_row(L, p, z, z, one, z, 0)) == one);
  CHECK(apply_ffn(gate_resolve, p, token_row(L, p, fp::parse_decimal(p, "0.5"), one, z, one, 3)).is_zero());
  const auto thr = compiler::make_ffn(FfnRole::ThresholdResolve, L, p);
  const Fp two_thirds = fp::round_to(p, fp::Rational(2, 3));
  const Fp third = fp::round_to(p, fp::Rational(1, 3));
  CHECK(apply_ffn(thr, p, token_row(L, p, two_thirds, z, third, z, 0)) == one);
  CHECK(apply_ffn(thr, p, token_row(L, p, third, z, third, z, 0)).is_zero());
  for (const auto& spec : {gate_resolve, thr}) {
    CHECK(spec.layers.size() == 5);  // four relu layers and the linear readout
  }
}

TEST_CASE("indicator networks are exact on every operand") {
  for (int bits = 2; bits <= 6; ++bits) {
    const Precision p(bits);
    const int L = 3;
    const Fp z = Fp::zero(p), one = Fp::one(p);
    const auto ind = [&](const Fp& a) { return a.raw() > 0 ? one : z; };
    const auto cn = compiler::make_ffn(FfnRole::CopyNegate, L, p);
    const auto gr = compiler::make_ffn(FfnRole::GateResolve, L, p);
    const auto sc = compiler::make_ffn(FfnRole::SignedCopy, L, p);
    const auto tr = compiler::make_ffn(FfnRole::ThresholdResolve, L, p);
    for (const Fp& a : operands(p)) {
      CAPTURE(bits);
      CAPTURE(fp::to_string(a));
      for (const Fp& neg : {z, one}) {
        // Input/Arg tokens have a nonzero pair2 key.
        const Fp want = fp::sub(a, neg).is_zero() ? z : one;
        CHECK(apply_ffn(cn, p, token_row(L, p, a, neg, z, one, 5)) == want);
        CHECK(apply_ffn(cn, p, token_row(L, p, a, neg, z, z, 1)) == want);
        const Fp signed_want = neg.is_zero() ? ind(a) : fp::neg(ind(a));
        CHECK(apply_ffn(sc, p, token_row(L, p, a, neg, z, one, 7)) == signed_want);
      }
      // Gate tokens are cleared by the first network of each pair.
      CHECK(apply_ffn(cn, p, token_row(L, p, a, z, one, z, 0)).is_zero());
      CHECK(apply_ffn(cn, p, token_row(L, p, a, z, z, z, 0)).is_zero());
      CHECK(apply_ffn(sc, p, token_row(L, p, a, z, fp::parse_decimal(p, "0.5"), z, 0)).is_zero());
      // Second network.
      CHECK(apply_ffn(gr, p, token_row(L, p, a, z, one, z, 0)) == fp::sub(one, ind(a)));
      CHECK(apply_ffn(gr, p, token_row(L, p, a, z, z, z, 0)) == ind(a));
      CHECK(apply_ffn(gr, p, token_row(L, p, a, z, z, z, 2)) == ind(a));
      CHECK(apply_ffn(gr, p, token_row(L, p, a, one, z, one, 4)).is_zero());
      CHECK(apply_ffn(gr, p, token_row(L, p, a, z, z, one, 4)).is_zero());
      for (const char* theta : {"-1", "-0.5", "0", "0.25", "1"}) {
        const Fp th = fp::parse_decimal(p, theta, true);
        CHECK(apply_ffn(tr, p, token_row(L, p, a, z, th, z, 0)) == ind(fp::sub(a, th)));
        CHECK(apply_ffn(tr, p, token_row(L, p, a, one, z, one, 6)).is_zero());
      }
    }
  }
}

TEST_CASE("verbatim g is only an indicator on {0, ulp}") {
  const Precision p(8);
  const int L = 2;
  CompileOptions opts;
  opts.compat_g = true;
  const auto gr = compiler::make_ffn(FfnRole::GateResolve, L, p, opts);
  const Fp z = Fp::zero(p);
  CHECK(apply_ffn(gr, p, token_row(L, p, z, z, z, z, 0)) == z);
  CHECK(apply_ffn(gr, p, token_row(L, p, Fp::ulp(p), z, z, z, 0)) == Fp::one(p));
  // a = 1 gives B_p (2 - 2^-p), saturated to B_p, not 1.
  CHECK(apply_ffn(gr, p, token_row(L, p, Fp::one(p), z, z, z, 0)) == Fp::max(p));
  const auto c = parse_circuit("inputs 2 ; gate 3 OR 1 2 ; output 3");
  CHECK_FALSE(matches_everywhere(c, compiler::compile(c, p, opts)));
}

TEST_CASE("keeping stale gate values breaks deeper circuits") {
  // Gate 3 = AND(1,1) = 1 is re-averaged on top of its own stale 1 in the
  // second pair and flips to 0 before gate 6 reads it in the third.
  const auto c = parse_circuit("inputs 2 ; gate 3 AND 1 2 ; gate 4 OR 1 ; gate 5 OR 4 ; gate 6 AND 5 3 ; output 6");
  CompileOptions literal;
  literal.clear_gate_values = false;
  const auto m = compiler::compile(c, Precision(8), literal);
  CHECK_FALSE(m.clear_gate_values);
  CHECK(vm::forward(m, Bits{1, 1}).bit == 0);
  CHECK(circuit::evaluate(c, Bits{1, 1}) == 1);
  CHECK(matches_everywhere(c, compiler::compile(c, Precision(8))));
  // Depth 1 circuits never see the stale value.
  const auto flat = parse_circuit("inputs 2 ; gate 3 AND 1 2 ; output 3");
  CHECK(matches_everywhere(flat, compiler::compile(flat, Precision(8), literal)));
}

TEST_CASE("threshold ties are exact") {
  // m = 6, theta = 5: stored as 5 * [1/6]_p, [5/6]_p would misfire at sum = 5.
  std::string text = "inputs 6 ; gate 7 THRESH GT 5";
  for (int i = 1; i <= 6; ++i) text += " +" + std::to_string(i);
  text += " ; output 7";
  const auto c = parse_circuit(text);
  CompileOptions loose;
  loose.enforce_min_precision = false;
  for (int p = 7; p <= 12; ++p) CHECK(matches_everywhere(c, compiler::compile(c, Precision(p), loose)));
}

TEST_CASE("precision policy") {
  const auto and2 = parse_circuit("inputs 2 ; gate 3 AND 1 2 ; output 3");
  CHECK(compiler::default_precision(and2) == 8);
  CHECK(compiler::min_precision(and2) == 2);
  CHECK_THROWS_AS(compiler::compile(and2, Precision(1)), compiler::PrecisionTooSmall);
  const auto par = circuit::build_parity_circuit(4);
  CHECK(compiler::min_precision(par) == 6);
  CHECK(compiler::default_precision(par) == 9);  // desc length 29
  try {
    compiler::compile(par, Precision(1));
    FAIL("expected refusal");
  } catch (const compiler::PrecisionTooSmall& e) {
    CHECK(e.minimum() == 6);
    CHECK(e.requested() == 1);
  }
  CompileOptions loose;
  loose.enforce_min_precision = false;
  CHECK_NOTHROW(compiler::compile(par, Precision(1), loose));
  CHECK(compiler::ceil_log2(1) == 0);
  CHECK(compiler::ceil_log2(5) == 3);
  CHECK(compiler::ceil_log2(8) == 3);
}

TEST_CASE("invalid circuits are rejected") {
  auto c = parse_circuit("inputs 2 ; gate 3 AND 1 2 ; output 3");
  c.vertices[2].args.clear();
  CHECK_THROWS_AS(compiler::compile(c, Precision(8)), circuit::CircuitError);
}

TEST_CASE("pause accounting and encoding preservation") {
  for (auto fam : {circuit::Family::AC0, circuit::Family::TC0}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      circuit::RandomCircuitParams prm;
      prm.family = fam;
      prm.n_inputs = 3 + seed % 3;
      prm.depth = 1 + seed % 3;
      prm.seed = seed;
      const auto c = circuit::random_circuit(prm);
      const auto m = compiler::compile(c);
      CHECK(m.pause_token_count == circuit::desc_stats(c).desc_length - c.n_inputs);
      CHECK(m.layers.size() == 2 * circuit::desc_stats(c).depth);
      const auto res = vm::forward(m, bits_of(seed, c.n_inputs), true);
      const auto& snaps = res.trace->snapshots;
      for (const auto& s : snaps)
        for (std::size_t t = 0; t < s.tokens.size(); ++t)
          for (std::size_t ch = 1; ch < m.dim; ++ch) REQUIRE(s.tokens[t][ch] == snaps[0].tokens[t][ch]);
    }
  }
}

TEST_CASE("model file round trip") {
  const auto c = circuit::build_parity_circuit(4);
  const auto m = compiler::compile(c);
  const std::string text = model::serialize_model(m);
  const auto back = model::parse_model(text);
  CHECK(model::serialize_model(back) == text);
  CHECK(back.precision == m.precision);
  CHECK(back.layers.size() == m.layers.size());
  CHECK(back.layers[1].ffn.role == FfnRole::ThresholdResolve);
  CHECK(back.layers[0].attention.heads[0].wqk == m.layers[0].attention.heads[0].wqk);
  CHECK(matches_everywhere(c, back));
  CHECK_FALSE(model::hash_warning(back, c).has_value());
  CHECK(model::hash_warning(back, circuit::build_parity_circuit(5)).has_value());

  std::string bumped = text;
  const auto pos = bumped.find("\"format_version\": 1");
  REQUIRE(pos != std::string::npos);
  bumped.replace(pos, 19, "\"format_version\": 2");
  CHECK_THROWS_AS(model::parse_model(bumped), model::ModelFormatError);
  CHECK_THROWS_AS(model::parse_model("{"), model::ModelFormatError);
  CHECK_THROWS_AS(model::parse_model("{\"format\": \"other\"}"), model::ModelFormatError);
}

TEST_CASE("off-grid model values are rejected unless rounding is requested") {
  const auto c = circuit::build_or_tree(3);
  const auto m = compiler::compile(c);
  auto doc = nlohmann::json::parse(model::serialize_model(m));
  auto& bias = doc["layers"][0]["ffn"]["layers"][0]["bias"];
  std::string b = bias.get<std::string>();
  b = "0.0001" + b.substr(b.find(' '));
  bias = b;
  const std::string text = doc.dump();
  CHECK_THROWS_AS(model::parse_model(text), model::ModelFormatError);
  const auto rounded = model::parse_model(text, true);
  CHECK(rounded.layers[0].ffn.layers[0].bias[0].is_zero());
}
