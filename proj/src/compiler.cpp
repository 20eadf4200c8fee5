#include "pausecc/compiler.hpp"

#include <algorithm>

#include "pausecc/encoder.hpp"

namespace pausecc::compiler {

using circuit::Circuit;
using circuit::Family;
using encoder::Segments;
using fp::Fp;
using model::Activation;
using model::DenseLayer;
using model::FfnRole;
using model::SparseMatrix;

int ceil_log2(std::uint64_t x) {
  int k = 0;
  while (k < 64 && (std::uint64_t{1} << k) < x) ++k;
  return k;
}

int min_precision(const Circuit& c, int guard_bits) {
  if (c.family == Family::AC0) return 2;
  std::size_t max_m = 1;
  for (const auto& v : c.vertices) max_m = std::max(max_m, v.args.size());
  return std::max(2, ceil_log2(max_m) + guard_bits);
}

int default_precision(const Circuit& c) {
  if (c.family == Family::AC0) return 8;
  const int p = ceil_log2(circuit::desc_stats(c).desc_length) + 4;
  return std::min(fp::kMaxPrecision, std::max(p, min_precision(c)));
}

model::AttentionSpec make_attention(AttentionLayer which, int index_width, Precision p) {
  const Segments seg(index_width);
  const std::size_t d = seg.dim();
  model::AttentionHead head{SparseMatrix(d, d), SparseMatrix(d, d)};
  const std::size_t q = which == AttentionLayer::First ? seg.query1() : seg.query2();
  const std::size_t k = which == AttentionLayer::First ? seg.key1() : seg.key2();
  for (std::size_t t = 0; t < seg.span(); ++t) head.wqk.set(q + t, k + t, Fp::one(p));
  head.wv.set(Segments::kValue, Segments::kValue, Fp::one(p));
  model::AttentionSpec spec;
  spec.heads.push_back(std::move(head));
  spec.causal = true;
  return spec;
}

namespace {

// A feedforward network of fixed shape: some indicators I[form > 0], some
// nonnegative carries relu(form), optionally the gate-token detector t, all
// combined in a fourth relu layer and a final linear readout into channel 0.
//   S1  relu(form) per indicator (two units in compat mode), relu(form) per
//       carry, relu(pair2.key sbin bit) per index bit
//   S2  B_p * a (compat: sum of the pair), carries, t = relu(1 - sum r)
//   S3  B_p * a, carries, t
//   S4  combination units, carries
//   out linear combination of S4 units and carries
struct Term {
  std::size_t index;
  int coef;
};

struct Unit {
  std::vector<Term> indicators;
  std::vector<Term> carries;
  int detector = 0;
  int bias = 0;
};

struct Recipe {
  std::vector<std::vector<Term>> indicators;  // terms over input channels
  std::vector<std::vector<Term>> carries;
  bool detector = false;
  std::vector<Unit> units;
  std::vector<Term> out_units;
  std::vector<Term> out_carries;
};

constexpr std::size_t kV = Segments::kValue;
constexpr std::size_t kF1 = Segments::kFlag1;
constexpr std::size_t kF2 = Segments::kFlag2;
constexpr std::size_t kF3 = Segments::kFlag3;

Recipe recipe_for(FfnRole role, bool clear) {
  Recipe r;
  // Carries 0 and 1 are always c = relu(u), e = relu(-u) so that -c + e = -u
  // cancels the incoming value in the residual.
  r.carries = {{{kV, +1}}, {{kV, -1}}};
  r.out_carries = {{0, -1}, {1, +1}};
  const int t = clear ? -1 : 0;
  switch (role) {
    case FfnRole::CopyNegate:
      // value <- I[value != negflag]; gate tokens <- 0.
      r.indicators = {{{kV, +1}, {kF1, -1}}, {{kV, -1}, {kF1, +1}}};
      r.detector = clear;
      r.units = {Unit{{{0, +1}, {1, +1}}, {}, t, 0}};
      r.out_units = {{0, +1}};
      break;
    case FfnRole::GateResolve:
      // Arg <- 0; AND gate <- 1 - I[value > 0]; everything else <- I[value > 0].
      r.indicators = {{{kV, +1}}};
      r.carries.push_back({{kF2, +1}});  // carry 2: AND flag
      r.carries.push_back({{kF3, +1}});  // carry 3: Arg flag
      r.units = {Unit{{{0, +1}}, {{2, -1}, {3, -1}}, 0, 0}, Unit{{{0, -1}}, {{2, +1}, {3, -1}}, 0, 0}};
      r.out_units = {{0, +1}, {1, +1}};
      break;
    case FfnRole::SignedCopy:
      // value <- +-I[value > 0] by the sign flag; gate tokens <- 0.
      r.indicators = {{{kV, +1}}};
      r.carries.push_back({{kF1, +1}});  // carry 2: sign flag
      r.detector = clear;
      r.units = {Unit{{{0, +1}}, {{2, -1}}, t, 0}, Unit{{{0, +1}}, {{2, +1}}, t, -1}};
      r.out_units = {{0, +1}, {1, -1}};
      break;
    case FfnRole::ThresholdResolve:
      // Arg <- 0; everything else <- I[value - threshold field > 0].
      r.indicators = {{{kV, +1}, {kF2, -1}}};
      r.carries.push_back({{kF3, +1}});  // carry 2: Arg flag
      r.units = {Unit{{{0, +1}}, {{2, -1}}, 0, 0}};
      r.out_units = {{0, +1}};
      break;
    case FfnRole::Custom:
      throw std::invalid_argument("make_ffn: custom role has no recipe");
  }
  return r;
}

Fp int_fp(Precision p, int v) { return Fp::from_int(p, v); }

model::FfnSpec build(const Recipe& r, FfnRole role, int index_width, Precision p, bool compat) {
  const Segments seg(index_width);
  const std::size_t d = seg.dim();
  const std::size_t L = seg.w;
  const std::size_t ni = r.indicators.size();
  const std::size_t nc = r.carries.size();
  const std::size_t per_ind = compat ? 2 : 1;
  const Fp big = Fp::max(p);
  const Fp ulp = Fp::ulp(p);

  auto layer = [&](std::size_t rows, std::size_t cols, Activation act) {
    DenseLayer l;
    l.weight = SparseMatrix(rows, cols);
    l.bias.assign(rows, Fp::zero(p));
    l.activation = act;
    return l;
  };

  // S1
  const std::size_t s1_carry = ni * per_ind;
  const std::size_t s1_bits = s1_carry + nc;
  const std::size_t s1_width = s1_bits + (r.detector ? L : 0);
  DenseLayer s1 = layer(s1_width, d, Activation::Relu);
  for (std::size_t k = 0; k < ni; ++k) {
    for (std::size_t u = 0; u < per_ind; ++u) {
      for (const Term& t : r.indicators[k]) s1.weight.set(k * per_ind + u, t.index, int_fp(p, t.coef));
    }
    if (compat) s1.bias[k * per_ind + 1] = fp::neg(ulp);
  }
  for (std::size_t k = 0; k < nc; ++k)
    for (const Term& t : r.carries[k]) s1.weight.set(s1_carry + k, t.index, int_fp(p, t.coef));
  if (r.detector) {
    for (std::size_t b = 0; b < L; ++b) s1.weight.set(s1_bits + b, seg.key2() + 2 * b, Fp::one(p));
  }

  // S2 and S3 share a layout: indicators, carries, detector.
  const std::size_t mid_width = ni + nc + (r.detector ? 1 : 0);
  DenseLayer s2 = layer(mid_width, s1_width, Activation::Relu);
  DenseLayer s3 = layer(mid_width, mid_width, Activation::Relu);
  for (std::size_t k = 0; k < ni; ++k) {
    if (compat) {
      s2.weight.set(k, 2 * k, Fp::one(p));
      s2.weight.set(k, 2 * k + 1, Fp::one(p));
    } else {
      s2.weight.set(k, k, big);
    }
    s3.weight.set(k, k, big);
  }
  for (std::size_t k = 0; k < nc; ++k) {
    s2.weight.set(ni + k, s1_carry + k, Fp::one(p));
    s3.weight.set(ni + k, ni + k, Fp::one(p));
  }
  if (r.detector) {
    for (std::size_t b = 0; b < L; ++b) s2.weight.set(ni + nc, s1_bits + b, fp::neg(Fp::one(p)));
    s2.bias[ni + nc] = Fp::one(p);
    s3.weight.set(ni + nc, ni + nc, Fp::one(p));
  }

  // S4: units then carries.
  const std::size_t nu = r.units.size();
  DenseLayer s4 = layer(nu + nc, mid_width, Activation::Relu);
  for (std::size_t u = 0; u < nu; ++u) {
    const Unit& unit = r.units[u];
    for (const Term& t : unit.indicators) {
      s4.weight.set(u, t.index, compat ? int_fp(p, t.coef) : Fp::from_raw(p, t.coef));
    }
    for (const Term& t : unit.carries) s4.weight.set(u, ni + t.index, int_fp(p, t.coef));
    if (unit.detector != 0) s4.weight.set(u, ni + nc, int_fp(p, unit.detector));
    s4.bias[u] = int_fp(p, unit.bias);
  }
  for (std::size_t k = 0; k < nc; ++k) s4.weight.set(nu + k, ni + k, Fp::one(p));

  DenseLayer out = layer(d, nu + nc, Activation::Identity);
  for (const Term& t : r.out_units) out.weight.set(kV, t.index, int_fp(p, t.coef));
  for (const Term& t : r.out_carries) out.weight.set(kV, nu + t.index, int_fp(p, t.coef));

  model::FfnSpec spec;
  spec.role = role;
  spec.layers = {std::move(s1), std::move(s2), std::move(s3), std::move(s4), std::move(out)};
  return spec;
}

}  // namespace

model::FfnSpec make_ffn(FfnRole role, int index_width, Precision p, const CompileOptions& opts) {
  return build(recipe_for(role, opts.clear_gate_values), role, index_width, p, opts.compat_g);
}

model::Model compile(const Circuit& c, Precision p, const CompileOptions& opts) {
  if (const auto problems = circuit::validate(c); !problems.empty()) {
    throw circuit::CircuitError("invalid circuit: " + problems.front());
  }
  const int minimum = min_precision(c, opts.guard_bits);
  if (opts.enforce_min_precision && p.bits() < minimum) {
    std::string why = "precision " + std::to_string(p.bits()) + " is below the minimum " + std::to_string(minimum) +
                      " for this circuit";
    why += c.family == Family::AC0
               ? " (the causal mask and indicator chain need B_p >= 2)"
               : " (threshold gates need ceil(log2(max fan-in)) + " + std::to_string(opts.guard_bits) +
                     " bits so averaged arguments and thresholds stay exact)";
    throw PrecisionTooSmall(p.bits(), minimum, why);
  }

  const encoder::Layout lay = encoder::layout(c, p);
  const auto ortho = encoder::check_orthogonality(lay.width, p, c.max_id(), false);
  if (!ortho.ok) {
    throw std::logic_error("positional encodings not orthogonal at p=" + std::to_string(p.bits()) + ": key " +
                           std::to_string(ortho.key_index) + " . query " + std::to_string(ortho.query_index) +
                           " = " + ortho.got);
  }

  model::Model m;
  m.family = c.family;
  m.precision = p;
  m.dim = lay.dim();
  m.index_width = lay.width;
  m.n_inputs = c.n_inputs;
  m.circuit_hash = circuit::circuit_hash(c);
  m.compat_g = opts.compat_g;
  m.clear_gate_values = opts.clear_gate_values;
  for (const auto& t : lay.tokens) {
    m.tokens.push_back({t.kind, t.vertex, t.source, t.arg_index, t.embedding()});
    if ((t.kind == encoder::TokenKind::Gate || t.kind == encoder::TokenKind::Input) && t.vertex == c.output_id) {
      m.readout_position = m.tokens.size() - 1;
    }
  }
  m.pause_token_count = m.tokens.size() - c.n_inputs;

  const bool ac0 = c.family == Family::AC0;
  const std::size_t depth = circuit::desc_stats(c).depth;
  const auto first_ffn = make_ffn(ac0 ? FfnRole::CopyNegate : FfnRole::SignedCopy, lay.width, p, opts);
  const auto second_ffn = make_ffn(ac0 ? FfnRole::GateResolve : FfnRole::ThresholdResolve, lay.width, p, opts);
  const auto first_att = make_attention(AttentionLayer::First, lay.width, p);
  const auto second_att = make_attention(AttentionLayer::Second, lay.width, p);
  for (std::size_t b = 0; b < depth; ++b) {
    m.layers.push_back({first_att, first_ffn});
    m.layers.push_back({second_att, second_ffn});
  }
  return m;
}

model::Model compile(const Circuit& c, const CompileOptions& opts) {
  return compile(c, Precision(default_precision(c)), opts);
}

}  // namespace pausecc::compiler
