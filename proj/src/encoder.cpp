#include "pausecc/encoder.hpp"

#include <algorithm>
#include <stdexcept>

namespace pausecc::encoder {

using circuit::Family;
using circuit::GateType;

int index_width(std::uint64_t max_index) {
  int w = 1;
  while (w < 63 && (std::uint64_t{1} << w) <= max_index) ++w;
  return w;
}

std::vector<int> sbin(std::uint64_t i, int width) {
  std::vector<int> out(static_cast<std::size_t>(width));
  for (int k = 0; k < width; ++k) out[k] = ((i >> (width - 1 - k)) & 1u) ? +1 : -1;
  return out;
}

KeyQuery key_query(std::uint64_t i, int width, Precision p) {
  if (width < 64 && i >= (std::uint64_t{1} << width)) {
    throw std::out_of_range("index " + std::to_string(i) + " does not fit in " + std::to_string(width) + " bits");
  }
  const Fp one = Fp::one(p);
  const Fp big = Fp::max(p);
  std::vector<Fp> bits_unit, bits_big;
  for (int b : sbin(i, width)) {
    bits_unit.push_back(b > 0 ? one : fp::neg(one));
    bits_big.push_back(b > 0 ? big : fp::neg(big));
  }
  KeyQuery kq;
  kq.key = interleave(bits_unit, std::vector<Fp>(width, one));
  kq.query = interleave(bits_big, std::vector<Fp>(width, fp::neg(big)));
  return kq;
}

std::string_view to_string(TokenKind k) {
  switch (k) {
    case TokenKind::Input: return "input";
    case TokenKind::Arg: return "arg";
    case TokenKind::Gate: return "gate";
  }
  return "?";
}

TokenKind parse_token_kind(std::string_view s) {
  if (s == "input") return TokenKind::Input;
  if (s == "arg") return TokenKind::Arg;
  if (s == "gate") return TokenKind::Gate;
  throw std::invalid_argument("unknown token kind \"" + std::string(s) + "\"");
}

std::vector<Fp> TokenEncoding::embedding() const {
  std::vector<Fp> out;
  out.reserve(4 + 2 * (pair1.key.size() + pair2.key.size()));
  out.push_back(value);
  out.insert(out.end(), flags.begin(), flags.end());
  for (const auto* seg : {&pair1.key, &pair1.query, &pair2.key, &pair2.query}) {
    out.insert(out.end(), seg->begin(), seg->end());
  }
  return out;
}

Fp attention_unit_weight(std::size_t m, Precision p) {
  const std::vector<Fp> ones(m, Fp::one(p));
  return fp::div(Fp::one(p), fp::iterated_sum(p, ones));
}

std::int64_t clamp_threshold(std::int64_t theta, std::size_t m) {
  const auto mm = static_cast<std::int64_t>(m);
  return std::clamp(theta, -mm - 1, mm);
}

Fp threshold_field(std::int64_t theta, std::size_t m, Precision p) {
  return fp::mul(Fp::from_int(p, clamp_threshold(theta, m)), attention_unit_weight(m, p));
}

TokenEncoding encode_input(VertexId i, int width, Precision p) {
  TokenEncoding t(TokenKind::Input, p);
  t.vertex = i;
  t.pair1 = key_query(i, width, p);
  t.pair2 = t.pair1;
  return t;
}

TokenEncoding encode_arg(const circuit::Vertex& gate, std::size_t arg_index, Family family, int width,
                         Precision p) {
  const circuit::Edge& e = gate.args.at(arg_index);
  TokenEncoding t(TokenKind::Arg, p);
  t.vertex = gate.id;
  t.source = e.source;
  t.arg_index = static_cast<std::uint32_t>(arg_index);
  bool negate = false;
  if (family == Family::AC0) {
    negate = gate.type == GateType::And || gate.type == GateType::Not;
  } else {
    if (gate.direction != circuit::Direction::GT) throw std::logic_error("encode_arg: TC0 gate not GT-normalized");
    negate = e.sign < 0;
  }
  t.flags[0] = negate ? Fp::one(p) : Fp::zero(p);
  t.flags[2] = Fp::one(p);
  const KeyQuery own = key_query(gate.id, width, p);
  t.pair1.key = key_query(0, width, p).key;
  t.pair1.query = key_query(e.source, width, p).query;
  t.pair2 = own;
  return t;
}

TokenEncoding encode_gate(const circuit::Vertex& gate, Family family, int width, Precision p) {
  TokenEncoding t(TokenKind::Gate, p);
  t.vertex = gate.id;
  if (family == Family::AC0) {
    t.flags[1] = gate.type == GateType::And ? Fp::one(p) : Fp::zero(p);
  } else {
    if (gate.direction != circuit::Direction::GT) throw std::logic_error("encode_gate: TC0 gate not GT-normalized");
    t.flags[1] = threshold_field(gate.theta, gate.args.size(), p);
  }
  t.pair1 = key_query(gate.id, width, p);
  t.pair2.key = key_query(0, width, p).key;
  t.pair2.query = t.pair1.query;
  return t;
}

Layout layout(const circuit::Circuit& c, Precision p) {
  const circuit::Circuit norm = circuit::normalize_thresholds(c);
  Layout out;
  out.width = index_width(norm.max_id());
  for (const circuit::Vertex& v : norm.vertices) {
    if (v.is_input) {
      out.tokens.push_back(encode_input(v.id, out.width, p));
      continue;
    }
    for (std::size_t k = 0; k < v.args.size(); ++k) {
      out.tokens.push_back(encode_arg(v, k, norm.family, out.width, p));
    }
    out.tokens.push_back(encode_gate(v, norm.family, out.width, p));
  }
  return out;
}

OrthogonalityResult check_orthogonality(int width, Precision p, std::uint64_t max_index, bool exhaustive) {
  std::vector<KeyQuery> kq;
  kq.reserve(max_index + 1);
  for (std::uint64_t i = 0; i <= max_index; ++i) kq.push_back(key_query(i, width, p));
  const Fp zero = Fp::zero(p);
  const Fp miss = fp::neg(Fp::max(p));
  OrthogonalityResult res;
  auto probe = [&](std::uint64_t i, std::uint64_t j) {
    if (!res.ok) return;
    const Fp got = fp::dot(p, kq[i].key, kq[j].query);
    if (got != (i == j ? zero : miss)) res = {false, i, j, fp::to_string(got)};
  };
  if (exhaustive) {
    for (std::uint64_t i = 0; i <= max_index; ++i)
      for (std::uint64_t j = 0; j <= max_index; ++j) probe(i, j);
    return res;
  }
  for (std::uint64_t j = 0; j <= max_index; ++j) {
    probe(j, j);
    probe(0, j);
    if (j > 0) {
      probe(j - 1, j);
      probe(j, j - 1);
    }
  }
  return res;
}

}  // namespace pausecc::encoder
