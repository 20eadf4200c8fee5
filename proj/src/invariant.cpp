#include "pausecc/invariant.hpp"

namespace pausecc::verify {

using encoder::TokenKind;
using fp::Fp;

InvariantChecker::InvariantChecker(const circuit::Circuit& c, const model::Model& m)
    : circuit_(c), model_(m), normalized_(circuit::normalize_thresholds(c)), layer_of_(circuit::layerize(c)) {}

std::vector<InvariantViolation> InvariantChecker::check(const vm::ResidualState& s, std::size_t layer,
                                                        std::span<const std::uint8_t> x, std::size_t limit) const {
  std::vector<InvariantViolation> out;
  const fp::Precision p = model_.precision;
  const circuit::Bits values = circuit::evaluate_all(circuit_, x);
  const std::size_t b = (layer + 1) / 2;
  const bool odd = layer % 2 == 1;

  auto report = [&](std::size_t t, std::string what) {
    if (out.size() < limit) out.push_back({layer, t, std::move(what)});
  };
  auto expect = [&](std::size_t t, const Fp& got, const Fp& want, const char* what) {
    if (got != want) report(t, std::string(what) + ": expected " + fp::to_string(want) + ", got " + fp::to_string(got));
  };
  auto bit = [&](int v) { return Fp::from_int(p, v); };

  if (s.tokens.size() != model_.tokens.size()) {
    report(0, "snapshot has " + std::to_string(s.tokens.size()) + " tokens, model has " +
                  std::to_string(model_.tokens.size()));
    return out;
  }
  for (std::size_t t = 0; t < s.tokens.size() && out.size() < limit; ++t) {
    const auto& info = model_.tokens[t];
    const auto& row = s.tokens[t];
    for (std::size_t ch = 1; ch < row.size(); ++ch) {
      if (row[ch] != info.embedding[ch]) {
        report(t, "encoding channel " + std::to_string(ch) + " changed to " + fp::to_string(row[ch]));
        break;
      }
    }
    const Fp& v = row[0];
    std::size_t idx = 0;
    try {
      idx = circuit_.index_of(info.vertex);
    } catch (const std::out_of_range&) {
      report(t, "token refers to unknown vertex " + std::to_string(info.vertex));
      continue;
    }
    switch (info.kind) {
      case TokenKind::Input:
        expect(t, v, bit(values[idx]), "input value");
        break;
      case TokenKind::Arg: {
        if (layer == 0 || !odd) {
          expect(t, v, Fp::zero(p), "arg value");
          break;
        }
        const auto& gate = normalized_.vertices[idx];
        if (info.arg_index >= gate.args.size()) {
          report(t, "arg index out of range");
          break;
        }
        const auto& edge = gate.args[info.arg_index];
        const std::size_t src = circuit_.index_of(edge.source);
        if (layer_of_[src] + 1 > b) break;  // source not settled yet
        const int vj = values[src];
        int want = vj;
        if (circuit_.family == circuit::Family::AC0) {
          if (gate.type == circuit::GateType::And || gate.type == circuit::GateType::Not) want = 1 - vj;
        } else if (edge.sign < 0) {
          want = -vj;
        }
        expect(t, v, bit(want), "arg copy");
        break;
      }
      case TokenKind::Gate:
        if (layer == 0 || odd) {
          expect(t, v, Fp::zero(p), "gate value");
        } else if (layer_of_[idx] <= b) {
          expect(t, v, bit(values[idx]), "gate output");
        }
        break;
    }
  }
  return out;
}

std::vector<InvariantViolation> InvariantChecker::check_trace(const vm::Trace& t, std::span<const std::uint8_t> x,
                                                              std::size_t limit) const {
  std::vector<InvariantViolation> out;
  for (std::size_t l = 0; l < t.snapshots.size() && out.size() < limit; ++l) {
    auto v = check(t.snapshots[l], l, x, limit - out.size());
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

std::optional<std::size_t> InvariantChecker::first_divergent_layer(const vm::Trace& t,
                                                                   std::span<const std::uint8_t> x) const {
  for (std::size_t l = 0; l < t.snapshots.size(); ++l)
    if (!check(t.snapshots[l], l, x, 1).empty()) return l;
  return std::nullopt;
}

}  // namespace pausecc::verify
