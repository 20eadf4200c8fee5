#pragma once

// The layer-by-layer invariant of compiled models, checked on a VM trace.
// With b = ceil(l / 2) for the state after layer l:
//   every layer   encodings unchanged, Inp(i) holds x_i
//   layer 0       every pause token holds 0
//   odd  l        Arg(i, j) holds the signed/negated copy of v_j when j sits
//                 in circuit layer <= b - 1; gate tokens hold 0
//   even l        gate i holds v_i when i sits in circuit layer <= b; every
//                 Arg token holds 0
// Expected values come from circuit::evaluate_all only.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pausecc/circuit.hpp"
#include "pausecc/model.hpp"
#include "pausecc/vm.hpp"

namespace pausecc::verify {

struct InvariantViolation {
  std::size_t layer = 0;
  std::size_t token = 0;
  std::string what;
};

class InvariantChecker {
 public:
  InvariantChecker(const circuit::Circuit& c, const model::Model& m);

  // Violations of snapshot `layer` for input x, at most `limit` of them.
  std::vector<InvariantViolation> check(const vm::ResidualState& s, std::size_t layer,
                                        std::span<const std::uint8_t> x, std::size_t limit = 16) const;

  // Every snapshot of the trace.
  std::vector<InvariantViolation> check_trace(const vm::Trace& t, std::span<const std::uint8_t> x,
                                              std::size_t limit = 16) const;

  // Smallest layer whose snapshot violates the invariant.
  std::optional<std::size_t> first_divergent_layer(const vm::Trace& t, std::span<const std::uint8_t> x) const;

 private:
  const circuit::Circuit& circuit_;
  const model::Model& model_;
  circuit::Circuit normalized_;
  std::vector<std::size_t> layer_of_;
};

}  // namespace pausecc::verify
