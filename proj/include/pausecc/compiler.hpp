#pragma once

// Circuit -> Transformer compiler. A circuit of depth l becomes 2l layers:
// the first layer of each pair routes every source value into its Arg tokens
// (negating AND/NOT inputs, signing threshold inputs), the second averages
// each gate's Arg tokens into its gate token and applies the gate's indicator.

#include <stdexcept>

#include "pausecc/circuit.hpp"
#include "pausecc/model.hpp"

namespace pausecc::compiler {

using fp::Precision;

struct CompileOptions {
  // Refuse precisions below min_precision.
  bool enforce_min_precision = true;
  // Use the verbatim B_p(relu(a) + relu(a - 2^-p)) indicator instead of the
  // saturating scale chain. Only exact for a in {0, 2^-p}.
  bool compat_g = false;
  // Zero gate-token values in the first layer of every pair, so a gate never
  // adds its previous value to the fresh average. Turning this off gives the
  // literal construction, which keeps stale gate values in the residual.
  bool clear_gate_values = true;
  // Extra bits above log2(max fan-in) required for threshold gates.
  int guard_bits = 4;
};

class PrecisionTooSmall : public std::invalid_argument {
 public:
  PrecisionTooSmall(int requested, int minimum, const std::string& why)
      : std::invalid_argument(why), requested_(requested), minimum_(minimum) {}
  int requested() const noexcept { return requested_; }
  int minimum() const noexcept { return minimum_; }

 private:
  int requested_, minimum_;
};

// Smallest k with 2^k >= x (0 for x <= 1).
int ceil_log2(std::uint64_t x);

// AC0: constant 8. TC0: ceil(log2(desc_length)) + 4, raised to the minimum.
int default_precision(const circuit::Circuit& c);

// AC0: 2. TC0: max(2, ceil(log2(max fan-in)) + guard_bits).
int min_precision(const circuit::Circuit& c, int guard_bits = 4);

enum class AttentionLayer { First, Second };

model::AttentionSpec make_attention(AttentionLayer which, int index_width, Precision p);
model::FfnSpec make_ffn(model::FfnRole role, int index_width, Precision p, const CompileOptions& opts = {});

// Throws circuit::CircuitError for invalid circuits and PrecisionTooSmall
// when p is below the minimum and enforcement is on.
model::Model compile(const circuit::Circuit& c, Precision p, const CompileOptions& opts = {});
model::Model compile(const circuit::Circuit& c, const CompileOptions& opts = {});

}  // namespace pausecc::compiler
