#pragma once

// Positional encodings for circuit-simulating Transformers. Every token's
// embedding has dimension 4 + 8L, laid out as
//   value | flag1 flag2 flag3 | pair1.key pair1.query | pair2.key pair2.query
// where each key/query is 2L wide. key(i) interleaves sbin(i) with ones,
// query(i) interleaves B_p * sbin(i) with -B_p, so the saturated dot
// key(i) . query(j) is 0 when i == j and -B_p otherwise. Index 0 is reserved:
// it never matches any query issued by a real vertex.

#include <array>
#include <cstdint>
#include <vector>

#include "pausecc/circuit.hpp"
#include "pausecc/fixedpoint.hpp"

namespace pausecc::encoder {

using circuit::VertexId;
using fp::Fp;
using fp::Precision;

// Number of bits L needed for indices 0..max_index (at least 1).
int index_width(std::uint64_t max_index);

// 2 * bin(i) - 1, most significant bit first.
std::vector<int> sbin(std::uint64_t i, int width);

// (x^y)_{2k-1} = x_k, (x^y)_{2k} = y_k (1-based).
template <typename T>
std::vector<T> interleave(const std::vector<T>& x, const std::vector<T>& y) {
  std::vector<T> out;
  out.reserve(x.size() + y.size());
  for (std::size_t k = 0; k < x.size() && k < y.size(); ++k) {
    out.push_back(x[k]);
    out.push_back(y[k]);
  }
  return out;
}

struct KeyQuery {
  std::vector<Fp> key;
  std::vector<Fp> query;
};

// Throws std::out_of_range when i does not fit in `width` bits.
KeyQuery key_query(std::uint64_t i, int width, Precision p);

struct Segments {
  static constexpr std::size_t kValue = 0;
  static constexpr std::size_t kFlag1 = 1;
  static constexpr std::size_t kFlag2 = 2;
  static constexpr std::size_t kFlag3 = 3;

  explicit Segments(int width) : w(static_cast<std::size_t>(width)) {}

  std::size_t key1() const { return 4; }
  std::size_t query1() const { return 4 + 2 * w; }
  std::size_t key2() const { return 4 + 4 * w; }
  std::size_t query2() const { return 4 + 6 * w; }
  std::size_t span() const { return 2 * w; }
  std::size_t dim() const { return 4 + 8 * w; }

  std::size_t w;
};

enum class TokenKind { Input, Arg, Gate };

std::string_view to_string(TokenKind k);
TokenKind parse_token_kind(std::string_view s);

struct TokenEncoding {
  TokenEncoding(TokenKind k, Precision p)
      : kind(k), value(Fp::zero(p)), flags{Fp::zero(p), Fp::zero(p), Fp::zero(p)} {}

  TokenKind kind;
  VertexId vertex = 0;        // Inp(i) / Type(i): i; Arg(i, j): i
  VertexId source = 0;        // Arg(i, j): j
  std::uint32_t arg_index = 0;  // position of the edge in the gate's argument list
  Fp value;
  std::array<Fp, 3> flags;
  KeyQuery pair1;
  KeyQuery pair2;

  std::vector<Fp> embedding() const;
};

struct Layout {
  int width = 1;
  std::vector<TokenEncoding> tokens;

  std::size_t dim() const { return Segments(width).dim(); }
};

// Attention weight a gate token receives from each of its m arguments:
// [1 / Z]_p where Z is the left-to-right saturated sum of m ones.
Fp attention_unit_weight(std::size_t m, Precision p);

// Threshold theta clamped to [-m-1, m]; outside that range the gate is
// constant, and clamping keeps the stored field small.
std::int64_t clamp_threshold(std::int64_t theta, std::size_t m);

// Threshold field of a (GT-normalized) TC0 gate token: clamped theta times the
// attention unit weight, so the comparison against the averaged arguments is
// exact on the fixed-point grid.
Fp threshold_field(std::int64_t theta, std::size_t m, Precision p);

TokenEncoding encode_input(VertexId i, int width, Precision p);
// `gate` must already be GT-normalized for TC0.
TokenEncoding encode_arg(const circuit::Vertex& gate, std::size_t arg_index, circuit::Family family, int width,
                         Precision p);
TokenEncoding encode_gate(const circuit::Vertex& gate, circuit::Family family, int width, Precision p);

// One token per description string in order: Inp(1..n), then for every gate
// its Arg tokens followed by its Type/Thresh token. All values are 0; input
// bits are bound when the model is run.
Layout layout(const circuit::Circuit& c, Precision p);

struct OrthogonalityResult {
  bool ok = true;
  std::uint64_t key_index = 0;
  std::uint64_t query_index = 0;
  std::string got;
};

// Checks key(i) . query(j) over 0 <= i, j <= max_index. Non-exhaustive mode
// covers the diagonal, the privileged key 0 against every query and the
// neighbouring off-diagonals.
OrthogonalityResult check_orthogonality(int width, Precision p, std::uint64_t max_index, bool exhaustive);

}  // namespace pausecc::encoder
