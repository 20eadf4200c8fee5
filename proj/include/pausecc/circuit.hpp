#pragma once

// Circuit IR for constant-depth AC0 / TC0 families: a topologically ordered
// list of input vertices and gates, a line-oriented text format, and the
// brute-force evaluator used as ground truth everywhere else.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pausecc::circuit {

using VertexId = std::uint32_t;
using Bits = std::vector<std::uint8_t>;

enum class Family { AC0, TC0 };
enum class GateType { And, Or, Not, Thresh };
enum class Direction { GT, LT };

struct Edge {
  VertexId source = 0;
  int sign = +1;

  friend bool operator==(const Edge&, const Edge&) = default;
};

struct Vertex {
  VertexId id = 0;
  bool is_input = false;
  GateType type = GateType::Or;
  std::vector<Edge> args;
  // THRESH only.
  Direction direction = Direction::GT;
  std::int64_t theta = 0;

  friend bool operator==(const Vertex&, const Vertex&) = default;
};

struct Circuit {
  Family family = Family::AC0;
  std::uint32_t n_inputs = 0;
  std::vector<Vertex> vertices;
  VertexId output_id = 0;

  // Index into vertices for an id; throws std::out_of_range for unknown ids.
  std::size_t index_of(VertexId id) const;
  const Vertex& vertex(VertexId id) const { return vertices[index_of(id)]; }
  VertexId max_id() const { return vertices.empty() ? 0 : vertices.back().id; }
  std::size_t gate_count() const { return vertices.size() - n_inputs; }

  friend bool operator==(const Circuit&, const Circuit&) = default;
};

struct DescStats {
  std::size_t desc_length = 0;
  std::size_t depth = 0;
  std::size_t size = 0;

  friend bool operator==(const DescStats&, const DescStats&) = default;
};

class CircuitError : public std::runtime_error {
 public:
  CircuitError(const std::string& what, std::size_t line = 0, std::size_t column = 0, VertexId vertex = 0)
      : std::runtime_error(what), line_(line), column_(column), vertex_(vertex) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }
  VertexId vertex() const noexcept { return vertex_; }

 private:
  std::size_t line_, column_;
  VertexId vertex_;
};

std::string_view to_string(Family f);
std::string_view to_string(GateType t);
std::string_view to_string(Direction d);
Family parse_family(std::string_view s);

// Grammar, one directive per line ('#' starts a comment, ';' also separates
// directives):
//   circuit <AC0|TC0>                         (optional, inferred when absent)
//   inputs <n>
//   gate <id> <AND|OR|NOT> <src>+
//   gate <id> THRESH <GT|LT> <theta> (<+|-><src>)+
//   output <id>
Circuit parse_circuit(std::string_view text);
std::string serialize_circuit(const Circuit& c);

// Empty iff every structural invariant holds.
std::vector<std::string> validate(const Circuit& c);

// Values of every vertex, indexed by position in c.vertices.
Bits evaluate_all(const Circuit& c, std::span<const std::uint8_t> x);
std::uint8_t evaluate(const Circuit& c, std::span<const std::uint8_t> x);

// Layer of every vertex, indexed by position in c.vertices: inputs at 0,
// gates at 1 + max layer of their sources.
std::vector<std::size_t> layerize(const Circuit& c);

DescStats desc_stats(const Circuit& c);

// FNV-1a over the serialized text.
std::uint64_t circuit_hash(const Circuit& c);

// Rewrites every LT threshold gate as GT with flipped edge signs and negated
// theta. Other gates are untouched.
Circuit normalize_thresholds(const Circuit& c);

// Two-layer threshold circuit for parity: G_k = [sum x > k-1] for k = 1..n,
// then F = [sum (-1)^(k+1) G_k > 0].
Circuit build_parity_circuit(std::uint32_t n);

// Balanced tree of 2-input OR gates over n inputs.
Circuit build_or_tree(std::uint32_t n);

struct RandomCircuitParams {
  Family family = Family::AC0;
  std::uint32_t n_inputs = 4;
  std::uint32_t depth = 2;
  std::uint32_t max_fanin = 4;
  std::uint32_t size_budget = 16;
  std::uint64_t seed = 0;
};

// Valid circuit of the requested family whose deepest gate is at exactly
// `depth`. Fully determined by the parameters.
Circuit random_circuit(const RandomCircuitParams& params);

Bits parse_bits(std::string_view text);
std::string bits_to_string(std::span<const std::uint8_t> bits);

}  // namespace pausecc::circuit
