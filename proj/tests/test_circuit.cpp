#include <doctest.h>

#include <algorithm>

#include "pausecc/circuit.hpp"

using namespace pausecc::circuit;

namespace {

Bits bits_of(std::uint64_t v, std::uint32_t n) {
  Bits x(n);
  for (std::uint32_t i = 0; i < n; ++i) x[i] = (v >> i) & 1u;
  return x;
}

int xor_fold(const Bits& x) {
  int r = 0;
  for (auto b : x) r ^= b;
  return r;
}

}  // namespace

TEST_CASE("parse the two-input AND") {
  const Circuit c = parse_circuit("inputs 2 ; gate 3 AND 1 2 ; output 3");
  CHECK(c.family == Family::AC0);
  CHECK(c.n_inputs == 2);
  CHECK(c.output_id == 3);
  REQUIRE(c.vertices.size() == 3);
  CHECK(c.vertices[2].type == GateType::And);
  CHECK(evaluate(c, Bits{1, 1}) == 1);
  CHECK(evaluate(c, Bits{1, 0}) == 0);
  CHECK(desc_stats(c) == DescStats{5, 1, 1});
  CHECK(layerize(c) == std::vector<std::size_t>{0, 0, 1});
}

TEST_CASE("parse errors carry position or vertex") {
  SUBCASE("forward reference") {
    try {
      parse_circuit("inputs 2\ngate 3 AND 4 5\noutput 3");
      FAIL("expected error");
    } catch (const CircuitError& e) {
      CHECK(e.line() == 2);
      CHECK(e.vertex() == 3);
    }
  }
  CHECK_THROWS_AS(parse_circuit("inputs 2\ngate 3 AND 1 2\ngate 3 OR 1 2\noutput 3"), CircuitError);
  CHECK_THROWS_AS(parse_circuit("inputs 2\ngate 3 NOT 1 2\noutput 3"), CircuitError);
  CHECK_THROWS_AS(parse_circuit("inputs 2\ngate 3 XOR 1 2\noutput 3"), CircuitError);
  CHECK_THROWS_AS(parse_circuit("inputs 2\ngate 3 AND\noutput 3"), CircuitError);
  CHECK_THROWS_AS(parse_circuit("inputs 2\ngate 3 AND 1 1\noutput 3"), CircuitError);
  CHECK_THROWS_AS(parse_circuit("inputs 2\ngate 3 THRESH GT 0 1 2\noutput 3"), CircuitError);
  CHECK_THROWS_AS(parse_circuit("inputs 2\ngate 3 AND 1 2"), CircuitError);
  CHECK_THROWS_AS(parse_circuit("circuit AC0\ninputs 2\ngate 3 THRESH GT 0 +1 +2\noutput 3"), CircuitError);
  CHECK_THROWS_AS(parse_circuit("inputs 2\ngate 3 AND 1 2\ngate 4 OR 1 2\noutput 4"), CircuitError);
  CHECK_THROWS_AS(parse_circuit("inputs 2 extra"), CircuitError);
}

TEST_CASE("comments and whitespace") {
  const Circuit c = parse_circuit("# header\ncircuit TC0\ninputs 3   # three\n\ngate 4 THRESH GT 1 +1 +2 +3\noutput 4\n");
  CHECK(c.family == Family::TC0);
  CHECK(evaluate(c, Bits{1, 0, 1}) == 1);
  CHECK(evaluate(c, Bits{1, 0, 0}) == 0);
}

TEST_CASE("threshold directions and signs") {
  const Circuit c = parse_circuit("inputs 2\ngate 3 THRESH LT 1 +1 -2\noutput 3");
  // x1 - x2 < 1
  CHECK(evaluate(c, Bits{0, 0}) == 1);
  CHECK(evaluate(c, Bits{1, 0}) == 0);
  CHECK(evaluate(c, Bits{0, 1}) == 1);
  const Circuit n = normalize_thresholds(c);
  CHECK(n.vertices[2].direction == Direction::GT);
  CHECK(n.vertices[2].theta == -1);
  for (std::uint64_t v = 0; v < 4; ++v) CHECK(evaluate(c, bits_of(v, 2)) == evaluate(n, bits_of(v, 2)));
}

TEST_CASE("evaluate rejects wrong input length") {
  const Circuit c = parse_circuit("inputs 2 ; gate 3 OR 1 2 ; output 3");
  CHECK_THROWS(evaluate(c, Bits{1}));
}

TEST_CASE("parity circuit") {
  const Circuit c3 = build_parity_circuit(3);
  const Bits x{1, 1, 0};
  const Bits all = evaluate_all(c3, x);
  CHECK(all[3] == 1);
  CHECK(all[4] == 1);
  CHECK(all[5] == 0);
  CHECK(evaluate(c3, x) == 0);
  CHECK(evaluate(build_parity_circuit(1), Bits{1}) == 1);
  CHECK(evaluate(build_parity_circuit(4), Bits{1, 0, 1, 1}) == 1);

  const Circuit c4 = build_parity_circuit(4);
  CHECK(desc_stats(c4).desc_length == 29);
  const auto layers = layerize(c4);
  for (std::size_t k = 4; k < 8; ++k) CHECK(layers[k] == 1);
  CHECK(layers[8] == 2);

  for (std::uint32_t n = 1; n <= 12; ++n) {
    const Circuit c = build_parity_circuit(n);
    CHECK(validate(c).empty());
    for (std::uint64_t v = 0; v < (std::uint64_t{1} << n); ++v) {
      const Bits b = bits_of(v, n);
      REQUIRE(evaluate(c, b) == xor_fold(b));
    }
  }
  CHECK_THROWS(build_parity_circuit(0));
}

TEST_CASE("OR tree and degenerate circuits") {
  const Circuit c = parse_circuit("inputs 3 ; gate 4 OR 1 2 3 ; output 4");
  CHECK(desc_stats(c).desc_length == 7);
  const Circuit pass = parse_circuit("inputs 1 ; output 1");
  CHECK(desc_stats(pass).depth == 0);
  CHECK(evaluate(pass, Bits{1}) == 1);
  for (std::uint32_t n : {1u, 4u, 5u, 8u, 32u}) {
    const Circuit t = build_or_tree(n);
    CHECK(validate(t).empty());
    CHECK(evaluate(t, Bits(n, 0)) == 0);
    Bits one(n, 0);
    one[n - 1] = 1;
    CHECK(evaluate(t, one) == 1);
  }
}

TEST_CASE("round trip on builders and random circuits") {
  for (std::uint32_t n = 1; n <= 6; ++n) {
    const Circuit c = build_parity_circuit(n);
    CHECK(parse_circuit(serialize_circuit(c)) == c);
  }
  for (Family f : {Family::AC0, Family::TC0}) {
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
      RandomCircuitParams prm;
      prm.family = f;
      prm.n_inputs = 1 + seed % 7;
      prm.depth = 1 + seed % 3;
      prm.max_fanin = 1 + seed % 5;
      prm.size_budget = prm.depth + seed % 12;
      prm.seed = seed;
      const Circuit c = random_circuit(prm);
      INFO(serialize_circuit(c));
      CHECK(validate(c).empty());
      CHECK(parse_circuit(serialize_circuit(c)) == c);
      CHECK(desc_stats(c).depth == prm.depth);
      CHECK(c == random_circuit(prm));
      if (f == Family::AC0) {
        CHECK(std::none_of(c.vertices.begin(), c.vertices.end(),
                           [](const Vertex& v) { return !v.is_input && v.type == GateType::Thresh; }));
      }
    }
  }
}

TEST_CASE("layerize is minimal") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    RandomCircuitParams prm;
    prm.n_inputs = 5;
    prm.depth = 3;
    prm.size_budget = 12;
    prm.seed = seed;
    const Circuit c = random_circuit(prm);
    const auto layer = layerize(c);
    for (std::size_t k = c.n_inputs; k < c.vertices.size(); ++k) {
      std::size_t max_src = 0;
      for (const Edge& e : c.vertices[k].args) max_src = std::max(max_src, layer[c.index_of(e.source)]);
      CHECK(layer[k] == max_src + 1);
    }
  }
}

TEST_CASE("De Morgan spot check") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RandomCircuitParams prm;
    prm.n_inputs = 4;
    prm.depth = 2;
    prm.seed = seed;
    const Circuit base = random_circuit(prm);
    const std::uint32_t n = base.n_inputs;
    // Wrap two gates a, b of the base in AND(a, b) and in NOT(OR(NOT a, NOT b)).
    Circuit w1 = base, w2 = base;
    const VertexId a = base.vertices[n].id;
    const VertexId b = base.output_id;
    VertexId next = base.max_id() + 1;
    w1.vertices.push_back(Vertex{next, false, GateType::And, {{a, 1}, {b, 1}}});
    w1.output_id = next;
    w2.vertices.push_back(Vertex{next, false, GateType::Not, {{a, 1}}});
    w2.vertices.push_back(Vertex{next + 1, false, GateType::Not, {{b, 1}}});
    w2.vertices.push_back(Vertex{next + 2, false, GateType::Or, {{next, 1}, {next + 1, 1}}});
    w2.output_id = next + 2;
    for (std::uint64_t v = 0; v < 16; ++v) {
      const Bits x = bits_of(v, n);
      CHECK(evaluate(w1, x) == 1 - evaluate(w2, x));
    }
  }
}

TEST_CASE("validation rules") {
  Circuit c = parse_circuit("inputs 2 ; gate 3 OR 1 2 ; output 3");
  c.vertices[2].args.clear();
  CHECK_FALSE(validate(c).empty());
  Circuit t = build_parity_circuit(2);
  t.family = Family::AC0;
  CHECK_FALSE(validate(t).empty());
  // TC0 tolerates duplicate edges.
  CHECK_NOTHROW(parse_circuit("inputs 1 ; gate 2 THRESH GT 1 +1 +1 ; output 2"));
  CHECK(evaluate(parse_circuit("inputs 1 ; gate 2 THRESH GT 1 +1 +1 ; output 2"), Bits{1}) == 1);
}

TEST_CASE("hash and bits helpers") {
  CHECK(circuit_hash(build_parity_circuit(4)) == circuit_hash(build_parity_circuit(4)));
  CHECK(circuit_hash(build_parity_circuit(4)) != circuit_hash(build_parity_circuit(5)));
  CHECK(parse_bits("10_11") == Bits{1, 0, 1, 1});
  CHECK(bits_to_string(Bits{1, 0, 1}) == "101");
  CHECK_THROWS(parse_bits("12"));
}
