#include <doctest.h>

#include "pausecc/encoder.hpp"

using namespace pausecc;
using namespace pausecc::encoder;
using fp::Fp;
using fp::Precision;

TEST_CASE("sbin and interleave") {
  CHECK(sbin(0, 3) == std::vector<int>{-1, -1, -1});
  CHECK(sbin(5, 3) == std::vector<int>{1, -1, 1});
  CHECK(sbin(1, 1) == std::vector<int>{1});
  CHECK(sbin(4, 3) == std::vector<int>{1, -1, -1});
  CHECK(interleave(std::vector<int>{1, 2}, std::vector<int>{3, 4}) == std::vector<int>{1, 3, 2, 4});
  CHECK(interleave(std::vector<char>{'a'}, std::vector<char>{'b'}) == std::vector<char>{'a', 'b'});
  CHECK(index_width(0) == 1);
  CHECK(index_width(1) == 1);
  CHECK(index_width(2) == 2);
  CHECK(index_width(7) == 3);
  CHECK(index_width(8) == 4);
}

TEST_CASE("key/query dot products") {
  const Precision p(8);
  const int L = 3;
  auto d = [&](int i, int j) {
    return fp::dot(p, key_query(i, L, p).key, key_query(j, L, p).query);
  };
  CHECK(d(3, 3) == Fp::zero(p));
  CHECK(d(1, 2) == fp::neg(Fp::max(p)));
  for (int i = 1; i < 8; ++i) CHECK(d(0, i) == fp::neg(Fp::max(p)));
  CHECK_THROWS_AS(key_query(8, 3, p), std::out_of_range);
  const auto kq = key_query(5, L, p);
  CHECK(kq.key.size() == 6);
  CHECK(kq.query[0] == Fp::max(p));
  CHECK(kq.query[1] == fp::neg(Fp::max(p)));
  CHECK(kq.key[3] == Fp::one(p));
}

TEST_CASE("orthogonality holds at every precision") {
  for (int p = 1; p <= 12; ++p) {
    const auto r = check_orthogonality(5, Precision(p), 31, true);
    CHECK(r.ok);
  }
  const auto sampled = check_orthogonality(9, Precision(12), 300, false);
  CHECK(sampled.ok);
}

TEST_CASE("layout of the two-input AND") {
  const auto c = circuit::parse_circuit("inputs 2 ; gate 3 AND 1 2 ; output 3");
  const Precision p(8);
  const Layout lay = layout(c, p);
  CHECK(lay.width == 2);
  CHECK(lay.dim() == 20);
  REQUIRE(lay.tokens.size() == 5);
  CHECK(lay.tokens[0].kind == TokenKind::Input);
  CHECK(lay.tokens[2].kind == TokenKind::Arg);
  CHECK(lay.tokens[2].source == 1);
  CHECK(lay.tokens[3].source == 2);
  CHECK(lay.tokens[4].kind == TokenKind::Gate);
  // AND args carry the negation flag; the gate token the AND flag.
  CHECK(lay.tokens[2].flags[0] == Fp::one(p));
  CHECK(lay.tokens[2].flags[2] == Fp::one(p));
  CHECK(lay.tokens[4].flags[1] == Fp::one(p));
  for (const auto& t : lay.tokens) {
    CHECK(t.embedding().size() == lay.dim());
    CHECK(t.value.is_zero());
  }
  // Arg pair1 key is the privileged index, gate pair2 key likewise.
  CHECK(lay.tokens[2].pair1.key == key_query(0, 2, p).key);
  CHECK(lay.tokens[2].pair1.query == key_query(1, 2, p).query);
  CHECK(lay.tokens[2].pair2.key == key_query(3, 2, p).key);
  CHECK(lay.tokens[4].pair2.key == key_query(0, 2, p).key);
  CHECK(lay.tokens[4].pair2.query == key_query(3, 2, p).query);
  CHECK(lay.tokens[0].pair1.key == lay.tokens[0].pair2.key);
}

TEST_CASE("OR and NOT flags") {
  const auto c = circuit::parse_circuit("inputs 2 ; gate 3 NOT 1 ; gate 4 OR 3 2 ; output 4");
  const Precision p(8);
  const Layout lay = layout(c, p);
  REQUIRE(lay.tokens.size() == 7);
  CHECK(lay.tokens[2].flags[0] == Fp::one(p));  // NOT arg negates
  CHECK(lay.tokens[3].flags[1].is_zero());       // NOT gate takes the OR path
  CHECK(lay.tokens[4].flags[0].is_zero());       // OR arg
  CHECK(lay.tokens[6].flags[1].is_zero());
}

TEST_CASE("threshold fields") {
  // LT theta=1 over two args normalizes to GT theta=-1: field -[1/2]_p.
  const auto c = circuit::parse_circuit("inputs 2 ; gate 3 THRESH LT 1 +1 +2 ; output 3");
  for (int p : {2, 4, 8}) {
    const Precision prec(p);
    const Layout lay = layout(c, prec);
    CHECK(lay.tokens[4].flags[1] == fp::parse_decimal(prec, "-0.5"));
    CHECK(lay.tokens[2].flags[0] == Fp::one(prec));
    CHECK(lay.tokens[3].flags[0] == Fp::one(prec));
  }
  const auto s = circuit::parse_circuit("inputs 2 ; gate 3 THRESH GT 0 +1 -2 ; output 3");
  const Layout lay = layout(s, Precision(8));
  CHECK(lay.tokens[2].flags[0].is_zero());
  CHECK(lay.tokens[3].flags[0] == Fp::one(Precision(8)));

  CHECK(clamp_threshold(100, 3) == 3);
  CHECK(clamp_threshold(-100, 3) == -4);
  CHECK(clamp_threshold(2, 3) == 2);

  // The field is theta times the exact attention weight, not [theta/m]_p:
  // m = 6, theta = 5, p = 8 differ (213 vs 215 ulps).
  const Precision p8(8);
  CHECK(threshold_field(5, 6, p8).raw() == 5 * attention_unit_weight(6, p8).raw());
  CHECK(fp::round_to(p8, fp::Rational(5, 6)).raw() == 213);
  CHECK(threshold_field(5, 6, p8).raw() == 215);
}

TEST_CASE("token count equals description length") {
  for (std::uint32_t n = 1; n <= 8; ++n) {
    const auto c = circuit::build_parity_circuit(n);
    CHECK(layout(c, Precision(10)).tokens.size() == circuit::desc_stats(c).desc_length);
  }
}
