#pragma once

// Independent references for fixed-point arithmetic, shared by the unit tests
// and the acceptance runner.

#include <mpfr.h>

#include <vector>

#include "pausecc/fixedpoint.hpp"

namespace pausecc::oracle {

using fp::Fp;
using fp::Precision;
using fp::Rational;
using fp::to_rational;

inline std::vector<Fp> grid(int p) {
  const Precision prec(p);
  std::vector<Fp> out;
  for (std::int64_t r = -prec.max_raw(); r <= prec.max_raw(); ++r) out.push_back(Fp::from_raw(prec, r));
  return out;
}

// Reference [x]_p by scanning the whole grid for the nearest element, ties
// resolved away from zero. Independent of round_to's integer arithmetic.
inline Fp scan_round(int p, const Rational& x) {
  const auto g = grid(p);
  Fp best = g.front();
  Rational best_d = -1;
  for (const Fp& f : g) {
    Rational d = to_rational(f) - x;
    if (d < 0) d = -d;
    const bool closer = best_d < 0 || d < best_d;
    const bool tie_away = d == best_d && (x >= 0 ? f > best : f < best);
    if (closer || tie_away) {
      best = f;
      best_d = d;
    }
  }
  return best;
}

// Correctly rounded e^x on the F_p grid via MPFR at 512 bits.
inline Fp mpfr_exp(const Fp& a) {
  const int p = a.bits();
  mpfr_t x, scaled;
  mpfr_init2(x, 512);
  mpfr_init2(scaled, 512);
  mpfr_set_si(x, static_cast<long>(a.raw()), MPFR_RNDN);
  mpfr_div_2ui(x, x, static_cast<unsigned long>(p), MPFR_RNDN);
  mpfr_exp(x, x, MPFR_RNDN);
  mpfr_mul_2ui(scaled, x, static_cast<unsigned long>(p), MPFR_RNDN);
  mpfr_round(scaled, scaled);
  const Precision prec(p);
  std::int64_t raw = prec.max_raw();
  if (mpfr_cmp_si(scaled, static_cast<long>(prec.max_raw())) < 0) raw = mpfr_get_si(scaled, MPFR_RNDN);
  mpfr_clear(x);
  mpfr_clear(scaled);
  return Fp::from_raw(prec, raw);
}

}  // namespace pausecc::oracle
