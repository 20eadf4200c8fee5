#pragma once

// Saturating fixed-point arithmetic over F_p: values c * k * 2^-p with
// c in {-1, +1} and 0 <= k <= 2^(2p) - 1. Every operation rounds the exact
// result to the nearest representable value (ties away from zero) and clamps
// to [-B_p, B_p] where B_p = 2^p - 2^-p. No binary floating point is used.

#include <compare>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include <boost/multiprecision/cpp_int.hpp>

namespace pausecc::fp {

using Rational = boost::multiprecision::cpp_rational;

inline constexpr int kMaxPrecision = 30;

class PrecisionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DivisionByZero : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class Precision {
 public:
  explicit Precision(int bits) : bits_(bits) {
    if (bits < 1 || bits > kMaxPrecision) {
      throw std::invalid_argument("precision must be in [1, " + std::to_string(kMaxPrecision) +
                                  "], got " + std::to_string(bits));
    }
  }

  int bits() const noexcept { return bits_; }
  // Raw value of 1.0, i.e. 2^p.
  std::int64_t one_raw() const noexcept { return std::int64_t{1} << bits_; }
  // Largest magnitude k = 2^(2p) - 1, so B_p = max_raw * 2^-p.
  std::int64_t max_raw() const noexcept { return (std::int64_t{1} << (2 * bits_)) - 1; }

  friend bool operator==(Precision, Precision) = default;

 private:
  int bits_;
};

class Fp {
 public:
  // raw = sign * k. Throws std::out_of_range when |raw| exceeds max_raw.
  static Fp from_raw(Precision p, std::int64_t raw);
  // Integer value, saturated to +-B_p.
  static Fp from_int(Precision p, std::int64_t v);
  static Fp zero(Precision p) noexcept { return Fp(p.bits(), 0); }
  static Fp one(Precision p) noexcept { return Fp(p.bits(), p.one_raw()); }
  static Fp max(Precision p) noexcept { return Fp(p.bits(), p.max_raw()); }
  static Fp ulp(Precision p) noexcept { return Fp(p.bits(), 1); }

  std::int64_t raw() const noexcept { return raw_; }
  Precision precision() const noexcept { return Precision(bits_); }
  int bits() const noexcept { return bits_; }
  // Zero is canonically positive.
  int sign() const noexcept { return raw_ < 0 ? -1 : 1; }
  std::uint64_t magnitude() const noexcept {
    return static_cast<std::uint64_t>(raw_ < 0 ? -raw_ : raw_);
  }
  bool is_zero() const noexcept { return raw_ == 0; }

  // Exact value comparison; operands may have different precisions.
  friend bool operator==(const Fp& a, const Fp& b) noexcept { return compare(a, b) == 0; }
  friend std::strong_ordering operator<=>(const Fp& a, const Fp& b) noexcept {
    return compare(a, b) <=> 0;
  }

 private:
  friend Fp make_unchecked(int bits, std::int64_t raw) noexcept;
  Fp(int bits, std::int64_t raw) noexcept : raw_(raw), bits_(bits) {}

  static int compare(const Fp& a, const Fp& b) noexcept {
    __int128 x = static_cast<__int128>(a.raw_) << b.bits_;
    __int128 y = static_cast<__int128>(b.raw_) << a.bits_;
    return x < y ? -1 : (x > y ? 1 : 0);
  }

  std::int64_t raw_;
  int bits_;
};

inline Fp make_unchecked(int bits, std::int64_t raw) noexcept { return Fp(bits, raw); }

namespace detail {

[[noreturn]] void throw_mismatch(int a, int b);

inline void require_same(const Fp& a, const Fp& b) {
  if (a.bits() != b.bits()) throw_mismatch(a.bits(), b.bits());
}

inline std::int64_t clamp_raw(__int128 v, int bits) noexcept {
  const __int128 m = (static_cast<__int128>(1) << (2 * bits)) - 1;
  if (v > m) return static_cast<std::int64_t>(m);
  if (v < -m) return static_cast<std::int64_t>(-m);
  return static_cast<std::int64_t>(v);
}

// Rounds n / 2^shift to the nearest integer, ties away from zero.
inline __int128 round_shift(__int128 n, int shift) noexcept {
  if (shift == 0) return n;
  const bool neg = n < 0;
  unsigned __int128 m = neg ? static_cast<unsigned __int128>(-n) : static_cast<unsigned __int128>(n);
  unsigned __int128 q = m >> shift;
  unsigned __int128 rem = m & ((static_cast<unsigned __int128>(1) << shift) - 1);
  if (rem >= (static_cast<unsigned __int128>(1) << (shift - 1))) ++q;
  return neg ? -static_cast<__int128>(q) : static_cast<__int128>(q);
}

}  // namespace detail

// [x]_p for an exact rational x.
Fp round_to(Precision p, const Rational& x);
Rational to_rational(const Fp& a);

inline Fp add(const Fp& a, const Fp& b) {
  detail::require_same(a, b);
  return make_unchecked(a.bits(), detail::clamp_raw(static_cast<__int128>(a.raw()) + b.raw(), a.bits()));
}

inline Fp neg(const Fp& a) noexcept { return make_unchecked(a.bits(), -a.raw()); }

inline Fp sub(const Fp& a, const Fp& b) { return add(a, neg(b)); }

inline Fp mul(const Fp& a, const Fp& b) {
  detail::require_same(a, b);
  if (a.raw() == 0 || b.raw() == 0) return Fp::zero(a.precision());
  const __int128 prod = static_cast<__int128>(a.raw()) * b.raw();
  return make_unchecked(a.bits(), detail::clamp_raw(detail::round_shift(prod, a.bits()), a.bits()));
}

// Throws DivisionByZero when b is zero.
Fp div(const Fp& a, const Fp& b);

// Correctly rounded e^a; saturates at B_p.
Fp exp(const Fp& a);

inline Fp relu(const Fp& a) noexcept { return a.raw() < 0 ? Fp::zero(a.precision()) : a; }

// Left-to-right fold of add; the result depends on the order of xs.
Fp iterated_sum(Precision p, std::span<const Fp> xs);

// iterated_sum of the rounded termwise products, in index order.
Fp dot(Precision p, std::span<const Fp> xs, std::span<const Fp> ys);

// Exact decimal rendering, e.g. "-1.25", "3", "0.0625".
std::string to_string(const Fp& a);

// Parses an exact decimal. Off-grid or out-of-range values are rejected
// unless round is set, in which case they are rounded with round_to.
Fp parse_decimal(Precision p, std::string_view text, bool round = false);

}  // namespace pausecc::fp
