#include "pausecc/fixedpoint.hpp"

#include <cctype>
#include <mutex>
#include <shared_mutex>
#include <unordered_map>

namespace pausecc::fp {

using boost::multiprecision::cpp_int;

namespace detail {

void throw_mismatch(int a, int b) {
  throw PrecisionMismatch("precision mismatch: p=" + std::to_string(a) + " vs p=" + std::to_string(b));
}

}  // namespace detail

Fp Fp::from_raw(Precision p, std::int64_t raw) {
  if (raw > p.max_raw() || raw < -p.max_raw()) {
    throw std::out_of_range("raw value " + std::to_string(raw) + " outside F_" + std::to_string(p.bits()));
  }
  return Fp(p.bits(), raw);
}

Fp Fp::from_int(Precision p, std::int64_t v) {
  return Fp(p.bits(), detail::clamp_raw(static_cast<__int128>(v) << p.bits(), p.bits()));
}

namespace {

// Nearest integer to num / den for den > 0, ties away from zero.
cpp_int round_div(const cpp_int& num, const cpp_int& den) {
  const bool negative = num < 0;
  cpp_int m = negative ? cpp_int(-num) : num;
  cpp_int q = m / den;
  cpp_int r = m % den;
  if (2 * r >= den) ++q;
  return negative ? cpp_int(-q) : q;
}

Fp from_big_raw(Precision p, const cpp_int& raw) {
  const cpp_int lim(p.max_raw());
  if (raw > lim) return Fp::max(p);
  if (raw < -lim) return neg(Fp::max(p));
  return Fp::from_raw(p, static_cast<std::int64_t>(raw));
}

}  // namespace

Fp round_to(Precision p, const Rational& x) {
  const cpp_int num = boost::multiprecision::numerator(x) << p.bits();
  const cpp_int den = boost::multiprecision::denominator(x);
  return from_big_raw(p, round_div(num, den));
}

Rational to_rational(const Fp& a) {
  return Rational(cpp_int(a.raw()), cpp_int(1) << a.bits());
}

Fp div(const Fp& a, const Fp& b) {
  detail::require_same(a, b);
  if (b.is_zero()) throw DivisionByZero("fixed-point division by zero");
  const int p = a.bits();
  __int128 num = static_cast<__int128>(a.raw()) << p;
  __int128 den = b.raw();
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const bool negative = num < 0;
  const __int128 m = negative ? -num : num;
  __int128 q = m / den;
  if (2 * (m % den) >= den) ++q;
  return make_unchecked(p, detail::clamp_raw(negative ? -q : q, p));
}

namespace {

// Lower and upper bounds of e^(a / 2^p) * 2^w for a >= 0, from the Taylor
// series with floor/ceil truncation of every term.
void exp_nonneg_bounds(std::int64_t a, int p, int w, cpp_int& lo, cpp_int& hi) {
  const cpp_int one = cpp_int(1) << w;
  cpp_int term_lo = one, term_hi = one;
  lo = one;
  hi = one;
  if (a == 0) return;
  const cpp_int scale = cpp_int(1) << p;
  for (std::int64_t k = 1;; ++k) {
    const cpp_int den = scale * k;
    term_lo = (term_lo * a) / den;
    term_hi = (term_hi * a + den - 1) / den;
    lo += term_lo;
    hi += term_hi;
    // Once (k + 1) > 2y every further term at most halves, so the tail is
    // bounded by the current upper term.
    if ((cpp_int(k + 1) << p) > 2 * cpp_int(a) && term_hi <= 1) {
      hi += 2;
      return;
    }
  }
}

std::int64_t exp_raw_uncached(int p, std::int64_t a) {
  const Precision prec(p);
  if (a == 0) return prec.one_raw();
  // e^x > 2^(p+1) > B_p for x >= p + 1; e^x < 2^-(p+1) for x <= -(p + 1).
  const __int128 cutoff = static_cast<__int128>(p + 1) << p;
  if (a >= cutoff) return prec.max_raw();
  if (a <= -cutoff) return 0;

  const std::int64_t mag = a < 0 ? -a : a;
  for (int guard = 64;; guard *= 2) {
    const int w = p + guard;
    cpp_int lo, hi;
    exp_nonneg_bounds(mag, p, w, lo, hi);
    if (a < 0) {
      const cpp_int num = cpp_int(1) << (2 * w);
      cpp_int new_lo = num / hi;
      cpp_int new_hi = (num + lo - 1) / lo;
      lo = std::move(new_lo);
      hi = std::move(new_hi);
    }
    const int shift = w - p;
    const cpp_int half = cpp_int(1) << (shift - 1);
    cpp_int r_lo = (lo + half) >> shift;
    cpp_int r_hi = (hi + half) >> shift;
    const cpp_int lim(prec.max_raw());
    if (r_lo > lim) r_lo = lim;
    if (r_hi > lim) r_hi = lim;
    if (r_lo == r_hi) return static_cast<std::int64_t>(r_lo);
  }
}

class ExpCache {
 public:
  std::int64_t get(int p, std::int64_t a) {
    const Key key{p, a};
    {
      std::shared_lock lock(mutex_);
      auto it = table_.find(key);
      if (it != table_.end()) return it->second;
    }
    const std::int64_t r = exp_raw_uncached(p, a);
    std::unique_lock lock(mutex_);
    table_.emplace(key, r);
    return r;
  }

 private:
  struct Key {
    int p;
    std::int64_t a;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept {
      std::uint64_t h = static_cast<std::uint64_t>(k.a) * 0x9E3779B97F4A7C15ull;
      return static_cast<std::size_t>(h ^ (static_cast<std::uint64_t>(k.p) << 58));
    }
  };

  std::shared_mutex mutex_;
  std::unordered_map<Key, std::int64_t, KeyHash> table_;
};

ExpCache& exp_cache() {
  static ExpCache cache;
  return cache;
}

}  // namespace

Fp exp(const Fp& a) {
  return make_unchecked(a.bits(), exp_cache().get(a.bits(), a.raw()));
}

Fp iterated_sum(Precision p, std::span<const Fp> xs) {
  Fp acc = Fp::zero(p);
  for (const Fp& x : xs) acc = add(acc, x);
  return acc;
}

Fp dot(Precision p, std::span<const Fp> xs, std::span<const Fp> ys) {
  if (xs.size() != ys.size()) {
    throw std::invalid_argument("dot: length mismatch " + std::to_string(xs.size()) + " vs " +
                                std::to_string(ys.size()));
  }
  Fp acc = Fp::zero(p);
  for (std::size_t i = 0; i < xs.size(); ++i) acc = add(acc, mul(xs[i], ys[i]));
  return acc;
}

std::string to_string(const Fp& a) {
  const int p = a.bits();
  const std::uint64_t k = a.magnitude();
  std::string out = a.raw() < 0 ? "-" : "";
  out += std::to_string(k >> p);
  std::uint64_t frac = k & ((std::uint64_t{1} << p) - 1);
  if (frac != 0) {
    out += '.';
    while (frac != 0) {
      frac *= 10;
      out += static_cast<char>('0' + (frac >> p));
      frac &= (std::uint64_t{1} << p) - 1;
    }
  }
  return out;
}

Fp parse_decimal(Precision p, std::string_view text, bool round) {
  const std::string original(text);
  auto fail = [&](const std::string& why) -> Fp {
    throw std::invalid_argument("cannot parse \"" + original + "\" as F_" + std::to_string(p.bits()) + ": " + why);
  };
  std::size_t i = 0;
  bool negative = false;
  if (i < text.size() && (text[i] == '-' || text[i] == '+')) negative = text[i++] == '-';
  cpp_int num = 0;
  cpp_int den = 1;
  bool digits = false, point = false;
  for (; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '.' && !point) {
      point = true;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      digits = true;
      num = num * 10 + (c - '0');
      if (point) den *= 10;
    } else {
      return fail("unexpected character");
    }
  }
  if (!digits) return fail("no digits");
  if (negative) num = -num;
  const Rational value(num, den);
  if (round) return round_to(p, value);
  const cpp_int scaled = boost::multiprecision::numerator(value) << p.bits();
  const cpp_int& d = boost::multiprecision::denominator(value);
  if (scaled % d != 0) return fail("value is not on the 2^-" + std::to_string(p.bits()) + " grid");
  const cpp_int raw = scaled / d;
  if (raw > p.max_raw() || raw < -p.max_raw()) return fail("value exceeds B_p");
  return Fp::from_raw(p, static_cast<std::int64_t>(raw));
}

}  // namespace pausecc::fp
