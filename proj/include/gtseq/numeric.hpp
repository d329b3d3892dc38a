#pragma once

// Scalar backends shared by every module: 64-bit floats for production runs
// and exact rationals for oracles.

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <type_traits>

namespace gtseq {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class IdentifiabilityError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class InsufficientOrderError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

template <class S>
inline constexpr bool is_exact_v = std::is_same_v<S, Rational>;

template <class S>
double to_double(const S& x) {
  if constexpr (is_exact_v<S>) {
    return x.template convert_to<double>();
  } else {
    return static_cast<double>(x);
  }
}

template <class S>
S abs_value(const S& x) {
  return x < S(0) ? S(-x) : x;
}

// base^n for any integer n; exact for rationals.
template <class S>
S ipow(S base, long n) {
  if (n < 0) {
    if (base == S(0)) throw DomainError("ipow: zero to a negative power");
    base = S(1) / base;
    n = -n;
  }
  S result(1);
  while (n > 0) {
    if (n & 1) result *= base;
    base *= base;
    n >>= 1;
  }
  return result;
}

inline BigInt integer_root_floor(const BigInt& x, unsigned k) {
  if (x < 0) throw DomainError("integer_root_floor: negative argument");
  if (x < 2 || k == 1) return x;
  // Binary search on [0, 2^(bits/k + 1)].
  unsigned bits = static_cast<unsigned>(boost::multiprecision::msb(x)) + 1;
  BigInt lo = 0;
  BigInt hi = BigInt(1) << (bits / k + 1);
  while (lo < hi) {
    BigInt mid = (lo + hi + 1) >> 1;
    if (boost::multiprecision::pow(mid, k) <= x) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  return lo;
}

// Exact k-th root of a nonnegative rational, if it is itself rational.
inline std::optional<Rational> exact_root(const Rational& x, int k) {
  if (k < 1) throw DomainError("exact_root: k must be >= 1");
  if (x < 0) return std::nullopt;
  if (k == 1) return x;
  BigInt num = boost::multiprecision::numerator(x);
  BigInt den = boost::multiprecision::denominator(x);
  BigInt rn = integer_root_floor(num, static_cast<unsigned>(k));
  BigInt rd = integer_root_floor(den, static_cast<unsigned>(k));
  if (boost::multiprecision::pow(rn, static_cast<unsigned>(k)) != num ||
      boost::multiprecision::pow(rd, static_cast<unsigned>(k)) != den) {
    return std::nullopt;
  }
  return Rational(rn, rd);
}

// x^(1/k). Rational inputs must be perfect k-th powers.
template <class S>
S kth_root(const S& x, int k) {
  if (k < 1) throw DomainError("kth_root: k must be >= 1");
  if (x < S(0)) throw DomainError("kth_root: negative radicand");
  if constexpr (is_exact_v<S>) {
    auto r = exact_root(x, k);
    if (!r) {
      throw DomainError("kth_root: " + x.str() + " has no rational root of order " +
                        std::to_string(k));
    }
    return *r;
  } else {
    using std::pow;
    return k == 1 ? x : S(pow(x, S(1) / S(k)));
  }
}

// Neumaier-compensated running sum; plain addition for exact scalars.
template <class S>
class Accumulator {
 public:
  void add(const S& x) {
    if constexpr (is_exact_v<S>) {
      sum_ += x;
    } else {
      S t = sum_ + x;
      if (abs_value(sum_) >= abs_value(x)) {
        comp_ += (sum_ - t) + x;
      } else {
        comp_ += (x - t) + sum_;
      }
      sum_ = t;
    }
  }
  S value() const {
    if constexpr (is_exact_v<S>) {
      return sum_;
    } else {
      return sum_ + comp_;
    }
  }

 private:
  S sum_{0};
  S comp_{0};
};

// Parses a plain decimal ("0.95", "-3", "1e-3") into an exact rational.
inline Rational parse_decimal(const std::string& text) {
  std::size_t i = 0;
  bool negative = false;
  if (i < text.size() && (text[i] == '+' || text[i] == '-')) negative = text[i++] == '-';
  BigInt digits = 0;
  long scale = 0;
  bool any = false;
  bool dot = false;
  for (; i < text.size(); ++i) {
    char ch = text[i];
    if (ch >= '0' && ch <= '9') {
      digits = digits * 10 + (ch - '0');
      if (dot) --scale;
      any = true;
    } else if (ch == '.' && !dot) {
      dot = true;
    } else {
      break;
    }
  }
  if (i < text.size() && (text[i] == 'e' || text[i] == 'E')) {
    std::size_t used = 0;
    long e = 0;
    try {
      e = std::stol(text.substr(i + 1), &used);
    } catch (const std::exception&) {
      throw DomainError("parse_decimal: malformed exponent in '" + text + "'");
    }
    if (used != text.size() - i - 1) throw DomainError("parse_decimal: trailing characters in '" + text + "'");
    scale += e;
    i = text.size();
  }
  if (!any || i != text.size()) throw DomainError("parse_decimal: not a decimal number: '" + text + "'");
  Rational r(digits);
  if (scale > 0) r *= Rational(boost::multiprecision::pow(BigInt(10), static_cast<unsigned>(scale)));
  if (scale < 0) r /= Rational(boost::multiprecision::pow(BigInt(10), static_cast<unsigned>(-scale)));
  return negative ? Rational(-r) : r;
}

// SplitMix64 finalizer; used to derive independent per-replicate seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace gtseq
