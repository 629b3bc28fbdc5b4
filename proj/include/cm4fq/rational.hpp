#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace cm4fq {

// All tags, work levels, rates and event times are exact rationals so that
// tie-breaking and the throughput bounds can be checked bit-exactly.
using Rat = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

inline double to_double(const Rat& r) { return r.convert_to<double>(); }

// Parses "7", "-3/4" or a decimal like "0.0096" into an exact rational.
Rat parse_rational(const std::string& text);

// Decimal rendering with a fixed number of significant digits, done by long
// division so the output is identical on every platform.
std::string to_decimal_string(const Rat& value, int significant_digits = 12);

// Compact exact form: integers render without a denominator.
std::string to_fraction_string(const Rat& value);

/// A server work level: a finite rational or the distinguished infinity.
/// Infinity compares greater than every finite value.
class WorkLevel {
 public:
  WorkLevel() : finite_(Rat(0)), infinite_(false) {}
  explicit WorkLevel(Rat v) : finite_(std::move(v)), infinite_(false) {}
  static WorkLevel infinity() {
    WorkLevel w;
    w.infinite_ = true;
    return w;
  }

  bool is_infinite() const { return infinite_; }
  const Rat& value() const {
    if (infinite_) throw std::logic_error("WorkLevel: value() on infinite level");
    return finite_;
  }

  friend bool operator==(const WorkLevel& a, const WorkLevel& b) {
    if (a.infinite_ || b.infinite_) return a.infinite_ == b.infinite_;
    return a.finite_ == b.finite_;
  }
  friend bool operator<(const WorkLevel& a, const WorkLevel& b) {
    if (a.infinite_) return false;
    if (b.infinite_) return true;
    return a.finite_ < b.finite_;
  }
  friend bool operator!=(const WorkLevel& a, const WorkLevel& b) { return !(a == b); }
  friend bool operator>(const WorkLevel& a, const WorkLevel& b) { return b < a; }
  friend bool operator<=(const WorkLevel& a, const WorkLevel& b) { return !(b < a); }
  friend bool operator>=(const WorkLevel& a, const WorkLevel& b) { return !(a < b); }

  friend bool operator<(const WorkLevel& a, const Rat& b) { return !a.infinite_ && a.finite_ < b; }
  friend bool operator>=(const WorkLevel& a, const Rat& b) { return !(a < b); }

  std::string str() const { return infinite_ ? "inf" : to_fraction_string(finite_); }

 private:
  Rat finite_;
  bool infinite_;
};

}  // namespace cm4fq
