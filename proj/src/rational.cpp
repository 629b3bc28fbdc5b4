#include "cm4fq/rational.hpp"

#include <algorithm>
#include <cctype>

namespace cm4fq {

namespace {

// Base-10 only; the cpp_int string constructor would read leading zeros as
// octal.
BigInt parse_integer(const std::string& s, const std::string& original) {
  if (s.empty()) throw std::invalid_argument("malformed rational literal: " + original);
  size_t start = 0;
  bool negative = false;
  if (s[0] == '-' || s[0] == '+') {
    negative = s[0] == '-';
    start = 1;
  }
  if (start == s.size()) throw std::invalid_argument("malformed rational literal: " + original);
  BigInt value = 0;
  for (size_t i = start; i < s.size(); ++i) {
    if (s[i] < '0' || s[i] > '9')
      throw std::invalid_argument("malformed rational literal: " + original);
    value = value * 10 + (s[i] - '0');
  }
  return negative ? BigInt(-value) : value;
}

}  // namespace

Rat parse_rational(const std::string& text) {
  std::string s = text;
  s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); }),
          s.end());
  if (s.empty()) throw std::invalid_argument("empty rational literal");

  auto slash = s.find('/');
  if (slash != std::string::npos) {
    BigInt num = parse_integer(s.substr(0, slash), text);
    BigInt den = parse_integer(s.substr(slash + 1), text);
    if (den == 0) throw std::invalid_argument("rational with zero denominator: " + text);
    return Rat(num, den);
  }

  auto dot = s.find('.');
  if (dot == std::string::npos) return Rat(parse_integer(s, text));

  std::string digits = s;
  digits.erase(dot, 1);
  BigInt num = parse_integer(digits, text);
  BigInt den = 1;
  for (size_t i = dot; i < s.size() - 1; ++i) den *= 10;
  return Rat(num, den);
}

std::string to_decimal_string(const Rat& value, int significant_digits) {
  if (value == 0) return "0";
  BigInt num = numerator(value);
  BigInt den = denominator(value);
  std::string sign;
  if (num < 0) {
    sign = "-";
    num = -num;
  }

  BigInt integral = num / den;
  BigInt rem = num % den;
  std::string int_part = integral.str();

  int remaining = significant_digits;
  if (integral != 0) remaining -= static_cast<int>(int_part.size());
  if (rem == 0 || remaining <= 0) return sign + int_part;

  std::string frac;
  bool seen_nonzero = integral != 0;
  while (rem != 0 && remaining > 0) {
    rem *= 10;
    BigInt digit = rem / den;
    rem %= den;
    frac += static_cast<char>('0' + digit.convert_to<int>());
    if (digit != 0) seen_nonzero = true;
    if (seen_nonzero) --remaining;
  }
  // drop trailing zeros in the fraction
  while (!frac.empty() && frac.back() == '0') frac.pop_back();
  if (frac.empty()) return sign + int_part;
  return sign + int_part + "." + frac;
}

std::string to_fraction_string(const Rat& value) {
  if (denominator(value) == 1) return numerator(value).str();
  return numerator(value).str() + "/" + denominator(value).str();
}

}  // namespace cm4fq
