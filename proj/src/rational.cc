#include "topdown/rational.h"

#include <limits>
#include <optional>
#include <string>

#include "topdown/errors.h"

namespace topdown {

using boost::multiprecision::cpp_int;

Rational MakeRational(std::int64_t numerator, std::int64_t denominator) {
  if (denominator == 0) throw ValidationError("rational with zero denominator");
  return Rational(cpp_int(numerator), cpp_int(denominator));
}

namespace {

// cpp_int's string constructor reads a leading 0 as octal and 0x as hex, so
// decimal integers are checked and stripped of leading zeros first.
std::optional<cpp_int> ParseDecimalInteger(std::string s) {
  bool negative = false;
  if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
    negative = s[0] == '-';
    s.erase(0, 1);
  }
  if (s.empty()) return std::nullopt;
  for (char c : s) {
    if (c < '0' || c > '9') return std::nullopt;
  }
  const auto first = s.find_first_not_of('0');
  const cpp_int v = first == std::string::npos ? cpp_int(0) : cpp_int(s.substr(first));
  return negative ? cpp_int(-v) : v;
}

}  // namespace

Rational ParseRational(std::string_view text) {
  std::string s(text);
  auto bad = [&]() {
    return ValidationError("malformed rational '" + s + "'");
  };
  if (s.empty()) throw bad();
  const auto slash = s.find('/');
  if (slash != std::string::npos) {
    const auto num = ParseDecimalInteger(s.substr(0, slash));
    const auto den = ParseDecimalInteger(s.substr(slash + 1));
    if (!num || !den || *den == 0) throw bad();
    return Rational(*num, *den);
  }
  const auto dot = s.find('.');
  if (dot == std::string::npos) {
    const auto v = ParseDecimalInteger(s);
    if (!v) throw bad();
    return Rational(*v);
  }
  const std::string frac = s.substr(dot + 1);
  if (frac.empty() || frac[0] == '-' || frac[0] == '+') throw bad();
  std::string whole = s.substr(0, dot);
  if (whole.empty() || whole == "-" || whole == "+") whole += "0";
  const auto digits = ParseDecimalInteger(whole + frac);
  if (!digits) throw bad();
  cpp_int den = 1;
  for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
  return Rational(*digits, den);
}

std::string NumeratorString(const Rational& value) {
  return boost::multiprecision::numerator(value).str();
}

std::string DenominatorString(const Rational& value) {
  return boost::multiprecision::denominator(value).str();
}

std::string ToString(const Rational& value) {
  const cpp_int den = boost::multiprecision::denominator(value);
  if (den == 1) return NumeratorString(value);
  return NumeratorString(value) + "/" + den.str();
}

double ToDouble(const Rational& value) {
  return value.convert_to<double>();
}

void ToInt64Fraction(const Rational& value, std::int64_t* numerator,
                     std::int64_t* denominator) {
  const cpp_int num = boost::multiprecision::numerator(value);
  const cpp_int den = boost::multiprecision::denominator(value);
  const cpp_int lim = std::numeric_limits<std::int64_t>::max();
  if (num > lim || num < -lim || den > lim) {
    throw ValidationError("rational " + ToString(value) +
                          " exceeds the 64-bit range");
  }
  *numerator = num.convert_to<std::int64_t>();
  *denominator = den.convert_to<std::int64_t>();
}

}  // namespace topdown
