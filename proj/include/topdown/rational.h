#ifndef TOPDOWN_RATIONAL_H_
#define TOPDOWN_RATIONAL_H_

#include <cstdint>
#include <string>
#include <string_view>

#include <boost/multiprecision/cpp_int.hpp>

namespace topdown {

// Exact rational used for every privacy-budget quantity.
using Rational = boost::multiprecision::cpp_rational;
using Rho = Rational;

Rational MakeRational(std::int64_t numerator, std::int64_t denominator);

// Parses "n", "n/d" or a finite decimal such as "0.0125".
Rational ParseRational(std::string_view text);

// "n/d" in lowest terms ("n" when d == 1).
std::string ToString(const Rational& value);
std::string NumeratorString(const Rational& value);
std::string DenominatorString(const Rational& value);

double ToDouble(const Rational& value);

// Converts to int64 numerator/denominator; throws if either does not fit.
void ToInt64Fraction(const Rational& value, std::int64_t* numerator,
                     std::int64_t* denominator);

}  // namespace topdown

#endif  // TOPDOWN_RATIONAL_H_
