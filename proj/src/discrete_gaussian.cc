#include "topdown/discrete_gaussian.h"

#include <cmath>
#include <numeric>

#include "topdown/errors.h"

namespace topdown {
namespace {

using u128 = unsigned __int128;
using i128 = __int128;

// Bernoulli(num / den) with 0 <= num <= den.
bool Bernoulli(u128 num, u128 den, KeyedRng& rng) {
  return rng.UniformBelow128(den) < num;
}

// Bernoulli(exp(-num/den)) for num <= den: the count K of successive
// Bernoulli(gamma / k) successes, k = 1, 2, ..., is odd with probability
// exp(-gamma).
bool BernoulliExpUnit(u128 num, u128 den, KeyedRng& rng) {
  u128 k = 1;
  while (true) {
    u128 dk;
    if (__builtin_mul_overflow(den, k, &dk)) return (k & 1) != 0;
    if (!Bernoulli(num, dk, rng)) break;
    ++k;
  }
  return (k & 1) != 0;
}

bool BernoulliExp(u128 num, u128 den, KeyedRng& rng) {
  while (num > den) {
    if (!BernoulliExpUnit(1, 1, rng)) return false;
    num -= den;
  }
  return BernoulliExpUnit(num, den, rng);
}

u128 Gcd(u128 a, u128 b) {
  while (b != 0) {
    const u128 r = a % b;
    a = b;
    b = r;
  }
  return a;
}

std::int64_t FloorSqrt(std::int64_t v) {
  std::int64_t r = static_cast<std::int64_t>(std::sqrt(static_cast<double>(v)));
  while (r > 0 && r * r > v) --r;
  while ((r + 1) * (r + 1) <= v) ++r;
  return r;
}

}  // namespace

DiscreteGaussianParams Sigma2FromRho(const Rho& rho) {
  if (rho <= 0) {
    throw ValidationError(
        "zero budget: a query with rho = 0 must be skipped, not measured");
  }
  return DiscreteGaussianParams{Rational(1) / rho};
}

std::int64_t DgTruncationRadius(double sigma2) {
  // exp(-R^2 / 2 sigma2) = e^-40 keeps the neglected tail far below 1e-15 of
  // the normalizer for any sigma2 the accountant can produce.
  return static_cast<std::int64_t>(std::ceil(std::sqrt(80.0 * sigma2))) + 1;
}

double DgNormalizer(double sigma2, std::int64_t radius) {
  double tail = 0.0;
  for (std::int64_t j = radius; j >= 1; --j) {
    tail += std::exp(-static_cast<double>(j) * j / (2.0 * sigma2));
  }
  return 1.0 + 2.0 * tail;
}

double DgPmf(std::int64_t k, double sigma2) {
  const double z = DgNormalizer(sigma2, DgTruncationRadius(sigma2));
  return std::exp(-static_cast<double>(k) * k / (2.0 * sigma2)) / z;
}

double DgPmf(std::int64_t k, const DiscreteGaussianParams& params) {
  return DgPmf(k, ToDouble(params.sigma2));
}

double DgCentralMass(std::int64_t r, double sigma2) {
  const std::int64_t radius = DgTruncationRadius(sigma2);
  if (r >= radius) return 1.0;
  const double z = DgNormalizer(sigma2, radius);
  return DgNormalizer(sigma2, r) / z;
}

double DgVariance(double sigma2) {
  const std::int64_t radius = DgTruncationRadius(sigma2);
  double m2 = 0.0;
  for (std::int64_t j = radius; j >= 1; --j) {
    const double jj = static_cast<double>(j) * j;
    m2 += 2.0 * jj * std::exp(-jj / (2.0 * sigma2));
  }
  return m2 / DgNormalizer(sigma2, radius);
}

DiscreteGaussianSampler::DiscreteGaussianSampler(
    const DiscreteGaussianParams& params) {
  if (params.sigma2 <= 0) throw ValidationError("sigma2 must be positive");
  const Rational limit = MakeRational(std::int64_t{1} << 62, 1);
  if (Rational(boost::multiprecision::numerator(params.sigma2)) >= limit ||
      Rational(boost::multiprecision::denominator(params.sigma2)) >= limit) {
    throw SolverError("sigma2 " + ToString(params.sigma2) +
                      " is outside the exact sampler's range");
  }
  ToInt64Fraction(params.sigma2, &num_, &den_);
  t_ = FloorSqrt(num_ / den_) + 1;
}

std::int64_t DiscreteGaussianSampler::SampleLaplace(KeyedRng& rng) const {
  const u128 t = static_cast<u128>(t_);
  while (true) {
    const std::uint64_t u = rng.UniformBelow(static_cast<std::uint64_t>(t_));
    if (!BernoulliExp(u, t, rng)) continue;
    std::int64_t v = 0;
    while (BernoulliExp(1, 1, rng)) ++v;
    const std::int64_t x = static_cast<std::int64_t>(u) + t_ * v;
    const bool negative = Bernoulli(1, 2, rng);
    if (negative && x == 0) continue;
    return negative ? -x : x;
  }
}

std::int64_t DiscreteGaussianSampler::Sample(KeyedRng& rng) const {
  // Accept Y with probability exp(-(|Y| - sigma2/t)^2 / (2 sigma2)). With
  // sigma2 = a/b that exponent is (|Y| b t - a)^2 / (2 a b t^2).
  const i128 a = num_;
  const i128 b = den_;
  const i128 t = t_;
  i128 den;
  if (__builtin_mul_overflow(2 * a * b, t * t, &den)) {
    throw SolverError("discrete Gaussian acceptance overflow");
  }
  while (true) {
    const std::int64_t y = SampleLaplace(rng);
    const i128 ay = y < 0 ? -static_cast<i128>(y) : static_cast<i128>(y);
    i128 diff;
    if (__builtin_mul_overflow(ay * b, t, &diff)) {
      throw SolverError("discrete Gaussian acceptance overflow");
    }
    diff -= a;
    u128 mag = static_cast<u128>(diff < 0 ? -diff : diff);
    u128 num;
    if (__builtin_mul_overflow(mag, mag, &num)) {
      throw SolverError("discrete Gaussian acceptance overflow");
    }
    u128 d = static_cast<u128>(den);
    const u128 g = Gcd(num, d);
    if (g > 1) {
      num /= g;
      d /= g;
    }
    if (BernoulliExp(num, d, rng)) return y;
  }
}

std::int64_t SampleDiscreteGaussian(const DiscreteGaussianParams& params,
                                    KeyedRng& rng) {
  return DiscreteGaussianSampler(params).Sample(rng);
}

}  // namespace topdown
