#ifndef TOPDOWN_DISCRETE_GAUSSIAN_H_
#define TOPDOWN_DISCRETE_GAUSSIAN_H_

#include <cstdint>

#include "topdown/random.h"
#include "topdown/rational.h"

namespace topdown {

struct DiscreteGaussianParams {
  Rational sigma2;
};

// sigma2 = 1/rho exactly; rho must be positive.
DiscreteGaussianParams Sigma2FromRho(const Rho& rho);

// Radius beyond which the kernel's tail mass is below 1e-15 of the total.
std::int64_t DgTruncationRadius(double sigma2);
// Sum of exp(-j^2 / 2 sigma2) over |j| <= radius.
double DgNormalizer(double sigma2, std::int64_t radius);
double DgPmf(std::int64_t k, const DiscreteGaussianParams& params);
double DgPmf(std::int64_t k, double sigma2);
// P(|K| <= r).
double DgCentralMass(std::int64_t r, double sigma2);
// Sum of k^2 pmf(k) over the truncation radius.
double DgVariance(double sigma2);

// Exact sampler: rejection from a discrete Laplace proposal, with every
// acceptance test done by Bernoulli factories on 128-bit integer rationals.
// No floating point is involved. Throws SolverError if sigma2's numerator or
// denominator exceeds 2^62.
class DiscreteGaussianSampler {
 public:
  explicit DiscreteGaussianSampler(const DiscreteGaussianParams& params);
  std::int64_t Sample(KeyedRng& rng) const;

 private:
  std::int64_t SampleLaplace(KeyedRng& rng) const;

  std::int64_t num_;  // sigma2 = num_ / den_
  std::int64_t den_;
  std::int64_t t_;    // floor(sqrt(sigma2)) + 1
};

std::int64_t SampleDiscreteGaussian(const DiscreteGaussianParams& params,
                                    KeyedRng& rng);

}  // namespace topdown

#endif  // TOPDOWN_DISCRETE_GAUSSIAN_H_
