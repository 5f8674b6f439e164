#ifndef TOPDOWN_ROUNDING_H_
#define TOPDOWN_ROUNDING_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "topdown/constraints.h"

namespace topdown {

struct RoundingResult {
  std::vector<std::int64_t> x;
  bool exact = true;  // false when the largest-remainder fallback ran
  std::string warning;
};

// Integer x minimizing sum |x - x_star| subject to the constraint set. When
// parent-child constraints and the remaining constraints each form a laminar
// family of all-positive sums, this is a min-cost flow and the result is
// exactly optimal; L1 ties go to rounding lower-index variables up. Other
// structures fall back to sequential largest-remainder rounding, which is
// flagged in the result and may leave constraints violated.
RoundingResult RoundControlled(std::span<const double> x_star,
                               const ConstraintSet& constraints);

// Two-stage variant for sets with constraints linking two variable classes
// (coefficients +1 on one side, -1 on the other). Rounds the first stage with
// bounds implied by the linkage, then the second stage with the linked sums
// fixed.
RoundingResult RoundStaged(std::span<const double> x_star,
                           const ConstraintSet& constraints,
                           const std::vector<bool>& first_stage);

// Sum of |x - x_star|.
double L1Distance(std::span<const std::int64_t> x,
                  std::span<const double> x_star);

}  // namespace topdown

#endif  // TOPDOWN_ROUNDING_H_
