#ifndef TOPDOWN_NNLS_H_
#define TOPDOWN_NNLS_H_

#include <cstdint>
#include <string>
#include <vector>

#include "topdown/constraints.h"

namespace topdown {

// weight * (sum of x over vars - target)^2
struct LsqRow {
  std::vector<std::int64_t> vars;
  double target = 0;
  double weight = 1;
};

struct NnlsProblem {
  std::int64_t num_vars = 0;
  std::vector<LsqRow> rows;
  const ConstraintSet* constraints = nullptr;  // optional
};

struct NnlsOptions {
  double tolerance = 1e-6;
  int max_iterations = 200;
};

struct FractionalSolution {
  std::vector<double> x;
  double objective = 0;
  double kkt_residual = 0;
  int iterations = 0;
  // Free variables no row or constraint touches; left at 0.
  std::vector<std::int64_t> unidentified;
};

// Minimizes the weighted squared error over x >= 0 subject to the constraint
// set, with a primal-dual interior point method on the normal equations.
// Aggregate rows are lifted into free auxiliary variables so the Hessian is
// diagonal. Throws SolverError when infeasibility is detected or the method
// fails to reach a KKT residual of tolerance * (1 + max |target|).
FractionalSolution SolveNnls(const NnlsProblem& problem,
                             const NnlsOptions& options = {});

double NnlsObjective(const NnlsProblem& problem, const std::vector<double>& x);

}  // namespace topdown

#endif  // TOPDOWN_NNLS_H_
