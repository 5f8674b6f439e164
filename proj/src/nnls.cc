#include "topdown/nnls.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <utility>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseQR>
#include <Eigen/OrderingMethods>

#include "topdown/errors.h"

namespace topdown {

namespace {

struct SparseRow {
  std::vector<std::pair<int, double>> entries;  // (column, coefficient)
  double rhs = 0;
  int source = -1;  // index into the constraint set, -1 for lifted rows
};

// min 1/2 z'Hz + c'z  s.t.  Az = b,  z_i >= 0 for bounded i.  H is diagonal.
struct QpData {
  int nz = 0;
  std::vector<double> h;
  std::vector<double> c;
  std::vector<bool> bounded;
  std::vector<SparseRow> rows;
};

class InteriorPoint {
 public:
  InteriorPoint(const QpData& qp, double tol, int max_iter)
      : qp_(qp), tol_(tol), max_iter_(max_iter) {
    const int m = static_cast<int>(qp_.rows.size());
    cols_.resize(qp_.nz);
    for (int r = 0; r < m; ++r) {
      for (auto [j, a] : qp_.rows[r].entries) cols_[j].push_back({r, a});
    }
    for (int i = 0; i < qp_.nz; ++i) nb_ += qp_.bounded[i] ? 1 : 0;
    BuildPattern();
  }

  // Returns false if the iteration cap was reached or the steps stalled.
  bool Run(std::vector<double>& z, int* iterations, double* residual) {
    const int m = static_cast<int>(qp_.rows.size());
    const int n = qp_.nz;
    std::vector<double> s(n, 0.0), lambda(m, 0.0);
    for (int i = 0; i < n; ++i) {
      if (qp_.bounded[i]) {
        z[i] = std::max(z[i], 1.0);
        s[i] = 1.0;
      }
    }
    std::vector<double> rp(m), rd(n), d(n), rho(n), dz(n), ds(n), dl(m);
    std::vector<double> dz_aff(n), ds_aff(n), rc(n);
    int stalled = 0;
    for (int iter = 0; iter <= max_iter_; ++iter) {
      Residuals(z, s, lambda, rp, rd);
      double comp = 0, mu = 0;
      for (int i = 0; i < n; ++i) {
        if (!qp_.bounded[i]) continue;
        comp = std::max(comp, z[i] * s[i]);
        mu += z[i] * s[i];
      }
      mu = nb_ > 0 ? mu / nb_ : 0.0;
      const double rp_norm = InfNorm(rp), rd_norm = InfNorm(rd);
      *residual = std::max({rp_norm, rd_norm, comp});
      *iterations = iter;
      if (rp_norm <= tol_ && rd_norm <= tol_ && comp <= 1e-2 * tol_) {
        return true;
      }
      if (iter == max_iter_ || stalled >= 5) return false;

      for (int i = 0; i < n; ++i) {
        d[i] = qp_.h[i] + (qp_.bounded[i] ? s[i] / z[i] : 0.0);
        if (d[i] <= 0) d[i] = 1e-12;
      }
      Factorize(d);

      // Predictor.
      for (int i = 0; i < n; ++i) rc[i] = qp_.bounded[i] ? z[i] * s[i] : 0.0;
      Direction(z, s, d, rp, rd, rc, dz_aff, ds_aff, dl);
      const double ap_aff = MaxStep(z, dz_aff), ad_aff = MaxStep(s, ds_aff);
      const double a_aff = std::min(ap_aff, ad_aff);
      double mu_aff = 0;
      for (int i = 0; i < n; ++i) {
        if (qp_.bounded[i]) {
          mu_aff += (z[i] + a_aff * dz_aff[i]) * (s[i] + a_aff * ds_aff[i]);
        }
      }
      mu_aff = nb_ > 0 ? mu_aff / nb_ : 0.0;
      const double sigma = mu > 0 ? std::pow(mu_aff / mu, 3) : 0.0;

      // Corrector.
      for (int i = 0; i < n; ++i) {
        rc[i] = qp_.bounded[i]
                    ? z[i] * s[i] + dz_aff[i] * ds_aff[i] - sigma * mu
                    : 0.0;
      }
      Direction(z, s, d, rp, rd, rc, dz, ds, dl);
      const double alpha =
          std::min(1.0, 0.995 * std::min(MaxStep(z, dz), MaxStep(s, ds)));
      stalled = alpha < 1e-8 ? stalled + 1 : 0;
      for (int i = 0; i < n; ++i) {
        z[i] += alpha * dz[i];
        s[i] += alpha * ds[i];
      }
      for (int r = 0; r < m; ++r) lambda[r] += alpha * dl[r];
    }
    return false;
  }

  // Constraint-row indices ordered by decreasing primal residual.
  std::vector<int> WorstRows(const std::vector<double>& z) const {
    std::vector<std::pair<double, int>> res;
    for (int r = 0; r < static_cast<int>(qp_.rows.size()); ++r) {
      if (qp_.rows[r].source < 0) continue;
      double v = -qp_.rows[r].rhs;
      for (auto [j, a] : qp_.rows[r].entries) v += a * z[j];
      res.push_back({-std::abs(v), r});
    }
    std::sort(res.begin(), res.end());
    std::vector<int> out;
    for (auto& p : res) out.push_back(p.second);
    return out;
  }

 private:
  static double InfNorm(const std::vector<double>& v) {
    double m = 0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
  }

  double MaxStep(const std::vector<double>& v,
                 const std::vector<double>& dv) const {
    double a = 1e30;
    for (int i = 0; i < qp_.nz; ++i) {
      if (qp_.bounded[i] && dv[i] < 0) a = std::min(a, -v[i] / dv[i]);
    }
    return a;
  }

  void Residuals(const std::vector<double>& z, const std::vector<double>& s,
                 const std::vector<double>& lambda, std::vector<double>& rp,
                 std::vector<double>& rd) const {
    for (int r = 0; r < static_cast<int>(qp_.rows.size()); ++r) {
      double v = -qp_.rows[r].rhs;
      for (auto [j, a] : qp_.rows[r].entries) v += a * z[j];
      rp[r] = v;
    }
    for (int i = 0; i < qp_.nz; ++i) {
      double v = qp_.h[i] * z[i] + qp_.c[i] - (qp_.bounded[i] ? s[i] : 0.0);
      for (auto [r, a] : cols_[i]) v -= a * lambda[r];
      rd[i] = v;
    }
  }

  // Lower-triangular pattern of A diag(1/d) A' and, per variable, the value
  // slots its outer product contributes to.
  void BuildPattern() {
    const int m = static_cast<int>(qp_.rows.size());
    std::vector<std::vector<int>> col_rows(m);  // rows >= col, per column
    for (int r = 0; r < m; ++r) col_rows[r].push_back(r);
    for (int i = 0; i < qp_.nz; ++i) {
      for (auto [r1, a1] : cols_[i]) {
        for (auto [r2, a2] : cols_[i]) {
          if (r1 > r2) col_rows[r2].push_back(r1);
        }
      }
    }
    std::vector<int> outer(m + 1, 0);
    for (int c = 0; c < m; ++c) {
      auto& v = col_rows[c];
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
      outer[c + 1] = outer[c] + static_cast<int>(v.size());
    }
    matrix_.resize(m, m);
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(outer[m]);
    for (int c = 0; c < m; ++c) {
      for (int r : col_rows[c]) triplets.emplace_back(r, c, 0.0);
    }
    matrix_.setFromTriplets(triplets.begin(), triplets.end());
    matrix_.makeCompressed();
    auto slot = [&](int r, int c) {
      const int* begin = matrix_.innerIndexPtr() + matrix_.outerIndexPtr()[c];
      const int* end = matrix_.innerIndexPtr() + matrix_.outerIndexPtr()[c + 1];
      return static_cast<int>(std::lower_bound(begin, end, r) -
                              matrix_.innerIndexPtr());
    };
    diag_slot_.resize(m);
    for (int r = 0; r < m; ++r) diag_slot_[r] = slot(r, r);
    slots_.resize(qp_.nz);
    for (int i = 0; i < qp_.nz; ++i) {
      for (auto [r1, a1] : cols_[i]) {
        for (auto [r2, a2] : cols_[i]) {
          if (r1 >= r2) slots_[i].push_back({slot(r1, r2), a1 * a2});
        }
      }
    }
    if (m > 0) solver_.analyzePattern(matrix_);
  }

  void Factorize(const std::vector<double>& d) {
    const int m = static_cast<int>(qp_.rows.size());
    if (m == 0) return;
    double* values = matrix_.valuePtr();
    std::fill(values, values + matrix_.nonZeros(), 0.0);
    for (int i = 0; i < qp_.nz; ++i) {
      const double inv = 1.0 / d[i];
      for (auto [p, a] : slots_[i]) values[p] += a * inv;
    }
    double max_diag = 0;
    for (int r = 0; r < m; ++r) max_diag = std::max(max_diag, values[diag_slot_[r]]);
    const double delta = 1e-12 * (1.0 + max_diag);
    for (int r = 0; r < m; ++r) values[diag_slot_[r]] += delta;
    solver_.factorize(matrix_);
    if (solver_.info() != Eigen::Success) {
      throw SolverError("NNLS normal equations could not be factorized");
    }
  }

  // Applies A diag(1/d) A' to v.
  void ApplyNormal(const std::vector<double>& d, const Eigen::VectorXd& v,
                   Eigen::VectorXd& out) const {
    out.setZero(v.size());
    for (int i = 0; i < qp_.nz; ++i) {
      double t = 0;
      for (auto [r, a] : cols_[i]) t += a * v[r];
      t /= d[i];
      for (auto [r, a] : cols_[i]) out[r] += a * t;
    }
  }

  void Direction(const std::vector<double>& z, const std::vector<double>& s,
                 const std::vector<double>& d, const std::vector<double>& rp,
                 const std::vector<double>& rd, const std::vector<double>& rc,
                 std::vector<double>& dz, std::vector<double>& ds,
                 std::vector<double>& dl) {
    const int m = static_cast<int>(qp_.rows.size());
    const int n = qp_.nz;
    std::vector<double> rho(n);
    for (int i = 0; i < n; ++i) {
      rho[i] = -rd[i] - (qp_.bounded[i] ? rc[i] / z[i] : 0.0);
    }
    if (m > 0) {
      Eigen::VectorXd rhs(m);
      for (int r = 0; r < m; ++r) rhs[r] = -rp[r];
      for (int i = 0; i < n; ++i) {
        const double t = rho[i] / d[i];
        for (auto [r, a] : cols_[i]) rhs[r] -= a * t;
      }
      Eigen::VectorXd sol = solver_.solve(rhs);
      Eigen::VectorXd applied;
      for (int refine = 0; refine < 2; ++refine) {
        ApplyNormal(d, sol, applied);
        sol += solver_.solve(rhs - applied);
      }
      for (int r = 0; r < m; ++r) dl[r] = sol[r];
    }
    for (int i = 0; i < n; ++i) {
      double t = rho[i];
      for (auto [r, a] : cols_[i]) t += a * dl[r];
      dz[i] = t / d[i];
      ds[i] = qp_.bounded[i] ? (-rc[i] - s[i] * dz[i]) / z[i] : 0.0;
    }
  }

  const QpData& qp_;
  double tol_;
  int max_iter_;
  int nb_ = 0;
  std::vector<std::vector<std::pair<int, double>>> cols_;
  Eigen::SparseMatrix<double> matrix_;
  std::vector<int> diag_slot_;
  std::vector<std::vector<std::pair<int, double>>> slots_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower> solver_;
};

// Equality rows that are linear combinations of earlier ones (parent-child
// sums next to the children's invariants, say) make the normal equations
// singular and stall the method, so they are dropped before solving and
// checked afterwards. Rows with a slack or a lifted variable are always
// independent.
std::vector<SparseRow> DropDependentRows(QpData& qp) {
  std::vector<int> eq;
  for (int r = 0; r < static_cast<int>(qp.rows.size()); ++r) {
    bool plain = qp.rows[r].source >= 0;
    for (auto [j, a] : qp.rows[r].entries) plain = plain && qp.bounded[j];
    if (plain) eq.push_back(r);
  }
  if (eq.size() < 2) return {};
  std::vector<Eigen::Triplet<double>> triplets;
  for (int k = 0; k < static_cast<int>(eq.size()); ++k) {
    for (auto [j, a] : qp.rows[eq[k]].entries) triplets.emplace_back(j, k, a);
  }
  Eigen::SparseMatrix<double> at(qp.nz, static_cast<int>(eq.size()));
  at.setFromTriplets(triplets.begin(), triplets.end());
  at.makeCompressed();
  Eigen::SparseQR<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> qr;
  qr.setPivotThreshold(1e-9);
  qr.compute(at);
  if (qr.info() != Eigen::Success) {
    throw SolverError("NNLS presolve could not factorize the constraints");
  }
  const auto& perm = qr.colsPermutation().indices();
  std::vector<bool> drop(qp.rows.size(), false);
  for (Eigen::Index k = qr.rank(); k < perm.size(); ++k) drop[eq[perm[k]]] = true;
  std::vector<SparseRow> kept, dropped;
  for (std::size_t r = 0; r < qp.rows.size(); ++r) {
    (drop[r] ? dropped : kept).push_back(std::move(qp.rows[r]));
  }
  qp.rows = std::move(kept);
  return dropped;
}

}  // namespace

double NnlsObjective(const NnlsProblem& problem, const std::vector<double>& x) {
  double f = 0;
  for (const auto& row : problem.rows) {
    double v = -row.target;
    for (std::int64_t var : row.vars) v += x[var];
    f += row.weight * v * v;
  }
  return f;
}

FractionalSolution SolveNnls(const NnlsProblem& problem,
                             const NnlsOptions& options) {
  const std::int64_t n = problem.num_vars;
  const ConstraintSet* cs = problem.constraints;
  if (cs != nullptr && cs->num_vars != n) {
    throw SolverError("constraint set size does not match the problem");
  }
  const std::vector<bool> zero =
      cs != nullptr ? PropagateZeros(*cs) : std::vector<bool>(n, false);

  // Reduce constraints to free variables and merge duplicates.
  struct Reduced {
    std::vector<std::pair<std::int64_t, int>> terms;
    std::int64_t lo, hi;
    int source;
  };
  std::vector<Reduced> reduced;
  if (cs != nullptr) {
    std::map<std::vector<std::pair<std::int64_t, int>>, std::size_t> seen;
    for (std::size_t i = 0; i < cs->constraints.size(); ++i) {
      const auto& c = cs->constraints[i];
      Reduced r{{}, c.lo, c.hi, static_cast<int>(i)};
      for (const Term& t : c.terms) {
        if (!zero[t.var]) r.terms.push_back({t.var, t.coef});
      }
      if (r.terms.empty()) {
        if (r.lo > 0 || r.hi < 0) {
          throw SolverError("infeasible constraint " + c.name +
                            ": all variables are fixed at zero");
        }
        continue;
      }
      std::sort(r.terms.begin(), r.terms.end());
      auto [it, fresh] = seen.emplace(r.terms, reduced.size());
      if (fresh) {
        reduced.push_back(std::move(r));
        continue;
      }
      Reduced& prev = reduced[it->second];
      prev.lo = std::max(prev.lo, r.lo);
      prev.hi = std::min(prev.hi, r.hi);
      if (prev.lo > prev.hi) {
        throw SolverError("conflicting constraints " + c.name + " and " +
                          cs->constraints[prev.source].name);
      }
    }
  }

  // Index the variables something touches.
  double max_weight = 0, max_target = 0;
  for (const auto& row : problem.rows) {
    if (row.weight > 0) max_weight = std::max(max_weight, row.weight);
    max_target = std::max(max_target, std::abs(row.target));
  }
  if (max_weight == 0) max_weight = 1;
  std::vector<int> index(n, -1);
  int nx = 0;
  auto touch = [&](std::int64_t v) {
    if (!zero[v] && index[v] < 0) index[v] = nx++;
  };
  for (const auto& row : problem.rows) {
    if (row.weight > 0) {
      for (std::int64_t v : row.vars) touch(v);
    }
  }
  for (const auto& r : reduced) {
    for (auto [v, a] : r.terms) touch(v);
  }

  FractionalSolution out;
  out.x.assign(n, 0.0);
  for (std::int64_t v = 0; v < n; ++v) {
    if (!zero[v] && index[v] < 0) out.unidentified.push_back(v);
  }

  QpData qp;
  qp.nz = nx;
  qp.h.assign(nx, 0.0);
  qp.c.assign(nx, 0.0);
  qp.bounded.assign(nx, true);
  auto add_var = [&](bool bounded, double h, double c) {
    qp.h.push_back(h);
    qp.c.push_back(c);
    qp.bounded.push_back(bounded);
    return qp.nz++;
  };
  std::vector<double> z0(nx, 1.0);
  for (const auto& row : problem.rows) {
    if (row.weight <= 0) continue;
    const double w = row.weight / max_weight;
    std::vector<int> free;
    for (std::int64_t v : row.vars) {
      if (!zero[v]) free.push_back(index[v]);
    }
    if (free.empty()) continue;
    if (free.size() == 1) {
      qp.h[free[0]] += 2 * w;
      qp.c[free[0]] -= 2 * w * row.target;
      continue;
    }
    const int y = add_var(false, 2 * w, -2 * w * row.target);
    SparseRow lift;
    lift.entries.push_back({y, 1.0});
    for (int j : free) lift.entries.push_back({j, -1.0});
    qp.rows.push_back(std::move(lift));
    z0.push_back(static_cast<double>(free.size()));
  }
  for (const auto& r : reduced) {
    SparseRow row;
    row.source = r.source;
    for (auto [v, a] : r.terms) row.entries.push_back({index[v], double(a)});
    double at_start = 0;
    for (auto [v, a] : r.terms) at_start += a;
    if (r.lo == r.hi) {
      row.rhs = static_cast<double>(r.lo);
      qp.rows.push_back(std::move(row));
      continue;
    }
    // lo <= a'x <= hi  as  a'x - s1 = lo,  s1 + s2 = hi - lo.
    const int s1 = add_var(true, 0.0, 0.0);
    z0.push_back(std::max(1.0, at_start - static_cast<double>(r.lo)));
    row.entries.push_back({s1, -1.0});
    row.rhs = static_cast<double>(r.lo);
    qp.rows.push_back(std::move(row));
    if (r.hi != kNoUpper) {
      const int s2 = add_var(true, 0.0, 0.0);
      z0.push_back(1.0);
      SparseRow cap;
      cap.entries = {{s1, 1.0}, {s2, 1.0}};
      cap.rhs = static_cast<double>(r.hi) - static_cast<double>(r.lo);
      qp.rows.push_back(std::move(cap));
    }
  }

  if (qp.nz > 0) {
    const double tol = options.tolerance * (1.0 + max_target);
    const std::vector<SparseRow> dropped = DropDependentRows(qp);
    InteriorPoint ipm(qp, tol, options.max_iterations);
    const bool ok = ipm.Run(z0, &out.iterations, &out.kkt_residual);
    if (!ok) {
      std::ostringstream msg;
      msg << "NNLS did not converge after " << out.iterations
          << " iterations (KKT residual " << out.kkt_residual << ")";
      const auto worst = ipm.WorstRows(z0);
      if (!worst.empty() && cs != nullptr) {
        msg << "; largest constraint residuals:";
        for (std::size_t i = 0; i < worst.size() && i < 3; ++i) {
          msg << ' ' << cs->constraints[qp.rows[worst[i]].source].name;
        }
      }
      throw SolverError(msg.str());
    }
    for (const auto& row : dropped) {
      double v = -row.rhs;
      for (auto [j, a] : row.entries) v += a * z0[j];
      if (std::abs(v) > tol) {
        throw SolverError("inconsistent equality constraint " +
                          cs->constraints[row.source].name);
      }
    }
    for (std::int64_t v = 0; v < n; ++v) {
      if (index[v] >= 0) out.x[v] = std::max(0.0, z0[index[v]]);
    }
  }
  out.objective = NnlsObjective(problem, out.x);
  return out;
}

}  // namespace topdown
