#include "topdown/topdown.h"

#include <map>
#include <sstream>
#include <utility>

#include "topdown/errors.h"
#include "topdown/parallel.h"
#include "topdown/rounding.h"

namespace topdown {

void ValidatePassPlan(const PassPlan& plan, const QueryCatalog& catalog) {
  if (plan.query_ids.empty()) throw ValidationError("pass plan is empty");
  for (const auto& q : plan.query_ids) {
    if (!catalog.Contains(q)) {
      throw ValidationError("pass plan names undeclared query '" + q + "'");
    }
  }
  if (!catalog.at(plan.query_ids.back()).group.is_identity()) {
    throw ValidationError("the last pass must be a detailed (identity) query");
  }
}

namespace {

class Solver {
 public:
  Solver(const Spine& spine, const Universe& universe,
         const QueryCatalog& catalog, const MeasurementIndex& measurements,
         const UnitConstraintMap& unit_constraints,
         const TopdownOptions& options)
      : spine_(spine),
        universe_(universe),
        catalog_(catalog),
        measurements_(measurements),
        unit_constraints_(unit_constraints),
        options_(options),
        cells_(universe.cell_count()) {
    for (const auto& q : catalog.queries()) {
      auto& rows = row_cells_[q.id()];
      rows.resize(q.rows());
      for (std::int64_t c = 0; c < q.matrix.cols; ++c) {
        const std::int64_t flat = q.offset + c;
        if (!universe.IsFixedZero(flat)) {
          rows[q.matrix.row_of_col[c]].push_back(flat);
        }
      }
    }
    dual_ = universe.component_count() > 1;
  }

  // Measurements used for `geocode`: its own, or for an unmeasured unit with
  // one child, those of the child (recursively).
  const std::map<std::string, QueryMeasurement>* MeasurementsFor(
      const std::string& geocode) const {
    std::string g = geocode;
    while (true) {
      auto it = measurements_.find(g);
      if (it != measurements_.end()) return &it->second;
      const GeoUnit& u = spine_.unit(g);
      if (u.children.size() != 1) return nullptr;
      g = u.children[0];
    }
  }

  std::vector<std::vector<std::int64_t>> SolveGroup(
      const std::vector<std::string>& units,
      const std::vector<std::int64_t>* parent,
      std::vector<std::string>* warnings) const {
    const std::int64_t K = static_cast<std::int64_t>(units.size());
    const std::string label = parent == nullptr ? units[0] : spine_.unit(units[0]).parent.value_or("");
    ConstraintSet cs =
        BuildConstraints(universe_, units, unit_constraints_, parent);
    NnlsProblem problem;
    problem.num_vars = K * cells_;
    for (std::int64_t k = 0; k < K; ++k) {
      const auto* meas = MeasurementsFor(units[k]);
      if (meas == nullptr) continue;
      for (const auto& [qid, qm] : *meas) {
        const auto& rows = row_cells_.at(qid);
        const double weight = 1.0 / ToDouble(qm.sigma2);
        for (std::size_t j = 0; j < rows.size(); ++j) {
          LsqRow row;
          row.vars.reserve(rows[j].size());
          for (std::int64_t c : rows[j]) row.vars.push_back(k * cells_ + c);
          row.target = static_cast<double>(qm.values[j]);
          row.weight = weight;
          problem.rows.push_back(std::move(row));
        }
      }
    }
    std::vector<bool> first_stage;
    bool staged = false;
    if (dual_) {
      first_stage.resize(problem.num_vars);
      for (std::int64_t v = 0; v < problem.num_vars; ++v) {
        first_stage[v] = universe_.ComponentOf(v % cells_) == 0;
      }
      for (const auto& c : cs.constraints) {
        staged = staged || c.family == ConstraintFamily::kLinkage;
      }
    }

    std::vector<std::int64_t> x;
    for (std::size_t p = 0; p < options_.plan.query_ids.size(); ++p) {
      problem.constraints = &cs;
      FractionalSolution sol = SolveNnls(problem, options_.nnls);
      if (!sol.unidentified.empty()) {
        warnings->push_back("group under '" + label + "': " +
                            std::to_string(sol.unidentified.size()) +
                            " cells without measurements or constraints set "
                            "to 0");
      }
      RoundingResult r = staged ? RoundStaged(sol.x, cs, first_stage)
                                : RoundControlled(sol.x, cs);
      const auto violations = cs.Violations(r.x);
      if (!r.exact) {
        warnings->push_back("group under '" + label + "': " + r.warning);
      } else if (!violations.empty()) {
        throw SolverError("rounding violated " + violations.front() +
                          " in group under '" + label + "'");
      }
      x = std::move(r.x);
      if (p + 1 == options_.plan.query_ids.size()) break;
      const std::string& qid = options_.plan.query_ids[p];
      const auto& rows = row_cells_.at(qid);
      for (std::int64_t k = 0; k < K; ++k) {
        for (std::size_t j = 0; j < rows.size(); ++j) {
          if (rows[j].empty()) continue;
          LinearConstraint c{ConstraintFamily::kFrozen,
                             units[k] + "/frozen:" + qid + ":" +
                                 std::to_string(j),
                             {}, 0, 0};
          for (std::int64_t cell : rows[j]) {
            c.terms.push_back({k * cells_ + cell, 1});
          }
          c.lo = c.hi = c.Evaluate(x);
          cs.constraints.push_back(std::move(c));
        }
      }
    }
    std::vector<std::vector<std::int64_t>> out(K);
    for (std::int64_t k = 0; k < K; ++k) {
      out[k].assign(x.begin() + k * cells_, x.begin() + (k + 1) * cells_);
    }
    return out;
  }

 private:
  const Spine& spine_;
  const Universe& universe_;
  const QueryCatalog& catalog_;
  const MeasurementIndex& measurements_;
  const UnitConstraintMap& unit_constraints_;
  const TopdownOptions& options_;
  std::int64_t cells_;
  bool dual_ = false;
  std::map<std::string, std::vector<std::vector<std::int64_t>>> row_cells_;
};

}  // namespace

TopdownResult RunTopdown(const Spine& spine, const Universe& universe,
                         const QueryCatalog& catalog,
                         const MeasurementIndex& measurements,
                         const UnitConstraintMap& unit_constraints,
                         const TopdownOptions& options) {
  ValidatePassPlan(options.plan, catalog);
  const Solver solver(spine, universe, catalog, measurements,
                      unit_constraints, options);
  TopdownResult result;
  {
    auto root = solver.SolveGroup({spine.root()}, nullptr, &result.warnings);
    if (options.post_unit) options.post_unit(spine.root(), &root[0]);
    result.units[spine.root()] = std::move(root[0]);
  }
  for (int level = 0; level < spine.block_level(); ++level) {
    const auto& parents = spine.UnitsAtLevel(level);
    std::vector<std::vector<std::vector<std::int64_t>>> solved(parents.size());
    std::vector<std::vector<std::string>> warnings(parents.size());
    ParallelFor(parents.size(), options.workers, [&](std::size_t i) {
      const GeoUnit& parent = spine.unit(parents[i]);
      const auto& parent_counts = result.units.at(parents[i]);
      if (parent.children.size() == 1) {
        solved[i] = {parent_counts};
      } else {
        solved[i] = solver.SolveGroup(parent.children, &parent_counts,
                                      &warnings[i]);
      }
      if (options.post_unit) {
        for (std::size_t k = 0; k < parent.children.size(); ++k) {
          options.post_unit(parent.children[k], &solved[i][k]);
        }
      }
    });
    for (std::size_t i = 0; i < parents.size(); ++i) {
      const GeoUnit& parent = spine.unit(parents[i]);
      for (std::size_t k = 0; k < parent.children.size(); ++k) {
        result.units[parent.children[k]] = std::move(solved[i][k]);
      }
      for (auto& w : warnings[i]) result.warnings.push_back(std::move(w));
    }
  }
  return result;
}

ConstraintReport CheckConstraints(const Spine& spine, const Universe& universe,
                                  const CountMap& units,
                                  const UnitConstraintMap& unit_constraints) {
  ConstraintReport report;
  std::ostringstream out;
  out << "family,geocode,constraint,status,value,lo,hi\n";
  auto line = [&](const char* family, const std::string& g,
                  const std::string& name, bool pass, std::int64_t value,
                  std::int64_t lo, std::int64_t hi) {
    out << family << ',' << g << ',' << name << ',' << (pass ? "pass" : "FAIL")
        << ',' << value << ',' << lo << ','
        << (hi == kNoUpper ? std::string("inf") : std::to_string(hi)) << '\n';
    if (!pass) ++report.failures;
  };
  const std::int64_t C = universe.cell_count();
  for (int l = 0; l < spine.level_count(); ++l) {
    for (const auto& g : spine.UnitsAtLevel(l)) {
      const auto& x = units.at(g);
      std::int64_t negative = 0, nonzero_fixed = 0;
      for (std::int64_t c = 0; c < C; ++c) {
        negative += x[c] < 0 ? 1 : 0;
        nonzero_fixed += universe.IsFixedZero(c) && x[c] != 0 ? 1 : 0;
      }
      line("nonnegative", g, "cells", negative == 0, negative, 0, 0);
      line("structural_zero", g, "cells", nonzero_fixed == 0, nonzero_fixed, 0,
           0);
      const GeoUnit& unit = spine.unit(g);
      if (!unit.children.empty()) {
        std::int64_t mismatched = 0;
        for (std::int64_t c = 0; c < C; ++c) {
          std::int64_t sum = 0;
          for (const auto& child : unit.children) sum += units.at(child)[c];
          mismatched += sum != x[c] ? 1 : 0;
        }
        line(FamilyName(ConstraintFamily::kParentChild), g, "cells",
             mismatched == 0, mismatched, 0, 0);
      }
      auto it = unit_constraints.find(g);
      if (it == unit_constraints.end()) continue;
      for (const auto& c : it->second) {
        const std::int64_t v = c.Evaluate(x);
        line(FamilyName(c.family), g, c.name, v >= c.lo && v <= c.hi, v, c.lo,
             c.hi);
      }
    }
  }
  report.text = out.str();
  return report;
}

}  // namespace topdown
