#include "topdown/constraints.h"

#include <algorithm>
#include <sstream>

#include "topdown/csv.h"
#include "topdown/errors.h"

namespace topdown {

const char* FamilyName(ConstraintFamily family) {
  switch (family) {
    case ConstraintFamily::kParentChild: return "parent_child";
    case ConstraintFamily::kInvariant: return "invariant";
    case ConstraintFamily::kPriorRelease: return "prior_release";
    case ConstraintFamily::kFrozen: return "frozen";
    case ConstraintFamily::kLinkage: return "linkage";
    case ConstraintFamily::kBound: return "bound";
  }
  return "unknown";
}

namespace {

ConstraintFamily ParseFamily(const std::string& name, const std::string& where) {
  for (ConstraintFamily f :
       {ConstraintFamily::kParentChild, ConstraintFamily::kInvariant,
        ConstraintFamily::kPriorRelease, ConstraintFamily::kFrozen,
        ConstraintFamily::kLinkage, ConstraintFamily::kBound}) {
    if (name == FamilyName(f)) return f;
  }
  throw DataError(where + ": unknown constraint family '" + name + "'");
}

// Flat cells of each output row of a query, structural zeros dropped.
std::vector<std::vector<std::int64_t>> RowCells(const Universe& universe,
                                                const FlatQuery& query) {
  std::vector<std::vector<std::int64_t>> rows(query.rows());
  for (std::int64_t c = 0; c < query.matrix.cols; ++c) {
    const std::int64_t flat = query.offset + c;
    if (universe.IsFixedZero(flat)) continue;
    rows[query.matrix.row_of_col[c]].push_back(flat);
  }
  return rows;
}

std::vector<Term> PlusTerms(const std::vector<std::int64_t>& cells) {
  std::vector<Term> terms;
  terms.reserve(cells.size());
  for (std::int64_t c : cells) terms.push_back({c, 1});
  return terms;
}

}  // namespace

bool LinearConstraint::all_positive() const {
  for (const Term& t : terms) {
    if (t.coef != 1) return false;
  }
  return true;
}

std::int64_t LinearConstraint::Evaluate(std::span<const std::int64_t> x) const {
  std::int64_t sum = 0;
  for (const Term& t : terms) sum += t.coef * x[t.var];
  return sum;
}

double LinearConstraint::Evaluate(std::span<const double> x) const {
  double sum = 0;
  for (const Term& t : terms) sum += t.coef * x[t.var];
  return sum;
}

std::vector<std::string> ConstraintSet::Violations(
    std::span<const std::int64_t> x) const {
  std::vector<std::string> out;
  for (std::int64_t v = 0; v < num_vars; ++v) {
    if (x[v] < 0) out.push_back("negative:" + std::to_string(v));
    if (fixed_zero[v] && x[v] != 0) {
      out.push_back("fixed_zero:" + std::to_string(v));
    }
  }
  for (const auto& c : constraints) {
    if (!c.SatisfiedBy(x)) out.push_back(c.name);
  }
  return out;
}

std::vector<bool> PropagateZeros(const ConstraintSet& set) {
  std::vector<bool> zero = set.fixed_zero;
  for (const auto& c : set.constraints) {
    if (c.hi == 0 && c.all_positive()) {
      for (const Term& t : c.terms) zero[t.var] = true;
    }
  }
  return zero;
}

Tabulations Tabulate(const CountMap& unit_counts, const QueryCatalog& catalog,
                     const std::vector<std::string>& query_ids) {
  Tabulations out;
  for (const auto& [g, counts] : unit_counts) {
    auto& row = out[g];
    for (const auto& q : query_ids) row[q] = catalog.at(q).Evaluate(counts);
  }
  return out;
}

void ValidatePriorRelease(const Tabulations& prior, const Spine& spine,
                          const QueryCatalog& catalog,
                          const std::vector<std::string>& query_ids) {
  auto lookup = [&](const std::string& g,
                    const std::string& q) -> const std::vector<std::int64_t>& {
    auto it = prior.find(g);
    if (it == prior.end() || !it->second.count(q)) {
      throw DataError("prior release has no '" + q + "' tabulation for unit '" +
                      g + "'");
    }
    const auto& values = it->second.at(q);
    if (static_cast<std::int64_t>(values.size()) != catalog.at(q).rows()) {
      throw DataError("prior release '" + q + "' for unit '" + g +
                      "' has the wrong number of cells");
    }
    return values;
  };
  for (const auto& [g, unit] : spine.units()) {
    for (const auto& q : query_ids) {
      const auto& values = lookup(g, q);
      if (unit.children.empty()) continue;
      std::vector<std::int64_t> sum(values.size(), 0);
      for (const auto& child : unit.children) {
        const auto& cv = lookup(child, q);
        for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += cv[j];
      }
      if (sum != values) {
        throw DataError("prior release '" + q + "' of unit '" + g +
                        "' is not the sum of its children");
      }
    }
  }
}

UnitConstraintMap BuildUnitConstraints(const Spine& spine,
                                       const Universe& universe,
                                       const QueryCatalog& catalog,
                                       const ConstraintConfig& config,
                                       const CountMap& unit_counts,
                                       const Tabulations& prior_release) {
  std::map<std::string, std::vector<std::vector<std::int64_t>>> row_cells;
  auto cells_of = [&](const std::string& q)
      -> const std::vector<std::vector<std::int64_t>>& {
    auto it = row_cells.find(q);
    if (it == row_cells.end()) {
      it = row_cells.emplace(q, RowCells(universe, catalog.at(q))).first;
    }
    return it->second;
  };
  std::vector<int> invariant_level;
  for (const auto& inv : config.invariants) {
    const int l = spine.LevelIndex(inv.level);
    if (l < 0) {
      throw ValidationError("invariant on '" + inv.query_id +
                            "' names unknown level '" + inv.level + "'");
    }
    invariant_level.push_back(l);
  }

  UnitConstraintMap out;
  for (const auto& [g, unit] : spine.units()) {
    auto counts_it = unit_counts.find(g);
    if (counts_it == unit_counts.end()) {
      throw DataError("no counts for unit '" + g + "'");
    }
    const std::vector<std::int64_t>& counts = counts_it->second;
    auto& list = out[g];
    for (std::size_t i = 0; i < config.invariants.size(); ++i) {
      if (unit.level > invariant_level[i]) continue;
      const std::string& q = config.invariants[i].query_id;
      const auto& rows = cells_of(q);
      const auto& only = config.invariants[i].cells;
      for (std::size_t j = 0; j < rows.size(); ++j) {
        if (rows[j].empty()) continue;
        if (!only.empty() &&
            std::find(only.begin(), only.end(),
                      static_cast<std::int64_t>(j)) == only.end()) {
          continue;
        }
        LinearConstraint c{ConstraintFamily::kInvariant,
                           "inv:" + q + ":" + std::to_string(j),
                           PlusTerms(rows[j]), 0, 0};
        c.lo = c.hi = c.Evaluate(counts);
        list.push_back(std::move(c));
      }
    }
    for (const auto& q : config.prior_release_queries) {
      const auto& rows = cells_of(q);
      const auto& values = prior_release.at(g).at(q);
      for (std::size_t j = 0; j < rows.size(); ++j) {
        const std::string name = "prior:" + q + ":" + std::to_string(j);
        if (rows[j].empty()) {
          if (values[j] != 0) {
            throw DataError("unit '" + g + "' " + name +
                            " is nonzero on structural zeros");
          }
          continue;
        }
        list.push_back({ConstraintFamily::kPriorRelease, name,
                        PlusTerms(rows[j]), values[j], values[j]});
      }
    }
    for (const auto& link : config.linkage) {
      LinearConstraint c{ConstraintFamily::kLinkage, "link:" + link.name, {},
                         0, 0};
      for (std::int64_t v : cells_of(link.main_query).at(link.main_cell)) {
        c.terms.push_back({v, 1});
      }
      for (std::int64_t v : cells_of(link.units_query).at(link.units_cell)) {
        c.terms.push_back({v, -1});
      }
      if (!c.terms.empty()) list.push_back(std::move(c));
    }
    for (const auto& c : list) {
      if (!c.SatisfiedBy(counts)) {
        throw DataError("confidential data of unit '" + g +
                        "' violates constraint " + c.name);
      }
    }
  }
  return out;
}

ConstraintSet BuildConstraints(const Universe& universe,
                               const std::vector<std::string>& units,
                               const UnitConstraintMap& unit_constraints,
                               const std::vector<std::int64_t>* parent) {
  const std::int64_t C = universe.cell_count();
  const std::int64_t K = static_cast<std::int64_t>(units.size());
  ConstraintSet set(K * C);
  for (std::int64_t k = 0; k < K; ++k) {
    for (std::int64_t c = 0; c < C; ++c) {
      set.fixed_zero[k * C + c] = universe.IsFixedZero(c);
    }
    auto it = unit_constraints.find(units[k]);
    if (it == unit_constraints.end()) continue;
    for (const auto& uc : it->second) {
      LinearConstraint c = uc;
      c.name = units[k] + "/" + uc.name;
      for (Term& t : c.terms) t.var += k * C;
      set.constraints.push_back(std::move(c));
    }
  }
  if (parent != nullptr) {
    for (std::int64_t c = 0; c < C; ++c) {
      if (universe.IsFixedZero(c)) {
        if ((*parent)[c] != 0) {
          throw DataError("parent count on structural zero cell " +
                          std::to_string(c));
        }
        continue;
      }
      LinearConstraint pc{ConstraintFamily::kParentChild,
                          "pc:" + std::to_string(c), {}, (*parent)[c],
                          (*parent)[c]};
      for (std::int64_t k = 0; k < K; ++k) pc.terms.push_back({k * C + c, 1});
      set.constraints.push_back(std::move(pc));
    }
  }
  return set;
}

std::string SerializeUnitConstraints(const UnitConstraintMap& map,
                                     const Spine& spine) {
  std::ostringstream out;
  out << "geocode,family,name,lo,hi,terms\n";
  for (int l = 0; l < spine.level_count(); ++l) {
    for (const auto& g : spine.UnitsAtLevel(l)) {
      auto it = map.find(g);
      if (it == map.end()) continue;
      for (const auto& c : it->second) {
        out << g << ',' << FamilyName(c.family) << ',' << c.name << ','
            << c.lo << ',' << (c.hi == kNoUpper ? "inf" : std::to_string(c.hi))
            << ',';
        for (std::size_t i = 0; i < c.terms.size(); ++i) {
          if (i) out << ' ';
          if (c.terms[i].coef < 0) out << '-';
          out << c.terms[i].var;
        }
        out << '\n';
      }
    }
  }
  return out.str();
}

UnitConstraintMap ParseUnitConstraints(const std::string& text,
                                       const std::string& source) {
  const CsvTable table = ParseCsv(text, source);
  if (JoinCsv(table.header) != "geocode,family,name,lo,hi,terms") {
    throw DataError(source + ": unexpected header");
  }
  UnitConstraintMap out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& f = table.rows[r];
    const std::string where =
        source + ":" + std::to_string(table.line_numbers[r]);
    LinearConstraint c;
    c.family = ParseFamily(f[1], where);
    c.name = f[2];
    c.lo = ParseInt64(f[3], where + " lo");
    c.hi = f[4] == "inf" ? kNoUpper : ParseInt64(f[4], where + " hi");
    std::istringstream terms(f[5]);
    std::string tok;
    while (terms >> tok) {
      const bool neg = tok[0] == '-';
      c.terms.push_back(
          {ParseInt64(neg ? tok.substr(1) : tok, where + " term"), neg ? -1 : 1});
    }
    out[f[0]].push_back(std::move(c));
  }
  return out;
}

}  // namespace topdown
