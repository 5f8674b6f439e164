#include "topdown/accountant.h"

#include <cmath>
#include <map>

#include "topdown/discrete_gaussian.h"
#include "topdown/errors.h"

namespace topdown {

void Accountant::Spend(LedgerEntry entry) {
  if (entry.rho < 0) throw ValidationError("negative spend");
  ledger_.push_back(std::move(entry));
}

Rho Accountant::MeasurementTotal(const Spine* spine) const {
  std::map<std::string, Rho> level_sum;
  std::map<std::string, Rho> unit_sum;
  for (const auto& e : ledger_) {
    if (e.unit_class == "level") {
      level_sum[e.level] += e.rho;
    } else if (e.unit_class.rfind("unit:", 0) == 0) {
      unit_sum[e.unit_class.substr(5)] += e.rho;
    }
  }
  if (spine == nullptr) {
    Rho total = 0;
    for (const auto& [l, r] : level_sum) total += r;
    for (const auto& [u, r] : unit_sum) total += r;
    return total;
  }
  Rho worst = 0;
  for (const auto& b : spine->Blocks()) {
    Rho path = 0;
    for (const auto& g : spine->PathToRoot(b)) {
      if (skipped_.count(g)) continue;
      auto it = unit_sum.find(g);
      if (it != unit_sum.end()) {
        path += it->second;
        continue;
      }
      auto lv = level_sum.find(spine->level_name(spine->unit(g).level));
      if (lv != level_sum.end()) path += lv->second;
    }
    if (path > worst) worst = path;
  }
  return worst;
}

Rho Accountant::ReleaseTotal() const {
  Rho total = 0;
  for (const auto& e : ledger_) {
    if (e.unit_class == "release") total += e.rho;
  }
  return total;
}

Rho Accountant::Total(const Spine* spine) const {
  return MeasurementTotal(spine) + ReleaseTotal();
}

std::string Accountant::ExportCsv() const {
  std::string out =
      "level,query_id,rho_numerator,rho_denominator,sigma2,unit_class\n";
  for (const auto& e : ledger_) {
    const std::string sigma2 =
        e.rho > 0 ? ToString(Rational(1) / e.rho) : std::string("inf");
    out += e.level + "," + e.query_id + "," + NumeratorString(e.rho) + "," +
           DenominatorString(e.rho) + "," + sigma2 + "," + e.unit_class + "\n";
  }
  return out;
}

Accountant AccountantForTable(const StrategyTable& table, const Spine* spine) {
  Accountant acc;
  for (const auto& [key, rho] : table.entries()) {
    if (rho > 0) acc.Spend({key.first, key.second, "level", rho});
  }
  for (const auto& [g, row] : table.unit_overrides()) {
    const std::string level =
        spine ? spine->level_name(spine->unit(g).level) : std::string();
    for (const auto& [q, rho] : row) {
      if (rho > 0) acc.Spend({level, q, "unit:" + g, rho});
    }
  }
  for (const auto& g : table.skipped()) acc.MarkSkipped(g);
  return acc;
}

Rho TotalRho(const StrategyTable& table, const Spine* spine) {
  return AccountantForTable(table, spine).Total(spine);
}

const std::vector<Rho>& ReleaseRhoGrid() {
  static const std::vector<Rho> grid = [] {
    std::vector<Rho> g;
    for (int k = 0;; ++k) {
      const double v = 1e-8 * std::pow(1.01, k);
      if (v > 1e3 * (1 + 1e-12)) break;
      int e = static_cast<int>(std::floor(std::log10(v)));
      std::int64_t m = std::llround(v / std::pow(10.0, e - 5));
      if (m >= 1000000) {
        m /= 10;
        ++e;
      }
      Rational scale = 1;
      for (int i = 0; i < std::abs(e - 5); ++i) scale *= 10;
      g.push_back(e - 5 >= 0 ? Rational(m) * scale : Rational(m) / scale);
    }
    return g;
  }();
  return grid;
}

Rho CalibrateRhoForRelease(double tolerance, double coverage,
                           std::int64_t scale) {
  if (!(tolerance > 0)) throw ValidationError("tolerance must be positive");
  if (!(coverage > 0 && coverage < 1)) {
    throw ValidationError("coverage must lie in (0, 1)");
  }
  if (scale <= 0) throw ValidationError("scale must be positive");
  // A small epsilon keeps products such as 0.15 * 40 from flooring to 5.
  const auto r =
      static_cast<std::int64_t>(std::floor(tolerance * scale + 1e-9));
  const auto& grid = ReleaseRhoGrid();
  auto ok = [&](std::size_t i) {
    return DgCentralMass(r, 1.0 / ToDouble(grid[i])) >= coverage;
  };
  if (!ok(grid.size() - 1)) {
    throw ValidationError("coverage " + std::to_string(coverage) +
                          " is unattainable on the rho grid");
  }
  std::size_t lo = 0;
  std::size_t hi = grid.size() - 1;
  if (ok(lo)) return grid[lo];
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    (ok(mid) ? hi : lo) = mid;
  }
  return grid[hi];
}

}  // namespace topdown
