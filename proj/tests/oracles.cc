#include "oracles.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>

namespace oracle {

namespace {

int CoefOf(const Row& r, std::size_t i) {
  return r.coefs.empty() ? 1 : r.coefs[i];
}

template <typename V>
double RowValue(const Row& r, const V& x) {
  double v = 0;
  for (std::size_t i = 0; i < r.vars.size(); ++i) v += CoefOf(r, i) * x[r.vars[i]];
  return v;
}

}  // namespace

std::optional<double> ExhaustiveRoundingObjective(
    const std::vector<double>& x_star, const std::vector<Row>& rows) {
  const int n = static_cast<int>(x_star.size());
  std::vector<int> fractional;
  std::vector<double> base(n);
  for (int i = 0; i < n; ++i) {
    base[i] = std::floor(x_star[i]);
    if (x_star[i] != base[i]) fractional.push_back(i);
  }
  std::optional<double> best;
  std::vector<double> x(n);
  const std::uint64_t combos = std::uint64_t{1} << fractional.size();
  for (std::uint64_t mask = 0; mask < combos; ++mask) {
    x = base;
    for (std::size_t j = 0; j < fractional.size(); ++j) {
      if (mask >> j & 1) x[fractional[j]] += 1;
    }
    bool ok = true;
    for (const Row& r : rows) {
      const double v = RowValue(r, x);
      ok = ok && v >= r.lo - 1e-9 && v <= r.hi + 1e-9;
    }
    if (!ok) continue;
    double cost = 0;
    for (int i = 0; i < n; ++i) cost += std::abs(x[i] - x_star[i]);
    if (!best || cost < *best) best = cost;
  }
  return best;
}

double Objective(const std::vector<LsqTerm>& terms,
                 const std::vector<double>& x) {
  double f = 0;
  for (const auto& t : terms) {
    double v = -t.target;
    for (int j : t.vars) v += x[j];
    f += t.weight * v * v;
  }
  return f;
}

std::optional<double> SupportEnumerationNnls(int n,
                                             const std::vector<LsqTerm>& terms,
                                             const std::vector<Row>& equalities,
                                             std::vector<double>* argmin) {
  std::optional<double> best;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    std::vector<int> support;
    std::map<int, int> pos;
    for (int i = 0; i < n; ++i) {
      if (mask >> i & 1) {
        pos[i] = static_cast<int>(support.size());
        support.push_back(i);
      }
    }
    const int s = static_cast<int>(support.size());
    const int m = static_cast<int>(equalities.size());
    std::vector<double> x(n, 0.0);
    if (s > 0) {
      // Rows of sqrt(w) * A restricted to the support, then C.
      Eigen::MatrixXd a = Eigen::MatrixXd::Zero(terms.size(), s);
      Eigen::VectorXd b(terms.size());
      for (std::size_t r = 0; r < terms.size(); ++r) {
        const double sw = std::sqrt(terms[r].weight);
        for (int j : terms[r].vars) {
          auto it = pos.find(j);
          if (it != pos.end()) a(r, it->second) += sw;
        }
        b[r] = sw * terms[r].target;
      }
      Eigen::MatrixXd c = Eigen::MatrixXd::Zero(m, s);
      Eigen::VectorXd d(m);
      for (int r = 0; r < m; ++r) {
        const Row& row = equalities[r];
        for (std::size_t i = 0; i < row.vars.size(); ++i) {
          auto it = pos.find(row.vars[i]);
          if (it != pos.end()) c(r, it->second) += CoefOf(row, i);
        }
        d[r] = row.lo;
      }
      Eigen::MatrixXd stacked(a.rows() + m, s);
      stacked << a, c;
      Eigen::FullPivLU<Eigen::MatrixXd> rank_check(stacked);
      rank_check.setThreshold(1e-10);
      if (rank_check.rank() < s) continue;  // minimizer not unique
      // KKT system [2A'A C'; C 0] [x; mu] = [2A'b; d].
      Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(s + m, s + m);
      kkt.topLeftCorner(s, s) = 2 * a.transpose() * a;
      kkt.topRightCorner(s, m) = c.transpose();
      kkt.bottomLeftCorner(m, s) = c;
      Eigen::VectorXd rhs(s + m);
      rhs << 2 * a.transpose() * b, d;
      Eigen::VectorXd sol = kkt.completeOrthogonalDecomposition().solve(rhs);
      if ((kkt * sol - rhs).norm() > 1e-8 * (1 + rhs.norm())) continue;
      bool positive = true;
      for (int j = 0; j < s; ++j) {
        positive = positive && sol[j] > -1e-9;
        x[support[j]] = std::max(0.0, sol[j]);
      }
      if (!positive) continue;
    }
    bool feasible = true;
    for (const Row& row : equalities) {
      feasible = feasible && std::abs(RowValue(row, x) - row.lo) < 1e-7;
    }
    if (!feasible) continue;
    const double f = Objective(terms, x);
    if (!best || f < *best) {
      best = f;
      if (argmin) *argmin = x;
    }
  }
  return best;
}

double GridNnls(int n, const std::vector<LsqTerm>& terms,
                const std::vector<Row>& equalities, double upper, double step) {
  // Each equality row solves for its last variable, which no other equality
  // may use; the remaining variables are gridded.
  std::vector<int> pivot_row(n, -1);
  for (std::size_t r = 0; r < equalities.size(); ++r) {
    pivot_row[equalities[r].vars.back()] = static_cast<int>(r);
  }
  std::vector<int> free;
  for (int i = 0; i < n; ++i) {
    if (pivot_row[i] < 0) free.push_back(i);
  }
  const int k = static_cast<int>(std::floor(upper / step + 1e-9)) + 1;
  std::vector<int> idx(free.size(), 0);
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> x(n);
  while (true) {
    for (std::size_t j = 0; j < free.size(); ++j) x[free[j]] = idx[j] * step;
    bool ok = true;
    for (const Row& row : equalities) {
      const int p = row.vars.back();
      const int pc = CoefOf(row, row.vars.size() - 1);
      double rest = 0;
      for (std::size_t i = 0; i + 1 < row.vars.size(); ++i) {
        rest += CoefOf(row, i) * x[row.vars[i]];
      }
      x[p] = (row.lo - rest) / pc;
      ok = ok && x[p] >= 0;
    }
    if (ok) best = std::min(best, Objective(terms, x));
    std::size_t j = 0;
    while (j < idx.size() && ++idx[j] == k) idx[j++] = 0;
    if (j == idx.size()) break;
  }
  return best;
}

double ChiSquarePValue(double statistic, int degrees_of_freedom) {
  boost::math::chi_squared_distribution<double> dist(degrees_of_freedom);
  return boost::math::cdf(boost::math::complement(dist, statistic));
}

std::pair<double, int> ChiSquareDiscreteGaussian(
    const std::vector<std::int64_t>& samples, double sigma2) {
  const double count = static_cast<double>(samples.size());
  // Normalizer over a range far beyond any mass that matters.
  const std::int64_t reach =
      static_cast<std::int64_t>(std::ceil(40 * std::sqrt(sigma2))) + 40;
  auto weight = [&](std::int64_t k) {
    return std::exp(-static_cast<double>(k) * static_cast<double>(k) /
                    (2 * sigma2));
  };
  double z = 0;
  for (std::int64_t k = -reach; k <= reach; ++k) z += weight(k);
  // Central bins keep expected counts >= 5; each tail pools the rest.
  std::int64_t edge = 0;
  while (edge + 1 <= reach && count * weight(edge + 1) / z >= 5) ++edge;
  std::map<std::int64_t, double> observed;
  for (std::int64_t v : samples) {
    observed[std::clamp<std::int64_t>(v, -edge - 1, edge + 1)] += 1;
  }
  double central = 0;
  double stat = 0;
  for (std::int64_t k = -edge; k <= edge; ++k) {
    const double e = count * weight(k) / z;
    central += e;
    const double o = observed.count(k) ? observed[k] : 0.0;
    stat += (o - e) * (o - e) / e;
  }
  int bins = static_cast<int>(2 * edge + 1);
  const double tail = (count - central) / 2;
  if (tail >= 5) {
    for (std::int64_t k : {-edge - 1, edge + 1}) {
      const double o = observed.count(k) ? observed[k] : 0.0;
      stat += (o - tail) * (o - tail) / tail;
      ++bins;
    }
  }
  return {stat, bins - 1};
}

}  // namespace oracle
