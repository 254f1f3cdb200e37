#pragma once

// Convergence of string and Hamiltonian families, decided two ways: from the
// coefficient criteria (boundedness of sigma_n, primitives of w_n and sigma_n,
// primitives of H_n) and directly from m_n on a compact grid.  Everything
// works on finite families, so each verdict is a surrogate for a limit.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "indef/canonical.hpp"
#include "indef/weyl.hpp"

namespace indef {

enum class Verdict { Converges, DivergesToInfinity, Inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Converges: return "converges";
    case Verdict::DivergesToInfinity: return "diverges-to-infinity";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

struct StringSequence {
  std::vector<StringSpec> specs;
  std::optional<StringSpec> limit;
};

struct ConvergeOptions {
  double tol = 5e-2;            // largest final difference accepted as convergence
  double bounded_growth = 2.0;  // sigma_n(x) growing more than this over the tail counts as unbounded
  int jobs = 1;
};

struct StringConvergenceReport {
  std::vector<double> xs;
  std::vector<std::vector<double>> sigma;  // [member][x]; +inf past L_n
  std::vector<double> sigma_growth;        // per x, last / first tail value
  std::vector<bool> bounded;               // per x
  double support_sup = 0.0;                // largest grid x with all smaller x bounded
  std::vector<double> w_int_diff;          // per member, sup_x |int w_n - int w|
  std::vector<double> sigma_int_diff;      // per member, sup_x |int sigma_n - int sigma|
  Verdict verdict = Verdict::Inconclusive;
  double margin = 0.0;  // tol minus the deciding final difference
  std::string note;
};

namespace detail {

inline bool non_increasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[i - 1] * (1.0 + 1e-12) + 1e-15) return false;
  return true;
}

// First member of the tail: the last half of the family, at least two members.
inline std::size_t tail_start(std::size_t n) { return n >= 2 ? std::min(n - 2, n / 2) : 0; }

}  // namespace detail

inline StringConvergenceReport string_convergence_check(const StringSequence& seq, std::vector<double> xs,
                                                        const ConvergeOptions& o = {}) {
  StringConvergenceReport r;
  std::sort(xs.begin(), xs.end());
  r.xs = xs;
  r.note = "finite surrogate: boundedness of sigma_n judged by growth over the last half of the family";
  if (seq.specs.empty()) {
    r.note += "; empty family";
    return r;
  }
  std::vector<CoefficientView> views;
  views.reserve(seq.specs.size());
  for (const auto& s : seq.specs) views.emplace_back(s);
  for (std::size_t k = 0; k < seq.specs.size(); ++k) {
    std::vector<double> row;
    for (double x : xs) row.push_back(x < seq.specs[k].length ? views[k].sigma(x) : kInf);
    r.sigma.push_back(std::move(row));
  }

  const std::size_t t0 = detail::tail_start(seq.specs.size());
  r.support_sup = 0.0;
  bool prefix = true;
  for (std::size_t j = 0; j < xs.size(); ++j) {
    const double first = r.sigma[t0][j], last = r.sigma.back()[j];
    const double g = std::isinf(last) ? kInf : (first > 0.0 ? last / first : (last > 0.0 ? kInf : 1.0));
    r.sigma_growth.push_back(g);
    const bool b = g <= o.bounded_growth;
    r.bounded.push_back(b);
    if (b && prefix) r.support_sup = xs[j];
    prefix = prefix && b;
  }
  // x = 0 always belongs to the set, so only x > 0 can decide the supremum
  bool none_bounded = true;
  for (std::size_t j = 0; j < xs.size(); ++j) none_bounded = none_bounded && (xs[j] <= 0.0 || !r.bounded[j]);
  const bool all_bounded = std::all_of(r.bounded.begin(), r.bounded.end(), [](bool b) { return b; });

  if (none_bounded) {
    r.verdict = Verdict::DivergesToInfinity;
    double g = kInf;
    for (double v : r.sigma_growth) g = std::min(g, v);
    r.margin = g - o.bounded_growth;
    r.note += "; sigma_n unbounded at every grid point, so the supremum is 0";
    return r;
  }
  if (!seq.limit) {
    r.note += "; no limit supplied";
    return r;
  }
  const CoefficientView lim(*seq.limit);
  for (std::size_t k = 0; k < seq.specs.size(); ++k) {
    double dw = 0.0, ds = 0.0;
    for (double x : xs) {
      if (x >= seq.limit->length) continue;
      if (x >= seq.specs[k].length) {
        dw = ds = kInf;
        break;
      }
      dw = std::max(dw, std::abs(views[k].w_integral(x) - lim.w_integral(x)));
      ds = std::max(ds, std::abs(views[k].sigma_integral(x) - lim.sigma_integral(x)));
    }
    r.w_int_diff.push_back(dw);
    r.sigma_int_diff.push_back(ds);
  }
  const std::vector<double> tw(r.w_int_diff.begin() + static_cast<long>(t0), r.w_int_diff.end());
  const std::vector<double> ts(r.sigma_int_diff.begin() + static_cast<long>(t0), r.sigma_int_diff.end());
  const double worst = std::max(tw.back(), ts.back());
  r.margin = o.tol - worst;
  if (all_bounded && detail::non_increasing(tw) && detail::non_increasing(ts) && worst <= o.tol)
    r.verdict = Verdict::Converges;
  return r;
}

struct MComparisonReport {
  std::vector<cd> grid;
  std::vector<double> sup_diff;  // per member, sup_z |m_n - m|; empty without a limit
  std::vector<double> inf_abs;   // per member, inf_z |m_n|
  Verdict verdict = Verdict::Inconclusive;
  double margin = 0.0;
};

/// Direct verdict from m_n on a compact grid in the upper half-plane.
inline MComparisonReport m_comparison(const StringSequence& seq, std::span<const cd> grid,
                                      const ConvergeOptions& o = {}, const WeylOptions& wo = {}) {
  MComparisonReport r;
  r.grid.assign(grid.begin(), grid.end());
  if (seq.specs.empty()) return r;
  std::vector<cd> ml;
  if (seq.limit) {
    for (const auto& s : weyl_grid(*seq.limit, grid, wo, static_cast<unsigned>(std::max(1, o.jobs)))) ml.push_back(s.m);
  }
  for (const auto& spec : seq.specs) {
    const auto ms = weyl_grid(spec, grid, wo, static_cast<unsigned>(std::max(1, o.jobs)));
    double d = 0.0, a = kInf;
    for (std::size_t i = 0; i < ms.size(); ++i) {
      if (!ml.empty()) d = std::max(d, std::abs(ms[i].m - ml[i]));
      a = std::min(a, std::abs(ms[i].m));
    }
    if (!ml.empty()) r.sup_diff.push_back(d);
    r.inf_abs.push_back(a);
  }
  const std::size_t t0 = detail::tail_start(seq.specs.size());
  if (!r.sup_diff.empty()) {
    const std::vector<double> t(r.sup_diff.begin() + static_cast<long>(t0), r.sup_diff.end());
    r.margin = o.tol - t.back();
    if (detail::non_increasing(t) && t.back() <= o.tol) {
      r.verdict = Verdict::Converges;
      return r;
    }
  }
  const std::vector<double> t(r.inf_abs.begin() + static_cast<long>(t0), r.inf_abs.end());
  bool increasing = true;
  for (std::size_t i = 1; i < t.size(); ++i) increasing = increasing && t[i] > t[i - 1];
  if (increasing && t.back() >= 1.0 / o.tol) {
    r.verdict = Verdict::DivergesToInfinity;
    r.margin = t.back() - 1.0 / o.tol;
  }
  return r;
}

struct HamiltonianConvergenceReport {
  std::vector<double> xs;
  std::vector<double> diff;           // per member, sup_x max entry |int H_n - int H|
  std::vector<double> diff_infinity;  // per member, same against [[1,0],[0,0]]
  Verdict verdict = Verdict::Inconclusive;
  double margin = 0.0;
};

inline HamiltonianConvergenceReport hamiltonian_convergence_check(const std::vector<Hamiltonian>& Hs,
                                                                  const std::optional<Hamiltonian>& limit,
                                                                  std::vector<double> xs,
                                                                  const ConvergeOptions& o = {}) {
  HamiltonianConvergenceReport r;
  std::sort(xs.begin(), xs.end());
  r.xs = xs;
  if (Hs.empty()) return r;
  for (const auto& H : Hs) {
    double d = 0.0, di = 0.0;
    for (double x : xs) {
      const Eigen::Matrix2d p = H.primitive(x);
      if (limit) d = std::max(d, (p - limit->primitive(x)).cwiseAbs().maxCoeff());
      Eigen::Matrix2d top = Eigen::Matrix2d::Zero();
      top(0, 0) = x;
      di = std::max(di, (p - top).cwiseAbs().maxCoeff());
    }
    if (limit) r.diff.push_back(d);
    r.diff_infinity.push_back(di);
  }
  const std::size_t t0 = detail::tail_start(Hs.size());
  auto decides = [&](const std::vector<double>& v) {
    const std::vector<double> t(v.begin() + static_cast<long>(t0), v.end());
    return std::pair{detail::non_increasing(t) && t.back() <= o.tol, o.tol - t.back()};
  };
  if (limit) {
    const auto [ok, m] = decides(r.diff);
    r.margin = m;
    if (ok) {
      r.verdict = Verdict::Converges;
      return r;
    }
  }
  const auto [ok, m] = decides(r.diff_infinity);
  if (ok) {
    r.verdict = Verdict::DivergesToInfinity;
    r.margin = m;
  }
  return r;
}

/// Replaces every atom (x, a) of omega and upsilon by the density a n on
/// [x, x + 1/n), clipped to [0, L).
inline StringSpec mollify_string(const StringSpec& spec, int n) {
  if (n < 1) throw Error(ErrorCode::PositionOutOfRange, "mollifier index must be >= 1");
  StringSpec out;
  out.length = spec.length;
  auto smear = [&](const Measure& m) {
    Measure r;
    r.density = m.density;
    for (const auto& a : m.atoms) {
      const double b = std::min(a.x + 1.0 / n, spec.length);
      r.density = add_densities(r.density, {{a.x, b, a.mass * n}});
    }
    return r;
  };
  out.omega = smear(spec.omega);
  out.upsilon = smear(spec.upsilon);
  return validate_spec(out);
}

}  // namespace indef
