#pragma once

// Weyl-Titchmarsh function m(z) = psi'(z,0-)/(z psi(z,0)), its integral
// representation constants and Herglotz / Stieltjes classification.

#include <algorithm>
#include <cstdio>
#include <optional>
#include <ostream>
#include <span>
#include <thread>
#include <vector>

#include "indef/propagate.hpp"

namespace indef {

/// How m is obtained on a half-line.  `Exact` solves the constant-coefficient
/// tail beyond the last breakpoint in closed form; `Truncate` runs the
/// geometric schedule of truncations -theta(x)/(z phi(x)).
enum class TailMode { Exact, Truncate };

struct WeylOptions {
  double tol = 1e-10;
  PropagationOptions prop{};
  TailMode tail = TailMode::Exact;
  int max_truncations = 80;
  int agreements = 3;
};

struct WeylSample {
  cd z;
  cd m;
  double truncation_x = 0.0;
  double est_error = 0.0;  // heuristic: Cauchy difference, not a bound
};

namespace detail {

inline void require_nonreal(cd z) {
  if (z.imag() == 0.0) throw Error(ErrorCode::NonRealRequired, "m is only defined off the real axis");
  if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
    throw Error(ErrorCode::NonFiniteValue, "spectral parameter must be finite");
}

/// Square root with non-negative imaginary part.
inline cd sqrt_upper(cd w) {
  const cd r = std::sqrt(w);
  return r.imag() < 0.0 ? -r : r;
}

/// Last segment [a, inf) of a half-line string: its atoms at a and local
/// coefficient kappa = z omega' + z^2 upsilon'.
struct Tail {
  double a = 0.0;
  cd atom_kick;
  cd kappa;
};

inline Tail tail_of(const StringSpec& spec, cd z) {
  const CoefficientView view(spec);
  const Segment& last = view.segments().back();
  return {last.a, z * last.omega_atom + z * z * last.upsilon_atom,
          z * last.omega_density + z * z * last.upsilon_density};
}

inline bool has_density(const StringSpec& spec) {
  return !spec.omega.density.empty() || !spec.upsilon.density.empty();
}

}  // namespace detail

/// m_x(z) = -theta(z,x)/(z phi(z,x)).
inline cd m_truncated(const StringSpec& spec, cd z, double x, PropagationOptions opts = {}) {
  detail::require_nonreal(z);
  if (!(x > 0.0) || x > spec.length || std::isinf(x))
    throw Error(ErrorCode::PositionOutOfRange, "truncation point must lie in (0, L]");
  Propagator p(spec, z, opts);
  p.set_normalizing(true);
  p.advance_to(x);
  return -p.state()(0, 0) / (z * p.state()(0, 1));
}

namespace detail {

inline cd m_exact_tail(const StringSpec& spec, cd z, PropagationOptions opts) {
  const Tail t = tail_of(spec, z);
  Propagator p(spec, z, opts);
  p.set_normalizing(true);
  p.advance_to(t.a);
  const auto& s = p.state();
  const cd k = t.kappa == 0.0 ? cd(0.0) : sqrt_upper(t.kappa);
  // the solution that stays in the space on [a, inf) satisfies f' = i k f
  const cd dth = s(1, 0) - t.atom_kick * s(0, 0);
  const cd dph = s(1, 1) - t.atom_kick * s(0, 1);
  const cd ik = cd(0, 1) * k;
  return -(dth - ik * s(0, 0)) / (z * (dph - ik * s(0, 1)));
}

inline WeylSample m_truncation_schedule(const StringSpec& spec, cd z, const WeylOptions& o) {
  const CoefficientView view(spec);
  Propagator p(spec, z, o.prop);
  p.set_normalizing(true);
  cd prev = 0.0;
  bool have_prev = false;
  int streak = 0;
  double last_diff = kInf;
  double s_travel = 1.0;
  double x_prev = 0.0;
  for (int k = 0; k < o.max_truncations; ++k, s_travel *= 2.0) {
    const double x = view.xi(s_travel);
    if (!(x > x_prev)) continue;
    p.advance_to(x);
    x_prev = x;
    const cd m = -p.state()(0, 0) / (z * p.state()(0, 1));
    if (have_prev) {
      last_diff = std::abs(m - prev);
      streak = last_diff < o.tol * std::max(1.0, std::abs(m)) ? streak + 1 : 0;
      if (streak >= o.agreements) return {z, m, x, last_diff};
    }
    prev = m;
    have_prev = true;
  }
  throw Error(ErrorCode::TruncationNotConverged,
              "truncations still differ by " + std::to_string(last_diff));
}

}  // namespace detail

/// m(z).  On finite L the limit is attained at x = L because sigma(L) is
/// finite for every string in this coefficient class.
inline WeylSample weyl_m(const StringSpec& spec, cd z, const WeylOptions& o = {}) {
  detail::require_nonreal(z);
  if (!spec.infinite_length()) {
    WeylSample out{z, m_truncated(spec, z, spec.length, o.prop), spec.length, 0.0};
    if (detail::has_density(spec)) {
      PropagationOptions loose = o.prop;
      loose.tol = std::min(1e-6, 100.0 * o.prop.tol);
      out.est_error = std::abs(out.m - m_truncated(spec, z, spec.length, loose));
    }
    return out;
  }
  if (o.tail == TailMode::Truncate) return detail::m_truncation_schedule(spec, z, o);
  WeylSample out{z, detail::m_exact_tail(spec, z, o.prop), kInf, 0.0};
  if (detail::has_density(spec)) {
    PropagationOptions loose = o.prop;
    loose.tol = std::min(1e-6, 100.0 * o.prop.tol);
    out.est_error = std::abs(out.m - detail::m_exact_tail(spec, z, loose));
  }
  return out;
}

inline cd weyl_m_value(const StringSpec& spec, cd z, const WeylOptions& o = {}) {
  return weyl_m(spec, z, o).m;
}

/// Evaluates m on a list of points with up to `jobs` threads; results are in
/// input order and independent of the thread count.
inline std::vector<WeylSample> weyl_grid(const StringSpec& spec, std::span<const cd> zs,
                                         const WeylOptions& o = {}, unsigned jobs = 1) {
  std::vector<WeylSample> out(zs.size());
  std::vector<std::exception_ptr> errors(zs.size());
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < zs.size(); i += stride) {
      try {
        out[i] = weyl_m(spec, zs[i], o);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(zs.size())));
  if (jobs <= 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(work, j, jobs);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

/// psi = theta + m z phi at the requested points.  On a half-line, points in
/// the constant tail use the closed-form decaying solution there.
inline std::vector<SystemState> weyl_solution_psi(const StringSpec& spec, cd z,
                                                  std::span<const double> xs,
                                                  const WeylOptions& o = {}) {
  const cd m = weyl_m(spec, z, o).m;
  if (spec.infinite_length()) {
    for (double x : xs)
      if (!(x >= 0.0) || std::isinf(x)) throw Error(ErrorCode::PositionOutOfRange, "psi sample position");
  } else {
    check_positions(spec, xs);
  }
  const CoefficientView view(spec);
  const bool closed_tail = spec.infinite_length() && o.tail == TailMode::Exact;
  const detail::Tail tail = detail::tail_of(spec, z);
  Propagator p(spec, z, o.prop);
  std::vector<SystemState> out;
  bool tail_ready = false;
  cd psi_a, dpsi_a, ik;
  for (double x : xs) {
    if (closed_tail && x > tail.a) {
      if (!tail_ready) {
        p.advance_to(tail.a);
        const auto& s = p.state();
        psi_a = s(0, 0) + m * z * s(0, 1);
        dpsi_a = (s(1, 0) + m * z * s(1, 1)) - tail.atom_kick * psi_a;
        ik = cd(0, 1) * (tail.kappa == 0.0 ? cd(0.0) : detail::sqrt_upper(tail.kappa));
        tail_ready = true;
      }
      SystemState st;
      st.x = x;
      st.f = psi_a * std::exp(ik * (x - tail.a));
      const cd d = tail.kappa == 0.0 ? dpsi_a : ik * st.f;
      const auto c = view.at(x);
      st.F2 = d + (z * c.w + z * z * c.upsilon) * st.f;
      st.quasi = d + z * c.w * st.f;
      out.push_back(st);
      continue;
    }
    p.advance_to(x);
    const SystemState th = p.column_state(0), ph = p.column_state(1);
    SystemState st;
    st.x = x;
    st.f = th.f + m * z * ph.f;
    st.F2 = th.F2 + m * z * ph.F2;
    st.quasi = th.quasi + m * z * ph.quasi;
    out.push_back(st);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Integral representation m(z) = c1 z + c2 - 1/(L z) + int (...) dmu.

struct IntegralRep {
  double c1 = 0.0;
  std::optional<double> c2;  // empty: entangled with mu ("undetermined")
  double inv_L = 0.0;
  double c1_spread = 0.0;     // difference of the last two extrapolants
  double inv_L_spread = 0.0;
  double c2_spread = 0.0;
};

struct ExtrapolationResult {
  cd value;
  double spread = 0.0;
};

/// Aitken delta-squared applied to successive triples; the last extrapolant is
/// returned together with its distance to the previous one.
inline ExtrapolationResult aitken_limit(std::span<const cd> seq) {
  if (seq.size() < 3) throw Error(ErrorCode::ExtrapolationUnstable, "need at least three terms");
  std::vector<cd> acc;
  for (std::size_t j = 0; j + 2 < seq.size(); ++j) {
    const cd d1 = seq[j + 1] - seq[j];
    const cd d2 = seq[j + 2] - seq[j + 1];
    const cd den = d2 - d1;
    const double scale = std::max({std::abs(seq[j]), std::abs(seq[j + 1]), std::abs(seq[j + 2])});
    if (std::abs(den) <= 1e-13 * std::max(scale, 1e-300) || std::abs(d2) <= 1e-15 * scale) {
      acc.push_back(seq[j + 2]);
    } else {
      acc.push_back(seq[j + 2] - d2 * d2 / den);
    }
  }
  ExtrapolationResult r;
  r.value = acc.back();
  r.spread = acc.size() > 1 ? std::abs(acc.back() - acc[acc.size() - 2]) : std::abs(seq.back() - seq[seq.size() - 2]);
  return r;
}

/// Krein case: upsilon vanishes and omega is a non-negative measure.
inline bool krein_structural(const StringSpec& spec) {
  if (!spec.upsilon.empty()) return false;
  for (const auto& a : spec.omega.atoms) if (a.mass < 0.0) return false;
  for (const auto& p : spec.omega.density) if (p.value < 0.0) return false;
  return true;
}

/// upsilon vanishes on (0, L) and w is non-decreasing there; the masses at 0
/// are unrestricted.
inline bool nonneg_spectrum_predicted(const StringSpec& spec) {
  if (!spec.upsilon.density.empty()) return false;
  for (const auto& a : spec.upsilon.atoms) if (a.x > 0.0) return false;
  for (const auto& a : spec.omega.atoms) if (a.x > 0.0 && a.mass < 0.0) return false;
  for (const auto& p : spec.omega.density) if (p.value < 0.0) return false;
  return true;
}

struct IntegralRepOptions {
  WeylOptions weyl{};
  double max_spread = 1e-6;  // relative, for declaring an extrapolation stable
};

inline IntegralRep integral_rep_constants(const StringSpec& spec, const IntegralRepOptions& o = {}) {
  std::vector<cd> lin, high, low;
  for (double eta : {1e2, 1e3, 1e4, 1e5, 1e6}) {
    const cd z(0.0, eta);
    const cd m = weyl_m(spec, z, o.weyl).m;
    lin.push_back(m / z);
    high.push_back(m);
  }
  for (double eps : {1e-2, 1e-3, 1e-4, 1e-5, 1e-6}) {
    const cd z(0.0, eps);
    low.push_back(-z * weyl_m(spec, z, o.weyl).m);
  }
  auto stable = [&](const ExtrapolationResult& r, const char* what) {
    const double scale = std::max(1.0, std::abs(r.value));
    if (r.spread > o.max_spread * scale || std::abs(r.value.imag()) > o.max_spread * scale) {
      throw Error(ErrorCode::ExtrapolationUnstable,
                  std::string(what) + " extrapolation spread " + std::to_string(r.spread));
    }
    return r;
  };
  IntegralRep rep;
  const auto c1 = stable(aitken_limit(lin), "c1");
  rep.c1 = c1.value.real();
  rep.c1_spread = c1.spread;
  const auto il = stable(aitken_limit(low), "1/L");
  rep.inv_L = il.value.real();
  rep.inv_L_spread = il.spread;
  if (krein_structural(spec)) {
    const auto c2 = stable(aitken_limit(high), "c2");
    rep.c2 = c2.value.real();
    rep.c2_spread = c2.spread;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Classification.

struct Classification {
  bool herglotz = false;
  bool stieltjes = false;
  bool nonneg_spectrum_predicted = false;
  bool krein_structural = false;
  bool routes_agree = false;  // numerical Stieltjes flag == structural Krein predicate
  double min_im_m = kInf;      // over the upper-half-plane grid
  double min_im_zm = kInf;
  double max_symmetry_error = 0.0;
  double tol = 0.0;
  std::size_t grid_size = 0;
};

/// 7 x 7 grid over Re z in [-5, 5], Im z in [0.1, 5].
inline std::vector<cd> standard_grid(int n = 7, double re_lo = -5.0, double re_hi = 5.0,
                                     double im_lo = 0.1, double im_hi = 5.0) {
  std::vector<cd> g;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      g.emplace_back(re_lo + (re_hi - re_lo) * i / (n - 1), im_lo + (im_hi - im_lo) * j / (n - 1));
  return g;
}

/// Samples m on the grid (mirrored into the upper half-plane) and at the
/// conjugate points.
inline Classification classify(const StringSpec& spec, std::span<const cd> grid, double tol = 1e-8,
                               const WeylOptions& o = {}, unsigned jobs = 1) {
  std::vector<cd> pts;
  for (cd z : grid) {
    const cd up(z.real(), std::abs(z.imag()));
    pts.push_back(up);
    pts.push_back(std::conj(up));
  }
  const auto samples = weyl_grid(spec, pts, o, jobs);
  Classification c;
  c.tol = tol;
  c.grid_size = grid.size();
  for (std::size_t i = 0; i < samples.size(); i += 2) {
    const cd z = samples[i].z, m = samples[i].m, m_conj = samples[i + 1].m;
    c.min_im_m = std::min(c.min_im_m, m.imag());
    c.min_im_zm = std::min(c.min_im_zm, (z * m).imag());
    c.max_symmetry_error = std::max(c.max_symmetry_error, std::abs(m_conj - std::conj(m)) / std::max(1.0, std::abs(m)));
  }
  c.herglotz = c.min_im_m >= -tol && c.max_symmetry_error <= 1e-12;
  c.stieltjes = c.herglotz && c.min_im_zm >= -tol;
  c.nonneg_spectrum_predicted = indef::nonneg_spectrum_predicted(spec);
  c.krein_structural = indef::krein_structural(spec);
  c.routes_agree = c.stieltjes == c.krein_structural;
  return c;
}

/// "re_z,im_z,re_m,im_m,trunc_x,est_err" rows.
inline void write_m_csv(std::ostream& os, std::span<const WeylSample> samples) {
  auto num = [](double v) {
    char buf[32];
    if (std::isinf(v)) return std::string(v > 0 ? "inf" : "-inf");
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  os << "re_z,im_z,re_m,im_m,trunc_x,est_err\n";
  for (const auto& s : samples) {
    os << num(s.z.real()) << ',' << num(s.z.imag()) << ',' << num(s.m.real()) << ','
       << num(s.m.imag()) << ',' << num(s.truncation_x) << ',' << num(s.est_error) << '\n';
  }
}

}  // namespace indef
