#pragma once

// Spectral data of a string: eigenvalues and residue masses of discrete
// strings, Stieltjes inversion of sampled m, the Green's kernel and the
// transform f -> f-hat with its Parseval identity.

#include <algorithm>
#include <array>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "indef/weyl.hpp"

namespace indef {

struct SpectralAtom {
  double lambda = 0.0;
  double mass = 0.0;
};

struct DensitySample {
  double lambda = 0.0;
  double density = 0.0;
};

struct SpectralMeasure {
  std::vector<SpectralAtom> atoms;
  std::vector<DensitySample> continuous;
  double epsilon_used = 0.0;
};

/// Real interval [lo, hi].
struct Window {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  bool contains(double x) const { return x >= lo && x <= hi; }
};

/// Element of H'_*[0,L) x L^2(upsilon): f1 piecewise linear through `f1`
/// knots (zero past the last one), f2 given at upsilon atoms.
struct HilbertElement {
  std::vector<std::pair<double, double>> f1;
  std::vector<std::pair<double, double>> f2;

  double value(double x) const {
    if (f1.empty() || x >= f1.back().first) return 0.0;
    auto it = std::upper_bound(f1.begin(), f1.end(), x,
                               [](double v, const std::pair<double, double>& k) { return v < k.first; });
    const auto& q = *it;
    const auto& p = *(it - 1);
    return p.second + (q.second - p.second) * (x - p.first) / (q.first - p.first);
  }
};

inline constexpr std::size_t kMaxSpectralAtoms = 64;

/// Eigenvalue of a discrete string with its mass and the eigenvector
/// (phi, lambda phi), phi normalized by phi'(0) = 1.
struct DiscreteMode {
  double lambda = 0.0;
  double mass = 0.0;
  HilbertElement eigenvector;
};

namespace detail {

// One breakpoint of an atomic string: kick -(alpha z + beta z^2) f on f'.
struct Kick {
  double x;
  double alpha;
  double beta;
};

inline std::vector<Kick> atomic_kicks(const StringSpec& spec) {
  if (spec.infinite_length()) throw Error(ErrorCode::NotFiniteLength, "discrete spectrum needs finite L");
  if (!spec.omega.purely_atomic() || !spec.upsilon.purely_atomic())
    throw Error(ErrorCode::NotAtomic, "discrete spectrum needs purely atomic omega and upsilon");
  std::vector<Kick> ks;
  for (const auto& a : spec.omega.atoms) ks.push_back({a.x, a.mass, 0.0});
  for (const auto& a : spec.upsilon.atoms) ks.push_back({a.x, 0.0, a.mass});
  std::sort(ks.begin(), ks.end(), [](const Kick& a, const Kick& b) { return a.x < b.x; });
  std::vector<Kick> merged;
  for (const auto& k : ks) {
    if (!merged.empty() && merged.back().x == k.x) {
      merged.back().alpha += k.alpha;
      merged.back().beta += k.beta;
    } else {
      merged.push_back(k);
    }
  }
  if (merged.size() > kMaxSpectralAtoms)
    throw Error(ErrorCode::UnsupportedShape, "more than 64 atoms in a discrete string");
  return merged;
}

struct AtomicValues {
  double theta = 0.0;
  double phi = 0.0;
  double phi_z = 0.0;
};

inline AtomicValues atomic_values(const std::vector<Kick>& ks, double L, double z) {
  double t = 1.0, dt = 0.0, f = 0.0, d = 1.0, fz = 0.0, dz = 0.0;
  double pos = 0.0;
  auto drift = [&](double h) {
    t += h * dt;
    f += h * d;
    fz += h * dz;
  };
  for (const auto& k : ks) {
    drift(k.x - pos);
    const double kick = k.alpha * z + k.beta * z * z;
    const double kick_z = k.alpha + 2.0 * k.beta * z;
    dt -= kick * t;
    dz -= kick_z * f + kick * fz;
    d -= kick * f;
    pos = k.x;
  }
  drift(L - pos);
  return {t, f, fz};
}

// Newton on phi(., L); kept only if it stays next to the pencil value.
inline double polish_root(const std::vector<Kick>& ks, double L, double z0) {
  double z = z0;
  for (int it = 0; it < 30; ++it) {
    const auto v = atomic_values(ks, L, z);
    if (v.phi_z == 0.0) break;
    const double step = v.phi / v.phi_z;
    z -= step;
    if (std::abs(step) <= 4 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(z))) break;
  }
  return std::abs(z - z0) <= 1e-6 * std::max(1.0, std::abs(z0)) ? z : z0;
}

template <class F>
auto parallel_map(std::span<const double> xs, F&& f, int jobs) {
  using R = decltype(f(0.0));
  std::vector<R> out(xs.size());
  const std::size_t n = std::max<std::size_t>(1, std::min<std::size_t>(std::max(jobs, 1), xs.size()));
  std::vector<std::exception_ptr> errs(n);
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t i = t; i < xs.size(); i += n) out[i] = f(xs[i]);
        } catch (...) {
          errs[t] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace detail

namespace detail {

// With u the values at the atoms x > 0 and w = lambda sqrt(beta) u, the
// problem K u = lambda A u + lambda^2 B u becomes S y = (1/lambda) M y with
// M = diag(K, I) positive definite and S = [[A, sqrt B], [sqrt B, 0]].
// For M-normalized y the mass 1 / ||phi||^2 is the squared slope at 0.
inline std::vector<DiscreteMode> discrete_spectrum(const StringSpec& spec) {
  auto ks = atomic_kicks(spec);
  std::erase_if(ks, [](const Kick& k) { return k.x <= 0.0 || (k.alpha == 0.0 && k.beta == 0.0); });
  const auto n = static_cast<Eigen::Index>(ks.size());
  if (n == 0) return {};
  std::vector<Eigen::Index> up;
  for (Eigen::Index i = 0; i < n; ++i)
    if (ks[i].beta > 0.0) up.push_back(i);
  const auto nb = static_cast<Eigen::Index>(up.size());

  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n + nb, n + nb);
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n + nb, n + nb);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double left = ks[i].x - (i > 0 ? ks[i - 1].x : 0.0);
    const double right = (i + 1 < n ? ks[i + 1].x : spec.length) - ks[i].x;
    M(i, i) = 1.0 / left + 1.0 / right;
    if (i + 1 < n) M(i, i + 1) = M(i + 1, i) = -1.0 / right;
    S(i, i) = ks[i].alpha;
  }
  for (Eigen::Index j = 0; j < nb; ++j) {
    const double r = std::sqrt(ks[up[j]].beta);
    S(up[j], n + j) = S(n + j, up[j]) = r;
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(S, M);
  if (es.info() != Eigen::Success) throw Error(ErrorCode::ToleranceNotMet, "eigenvalue solver failed");

  // rank S = n + nb eigenvalues are finite; the rest sit at 1/lambda = 0
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n + nb));
  for (Eigen::Index k = 0; k < n + nb; ++k) idx[k] = k;
  const auto& nu = es.eigenvalues();
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return std::abs(nu(a)) > std::abs(nu(b)); });

  std::vector<DiscreteMode> out;
  for (Eigen::Index j = 0; j < n + nb; ++j) {
    const Eigen::Index k = idx[static_cast<std::size_t>(j)];
    if (nu(k) == 0.0) throw Error(ErrorCode::ToleranceNotMet, "eigenvalue at infinity");
    const auto y = es.eigenvectors().col(k);
    const double slope = y(0) / ks[0].x;
    DiscreteMode mode{polish_root(ks, spec.length, 1.0 / nu(k)), slope * slope / y.dot(M * y), {}};
    auto& e = mode.eigenvector;
    e.f1.emplace_back(0.0, 0.0);
    for (Eigen::Index i = 0; i < n; ++i) e.f1.emplace_back(ks[i].x, y(i) / slope);
    e.f1.emplace_back(spec.length, 0.0);
    for (Eigen::Index i : up) e.f2.emplace_back(ks[i].x, mode.lambda * y(i) / slope);
    out.push_back(std::move(mode));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.lambda < b.lambda; });
  for (std::size_t i = 1; i < out.size(); ++i)
    if (std::abs(out[i].lambda - out[i - 1].lambda) <= 1e-12 * std::max(1.0, std::abs(out[i].lambda)))
      throw Error(ErrorCode::ToleranceNotMet, "eigenvalues not simple");
  return out;
}

}  // namespace detail

/// Real roots of phi(., L) inside the window, ascending.
inline std::vector<double> discrete_eigenvalues(const StringSpec& spec, Window window = {}) {
  std::vector<double> out;
  for (const auto& a : detail::discrete_spectrum(spec))
    if (window.contains(a.lambda)) out.push_back(a.lambda);
  return out;
}

/// Eigenvalues, masses and eigenvectors of a discrete string.
inline std::vector<DiscreteMode> discrete_modes(const StringSpec& spec) { return detail::discrete_spectrum(spec); }

/// Eigenvalues with masses mu({lambda}) = -Res m = 1 / ||phi(lambda)||^2,
/// the norm taken in H'_* x L^2(upsilon) of the eigenvector (phi, lambda phi).
inline SpectralMeasure spectral_measure_discrete(const StringSpec& spec, Window window = {}) {
  SpectralMeasure mu;
  for (const auto& a : detail::discrete_spectrum(spec))
    if (window.contains(a.lambda)) mu.atoms.push_back({a.lambda, a.mass});
  return mu;
}

struct InversionOptions {
  std::vector<double> eps{1e-2, 1e-3, 1e-4};
  double atom_stability = 0.05;   // relative spread of eps * Im m across the eps ladder
  double min_mass = 1e-8;         // peaks below this are ignored
  int proxy_samples = 400;
  int jobs = 1;
};

namespace detail {

template <class M>
double golden_peak(const M& im, double a, double b) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = im(c), fd = im(d);
  for (int i = 0; i < 200 && (b - a) > 1e-13 * std::max(1.0, std::abs(a)); ++i) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = im(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = im(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace detail

/// Recovers mu on [lo, hi] from boundary values of m(lambda + i eps).
/// Atoms are peaks of Im m whose mass eps * Im m is stable along the eps
/// ladder; their masses are extrapolated linearly in eps.  The remainder
/// is reported as a density proxy sampled on a uniform grid.
inline SpectralMeasure stieltjes_inversion(const std::function<cd(cd)>& m, Window window,
                                           InversionOptions o = {}) {
  if (!(std::isfinite(window.lo) && std::isfinite(window.hi)) || !(window.lo < window.hi))
    throw Error(ErrorCode::PositionOutOfRange, "inversion window must be a bounded interval");
  if (window.lo <= 0.0 && window.hi >= 0.0)
    throw Error(ErrorCode::WindowTouchesAtomZero, "window must exclude 0");
  if (o.eps.size() < 2) throw Error(ErrorCode::ToleranceNotMet, "need at least two eps values");
  std::sort(o.eps.begin(), o.eps.end(), std::greater<>());
  const double e0 = o.eps.front();

  auto im_at = [&](double lambda, double e) { return m(cd(lambda, e)).imag(); };

  const double h = 0.5 * e0;
  const auto n = static_cast<std::size_t>(std::ceil((window.hi - window.lo) / h));
  std::vector<double> grid(n + 1);
  for (std::size_t i = 0; i <= n; ++i) grid[i] = std::min(window.hi, window.lo + h * static_cast<double>(i));
  const auto coarse = detail::parallel_map(grid, [&](double l) { return im_at(l, e0); }, o.jobs);

  std::vector<double> peaks;
  for (std::size_t i = 0; i <= n; ++i) {
    const double left = i > 0 ? coarse[i - 1] : -std::numeric_limits<double>::infinity();
    const double right = i < n ? coarse[i + 1] : -std::numeric_limits<double>::infinity();
    if (coarse[i] > left && coarse[i] >= right && e0 * coarse[i] >= o.min_mass) peaks.push_back(grid[i]);
  }

  SpectralMeasure mu;
  mu.epsilon_used = o.eps.back();
  auto refine = [&](double l0) -> std::optional<SpectralAtom> {
    double at = l0, bracket = e0;
    std::vector<double> M;
    for (double e : o.eps) {
      at = detail::golden_peak([&](double l) { return im_at(l, e); }, at - bracket, at + bracket);
      M.push_back(e * im_at(at, e));
      bracket = 2.0 * e;
    }
    const double last = M.back();
    if (!(last > 0.0)) return std::nullopt;
    for (double v : M)
      if (std::abs(v - last) > o.atom_stability * last) return std::nullopt;
    const double e1 = o.eps[o.eps.size() - 2], e2 = o.eps.back();
    const double r = e1 / e2;
    const double mass = (r * M.back() - M[M.size() - 2]) / (r - 1.0);
    if (!window.contains(at)) return std::nullopt;
    return SpectralAtom{at, mass};
  };
  for (double l0 : peaks)
    if (auto a = refine(l0)) mu.atoms.push_back(*a);

  // Continuous remainder with atom Lorentzians removed, extrapolated to eps = 0.
  const double e1 = o.eps[0], e2 = o.eps[1];
  const int np = std::max(o.proxy_samples, 2);
  std::vector<double> ls;
  for (int i = 0; i <= np; ++i) {
    const double l = window.lo + (window.hi - window.lo) * i / np;
    bool near_atom = false;
    for (const auto& a : mu.atoms) near_atom |= std::abs(l - a.lambda) < 50.0 * e1;
    if (!near_atom) ls.push_back(l);
  }
  auto remainder = [&](double l, double e) {
    double v = im_at(l, e);
    for (const auto& a : mu.atoms) v -= a.mass * e / ((l - a.lambda) * (l - a.lambda) + e * e);
    return v / std::numbers::pi;
  };
  const auto d = detail::parallel_map(
      ls, [&](double l) { return ((e1 / e2) * remainder(l, e2) - remainder(l, e1)) / (e1 / e2 - 1.0); },
      o.jobs);
  for (std::size_t i = 0; i < ls.size(); ++i) mu.continuous.push_back({ls[i], d[i]});
  return mu;
}

/// Inversion of the string's own m.
inline SpectralMeasure stieltjes_inversion(const StringSpec& spec, Window window, InversionOptions o = {},
                                           const WeylOptions& wo = {}) {
  return stieltjes_inversion([&](cd z) { return weyl_m_value(spec, z, wo); }, window, std::move(o));
}

/// mu([a, b)): atoms plus the trapezoid rule on the density proxy.
inline double interval_mass(const SpectralMeasure& mu, double a, double b) {
  double s = 0.0;
  for (const auto& at : mu.atoms)
    if (at.lambda >= a && at.lambda < b) s += at.mass;
  for (std::size_t i = 1; i < mu.continuous.size(); ++i) {
    const auto& p = mu.continuous[i - 1];
    const auto& q = mu.continuous[i];
    const double lo = std::max(a, p.lambda), hi = std::min(b, q.lambda);
    if (hi > lo && q.lambda > p.lambda) {
      auto at = [&](double l) { return p.density + (q.density - p.density) * (l - p.lambda) / (q.lambda - p.lambda); };
      s += 0.5 * (at(lo) + at(hi)) * (hi - lo);
    }
  }
  return s;
}

/// G(x, t) = (1, z)^T psi(max) phi(min) / W(psi, phi); W = 1 by normalization.
inline std::array<cd, 2> green_kernel(const StringSpec& spec, cd z, double x, double t,
                                      const WeylOptions& o = {}) {
  const double lo = std::min(x, t), hi = std::max(x, t);
  const std::array<double, 1> a{lo}, b{hi};
  const cd phi = fundamental_system(spec, z, a, o.prop).phi[0].f;
  const cd psi = weyl_solution_psi(spec, z, b, o)[0].f;
  const cd g = psi * phi;
  return {g, z * g};
}

inline void validate_element(const StringSpec& spec, const HilbertElement& f) {
  auto bad = [](const char* what) { throw Error(ErrorCode::UnsupportedShape, what); };
  if (f.f1.empty() || f.f1.front().first != 0.0 || f.f1.front().second != 0.0) bad("f1 must start at (0, 0)");
  if (f.f1.back().second != 0.0) bad("f1 must vanish at its last knot");
  if (f.f1.back().first > spec.length) bad("f1 knot beyond L");
  for (std::size_t i = 1; i < f.f1.size(); ++i)
    if (!(f.f1[i].first > f.f1[i - 1].first) || !std::isfinite(f.f1[i].second)) bad("f1 knots must increase");
  for (const auto& [q, v] : f.f2)
    if (spec.upsilon.atom_at(q) <= 0.0 || !std::isfinite(v)) bad("f2 lives on upsilon atoms only");
}

/// delta_x with <f, delta_x> = f1(x); finite L only.
inline HilbertElement delta_element(const StringSpec& spec, double x) {
  if (spec.infinite_length()) throw Error(ErrorCode::NotFiniteLength, "delta_x needs finite L");
  if (!(x >= 0.0 && x < spec.length)) throw Error(ErrorCode::PositionOutOfRange, "delta_x position");
  HilbertElement d;
  d.f1.emplace_back(0.0, 0.0);
  if (x > 0.0) d.f1.emplace_back(x, x * (1.0 - x / spec.length));
  d.f1.emplace_back(spec.length, 0.0);
  return d;
}

inline double inner_product(const StringSpec& spec, const HilbertElement& f, const HilbertElement& g) {
  std::vector<double> xs;
  for (const auto& k : f.f1) xs.push_back(k.first);
  for (const auto& k : g.f1) xs.push_back(k.first);
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  double s = 0.0;
  for (std::size_t i = 1; i < xs.size(); ++i) {
    const double a = xs[i - 1], b = xs[i], h = b - a;
    const double mid = 0.5 * (a + b);
    // slopes are constant on (a, b); evaluate them at the midpoint
    const double df = (f.value(mid) - f.value(a)) / (0.5 * h);
    const double dg = (g.value(mid) - g.value(a)) / (0.5 * h);
    s += df * dg * h;
  }
  for (const auto& [q, v] : f.f2)
    for (const auto& [r, w] : g.f2)
      if (q == r) s += v * w * spec.upsilon.atom_at(q);
  return s;
}

/// f-hat(lambda) = int phi' f1' dx + int lambda phi f2 dupsilon.
inline std::vector<double> transform_hat(const StringSpec& spec, const HilbertElement& f,
                                         std::span<const double> lambdas, const PropagationOptions& po = {}) {
  validate_element(spec, f);
  std::vector<double> xs;
  for (const auto& k : f.f1) xs.push_back(k.first);
  for (const auto& k : f.f2) xs.push_back(k.first);
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  std::vector<double> out;
  for (double lambda : lambdas) {
    const auto fs = fundamental_system(spec, cd(lambda, 0.0), xs, po);
    auto phi = [&](double x) {
      const auto it = std::lower_bound(xs.begin(), xs.end(), x);
      return fs.phi[static_cast<std::size_t>(it - xs.begin())].f.real();
    };
    double s = 0.0;
    for (std::size_t i = 1; i < f.f1.size(); ++i) {
      const auto& [a, fa] = f.f1[i - 1];
      const auto& [b, fb] = f.f1[i];
      s += (fb - fa) / (b - a) * (phi(b) - phi(a));
    }
    for (const auto& [q, v] : f.f2) s += spec.upsilon.atom_at(q) * lambda * phi(q) * v;
    out.push_back(s);
  }
  return out;
}

/// ||f-hat||^2 in L^2(mu) for a discrete string.  At an eigenvalue
/// f-hat(lambda) = <f, (phi, lambda phi)>, evaluated on the eigenvector
/// from the pencil; propagating phi at large |lambda| is ill-conditioned.
inline double spectral_norm2(const StringSpec& spec, const HilbertElement& f) {
  validate_element(spec, f);
  double s = 0.0;
  for (const auto& mode : detail::discrete_spectrum(spec)) {
    const double v = inner_product(spec, f, mode.eigenvector);
    s += mode.mass * v * v;
  }
  return s;
}

/// ||P f||^2 for a discrete string, P the projection onto the closure of
/// dom T: span of delta_p over atom positions p > 0 plus the indicators of
/// upsilon atoms q > 0 in the second component.
inline double projected_norm2(const StringSpec& spec, const HilbertElement& f) {
  const auto ks = detail::atomic_kicks(spec);
  validate_element(spec, f);
  const double L = spec.length;
  std::vector<double> ps, qs;
  for (const auto& k : ks) {
    if (k.x <= 0.0) continue;
    ps.push_back(k.x);
    if (k.beta > 0.0) qs.push_back(k.x);
  }
  const auto np = static_cast<Eigen::Index>(ps.size()), nq = static_cast<Eigen::Index>(qs.size());
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(np + nq, np + nq);
  Eigen::VectorXd b(np + nq);
  for (Eigen::Index i = 0; i < np; ++i) {
    for (Eigen::Index j = 0; j < np; ++j) {
      const double lo = std::min(ps[i], ps[j]), hi = std::max(ps[i], ps[j]);
      G(i, j) = lo * (1.0 - hi / L);
    }
    b(i) = f.value(ps[i]);
  }
  for (Eigen::Index i = 0; i < nq; ++i) {
    const double beta = spec.upsilon.atom_at(qs[i]);
    G(np + i, np + i) = beta;
    double v = 0.0;
    for (const auto& [q, w] : f.f2)
      if (q == qs[i]) v = w;
    b(np + i) = v * beta;
  }
  if (G.size() == 0) return 0.0;
  return b.dot(G.ldlt().solve(b));
}

}  // namespace indef
