#pragma once

// Solutions of -f'' = z omega f + z^2 upsilon f + chi via the equivalent
// first-order system for F = (f, f' + n_z f + q), where n_z is the normalized
// anti-derivative of z omega + z^2 upsilon and q the one of chi.
//
// Internally the state is carried as (f, f'(x-)) = G(n) F with the gauge
// G(n) = [[1, 0], [-n, 1]].  With n frozen on a step of length h the system
// step I + h A is G^-1 D(h) G (D a free drift), and a change of the frozen
// value is a kick d -= dn * f.  Atoms are pure kicks, so purely atomic
// strings are propagated exactly.  On a density piece the frozen value is
// sampled at substep midpoints (a symmetric kick/drift/kick composition),
// refined by step doubling with Richardson control.

#include <complex>
#include <cstdio>
#include <ostream>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "indef/coeffs.hpp"

namespace indef {

using cd = std::complex<double>;
using Mat2 = Eigen::Matrix2cd;

struct PropagationOptions {
  double tol = 1e-10;        // relative, per unit length of a density piece
  int max_doublings = 26;
};

/// One point of a solution trajectory.  `F2` is the second component of the
/// first-order system and `quasi` the regularized derivative f' + z w f.
struct SystemState {
  double x = 0.0;
  cd f;
  cd F2;
  cd quasi;
};

struct FundamentalSystem {
  cd z;
  std::vector<SystemState> theta;
  std::vector<SystemState> phi;
  cd wronskian;  // from the final state
  std::vector<cd> wronskian_at;  // per sample, from the gauge-free state
};

/// Exact step of F' = A F with A = [[-n, 1], [-n^2, n]] constant; A^2 = 0.
inline Mat2 exact_step_matrix(cd n, double dx) {
  Mat2 m;
  m << 1.0 - dx * n, dx, -dx * n * n, 1.0 + dx * n;
  return m;
}

inline SystemState exact_step(const SystemState& s, cd n, double dx) {
  const Mat2 m = exact_step_matrix(n, dx);
  SystemState out = s;
  out.x = s.x + dx;
  out.f = m(0, 0) * s.f + m(0, 1) * s.F2;
  out.F2 = m(1, 0) * s.f + m(1, 1) * s.F2;
  return out;
}

inline cd wronskian(const SystemState& a, const SystemState& b) { return a.f * b.F2 - a.F2 * b.f; }

/// Same value through the quasi-derivatives; better conditioned when z^2 Upsilon is large.
inline cd wronskian_quasi(const SystemState& a, const SystemState& b) {
  return a.f * b.quasi - a.quasi * b.f;
}

namespace detail {

using Mat3 = Eigen::Matrix3cd;

// Augmented state rows: (f, f'(x-), int f dchi).
inline Mat3 kick(cd dn) {
  Mat3 k = Mat3::Identity();
  k(1, 0) = -dn;
  return k;
}

// Free drift of length h; the third row integrates the linear f against a
// constant chi density rho.
inline Mat3 drift(double h, cd rho) {
  Mat3 d = Mat3::Identity();
  d(0, 1) = h;
  d(2, 0) = rho * h;
  d(2, 1) = rho * 0.5 * h * h;
  return d;
}

inline double norm_max(const Mat3& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace detail

/// Midpoint-frozen transfer over `len` with `substeps` equal substeps for the
/// local equation -f'' = kappa f (+ chi density rho); exposed for order tests.
inline detail::Mat3 chunk_transfer(cd kappa, cd rho, double len, long substeps) {
  using detail::Mat3;
  const double h = len / static_cast<double>(substeps);
  const Mat3 half = detail::kick(0.5 * kappa * h);
  Mat3 step = half * detail::drift(h, rho) * half;
  Mat3 acc = Mat3::Identity();
  for (long n = substeps; n > 0; n >>= 1) {
    if (n & 1) acc = step * acc;
    if (n > 1) step = step * step;
  }
  return acc;
}

namespace detail {

inline Mat3 controlled_chunk(cd kappa, cd rho, double len, double tol, int max_doublings) {
  Mat3 coarse = chunk_transfer(kappa, rho, len, 1);
  Mat3 prev_extrap;
  bool have_prev = false;
  for (int k = 1; k <= max_doublings; ++k) {
    const Mat3 fine = chunk_transfer(kappa, rho, len, 1L << k);
    const Mat3 extrap = (4.0 * fine - coarse) / 3.0;
    if (have_prev) {
      const double scale = std::max(1.0, norm_max(extrap));
      if (norm_max(extrap - prev_extrap) <= tol * scale) return extrap;
    }
    prev_extrap = extrap;
    have_prev = true;
    coarse = fine;
  }
  throw Error(ErrorCode::ToleranceNotMet,
              "step doubling did not reach tolerance on a density piece");
}

/// Interval [a, b) with constant local coefficients and the atoms at a.
struct Piece {
  double a = 0.0;
  double b = 0.0;
  cd atom_kick;          // z omega({a}) + z^2 upsilon({a})
  cd kappa;              // z omega' + z^2 upsilon' on (a, b)
  double chi_atom = 0.0;
  double chi_density = 0.0;
};

}  // namespace detail

/// Advances the pair of columns (theta, phi) -- or any two solutions -- of
/// the homogeneous equation, plus the running integrals against chi.
///
/// The state at position x holds f(x), f'(x-) and int_[0,x) f dchi, i.e.
/// atoms at x have not been applied yet.
class Propagator {
 public:
  using State = Eigen::Matrix<cd, 3, 2>;

  Propagator(const StringSpec& spec, cd z, PropagationOptions opts = {},
             const Measure* chi = nullptr)
      : spec_(spec), view_(spec), z_(z), opts_(opts) {
    build_pieces(chi);
    reset();
  }

  void reset() {
    state_.setZero();
    state_(0, 0) = 1.0;  // theta(0) = 1, theta'(0-) = 0
    state_(1, 1) = 1.0;  // phi(0) = 0, phi'(0-) = 1
    pos_ = 0.0;
    index_ = 0;
    atoms_applied_ = false;
    log_scale_ = 0.0;
  }

  void set_state(const State& s) { state_ = s; }
  const State& state() const { return state_; }
  double position() const { return pos_; }
  cd z() const { return z_; }
  const CoefficientView& view() const { return view_; }

  /// Rescale both columns jointly; ratios are unchanged.  Accumulated
  /// log-scale is available through log_scale().
  void set_normalizing(bool on) { normalize_ = on; }
  double log_scale() const { return log_scale_; }

  void advance_to(double x) {
    if (x < pos_) throw Error(ErrorCode::PositionOutOfRange, "propagation only runs forward");
    if (x > view_.length()) throw Error(ErrorCode::PositionOutOfRange, "position beyond L");
    if (std::isinf(x)) throw Error(ErrorCode::PositionOutOfRange, "cannot evaluate at infinity");
    while (pos_ < x) {
      const detail::Piece& p = pieces_[index_];
      if (pos_ == p.a && !atoms_applied_) {
        apply_atoms(p);
        atoms_applied_ = true;
      }
      const double end = std::min(p.b, x);
      propagate(p, end - pos_);
      pos_ = end;
      if (pos_ == p.b && index_ + 1 < pieces_.size()) {
        ++index_;
        atoms_applied_ = false;
      }
    }
  }

  /// n_z at x from the left.
  cd n_left(double x) const {
    const auto c = view_.at(x);
    return z_ * c.w + z_ * z_ * c.upsilon;
  }

  SystemState column_state(int col) const {
    const auto c = view_.at(pos_);
    const cd f = state_(0, col);
    const cd d = state_(1, col);
    SystemState s;
    s.x = pos_;
    s.f = f;
    s.F2 = d + (z_ * c.w + z_ * z_ * c.upsilon) * f;
    s.quasi = d + z_ * c.w * f;
    return s;
  }

 private:
  void build_pieces(const Measure* chi) {
    std::vector<double> cuts;
    for (const auto& s : view_.segments()) cuts.push_back(s.a);
    if (chi) {
      for (const auto& at : chi->atoms) cuts.push_back(at.x);
      for (const auto& p : chi->density) {
        cuts.push_back(p.a);
        if (p.b < view_.length()) cuts.push_back(p.b);
      }
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    cuts.push_back(view_.length());
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      detail::Piece p;
      p.a = cuts[i];
      p.b = cuts[i + 1];
      const double mid = std::isinf(p.b) ? p.a + 1.0 : 0.5 * (p.a + p.b);
      p.atom_kick = z_ * spec_.omega.atom_at(p.a) + z_ * z_ * spec_.upsilon.atom_at(p.a);
      p.kappa = z_ * spec_.omega.density_at(mid) + z_ * z_ * spec_.upsilon.density_at(mid);
      if (chi) {
        p.chi_atom = chi->atom_at(p.a);
        p.chi_density = chi->density_at(mid);
      }
      pieces_.push_back(p);
    }
  }

  void apply_atoms(const detail::Piece& p) {
    for (int c = 0; c < 2; ++c) {
      state_(2, c) += p.chi_atom * state_(0, c);
      state_(1, c) -= p.atom_kick * state_(0, c);
    }
  }

  void propagate(const detail::Piece& p, double len) {
    if (len <= 0.0) return;
    if (p.kappa == 0.0) {
      state_ = detail::drift(len, p.chi_density) * state_;
      renormalize();
      return;
    }
    // Chunks short enough that the local solution grows at most by ~e.
    const double chunk_max = 1.0 / std::sqrt(std::abs(p.kappa));
    const long count = static_cast<long>(std::ceil(len / chunk_max));
    const double chunk = len / static_cast<double>(count);
    const double tol = std::max(opts_.tol * std::min(1.0, chunk), 1e-14);
    const detail::Mat3 m =
        detail::controlled_chunk(p.kappa, p.chi_density, chunk, tol, opts_.max_doublings);
    for (long i = 0; i < count; ++i) {
      state_ = m * state_;
      renormalize();
    }
  }

  void renormalize() {
    if (!normalize_) return;
    const double s = state_.topRows<2>().cwiseAbs().maxCoeff();
    if (s > 1e100 || (s < 1e-100 && s > 0.0)) {
      state_ /= s;
      log_scale_ += std::log(s);
    }
  }

  StringSpec spec_;
  CoefficientView view_;
  cd z_;
  PropagationOptions opts_;
  std::vector<detail::Piece> pieces_;
  State state_;
  double pos_ = 0.0;
  std::size_t index_ = 0;
  bool atoms_applied_ = false;
  bool normalize_ = false;
  double log_scale_ = 0.0;
};

inline void check_positions(const StringSpec& spec, std::span<const double> xs) {
  double prev = 0.0;
  for (double x : xs) {
    if (!(x >= 0.0) || x > spec.length || std::isinf(x)) {
      throw Error(ErrorCode::PositionOutOfRange, "sample position " + std::to_string(x));
    }
    if (x < prev) throw Error(ErrorCode::PositionOutOfRange, "sample positions must be sorted");
    prev = x;
  }
}

/// theta, phi with theta(0) = phi'(0-) = 1 and theta'(0-) = phi(0) = 0.
inline FundamentalSystem fundamental_system(const StringSpec& spec, cd z,
                                            std::span<const double> xs,
                                            PropagationOptions opts = {}) {
  check_positions(spec, xs);
  Propagator prop(spec, z, opts);
  FundamentalSystem fs;
  fs.z = z;
  fs.wronskian = 1.0;
  for (double x : xs) {
    prop.advance_to(x);
    fs.theta.push_back(prop.column_state(0));
    fs.phi.push_back(prop.column_state(1));
    // gauge-free form; avoids the n_z f cancellation hidden in F2
    const auto& st = prop.state();
    fs.wronskian = st(0, 0) * st(1, 1) - st(1, 0) * st(0, 1);
    fs.wronskian_at.push_back(fs.wronskian);
  }
  return fs;
}

/// Solution of the inhomogeneous equation with f(0) = d1, f'(0-) = d2, via
/// variation of parameters: f = d1 theta + d2 phi
///   + theta(x) int_[0,x) phi dchi - phi(x) int_[0,x) theta dchi.
inline std::vector<SystemState> solve_inhomogeneous(const StringSpec& spec, cd z,
                                                    const Measure& chi, cd d1, cd d2,
                                                    std::span<const double> xs,
                                                    PropagationOptions opts = {}) {
  check_positions(spec, xs);
  Propagator prop(spec, z, opts, &chi);
  std::vector<SystemState> out;
  for (double x : xs) {
    prop.advance_to(x);
    const auto& s = prop.state();
    const cd th = s(0, 0), dth = s(1, 0), ith = s(2, 0);
    const cd ph = s(0, 1), dph = s(1, 1), iph = s(2, 1);
    const cd f = d1 * th + d2 * ph + th * iph - ph * ith;
    const cd df = d1 * dth + d2 * dph + dth * iph - dph * ith;  // f'(x-)
    const auto c = prop.view().at(x);
    SystemState st;
    st.x = x;
    st.f = f;
    st.F2 = df + (z * c.w + z * z * c.upsilon) * f + chi.distribution(x);
    st.quasi = st.F2 - z * z * c.upsilon * f;
    out.push_back(st);
  }
  return out;
}

/// Debug export "x, re_f, im_f, re_quasi, im_quasi".
inline void write_trajectory_csv(std::ostream& os, std::span<const SystemState> traj) {
  char buf[160];
  os << "x,re_f,im_f,re_quasi,im_quasi\n";
  for (const auto& s : traj) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", s.x, s.f.real(),
                  s.f.imag(), s.quasi.real(), s.quasi.imag());
    os << buf;
  }
}

}  // namespace indef
