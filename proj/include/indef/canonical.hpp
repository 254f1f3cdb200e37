#pragma once

// Trace-normed canonical systems J U' = z H U and the correspondence between
// strings (L, omega, upsilon) and Hamiltonians via the travel coordinate.

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "indef/coeffs.hpp"
#include "indef/error.hpp"
#include "indef/propagate.hpp"
#include "indef/weyl.hpp"

namespace indef {

/// Constant H = [[h11, h12], [h12, 1 - h11]] on an interval of length `len`.
struct HamiltonianPiece {
  double len = 0.0;
  double h11 = 0.0;
  double h12 = 0.0;

  double h22() const { return 1.0 - h11; }
  double det() const { return h11 * h22() - h12 * h12; }
  bool indivisible_top() const { return h11 == 1.0 && h12 == 0.0; }  // [[1,0],[0,0]]
};

struct Hamiltonian {
  std::vector<HamiltonianPiece> pieces;
  double mesh = 0.0;         // travel-coordinate cell used for linear w; 0 if exact
  double tail_cutoff = kInf; // start of a frozen tail replacing an infinite linear-w segment

  Eigen::Matrix2d primitive(double s) const {
    Eigen::Matrix2d acc = Eigen::Matrix2d::Zero();
    double pos = 0.0;
    for (const auto& p : pieces) {
      if (s <= pos) break;
      const double t = std::min(s, pos + p.len) - pos;
      acc(0, 0) += t * p.h11;
      acc(0, 1) += t * p.h12;
      acc(1, 1) += t * p.h22();
      pos += p.len;
    }
    acc(1, 0) = acc(0, 1);
    return acc;
  }
};

inline constexpr double kDetSlack = 1e-12;

inline Hamiltonian validate_hamiltonian(Hamiltonian H) {
  if (H.pieces.empty()) throw Error(ErrorCode::InvalidHamiltonian, "no pieces");
  bool all_top = true;
  for (std::size_t i = 0; i < H.pieces.size(); ++i) {
    const auto& p = H.pieces[i];
    const bool last = i + 1 == H.pieces.size();
    if (std::isnan(p.len) || !(p.len > 0.0) || (std::isinf(p.len) && !last)) {
      throw Error(ErrorCode::InvalidHamiltonian, "piece " + std::to_string(i) + " has an invalid length");
    }
    if (!std::isfinite(p.h11) || !std::isfinite(p.h12) || p.h11 < 0.0 || p.h11 > 1.0) {
      throw Error(ErrorCode::InvalidHamiltonian, "piece " + std::to_string(i) + " is not trace normed");
    }
    if (p.det() < -kDetSlack) {
      throw Error(ErrorCode::InvalidHamiltonian, "piece " + std::to_string(i) + " has negative determinant");
    }
    if (!p.indivisible_top()) all_top = false;
  }
  if (!std::isinf(H.pieces.back().len)) {
    throw Error(ErrorCode::InvalidHamiltonian, "total length must be infinite");
  }
  if (all_top) throw Error(ErrorCode::InvalidHamiltonian, "H = [[1,0],[0,0]] almost everywhere");
  return H;
}

struct StringToHamiltonianOptions {
  double mesh = 2.5e-4;       // equal travel-coordinate cells on linear-w segments
  double tail_cutoff = 1e3;   // travel length meshed on an infinite linear-w segment
};

namespace detail {

inline void push_piece(std::vector<HamiltonianPiece>& out, HamiltonianPiece p) {
  if (!out.empty() && out.back().h11 == p.h11 && out.back().h12 == p.h12 && !std::isinf(out.back().len)) {
    out.back().len += p.len;
  } else {
    out.push_back(p);
  }
}

inline HamiltonianPiece piece_from_xi_rate(double len, double rate, double w) {
  HamiltonianPiece p;
  p.len = len;
  p.h11 = 1.0 - rate;
  p.h12 = rate * w;
  return p;
}

}  // namespace detail

/// H(s) = [[1 - xi', xi' w(xi)], [xi' w(xi), xi']].  Exact where w is constant;
/// on linear-w segments each mesh cell carries the cell average of H, so the
/// primitive of H is exact at the cell nodes.
inline Hamiltonian string_to_hamiltonian(const StringSpec& spec, const StringToHamiltonianOptions& o = {}) {
  const CoefficientView view(spec);
  Hamiltonian H;
  std::vector<HamiltonianPiece>& out = H.pieces;
  for (const Segment& seg : view.segments()) {
    if (seg.upsilon_atom > 0.0) detail::push_piece(out, {seg.upsilon_atom, 1.0, 0.0});
    const bool infinite = std::isinf(seg.b);
    if (seg.w_constant()) {
      const double w = seg.w_start();
      const double rate = 1.0 / (1.0 + w * w + seg.upsilon_density);
      const double len = infinite ? kInf : seg.sigma(seg.b - seg.a) - seg.sigma_start();
      detail::push_piece(out, detail::piece_from_xi_rate(len, rate, w));
      continue;
    }
    H.mesh = o.mesh;
    const double s0 = seg.sigma_start();
    double s_len = infinite ? o.tail_cutoff : seg.sigma(seg.b - seg.a) - s0;
    if (infinite) H.tail_cutoff = s0 + s_len;
    const long cells = std::max(1L, static_cast<long>(std::ceil(s_len / o.mesh)));
    const double ds = s_len / static_cast<double>(cells);
    double x_prev = seg.a;
    for (long k = 1; k <= cells; ++k) {
      const double x = k == cells && !infinite ? seg.b : view.xi(s0 + ds * static_cast<double>(k));
      const double dx = x - x_prev;
      const double dW = seg.w_integral(x - seg.a) - seg.w_integral(x_prev - seg.a);
      HamiltonianPiece p;
      p.len = ds;
      p.h11 = 1.0 - dx / ds;
      p.h12 = dW / ds;
      // keep the cell non-negative against rounding: |h12|^2 <= h11 h22
      const double bound = std::sqrt(std::max(0.0, p.h11 * p.h22()));
      p.h12 = std::clamp(p.h12, -bound, bound);
      out.push_back(p);
      x_prev = x;
    }
    if (infinite) {
      HamiltonianPiece tail = out.back();
      tail.len = kInf;
      out.push_back(tail);
    }
  }
  if (!spec.infinite_length()) out.push_back({kInf, 1.0, 0.0});
  return validate_hamiltonian(std::move(H));
}

/// Inverse construction: xi(s) = int_0^s H22, w = H12/H22 and the upsilon
/// distribution sigma(x) - x - int w^2.  A piece with H22 = 0 of finite length
/// becomes an upsilon atom; a final infinite one ends the string.
inline StringSpec hamiltonian_to_string(const Hamiltonian& raw) {
  const Hamiltonian H = validate_hamiltonian(raw);
  bool any_h22 = false;
  for (const auto& p : H.pieces) any_h22 = any_h22 || p.h22() > 0.0;
  if (!any_h22) throw Error(ErrorCode::DegenerateHamiltonian, "H22 vanishes identically");

  StringSpec spec;
  double x = 0.0;
  double w_prev = 0.0;
  for (const auto& p : H.pieces) {
    if (p.h22() == 0.0) {
      if (std::isinf(p.len)) break;
      spec.upsilon.atoms.push_back({x, p.len});
      continue;
    }
    const double h22 = p.h22();
    const double w = p.h12 / h22;
    if (w != w_prev) spec.omega.atoms.push_back({x, w - w_prev});
    w_prev = w;
    const double dx = std::isinf(p.len) ? kInf : p.len * h22;
    const double ups = std::max(0.0, p.det()) / (h22 * h22);
    if (ups > 0.0) spec.upsilon.density.push_back({x, x + dx, ups});
    x += dx;
  }
  spec.length = x;
  // merge abutting equal densities produced by mesh cells
  std::vector<DensityPiece> merged;
  for (const auto& d : spec.upsilon.density) {
    if (!merged.empty() && merged.back().b == d.a && merged.back().value == d.value) {
      merged.back().b = d.b;
    } else {
      merged.push_back(d);
    }
  }
  spec.upsilon.density = std::move(merged);
  return validate_spec(spec);
}

/// sup{s : H = [[1,0],[0,0]] a.e. on [0, s)}.
inline double indivisible_prefix(const Hamiltonian& H) {
  double s = 0.0;
  for (const auto& p : H.pieces) {
    if (!p.indivisible_top()) break;
    s += p.len;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Canonical system propagation.

struct CanonicalSample {
  double s = 0.0;
  Mat2 U;
};

struct CanonicalSolution {
  cd z;
  std::vector<CanonicalSample> samples;
};

namespace detail {

/// Generator -z J H with J = [[0,1],[-1,0]]; trace free.
inline Mat2 canonical_generator(const HamiltonianPiece& p, cd z) {
  Mat2 g;
  g << -z * p.h12, -z * p.h22(), z * p.h11, z * p.h12;
  return g;
}

/// exp(len G) for trace-free G: cosh(r) I + sinh(r)/r len G with r^2 = -z^2 len^2 det H.
inline Mat2 piece_exponential(const HamiltonianPiece& p, cd z, double len) {
  const Mat2 g = canonical_generator(p, z) * len;
  const cd d = -z * z * len * len * p.det();
  cd c, sr;
  if (std::abs(d) < 1e-13) {
    c = 1.0 + d / 2.0;
    sr = 1.0 + d / 6.0;
  } else {
    const cd r = std::sqrt(d);
    c = std::cosh(r);
    sr = std::sinh(r) / r;
  }
  return c * Mat2::Identity() + sr * g;
}

/// Chunk count keeping each factor's growth bounded by about e.
inline long exponential_chunks(const HamiltonianPiece& p, cd z, double len) {
  const double rate = std::abs(z) * std::sqrt(std::max(0.0, p.det()));
  return std::max(1L, static_cast<long>(std::ceil(rate * len)));
}

/// First row of lim_{t->inf} exp(t G) U0, up to a scalar.
inline cd tail_ratio(const HamiltonianPiece& p, cd z, const Mat2& U0) {
  const Mat2 g = canonical_generator(p, z);
  cd e11, e12;
  if (p.det() > 0.0) {
    cd r = std::sqrt(-z * z * p.det());
    if (r.real() < 0.0) r = -r;
    e11 = r + g(0, 0);
    e12 = g(0, 1);
  } else if (p.h22() > 0.0 || p.h12 != 0.0) {
    e11 = g(0, 0);
    e12 = g(0, 1);
  } else {
    e11 = 1.0;
    e12 = 0.0;
  }
  return (e11 * U0(0, 0) + e12 * U0(1, 0)) / (e11 * U0(0, 1) + e12 * U0(1, 1));
}

}  // namespace detail

/// U(z, s) at the requested sorted s without normalization (det U = 1).
inline CanonicalSolution canonical_solution(const Hamiltonian& H, cd z, std::span<const double> ss) {
  CanonicalSolution sol;
  sol.z = z;
  Mat2 U = Mat2::Identity();
  double pos = 0.0;
  std::size_t idx = 0;
  double used = 0.0;  // part of piece idx already applied
  for (double s : ss) {
    if (s < pos) throw Error(ErrorCode::PositionOutOfRange, "canonical samples must be sorted");
    while (pos < s) {
      const auto& p = H.pieces[idx];
      const double avail = p.len - used;
      const double step = std::min(avail, s - pos);
      const long n = detail::exponential_chunks(p, z, step);
      const Mat2 e = detail::piece_exponential(p, z, step / static_cast<double>(n));
      for (long k = 0; k < n; ++k) U = e * U;
      pos += step;
      used += step;
      if (used >= p.len && idx + 1 < H.pieces.size()) {
        ++idx;
        used = 0.0;
      }
    }
    sol.samples.push_back({s, U});
  }
  return sol;
}

struct CanonicalOptions {
  double tol = 1e-10;
  TailMode tail = TailMode::Exact;
  int max_truncations = 80;
};

/// m(z) = lim U11/U12.  The last (infinite) piece is constant, so the limit
/// is taken in closed form unless `Truncate` is requested.
inline cd canonical_m(const Hamiltonian& H, cd z, const CanonicalOptions& o = {}) {
  detail::require_nonreal(z);
  Mat2 U = Mat2::Identity();
  auto normalize = [&U] {
    const double s = U.cwiseAbs().maxCoeff();
    if (s > 1e100 || s < 1e-100) U /= s;
  };
  auto apply = [&](const HamiltonianPiece& p, double len) {
    const long n = detail::exponential_chunks(p, z, len);
    const Mat2 e = detail::piece_exponential(p, z, len / static_cast<double>(n));
    for (long k = 0; k < n; ++k) {
      U = e * U;
      normalize();
    }
  };
  for (std::size_t i = 0; i + 1 < H.pieces.size(); ++i) apply(H.pieces[i], H.pieces[i].len);
  const HamiltonianPiece& last = H.pieces.back();
  if (o.tail == TailMode::Exact) return detail::tail_ratio(last, z, U);

  cd prev = 0.0;
  int streak = 0;
  double diff = kInf;
  double step = 1.0;
  for (int k = 0; k < o.max_truncations; ++k, step *= 2.0) {
    apply(last, step);
    const cd m = U(0, 0) / U(0, 1);
    if (k > 0) {
      diff = std::abs(m - prev);
      streak = diff < o.tol * std::max(1.0, std::abs(m)) ? streak + 1 : 0;
      if (streak >= 3) return m;
    }
    prev = m;
  }
  throw Error(ErrorCode::TruncationNotConverged, "canonical truncations differ by " + std::to_string(diff));
}

}  // namespace indef
