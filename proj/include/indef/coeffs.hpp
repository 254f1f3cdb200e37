#pragma once

// String coefficients (L, omega, upsilon) for -u'' = z omega u + z^2 upsilon u,
// restricted to finitely many atoms plus piecewise-constant densities.
//
// All distribution functions are left-continuous: an atom at x only affects
// values at points strictly greater than x.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "indef/error.hpp"

namespace indef {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Atom {
  double x = 0.0;
  double mass = 0.0;
};

/// Constant density `value` on [a, b). `b` may be +inf on a half-line.
struct DensityPiece {
  double a = 0.0;
  double b = 0.0;
  double value = 0.0;
};

struct Measure {
  std::vector<Atom> atoms;
  std::vector<DensityPiece> density;

  bool empty() const { return atoms.empty() && density.empty(); }
  bool purely_atomic() const { return density.empty(); }

  /// Mass of the atom sitting exactly at x (0 if none). Atoms must be sorted.
  double atom_at(double x) const {
    auto it = std::lower_bound(atoms.begin(), atoms.end(), x,
                               [](const Atom& a, double v) { return a.x < v; });
    return (it != atoms.end() && it->x == x) ? it->mass : 0.0;
  }

  /// Density value on the open interval containing `mid`. Pieces must be sorted.
  double density_at(double mid) const {
    for (const auto& p : density) {
      if (p.a <= mid && mid < p.b) return p.value;
      if (p.a > mid) break;
    }
    return 0.0;
  }

  /// Distribution function nu([0, x)).
  double distribution(double x) const {
    double total = 0.0;
    for (const auto& at : atoms) {
      if (at.x < x) total += at.mass;
    }
    for (const auto& p : density) {
      if (x > p.a) total += p.value * (std::min(x, p.b) - p.a);
    }
    return total;
  }
};

struct StringSpec {
  double length = 1.0;  // L, may be kInf
  Measure omega;
  Measure upsilon;

  bool infinite_length() const { return std::isinf(length); }
  /// 1/L with the convention 1/inf = 0.
  double inverse_length() const { return infinite_length() ? 0.0 : 1.0 / length; }
};

namespace detail {

inline void normalize_measure(Measure& m, double length, bool non_negative,
                              const char* name) {
  const std::string label(name);
  for (const auto& at : m.atoms) {
    if (!std::isfinite(at.x) || !std::isfinite(at.mass)) {
      throw Error(ErrorCode::NonFiniteValue, label + " atom has a non-finite field");
    }
    if (at.x < 0.0 || at.x >= length) {
      throw Error(ErrorCode::PositionOutOfRange,
                  label + " atom at " + std::to_string(at.x) + " outside [0, L)");
    }
    if (non_negative && at.mass < 0.0) {
      throw Error(ErrorCode::NegativeUpsilon,
                  label + " atom at " + std::to_string(at.x) + " has negative mass");
    }
  }
  std::sort(m.atoms.begin(), m.atoms.end(),
            [](const Atom& l, const Atom& r) { return l.x < r.x; });
  std::vector<Atom> merged;
  for (const auto& at : m.atoms) {
    if (!merged.empty() && merged.back().x == at.x) {
      merged.back().mass += at.mass;
    } else {
      merged.push_back(at);
    }
  }
  std::erase_if(merged, [](const Atom& a) { return a.mass == 0.0; });
  m.atoms = std::move(merged);

  for (const auto& p : m.density) {
    if (!std::isfinite(p.a) || std::isnan(p.b) || !std::isfinite(p.value)) {
      throw Error(ErrorCode::NonFiniteValue, label + " density piece has a non-finite field");
    }
    if (p.a < 0.0 || p.a >= length || !(p.b > p.a) || p.b > length) {
      throw Error(ErrorCode::PositionOutOfRange,
                  label + " density piece [" + std::to_string(p.a) + ", " +
                      std::to_string(p.b) + ") outside [0, L)");
    }
    if (non_negative && p.value < 0.0) {
      throw Error(ErrorCode::NegativeUpsilon, label + " density is negative");
    }
  }
  std::sort(m.density.begin(), m.density.end(),
            [](const DensityPiece& l, const DensityPiece& r) { return l.a < r.a; });
  for (std::size_t i = 1; i < m.density.size(); ++i) {
    if (m.density[i].a < m.density[i - 1].b) {
      throw Error(ErrorCode::OverlappingDensityIntervals,
                  label + " density pieces overlap near " + std::to_string(m.density[i].a));
    }
  }
  std::erase_if(m.density, [](const DensityPiece& p) { return p.value == 0.0; });
}

}  // namespace detail

/// Checks the hypotheses on (L, omega, upsilon) and returns the normalized
/// spec: atoms sorted and merged, zero-mass atoms and zero densities dropped.
inline StringSpec validate_spec(StringSpec raw) {
  if (std::isnan(raw.length) || !(raw.length > 0.0)) {
    throw Error(ErrorCode::NonPositiveLength, "L must be positive");
  }
  if (raw.length == -kInf) throw Error(ErrorCode::NonPositiveLength, "L must be positive");
  detail::normalize_measure(raw.omega, raw.length, false, "omega");
  detail::normalize_measure(raw.upsilon, raw.length, true, "upsilon");
  return raw;
}

/// Sum of two piecewise-constant densities, returned as disjoint sorted pieces.
inline std::vector<DensityPiece> add_densities(const std::vector<DensityPiece>& lhs,
                                               const std::vector<DensityPiece>& rhs) {
  std::vector<double> cuts;
  for (const auto* side : {&lhs, &rhs}) {
    for (const auto& p : *side) {
      cuts.push_back(p.a);
      cuts.push_back(p.b);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  auto value_on = [](const std::vector<DensityPiece>& ps, double a, double b) {
    double v = 0.0;
    for (const auto& p : ps) {
      if (p.a <= a && b <= p.b) v += p.value;
    }
    return v;
  };
  std::vector<DensityPiece> out;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double v = value_on(lhs, cuts[i], cuts[i + 1]) + value_on(rhs, cuts[i], cuts[i + 1]);
    if (v == 0.0) continue;
    if (!out.empty() && out.back().b == cuts[i] && out.back().value == v) {
      out.back().b = cuts[i + 1];
    } else {
      out.push_back({cuts[i], cuts[i + 1], v});
    }
  }
  return out;
}

struct CoefficientValues {
  double w = 0.0;        // omega([0, x))
  double upsilon = 0.0;  // upsilon([0, x))
  double sigma = 0.0;    // x + int_0^x w^2 + upsilon([0, x))
};

/// Maximal interval [a, b) on which both densities are constant, together
/// with the atoms sitting at its left end and the running integrals at a.
struct Segment {
  double a = 0.0;
  double b = 0.0;
  double omega_atom = 0.0;
  double upsilon_atom = 0.0;
  double omega_density = 0.0;
  double upsilon_density = 0.0;

  double w_left = 0.0;    // w(a), excluding the atom at a
  double ups_left = 0.0;  // Upsilon(a)
  double int_w = 0.0;     // int_0^a w
  double int_w2 = 0.0;    // int_0^a w^2
  double int_ups = 0.0;   // int_0^a Upsilon
  double int_sigma = 0.0; // int_0^a sigma

  double w_start() const { return w_left + omega_atom; }
  double ups_start() const { return ups_left + upsilon_atom; }
  double sigma_left() const { return a + int_w2 + ups_left; }
  double sigma_start() const { return sigma_left() + upsilon_atom; }

  double w(double tau) const { return w_start() + omega_density * tau; }
  double upsilon(double tau) const { return ups_start() + upsilon_density * tau; }
  double w2_integral(double tau) const {
    const double w0 = w_start(), d = omega_density;
    return int_w2 + tau * (w0 * w0 + tau * (w0 * d + tau * d * d / 3.0));
  }
  double sigma(double tau) const { return a + tau + w2_integral(tau) + upsilon(tau); }
  /// d sigma / dx on the interior.
  double sigma_rate(double tau) const {
    const double wt = w(tau);
    return 1.0 + wt * wt + upsilon_density;
  }
  double w_integral(double tau) const {
    return int_w + tau * (w_start() + 0.5 * omega_density * tau);
  }
  double ups_integral(double tau) const {
    return int_ups + tau * (ups_start() + 0.5 * upsilon_density * tau);
  }
  double sigma_integral(double tau) const {
    const double w0 = w_start(), d = omega_density;
    const double i2 = tau * (int_w2 + tau * (0.5 * w0 * w0 + tau * (w0 * d / 3.0 + tau * d * d / 12.0)));
    return int_sigma + a * tau + 0.5 * tau * tau + i2 + (ups_integral(tau) - int_ups);
  }
  bool w_constant() const { return omega_density == 0.0; }
};

/// Piecewise closed forms for w, Upsilon, the travel coordinate sigma and its
/// generalized inverse xi, plus the primitives used by convergence checks.
class CoefficientView {
 public:
  explicit CoefficientView(const StringSpec& spec) : length_(spec.length) {
    std::vector<double> cuts{0.0};
    for (const auto* m : {&spec.omega, &spec.upsilon}) {
      for (const auto& at : m->atoms) cuts.push_back(at.x);
      for (const auto& p : m->density) {
        cuts.push_back(p.a);
        if (p.b < length_) cuts.push_back(p.b);
      }
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    cuts.push_back(length_);

    Segment prev;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      Segment s;
      s.a = cuts[i];
      s.b = cuts[i + 1];
      s.omega_atom = spec.omega.atom_at(s.a);
      s.upsilon_atom = spec.upsilon.atom_at(s.a);
      const double mid = std::isinf(s.b) ? s.a + 1.0 : 0.5 * (s.a + s.b);
      s.omega_density = spec.omega.density_at(mid);
      s.upsilon_density = spec.upsilon.density_at(mid);
      if (i > 0) {
        const double tau = prev.b - prev.a;
        s.w_left = prev.w(tau);
        s.ups_left = prev.upsilon(tau);
        s.int_w = prev.w_integral(tau);
        s.int_w2 = prev.w2_integral(tau);
        s.int_ups = prev.ups_integral(tau);
        s.int_sigma = prev.sigma_integral(tau);
      }
      segments_.push_back(s);
      prev = s;
    }
  }

  double length() const { return length_; }
  const std::vector<Segment>& segments() const { return segments_; }

  /// Segment with a < x <= b (x > 0), i.e. the one whose formulas give the
  /// left-continuous values at x.
  const Segment& segment_left_of(double x) const {
    auto it = std::lower_bound(segments_.begin(), segments_.end(), x,
                               [](const Segment& s, double v) { return s.b < v; });
    if (it == segments_.end()) --it;
    return *it;
  }

  /// Segment with a <= x < b.
  const Segment& segment_containing(double x) const {
    auto it = std::upper_bound(segments_.begin(), segments_.end(), x,
                               [](double v, const Segment& s) { return v < s.a; });
    return *(it == segments_.begin() ? it : it - 1);
  }

  CoefficientValues at(double x) const {
    check_position(x);
    if (x == 0.0) return {};
    if (std::isinf(x)) return at_infinity();
    const Segment& s = segment_left_of(x);
    const double tau = x - s.a;
    return {s.w(tau), s.upsilon(tau), s.sigma(tau)};
  }

  double w(double x) const { return at(x).w; }
  double upsilon(double x) const { return at(x).upsilon; }
  double sigma(double x) const { return at(x).sigma; }

  /// sigma(L); infinite exactly when L is.
  double sigma_end() const { return std::isinf(length_) ? kInf : sigma(length_); }

  double w_integral(double x) const {
    check_position(x);
    if (x == 0.0) return 0.0;
    const Segment& s = segment_left_of(x);
    return s.w_integral(x - s.a);
  }

  double sigma_integral(double x) const {
    check_position(x);
    if (x == 0.0) return 0.0;
    const Segment& s = segment_left_of(x);
    return s.sigma_integral(x - s.a);
  }

  /// xi(s) = sup{x in [0, L) : sigma(x) <= s}.
  double xi(double s) const {
    if (!(s >= 0.0)) throw Error(ErrorCode::PositionOutOfRange, "xi needs s >= 0");
    if (s >= sigma_end()) return length_;
    for (const auto& seg : segments_) {
      if (s < seg.sigma_left()) break;
      if (s < seg.sigma_start()) return seg.a;  // inside an upsilon jump
      const double tau_max = seg.b - seg.a;
      if (!std::isinf(tau_max) && s >= seg.sigma(tau_max)) continue;
      return seg.a + invert_on_segment(seg, s, tau_max);
    }
    return length_;
  }

 private:
  void check_position(double x) const {
    if (!(x >= 0.0) || x > length_) {
      throw Error(ErrorCode::PositionOutOfRange,
                  "position " + std::to_string(x) + " outside [0, L]");
    }
  }

  CoefficientValues at_infinity() const {
    const Segment& s = segments_.back();
    const double w_end = s.omega_density == 0.0 ? s.w_start() : std::copysign(kInf, s.omega_density);
    const double u_end = s.upsilon_density == 0.0 ? s.ups_start() : kInf;
    return {w_end, u_end, kInf};
  }

  // sigma restricted to a segment is a cubic in tau with derivative >= 1, so
  // the root is bracketed by [0, s - sigma_start]; Newton with a bisection
  // fallback converges to machine precision.
  static double invert_on_segment(const Segment& seg, double s, double tau_max) {
    const double target = s - seg.sigma_start();
    double lo = 0.0;
    double hi = std::min(tau_max, target);
    if (hi <= 0.0) return 0.0;
    auto g = [&](double tau) { return seg.sigma(tau) - s; };
    double tau = target / seg.sigma_rate(0.0);
    tau = std::clamp(tau, lo, hi);
    for (int it = 0; it < 200; ++it) {
      const double val = g(tau);
      if (val == 0.0) return tau;
      if (val > 0.0) hi = tau; else lo = tau;
      double next = tau - val / seg.sigma_rate(tau);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - tau) <= 4.0 * std::numeric_limits<double>::epsilon() * (seg.a + next) ||
          hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * (seg.a + hi)) {
        return next;
      }
      tau = next;
    }
    return tau;
  }

  double length_;
  std::vector<Segment> segments_;
};

inline CoefficientValues eval_coefficients(const StringSpec& spec, double x) {
  return CoefficientView(spec).at(x);
}

inline double xi_eval(const StringSpec& spec, double s) { return CoefficientView(spec).xi(s); }

}  // namespace indef
