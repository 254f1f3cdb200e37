#include <gtest/gtest.h>

#include "indef/spectral.hpp"
#include "oracles.hpp"

using namespace indef;
using oracle::string_of;

namespace {

const cd I(0.0, 1.0);

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::ParseError;
}

// Random discrete string; half of them restricted to the Krein class.
StringSpec random_atomic(oracle::SpecGenerator& gen, bool krein) {
  auto s = gen(true);
  if (krein) {
    for (auto& a : s.omega.atoms) a.mass = std::abs(a.mass) + 0.1;
    std::erase_if(s.upsilon.atoms, [](const Atom& a) { return a.x > 0.0; });
  } else if (s.upsilon.atoms.empty() || s.upsilon.atoms.back().x == 0.0) {
    s.upsilon.atoms.push_back({0.5 + 0.25 * gen.uniform(0.0, 1.0), 0.7});
    std::sort(s.upsilon.atoms.begin(), s.upsilon.atoms.end(), [](auto& a, auto& b) { return a.x < b.x; });
  }
  return validate_spec(s);
}

}  // namespace

TEST(DiscreteEigenvalues, WorkedValues) {
  const auto a = discrete_eigenvalues(string_of(1.0, {{0.5, 1.0}}));
  ASSERT_EQ(a.size(), 1u);
  EXPECT_NEAR(a[0], 4.0, 1e-13);
  const auto b = discrete_eigenvalues(string_of(1.0, {{0.5, -1.0}}));
  ASSERT_EQ(b.size(), 1u);
  EXPECT_NEAR(b[0], -4.0, 1e-13);
  const auto c = discrete_eigenvalues(string_of(1.0, {}, {}, {{0.5, 1.0}}));
  ASSERT_EQ(c.size(), 2u);
  EXPECT_NEAR(c[0], -2.0, 1e-13);
  EXPECT_NEAR(c[1], 2.0, 1e-13);
  EXPECT_TRUE(discrete_eigenvalues(string_of(1.0)).empty());
  EXPECT_TRUE(discrete_eigenvalues(string_of(1.0, {{0.0, 2.0}})).empty());
  EXPECT_EQ(discrete_eigenvalues(string_of(1.0, {}, {}, {{0.5, 1.0}}), {0.0, 10.0}).size(), 1u);
}

TEST(DiscreteEigenvalues, Errors) {
  EXPECT_EQ(code_of([] { discrete_eigenvalues(string_of(1.0, {}, {{0.0, 1.0, 1.0}})); }), ErrorCode::NotAtomic);
  EXPECT_EQ(code_of([] { discrete_eigenvalues(string_of(kInf, {{0.5, 1.0}})); }), ErrorCode::NotFiniteLength);
  std::vector<Atom> many;
  for (int i = 0; i < 65; ++i) many.push_back({i / 70.0, 1.0});
  EXPECT_EQ(code_of([&] { discrete_eigenvalues(string_of(1.0, many)); }), ErrorCode::UnsupportedShape);
}

TEST(DiscreteEigenvalues, ManyAtomsAreRootsOfPhi) {
  std::vector<Atom> many;
  for (int i = 1; i <= 64; ++i) many.push_back({(i - 0.5) / 64.0, 1.0 / 64.0});
  const auto s = string_of(1.0, many);
  const auto ev = discrete_eigenvalues(s, {0.0, 200.0});
  // close to the uniform string's n^2 pi^2 at the bottom of the spectrum
  ASSERT_GE(ev.size(), 4u);
  for (int n = 1; n <= 4; ++n) EXPECT_NEAR(ev[n - 1] / (n * n * M_PI * M_PI), 1.0, 1e-2);
  for (double l : ev) EXPECT_LT(std::abs(oracle::atomic_transfer(s, l, 1.0).second), 1e-9);
}

TEST(SpectralMeasureDiscrete, WorkedValues) {
  const auto a = spectral_measure_discrete(string_of(1.0, {{0.5, 1.0}}));
  ASSERT_EQ(a.atoms.size(), 1u);
  EXPECT_NEAR(a.atoms[0].lambda, 4.0, 1e-13);
  EXPECT_NEAR(a.atoms[0].mass, 1.0, 1e-13);
  const auto b = spectral_measure_discrete(string_of(1.0, {{0.5, -1.0}}));
  ASSERT_EQ(b.atoms.size(), 1u);
  EXPECT_NEAR(b.atoms[0].lambda, -4.0, 1e-13);
  EXPECT_NEAR(b.atoms[0].mass, 1.0, 1e-13);
  const auto c = spectral_measure_discrete(string_of(1.0, {}, {}, {{0.5, 1.0}}));
  ASSERT_EQ(c.atoms.size(), 2u);
  EXPECT_NEAR(c.atoms[0].mass, 0.5, 1e-13);
  EXPECT_NEAR(c.atoms[1].mass, 0.5, 1e-13);
  EXPECT_TRUE(spectral_measure_discrete(string_of(1.0)).atoms.empty());
}

class SpectralProperties : public ::testing::TestWithParam<int> {};

TEST_P(SpectralProperties, MassesAreResiduesOfM) {
  oracle::SpecGenerator gen(2100 + GetParam());
  const auto s = random_atomic(gen, GetParam() % 2 == 0);
  const auto mu = spectral_measure_discrete(s);
  for (const auto& a : mu.atoms) {
    // delta Im m(lambda + i delta) -> mass; the remainder is O(delta)
    const double delta = 1e-7 * std::max(1.0, std::abs(a.lambda));
    const cd z(a.lambda, delta);
    const auto [th, ph] = oracle::atomic_transfer(s, z, s.length);
    const cd m = -th / (z * ph);
    // the oracle resolves masses to about 1e-7 absolute
    EXPECT_NEAR(delta * m.imag(), a.mass, 1e-5 * a.mass + 1e-7) << a.lambda;
  }
}

TEST_P(SpectralProperties, SignLaw) {
  oracle::SpecGenerator gen(2200 + GetParam());
  const auto s = random_atomic(gen, GetParam() % 2 == 0);
  const auto ev = discrete_eigenvalues(s);
  const bool all_nonneg = std::all_of(ev.begin(), ev.end(), [](double l) { return l >= 0.0; });
  EXPECT_EQ(all_nonneg, nonneg_spectrum_predicted(s));
  for (double l : ev) EXPECT_NE(l, 0.0);
}

TEST_P(SpectralProperties, ParsevalOnPiecewiseLinearBasis) {
  oracle::SpecGenerator gen(2300 + GetParam());
  const auto s = random_atomic(gen, GetParam() % 2 == 0);
  // hat functions on a grid unrelated to the atom positions
  for (int k = 1; k <= 5; ++k) {
    HilbertElement f;
    const double c = k / 6.0, h = 1.0 / 6.0;
    f.f1 = {{0.0, 0.0}, {c - h, 0.0}, {c, 1.0}, {c + h, 0.0}};
    if (c - h == 0.0) f.f1.erase(f.f1.begin());
    for (const auto& a : s.upsilon.atoms)
      if (a.x > 0.0) f.f2.emplace_back(a.x, gen.uniform(-1.0, 1.0));
    const double lhs = spectral_norm2(s, f), rhs = projected_norm2(s, f);
    EXPECT_NEAR(lhs, rhs, 1e-9 * std::max(1.0, rhs)) << k;
  }
}

TEST_P(SpectralProperties, TransformOfDeltaIsPhi) {
  oracle::SpecGenerator gen(2400 + GetParam());
  const auto s = random_atomic(gen, GetParam() % 2 == 0);
  const double x = gen.uniform(0.05, 0.95);
  // off the spectrum f-hat = phi(x) - (x/L) phi(L); on it, phi(x)
  std::vector<double> ls{-3.0, 0.7, 5.5};
  for (double l : ls) {
    const double expect = oracle::atomic_transfer(s, l, x).second.real() -
                          x / s.length * oracle::atomic_transfer(s, l, s.length).second.real();
    EXPECT_NEAR(transform_hat(s, delta_element(s, x), std::vector<double>{l})[0], expect, 1e-12);
  }
  ls = discrete_eigenvalues(s, {-50.0, 50.0});
  const auto v = transform_hat(s, delta_element(s, x), ls);
  for (std::size_t i = 0; i < ls.size(); ++i)
    EXPECT_NEAR(v[i], oracle::atomic_transfer(s, ls[i], x).second.real(), 1e-10 * std::max(1.0, std::abs(v[i])));
}

TEST_P(SpectralProperties, EigenvectorsSolveTheString) {
  oracle::SpecGenerator gen(2450 + GetParam());
  const auto s = random_atomic(gen, GetParam() % 2 == 0);
  for (const auto& mode : discrete_modes(s)) {
    if (std::abs(mode.lambda) > 50.0) continue;
    for (const auto& [x, v] : mode.eigenvector.f1)
      EXPECT_NEAR(v, oracle::atomic_transfer(s, mode.lambda, x).second.real(), 1e-9 * std::max(1.0, std::abs(v)));
    EXPECT_NEAR(1.0 / mode.mass, inner_product(s, mode.eigenvector, mode.eigenvector), 1e-9 / mode.mass);
  }
}

INSTANTIATE_TEST_SUITE_P(Random, SpectralProperties, ::testing::Range(0, 20));

TEST(StieltjesInversion, UniformString) {
  const auto s = string_of(1.0, {}, {{0.0, 1.0, 1.0}});
  InversionOptions o;
  o.jobs = 4;
  o.proxy_samples = 100;
  const auto mu = stieltjes_inversion(s, {1.0, 45.0}, o);
  ASSERT_EQ(mu.atoms.size(), 2u);
  for (int n = 1; n <= 2; ++n) {
    EXPECT_NEAR(mu.atoms[n - 1].lambda, n * n * M_PI * M_PI, 1e-6);
    EXPECT_NEAR(mu.atoms[n - 1].mass, 2.0, 0.02);
  }
  EXPECT_NEAR(interval_mass(mu, 1.0, 45.0), 4.0, 0.04);
  EXPECT_EQ(mu.epsilon_used, 1e-4);
}

TEST(StieltjesInversion, MatchesDiscreteResidues) {
  for (int seed = 0; seed < 4; ++seed) {
    oracle::SpecGenerator gen(2500 + seed);
    const auto s = random_atomic(gen, seed % 2 == 0);
    const auto exact = spectral_measure_discrete(s, {0.5, 30.0});
    InversionOptions o;
    o.proxy_samples = 20;
    const auto mu = stieltjes_inversion(s, {0.5, 30.0}, o);
    ASSERT_EQ(mu.atoms.size(), exact.atoms.size()) << seed;
    for (std::size_t i = 0; i < mu.atoms.size(); ++i) {
      EXPECT_NEAR(mu.atoms[i].lambda, exact.atoms[i].lambda, 1e-6);
      EXPECT_NEAR(mu.atoms[i].mass, exact.atoms[i].mass, 1e-3);
    }
  }
}

TEST(StieltjesInversion, WorkedValues) {
  const auto mu = stieltjes_inversion(string_of(1.0, {{0.5, 1.0}}), {1.0, 10.0});
  ASSERT_EQ(mu.atoms.size(), 1u);
  EXPECT_NEAR(mu.atoms[0].lambda, 4.0, 1e-6);
  EXPECT_NEAR(mu.atoms[0].mass, 1.0, 1e-3);

  const auto nil = stieltjes_inversion(string_of(1.0), {0.5, 20.0});
  EXPECT_TRUE(nil.atoms.empty());
  EXPECT_NEAR(interval_mass(nil, 0.5, 20.0), 0.0, 1e-6);

  EXPECT_EQ(code_of([] { stieltjes_inversion(string_of(1.0), {-1.0, 1.0}); }), ErrorCode::WindowTouchesAtomZero);
  EXPECT_EQ(code_of([] { stieltjes_inversion(string_of(1.0), {0.0, 1.0}); }), ErrorCode::WindowTouchesAtomZero);
}

TEST(StieltjesInversion, HalfLineDensity) {
  // m = i / sqrt(z): dmu = sqrt(lambda) / (pi lambda) on (0, inf), no atoms
  const auto s = string_of(kInf, {}, {{0.0, kInf, 1.0}});
  InversionOptions o;
  o.proxy_samples = 40;
  const auto mu = stieltjes_inversion(s, {1.0, 5.0}, o);
  EXPECT_TRUE(mu.atoms.empty());
  for (const auto& p : mu.continuous)
    EXPECT_NEAR(p.density, 1.0 / (M_PI * std::sqrt(p.lambda)), 1e-4) << p.lambda;
  EXPECT_NEAR(interval_mass(mu, 1.0, 5.0), 2.0 * (std::sqrt(5.0) - 1.0) / M_PI, 1e-3);
}

TEST(GreenKernel, WorkedValues) {
  const auto nil = string_of(1.0);
  for (cd z : {I, cd(2.0, 0.5), cd(-3.0, 1.0)}) {
    const auto g = green_kernel(nil, z, 0.5, 0.25);
    EXPECT_NEAR(std::abs(g[0] - 0.125), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(g[1] - 0.125 * z), 0.0, 1e-14);
  }
  const auto g = green_kernel(string_of(1.0, {{0.0, 2.0}}), I, 0.5, 0.5);
  EXPECT_NEAR(std::abs(g[0] - 0.25), 0.0, 1e-14);
}

TEST(GreenKernel, Symmetry) {
  oracle::SpecGenerator gen(2600);
  for (int i = 0; i < 5; ++i) {
    const auto s = gen();
    const cd z(gen.uniform(-4, 4), gen.uniform(0.2, 3));
    const double x = gen.uniform(0, 1), t = gen.uniform(0, 1);
    const auto a = green_kernel(s, z, x, t), b = green_kernel(s, z, t, x);
    EXPECT_EQ(a[0], b[0]);
    EXPECT_EQ(a[1], b[1]);
  }
}

TEST(GreenKernel, SolvesInhomogeneousProblem) {
  // int G(x, t) dchi(t) is the solution of -f'' = z omega f + z^2 upsilon f + chi
  // lying in the domain at L; with chi = delta_t it is the first component.
  const auto s = string_of(1.0, {{0.3, 1.2}}, {{0.0, 1.0, 0.5}});
  const cd z(1.0, 1.0);
  const double t = 0.6;
  Measure chi;
  chi.atoms.push_back({t, 1.0});
  // f = c1 theta + c2 phi + particular; fix c via f(0) = 0 and f(L) = 0
  const std::vector<double> xs{0.2, 1.0};
  const auto part = solve_inhomogeneous(s, z, chi, 0.0, 0.0, xs);
  const auto fs = fundamental_system(s, z, xs);
  const cd c2 = -part[1].f / fs.phi[1].f;
  const cd expect = part[0].f + c2 * fs.phi[0].f;
  EXPECT_NEAR(std::abs(green_kernel(s, z, 0.2, t)[0] - expect), 0.0, 1e-9);
}

TEST(TransformHat, WorkedValues) {
  const auto s = string_of(1.0, {{0.5, 1.0}});
  const auto d = delta_element(s, 0.5);
  const std::vector<double> ls{4.0, 0.0};
  const auto v = transform_hat(s, d, ls);
  EXPECT_NEAR(v[0], 0.5, 1e-14);
  EXPECT_EQ(v[1], 0.0);
  const auto mu = spectral_measure_discrete(s);
  EXPECT_NEAR(spectral_norm2(s, d), 0.25, 1e-12);
  EXPECT_NEAR(mu.atoms[0].mass * v[0] * v[0], 0.25, 1e-12);
  EXPECT_NEAR(inner_product(s, d, d), 0.25, 1e-15);
  EXPECT_NEAR(projected_norm2(s, d), 0.25, 1e-15);
}

TEST(TransformHat, VanishesAtZero) {
  oracle::SpecGenerator gen(2700);
  for (int i = 0; i < 5; ++i) {
    const auto s = gen();
    HilbertElement f;
    f.f1 = {{0.0, 0.0}, {0.2, gen.uniform(-1, 1)}, {0.7, gen.uniform(-1, 1)}, {0.9, 0.0}};
    const std::vector<double> zero{0.0};
    EXPECT_NEAR(transform_hat(s, f, zero)[0], 0.0, 1e-15);
  }
}

TEST(TransformHat, UnsupportedShapes) {
  const auto s = string_of(1.0, {{0.5, 1.0}}, {}, {{0.25, 1.0}});
  const std::vector<double> ls{1.0};
  HilbertElement a;
  a.f1 = {{0.0, 0.1}, {1.0, 0.0}};
  EXPECT_EQ(code_of([&] { transform_hat(s, a, ls); }), ErrorCode::UnsupportedShape);
  HilbertElement b;
  b.f1 = {{0.0, 0.0}, {0.5, 1.0}};
  EXPECT_EQ(code_of([&] { transform_hat(s, b, ls); }), ErrorCode::UnsupportedShape);
  HilbertElement c;
  c.f1 = {{0.0, 0.0}, {0.5, 1.0}, {1.0, 0.0}};
  c.f2 = {{0.3, 1.0}};
  EXPECT_EQ(code_of([&] { transform_hat(s, c, ls); }), ErrorCode::UnsupportedShape);
  c.f2 = {{0.25, 1.0}};
  EXPECT_NO_THROW(transform_hat(s, c, ls));
}

TEST(HilbertSpace, ReproducingIdentity) {
  oracle::SpecGenerator gen(2800);
  const auto s = string_of(2.0);
  for (int i = 0; i < 10; ++i) {
    HilbertElement f;
    double x = 0.0;
    f.f1.emplace_back(0.0, 0.0);
    for (int k = 0; k < 4; ++k) {
      x += gen.uniform(0.05, 0.45);
      f.f1.emplace_back(x, gen.uniform(-2, 2));
    }
    f.f1.emplace_back(x + 0.1, 0.0);
    const double p = gen.uniform(0.0, 1.9);
    EXPECT_NEAR(inner_product(s, f, delta_element(s, p)), f.value(p), 1e-13);
    // |f(x)|^2 <= x (1 - x/L) ||f||^2
    EXPECT_LE(f.value(p) * f.value(p), p * (1.0 - p / 2.0) * inner_product(s, f, f) + 1e-14);
  }
  for (double a : {0.3, 1.1})
    for (double b : {0.5, 1.7})
      EXPECT_NEAR(inner_product(s, delta_element(s, a), delta_element(s, b)),
                  std::min(a, b) * (1.0 - std::max(a, b) / 2.0), 1e-15);
}
