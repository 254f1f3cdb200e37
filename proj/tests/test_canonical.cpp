#include <gtest/gtest.h>

#include "indef/canonical.hpp"
#include "oracles.hpp"

using namespace indef;
using oracle::string_of;

namespace {

const cd I(0.0, 1.0);

Hamiltonian make(std::vector<HamiltonianPiece> pieces) {
  Hamiltonian H;
  H.pieces = std::move(pieces);
  return H;
}

void expect_piece(const HamiltonianPiece& p, double len, double h11, double h12) {
  EXPECT_NEAR(p.len, len, 1e-14 * std::max(1.0, len));
  EXPECT_NEAR(p.h11, h11, 1e-15);
  EXPECT_NEAR(p.h12, h12, 1e-15);
}

// Atomic omega plus arbitrary upsilon: the class on which the construction is exact.
StringSpec exact_class(oracle::SpecGenerator& gen) {
  auto s = gen();
  s.omega.density.clear();
  return validate_spec(s);
}

}  // namespace

TEST(StringToHamiltonian, WorkedValues) {
  const auto a = string_to_hamiltonian(string_of(1.0));
  ASSERT_EQ(a.pieces.size(), 2u);
  expect_piece(a.pieces[0], 1.0, 0.0, 0.0);
  EXPECT_TRUE(std::isinf(a.pieces[1].len));
  EXPECT_TRUE(a.pieces[1].indivisible_top());

  const auto b = string_to_hamiltonian(string_of(1.0, {{0.0, 2.0}}));
  ASSERT_EQ(b.pieces.size(), 2u);
  expect_piece(b.pieces[0], 5.0, 0.8, 0.4);
  EXPECT_NEAR(b.pieces[0].h22(), 0.2, 1e-15);
  EXPECT_TRUE(b.pieces[1].indivisible_top());

  const auto c = string_to_hamiltonian(string_of(1.0, {}, {}, {{0.0, 3.0}}));
  ASSERT_EQ(c.pieces.size(), 3u);
  expect_piece(c.pieces[0], 3.0, 1.0, 0.0);
  expect_piece(c.pieces[1], 1.0, 0.0, 0.0);
  EXPECT_TRUE(std::isinf(c.pieces[2].len));
  EXPECT_TRUE(c.pieces[2].indivisible_top());
  EXPECT_EQ(c.mesh, 0.0);
}

TEST(StringToHamiltonian, LinearWRecordsMesh) {
  StringToHamiltonianOptions o;
  o.mesh = 1e-2;
  const auto H = string_to_hamiltonian(string_of(1.0, {}, {{0.0, 1.0, 1.0}}), o);
  EXPECT_EQ(H.mesh, 1e-2);
  // sigma(1) = 4/3, so 134 cells plus the tail
  EXPECT_EQ(H.pieces.size(), 135u);
  // primitive of H22 at the end is L
  EXPECT_NEAR(H.primitive(4.0 / 3.0)(1, 1), 1.0, 1e-14);
  // primitive of H12 is int_0^L w = 1/2
  EXPECT_NEAR(H.primitive(4.0 / 3.0)(0, 1), 0.5, 1e-14);
}

TEST(HamiltonianToString, WorkedValues) {
  const auto a = hamiltonian_to_string(make({{kInf, 0.5, 0.0}}));
  EXPECT_TRUE(a.infinite_length());
  EXPECT_TRUE(a.omega.empty());
  ASSERT_EQ(a.upsilon.density.size(), 1u);
  EXPECT_EQ(a.upsilon.density[0].a, 0.0);
  EXPECT_TRUE(std::isinf(a.upsilon.density[0].b));
  EXPECT_DOUBLE_EQ(a.upsilon.density[0].value, 1.0);

  const auto b = hamiltonian_to_string(make({{5.0, 0.8, 0.4}, {kInf, 1.0, 0.0}}));
  EXPECT_NEAR(b.length, 1.0, 1e-15);
  ASSERT_EQ(b.omega.atoms.size(), 1u);
  EXPECT_NEAR(b.omega.atoms[0].mass, 2.0, 1e-14);
  EXPECT_TRUE(b.upsilon.empty());

  const auto c = hamiltonian_to_string(make({{kInf, 0.0, 0.0}}));
  EXPECT_TRUE(c.infinite_length());
  EXPECT_TRUE(c.omega.empty());
  EXPECT_TRUE(c.upsilon.empty());
}

TEST(HamiltonianToString, Errors) {
  auto code = [](Hamiltonian H) {
    try {
      hamiltonian_to_string(H);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::ParseError;
  };
  EXPECT_EQ(code(make({{kInf, 1.0, 0.0}})), ErrorCode::InvalidHamiltonian);
  EXPECT_EQ(code(make({{1.0, 0.5, 0.0}})), ErrorCode::InvalidHamiltonian);
  EXPECT_EQ(code(make({{kInf, 0.5, 0.6}})), ErrorCode::InvalidHamiltonian);
  EXPECT_EQ(code(make({{kInf, 1.2, 0.0}})), ErrorCode::InvalidHamiltonian);
  EXPECT_EQ(code(make({{kInf, 0.5, 0.0}, {1.0, 0.5, 0.0}})), ErrorCode::InvalidHamiltonian);
}

TEST(CanonicalM, WorkedValues) {
  for (cd z : {I, cd(2.0, 0.3), cd(-1.0, -4.0)}) {
    EXPECT_EQ(canonical_m(make({{kInf, 0.0, 0.0}}), z), cd(0.0));
  }
  for (cd z : {I, cd(2.0, 0.3), cd(-1.0, 4.0)}) {
    EXPECT_NEAR(std::abs(canonical_m(make({{kInf, 0.5, 0.0}}), z) - I), 0.0, 1e-14);
  }
  const auto H = string_to_hamiltonian(string_of(1.0, {{0.0, 2.0}}));
  EXPECT_NEAR(std::abs(canonical_m(H, I) - cd(2.0, 1.0)), 0.0, 1e-14);
}

TEST(CanonicalM, TruncationAgreesWithClosedTail) {
  CanonicalOptions trunc;
  trunc.tail = TailMode::Truncate;
  trunc.tol = 1e-12;
  const auto rot = make({{kInf, 0.5, 0.0}});
  EXPECT_NEAR(std::abs(canonical_m(rot, cd(0.5, 1.0), trunc) - I), 0.0, 1e-10);
  const auto H = make({{0.7, 0.2, 0.1}, {1.3, 1.0, 0.0}, {kInf, 0.3, -0.2}});
  EXPECT_NEAR(std::abs(canonical_m(H, cd(-1.0, 2.0), trunc) - canonical_m(H, cd(-1.0, 2.0))), 0.0, 1e-9);
}

TEST(CanonicalSolution, ClosedForms) {
  const std::vector<double> ss{0.0, 0.5, 2.0, 7.0};
  const cd z(1.5, 0.5);
  const auto nil = canonical_solution(make({{kInf, 0.0, 0.0}}), z, ss);
  for (const auto& smp : nil.samples) {
    Mat2 expect;
    expect << 1.0, -z * smp.s, 0.0, 1.0;
    EXPECT_LT((smp.U - expect).cwiseAbs().maxCoeff(), 1e-14);
  }
  const auto rot = canonical_solution(make({{kInf, 0.5, 0.0}}), z, ss);
  for (const auto& smp : rot.samples) {
    const cd a = z * smp.s / 2.0;
    Mat2 expect;
    expect << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    EXPECT_LT((smp.U - expect).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, std::abs(std::cos(a))));
  }
}

TEST(IndivisiblePrefix, WorkedValues) {
  EXPECT_EQ(indivisible_prefix(make({{kInf, 0.5, 0.0}})), 0.0);
  EXPECT_EQ(indivisible_prefix(string_to_hamiltonian(string_of(1.0, {}, {}, {{0.0, 3.0}}))), 3.0);
  EXPECT_EQ(indivisible_prefix(make({{7.0, 1.0, 0.0}, {kInf, 0.0, 0.0}})), 7.0);
}

class CanonicalProperties : public ::testing::TestWithParam<int> {};

TEST_P(CanonicalProperties, Roundtrip) {
  oracle::SpecGenerator gen(1200 + GetParam());
  const auto s = exact_class(gen);
  const auto back = hamiltonian_to_string(string_to_hamiltonian(s));
  EXPECT_NEAR(back.length, s.length, 4 * std::numeric_limits<double>::epsilon());
  const CoefficientView a(s), b(back);
  for (int k = 1; k <= 400; ++k) {
    const double x = s.length * k / 400.0;
    EXPECT_NEAR(a.w(x), b.w(std::min(x, back.length)), 1e-9) << x;
    EXPECT_NEAR(a.upsilon(x), b.upsilon(std::min(x, back.length)), 1e-9) << x;
  }
}

TEST_P(CanonicalProperties, StructuralInvariants) {
  oracle::SpecGenerator gen(1300 + GetParam());
  const auto s = gen();
  StringToHamiltonianOptions o;
  o.mesh = 1e-2;
  const auto H = string_to_hamiltonian(s, o);
  for (const auto& p : H.pieces) {
    EXPECT_EQ(p.h11 + p.h22(), 1.0);
    EXPECT_GE(p.det(), -1e-12);
  }
  EXPECT_EQ(indivisible_prefix(H), s.upsilon.atom_at(0.0));
  const cd z(gen.uniform(-5, 5), gen.uniform(0.1, 5));
  std::vector<double> ss;
  for (int k = 0; k <= 20; ++k) ss.push_back(0.25 * k);
  for (const auto& smp : canonical_solution(H, z, ss).samples) {
    EXPECT_LT(std::abs(smp.U.determinant() - 1.0), 1e-10);
  }
}

TEST_P(CanonicalProperties, MatchesWeylFunction) {
  oracle::SpecGenerator gen(1400 + GetParam());
  const auto s = exact_class(gen);
  const auto H = string_to_hamiltonian(s);
  for (cd z : standard_grid()) {
    const cd mw = weyl_m(s, z).m;
    EXPECT_LT(std::abs(canonical_m(H, z) - mw), 1e-9 * std::max(1.0, std::abs(mw))) << z;
  }
}

INSTANTIATE_TEST_SUITE_P(Random, CanonicalProperties, ::testing::Range(0, 10));

TEST(CanonicalConsistency, MeshRefinementUniformString) {
  const auto s = string_of(1.0, {}, {{0.0, 1.0, 1.0}});
  std::vector<double> errs;
  for (double mesh : {8e-3, 4e-3, 2e-3, 1e-3}) {
    StringToHamiltonianOptions o;
    o.mesh = mesh;
    const auto H = string_to_hamiltonian(s, o);
    double err = 0.0;
    for (cd z : standard_grid()) err = std::max(err, std::abs(canonical_m(H, z) - oracle::uniform_m(z)));
    errs.push_back(err);
  }
  for (std::size_t i = 1; i < errs.size(); ++i) EXPECT_GT(errs[i - 1] / errs[i], 3.5);
  const auto H = string_to_hamiltonian(s);
  double err = 0.0;
  for (cd z : standard_grid()) err = std::max(err, std::abs(canonical_m(H, z) - weyl_m(s, z).m));
  EXPECT_LT(err, 1e-6);
}
