#include <gtest/gtest.h>

#include "qsdc/hilbert.hpp"
#include "test_helpers.hpp"

using namespace qsdc;

namespace {

// Element-by-element Kronecker definition.
Matrix kron_oracle(const Matrix& a, const Matrix& b) {
  Matrix out = Matrix::Zero(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      for (Index k = 0; k < b.rows(); ++k)
        for (Index l = 0; l < b.cols(); ++l) out(i * b.rows() + k, j * b.cols() + l) = a(i, j) * b(k, l);
  return out;
}

}  // namespace

TEST(Annihilation, LowersOneToZero) {
  const StateVector v = annihilation(2).apply(StateVector::basis(2, 1));
  EXPECT_EQ(v[0], Complex(1.0));
  EXPECT_EQ(v[1], Complex(0.0));
}

TEST(Annihilation, KillsGroundState) {
  const StateVector v = annihilation(2).apply(StateVector::basis(2, 0));
  EXPECT_EQ(v.norm(), 0.0);
}

TEST(Annihilation, NumberOperatorEigenvalue) {
  const Operator n = creation(5) * annihilation(5);
  const StateVector v = n.apply(StateVector::basis(5, 3));
  for (Index i = 0; i < 5; ++i) EXPECT_NEAR(std::abs(v[i] - (i == 3 ? 3.0 : 0.0)), 0.0, 1e-15);
  EXPECT_EQ(Matrix(number_operator(5).matrix() - n.matrix()).norm(), 0.0);
}

TEST(Annihilation, EntriesAreSqrtN) {
  const Operator a = annihilation(6);
  for (Index i = 0; i < 6; ++i)
    for (Index j = 0; j < 6; ++j) EXPECT_EQ(a(i, j), j == i + 1 ? Complex(std::sqrt(double(j))) : Complex(0.0));
}

TEST(Annihilation, RejectsDimBelowTwo) {
  EXPECT_THROW(annihilation(1), InvalidDimension);
  EXPECT_THROW(annihilation(0), InvalidDimension);
}

TEST(Annihilation, CommutatorTruncationArtifact) {
  for (Index d : {2, 3, 5, 8}) {
    const Matrix a = annihilation(d).matrix();
    const Matrix c = a * a.adjoint() - a.adjoint() * a;
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < d; ++j) {
        const Complex expect = i != j ? 0.0 : (i == d - 1 ? Complex(1.0 - double(d)) : Complex(1.0));
        // sqrt(n)^2 reproduces n only to rounding.
        EXPECT_NEAR(c(i, j).real(), expect.real(), 1e-14) << "d=" << d << " (" << i << "," << j << ")";
        EXPECT_EQ(c(i, j).imag(), 0.0);
      }
  }
}

TEST(Tensor, IdentityTimesIdentity) {
  EXPECT_EQ(tensor(Operator::identity(2), Operator::identity(2)).matrix(), Matrix::Identity(4, 4));
}

TEST(Tensor, SigmaZDiagonalOrdersSystemSlowest) {
  const Operator z = tensor(sigma_z(), Operator::identity(2));
  const Complex expect[] = {1.0, 1.0, -1.0, -1.0};
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 4; ++j) EXPECT_EQ(z(i, j), i == j ? expect[i] : Complex(0.0));
}

TEST(Tensor, SigmaMatricesFollowLoweringConvention) {
  // sigma_- lowers |1> to |0>; the textbook sigma_z = diag(1, -1) is then
  // sigma_- sigma_+ - sigma_+ sigma_-.
  EXPECT_EQ(sigma_minus().matrix(), annihilation(2).matrix());
  EXPECT_EQ(sigma_z().matrix(), Matrix(sigma_minus().matrix() * sigma_plus().matrix() -
                                       sigma_plus().matrix() * sigma_minus().matrix()));
  EXPECT_EQ(Matrix(sigma_y().matrix() * sigma_y().matrix()), Matrix::Identity(2, 2));
  EXPECT_EQ(sigma_x().matrix(), Matrix(sigma_plus().matrix() + sigma_minus().matrix()));
}

TEST(Tensor, MatchesIndexLoopOracle) {
  const Operator q = sigma_x();
  const Operator bx = annihilation(2) + creation(2);
  EXPECT_EQ(tensor(q, bx).matrix(), kron_oracle(q.matrix(), bx.matrix()));
  const Matrix a = test::random_matrix(3, 1), b = test::random_matrix(4, 2);
  EXPECT_LT(max_abs(Matrix(kron(a, b) - kron_oracle(a, b))), 1e-15);
}

TEST(Tensor, Associative) {
  const Operator a(test::random_matrix(2, 3)), b(test::random_matrix(3, 4)), c(test::random_matrix(2, 5));
  EXPECT_LT(max_abs(Matrix(tensor(tensor(a, b), c).matrix() - tensor(a, tensor(b, c)).matrix())), 1e-13);
}

TEST(Tensor, StatesMatchOperatorOrdering) {
  const StateVector u = test::random_state(3, 6), v = test::random_state(2, 7);
  const Operator a(test::random_matrix(3, 8)), b(test::random_matrix(2, 9));
  const Vector lhs = tensor(a, b).matrix() * tensor(u, v).amplitudes();
  const Vector rhs = kron(Vector(a.matrix() * u.amplitudes()), Vector(b.matrix() * v.amplitudes()));
  EXPECT_LT(max_abs(Vector(lhs - rhs)), 1e-13);
}

TEST(RankOne, BasisProjector) {
  const Operator p = rank_one(StateVector::basis(3, 0), StateVector::basis(3, 0));
  Matrix expect = Matrix::Zero(3, 3);
  expect(0, 0) = 1.0;
  EXPECT_EQ(p.matrix(), expect);
}

TEST(RankOne, EntriesAndTrace) {
  const StateVector u(test::random_vector(4, 10)), v(test::random_vector(4, 11));
  const Operator p = rank_one(u, v);
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 4; ++j) EXPECT_EQ(p(i, j), u[i] * std::conj(v[j]));
  EXPECT_NEAR(std::abs(trace(p) - v.inner(u)), 0.0, 1e-13);
}

TEST(RankOne, ProductOracle) {
  const StateVector u(test::random_vector(4, 12)), v(test::random_vector(4, 13)), w(test::random_vector(4, 14)),
      x(test::random_vector(4, 15));
  const Matrix direct = rank_one(u, v).matrix() * rank_one(w, x).matrix();
  const Matrix expect = v.inner(w) * rank_one(u, x).matrix();
  EXPECT_LT(max_abs(Matrix(direct - expect)), 1e-12);
  EXPECT_NEAR(std::abs(trace(rank_one(u, v) * rank_one(w, x)) - v.inner(w) * x.inner(u)), 0.0, 1e-12);
}

TEST(RankOne, DimensionMismatch) {
  EXPECT_THROW(rank_one(StateVector::basis(2, 0), StateVector::basis(3, 0)), DimensionMismatch);
}

TEST(Operator, HermitianConstructorChecks) {
  EXPECT_NO_THROW(Operator::hermitian(test::random_hermitian(4, 16)));
  Matrix m = test::random_hermitian(4, 16);
  m(0, 1) += 1e-9;
  EXPECT_THROW(Operator::hermitian(m), InvalidArgument);
  EXPECT_THROW(Operator(Matrix::Zero(2, 3)), InvalidDimension);
}

TEST(StateVector, NormalizedFlag) {
  Vector v(2);
  v << 1.0, 1e-4;
  EXPECT_THROW(StateVector::normalized(v), InvalidArgument);
  EXPECT_TRUE(StateVector::normalize(v).is_normalized());
  EXPECT_FALSE(StateVector(v).is_normalized());
}

TEST(DensityOperator, PhysicalChecks) {
  EXPECT_TRUE(DensityOperator::physical(test::random_density(3, 17)).is_physical());
  Matrix bad = Matrix::Zero(2, 2);
  bad(0, 0) = 1.5;
  bad(1, 1) = -0.5;
  EXPECT_THROW(DensityOperator::physical(bad), InvalidArgument);
  Matrix tr = Matrix::Identity(2, 2);
  EXPECT_THROW(DensityOperator::physical(tr), InvalidArgument);
}

TEST(Json, RoundTrip) {
  const Operator a(test::random_matrix(3, 18));
  const Json j = to_json(a);
  EXPECT_EQ(j.at("dim").get<int>(), 3);
  EXPECT_EQ(j.at("re").size(), 9u);
  EXPECT_EQ(operator_from_json(Json::parse(j.dump())).matrix(), a.matrix());
  const StateVector s(test::random_vector(4, 19));
  EXPECT_EQ(state_from_json(Json::parse(to_json(s).dump())).amplitudes(), s.amplitudes());
}

TEST(Json, RowMajorLayout) {
  Matrix m(2, 2);
  m << Complex(1, 5), Complex(2, 6), Complex(3, 7), Complex(4, 8);
  const Json j = to_json(Operator(m));
  EXPECT_EQ(j.at("re"), Json({1.0, 2.0, 3.0, 4.0}));
  EXPECT_EQ(j.at("im"), Json({5.0, 6.0, 7.0, 8.0}));
  EXPECT_THROW(operator_from_json(Json{{"dim", 2}, {"re", {1.0}}, {"im", {1.0}}}), InvalidArgument);
}
