#pragma once

// Dense complex linear algebra for small Hilbert spaces: states, operators,
// density operators and the handful of constructors the rest of the library
// needs. Basis is the number basis |0>,...,|d-1>; tensor products order the
// first factor slowest.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include <json.hpp>

#include "qsdc/errors.hpp"

namespace qsdc {

using Complex = std::complex<double>;
using Index = Eigen::Index;
using Matrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::Matrix<Complex, Eigen::Dynamic, 1>;
using Json = nlohmann::json;

inline constexpr Complex kI{0.0, 1.0};

struct Tolerances {
  double hermitian = 1e-12;
  double normalized = 1e-10;
  double density_hermitian = 1e-10;
  double density_trace = 1e-8;
  double density_min_eigenvalue = -1e-8;
};

inline double max_abs(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline double max_abs(const Vector& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }
inline bool all_finite(const Vector& v) { return v.allFinite(); }

class StateVector {
 public:
  explicit StateVector(Vector amplitudes) : amps_(std::move(amplitudes)) {
    if (amps_.size() < 1) throw InvalidDimension("state vector needs dim >= 1");
  }

  // Checks |<psi|psi> - 1| within tolerance and flags the state normalized.
  static StateVector normalized(Vector amplitudes, const Tolerances& tol = {}) {
    StateVector s(std::move(amplitudes));
    if (std::abs(s.amps_.squaredNorm() - 1.0) > tol.normalized)
      throw InvalidArgument("state is not normalized (norm^2 = " +
                            std::to_string(s.amps_.squaredNorm()) + ")");
    s.normalized_ = true;
    return s;
  }

  // Rescales to unit norm.
  static StateVector normalize(Vector amplitudes) {
    const double n = amplitudes.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw InvalidArgument("cannot normalize a zero or non-finite vector");
    amplitudes /= n;
    StateVector s(std::move(amplitudes));
    s.normalized_ = true;
    return s;
  }

  static StateVector basis(Index dim, Index k) {
    if (dim < 1) throw InvalidDimension("basis state needs dim >= 1");
    if (k < 0 || k >= dim) throw InvalidArgument("basis index out of range");
    Vector v = Vector::Zero(dim);
    v(k) = 1.0;
    StateVector s(std::move(v));
    s.normalized_ = true;
    return s;
  }

  Index dim() const noexcept { return amps_.size(); }
  const Vector& amplitudes() const noexcept { return amps_; }
  bool is_normalized() const noexcept { return normalized_; }
  Complex operator[](Index i) const { return amps_(i); }
  double norm() const { return amps_.norm(); }

  // <this|other>
  Complex inner(const StateVector& other) const {
    if (other.dim() != dim()) throw DimensionMismatch("inner product of states with different dims");
    return amps_.dot(other.amps_);
  }

 private:
  Vector amps_;
  bool normalized_ = false;
};

class Operator {
 public:
  explicit Operator(Matrix m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols()) throw InvalidDimension("operator must be square");
    if (m_.rows() < 1) throw InvalidDimension("operator needs dim >= 1");
  }

  static Operator hermitian(Matrix m, const Tolerances& tol = {}) {
    Operator op(std::move(m));
    if (!op.is_hermitian(tol.hermitian)) throw InvalidArgument("operator is not Hermitian");
    return op;
  }

  static Operator identity(Index dim) {
    if (dim < 1) throw InvalidDimension("identity needs dim >= 1");
    return Operator(Matrix::Identity(dim, dim));
  }

  static Operator zero(Index dim) {
    if (dim < 1) throw InvalidDimension("zero operator needs dim >= 1");
    return Operator(Matrix::Zero(dim, dim));
  }

  Index dim() const noexcept { return m_.rows(); }
  const Matrix& matrix() const noexcept { return m_; }
  Complex operator()(Index i, Index j) const { return m_(i, j); }

  Operator adjoint() const { return Operator(m_.adjoint()); }

  bool is_hermitian(double tol) const { return max_abs(Matrix(m_ - m_.adjoint())) <= tol; }

  StateVector apply(const StateVector& v) const {
    if (v.dim() != dim()) throw DimensionMismatch("operator/state dimension mismatch");
    return StateVector(m_ * v.amplitudes());
  }

  friend Operator operator*(const Operator& a, const Operator& b) {
    if (a.dim() != b.dim()) throw DimensionMismatch("operator product dimension mismatch");
    return Operator(a.m_ * b.m_);
  }
  friend Operator operator+(const Operator& a, const Operator& b) {
    if (a.dim() != b.dim()) throw DimensionMismatch("operator sum dimension mismatch");
    return Operator(a.m_ + b.m_);
  }
  friend Operator operator-(const Operator& a, const Operator& b) {
    if (a.dim() != b.dim()) throw DimensionMismatch("operator difference dimension mismatch");
    return Operator(a.m_ - b.m_);
  }
  friend Operator operator*(Complex s, const Operator& a) { return Operator(s * a.m_); }
  friend Operator operator*(double s, const Operator& a) { return Operator(s * a.m_); }

 private:
  Matrix m_;
};

inline double min_eigenvalue_hermitian(const Matrix& m) {
  Eigen::MatrixXcd h = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

// 1/2 sum |lambda_k| of the Hermitian part of (a - b).
inline double trace_distance(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionMismatch("trace distance dimension mismatch");
  Eigen::MatrixXcd d = a - b;
  d = 0.5 * (d + d.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(d, Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

class DensityOperator {
 public:
  // Hermitian but not necessarily unit trace or positive.
  explicit DensityOperator(Matrix m, const Tolerances& tol = {}) : m_(std::move(m)) {
    if (m_.rows() != m_.cols() || m_.rows() < 1) throw InvalidDimension("density operator must be square, dim >= 1");
    if (max_abs(Matrix(m_ - m_.adjoint())) > tol.density_hermitian)
      throw InvalidArgument("density operator is not Hermitian");
  }

  static DensityOperator physical(Matrix m, const Tolerances& tol = {}) {
    DensityOperator d(std::move(m), tol);
    if (std::abs(d.m_.trace() - Complex(1.0)) > tol.density_trace)
      throw InvalidArgument("density operator trace is not 1");
    if (min_eigenvalue_hermitian(d.m_) < tol.density_min_eigenvalue)
      throw InvalidArgument("density operator has a negative eigenvalue");
    d.physical_ = true;
    return d;
  }

  static DensityOperator pure(const StateVector& psi, const Tolerances& tol = {}) {
    if (!psi.is_normalized() && std::abs(psi.amplitudes().squaredNorm() - 1.0) > tol.normalized)
      throw InvalidArgument("pure density operator needs a normalized state");
    const Vector& v = psi.amplitudes();
    return physical(v * v.adjoint(), tol);
  }

  Index dim() const noexcept { return m_.rows(); }
  const Matrix& matrix() const noexcept { return m_; }
  bool is_physical() const noexcept { return physical_; }

 private:
  Matrix m_;
  bool physical_ = false;
};

// a|n> = sqrt(n)|n-1>
inline Operator annihilation(Index dim) {
  if (dim < 2) throw InvalidDimension("annihilation operator needs dim >= 2");
  Matrix a = Matrix::Zero(dim, dim);
  for (Index n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return Operator(std::move(a));
}

inline Operator creation(Index dim) { return annihilation(dim).adjoint(); }

inline Operator number_operator(Index dim) {
  const Operator a = annihilation(dim);
  return a.adjoint() * a;
}

inline Operator sigma_minus() { return annihilation(2); }
inline Operator sigma_plus() { return creation(2); }

inline Operator sigma_x() {
  Matrix m(2, 2);
  m << 0.0, 1.0, 1.0, 0.0;
  return Operator(std::move(m));
}

inline Operator sigma_y() {
  Matrix m(2, 2);
  m << 0.0, -kI, kI, 0.0;
  return Operator(std::move(m));
}

// Pauli matrices in their textbook form, sigma_z = diag(1, -1). Note that
// sigma_minus() lowers |1> to |0>, so in this basis sigma_z = -(sigma_+ sigma_- - sigma_- sigma_+).
inline Operator sigma_z() {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = 1.0;
  m(1, 1) = -1.0;
  return Operator(std::move(m));
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  const Index ra = a.rows(), ca = a.cols(), rb = b.rows(), cb = b.cols();
  Matrix out(ra * rb, ca * cb);
  for (Index i = 0; i < ra; ++i)
    for (Index j = 0; j < ca; ++j) out.block(i * rb, j * cb, rb, cb) = a(i, j) * b;
  return out;
}

inline Operator tensor(const Operator& a, const Operator& b) { return Operator(kron(a.matrix(), b.matrix())); }

inline Vector kron(const Vector& a, const Vector& b) {
  Vector out(a.size() * b.size());
  for (Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

inline StateVector tensor(const StateVector& a, const StateVector& b) {
  Vector v = kron(a.amplitudes(), b.amplitudes());
  if (a.is_normalized() && b.is_normalized()) return StateVector::normalized(std::move(v));
  return StateVector(std::move(v));
}

// |u><v|
inline Operator rank_one(const StateVector& u, const StateVector& v) {
  if (u.dim() != v.dim()) throw DimensionMismatch("rank_one of vectors with different dims");
  return Operator(u.amplitudes() * v.amplitudes().adjoint());
}

inline Complex trace(const Operator& a) { return a.matrix().trace(); }

// ---------------------------------------------------------------------------
// Structured text form: {"dim": d, "re": [...], "im": [...]}, row-major.

inline Json matrix_to_json(const Matrix& m) {
  std::vector<double> re, im;
  re.reserve(m.size());
  im.reserve(m.size());
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) {
      re.push_back(m(i, j).real());
      im.push_back(m(i, j).imag());
    }
  return Json{{"dim", m.rows()}, {"re", re}, {"im", im}};
}

inline void read_parts(const Json& j, Index expected, std::vector<double>& re, std::vector<double>& im) {
  if (!j.is_object() || !j.contains("dim") || !j.contains("re"))
    throw InvalidArgument("structured operator/state needs 'dim' and 're'");
  re = j.at("re").get<std::vector<double>>();
  im = j.contains("im") ? j.at("im").get<std::vector<double>>() : std::vector<double>(re.size(), 0.0);
  if (static_cast<Index>(re.size()) != expected || static_cast<Index>(im.size()) != expected)
    throw DimensionMismatch("structured form has " + std::to_string(re.size()) + " entries, expected " +
                            std::to_string(expected));
}

inline Matrix matrix_from_json(const Json& j) {
  const Index d = j.at("dim").get<Index>();
  if (d < 1) throw InvalidDimension("dim must be >= 1");
  std::vector<double> re, im;
  read_parts(j, d * d, re, im);
  Matrix m(d, d);
  for (Index k = 0; k < d * d; ++k) m(k / d, k % d) = Complex(re[k], im[k]);
  return m;
}

inline Json to_json(const Operator& op) { return matrix_to_json(op.matrix()); }
inline Json to_json(const DensityOperator& rho) { return matrix_to_json(rho.matrix()); }
inline Operator operator_from_json(const Json& j) { return Operator(matrix_from_json(j)); }

inline Json to_json(const StateVector& s) {
  std::vector<double> re, im;
  for (Index i = 0; i < s.dim(); ++i) {
    re.push_back(s[i].real());
    im.push_back(s[i].imag());
  }
  return Json{{"dim", s.dim()}, {"re", re}, {"im", im}};
}

inline StateVector state_from_json(const Json& j) {
  const Index d = j.at("dim").get<Index>();
  if (d < 1) throw InvalidDimension("dim must be >= 1");
  std::vector<double> re, im;
  read_parts(j, d, re, im);
  Vector v(d);
  for (Index k = 0; k < d; ++k) v(k) = Complex(re[k], im[k]);
  return StateVector(std::move(v));
}

}  // namespace qsdc
