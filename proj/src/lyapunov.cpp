#include <Eigen/Eigenvalues>
#include <sstream>

#include "relq/covariance.hpp"
#include "relq/error.hpp"

namespace relq {

namespace {

Matrix kronecker_solve(const Matrix& f, const Matrix& q) {
  const Eigen::Index d = f.rows();
  const Eigen::Index n = d * d;
  Matrix k = Matrix::Zero(n, n);
  // Column-major vec: vec(F X) = (I kron F) vec X, vec(X F^T) = (F kron I) vec X.
  for (Eigen::Index b = 0; b < d; ++b) k.block(b * d, b * d, d, d) += f;
  for (Eigen::Index r = 0; r < d; ++r)
    for (Eigen::Index c = 0; c < d; ++c)
      if (f(r, c) != 0.0)
        for (Eigen::Index i = 0; i < d; ++i) k(r * d + i, c * d + i) += f(r, c);
  Eigen::PartialPivLU<Matrix> lu(k);
  const double rc = lu.rcond();
  if (!(rc > 1e-14)) {
    std::ostringstream os;
    os << "Kronecker system is singular (rcond " << rc << ")";
    throw NumericalError(os.str(), rc > 0 ? 1.0 / rc : 0.0);
  }
  const Vector rhs = -Eigen::Map<const Vector>(q.data(), n);
  const Vector sol = lu.solve(rhs);
  return Eigen::Map<const Matrix>(sol.data(), d, d);
}

Matrix schur_solve(const Matrix& f, const Matrix& q) {
  const Eigen::Index d = f.rows();
  Eigen::ComplexSchur<Matrix> schur(f);
  if (schur.info() != Eigen::Success) throw NumericalError("Schur decomposition failed");
  const CMatrix& t = schur.matrixT();
  const CMatrix& u = schur.matrixU();
  const CMatrix c = -(u.adjoint() * q.cast<Complex>() * u);
  CMatrix y = CMatrix::Zero(d, d);
  // T Y + Y T^H = C, solved column by column from the right.
  for (Eigen::Index j = d - 1; j >= 0; --j) {
    CVector rhs = c.col(j);
    for (Eigen::Index k = j + 1; k < d; ++k) rhs -= y.col(k) * std::conj(t(j, k));
    CMatrix lhs = t;
    lhs.diagonal().array() += std::conj(t(j, j));
    for (Eigen::Index i = 0; i < d; ++i)
      if (std::abs(lhs(i, i)) < 1e-300) throw NumericalError("Lyapunov operator is singular");
    y.col(j) = lhs.triangularView<Eigen::Upper>().solve(rhs);
  }
  return (u * y * u.adjoint()).real();
}

}  // namespace

LyapunovResult solve_lyapunov(const Matrix& f, const Matrix& q, const LyapunovOptions& opt) {
  const Eigen::Index d = f.rows();
  if (f.cols() != d || q.rows() != d || q.cols() != d)
    throw ValidationError("dimension", "Lyapunov inputs must be square and of equal size");
  if (d > opt.max_dim && !opt.allow_large) {
    std::ostringstream os;
    os << "dimension " << d << " exceeds the Lyapunov cap " << opt.max_dim << "; set the override to proceed";
    throw ValidationError("dimension", os.str());
  }
  LyapunovMethod m = opt.method;
  if (m == LyapunovMethod::automatic) m = d <= opt.kronecker_max_dim ? LyapunovMethod::kronecker : LyapunovMethod::schur;

  LyapunovResult out;
  if (m == LyapunovMethod::kronecker) {
    out.x = kronecker_solve(f, q);
    out.method = "kronecker";
  } else {
    out.x = schur_solve(f, q);
    out.method = "schur";
  }
  out.x = 0.5 * (out.x + out.x.transpose()).eval();
  const Matrix r = f * out.x + out.x * f.transpose() + q;
  auto inf_norm = [](const Matrix& a) { return a.cwiseAbs().rowwise().sum().maxCoeff(); };
  out.residual = r.cwiseAbs().maxCoeff();
  const double scale = 2.0 * inf_norm(f) * out.x.cwiseAbs().maxCoeff() + q.cwiseAbs().maxCoeff();
  out.relative_residual = scale > 0.0 ? out.residual / scale : out.residual;
  return out;
}

}  // namespace relq
