#include "risnoma/linalg.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

namespace rn::num {

CMat solve_linear(const CMat& a, const CMat& b) {
  if (a.rows() != a.cols()) throw Error("solve_linear: A must be square");
  if (b.rows() != a.rows()) throw Error("solve_linear: B row count must match A");
  Eigen::PartialPivLU<CMat> lu(a);
  double rcond = lu.rcond();
  if (!(rcond > 1e-12)) {
    throw Error("solve_linear: singular or ill-conditioned matrix (condition estimate " +
                std::to_string(rcond > 0 ? 1.0 / rcond : std::numeric_limits<double>::infinity()) +
                ")");
  }
  CMat x = lu.solve(b);
  if (!x.allFinite())
    throw Error("solve_linear: non-finite solution (singular or ill-conditioned matrix)");
  return x;
}

CMat pseudo_inverse(const CMat& h) {
  if (h.size() == 0 || h.norm() == 0.0) throw Error("pseudo_inverse: zero matrix");
  Eigen::JacobiSVD<CMat> svd(h, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  double cutoff = sv(0) * 1e-13 * double(std::max(h.rows(), h.cols()));
  Eigen::VectorXd inv_sv(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    inv_sv(i) = sv(i) > cutoff ? 1.0 / sv(i) : 0.0;
  return svd.matrixV() * inv_sv.asDiagonal() * svd.matrixU().adjoint();
}

double spectral_norm(const CMat& a) {
  if (a.size() == 0) return 0.0;
  CVec v = CVec::Ones(a.cols());
  v /= v.norm();
  double sigma = 0.0;
  for (int it = 0; it < 200; ++it) {
    CVec w = a.adjoint() * (a * v);
    double n = w.norm();
    if (n == 0.0) return 0.0;
    v = w / n;
    double next = std::sqrt(n);
    if (std::abs(next - sigma) <= 1e-12 * std::max(1.0, next)) return next;
    sigma = next;
  }
  return sigma;
}

}  // namespace rn::num
