#include "rgan/linalg.hpp"

#include <stdexcept>

namespace rgan {

Mat nearest_psd(const Mat& m, double floor) {
  if (m.rows() != m.cols()) throw std::invalid_argument("nearest_psd: matrix must be square");
  const Mat sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> eig(sym);
  if (eig.info() != Eigen::Success) throw std::runtime_error("nearest_psd: eigen decomposition failed");
  const Vec clipped = eig.eigenvalues().cwiseMax(floor);
  const Mat out = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

Mat cholesky_factor(const Mat& cov) {
  Eigen::LLT<Mat> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::LLT<Mat> repaired(nearest_psd(cov));
  if (repaired.info() != Eigen::Success) throw std::runtime_error("cholesky_factor: matrix is not PSD");
  return repaired.matrixL();
}

Mat to_correlation(const Mat& m) {
  const Vec inv_sd = m.diagonal().cwiseSqrt().cwiseInverse();
  Mat c = inv_sd.asDiagonal() * m * inv_sd.asDiagonal();
  c.diagonal().setOnes();
  return c;
}

bool is_symmetric(const Mat& m, double tol) {
  return m.rows() == m.cols() && (m - m.transpose()).cwiseAbs().maxCoeff() <= tol;
}

bool is_psd(const Mat& m, double tol) {
  if (!is_symmetric(m, tol * std::max(1.0, m.cwiseAbs().maxCoeff()))) return false;
  Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff() >= -tol;
}

}  // namespace rgan
