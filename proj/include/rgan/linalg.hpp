#pragma once

#include "rgan/common.hpp"

namespace rgan {

/// Symmetrizes, clips eigenvalues below `floor`, and re-symmetrizes.
Mat nearest_psd(const Mat& m, double floor = 1e-10);

/// Lower Cholesky factor of a covariance matrix after PSD repair.
Mat cholesky_factor(const Mat& cov);

/// Rescales a PSD matrix to unit diagonal.
Mat to_correlation(const Mat& m);

bool is_symmetric(const Mat& m, double tol = 1e-12);
bool is_psd(const Mat& m, double tol = 1e-12);

}  // namespace rgan
