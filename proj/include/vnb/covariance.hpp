#pragma once

#include <Eigen/Core>
#include <string>

#include "vnb/cohort.hpp"

namespace vnb {

// Sample covariance of a cohort plus its spectral scale.
// `spectral_norm` is the pre-normalization largest eigenvalue (1.0 until
// normalize_spectral has run).
struct CovarianceModel {
  Eigen::MatrixXd matrix;  // m x m, symmetric PSD
  Eigen::VectorXd mean;    // feature mean
  double spectral_norm = 1.0;
  bool normalized = false;

  Eigen::Index dim() const { return matrix.rows(); }
};

// C = (1/n) * sum_i (x_i - mean)(x_i - mean)^T. Requires n >= 2 and finite
// features. The 1/n divisor is deliberate; spectral normalization makes the
// 1/(n-1) distinction immaterial downstream.
CovarianceModel sample_covariance(const Cohort& cohort);

// Dominant (algebraically largest) eigenvalue by power iteration on the
// Gershgorin-shifted matrix. Relative tolerance 1e-10 on the Rayleigh
// quotient, at most 10000 iterations per start vector; the start vector is
// re-randomized once on stagnation. Throws numeric_error on non-convergence.
double largest_eigenvalue(const Eigen::MatrixXd& matrix, std::uint64_t seed = 12345);

// Rescales so the largest eigenvalue is 1; records the scale in
// spectral_norm. Throws numeric_error for an identically zero matrix.
CovarianceModel normalize_spectral(const CovarianceModel& cm);

// Dense row-major CSV, no header, for external inspection.
void save_covariance_csv(const CovarianceModel& cm, const std::string& path);

}  // namespace vnb
