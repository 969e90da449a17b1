#include "vnb/covariance.hpp"

#include <cmath>
#include <fstream>

#include "text_io.hpp"
#include "vnb/rng.hpp"

namespace vnb {

CovarianceModel sample_covariance(const Cohort& cohort) {
  const std::size_t n = cohort.n();
  const std::size_t m = cohort.m;
  if (n < 2) throw data_error("sample covariance needs n >= 2, got n=" + std::to_string(n));

  Eigen::MatrixXd X(m, n);  // subjects as columns
  for (std::size_t i = 0; i < n; ++i) {
    const auto& f = cohort.subjects[i].features;
    for (std::size_t j = 0; j < m; ++j) {
      if (!std::isfinite(f[j])) {
        throw data_error("non-finite feature for subject '" + cohort.subjects[i].id + "'");
      }
      X(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = f[j];
    }
  }

  CovarianceModel cm;
  cm.mean = X.rowwise().mean();
  X.colwise() -= cm.mean;
  cm.matrix = (X * X.transpose()) / static_cast<double>(n);
  cm.matrix = ((cm.matrix + cm.matrix.transpose()) * 0.5).eval();  // kill fp drift
  return cm;
}

namespace {

// One power-iteration run on B = A + shift*I; returns the Rayleigh quotient
// on convergence.
bool power_iterate(const Eigen::MatrixXd& B, Eigen::VectorXd v, int max_iters,
                   double tol, double* out) {
  v.normalize();
  double prev = std::numeric_limits<double>::quiet_NaN();
  for (int it = 0; it < max_iters; ++it) {
    Eigen::VectorXd w = B * v;
    const double norm = w.norm();
    if (norm == 0.0) return false;  // start vector in the kernel
    const double rayleigh = v.dot(w);
    v = w / norm;
    if (it > 0 && std::abs(rayleigh - prev) <= tol * std::max(1.0, std::abs(rayleigh))) {
      *out = rayleigh;
      return true;
    }
    prev = rayleigh;
  }
  return false;
}

Eigen::VectorXd seeded_start(Eigen::Index m, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::VectorXd v(m);
  for (Eigen::Index i = 0; i < m; ++i) v[i] = rng.uniform(-1.0, 1.0);
  return v;
}

}  // namespace

double largest_eigenvalue(const Eigen::MatrixXd& matrix, std::uint64_t seed) {
  const Eigen::Index m = matrix.rows();
  if (m == 0 || matrix.cols() != m) throw data_error("largest_eigenvalue: matrix must be square");
  const double scale = matrix.cwiseAbs().maxCoeff();
  if ((matrix - matrix.transpose()).cwiseAbs().maxCoeff() > 1e-8 * std::max(1.0, scale)) {
    throw data_error("largest_eigenvalue: matrix is not symmetric");
  }
  if (scale == 0.0) return 0.0;

  // Gershgorin lower bound; the shift makes B = A + s*I PSD so the dominant
  // eigenvalue of B is lambda_max(A) + s regardless of A's sign pattern.
  double lower = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < m; ++i) {
    const double radius = matrix.row(i).cwiseAbs().sum() - std::abs(matrix(i, i));
    lower = std::min(lower, matrix(i, i) - radius);
  }
  const double shift = std::max(0.0, -lower);
  Eigen::MatrixXd B = matrix;
  B.diagonal().array() += shift;

  if (B.cwiseAbs().maxCoeff() <= 1e-300) return -shift;  // A was exactly -shift*I

  constexpr double kTol = 1e-10;
  constexpr int kMaxIters = 10000;
  double rayleigh = 0.0;
  if (power_iterate(B, seeded_start(m, derive_seed(seed, "power-start", 0)), kMaxIters, kTol,
                    &rayleigh)) {
    return rayleigh - shift;
  }
  // Stagnation (or an unlucky orthogonal start): re-randomize once.
  if (power_iterate(B, seeded_start(m, derive_seed(seed, "power-start", 1)), kMaxIters, kTol,
                    &rayleigh)) {
    return rayleigh - shift;
  }
  throw numeric_error("power iteration did not converge within 10000 iterations");
}

CovarianceModel normalize_spectral(const CovarianceModel& cm) {
  if (cm.matrix.size() == 0 || cm.matrix.cwiseAbs().maxCoeff() == 0.0) {
    throw numeric_error("cannot spectrally normalize an identically zero covariance");
  }
  const double lam = largest_eigenvalue(cm.matrix);
  if (!(lam > 0.0)) {
    throw numeric_error("covariance has non-positive dominant eigenvalue");
  }
  CovarianceModel out;
  out.matrix = cm.matrix / lam;
  out.mean = cm.mean;
  out.spectral_norm = cm.normalized ? cm.spectral_norm * lam : lam;
  out.normalized = true;
  return out;
}

void save_covariance_csv(const CovarianceModel& cm, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write covariance file '" + path + "'");
  for (Eigen::Index i = 0; i < cm.matrix.rows(); ++i) {
    for (Eigen::Index j = 0; j < cm.matrix.cols(); ++j) {
      if (j) out << ',';
      out << detail::format_double(cm.matrix(i, j));
    }
    out << "\n";
  }
}

}  // namespace vnb
