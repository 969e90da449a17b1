#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vnb/covariance.hpp"

namespace vnb {

enum class Nonlinearity { relu, tanh_ };
enum class Readout { mean_then_linear };

std::string to_string(Nonlinearity n);
Nonlinearity parse_nonlinearity(const std::string& s);

// Polynomial filter coefficients for one layer: shape [f_out][f_in][order+1].
// A filter of order K applies sum_{k=0..K} h_k C^k to its input.
struct LayerTaps {
  std::size_t f_out = 0;
  std::size_t f_in = 0;
  std::size_t order = 0;
  std::vector<double> coeffs;  // flattened, k fastest

  static LayerTaps zeros(std::size_t f_out, std::size_t f_in, std::size_t order) {
    return LayerTaps{f_out, f_in, order,
                     std::vector<double>(f_out * f_in * (order + 1), 0.0)};
  }
  double& h(std::size_t f, std::size_t g, std::size_t k) {
    return coeffs[(f * f_in + g) * (order + 1) + k];
  }
  double h(std::size_t f, std::size_t g, std::size_t k) const {
    return coeffs[(f * f_in + g) * (order + 1) + k];
  }
  std::span<const double> filter(std::size_t f, std::size_t g) const {
    return {coeffs.data() + (f * f_in + g) * (order + 1), order + 1};
  }
};

struct FilterTaps {
  std::vector<LayerTaps> layers;
};

struct VnnConfig {
  std::size_t layers = 2;
  std::size_t filter_order = 1;       // K; each filter has K+1 coefficients
  std::vector<std::size_t> widths;    // F_out per layer; F_in(1) = 1
  Nonlinearity nonlinearity = Nonlinearity::relu;
  Readout readout = Readout::mean_then_linear;
  std::uint64_t seed = 0;

  void validate() const;
};

// The only learned state. Holds no data dimension anywhere: the same model
// evaluates against covariances of any size.
struct VnnModel {
  VnnConfig config;
  FilterTaps taps;
  Eigen::VectorXd readout_weights;  // length widths.back()
  double readout_bias = 0.0;

  void validate() const;
};

// Seeded init: taps uniform on +-1/sqrt(F_in*(K+1)), readout weights uniform
// on +-1/sqrt(F_out(L)), bias 0.
VnnModel init_vnn(const VnnConfig& config);

// y = sum_k taps[k] * C^k x via iterated matrix-vector products; C^0 x = x.
Eigen::VectorXd apply_filter(std::span<const double> taps, const CovarianceModel& cov,
                             const Eigen::VectorXd& x);

// One filter-bank layer: out[f] = sigma(sum_g H_fg(C) in[g]), sigma pointwise.
std::vector<Eigen::VectorXd> layer_forward(const LayerTaps& taps, const CovarianceModel& cov,
                                           const std::vector<Eigen::VectorXd>& x_in,
                                           Nonlinearity nonlinearity);

// Full forward map: L layers, unweighted mean over node positions per final
// feature, then the linear readout to a scalar. Requires a spectrally
// normalized covariance.
double forward(const VnnModel& model, const CovarianceModel& cov, const Eigen::VectorXd& x);

// ---- batched evaluation (subjects as columns of an m x n matrix) ----
// Identical arithmetic to per-subject forward, organized as matrix products.
// The trace retains everything reverse-mode differentiation reuses: the
// Krylov blocks C^k X per input feature and the layer pre-activations.

struct LayerTrace {
  std::vector<std::vector<Eigen::MatrixXd>> krylov;  // [f_in][k] m x n
  std::vector<Eigen::MatrixXd> preact;               // [f_out] m x n
  std::vector<Eigen::MatrixXd> act;                  // [f_out] m x n
};

struct ForwardTrace {
  std::vector<LayerTrace> layers;
  Eigen::MatrixXd pooled;   // F_out(L) x n node means
  Eigen::VectorXd output;   // n predictions
};

ForwardTrace forward_batch(const VnnModel& model, const CovarianceModel& cov,
                           const Eigen::MatrixXd& X);

// Predictions only (no trace kept).
Eigen::VectorXd predict_batch(const VnnModel& model, const CovarianceModel& cov,
                              const Eigen::MatrixXd& X);

// ---- permutation utilities ----
// Applies (Px, P C P^T) with the mean vector permuted consistently:
// perm[i] gives the source index of output position i.
std::pair<Eigen::VectorXd, CovarianceModel> permute_input(const Eigen::VectorXd& x,
                                                          const CovarianceModel& cov,
                                                          const std::vector<std::size_t>& perm);

// Control model for transferability baselines: same architecture, tap
// coefficients globally shuffled. Readout is left untouched.
VnnModel shuffle_taps(const VnnModel& model, std::uint64_t seed);

// ---- flat parameter view (taps, then readout weights, then bias) ----
std::size_t param_count(const VnnModel& model);
std::vector<double> flatten_params(const VnnModel& model);
void unflatten_params(VnnModel& model, std::span<const double> flat);

}  // namespace vnb
