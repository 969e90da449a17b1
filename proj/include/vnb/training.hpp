#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vnb/cohort.hpp"
#include "vnb/covariance.hpp"
#include "vnb/vnn.hpp"

namespace vnb {

// Which subjects a covariance is estimated from.
enum class CovBinding { train_split, whole_cohort };
std::string to_string(CovBinding b);
CovBinding parse_cov_binding(const std::string& s);

struct TrainConfig {
  double learning_rate = 0.0033;
  std::size_t epochs = 100;
  std::string batch = "full";  // full-batch gradient descent only
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  SplitSpec split;
  std::size_t ensemble_size = 100;
  std::set<Group> train_groups = {Group::HC, Group::MCI, Group::AD, Group::OTHER};
  CovBinding cov_binding = CovBinding::train_split;
  std::optional<double> clip_grad_norm;  // off unless set

  void validate() const;
};

struct TrainReport {
  std::vector<double> train_loss;  // index = epoch, entry 0 is the initial model
  std::vector<double> val_loss;
  std::size_t selected_epoch = 0;  // argmin val loss, earliest on ties
  double test_mae = 0.0;
  std::string test_mae_set;  // names the exact evaluation set
  std::uint64_t seed = 0;
  double wall_clock_seconds = 0.0;  // never serialized; reports stay byte-stable
};

struct Ensemble {
  VnnConfig config;
  std::vector<VnnModel> models;
  CovBinding train_binding = CovBinding::train_split;
  std::vector<TrainReport> reports;
  double ensemble_test_mae = 0.0;   // ensemble mean on member-0's test split
  std::string ensemble_test_set;
};

// (1/n) * sum (pred - target)^2.
double mse_loss(const std::vector<double>& predictions, const std::vector<double>& targets);
double mse_loss(const Eigen::VectorXd& predictions, const Eigen::VectorXd& targets);

// Gradient of the squared error (or batch mean of it) with respect to every
// model parameter; shapes mirror VnnModel.
struct VnnGradient {
  FilterTaps taps;
  Eigen::VectorXd readout_weights;
  double readout_bias = 0.0;
  double loss = 0.0;

  std::vector<double> flatten() const;
};

// Exact reverse-mode gradient of (forward(x) - y)^2.
VnnGradient backward(const VnnModel& model, const CovarianceModel& cov,
                     const Eigen::VectorXd& x, double y);

// Batch-mean variant used by the optimizer: loss = mean_i (out_i - y_i)^2.
VnnGradient backward_batch(const VnnModel& model, const CovarianceModel& cov,
                           const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

// Adam with bias correction over the flat parameter vector.
class AdamOptimizer {
 public:
  AdamOptimizer(std::size_t dim, double lr, double beta1, double beta2, double eps);
  void step(std::vector<double>& params, const std::vector<double>& grad);

 private:
  double lr_, beta1_, beta2_, eps_;
  double beta1_t_ = 1.0, beta2_t_ = 1.0;
  std::vector<double> m_, v_;
};

// Trains one model with full-batch Adam on the cohort filtered to
// train_groups and split per tcfg.split. Parameters are snapshotted at every
// validation improvement; the best snapshot is returned. The readout bias is
// initialized to the training-target mean.
std::pair<VnnModel, TrainReport> train_one(const Cohort& cohort, const VnnConfig& vcfg,
                                           const TrainConfig& tcfg, const CovarianceModel& cov);

// Trains ensemble_size members; member i uses split seed tcfg.split.seed + i
// and init seed vcfg.seed + i, with the member covariance estimated per
// tcfg.cov_binding. Members are independent, so training may fan out over
// `threads` workers without affecting results.
Ensemble train_ensemble(const Cohort& cohort, const VnnConfig& vcfg, const TrainConfig& tcfg,
                        int threads = 1);

// Arithmetic mean of member forwards.
double predict_ensemble(const Ensemble& ens, const CovarianceModel& cov, const Eigen::VectorXd& x);
Eigen::VectorXd predict_ensemble_batch(const Ensemble& ens, const CovarianceModel& cov,
                                       const Eigen::MatrixXd& X);

// Feature matrix (m x n, subjects as columns) and target vector of a cohort.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> design_matrix(const Cohort& cohort);

}  // namespace vnb
