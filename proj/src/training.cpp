#include "vnb/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

#include "vnb/rng.hpp"

namespace vnb {

std::string to_string(CovBinding b) {
  return b == CovBinding::train_split ? "train_split" : "whole_cohort";
}

CovBinding parse_cov_binding(const std::string& s) {
  if (s == "train_split") return CovBinding::train_split;
  if (s == "whole_cohort") return CovBinding::whole_cohort;
  throw config_error("unknown covariance binding '" + s + "'");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw config_error("train: learning_rate must be positive");
  if (epochs == 0) throw config_error("train: epochs must be positive");
  if (batch != "full") throw config_error("train: only full-batch training is supported");
  if (ensemble_size == 0) throw config_error("train: ensemble_size must be >= 1");
  if (clip_grad_norm && !(*clip_grad_norm > 0.0)) {
    throw config_error("train: clip_grad_norm must be positive when set");
  }
  split.validate();
}

double mse_loss(const std::vector<double>& predictions, const std::vector<double>& targets) {
  if (predictions.empty() || predictions.size() != targets.size()) {
    throw data_error("mse_loss: inputs must be nonempty and equal length");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double d = predictions[i] - targets[i];
    acc += d * d;
  }
  return acc / static_cast<double>(predictions.size());
}

double mse_loss(const Eigen::VectorXd& predictions, const Eigen::VectorXd& targets) {
  if (predictions.size() == 0 || predictions.size() != targets.size()) {
    throw data_error("mse_loss: inputs must be nonempty and equal length");
  }
  return (predictions - targets).squaredNorm() / static_cast<double>(predictions.size());
}

std::vector<double> VnnGradient::flatten() const {
  std::vector<double> flat;
  for (const auto& layer : taps.layers) {
    flat.insert(flat.end(), layer.coeffs.begin(), layer.coeffs.end());
  }
  flat.insert(flat.end(), readout_weights.data(),
              readout_weights.data() + readout_weights.size());
  flat.push_back(readout_bias);
  return flat;
}

VnnGradient backward_batch(const VnnModel& model, const CovarianceModel& cov,
                           const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  const ForwardTrace trace = forward_batch(model, cov, X);
  const Eigen::Index m = X.rows();
  const Eigen::Index n = X.cols();
  if (y.size() != n) throw data_error("backward: target length mismatch");

  VnnGradient grad;
  grad.loss = mse_loss(trace.output, y);
  for (const auto& layer : model.taps.layers) {
    grad.taps.layers.push_back(LayerTaps::zeros(layer.f_out, layer.f_in, layer.order));
  }

  // d(mean squared error)/d(output_i)
  Eigen::VectorXd dout = 2.0 * (trace.output - y) / static_cast<double>(n);

  grad.readout_bias = dout.sum();
  grad.readout_weights = trace.pooled * dout;

  // Through the node-mean readout: every node of feature f receives
  // w_f * dout_i / m.
  const std::size_t f_last = model.config.widths.back();
  std::vector<Eigen::MatrixXd> dact(f_last);
  for (std::size_t f = 0; f < f_last; ++f) {
    dact[f] = (model.readout_weights[static_cast<Eigen::Index>(f)] / static_cast<double>(m)) *
              Eigen::MatrixXd::Ones(m, 1) * dout.transpose();
  }

  for (std::size_t l = model.config.layers; l-- > 0;) {
    const LayerTaps& taps = model.taps.layers[l];
    LayerTaps& tgrad = grad.taps.layers[l];
    const LayerTrace& lt = trace.layers[l];

    // dz = dact * sigma'(z)
    std::vector<Eigen::MatrixXd> dz(taps.f_out);
    for (std::size_t f = 0; f < taps.f_out; ++f) {
      if (model.config.nonlinearity == Nonlinearity::relu) {
        dz[f] = (lt.preact[f].array() > 0.0).cast<double>().matrix().cwiseProduct(dact[f]);
      } else {
        dz[f] = (1.0 - lt.act[f].array().square()).matrix().cwiseProduct(dact[f]);
      }
      if (!dz[f].allFinite()) {
        throw numeric_error("backward: non-finite intermediate at layer " + std::to_string(l));
      }
    }

    // Tap gradients reuse the forward Krylov blocks: d/dh_{fgk} = <dz_f, C^k x_g>.
    for (std::size_t f = 0; f < taps.f_out; ++f) {
      for (std::size_t g = 0; g < taps.f_in; ++g) {
        for (std::size_t k = 0; k <= taps.order; ++k) {
          tgrad.h(f, g, k) = dz[f].cwiseProduct(lt.krylov[g][k]).sum();
        }
      }
    }

    // Input gradient: dx_g = sum_f H_fg(C)^T dz_f; C symmetric, so the same
    // iterated products apply to dz.
    if (l > 0) {
      std::vector<Eigen::MatrixXd> dx(taps.f_in, Eigen::MatrixXd::Zero(m, n));
      for (std::size_t f = 0; f < taps.f_out; ++f) {
        Eigen::MatrixXd power = dz[f];
        for (std::size_t k = 0; k <= taps.order; ++k) {
          if (k > 0) power = cov.matrix * power;
          for (std::size_t g = 0; g < taps.f_in; ++g) {
            dx[g].noalias() += taps.h(f, g, k) * power;
          }
        }
      }
      dact = std::move(dx);
    }
  }
  return grad;
}

VnnGradient backward(const VnnModel& model, const CovarianceModel& cov,
                     const Eigen::VectorXd& x, double y) {
  Eigen::VectorXd target(1);
  target[0] = y;
  return backward_batch(model, cov, x, target);
}

AdamOptimizer::AdamOptimizer(std::size_t dim, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(dim, 0.0), v_(dim, 0.0) {}

void AdamOptimizer::step(std::vector<double>& params, const std::vector<double>& grad) {
  beta1_t_ *= beta1_;
  beta2_t_ *= beta2_;
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    const double m_hat = m_[i] / (1.0 - beta1_t_);
    const double v_hat = v_[i] / (1.0 - beta2_t_);
    params[i] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
  }
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> design_matrix(const Cohort& cohort) {
  Eigen::MatrixXd X(cohort.m, cohort.n());
  Eigen::VectorXd y(cohort.n());
  for (std::size_t i = 0; i < cohort.n(); ++i) {
    y[static_cast<Eigen::Index>(i)] = cohort.subjects[i].age;
    for (std::size_t j = 0; j < cohort.m; ++j) {
      X(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) =
          cohort.subjects[i].features[j];
    }
  }
  return {std::move(X), std::move(y)};
}

std::pair<VnnModel, TrainReport> train_one(const Cohort& cohort, const VnnConfig& vcfg,
                                           const TrainConfig& tcfg, const CovarianceModel& cov) {
  tcfg.validate();
  const auto start = std::chrono::steady_clock::now();

  const Cohort pool = filter_group(cohort, tcfg.train_groups);
  if (pool.n() == 0) throw data_error("train_one: no subjects left after group filtering");
  const Split parts = split(pool, tcfg.split);

  const auto [Xtr, ytr] = design_matrix(parts.train);
  const auto [Xva, yva] = design_matrix(parts.val);

  VnnModel model = init_vnn(vcfg);
  model.readout_bias = ytr.mean();

  std::vector<double> params = flatten_params(model);
  AdamOptimizer adam(params.size(), tcfg.learning_rate, tcfg.adam_beta1, tcfg.adam_beta2,
                     tcfg.adam_eps);

  TrainReport report;
  report.seed = vcfg.seed;

  auto eval_losses = [&](const VnnModel& mdl) {
    const double tl = mse_loss(predict_batch(mdl, cov, Xtr), ytr);
    const double vl = mse_loss(predict_batch(mdl, cov, Xva), yva);
    return std::pair{tl, vl};
  };

  auto [tl0, vl0] = eval_losses(model);
  report.train_loss.push_back(tl0);
  report.val_loss.push_back(vl0);
  double best_val = vl0;
  std::vector<double> best_params = params;
  report.selected_epoch = 0;

  for (std::size_t epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    VnnGradient grad = backward_batch(model, cov, Xtr, ytr);
    if (!std::isfinite(grad.loss)) {
      throw numeric_error("training diverged (non-finite loss) at epoch " + std::to_string(epoch));
    }
    std::vector<double> g = grad.flatten();
    if (tcfg.clip_grad_norm) {
      double norm2 = 0.0;
      for (double v : g) norm2 += v * v;
      const double norm = std::sqrt(norm2);
      if (norm > *tcfg.clip_grad_norm) {
        const double s = *tcfg.clip_grad_norm / norm;
        for (double& v : g) v *= s;
      }
    }
    adam.step(params, g);
    unflatten_params(model, params);

    auto [tl, vl] = eval_losses(model);
    if (!std::isfinite(tl) || !std::isfinite(vl)) {
      throw numeric_error("training diverged (non-finite loss) at epoch " + std::to_string(epoch));
    }
    report.train_loss.push_back(tl);
    report.val_loss.push_back(vl);
    if (vl < best_val) {  // strict: earliest epoch wins ties
      best_val = vl;
      best_params = params;
      report.selected_epoch = epoch;
    }
  }

  unflatten_params(model, best_params);

  const auto [Xte, yte] = design_matrix(parts.test);
  const Eigen::VectorXd pte = predict_batch(model, cov, Xte);
  report.test_mae = (pte - yte).cwiseAbs().mean();
  report.test_mae_set = "member_test_split(raw_estimate@" + to_string(tcfg.cov_binding) + "_cov)";
  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(model), std::move(report)};
}

namespace {

CovarianceModel member_covariance(const Cohort& pool, const TrainConfig& member_cfg) {
  if (member_cfg.cov_binding == CovBinding::whole_cohort) {
    return normalize_spectral(sample_covariance(pool));
  }
  const Split parts = split(pool, member_cfg.split);
  return normalize_spectral(sample_covariance(parts.train));
}

void run_indexed(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  const std::size_t nworkers = std::min<std::size_t>(threads, count);
  std::vector<std::exception_ptr> errors(nworkers);
  for (std::size_t w = 0; w < nworkers; ++w) {
    workers.emplace_back([&, w] {
      try {
        for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

Ensemble train_ensemble(const Cohort& cohort, const VnnConfig& vcfg, const TrainConfig& tcfg,
                        int threads) {
  tcfg.validate();
  const Cohort pool = filter_group(cohort, tcfg.train_groups);
  if (pool.n() == 0) throw data_error("train_ensemble: no subjects left after group filtering");

  Ensemble ens;
  ens.config = vcfg;
  ens.train_binding = tcfg.cov_binding;
  ens.models.resize(tcfg.ensemble_size);
  ens.reports.resize(tcfg.ensemble_size);

  run_indexed(tcfg.ensemble_size, threads, [&](std::size_t i) {
    VnnConfig member_vcfg = vcfg;
    member_vcfg.seed = vcfg.seed + i;
    TrainConfig member_tcfg = tcfg;
    member_tcfg.split.seed = tcfg.split.seed + i;  // fresh permutation per member
    member_tcfg.ensemble_size = 1;
    CovarianceModel cov = member_covariance(pool, member_tcfg);
    try {
      auto [model, report] = train_one(cohort, member_vcfg, member_tcfg, cov);
      ens.models[i] = std::move(model);
      ens.reports[i] = std::move(report);
    } catch (const std::exception& e) {
      throw numeric_error("ensemble member " + std::to_string(i) + ": " + e.what());
    }
  });

  // Held-out diagnostic for the ensemble itself: member-0's test split,
  // scored with member-0's training covariance.
  TrainConfig cfg0 = tcfg;
  cfg0.split.seed = tcfg.split.seed;
  const Split parts0 = split(pool, cfg0.split);
  const CovarianceModel cov0 = member_covariance(pool, cfg0);
  const auto [Xte, yte] = design_matrix(parts0.test);
  const Eigen::VectorXd pred = predict_ensemble_batch(ens, cov0, Xte);
  ens.ensemble_test_mae = (pred - yte).cwiseAbs().mean();
  ens.ensemble_test_set = "member0_test_split(raw_estimate@" + to_string(tcfg.cov_binding) + "_cov)";
  return ens;
}

Eigen::VectorXd predict_ensemble_batch(const Ensemble& ens, const CovarianceModel& cov,
                                       const Eigen::MatrixXd& X) {
  if (ens.models.empty()) throw data_error("predict_ensemble: empty ensemble");
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(X.cols());
  for (const VnnModel& model : ens.models) acc += predict_batch(model, cov, X);
  return acc / static_cast<double>(ens.models.size());
}

double predict_ensemble(const Ensemble& ens, const CovarianceModel& cov,
                        const Eigen::VectorXd& x) {
  return predict_ensemble_batch(ens, cov, x)[0];
}

}  // namespace vnb
