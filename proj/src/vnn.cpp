#include "vnb/vnn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vnb/rng.hpp"

namespace vnb {

std::string to_string(Nonlinearity n) {
  return n == Nonlinearity::relu ? "relu" : "tanh";
}

Nonlinearity parse_nonlinearity(const std::string& s) {
  if (s == "relu") return Nonlinearity::relu;
  if (s == "tanh") return Nonlinearity::tanh_;
  throw config_error("unknown nonlinearity '" + s + "'");
}

void VnnConfig::validate() const {
  if (layers == 0) throw config_error("vnn: layers must be positive");
  if (filter_order == 0) throw config_error("vnn: filter_order must be positive");
  if (widths.size() != layers) {
    throw config_error("vnn: widths must list one output width per layer");
  }
  for (std::size_t w : widths) {
    if (w == 0) throw config_error("vnn: layer widths must be positive");
  }
}

void VnnModel::validate() const {
  config.validate();
  if (taps.layers.size() != config.layers) throw config_error("vnn: tap/layer count mismatch");
  std::size_t f_in = 1;
  for (std::size_t l = 0; l < config.layers; ++l) {
    const LayerTaps& t = taps.layers[l];
    if (t.f_in != f_in || t.f_out != config.widths[l] ||
        t.coeffs.size() != t.f_out * t.f_in * (t.order + 1)) {
      throw config_error("vnn: tap tensor shape inconsistent at layer " + std::to_string(l));
    }
    for (double c : t.coeffs) {
      if (!std::isfinite(c)) throw numeric_error("vnn: non-finite tap at layer " + std::to_string(l));
    }
    f_in = t.f_out;
  }
  if (static_cast<std::size_t>(readout_weights.size()) != config.widths.back()) {
    throw config_error("vnn: readout width mismatch");
  }
}

VnnModel init_vnn(const VnnConfig& config) {
  config.validate();
  Rng rng(derive_seed(config.seed, "vnn-init"));
  VnnModel model;
  model.config = config;
  std::size_t f_in = 1;
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::size_t f_out = config.widths[l];
    LayerTaps t = LayerTaps::zeros(f_out, f_in, config.filter_order);
    const double bound = 1.0 / std::sqrt(static_cast<double>(f_in * (config.filter_order + 1)));
    for (double& c : t.coeffs) c = rng.uniform(-bound, bound);
    model.taps.layers.push_back(std::move(t));
    f_in = f_out;
  }
  const std::size_t f_last = config.widths.back();
  const double wbound = 1.0 / std::sqrt(static_cast<double>(f_last));
  model.readout_weights.resize(static_cast<Eigen::Index>(f_last));
  for (Eigen::Index i = 0; i < model.readout_weights.size(); ++i) {
    model.readout_weights[i] = rng.uniform(-wbound, wbound);
  }
  model.readout_bias = 0.0;
  return model;
}

namespace {

void check_finite(const Eigen::VectorXd& x, const char* what) {
  if (!x.allFinite()) throw numeric_error(std::string("vnn: non-finite ") + what);
}

inline void apply_nonlinearity(Eigen::MatrixXd& z, Nonlinearity nl) {
  if (nl == Nonlinearity::relu) {
    z = z.cwiseMax(0.0);
  } else {
    z = z.array().tanh().matrix();
  }
}

}  // namespace

Eigen::VectorXd apply_filter(std::span<const double> taps, const CovarianceModel& cov,
                             const Eigen::VectorXd& x) {
  if (taps.empty()) throw config_error("apply_filter: need at least one coefficient");
  if (x.size() != cov.dim()) {
    throw data_error("apply_filter: input length " + std::to_string(x.size()) +
                     " does not match covariance dimension " + std::to_string(cov.dim()));
  }
  check_finite(x, "filter input");
  Eigen::VectorXd power = x;  // C^0 x
  Eigen::VectorXd y = taps[0] * x;
  for (std::size_t k = 1; k < taps.size(); ++k) {
    power = cov.matrix * power;
    y += taps[k] * power;
  }
  return y;
}

std::vector<Eigen::VectorXd> layer_forward(const LayerTaps& taps, const CovarianceModel& cov,
                                           const std::vector<Eigen::VectorXd>& x_in,
                                           Nonlinearity nonlinearity) {
  if (x_in.size() != taps.f_in) {
    throw data_error("layer_forward: expected " + std::to_string(taps.f_in) +
                     " input features, got " + std::to_string(x_in.size()));
  }
  const Eigen::Index m = cov.dim();
  std::vector<Eigen::VectorXd> out(taps.f_out, Eigen::VectorXd::Zero(m));
  for (std::size_t g = 0; g < taps.f_in; ++g) {
    if (x_in[g].size() != m) throw data_error("layer_forward: input feature dimension mismatch");
    // Krylov sequence of the g-th input, shared across output features.
    Eigen::VectorXd power = x_in[g];
    for (std::size_t k = 0; k <= taps.order; ++k) {
      if (k > 0) power = cov.matrix * power;
      for (std::size_t f = 0; f < taps.f_out; ++f) out[f] += taps.h(f, g, k) * power;
    }
  }
  for (auto& z : out) {
    if (nonlinearity == Nonlinearity::relu) {
      z = z.cwiseMax(0.0);
    } else {
      z = z.array().tanh().matrix();
    }
  }
  return out;
}

ForwardTrace forward_batch(const VnnModel& model, const CovarianceModel& cov,
                           const Eigen::MatrixXd& X) {
  if (!cov.normalized) {
    throw data_error("forward: covariance must be spectrally normalized");
  }
  if (X.rows() != cov.dim()) {
    throw data_error("forward: input dimension " + std::to_string(X.rows()) +
                     " does not match covariance dimension " + std::to_string(cov.dim()));
  }
  const Eigen::Index m = X.rows();
  const Eigen::Index n = X.cols();

  ForwardTrace trace;
  trace.layers.resize(model.config.layers);
  std::vector<Eigen::MatrixXd> current{X};

  for (std::size_t l = 0; l < model.config.layers; ++l) {
    const LayerTaps& taps = model.taps.layers[l];
    LayerTrace& lt = trace.layers[l];
    lt.krylov.resize(taps.f_in);
    lt.preact.assign(taps.f_out, Eigen::MatrixXd::Zero(m, n));

    for (std::size_t g = 0; g < taps.f_in; ++g) {
      auto& kry = lt.krylov[g];
      kry.reserve(taps.order + 1);
      kry.push_back(current[g]);
      for (std::size_t k = 1; k <= taps.order; ++k) kry.push_back(cov.matrix * kry.back());
      for (std::size_t f = 0; f < taps.f_out; ++f) {
        for (std::size_t k = 0; k <= taps.order; ++k) {
          lt.preact[f].noalias() += taps.h(f, g, k) * kry[k];
        }
      }
    }
    lt.act = lt.preact;
    for (auto& z : lt.act) apply_nonlinearity(z, model.config.nonlinearity);
    current = lt.act;
  }

  const std::size_t f_last = model.config.widths.back();
  trace.pooled.resize(static_cast<Eigen::Index>(f_last), n);
  for (std::size_t f = 0; f < f_last; ++f) {
    trace.pooled.row(static_cast<Eigen::Index>(f)) = current[f].colwise().mean();
  }
  trace.output = (model.readout_weights.transpose() * trace.pooled).transpose();
  trace.output.array() += model.readout_bias;
  return trace;
}

Eigen::VectorXd predict_batch(const VnnModel& model, const CovarianceModel& cov,
                              const Eigen::MatrixXd& X) {
  // Trace-free evaluation; keeps only the running feature maps.
  if (!cov.normalized) throw data_error("forward: covariance must be spectrally normalized");
  if (X.rows() != cov.dim()) {
    throw data_error("forward: input dimension " + std::to_string(X.rows()) +
                     " does not match covariance dimension " + std::to_string(cov.dim()));
  }
  const Eigen::Index m = X.rows();
  const Eigen::Index n = X.cols();
  std::vector<Eigen::MatrixXd> current{X};
  for (std::size_t l = 0; l < model.config.layers; ++l) {
    const LayerTaps& taps = model.taps.layers[l];
    std::vector<Eigen::MatrixXd> next(taps.f_out, Eigen::MatrixXd::Zero(m, n));
    for (std::size_t g = 0; g < taps.f_in; ++g) {
      Eigen::MatrixXd power = current[g];
      for (std::size_t k = 0; k <= taps.order; ++k) {
        if (k > 0) power = cov.matrix * power;
        for (std::size_t f = 0; f < taps.f_out; ++f) {
          next[f].noalias() += taps.h(f, g, k) * power;
        }
      }
    }
    for (auto& z : next) apply_nonlinearity(z, model.config.nonlinearity);
    current = std::move(next);
  }
  const std::size_t f_last = model.config.widths.back();
  Eigen::MatrixXd pooled(static_cast<Eigen::Index>(f_last), n);
  for (std::size_t f = 0; f < f_last; ++f) {
    pooled.row(static_cast<Eigen::Index>(f)) = current[f].colwise().mean();
  }
  Eigen::VectorXd out = (model.readout_weights.transpose() * pooled).transpose();
  out.array() += model.readout_bias;
  return out;
}

double forward(const VnnModel& model, const CovarianceModel& cov, const Eigen::VectorXd& x) {
  return predict_batch(model, cov, x)[0];
}

std::pair<Eigen::VectorXd, CovarianceModel> permute_input(const Eigen::VectorXd& x,
                                                          const CovarianceModel& cov,
                                                          const std::vector<std::size_t>& perm) {
  const std::size_t m = static_cast<std::size_t>(cov.dim());
  if (perm.size() != m || static_cast<std::size_t>(x.size()) != m) {
    throw data_error("permute_input: permutation length must match dimension");
  }
  std::vector<bool> seen(m, false);
  for (std::size_t p : perm) {
    if (p >= m || seen[p]) throw data_error("permute_input: not a permutation");
    seen[p] = true;
  }
  Eigen::VectorXd px(static_cast<Eigen::Index>(m));
  Eigen::VectorXd pmean(static_cast<Eigen::Index>(m));
  Eigen::MatrixXd pc(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) {
    px[static_cast<Eigen::Index>(i)] = x[static_cast<Eigen::Index>(perm[i])];
    pmean[static_cast<Eigen::Index>(i)] =
        cov.mean.size() ? cov.mean[static_cast<Eigen::Index>(perm[i])] : 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      pc(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          cov.matrix(static_cast<Eigen::Index>(perm[i]), static_cast<Eigen::Index>(perm[j]));
    }
  }
  CovarianceModel out;
  out.matrix = std::move(pc);
  out.mean = cov.mean.size() ? pmean : cov.mean;
  out.spectral_norm = cov.spectral_norm;
  out.normalized = cov.normalized;  // eigenvalues are permutation invariant
  return {std::move(px), std::move(out)};
}

VnnModel shuffle_taps(const VnnModel& model, std::uint64_t seed) {
  VnnModel out = model;
  std::vector<double*> slots;
  for (auto& layer : out.taps.layers) {
    for (double& c : layer.coeffs) slots.push_back(&c);
  }
  std::vector<double> values(slots.size());
  for (std::size_t i = 0; i < slots.size(); ++i) values[i] = *slots[i];
  Rng rng(derive_seed(seed, "tap-shuffle"));
  rng.shuffle(values);
  for (std::size_t i = 0; i < slots.size(); ++i) *slots[i] = values[i];
  return out;
}

std::size_t param_count(const VnnModel& model) {
  std::size_t count = static_cast<std::size_t>(model.readout_weights.size()) + 1;
  for (const auto& layer : model.taps.layers) count += layer.coeffs.size();
  return count;
}

std::vector<double> flatten_params(const VnnModel& model) {
  std::vector<double> flat;
  flat.reserve(param_count(model));
  for (const auto& layer : model.taps.layers) {
    flat.insert(flat.end(), layer.coeffs.begin(), layer.coeffs.end());
  }
  flat.insert(flat.end(), model.readout_weights.data(),
              model.readout_weights.data() + model.readout_weights.size());
  flat.push_back(model.readout_bias);
  return flat;
}

void unflatten_params(VnnModel& model, std::span<const double> flat) {
  if (flat.size() != param_count(model)) {
    throw config_error("unflatten_params: parameter count mismatch");
  }
  std::size_t pos = 0;
  for (auto& layer : model.taps.layers) {
    std::copy(flat.begin() + pos, flat.begin() + pos + layer.coeffs.size(), layer.coeffs.begin());
    pos += layer.coeffs.size();
  }
  for (Eigen::Index i = 0; i < model.readout_weights.size(); ++i) {
    model.readout_weights[i] = flat[pos++];
  }
  model.readout_bias = flat[pos];
}

}  // namespace vnb
