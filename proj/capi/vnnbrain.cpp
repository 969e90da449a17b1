#include "vnnbrain.h"

#include <cstring>
#include <string>

#include "vnb/experiment.hpp"
#include "vnb/serialize.hpp"

namespace {

thread_local std::string g_last_error;

template <typename Fn>
vnb_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return VNB_OK;
  } catch (const vnb::config_error& e) {
    g_last_error = e.what();
    return VNB_ERR_USAGE;
  } catch (const vnb::data_error& e) {
    g_last_error = e.what();
    return VNB_ERR_DATA;
  } catch (const vnb::numeric_error& e) {
    g_last_error = e.what();
    return VNB_ERR_NUMERIC;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return VNB_ERR_INTERNAL;
  }
}

vnb_status usage_error(const char* msg) {
  g_last_error = msg;
  return VNB_ERR_USAGE;
}

}  // namespace

struct vnb_cohort {
  vnb::Cohort value;
};
struct vnb_covariance {
  vnb::CovarianceModel value;
};
struct vnb_ensemble {
  vnb::Ensemble value;
};
struct vnb_experiment {
  vnb::ExperimentConfig config;
  vnb::Overrides overrides;
};

extern "C" {

const char* vnb_version(void) { return vnb::kLibraryVersion; }

const char* vnb_last_error(void) { return g_last_error.c_str(); }

vnb_status vnb_cohort_load_csv(const char* path, const char* scale_tag, vnb_cohort** out) {
  if (!path || !out) return usage_error("vnb_cohort_load_csv: null argument");
  return guarded([&] {
    auto handle = new vnb_cohort{vnb::load_cohort(path, scale_tag ? scale_tag : "")};
    *out = handle;
  });
}

vnb_status vnb_cohort_save_csv(const vnb_cohort* cohort, const char* path) {
  if (!cohort || !path) return usage_error("vnb_cohort_save_csv: null argument");
  return guarded([&] { vnb::save_cohort_csv(cohort->value, path); });
}

size_t vnb_cohort_size(const vnb_cohort* cohort) { return cohort ? cohort->value.n() : 0; }

size_t vnb_cohort_dim(const vnb_cohort* cohort) { return cohort ? cohort->value.m : 0; }

vnb_status vnb_cohort_features(const vnb_cohort* cohort, size_t index, double* features) {
  if (!cohort || !features) return usage_error("vnb_cohort_features: null argument");
  return guarded([&] {
    if (index >= cohort->value.n()) throw vnb::data_error("subject index out of range");
    const auto& f = cohort->value.subjects[index].features;
    std::memcpy(features, f.data(), f.size() * sizeof(double));
  });
}

void vnb_cohort_free(vnb_cohort* cohort) { delete cohort; }

vnb_status vnb_covariance_compute(const vnb_cohort* cohort, int normalize, vnb_covariance** out) {
  if (!cohort || !out) return usage_error("vnb_covariance_compute: null argument");
  return guarded([&] {
    vnb::CovarianceModel cm = vnb::sample_covariance(cohort->value);
    if (normalize) cm = vnb::normalize_spectral(cm);
    *out = new vnb_covariance{std::move(cm)};
  });
}

size_t vnb_covariance_dim(const vnb_covariance* cov) {
  return cov ? static_cast<size_t>(cov->value.dim()) : 0;
}

double vnb_covariance_spectral_norm(const vnb_covariance* cov) {
  return cov ? cov->value.spectral_norm : 0.0;
}

vnb_status vnb_covariance_entry(const vnb_covariance* cov, size_t row, size_t col, double* out) {
  if (!cov || !out) return usage_error("vnb_covariance_entry: null argument");
  return guarded([&] {
    const auto dim = static_cast<size_t>(cov->value.dim());
    if (row >= dim || col >= dim) throw vnb::data_error("covariance index out of range");
    *out = cov->value.matrix(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col));
  });
}

void vnb_covariance_free(vnb_covariance* cov) { delete cov; }

vnb_status vnb_train_ensemble(const vnb_cohort* cohort, const char* vnn_config_json,
                              const char* train_config_json, int threads, vnb_ensemble** out) {
  if (!cohort || !vnn_config_json || !out) {
    return usage_error("vnb_train_ensemble: null argument");
  }
  return guarded([&] {
    nlohmann::json jv;
    try {
      jv = nlohmann::json::parse(vnn_config_json);
    } catch (const nlohmann::json::parse_error& e) {
      throw vnb::config_error(std::string("vnn config JSON: ") + e.what());
    }
    vnb::VnnConfig vcfg;
    try {
      vcfg = vnb::vnn_config_from_json(jv);
    } catch (const vnb::data_error& e) {
      throw vnb::config_error(e.what());
    }

    vnb::TrainConfig tcfg;
    if (train_config_json && *train_config_json) {
      nlohmann::json jt;
      try {
        jt = nlohmann::json::parse(train_config_json);
      } catch (const nlohmann::json::parse_error& e) {
        throw vnb::config_error(std::string("train config JSON: ") + e.what());
      }
      if (jt.contains("learning_rate")) tcfg.learning_rate = jt.at("learning_rate").get<double>();
      if (jt.contains("epochs")) tcfg.epochs = jt.at("epochs").get<std::size_t>();
      if (jt.contains("ensemble_size")) tcfg.ensemble_size = jt.at("ensemble_size").get<std::size_t>();
      if (jt.contains("split")) {
        const auto& js = jt.at("split");
        if (js.contains("train")) tcfg.split.train_frac = js.at("train").get<double>();
        if (js.contains("val")) tcfg.split.val_frac = js.at("val").get<double>();
        if (js.contains("test")) tcfg.split.test_frac = js.at("test").get<double>();
        if (js.contains("seed")) tcfg.split.seed = js.at("seed").get<std::uint64_t>();
        if (js.contains("stratify_by_group")) {
          tcfg.split.stratify_by_group = js.at("stratify_by_group").get<bool>();
        }
      }
      if (jt.contains("train_covariance")) {
        tcfg.cov_binding = vnb::parse_cov_binding(jt.at("train_covariance").get<std::string>());
      }
      if (jt.contains("train_groups")) {
        tcfg.train_groups.clear();
        for (const auto& g : jt.at("train_groups")) {
          tcfg.train_groups.insert(vnb::parse_group(g.get<std::string>()));
        }
      }
    }
    *out = new vnb_ensemble{
        vnb::train_ensemble(cohort->value, vcfg, tcfg, threads < 1 ? 1 : threads)};
  });
}

vnb_status vnb_ensemble_save(const vnb_ensemble* ens, const char* path) {
  if (!ens || !path) return usage_error("vnb_ensemble_save: null argument");
  return guarded([&] { vnb::save_ensemble(ens->value, path); });
}

vnb_status vnb_ensemble_load(const char* path, vnb_ensemble** out) {
  if (!path || !out) return usage_error("vnb_ensemble_load: null argument");
  return guarded([&] { *out = new vnb_ensemble{vnb::load_ensemble(path)}; });
}

size_t vnb_ensemble_size(const vnb_ensemble* ens) { return ens ? ens->value.models.size() : 0; }

vnb_status vnb_ensemble_predict(const vnb_ensemble* ens, const vnb_covariance* cov,
                                const double* features, size_t dim, double* out) {
  if (!ens || !cov || !features || !out) return usage_error("vnb_ensemble_predict: null argument");
  return guarded([&] {
    if (dim != static_cast<size_t>(cov->value.dim())) {
      throw vnb::data_error("feature length does not match covariance dimension");
    }
    Eigen::Map<const Eigen::VectorXd> x(features, static_cast<Eigen::Index>(dim));
    *out = vnb::predict_ensemble(ens->value, cov->value, x);
  });
}

void vnb_ensemble_free(vnb_ensemble* ens) { delete ens; }

vnb_status vnb_experiment_open(const char* config_path, vnb_experiment** out) {
  if (!config_path || !out) return usage_error("vnb_experiment_open: null argument");
  return guarded([&] {
    auto handle = new vnb_experiment{};
    try {
      handle->config = vnb::load_experiment_config(config_path);
    } catch (...) {
      delete handle;
      throw;
    }
    *out = handle;
  });
}

vnb_status vnb_experiment_set_out_dir(vnb_experiment* exp, const char* out_dir) {
  if (!exp || !out_dir) return usage_error("vnb_experiment_set_out_dir: null argument");
  return guarded([&] {
    exp->overrides.out_dir = out_dir;
    vnb::apply_overrides(exp->config, exp->overrides);
  });
}

vnb_status vnb_experiment_set_seed(vnb_experiment* exp, uint64_t master_seed) {
  if (!exp) return usage_error("vnb_experiment_set_seed: null argument");
  return guarded([&] {
    exp->overrides.seed = master_seed;
    vnb::apply_overrides(exp->config, exp->overrides);
  });
}

vnb_status vnb_experiment_set_threads(vnb_experiment* exp, int threads) {
  if (!exp) return usage_error("vnb_experiment_set_threads: null argument");
  return guarded([&] {
    exp->overrides.threads = threads;
    vnb::apply_overrides(exp->config, exp->overrides);
  });
}

vnb_status vnb_experiment_run(vnb_experiment* exp, const char* command) {
  if (!exp || !command) return usage_error("vnb_experiment_run: null argument");
  return guarded([&] {
    const std::string cmd = command;
    if (cmd == "gen") {
      vnb::run_gen(exp->config);
    } else if (cmd == "train") {
      vnb::run_train(exp->config);
    } else if (cmd == "brainage") {
      vnb::run_brainage(exp->config);
    } else if (cmd == "transfer") {
      vnb::run_transfer(exp->config);
    } else {
      throw vnb::config_error("unknown command '" + cmd + "'");
    }
  });
}

void vnb_experiment_free(vnb_experiment* exp) { delete exp; }

vnb_status vnb_stats_report(const char* report_path, const char* out_dir) {
  if (!report_path) return usage_error("vnb_stats_report: null argument");
  return guarded([&] { vnb::run_stats(report_path, out_dir ? out_dir : ""); });
}

}  // extern "C"
