#include "vnb/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace vnb {

std::string to_string(RebiasPolicy p) {
  return p == RebiasPolicy::keep_source_corrector ? "keep_source_corrector"
                                                  : "refit_on_target_hc";
}

RebiasPolicy parse_rebias(const std::string& s) {
  if (s == "keep_source_corrector") return RebiasPolicy::keep_source_corrector;
  if (s == "refit_on_target_hc") return RebiasPolicy::refit_on_target_hc;
  throw config_error("unknown rebias policy '" + s + "'");
}

Ensemble transfer_model(const Ensemble& ens, const CovarianceModel& target_cov) {
  if (!target_cov.normalized) {
    throw data_error("transfer_model: target covariance must be spectrally normalized");
  }
  // Filter taps are covariance-free, so re-binding is applicability only.
  return ens;
}

EpsilonSummary measure_epsilon(const Ensemble& ens, const Cohort& cohort1,
                               const CovarianceModel& cov1, const Cohort& cohort2,
                               const CovarianceModel& cov2) {
  if (cohort1.n() != cohort2.n()) {
    throw data_error("measure_epsilon: cohorts must cover the same subjects");
  }
  std::map<std::string, std::size_t> index2;
  for (std::size_t i = 0; i < cohort2.n(); ++i) index2[cohort2.subjects[i].id] = i;

  const auto [X1, y1] = design_matrix(cohort1);
  const auto [X2, y2] = design_matrix(cohort2);
  const Eigen::VectorXd phi1 = predict_ensemble_batch(ens, cov1, X1);
  const Eigen::VectorXd phi2 = predict_ensemble_batch(ens, cov2, X2);

  EpsilonSummary eps;
  eps.n = cohort1.n();
  eps.pairs.reserve(eps.n);
  double acc = 0.0;
  for (std::size_t i = 0; i < cohort1.n(); ++i) {
    const auto it = index2.find(cohort1.subjects[i].id);
    if (it == index2.end()) {
      throw data_error("measure_epsilon: subject '" + cohort1.subjects[i].id +
                       "' is unpaired at the second scale");
    }
    SubjectPairOutput pair;
    pair.id = cohort1.subjects[i].id;
    pair.phi_source = phi1[static_cast<Eigen::Index>(i)];
    pair.phi_target = phi2[static_cast<Eigen::Index>(it->second)];
    const double diff = std::abs(pair.phi_source - pair.phi_target);
    acc += diff;
    eps.max = std::max(eps.max, diff);
    eps.pairs.push_back(std::move(pair));
  }
  eps.mean = acc / static_cast<double>(eps.n);
  return eps;
}

TransferReport transfer_pipeline(const Ensemble& ens, const BiasCorrector& source_corrector,
                                 const Cohort& target, const TransferConfig& cfg,
                                 const Cohort* paired_source, const CovarianceModel* source_cov) {
  const CovarianceModel target_cov = normalize_spectral(sample_covariance(target));
  const Ensemble bound = transfer_model(ens, target_cov);

  BiasCorrector corrector;
  std::string provenance;
  if (cfg.rebias == RebiasPolicy::keep_source_corrector) {
    corrector = source_corrector;
    provenance = "source_corrector";
  } else {
    const Cohort hc = filter_group(target, {Group::HC});
    if (hc.n() < 2) {
      throw data_error("transfer: refit_on_target_hc needs at least 2 HC subjects in the target");
    }
    const auto [Xhc, yhc] = design_matrix(hc);
    const Eigen::VectorXd phi_hc = predict_ensemble_batch(bound, target_cov, Xhc);
    std::vector<std::pair<double, double>> pairs;
    pairs.reserve(hc.n());
    for (std::size_t i = 0; i < hc.n(); ++i) {
      pairs.emplace_back(phi_hc[static_cast<Eigen::Index>(i)], yhc[static_cast<Eigen::Index>(i)]);
    }
    corrector = fit_bias(pairs, {Group::HC});
    provenance = "refit_on_target_hc";
  }

  TransferReport out;
  out.target_tag = target.scale_tag;
  out.rebias = cfg.rebias;
  out.report = evaluate_cohort(bound, target, target_cov, corrector, provenance);
  out.report.protocol = "transfer";
  out.report.train_cov_binding = to_string(ens.train_binding);
  out.report.eval_cov_binding = "whole_target_cohort";
  attach_group_stats(out.report);
  if (cfg.rebias == RebiasPolicy::keep_source_corrector) {
    // The systematic shift the source corrector leaves on target controls.
    out.hc_offset = out.report.hc_mean_delta;
  }
  if (paired_source && source_cov) {
    out.epsilon = measure_epsilon(ens, *paired_source, *source_cov, target, target_cov);
  }
  return out;
}

}  // namespace vnb
