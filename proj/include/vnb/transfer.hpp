#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vnb/brainage.hpp"

namespace vnb {

enum class RebiasPolicy { keep_source_corrector, refit_on_target_hc };
std::string to_string(RebiasPolicy p);
RebiasPolicy parse_rebias(const std::string& s);

struct TransferConfig {
  RebiasPolicy rebias = RebiasPolicy::refit_on_target_hc;
};

struct SubjectPairOutput {
  std::string id;
  double phi_source = 0.0;  // output at the source scale
  double phi_target = 0.0;  // output at the target scale
};

struct EpsilonSummary {
  double mean = 0.0;
  double max = 0.0;
  std::size_t n = 0;
  std::vector<SubjectPairOutput> pairs;
};

struct TransferReport {
  std::string target_tag;
  RebiasPolicy rebias = RebiasPolicy::refit_on_target_hc;
  std::optional<EpsilonSummary> epsilon;  // filled when paired source data is supplied
  std::optional<double> hc_offset;        // HC mean delta-age under the source corrector
  DeltaAgeReport report;
};

// Re-binds the trained filter taps to a covariance of another dimension.
// No parameter changes whatsoever; the returned ensemble records the move.
Ensemble transfer_model(const Ensemble& ens, const CovarianceModel& target_cov);

// Per-subject |phi_scale1 - phi_scale2| over subjects paired by id; both
// cohorts must cover exactly the same subjects.
EpsilonSummary measure_epsilon(const Ensemble& ens, const Cohort& cohort1,
                               const CovarianceModel& cov1, const Cohort& cohort2,
                               const CovarianceModel& cov2);

// Full cross-scale / cross-site evaluation: builds the whole-target-cohort
// covariance (normalized), evaluates the ensemble, applies the configured
// corrector, and reports delta-age with group statistics. Pass the source
// cohort to also measure the output discrepancy of Definition-style pairing.
TransferReport transfer_pipeline(const Ensemble& ens, const BiasCorrector& source_corrector,
                                 const Cohort& target, const TransferConfig& cfg,
                                 const Cohort* paired_source = nullptr,
                                 const CovarianceModel* source_cov = nullptr);

}  // namespace vnb
