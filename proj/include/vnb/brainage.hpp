#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vnb/stats.hpp"
#include "vnb/training.hpp"

namespace vnb {

// Post-hoc linear age-bias model: estimate - age = alpha * age + beta,
// fit by ordinary least squares (on the HC cohort in the full pipeline).
struct BiasCorrector {
  double alpha = 0.0;
  double beta = 0.0;
  std::set<Group> fit_group;
  std::size_t fit_n = 0;
};

struct DeltaAgeRecord {
  std::string id;
  Group group = Group::OTHER;
  double age = 0.0;        // chronological
  double estimate = 0.0;   // raw ensemble output
  double brain_age = 0.0;  // bias-corrected estimate
  double delta_age = 0.0;  // brain_age - age
  std::optional<double> cdr;
};

struct GroupStatsBlock {
  AnovaResult anova;
  TukeyResult tukey;
  std::optional<CorrelationResult> cdr_correlation;  // delta-age vs CDR
};

struct DeltaAgeReport {
  std::string protocol;  // "hc_only" | "full_cohort" | "transfer"
  std::string scale_tag;
  std::set<Group> training_groups;
  std::string train_cov_binding;
  std::string eval_cov_binding;
  BiasCorrector corrector;
  std::string corrector_provenance;
  std::vector<DeltaAgeRecord> records;
  std::map<Group, double> group_mae;  // |brain_age - age| per group
  std::string mae_set_label;
  double hc_mean_delta = 0.0;
  std::optional<GroupStatsBlock> stats;
  std::uint64_t seed = 0;
};

enum class Protocol { hc_only, full_cohort };
std::string to_string(Protocol p);
Protocol parse_protocol(const std::string& s);

// OLS of (estimate - age) on age via centered sums. Needs >= 2 points with
// nonconstant age.
BiasCorrector fit_bias(const std::vector<std::pair<double, double>>& estimate_age_pairs,
                       std::set<Group> fit_group = {});

// brain_age = estimate - (alpha * age + beta); delta_age = brain_age - age.
std::pair<double, double> apply_bias(const BiasCorrector& bc, double estimate, double age);

// Evaluates a trained ensemble over a cohort with the given covariance,
// corrects with `corrector`, and assembles records, per-group MAE and group
// statistics. Shared by the training-site pipeline and the transfer path.
DeltaAgeReport evaluate_cohort(const Ensemble& ens, const Cohort& cohort,
                               const CovarianceModel& eval_cov, const BiasCorrector& corrector,
                               const std::string& corrector_provenance);

struct PipelineResult {
  Ensemble ensemble;
  CovarianceModel eval_cov;
  DeltaAgeReport report;
};

// Full protocol of one site: train the ensemble on protocol-selected
// subjects, evaluate every subject against the configured evaluation
// covariance, fit the corrector on HC only, and report. hc_only trains on
// HC; full_cohort trains on everything.
PipelineResult run_pipeline(const Cohort& cohort, Protocol protocol, const VnnConfig& vcfg,
                            const TrainConfig& tcfg,
                            CovBinding eval_binding = CovBinding::whole_cohort, int threads = 1);

// ANOVA + Tukey over delta-age grouped by clinical label, OTHER excluded.
// Needs >= 2 groups with n >= 2 each.
std::pair<AnovaResult, TukeyResult> summarize_groups(const DeltaAgeReport& report);

// Attaches summarize_groups output plus the delta-age vs CDR correlation
// (when >= 3 subjects carry CDR) to the report.
void attach_group_stats(DeltaAgeReport& report);

// Flat CSV (`id,group,age,phi,brain_age,delta_age`) and per-group box-plot
// CSV (quartiles, whiskers, outliers).
void save_report_csv(const DeltaAgeReport& report, const std::string& path);
void save_boxplot_csv(const DeltaAgeReport& report, const std::string& path);

}  // namespace vnb
