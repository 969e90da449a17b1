#include "vnb/brainage.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "text_io.hpp"

namespace vnb {

std::string to_string(Protocol p) {
  return p == Protocol::hc_only ? "hc_only" : "full_cohort";
}

Protocol parse_protocol(const std::string& s) {
  if (s == "hc_only") return Protocol::hc_only;
  if (s == "full_cohort") return Protocol::full_cohort;
  throw config_error("unknown protocol '" + s + "'");
}

BiasCorrector fit_bias(const std::vector<std::pair<double, double>>& estimate_age_pairs,
                       std::set<Group> fit_group) {
  const std::size_t n = estimate_age_pairs.size();
  if (n < 2) throw data_error("fit_bias: need at least 2 points");

  double mean_age = 0.0, mean_gap = 0.0;
  for (const auto& [phi, age] : estimate_age_pairs) {
    mean_age += age;
    mean_gap += phi - age;
  }
  mean_age /= static_cast<double>(n);
  mean_gap /= static_cast<double>(n);

  double s_aa = 0.0, s_ag = 0.0;
  for (const auto& [phi, age] : estimate_age_pairs) {
    const double da = age - mean_age;
    s_aa += da * da;
    s_ag += da * ((phi - age) - mean_gap);
  }
  if (s_aa == 0.0) throw data_error("fit_bias: ages have zero variance");

  BiasCorrector bc;
  bc.alpha = s_ag / s_aa;
  bc.beta = mean_gap - bc.alpha * mean_age;
  bc.fit_group = std::move(fit_group);
  bc.fit_n = n;
  if (!std::isfinite(bc.alpha) || !std::isfinite(bc.beta)) {
    throw numeric_error("fit_bias: non-finite coefficients");
  }
  return bc;
}

std::pair<double, double> apply_bias(const BiasCorrector& bc, double estimate, double age) {
  const double brain_age = estimate - (bc.alpha * age + bc.beta);
  return {brain_age, brain_age - age};
}

DeltaAgeReport evaluate_cohort(const Ensemble& ens, const Cohort& cohort,
                               const CovarianceModel& eval_cov, const BiasCorrector& corrector,
                               const std::string& corrector_provenance) {
  const auto [X, ages] = design_matrix(cohort);
  const Eigen::VectorXd phi = predict_ensemble_batch(ens, eval_cov, X);

  DeltaAgeReport report;
  report.scale_tag = cohort.scale_tag;
  report.corrector = corrector;
  report.corrector_provenance = corrector_provenance;
  report.records.reserve(cohort.n());

  std::map<Group, std::pair<double, std::size_t>> mae_acc;
  double hc_sum = 0.0;
  std::size_t hc_n = 0;
  for (std::size_t i = 0; i < cohort.n(); ++i) {
    const Subject& s = cohort.subjects[i];
    DeltaAgeRecord rec;
    rec.id = s.id;
    rec.group = s.group;
    rec.age = s.age;
    rec.estimate = phi[static_cast<Eigen::Index>(i)];
    std::tie(rec.brain_age, rec.delta_age) = apply_bias(corrector, rec.estimate, rec.age);
    rec.cdr = s.cdr;

    auto& [acc, count] = mae_acc[s.group];
    acc += std::abs(rec.brain_age - rec.age);
    count += 1;
    if (s.group == Group::HC) {
      hc_sum += rec.delta_age;
      ++hc_n;
    }
    report.records.push_back(std::move(rec));
  }
  for (const auto& [g, acc] : mae_acc) {
    report.group_mae[g] = acc.first / static_cast<double>(acc.second);
  }
  report.mae_set_label = "all_subjects(bias_corrected)";
  report.hc_mean_delta = hc_n ? hc_sum / static_cast<double>(hc_n) : 0.0;
  return report;
}

PipelineResult run_pipeline(const Cohort& cohort, Protocol protocol, const VnnConfig& vcfg,
                            const TrainConfig& tcfg, CovBinding eval_binding, int threads) {
  const Cohort hc = filter_group(cohort, {Group::HC});
  if (hc.n() < 2) {
    throw data_error("pipeline: cohort must contain at least 2 HC subjects for bias correction");
  }

  TrainConfig cfg = tcfg;
  cfg.train_groups = protocol == Protocol::hc_only
                         ? std::set<Group>{Group::HC}
                         : std::set<Group>{Group::HC, Group::MCI, Group::AD, Group::OTHER};

  PipelineResult result;
  result.ensemble = train_ensemble(cohort, vcfg, cfg, threads);

  if (eval_binding == CovBinding::whole_cohort) {
    result.eval_cov = normalize_spectral(sample_covariance(cohort));
  } else {
    const Cohort pool = filter_group(cohort, cfg.train_groups);
    result.eval_cov = normalize_spectral(sample_covariance(split(pool, cfg.split).train));
  }

  // Corrector is always fit on HC (all of train/val/test), whatever the
  // training protocol selected.
  const auto [Xhc, yhc] = design_matrix(hc);
  const Eigen::VectorXd phi_hc = predict_ensemble_batch(result.ensemble, result.eval_cov, Xhc);
  std::vector<std::pair<double, double>> pairs;
  pairs.reserve(hc.n());
  for (std::size_t i = 0; i < hc.n(); ++i) {
    pairs.emplace_back(phi_hc[static_cast<Eigen::Index>(i)], yhc[static_cast<Eigen::Index>(i)]);
  }
  const BiasCorrector corrector = fit_bias(pairs, {Group::HC});

  result.report =
      evaluate_cohort(result.ensemble, cohort, result.eval_cov, corrector, "fit_on_hc(all_splits)");
  result.report.protocol = to_string(protocol);
  result.report.training_groups = cfg.train_groups;
  result.report.train_cov_binding = to_string(cfg.cov_binding);
  result.report.eval_cov_binding = to_string(eval_binding);
  result.report.seed = tcfg.split.seed;
  attach_group_stats(result.report);
  return result;
}

namespace {

GroupSamples delta_by_group(const DeltaAgeReport& report) {
  GroupSamples gs;
  for (const DeltaAgeRecord& rec : report.records) {
    if (rec.group == Group::OTHER) continue;
    gs.groups[to_string(rec.group)].push_back(rec.delta_age);
  }
  return gs;
}

}  // namespace

std::pair<AnovaResult, TukeyResult> summarize_groups(const DeltaAgeReport& report) {
  GroupSamples gs = delta_by_group(report);
  if (gs.groups.size() < 2) {
    throw data_error("summarize_groups: need at least 2 clinical groups");
  }
  return {anova_oneway(gs), tukey_hsd(gs)};
}

void attach_group_stats(DeltaAgeReport& report) {
  GroupStatsBlock block;
  auto [anova, tukey] = summarize_groups(report);
  block.anova = anova;
  block.tukey = std::move(tukey);

  std::vector<double> delta, cdr;
  for (const DeltaAgeRecord& rec : report.records) {
    if (rec.cdr) {
      delta.push_back(rec.delta_age);
      cdr.push_back(*rec.cdr);
    }
  }
  if (delta.size() >= 3) {
    try {
      block.cdr_correlation = pearson(delta, cdr);
    } catch (const data_error&) {
      // constant CDR column: correlation undefined, leave absent
    }
  }
  report.stats = std::move(block);
}

void save_report_csv(const DeltaAgeReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write report file '" + path + "'");
  out << "id,group,age,phi,brain_age,delta_age\n";
  for (const DeltaAgeRecord& rec : report.records) {
    out << rec.id << ',' << to_string(rec.group) << ',' << detail::format_double(rec.age) << ','
        << detail::format_double(rec.estimate) << ',' << detail::format_double(rec.brain_age)
        << ',' << detail::format_double(rec.delta_age) << "\n";
  }
}

void save_boxplot_csv(const DeltaAgeReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write boxplot file '" + path + "'");
  out << "group,n,q1,median,q3,whisker_low,whisker_high,outliers\n";
  std::map<Group, std::vector<double>> by_group;
  for (const DeltaAgeRecord& rec : report.records) by_group[rec.group].push_back(rec.delta_age);
  for (const auto& [g, values] : by_group) {
    const BoxStats bs = box_stats(values);
    out << to_string(g) << ',' << bs.n << ',' << detail::format_double(bs.q1) << ','
        << detail::format_double(bs.median) << ',' << detail::format_double(bs.q3) << ','
        << detail::format_double(bs.whisker_low) << ',' << detail::format_double(bs.whisker_high)
        << ',';
    for (std::size_t i = 0; i < bs.outliers.size(); ++i) {
      if (i) out << ';';
      out << detail::format_double(bs.outliers[i]);
    }
    out << "\n";
  }
}

}  // namespace vnb
