#include "vnb/experiment.hpp"

#include <fstream>

#include "vnb/rng.hpp"
#include "vnb/serialize.hpp"

namespace vnb {

namespace fs = std::filesystem;

namespace {

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// The raw config text hash ties every output back to the exact inputs.
struct ConfigIdentity {
  std::string hash;
  nlohmann::json raw;
};

ConfigIdentity g_identity;  // set by load_experiment_config, read by manifests

void write_manifest(const ExperimentConfig& cfg, const std::string& command,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
  nlohmann::json j;
  j["command"] = command;
  j["config_hash"] = g_identity.hash;
  j["master_seed"] = cfg.master_seed;
  j["library_version"] = kLibraryVersion;
  j["standardize_features"] = cfg.standardize_features;
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  save_json(j, (cfg.out_dir / ("manifest_" + command + ".json")).string());
}

SplitSpec split_from_json(const nlohmann::json& j) {
  SplitSpec s;
  if (j.contains("train")) s.train_frac = j.at("train").get<double>();
  if (j.contains("val")) s.val_frac = j.at("val").get<double>();
  if (j.contains("test")) s.test_frac = j.at("test").get<double>();
  if (j.contains("stratify_by_group")) s.stratify_by_group = j.at("stratify_by_group").get<bool>();
  return s;
}

}  // namespace

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open config file '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw config_error("config '" + path + "' is not valid JSON: " + e.what());
  }
  g_identity = {fnv1a_hex(j.dump()), j};

  ExperimentConfig cfg;
  cfg.config_dir = fs::absolute(path).parent_path();
  if (!j.contains("master_seed")) throw config_error("config: master_seed is required");
  cfg.master_seed = j.at("master_seed").get<std::uint64_t>();
  if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
  if (cfg.out_dir.is_relative()) cfg.out_dir = cfg.config_dir / cfg.out_dir;
  if (j.contains("threads")) cfg.threads = j.at("threads").get<int>();
  if (cfg.threads < 1) throw config_error("config: threads must be >= 1");
  if (j.contains("standardize_features")) {
    cfg.standardize_features = j.at("standardize_features").get<bool>();
  }

  if (j.contains("synth")) {
    const auto& js = j.at("synth");
    cfg.synth.present = true;
    cfg.synth.n = js.at("n").get<std::size_t>();
    if (js.contains("latent_dim")) cfg.synth.graphon.latent_dim = js.at("latent_dim").get<std::size_t>();
    if (js.contains("kernel")) {
      const auto& jk = js.at("kernel");
      if (jk.contains("length_scale")) cfg.synth.graphon.length_scale = jk.at("length_scale").get<double>();
      if (jk.contains("variance")) cfg.synth.graphon.variance = jk.at("variance").get<double>();
      if (jk.contains("nugget")) cfg.synth.graphon.nugget = jk.at("nugget").get<double>();
    }
    cfg.synth.scales.scales = js.at("scales").get<std::vector<std::size_t>>();
    if (js.contains("pathology")) {
      const auto& jp = js.at("pathology");
      PathologySpec& p = cfg.synth.pathology;
      if (jp.contains("age_slope")) p.age_slope = jp.at("age_slope").get<double>();
      if (jp.contains("mci_shift_years")) p.mci_shift_years = jp.at("mci_shift_years").get<double>();
      if (jp.contains("ad_shift_years")) p.ad_shift_years = jp.at("ad_shift_years").get<double>();
      if (jp.contains("hc_fraction")) p.hc_fraction = jp.at("hc_fraction").get<double>();
      if (jp.contains("mci_fraction")) p.mci_fraction = jp.at("mci_fraction").get<double>();
      if (jp.contains("ad_fraction")) p.ad_fraction = jp.at("ad_fraction").get<double>();
      if (jp.contains("region")) {
        p.region_lo = jp.at("region").at(0).get<double>();
        p.region_hi = jp.at("region").at(1).get<double>();
      }
    }
    if (js.contains("sites")) {
      for (const auto& jt : js.at("sites")) {
        SiteSpec site;
        site.tag = jt.at("tag").get<std::string>();
        site.dim = jt.at("dim").get<std::size_t>();
        if (jt.contains("gain_std")) site.gain_std = jt.at("gain_std").get<double>();
        if (jt.contains("offset_std")) site.offset_std = jt.at("offset_std").get<double>();
        cfg.synth.sites.push_back(std::move(site));
      }
    }
  }

  if (j.contains("cohorts")) {
    const auto& jc = j.at("cohorts");
    if (jc.contains("train")) cfg.train_cohort = jc.at("train").get<std::string>();
    if (jc.contains("targets")) cfg.target_cohorts = jc.at("targets").get<std::vector<std::string>>();
  }

  if (j.contains("vnn")) {
    try {
      cfg.vnn = vnn_config_from_json(j.at("vnn"));
    } catch (const data_error& e) {
      throw config_error(std::string("config: vnn section: ") + e.what());
    }
  }

  if (j.contains("train")) {
    const auto& jt = j.at("train");
    TrainConfig& t = cfg.train;
    if (jt.contains("learning_rate")) t.learning_rate = jt.at("learning_rate").get<double>();
    if (jt.contains("epochs")) t.epochs = jt.at("epochs").get<std::size_t>();
    if (jt.contains("ensemble_size")) t.ensemble_size = jt.at("ensemble_size").get<std::size_t>();
    if (jt.contains("adam")) {
      const auto& ja = jt.at("adam");
      if (ja.contains("beta1")) t.adam_beta1 = ja.at("beta1").get<double>();
      if (ja.contains("beta2")) t.adam_beta2 = ja.at("beta2").get<double>();
      if (ja.contains("eps")) t.adam_eps = ja.at("eps").get<double>();
    }
    if (jt.contains("split")) t.split = split_from_json(jt.at("split"));
    if (jt.contains("train_covariance")) {
      t.cov_binding = parse_cov_binding(jt.at("train_covariance").get<std::string>());
    }
    if (jt.contains("clip_grad_norm") && !jt.at("clip_grad_norm").is_null()) {
      t.clip_grad_norm = jt.at("clip_grad_norm").get<double>();
    }
  }

  if (j.contains("protocol")) cfg.protocol = parse_protocol(j.at("protocol").get<std::string>());
  if (j.contains("evaluation_covariance")) {
    cfg.eval_binding = parse_cov_binding(j.at("evaluation_covariance").get<std::string>());
  }
  if (j.contains("transfer") && j.at("transfer").contains("rebias")) {
    cfg.transfer.rebias = parse_rebias(j.at("transfer").at("rebias").get<std::string>());
  }

  // Single-master-seed policy: per-purpose streams are derived, never read
  // from the config.
  cfg.synth.graphon.seed = derive_seed(cfg.master_seed, "synth");
  for (std::size_t i = 0; i < cfg.synth.sites.size(); ++i) {
    cfg.synth.sites[i].seed = derive_seed(cfg.master_seed, "site", i);
  }
  cfg.vnn.seed = derive_seed(cfg.master_seed, "vnn-init");
  cfg.train.split.seed = derive_seed(cfg.master_seed, "split");
  return cfg;
}

void apply_overrides(ExperimentConfig& cfg, const Overrides& ov) {
  if (ov.out_dir) cfg.out_dir = fs::absolute(*ov.out_dir);
  if (ov.threads) {
    if (*ov.threads < 1) throw config_error("threads override must be >= 1");
    cfg.threads = *ov.threads;
  }
  if (ov.seed) {
    cfg.master_seed = *ov.seed;
    cfg.synth.graphon.seed = derive_seed(cfg.master_seed, "synth");
    for (std::size_t i = 0; i < cfg.synth.sites.size(); ++i) {
      cfg.synth.sites[i].seed = derive_seed(cfg.master_seed, "site", i);
    }
    cfg.vnn.seed = derive_seed(cfg.master_seed, "vnn-init");
    cfg.train.split.seed = derive_seed(cfg.master_seed, "split");
  }
}

std::filesystem::path cohort_file(const ExperimentConfig& cfg, const std::string& name) {
  fs::path p(name);
  return p.is_absolute() ? p : cfg.out_dir / p;
}

namespace {

Cohort load_cohort_for(const ExperimentConfig& cfg, const std::string& name) {
  const fs::path path = cohort_file(cfg, name);
  const std::string tag = path.stem().string();
  Cohort cohort = load_cohort(path.string(), tag.starts_with("cohort_") ? tag.substr(7) : tag);
  if (cfg.standardize_features) cohort = standardize_features(cohort);
  return cohort;
}

CovarianceModel evaluation_covariance(const ExperimentConfig& cfg, const Cohort& cohort,
                                      const std::set<Group>& train_groups) {
  if (cfg.eval_binding == CovBinding::whole_cohort) {
    return normalize_spectral(sample_covariance(cohort));
  }
  const Cohort pool = filter_group(cohort, train_groups);
  return normalize_spectral(sample_covariance(split(pool, cfg.train.split).train));
}

std::set<Group> protocol_groups(Protocol p) {
  return p == Protocol::hc_only
             ? std::set<Group>{Group::HC}
             : std::set<Group>{Group::HC, Group::MCI, Group::AD, Group::OTHER};
}

}  // namespace

void run_gen(const ExperimentConfig& cfg) {
  if (!cfg.synth.present) throw config_error("gen: config has no synth section");
  fs::create_directories(cfg.out_dir);

  const MultiscaleBundle bundle =
      generate_multiscale(cfg.synth.graphon, cfg.synth.scales, cfg.synth.n, cfg.synth.pathology);

  std::vector<std::string> outputs;
  for (const Cohort& cohort : bundle.cohorts) {
    const std::string name = "cohort_" + cohort.scale_tag + ".csv";
    save_cohort_csv(cohort, (cfg.out_dir / name).string());
    outputs.push_back(name);
  }
  for (const SiteSpec& site : cfg.synth.sites) {
    const Cohort cohort = generate_site_variant(bundle, site);
    const std::string name = "cohort_" + cohort.scale_tag + ".csv";
    save_cohort_csv(cohort, (cfg.out_dir / name).string());
    outputs.push_back(name);
  }
  save_ground_truth(bundle, (cfg.out_dir / "ground_truth.json").string());
  outputs.push_back("ground_truth.json");
  write_manifest(cfg, "gen", {}, outputs);
}

void run_train(const ExperimentConfig& cfg) {
  if (cfg.train_cohort.empty()) throw config_error("train: config names no training cohort");
  fs::create_directories(cfg.out_dir);
  const Cohort cohort = load_cohort_for(cfg, cfg.train_cohort);

  TrainConfig tcfg = cfg.train;
  tcfg.train_groups = protocol_groups(cfg.protocol);
  const Ensemble ens = train_ensemble(cohort, cfg.vnn, tcfg, cfg.threads);

  save_ensemble(ens, (cfg.out_dir / kEnsembleFile).string());

  nlohmann::json jr;
  jr["format_version"] = 1;
  jr["protocol"] = to_string(cfg.protocol);
  jr["ensemble_test_mae"] = ens.ensemble_test_mae;
  jr["ensemble_test_set"] = ens.ensemble_test_set;
  nlohmann::json members = nlohmann::json::array();
  for (const TrainReport& r : ens.reports) members.push_back(train_report_to_json(r));
  jr["member_reports"] = std::move(members);
  save_json(jr, (cfg.out_dir / kTrainReportFile).string());

  // Member-0 loss curves, two-column CSV per phase.
  for (const char* phase : {"train", "val"}) {
    std::ofstream out(cfg.out_dir / ("loss_curve_member0_" + std::string(phase) + ".csv"));
    out << "epoch,loss\n";
    const auto& losses =
        std::string(phase) == "train" ? ens.reports[0].train_loss : ens.reports[0].val_loss;
    for (std::size_t e = 0; e < losses.size(); ++e) {
      out << e << ',' << nlohmann::json(losses[e]).dump() << "\n";
    }
  }
  write_manifest(cfg, "train", {cfg.train_cohort},
                 {kEnsembleFile, kTrainReportFile, "loss_curve_member0_train.csv",
                  "loss_curve_member0_val.csv"});
}

void run_brainage(const ExperimentConfig& cfg) {
  if (cfg.train_cohort.empty()) throw config_error("brainage: config names no training cohort");
  const Cohort cohort = load_cohort_for(cfg, cfg.train_cohort);
  const Ensemble ens = load_ensemble((cfg.out_dir / kEnsembleFile).string());

  const std::set<Group> train_groups = protocol_groups(cfg.protocol);
  const CovarianceModel eval_cov = evaluation_covariance(cfg, cohort, train_groups);

  const Cohort hc = filter_group(cohort, {Group::HC});
  if (hc.n() < 2) throw data_error("brainage: cohort has fewer than 2 HC subjects");
  const auto [Xhc, yhc] = design_matrix(hc);
  const Eigen::VectorXd phi_hc = predict_ensemble_batch(ens, eval_cov, Xhc);
  std::vector<std::pair<double, double>> pairs;
  for (std::size_t i = 0; i < hc.n(); ++i) {
    pairs.emplace_back(phi_hc[static_cast<Eigen::Index>(i)], yhc[static_cast<Eigen::Index>(i)]);
  }
  const BiasCorrector corrector = fit_bias(pairs, {Group::HC});

  DeltaAgeReport report = evaluate_cohort(ens, cohort, eval_cov, corrector, "fit_on_hc(all_splits)");
  report.protocol = to_string(cfg.protocol);
  report.training_groups = train_groups;
  report.train_cov_binding = to_string(cfg.train.cov_binding);
  report.eval_cov_binding = to_string(cfg.eval_binding);
  report.seed = cfg.master_seed;
  attach_group_stats(report);

  save_json(delta_age_report_to_json(report), (cfg.out_dir / kDeltaAgeReportFile).string());
  save_report_csv(report, (cfg.out_dir / "delta_age_report.csv").string());
  save_boxplot_csv(report, (cfg.out_dir / "delta_age_boxplot.csv").string());
  write_manifest(cfg, "brainage", {cfg.train_cohort, kEnsembleFile},
                 {kDeltaAgeReportFile, "delta_age_report.csv", "delta_age_boxplot.csv"});
}

void run_transfer(const ExperimentConfig& cfg) {
  if (cfg.target_cohorts.empty()) throw config_error("transfer: config names no target cohorts");
  const Ensemble ens = load_ensemble((cfg.out_dir / kEnsembleFile).string());
  const DeltaAgeReport source_report =
      delta_age_report_from_json(load_json((cfg.out_dir / kDeltaAgeReportFile).string()));

  const Cohort source = load_cohort_for(cfg, cfg.train_cohort);
  const CovarianceModel source_cov =
      evaluation_covariance(cfg, source, protocol_groups(cfg.protocol));

  std::vector<std::string> inputs = {cfg.train_cohort, kEnsembleFile, kDeltaAgeReportFile};
  std::vector<std::string> outputs;
  for (const std::string& name : cfg.target_cohorts) {
    const Cohort target = load_cohort_for(cfg, name);
    inputs.push_back(name);

    // Epsilon pairing applies when the target covers the same subjects.
    bool paired = target.n() == source.n();
    if (paired) {
      std::set<std::string> ids;
      for (const Subject& s : source.subjects) ids.insert(s.id);
      for (const Subject& s : target.subjects) paired = paired && ids.count(s.id) > 0;
    }

    const TransferReport report =
        transfer_pipeline(ens, source_report.corrector, target, cfg.transfer,
                          paired ? &source : nullptr, paired ? &source_cov : nullptr);

    const std::string base = "transfer_" + target.scale_tag;
    save_json(transfer_report_to_json(report), (cfg.out_dir / (base + ".json")).string());
    save_boxplot_csv(report.report, (cfg.out_dir / (base + "_boxplot.csv")).string());
    outputs.push_back(base + ".json");
    outputs.push_back(base + "_boxplot.csv");
  }
  write_manifest(cfg, "transfer", inputs, outputs);
}

void run_stats(const std::string& report_path, const std::string& out_dir) {
  const DeltaAgeReport report = delta_age_report_from_json(load_json(report_path));
  const auto [anova, tukey] = summarize_groups(report);

  const fs::path dir = out_dir.empty() ? fs::absolute(report_path).parent_path() : fs::path(out_dir);
  fs::create_directories(dir);

  nlohmann::json j;
  j["format_version"] = 1;
  j["source_report"] = fs::path(report_path).filename().string();
  j["anova"] = anova_to_json(anova);
  j["tukey"] = tukey_to_json(tukey);
  nlohmann::json sizes = nlohmann::json::object();
  for (const DeltaAgeRecord& r : report.records) {
    if (r.group == Group::OTHER) continue;
    const std::string name = to_string(r.group);
    sizes[name] = sizes.value(name, 0) + 1;
  }
  j["group_sizes"] = std::move(sizes);
  save_json(j, (dir / "stats.json").string());

  std::ofstream csv(dir / "tukey_pairs.csv");
  csv << "pair,mean_diff,q,p\n";
  for (const TukeyPair& p : tukey.pairs) {
    csv << p.group_a << "-" << p.group_b << ',' << nlohmann::json(p.mean_diff).dump() << ','
        << nlohmann::json(p.q).dump() << ',' << nlohmann::json(p.p_value).dump() << "\n";
  }
}

}  // namespace vnb
