#include "vnb/serialize.hpp"

#include <fstream>

namespace vnb {

namespace {

constexpr int kFormatVersion = 1;

nlohmann::json require(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw data_error(std::string("missing field '") + key + "'");
  return j.at(key);
}

std::set<Group> groups_from_json(const nlohmann::json& j) {
  std::set<Group> out;
  for (const auto& g : j) out.insert(parse_group(g.get<std::string>()));
  return out;
}

nlohmann::json groups_to_json(const std::set<Group>& groups) {
  nlohmann::json out = nlohmann::json::array();
  for (Group g : groups) out.push_back(to_string(g));
  return out;
}

}  // namespace

void save_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
  if (!out) throw data_error("write failed for '" + path + "'");
}

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw data_error("invalid JSON in '" + path + "': " + e.what());
  }
  return j;
}

nlohmann::json cohort_to_json(const Cohort& cohort) {
  nlohmann::json j;
  j["format_version"] = kFormatVersion;
  j["m"] = cohort.m;
  j["scale_tag"] = cohort.scale_tag;
  nlohmann::json subjects = nlohmann::json::array();
  for (const Subject& s : cohort.subjects) {
    nlohmann::json js = {{"id", s.id},
                         {"age", s.age},
                         {"group", to_string(s.group)},
                         {"features", s.features}};
    if (s.cdr) js["cdr"] = *s.cdr;
    subjects.push_back(std::move(js));
  }
  j["subjects"] = std::move(subjects);
  return j;
}

Cohort cohort_from_json(const nlohmann::json& j) {
  Cohort cohort;
  cohort.m = require(j, "m").get<std::size_t>();
  cohort.scale_tag = require(j, "scale_tag").get<std::string>();
  for (const auto& js : require(j, "subjects")) {
    Subject s;
    s.id = require(js, "id").get<std::string>();
    s.age = require(js, "age").get<double>();
    s.group = parse_group(require(js, "group").get<std::string>());
    s.features = require(js, "features").get<std::vector<double>>();
    if (js.contains("cdr")) s.cdr = js.at("cdr").get<double>();
    cohort.subjects.push_back(std::move(s));
  }
  cohort.validate();
  return cohort;
}

nlohmann::json vnn_config_to_json(const VnnConfig& cfg) {
  return {{"layers", cfg.layers},
          {"filter_order", cfg.filter_order},
          {"widths", cfg.widths},
          {"nonlinearity", to_string(cfg.nonlinearity)},
          {"readout", "mean_then_linear"},
          {"seed", cfg.seed}};
}

VnnConfig vnn_config_from_json(const nlohmann::json& j) {
  VnnConfig cfg;
  cfg.layers = require(j, "layers").get<std::size_t>();
  cfg.filter_order = require(j, "filter_order").get<std::size_t>();
  cfg.widths = require(j, "widths").get<std::vector<std::size_t>>();
  cfg.nonlinearity = parse_nonlinearity(require(j, "nonlinearity").get<std::string>());
  if (j.contains("readout") && j.at("readout").get<std::string>() != "mean_then_linear") {
    throw config_error("unknown readout '" + j.at("readout").get<std::string>() + "'");
  }
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.validate();
  return cfg;
}

nlohmann::json model_to_json(const VnnModel& model) {
  nlohmann::json j;
  j["format_version"] = kFormatVersion;
  j["config"] = vnn_config_to_json(model.config);
  nlohmann::json layers = nlohmann::json::array();
  for (const LayerTaps& t : model.taps.layers) {
    nlohmann::json bank = nlohmann::json::array();  // [f_out][f_in][order+1]
    for (std::size_t f = 0; f < t.f_out; ++f) {
      nlohmann::json row = nlohmann::json::array();
      for (std::size_t g = 0; g < t.f_in; ++g) {
        nlohmann::json coeffs = nlohmann::json::array();
        for (std::size_t k = 0; k <= t.order; ++k) coeffs.push_back(t.h(f, g, k));
        row.push_back(std::move(coeffs));
      }
      bank.push_back(std::move(row));
    }
    layers.push_back(std::move(bank));
  }
  j["taps"] = std::move(layers);
  j["readout_weights"] = std::vector<double>(
      model.readout_weights.data(), model.readout_weights.data() + model.readout_weights.size());
  j["readout_bias"] = model.readout_bias;
  return j;
}

VnnModel model_from_json(const nlohmann::json& j) {
  VnnModel model;
  model.config = vnn_config_from_json(require(j, "config"));
  const auto& layers = require(j, "taps");
  std::size_t f_in = 1;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& bank = layers.at(l);
    const std::size_t f_out = bank.size();
    LayerTaps t = LayerTaps::zeros(f_out, f_in, model.config.filter_order);
    for (std::size_t f = 0; f < f_out; ++f) {
      const auto& row = bank.at(f);
      if (row.size() != f_in) throw data_error("model: tap tensor width mismatch");
      for (std::size_t g = 0; g < f_in; ++g) {
        const auto& coeffs = row.at(g);
        if (coeffs.size() != t.order + 1) throw data_error("model: tap order mismatch");
        for (std::size_t k = 0; k <= t.order; ++k) t.h(f, g, k) = coeffs.at(k).get<double>();
      }
    }
    model.taps.layers.push_back(std::move(t));
    f_in = f_out;
  }
  const auto weights = require(j, "readout_weights").get<std::vector<double>>();
  model.readout_weights =
      Eigen::Map<const Eigen::VectorXd>(weights.data(), static_cast<Eigen::Index>(weights.size()));
  model.readout_bias = require(j, "readout_bias").get<double>();
  model.validate();
  return model;
}

nlohmann::json train_report_to_json(const TrainReport& report) {
  // wall_clock_seconds deliberately omitted: serialized reports must be
  // byte-identical across reruns of the same seed.
  return {{"train_loss", report.train_loss},
          {"val_loss", report.val_loss},
          {"selected_epoch", report.selected_epoch},
          {"test_mae", report.test_mae},
          {"test_mae_set", report.test_mae_set},
          {"seed", report.seed}};
}

nlohmann::json ensemble_to_json(const Ensemble& ens) {
  nlohmann::json j;
  j["format_version"] = kFormatVersion;
  j["config"] = vnn_config_to_json(ens.config);
  j["train_binding"] = to_string(ens.train_binding);
  nlohmann::json members = nlohmann::json::array();
  for (const VnnModel& m : ens.models) members.push_back(model_to_json(m));
  j["members"] = std::move(members);
  nlohmann::json reports = nlohmann::json::array();
  for (const TrainReport& r : ens.reports) reports.push_back(train_report_to_json(r));
  j["member_reports"] = std::move(reports);
  j["ensemble_test_mae"] = ens.ensemble_test_mae;
  j["ensemble_test_set"] = ens.ensemble_test_set;
  return j;
}

Ensemble ensemble_from_json(const nlohmann::json& j) {
  Ensemble ens;
  ens.config = vnn_config_from_json(require(j, "config"));
  ens.train_binding = parse_cov_binding(require(j, "train_binding").get<std::string>());
  for (const auto& jm : require(j, "members")) ens.models.push_back(model_from_json(jm));
  if (ens.models.empty()) throw data_error("ensemble: no members");
  if (j.contains("member_reports")) {
    for (const auto& jr : j.at("member_reports")) {
      TrainReport r;
      r.train_loss = jr.at("train_loss").get<std::vector<double>>();
      r.val_loss = jr.at("val_loss").get<std::vector<double>>();
      r.selected_epoch = jr.at("selected_epoch").get<std::size_t>();
      r.test_mae = jr.at("test_mae").get<double>();
      r.test_mae_set = jr.at("test_mae_set").get<std::string>();
      r.seed = jr.at("seed").get<std::uint64_t>();
      ens.reports.push_back(std::move(r));
    }
  }
  if (j.contains("ensemble_test_mae")) ens.ensemble_test_mae = j.at("ensemble_test_mae").get<double>();
  if (j.contains("ensemble_test_set")) ens.ensemble_test_set = j.at("ensemble_test_set").get<std::string>();
  return ens;
}

nlohmann::json corrector_to_json(const BiasCorrector& bc) {
  return {{"alpha", bc.alpha},
          {"beta", bc.beta},
          {"fit_group", groups_to_json(bc.fit_group)},
          {"fit_n", bc.fit_n}};
}

BiasCorrector corrector_from_json(const nlohmann::json& j) {
  BiasCorrector bc;
  bc.alpha = require(j, "alpha").get<double>();
  bc.beta = require(j, "beta").get<double>();
  bc.fit_group = groups_from_json(require(j, "fit_group"));
  bc.fit_n = require(j, "fit_n").get<std::size_t>();
  return bc;
}

nlohmann::json anova_to_json(const AnovaResult& a) {
  return {{"f_value", a.f_value},
          {"df_between", a.df_between},
          {"df_within", a.df_within},
          {"p_value", a.p_value}};
}

nlohmann::json tukey_to_json(const TukeyResult& t) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const TukeyPair& p : t.pairs) {
    pairs.push_back({{"group_a", p.group_a},
                     {"group_b", p.group_b},
                     {"mean_diff", p.mean_diff},
                     {"q", p.q},
                     {"p_value", p.p_value},
                     {"significant", p.significant}});
  }
  return {{"alpha", t.alpha}, {"q_critical", t.q_critical}, {"pairs", std::move(pairs)}};
}

nlohmann::json correlation_to_json(const CorrelationResult& c) {
  return {{"rho", c.rho}, {"p_value", c.p_value}, {"n", c.n}, {"method", c.method}};
}

nlohmann::json delta_age_report_to_json(const DeltaAgeReport& report) {
  nlohmann::json j;
  j["format_version"] = kFormatVersion;
  j["protocol"] = report.protocol;
  j["scale_tag"] = report.scale_tag;
  j["training_groups"] = groups_to_json(report.training_groups);
  j["train_cov_binding"] = report.train_cov_binding;
  j["eval_cov_binding"] = report.eval_cov_binding;
  j["corrector"] = corrector_to_json(report.corrector);
  j["corrector_provenance"] = report.corrector_provenance;
  nlohmann::json records = nlohmann::json::array();
  for (const DeltaAgeRecord& r : report.records) {
    nlohmann::json jr = {{"id", r.id},          {"group", to_string(r.group)},
                         {"age", r.age},        {"phi", r.estimate},
                         {"brain_age", r.brain_age}, {"delta_age", r.delta_age}};
    if (r.cdr) jr["cdr"] = *r.cdr;
    records.push_back(std::move(jr));
  }
  j["records"] = std::move(records);
  nlohmann::json mae = nlohmann::json::object();
  for (const auto& [g, v] : report.group_mae) mae[to_string(g)] = v;
  j["group_mae"] = std::move(mae);
  j["mae_set_label"] = report.mae_set_label;
  j["hc_mean_delta"] = report.hc_mean_delta;
  if (report.stats) {
    j["stats"]["anova"] = anova_to_json(report.stats->anova);
    j["stats"]["tukey"] = tukey_to_json(report.stats->tukey);
    if (report.stats->cdr_correlation) {
      j["stats"]["cdr_correlation"] = correlation_to_json(*report.stats->cdr_correlation);
    }
  }
  j["seed"] = report.seed;
  return j;
}

DeltaAgeReport delta_age_report_from_json(const nlohmann::json& j) {
  DeltaAgeReport report;
  report.protocol = require(j, "protocol").get<std::string>();
  report.scale_tag = require(j, "scale_tag").get<std::string>();
  report.training_groups = groups_from_json(require(j, "training_groups"));
  report.train_cov_binding = require(j, "train_cov_binding").get<std::string>();
  report.eval_cov_binding = require(j, "eval_cov_binding").get<std::string>();
  report.corrector = corrector_from_json(require(j, "corrector"));
  report.corrector_provenance = require(j, "corrector_provenance").get<std::string>();
  for (const auto& jr : require(j, "records")) {
    DeltaAgeRecord r;
    r.id = require(jr, "id").get<std::string>();
    r.group = parse_group(require(jr, "group").get<std::string>());
    r.age = require(jr, "age").get<double>();
    r.estimate = require(jr, "phi").get<double>();
    r.brain_age = require(jr, "brain_age").get<double>();
    r.delta_age = require(jr, "delta_age").get<double>();
    if (jr.contains("cdr")) r.cdr = jr.at("cdr").get<double>();
    report.records.push_back(std::move(r));
  }
  for (const auto& [name, v] : require(j, "group_mae").items()) {
    report.group_mae[parse_group(name)] = v.get<double>();
  }
  report.mae_set_label = require(j, "mae_set_label").get<std::string>();
  report.hc_mean_delta = require(j, "hc_mean_delta").get<double>();
  if (j.contains("seed")) report.seed = j.at("seed").get<std::uint64_t>();
  return report;
}

nlohmann::json transfer_report_to_json(const TransferReport& report) {
  nlohmann::json j;
  j["format_version"] = kFormatVersion;
  j["target_tag"] = report.target_tag;
  j["rebias"] = to_string(report.rebias);
  if (report.epsilon) {
    nlohmann::json pairs = nlohmann::json::array();
    for (const SubjectPairOutput& p : report.epsilon->pairs) {
      pairs.push_back({{"id", p.id}, {"phi_source", p.phi_source}, {"phi_target", p.phi_target}});
    }
    j["epsilon"] = {{"mean", report.epsilon->mean},
                    {"max", report.epsilon->max},
                    {"n", report.epsilon->n},
                    {"pairs", std::move(pairs)}};
  }
  if (report.hc_offset) j["hc_offset"] = *report.hc_offset;
  j["delta_age_report"] = delta_age_report_to_json(report.report);
  return j;
}

void save_model(const VnnModel& model, const std::string& path) {
  save_json(model_to_json(model), path);
}

VnnModel load_model(const std::string& path) { return model_from_json(load_json(path)); }

void save_ensemble(const Ensemble& ens, const std::string& path) {
  save_json(ensemble_to_json(ens), path);
}

Ensemble load_ensemble(const std::string& path) { return ensemble_from_json(load_json(path)); }

}  // namespace vnb
