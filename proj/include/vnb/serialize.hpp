#pragma once

#include <string>

#include "json.hpp"
#include "vnb/brainage.hpp"
#include "vnb/cohort.hpp"
#include "vnb/training.hpp"
#include "vnb/transfer.hpp"

namespace vnb {

// JSON codecs for everything that crosses a file boundary. Doubles survive
// round trips exactly (shortest round-trip decimal).

nlohmann::json cohort_to_json(const Cohort& cohort);
Cohort cohort_from_json(const nlohmann::json& j);

nlohmann::json vnn_config_to_json(const VnnConfig& cfg);
VnnConfig vnn_config_from_json(const nlohmann::json& j);

nlohmann::json model_to_json(const VnnModel& model);
VnnModel model_from_json(const nlohmann::json& j);

nlohmann::json train_report_to_json(const TrainReport& report);

nlohmann::json ensemble_to_json(const Ensemble& ens);
Ensemble ensemble_from_json(const nlohmann::json& j);

nlohmann::json corrector_to_json(const BiasCorrector& bc);
BiasCorrector corrector_from_json(const nlohmann::json& j);

nlohmann::json anova_to_json(const AnovaResult& a);
nlohmann::json tukey_to_json(const TukeyResult& t);
nlohmann::json correlation_to_json(const CorrelationResult& c);

nlohmann::json delta_age_report_to_json(const DeltaAgeReport& report);
DeltaAgeReport delta_age_report_from_json(const nlohmann::json& j);

nlohmann::json transfer_report_to_json(const TransferReport& report);

void save_json(const nlohmann::json& j, const std::string& path);
nlohmann::json load_json(const std::string& path);

void save_model(const VnnModel& model, const std::string& path);
VnnModel load_model(const std::string& path);
void save_ensemble(const Ensemble& ens, const std::string& path);
Ensemble load_ensemble(const std::string& path);

}  // namespace vnb
