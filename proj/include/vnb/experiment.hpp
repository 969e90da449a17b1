#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vnb/brainage.hpp"
#include "vnb/synth.hpp"
#include "vnb/transfer.hpp"

namespace vnb {

inline constexpr const char* kLibraryVersion = "0.1.0";

struct SynthSection {
  bool present = false;
  std::size_t n = 0;
  GraphonSpec graphon;
  ScaleSpec scales;
  PathologySpec pathology;
  std::vector<SiteSpec> sites;
};

// One JSON file drives every command; every random stream is derived from
// master_seed. Relative cohort paths resolve under out_dir (the gen command
// writes them there).
struct ExperimentConfig {
  std::uint64_t master_seed = 1;
  std::filesystem::path out_dir = "out";
  int threads = 1;
  bool standardize_features = false;
  SynthSection synth;
  std::string train_cohort;                  // file name or path
  std::vector<std::string> target_cohorts;   // transfer targets
  VnnConfig vnn;
  TrainConfig train;
  Protocol protocol = Protocol::hc_only;
  CovBinding eval_binding = CovBinding::whole_cohort;
  TransferConfig transfer;
  std::filesystem::path config_dir;  // directory of the config file
};

ExperimentConfig load_experiment_config(const std::string& path);

struct Overrides {
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};
void apply_overrides(ExperimentConfig& cfg, const Overrides& ov);

// Commands. Each writes its outputs plus a manifest (config hash, seed,
// version, inputs, outputs) under cfg.out_dir and is idempotent for
// identical inputs.
void run_gen(const ExperimentConfig& cfg);
void run_train(const ExperimentConfig& cfg);
void run_brainage(const ExperimentConfig& cfg);
void run_transfer(const ExperimentConfig& cfg);

// Standalone statistics over a delta-age report file; out_dir defaults to
// the report's directory.
void run_stats(const std::string& report_path, const std::string& out_dir = "");

// Canonical output locations under out_dir.
std::filesystem::path cohort_file(const ExperimentConfig& cfg, const std::string& name);
inline const char* kEnsembleFile = "ensemble.json";
inline const char* kTrainReportFile = "train_report.json";
inline const char* kDeltaAgeReportFile = "delta_age_report.json";

}  // namespace vnb
