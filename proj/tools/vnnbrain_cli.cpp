// Command-line front end for the brain-age toolkit, driving the shared
// library through its C interface only.

#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>

#include "CLI11.hpp"
#include "vnnbrain.h"

namespace {

struct CommonOpts {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
};

int fail(vnb_status status) {
  std::fprintf(stderr, "error: %s\n", vnb_last_error());
  return static_cast<int>(status);
}

int run_experiment_command(const char* command, const CommonOpts& opts) {
  vnb_experiment* exp = nullptr;
  vnb_status status = vnb_experiment_open(opts.config.c_str(), &exp);
  if (status != VNB_OK) return fail(status);
  std::unique_ptr<vnb_experiment, decltype(&vnb_experiment_free)> guard(exp, vnb_experiment_free);

  if (!opts.out.empty()) {
    status = vnb_experiment_set_out_dir(exp, opts.out.c_str());
    if (status != VNB_OK) return fail(status);
  }
  if (opts.seed_set) {
    status = vnb_experiment_set_seed(exp, opts.seed);
    if (status != VNB_OK) return fail(status);
  }
  if (opts.threads > 0) {
    status = vnb_experiment_set_threads(exp, opts.threads);
    if (status != VNB_OK) return fail(status);
  }
  status = vnb_experiment_run(exp, command);
  if (status != VNB_OK) return fail(status);
  std::printf("%s: done\n", command);
  return 0;
}

void add_common(CLI::App* cmd, CommonOpts& opts, bool config_required = true) {
  auto* c = cmd->add_option("--config", opts.config, "experiment config JSON");
  if (config_required) c->required();
  cmd->add_option("--out", opts.out, "override the output directory");
  cmd->add_option("--seed", opts.seed, "override the master seed")
      ->each([&opts](const std::string&) { opts.seed_set = true; });
  cmd->add_option("--threads", opts.threads, "worker threads for ensemble training");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"covariance neural network brain-age toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(vnb_version()));

  CommonOpts opts;
  std::string report_path;
  std::string stats_out;

  auto* gen = app.add_subcommand("gen", "generate synthetic multi-scale cohorts");
  add_common(gen, opts);
  auto* train = app.add_subcommand("train", "train the model ensemble");
  add_common(train, opts);
  auto* brainage = app.add_subcommand("brainage", "evaluate bias-corrected brain age");
  add_common(brainage, opts);
  auto* transfer = app.add_subcommand("transfer", "re-bind the ensemble to target cohorts");
  add_common(transfer, opts);

  auto* stats = app.add_subcommand("stats", "group statistics over a delta-age report");
  stats->add_option("--report", report_path, "delta-age report JSON")->required();
  stats->add_option("--out", stats_out, "output directory (default: next to the report)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;  // usage problems exit 1, --help exits 0
  }

  if (gen->parsed()) return run_experiment_command("gen", opts);
  if (train->parsed()) return run_experiment_command("train", opts);
  if (brainage->parsed()) return run_experiment_command("brainage", opts);
  if (transfer->parsed()) return run_experiment_command("transfer", opts);
  if (stats->parsed()) {
    const vnb_status status = vnb_stats_report(report_path.c_str(), stats_out.c_str());
    if (status != VNB_OK) return fail(status);
    std::printf("stats: done\n");
    return 0;
  }
  return 1;
}
