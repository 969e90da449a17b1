#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "vnb/cohort.hpp"

namespace vnb {

// Smooth latent covariance on a fine grid over [0,1]; every scale's features
// are block means of the same latent field, so coarse and fine cohorts share
// a common limit object.
struct GraphonSpec {
  std::size_t latent_dim = 1000;  // fine grid size
  double length_scale = 0.08;     // squared-exponential kernel
  double variance = 0.01;
  double nugget = 1e-8;           // factorization jitter, also models measurement noise
  std::uint64_t seed = 0;

  void validate() const;
};

struct ScaleSpec {
  std::vector<std::size_t> scales;  // contiguous block partitions of the fine grid

  void validate(std::size_t latent_dim) const;
};

// Ground-truth pathology: thinning equivalent to `shift_years` extra years
// of aging, confined to the latent interval [region_lo, region_hi). Shifts
// are scaled per subject by a severity factor so dementia scores carry a
// within-group signal.
struct PathologySpec {
  double age_slope = 0.015;  // mm per year, global thinning
  double mci_shift_years = 4.0;
  double ad_shift_years = 8.0;
  double hc_fraction = 0.6;
  double mci_fraction = 0.2;
  double ad_fraction = 0.2;
  double region_lo = 0.2;
  double region_hi = 0.45;

  void validate() const;
};

struct SiteSpec {
  std::string tag = "siteB";
  std::size_t dim = 96;      // may differ from every source scale
  double gain_std = 0.05;    // smooth multiplicative jitter, mean 1
  double offset_std = 0.05;  // smooth additive jitter
  std::uint64_t seed = 0;
};

struct SubjectTruth {
  std::string id;
  double age = 0.0;
  Group group = Group::HC;
  double severity = 0.0;     // per-subject multiplier on the group shift
  double shift_years = 0.0;  // group shift * severity
};

struct MultiscaleBundle {
  std::vector<Cohort> cohorts;   // one per scale, subjects paired by id
  Eigen::MatrixXd fine_fields;   // latent_dim x n
  std::vector<SubjectTruth> truth;
  GraphonSpec gspec;
  ScaleSpec sspec;
  PathologySpec pspec;
};

// Contiguous block sizes partitioning `latent_dim` into `m` blocks
// (largest-remainder when m does not divide evenly).
std::vector<std::size_t> block_sizes(std::size_t latent_dim, std::size_t m);

// Size-weighted block means from one partition down to a coarser one; exact
// re-aggregation when the partitions nest.
Eigen::MatrixXd aggregate_to_scale(const Eigen::MatrixXd& fine, std::size_t m);

// Smooth per-feature jitter used by site variants: mean-`center` random
// low-frequency function with standard deviation `sd` at each point.
std::vector<double> smooth_jitter(std::size_t dim, double center, double sd, std::uint64_t seed);

// Draws n subjects (ages uniform on [55,85], groups by exact quota) and
// emits one cohort per scale. Deterministic in (specs, seed).
MultiscaleBundle generate_multiscale(const GraphonSpec& gspec, const ScaleSpec& sspec,
                                     std::size_t n, const PathologySpec& pspec);

// Same subjects re-expressed at a second site: block means at `spec.dim`
// with per-feature gain/offset jitter applied.
Cohort generate_site_variant(const MultiscaleBundle& bundle, const SiteSpec& spec);

// Per-scale weight of the pathology region in each feature (fraction of the
// block covered by the latent shift profile); oracle material for tests.
std::vector<double> region_weights(const MultiscaleBundle& bundle, std::size_t m);

void save_ground_truth(const MultiscaleBundle& bundle, const std::string& path);

}  // namespace vnb
