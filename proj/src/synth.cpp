#include "vnb/synth.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "text_io.hpp"
#include "vnb/rng.hpp"

namespace vnb {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kAgeLo = 55.0;
constexpr double kAgeHi = 85.0;
constexpr double kAgeCenter = 70.0;

double base_profile(double u) { return 2.5 + 0.3 * std::sin(kTwoPi * u); }
double aging_profile(double u) { return 1.0 + 0.5 * std::cos(kTwoPi * u); }

// Raised-cosine bump over [lo, hi), zero outside.
double region_profile(double u, double lo, double hi) {
  if (u < lo || u >= hi) return 0.0;
  const double t = (u - lo) / (hi - lo);
  const double s = std::sin(3.1415926535897932384626433832795 * t);
  return s * s;
}

}  // namespace

void GraphonSpec::validate() const {
  if (latent_dim < 2) throw config_error("synth: latent_dim must be >= 2");
  if (!(length_scale > 0.0)) throw config_error("synth: length_scale must be positive");
  if (variance < 0.0) throw config_error("synth: kernel variance must be nonnegative");
  if (nugget < 0.0) throw config_error("synth: nugget must be nonnegative");
}

void ScaleSpec::validate(std::size_t latent_dim) const {
  if (scales.empty()) throw config_error("synth: need at least one scale");
  for (std::size_t m : scales) {
    if (m == 0 || m > latent_dim) {
      throw config_error("synth: scale " + std::to_string(m) + " must lie in [1, latent_dim]");
    }
  }
}

void PathologySpec::validate() const {
  const double sum = hc_fraction + mci_fraction + ad_fraction;
  if (hc_fraction < 0.0 || mci_fraction < 0.0 || ad_fraction < 0.0 ||
      std::abs(sum - 1.0) > 1e-9) {
    throw config_error("synth: group proportions must be nonnegative and sum to 1");
  }
  if (mci_shift_years < 0.0 || ad_shift_years < mci_shift_years) {
    throw config_error("synth: shifts must satisfy 0 <= MCI <= AD");
  }
  if (!(region_lo >= 0.0) || !(region_hi <= 1.0) || !(region_lo < region_hi)) {
    throw config_error("synth: pathology region must be a subinterval of [0,1]");
  }
  if (!(age_slope >= 0.0)) throw config_error("synth: age_slope must be nonnegative");
}

std::vector<std::size_t> block_sizes(std::size_t latent_dim, std::size_t m) {
  std::vector<std::size_t> sizes(m, latent_dim / m);
  const std::size_t extra = latent_dim % m;
  for (std::size_t b = 0; b < extra; ++b) sizes[b] += 1;  // equal remainders: lowest index first
  return sizes;
}

Eigen::MatrixXd aggregate_to_scale(const Eigen::MatrixXd& fine, std::size_t m) {
  const std::size_t rows = static_cast<std::size_t>(fine.rows());
  const auto sizes = block_sizes(rows, m);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(m), fine.cols());
  std::size_t start = 0;
  for (std::size_t b = 0; b < m; ++b) {
    out.row(static_cast<Eigen::Index>(b)) =
        fine.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(sizes[b]))
            .colwise()
            .mean();
    start += sizes[b];
  }
  return out;
}

std::vector<double> smooth_jitter(std::size_t dim, double center, double sd, std::uint64_t seed) {
  Rng rng(seed);
  constexpr int kHarmonics = 3;
  double a[kHarmonics], b[kHarmonics];
  for (int h = 0; h < kHarmonics; ++h) {
    a[h] = rng.normal();
    b[h] = rng.normal();
  }
  const double scale = sd / std::sqrt(static_cast<double>(kHarmonics));
  std::vector<double> out(dim);
  for (std::size_t j = 0; j < dim; ++j) {
    const double u = (static_cast<double>(j) + 0.5) / static_cast<double>(dim);
    double v = 0.0;
    for (int h = 0; h < kHarmonics; ++h) {
      v += a[h] * std::cos(kTwoPi * (h + 1) * u) + b[h] * std::sin(kTwoPi * (h + 1) * u);
    }
    out[j] = center + scale * v;
  }
  return out;
}

namespace {

std::vector<Group> assign_groups(std::size_t n, const PathologySpec& pspec, std::uint64_t seed) {
  // Exact quota per group (largest remainder, HC first on ties), then a
  // seeded shuffle so group labels are not index-correlated.
  const double fracs[3] = {pspec.hc_fraction, pspec.mci_fraction, pspec.ad_fraction};
  const Group groups[3] = {Group::HC, Group::MCI, Group::AD};
  std::size_t counts[3];
  double rem[3];
  std::size_t assigned = 0;
  for (int g = 0; g < 3; ++g) {
    const double quota = fracs[g] * static_cast<double>(n);
    counts[g] = static_cast<std::size_t>(std::floor(quota));
    rem[g] = quota - std::floor(quota);
    assigned += counts[g];
  }
  while (assigned < n) {
    int best = 0;
    for (int g = 1; g < 3; ++g) {
      if (rem[g] > rem[best]) best = g;
    }
    counts[best] += 1;
    rem[best] = -1.0;
    ++assigned;
  }
  std::vector<Group> out;
  out.reserve(n);
  for (int g = 0; g < 3; ++g) out.insert(out.end(), counts[g], groups[g]);
  Rng rng(derive_seed(seed, "group-assign"));
  rng.shuffle(out);
  return out;
}

}  // namespace

MultiscaleBundle generate_multiscale(const GraphonSpec& gspec, const ScaleSpec& sspec,
                                     std::size_t n, const PathologySpec& pspec) {
  gspec.validate();
  sspec.validate(gspec.latent_dim);
  pspec.validate();
  if (n < 10) throw config_error("synth: need n >= 10 subjects");

  const std::size_t D = gspec.latent_dim;
  const Eigen::Index Di = static_cast<Eigen::Index>(D);

  // Cholesky factor of the latent kernel; skipped entirely when noiseless.
  Eigen::MatrixXd chol;
  const bool noisy = gspec.variance > 0.0;
  if (noisy) {
    Eigen::MatrixXd W(Di, Di);
    const double inv2l2 = 1.0 / (2.0 * gspec.length_scale * gspec.length_scale);
    for (Eigen::Index i = 0; i < Di; ++i) {
      const double ui = (static_cast<double>(i) + 0.5) / static_cast<double>(D);
      for (Eigen::Index j = 0; j <= i; ++j) {
        const double uj = (static_cast<double>(j) + 0.5) / static_cast<double>(D);
        const double d = ui - uj;
        const double w = gspec.variance * std::exp(-d * d * inv2l2);
        W(i, j) = w;
        W(j, i) = w;
      }
    }
    W.diagonal().array() += std::max(gspec.nugget, 1e-12 * gspec.variance);
    Eigen::LLT<Eigen::MatrixXd> llt(W);
    if (llt.info() != Eigen::Success) {
      throw numeric_error("synth: latent kernel is not positive definite on the grid; "
                          "increase the nugget");
    }
    chol = llt.matrixL();
  }

  MultiscaleBundle bundle;
  bundle.gspec = gspec;
  bundle.sspec = sspec;
  bundle.pspec = pspec;
  bundle.fine_fields.resize(Di, static_cast<Eigen::Index>(n));

  const auto groups = assign_groups(n, pspec, gspec.seed);
  bundle.truth.reserve(n);

  Eigen::VectorXd grid_base(Di), grid_aging(Di), grid_region(Di);
  for (Eigen::Index i = 0; i < Di; ++i) {
    const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(D);
    grid_base[i] = base_profile(u);
    grid_aging[i] = aging_profile(u);
    grid_region[i] = region_profile(u, pspec.region_lo, pspec.region_hi);
  }

  for (std::size_t s = 0; s < n; ++s) {
    Rng rng(derive_seed(gspec.seed, "subject", s));
    SubjectTruth truth;
    truth.id = "s" + std::to_string(s + 1);
    truth.age = rng.uniform(kAgeLo, kAgeHi);
    truth.group = groups[s];
    if (truth.group == Group::HC) {
      truth.severity = 0.0;
      truth.shift_years = 0.0;
    } else {
      truth.severity = rng.uniform(0.5, 1.5);
      const double base_shift =
          truth.group == Group::MCI ? pspec.mci_shift_years : pspec.ad_shift_years;
      truth.shift_years = base_shift * truth.severity;
    }

    Eigen::VectorXd field = grid_base - pspec.age_slope * (truth.age - kAgeCenter) * grid_aging -
                            pspec.age_slope * truth.shift_years * grid_region;
    if (noisy) {
      Eigen::VectorXd z(Di);
      for (Eigen::Index i = 0; i < Di; ++i) z[i] = rng.normal();
      field += chol.triangularView<Eigen::Lower>() * z;
    }
    bundle.fine_fields.col(static_cast<Eigen::Index>(s)) = field;
    bundle.truth.push_back(std::move(truth));
  }

  for (std::size_t m : sspec.scales) {
    const Eigen::MatrixXd feats = aggregate_to_scale(bundle.fine_fields, m);
    Cohort cohort;
    cohort.m = m;
    cohort.scale_tag = "m" + std::to_string(m);
    cohort.subjects.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
      const SubjectTruth& truth = bundle.truth[s];
      Subject subj;
      subj.id = truth.id;
      subj.age = truth.age;
      subj.group = truth.group;
      if (truth.group != Group::HC) {
        // Dementia severity score tied to the true pathology magnitude.
        Rng cdr_rng(derive_seed(gspec.seed, "subject-cdr", s));
        subj.cdr = std::max(0.0, 1.5 + 0.35 * truth.shift_years + cdr_rng.normal(0.0, 0.5));
      }
      subj.features.resize(m);
      for (std::size_t j = 0; j < m; ++j) {
        subj.features[j] = feats(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(s));
      }
      cohort.subjects.push_back(std::move(subj));
    }
    bundle.cohorts.push_back(std::move(cohort));
  }
  return bundle;
}

Cohort generate_site_variant(const MultiscaleBundle& bundle, const SiteSpec& spec) {
  if (spec.dim == 0 || spec.dim > bundle.gspec.latent_dim) {
    throw config_error("site variant dimension must lie in [1, latent_dim]");
  }
  const Eigen::MatrixXd feats = aggregate_to_scale(bundle.fine_fields, spec.dim);
  const auto gains = smooth_jitter(spec.dim, 1.0, spec.gain_std,
                                   derive_seed(spec.seed, "site-gain"));
  const auto offsets = smooth_jitter(spec.dim, 0.0, spec.offset_std,
                                     derive_seed(spec.seed, "site-offset"));

  Cohort cohort;
  cohort.m = spec.dim;
  cohort.scale_tag = spec.tag + "_m" + std::to_string(spec.dim);
  cohort.subjects.reserve(bundle.truth.size());
  for (std::size_t s = 0; s < bundle.truth.size(); ++s) {
    const Cohort& ref = bundle.cohorts.front();
    Subject subj = ref.subjects[s];
    subj.features.resize(spec.dim);
    for (std::size_t j = 0; j < spec.dim; ++j) {
      subj.features[j] =
          gains[j] * feats(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(s)) +
          offsets[j];
    }
    cohort.subjects.push_back(std::move(subj));
  }
  return cohort;
}

std::vector<double> region_weights(const MultiscaleBundle& bundle, std::size_t m) {
  const std::size_t D = bundle.gspec.latent_dim;
  const auto sizes = block_sizes(D, m);
  std::vector<double> weights(m, 0.0);
  std::size_t start = 0;
  for (std::size_t b = 0; b < m; ++b) {
    double acc = 0.0;
    for (std::size_t i = start; i < start + sizes[b]; ++i) {
      const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(D);
      acc += region_profile(u, bundle.pspec.region_lo, bundle.pspec.region_hi);
    }
    weights[b] = acc / static_cast<double>(sizes[b]);
    start += sizes[b];
  }
  return weights;
}

void save_ground_truth(const MultiscaleBundle& bundle, const std::string& path) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["graphon"] = {{"latent_dim", bundle.gspec.latent_dim},
                  {"length_scale", bundle.gspec.length_scale},
                  {"variance", bundle.gspec.variance},
                  {"nugget", bundle.gspec.nugget},
                  {"seed", bundle.gspec.seed}};
  j["scales"] = bundle.sspec.scales;
  j["pathology"] = {{"age_slope", bundle.pspec.age_slope},
                    {"mci_shift_years", bundle.pspec.mci_shift_years},
                    {"ad_shift_years", bundle.pspec.ad_shift_years},
                    {"hc_fraction", bundle.pspec.hc_fraction},
                    {"mci_fraction", bundle.pspec.mci_fraction},
                    {"ad_fraction", bundle.pspec.ad_fraction},
                    {"region", {bundle.pspec.region_lo, bundle.pspec.region_hi}}};
  for (std::size_t m : bundle.sspec.scales) {
    j["region_weights"]["m" + std::to_string(m)] = region_weights(bundle, m);
  }
  nlohmann::json subjects = nlohmann::json::array();
  for (const SubjectTruth& t : bundle.truth) {
    subjects.push_back({{"id", t.id},
                        {"age", t.age},
                        {"group", to_string(t.group)},
                        {"severity", t.severity},
                        {"shift_years", t.shift_years}});
  }
  j["subjects"] = std::move(subjects);

  std::ofstream out(path);
  if (!out) throw data_error("cannot write ground truth file '" + path + "'");
  out << j.dump(2) << "\n";
}

}  // namespace vnb
