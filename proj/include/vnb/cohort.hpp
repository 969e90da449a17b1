#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vnb/errors.hpp"

namespace vnb {

enum class Group { HC, MCI, AD, OTHER };

std::string to_string(Group g);
Group parse_group(std::string token);  // case-insensitive

struct Subject {
  std::string id;
  double age = 0.0;            // years, > 0
  Group group = Group::OTHER;
  std::vector<double> features;  // length m
  std::optional<double> cdr;     // CDR sum-of-boxes, >= 0 when present
};

// Immutable after construction; shared read-only across workers.
struct Cohort {
  std::size_t m = 0;       // feature dimension
  std::string scale_tag;   // names the resolution/atlas
  std::vector<Subject> subjects;

  std::size_t n() const { return subjects.size(); }

  // Throws data_error on any broken invariant (dimension, age, cdr, id dup).
  void validate() const;
};

struct SplitSpec {
  double train_frac = 0.8;
  double val_frac = 0.1;
  double test_frac = 0.1;
  std::uint64_t seed = 0;
  bool stratify_by_group = false;

  void validate() const;  // fractions in (0,1), summing to 1 within 1e-12
};

struct Split {
  Cohort train;
  Cohort val;
  Cohort test;
};

// CSV schema: header `id,age,group,cdr,f1,...,fm`, `cdr` column optional.
Cohort load_cohort(const std::string& path, const std::string& scale_tag);
void save_cohort_csv(const Cohort& cohort, const std::string& path);

// Largest-remainder apportionment of n into (train, val, test), ties toward
// train. Exposed for tests.
std::array<std::size_t, 3> apportion_counts(std::size_t n, const SplitSpec& spec);

// Deterministic partition; per-group counts match the fractions within +-1
// subject when stratify_by_group is set. Throws data_error on an empty part.
Split split(const Cohort& cohort, const SplitSpec& spec);

// Subjects whose group is in `groups`, order preserved.
Cohort filter_group(const Cohort& cohort, const std::set<Group>& groups);

// Per-feature z-scoring using the cohort's own mean/sd (sd-0 features are
// left centered). Optional preprocessing switch, off by default upstream.
Cohort standardize_features(const Cohort& cohort);

}  // namespace vnb
