#include "vnb/cohort.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "text_io.hpp"
#include "vnb/rng.hpp"

namespace vnb {

std::string to_string(Group g) {
  switch (g) {
    case Group::HC: return "HC";
    case Group::MCI: return "MCI";
    case Group::AD: return "AD";
    case Group::OTHER: return "OTHER";
  }
  return "OTHER";
}

Group parse_group(std::string token) {
  for (auto& c : token) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (token == "HC") return Group::HC;
  if (token == "MCI") return Group::MCI;
  if (token == "AD") return Group::AD;
  if (token == "OTHER") return Group::OTHER;
  throw data_error("unknown group label '" + token + "'");
}

void Cohort::validate() const {
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    const Subject& s = subjects[i];
    if (s.features.size() != m) {
      throw data_error("subject '" + s.id + "' has " + std::to_string(s.features.size()) +
                       " features, cohort declares " + std::to_string(m));
    }
    if (!(s.age > 0.0) || !std::isfinite(s.age)) {
      throw data_error("subject '" + s.id + "' has non-positive age");
    }
    if (s.cdr && (!(*s.cdr >= 0.0) || !std::isfinite(*s.cdr))) {
      throw data_error("subject '" + s.id + "' has negative cdr");
    }
    if (!seen.insert(s.id).second) {
      throw data_error("duplicate subject id '" + s.id + "'");
    }
  }
}

void SplitSpec::validate() const {
  auto in_unit = [](double f) { return f > 0.0 && f < 1.0; };
  if (!in_unit(train_frac) || !in_unit(val_frac) || !in_unit(test_frac)) {
    throw config_error("split fractions must each lie in (0,1)");
  }
  if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-12) {
    throw config_error("split fractions must sum to 1");
  }
}

namespace {

constexpr const char* kBaseHeader[4] = {"id", "age", "group", "cdr"};

std::string row_msg(std::size_t row, const std::string& what) {
  return "row " + std::to_string(row) + ": " + what;
}

}  // namespace

Cohort load_cohort(const std::string& path, const std::string& scale_tag) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open cohort file '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw data_error("empty cohort file '" + path + "'");
  auto header = detail::split_csv_line(line);

  // header: id,age,group[,cdr],f1..fm ; cdr column optional
  if (header.size() < 4 || header[0] != "id" || header[1] != "age" || header[2] != "group") {
    throw data_error("malformed header in '" + path + "': expected id,age,group[,cdr],f1,...");
  }
  const bool has_cdr = header[3] == "cdr";
  const std::size_t feat_start = has_cdr ? 4 : 3;
  if (header.size() <= feat_start) {
    throw data_error("malformed header in '" + path + "': no feature columns");
  }
  for (std::size_t j = feat_start; j < header.size(); ++j) {
    const std::string expect = "f" + std::to_string(j - feat_start + 1);
    if (header[j] != expect) {
      throw data_error("malformed header in '" + path + "': expected column '" + expect +
                       "', found '" + std::string(header[j]) + "'");
    }
  }

  Cohort cohort;
  cohort.m = header.size() - feat_start;
  cohort.scale_tag = scale_tag;

  std::unordered_set<std::string> ids;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      throw data_error(row_msg(row, "expected " + std::to_string(header.size()) +
                                        " columns, found " + std::to_string(cells.size())));
    }
    Subject s;
    s.id = std::string(cells[0]);
    if (s.id.empty()) throw data_error(row_msg(row, "empty id"));
    if (!ids.insert(s.id).second) throw data_error(row_msg(row, "duplicate id '" + s.id + "'"));

    auto age = detail::parse_double(cells[1]);
    if (!age || !(*age > 0.0)) throw data_error(row_msg(row, "invalid age '" + std::string(cells[1]) + "'"));
    s.age = *age;
    s.group = parse_group(std::string(cells[2]));
    if (has_cdr && !cells[3].empty()) {
      auto cdr = detail::parse_double(cells[3]);
      if (!cdr || *cdr < 0.0) throw data_error(row_msg(row, "invalid cdr '" + std::string(cells[3]) + "'"));
      s.cdr = *cdr;
    }
    s.features.reserve(cohort.m);
    for (std::size_t j = feat_start; j < cells.size(); ++j) {
      auto v = detail::parse_double(cells[j]);
      if (!v) {
        throw data_error(row_msg(row, "non-numeric feature in column '" +
                                          std::string(header[j]) + "'"));
      }
      s.features.push_back(*v);
    }
    cohort.subjects.push_back(std::move(s));
  }
  cohort.validate();
  return cohort;
}

void save_cohort_csv(const Cohort& cohort, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write cohort file '" + path + "'");
  out << "id,age,group,cdr";
  for (std::size_t j = 1; j <= cohort.m; ++j) out << ",f" << j;
  out << "\n";
  for (const Subject& s : cohort.subjects) {
    out << s.id << ',' << detail::format_double(s.age) << ',' << to_string(s.group) << ',';
    if (s.cdr) out << detail::format_double(*s.cdr);  // absent cdr -> empty cell
    for (double f : s.features) out << ',' << detail::format_double(f);
    out << "\n";
  }
  if (!out) throw data_error("write failed for '" + path + "'");
}

std::array<std::size_t, 3> apportion_counts(std::size_t n, const SplitSpec& spec) {
  const double fracs[3] = {spec.train_frac, spec.val_frac, spec.test_frac};
  std::array<std::size_t, 3> counts{};
  double remainders[3];
  std::size_t assigned = 0;
  for (int p = 0; p < 3; ++p) {
    const double quota = fracs[p] * static_cast<double>(n);
    counts[p] = static_cast<std::size_t>(std::floor(quota));
    remainders[p] = quota - std::floor(quota);
    assigned += counts[p];
  }
  // Largest remainder; ties resolved in part order train > val > test.
  while (assigned < n) {
    int best = 0;
    for (int p = 1; p < 3; ++p) {
      if (remainders[p] > remainders[best]) best = p;
    }
    counts[best] += 1;
    remainders[best] = -1.0;
    ++assigned;
  }
  return counts;
}

namespace {

// Assigns shuffled indices to parts by count, then restores cohort order
// within each part.
void assign_indices(const std::vector<std::size_t>& shuffled,
                    const std::array<std::size_t, 3>& counts,
                    std::array<std::vector<std::size_t>, 3>& parts) {
  std::size_t pos = 0;
  for (int p = 0; p < 3; ++p) {
    for (std::size_t k = 0; k < counts[p]; ++k) parts[p].push_back(shuffled[pos++]);
  }
}

}  // namespace

Split split(const Cohort& cohort, const SplitSpec& spec) {
  spec.validate();
  const std::size_t n = cohort.n();
  std::array<std::vector<std::size_t>, 3> parts;

  if (!spec.stratify_by_group) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(derive_seed(spec.seed, "cohort-split"));
    rng.shuffle(idx);
    assign_indices(idx, apportion_counts(n, spec), parts);
  } else {
    // Group membership keyed in a fixed order so the partition is
    // independent of subject ordering quirks.
    std::map<Group, std::vector<std::size_t>> by_group;
    for (std::size_t i = 0; i < n; ++i) by_group[cohort.subjects[i].group].push_back(i);
    std::size_t gi = 0;
    for (auto& [g, idx] : by_group) {
      Rng rng(derive_seed(spec.seed, "cohort-split-stratum", gi++));
      rng.shuffle(idx);
      assign_indices(idx, apportion_counts(idx.size(), spec), parts);
    }
  }

  Split out;
  Cohort* dests[3] = {&out.train, &out.val, &out.test};
  const char* names[3] = {"train", "val", "test"};
  for (int p = 0; p < 3; ++p) {
    if (parts[p].empty()) {
      throw data_error(std::string("split produced an empty ") + names[p] + " part (n=" +
                       std::to_string(n) + ")");
    }
    std::sort(parts[p].begin(), parts[p].end());
    dests[p]->m = cohort.m;
    dests[p]->scale_tag = cohort.scale_tag;
    dests[p]->subjects.reserve(parts[p].size());
    for (std::size_t i : parts[p]) dests[p]->subjects.push_back(cohort.subjects[i]);
  }
  return out;
}

Cohort filter_group(const Cohort& cohort, const std::set<Group>& groups) {
  Cohort out;
  out.m = cohort.m;
  out.scale_tag = cohort.scale_tag;
  for (const Subject& s : cohort.subjects) {
    if (groups.count(s.group)) out.subjects.push_back(s);
  }
  return out;
}

Cohort standardize_features(const Cohort& cohort) {
  if (cohort.n() < 2) throw data_error("standardize_features needs at least 2 subjects");
  const std::size_t n = cohort.n();
  std::vector<double> mean(cohort.m, 0.0), sd(cohort.m, 0.0);
  for (const Subject& s : cohort.subjects) {
    for (std::size_t j = 0; j < cohort.m; ++j) mean[j] += s.features[j];
  }
  for (double& v : mean) v /= static_cast<double>(n);
  for (const Subject& s : cohort.subjects) {
    for (std::size_t j = 0; j < cohort.m; ++j) {
      const double d = s.features[j] - mean[j];
      sd[j] += d * d;
    }
  }
  for (double& v : sd) v = std::sqrt(v / static_cast<double>(n));

  Cohort out = cohort;
  for (Subject& s : out.subjects) {
    for (std::size_t j = 0; j < cohort.m; ++j) {
      const double d = s.features[j] - mean[j];
      s.features[j] = sd[j] > 0.0 ? d / sd[j] : d;
    }
  }
  return out;
}

}  // namespace vnb
