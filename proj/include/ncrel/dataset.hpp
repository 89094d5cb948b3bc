#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "ncrel/error.hpp"
#include "ncrel/util.hpp"

namespace ncrel {

// A noun compound "modifier head" (w1 w2) with its relation label.
struct NCInstance {
  std::string modifier;
  std::string head;
  std::string label;

  std::string token() const { return modifier + "_" + head; }
  bool operator==(const NCInstance&) const = default;
};

class RelationInventory {
 public:
  RelationInventory() = default;

  // Names are sorted and deduplicated; indices follow the sorted order.
  explicit RelationInventory(std::vector<std::string> names) : names_(std::move(names)) {
    std::sort(names_.begin(), names_.end());
    names_.erase(std::unique(names_.begin(), names_.end()), names_.end());
    for (std::size_t i = 0; i < names_.size(); ++i) index_[names_[i]] = i;
  }

  std::size_t k() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw DataError("relation '" + name + "' is not in the inventory");
    return it->second;
  }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class LabelLevel { kFine, kCoarse };

struct Dataset {
  std::vector<NCInstance> instances;
  RelationInventory inventory;
  LabelLevel level = LabelLevel::kFine;
};

// Parses `w1<TAB>w2<TAB>label` lines. Tokens are lowercased; blank lines are
// ignored. The inventory is the sorted set of distinct labels.
inline Dataset read_dataset(std::istream& in, LabelLevel level = LabelLevel::kFine,
                            const std::string& source = "<stream>") {
  Dataset ds;
  ds.level = level;
  std::vector<std::string> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto view = trim_eol(line);
    if (view.empty()) continue;
    const auto fields = split(view, '\t');
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty() || fields[2].empty()) {
      throw DataError(source + ":" + std::to_string(lineno) +
                      ": expected 3 non-empty tab-separated fields (w1, w2, label)");
    }
    ds.instances.push_back({to_lower(fields[0]), to_lower(fields[1]), std::string(fields[2])});
    labels.emplace_back(fields[2]);
  }
  if (ds.instances.empty()) throw DataError(source + ": dataset is empty");
  ds.inventory = RelationInventory(std::move(labels));
  return ds;
}

inline Dataset load_dataset(const std::filesystem::path& path, LabelLevel level = LabelLevel::kFine) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file " + path.string());
  return read_dataset(in, level, path.string());
}

inline void write_instances(std::ostream& out, const std::vector<NCInstance>& instances) {
  for (const auto& nc : instances) out << nc.modifier << '\t' << nc.head << '\t' << nc.label << '\n';
}

enum class SplitKind { kRandom, kLexicalFull, kLexicalHead, kLexicalMod };

inline std::string to_string(SplitKind kind) {
  switch (kind) {
    case SplitKind::kRandom: return "random";
    case SplitKind::kLexicalFull: return "lexical_full";
    case SplitKind::kLexicalHead: return "lexical_head";
    case SplitKind::kLexicalMod: return "lexical_mod";
  }
  return "?";
}

inline SplitKind parse_split_kind(const std::string& s) {
  if (s == "random") return SplitKind::kRandom;
  if (s == "lexical_full") return SplitKind::kLexicalFull;
  if (s == "lexical_head") return SplitKind::kLexicalHead;
  if (s == "lexical_mod") return SplitKind::kLexicalMod;
  throw UsageError("unknown split kind '" + s + "'");
}

enum class Slot { kHead, kMod };

// Train / validation / test proportions.
using SplitRatios = std::array<double, 3>;
inline constexpr SplitRatios kDefaultTypeRatios{0.60, 0.25, 0.15};

// Index-level partition of a dataset. Each list is sorted ascending.
struct Split {
  SplitKind kind = SplitKind::kRandom;
  std::uint64_t seed = 0;
  SplitRatios ratios{0.75, 0.05, 0.20};
  std::vector<std::size_t> train, validation, test, discarded;

  bool operator==(const Split&) const = default;
};

namespace detail {

inline void validate_ratios(const SplitRatios& r) {
  double sum = 0;
  for (double x : r) {
    if (!(x > 0)) throw UsageError("split ratios must all be positive");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw UsageError("split ratios must sum to 1");
}

// Apportions `n` items to three sets by rounding, guaranteeing every set at
// least one item (n >= 3). Remainder goes to the test set.
inline std::array<std::size_t, 3> apportion(std::size_t n, const SplitRatios& r) {
  std::array<std::size_t, 3> c{};
  c[0] = static_cast<std::size_t>(std::floor(r[0] * static_cast<double>(n) + 0.5));
  c[1] = static_cast<std::size_t>(std::floor(r[1] * static_cast<double>(n) + 0.5));
  c[0] = std::clamp<std::size_t>(c[0], 1, n - 2);
  c[1] = std::clamp<std::size_t>(c[1], 1, n - 1 - c[0]);
  c[2] = n - c[0] - c[1];
  return c;
}

inline void sort_sets(Split& s) {
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.validation.begin(), s.validation.end());
  std::sort(s.test.begin(), s.test.end());
  std::sort(s.discarded.begin(), s.discarded.end());
}

// Shuffles the sorted word types and maps each to a set id (0/1/2).
inline std::map<std::string, int> assign_types(std::set<std::string> types, const SplitRatios& ratios,
                                               std::uint64_t seed) {
  if (types.size() < 3) throw DataError("lexical split needs at least 3 distinct word types");
  std::vector<std::string> order(types.begin(), types.end());
  Rng rng(seed);
  rng.shuffle(order);
  const auto counts = apportion(order.size(), ratios);
  std::map<std::string, int> set_of;
  std::size_t pos = 0;
  for (int s = 0; s < 3; ++s) {
    for (std::size_t c = 0; c < counts[static_cast<std::size_t>(s)]; ++c) set_of[order[pos++]] = s;
  }
  return set_of;
}

inline std::vector<std::size_t>& set_by_id(Split& s, int id) {
  return id == 0 ? s.train : (id == 1 ? s.validation : s.test);
}

}  // namespace detail

// 75:20:5 random split: |val| = round-half-up(0.05 n), |test| = floor(0.20 n).
inline Split split_random(std::size_t n, std::uint64_t seed) {
  if (n < 20) throw DataError("random split needs at least 20 instances, got " + std::to_string(n));
  const std::size_t n_val = (5 * n + 50) / 100;
  const std::size_t n_test = (20 * n) / 100;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  Split s;
  s.kind = SplitKind::kRandom;
  s.seed = seed;
  s.ratios = {0.75, 0.05, 0.20};
  s.validation.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val),
                order.begin() + static_cast<std::ptrdiff_t>(n_val + n_test));
  s.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val + n_test), order.end());
  detail::sort_sets(s);
  return s;
}

inline Split split_random(const std::vector<NCInstance>& instances, std::uint64_t seed) {
  return split_random(instances.size(), seed);
}

// Word types of one slot go to exactly one set; every instance follows its
// slot word, so nothing is discarded.
inline Split split_lexical_constituent(const std::vector<NCInstance>& instances, Slot slot,
                                       const SplitRatios& ratios, std::uint64_t seed) {
  detail::validate_ratios(ratios);
  auto word = [slot](const NCInstance& nc) -> const std::string& {
    return slot == Slot::kHead ? nc.head : nc.modifier;
  };
  std::set<std::string> types;
  for (const auto& nc : instances) types.insert(word(nc));
  const auto set_of = detail::assign_types(std::move(types), ratios, seed);

  Split s;
  s.kind = slot == Slot::kHead ? SplitKind::kLexicalHead : SplitKind::kLexicalMod;
  s.seed = seed;
  s.ratios = ratios;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    detail::set_by_id(s, set_of.at(word(instances[i]))).push_back(i);
  }
  return s;
}

// Lexical-full filter for a given type assignment (0 train, 1 validation,
// 2 test): an instance is kept only when both words share a set.
inline Split split_lexical_full(const std::vector<NCInstance>& instances, const std::map<std::string, int>& set_of) {
  Split s;
  s.kind = SplitKind::kLexicalFull;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto a = set_of.find(instances[i].modifier);
    const auto b = set_of.find(instances[i].head);
    if (a == set_of.end() || b == set_of.end()) throw UsageError("type assignment misses a word of instance " + std::to_string(i));
    if (a->second < 0 || a->second > 2 || b->second < 0 || b->second > 2) throw UsageError("set ids must be 0, 1 or 2");
    if (a->second == b->second) {
      detail::set_by_id(s, a->second).push_back(i);
    } else {
      s.discarded.push_back(i);
    }
  }
  return s;
}

// Every word type (either slot) goes to one set; an instance is kept only
// when both of its words landed in the same set.
inline Split split_lexical_full(const std::vector<NCInstance>& instances, const SplitRatios& ratios,
                                std::uint64_t seed) {
  detail::validate_ratios(ratios);
  std::set<std::string> types;
  for (const auto& nc : instances) {
    types.insert(nc.modifier);
    types.insert(nc.head);
  }
  Split s = split_lexical_full(instances, detail::assign_types(std::move(types), ratios, seed));
  s.seed = seed;
  s.ratios = ratios;
  return s;
}

inline Split make_split(const std::vector<NCInstance>& instances, SplitKind kind,
                        const SplitRatios& type_ratios, std::uint64_t seed) {
  switch (kind) {
    case SplitKind::kRandom: return split_random(instances, seed);
    case SplitKind::kLexicalFull: return split_lexical_full(instances, type_ratios, seed);
    case SplitKind::kLexicalHead: return split_lexical_constituent(instances, Slot::kHead, type_ratios, seed);
    case SplitKind::kLexicalMod: return split_lexical_constituent(instances, Slot::kMod, type_ratios, seed);
  }
  throw UsageError("bad split kind");
}

inline std::vector<NCInstance> select(const std::vector<NCInstance>& instances,
                                      const std::vector<std::size_t>& indices) {
  std::vector<NCInstance> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(instances.at(i));
  return out;
}

// Materialized split as read back from disk.
struct SplitData {
  std::vector<NCInstance> train, validation, test, discarded;
  std::string manifest;
};

inline std::string split_manifest_line(const Split& s) {
  std::ostringstream m;
  m << "kind=" << to_string(s.kind) << " seed=" << s.seed << " ratios=" << format_double(s.ratios[0]) << ':'
    << format_double(s.ratios[1]) << ':' << format_double(s.ratios[2]);
  return m.str();
}

// Writes train.tsv, val.tsv, test.tsv (and discarded.tsv for lexical_full)
// plus manifest.txt into `dir`. `extra_manifest` lines are appended verbatim.
inline void write_split(const std::filesystem::path& dir, const std::vector<NCInstance>& instances,
                        const Split& s, const std::vector<std::string>& extra_manifest = {}) {
  std::filesystem::create_directories(dir);
  auto dump = [&](const char* name, const std::vector<std::size_t>& idx) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw DataError("cannot write " + (dir / name).string());
    write_instances(out, select(instances, idx));
  };
  dump("train.tsv", s.train);
  dump("val.tsv", s.validation);
  dump("test.tsv", s.test);
  if (s.kind == SplitKind::kLexicalFull) dump("discarded.tsv", s.discarded);
  std::ofstream m(dir / "manifest.txt", std::ios::binary);
  m << split_manifest_line(s) << '\n';
  for (const auto& line : extra_manifest) m << line << '\n';
}

inline SplitData read_split(const std::filesystem::path& dir) {
  auto slurp = [&](const char* name, bool required) {
    std::vector<NCInstance> out;
    std::ifstream in(dir / name);
    if (!in) {
      if (required) throw DataError("missing split file " + (dir / name).string());
      return out;
    }
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto view = trim_eol(line);
      if (view.empty()) continue;
      const auto f = split(view, '\t');
      if (f.size() != 3) throw DataError((dir / name).string() + ":" + std::to_string(lineno) + ": bad line");
      out.push_back({std::string(f[0]), std::string(f[1]), std::string(f[2])});
    }
    return out;
  };
  SplitData d;
  d.train = slurp("train.tsv", true);
  d.validation = slurp("val.tsv", true);
  d.test = slurp("test.tsv", true);
  d.discarded = slurp("discarded.tsv", false);
  std::ifstream m(dir / "manifest.txt");
  std::getline(m, d.manifest);
  return d;
}

}  // namespace ncrel
