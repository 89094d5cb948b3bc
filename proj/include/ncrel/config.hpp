#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ncrel/classify.hpp"
#include "ncrel/corpus.hpp"
#include "ncrel/dataset.hpp"
#include "ncrel/embed.hpp"
#include "ncrel/error.hpp"
#include "ncrel/pathenc.hpp"
#include "ncrel/training.hpp"
#include "ncrel/util.hpp"

namespace ncrel {

// Flat key=value run configuration. Every key has a default; unknown keys
// are rejected. The text form lists all keys sorted, so it round-trips.
class RunConfig {
 public:
  RunConfig() : values_(defaults()) {}

  static const std::map<std::string, std::string>& defaults() {
    static const std::map<std::string, std::string> d{
        {"dataset", ""},
        {"level", "fine"},
        {"corpus", ""},
        {"word_vectors", ""},
        {"lemma_vectors", ""},
        {"nc_vectors", ""},
        {"work_dir", "work"},
        {"split_kind", "random"},
        {"split_seed", "1"},
        {"type_ratios", "0.6:0.25:0.15"},
        {"variant", "integrated"},
        {"max_vocab", "400000"},
        {"oov_policy", "random"},
        {"oov_scale", "0.1"},
        {"d_lemma", "50"},
        {"d_pos", "4"},
        {"d_dep", "5"},
        {"d_dir", "1"},
        {"d_path", "60"},
        {"path_cap", "1000"},
        {"max_edges", "8"},
        {"max_sentence", "32"},
        {"satellites", "true"},
        {"batch_size", "10"},
        {"epochs", "30"},
        {"word_dropout", "0.1"},
        {"encoder_word_dropout", "false"},
        {"f1_drop", "0.08"},
        {"adam_alpha", "0.001"},
        {"adam_beta1", "0.9"},
        {"adam_beta2", "0.999"},
        {"adam_epsilon", "1e-08"},
        {"indicative_threshold", "0.8"},
        {"neighbors_k", "10"},
        {"grad_tolerance", "0.0001"},
        {"seed", "1"},
        {"threads", "1"},
    };
    return d;
  }

  void set(const std::string& key, const std::string& value) {
    if (!defaults().count(key)) throw UsageError("unknown config key '" + key + "'");
    values_[key] = value;
  }

  // Accepts "key=value".
  void set_assignment(std::string_view kv) {
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos) throw UsageError("expected key=value, got '" + std::string(kv) + "'");
    auto strip = [](std::string_view s) {
      while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
      while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
      return std::string(s);
    };
    set(strip(kv.substr(0, eq)), strip(kv.substr(eq + 1)));
  }

  static RunConfig parse(std::istream& in) {
    RunConfig c;
    std::string line;
    while (std::getline(in, line)) {
      const auto view = trim_eol(line);
      const auto first = view.find_first_not_of(" \t");
      if (first == std::string_view::npos || view[first] == '#') continue;
      c.set_assignment(view);
    }
    return c;
  }

  static RunConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file " + path.string());
    return parse(in);
  }

  std::string to_text() const {
    std::ostringstream out;
    for (const auto& [k, v] : values_) out << k << '=' << v << '\n';
    return out.str();
  }

  std::string hash() const { return hex64(fnv1a(to_text())); }

  const std::string& str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw UsageError("unknown config key '" + key + "'");
    return it->second;
  }

  std::uint64_t u64(const std::string& key) const {
    std::uint64_t v = 0;
    if (!parse_int(str(key), v)) throw UsageError("config key '" + key + "' must be a non-negative integer");
    return v;
  }

  std::size_t size(const std::string& key) const { return static_cast<std::size_t>(u64(key)); }

  double real(const std::string& key) const {
    double v = 0;
    if (!parse_double(str(key), v)) throw UsageError("config key '" + key + "' must be a number");
    return v;
  }

  bool flag(const std::string& key) const {
    const auto& v = str(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw UsageError("config key '" + key + "' must be true or false");
  }

  std::filesystem::path path(const std::string& key) const {
    if (str(key).empty()) throw UsageError("config key '" + key + "' is not set");
    return str(key);
  }

  bool operator==(const RunConfig&) const = default;

  // Typed views.

  LabelLevel level() const {
    if (str("level") == "fine") return LabelLevel::kFine;
    if (str("level") == "coarse") return LabelLevel::kCoarse;
    throw UsageError("level must be fine or coarse");
  }

  SplitRatios type_ratios() const {
    const auto parts = split(str("type_ratios"), ':');
    SplitRatios r{};
    if (parts.size() != 3) throw UsageError("type_ratios must look like 0.6:0.25:0.15");
    for (std::size_t i = 0; i < 3; ++i) {
      if (!parse_double(parts[i], r[i])) throw UsageError("type_ratios must be numbers");
    }
    return r;
  }

  TrainConfig train_config() const {
    TrainConfig t;
    t.batch_size = size("batch_size");
    t.max_epochs = size("epochs");
    t.f1_drop = real("f1_drop");
    t.word_dropout = real("word_dropout");
    t.encoder_word_dropout = flag("encoder_word_dropout");
    t.adam = {real("adam_alpha"), real("adam_beta1"), real("adam_beta2"), real("adam_epsilon")};
    t.seed = u64("seed");
    if (t.batch_size == 0) throw UsageError("batch_size must be >= 1");
    if (!(t.word_dropout >= 0 && t.word_dropout < 1)) throw UsageError("word_dropout must be in [0, 1)");
    return t;
  }

  EncoderDims encoder_dims() const {
    return {size("d_lemma"), size("d_pos"), size("d_dep"), size("d_dir"), size("d_path")};
  }

  PathOptions path_options() const { return {size("max_edges"), flag("satellites")}; }

  OovConfig oov() const { return {parse_oov_policy(str("oov_policy")), u64("seed"), real("oov_scale")}; }

  unsigned threads() const { return static_cast<unsigned>(std::max<std::uint64_t>(1, u64("threads"))); }

  // Checks every typed field; throws UsageError on the first bad one.
  void validate() const {
    level();
    parse_split_kind(str("split_kind"));
    const auto r = type_ratios();
    double sum = 0;
    for (double x : r) {
      if (!(x > 0)) throw UsageError("type_ratios must be positive");
      sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw UsageError("type_ratios must sum to 1");
    parse_variant(str("variant"));
    train_config();
    encoder_dims();
    path_options();
    oov();
    for (const char* key : {"max_vocab", "path_cap", "max_sentence", "neighbors_k", "split_seed", "threads"}) u64(key);
    for (const char* key : {"indicative_threshold", "grad_tolerance"}) real(key);
    if (size("d_path") == 0) throw UsageError("d_path must be >= 1");
  }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace ncrel
