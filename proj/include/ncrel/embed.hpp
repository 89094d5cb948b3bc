#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ncrel/error.hpp"
#include "ncrel/util.hpp"

namespace ncrel {

enum class OovPolicy { kRandom, kZero, kError };

inline OovPolicy parse_oov_policy(const std::string& s) {
  if (s == "random") return OovPolicy::kRandom;
  if (s == "zero") return OovPolicy::kZero;
  if (s == "error") return OovPolicy::kError;
  throw UsageError("unknown OOV policy '" + s + "'");
}

inline const char* to_string(OovPolicy p) {
  switch (p) {
    case OovPolicy::kRandom: return "random";
    case OovPolicy::kZero: return "zero";
    case OovPolicy::kError: return "error";
  }
  return "?";
}

struct OovConfig {
  OovPolicy policy = OovPolicy::kRandom;
  std::uint64_t seed = 0;
  double scale = 0.1;
};

// Token -> dense vector table. Stored rows keep file order. Lookups of
// missing tokens follow the OOV policy; random OOV vectors depend only on
// (token, seed) and are cached, so concurrent lookups agree.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim, OovConfig oov = {}) : dim_(dim), oov_(oov) {}

  EmbeddingTable(const EmbeddingTable& o) : dim_(o.dim_), oov_(o.oov_), tokens_(o.tokens_), index_(o.index_), data_(o.data_) {}
  EmbeddingTable& operator=(const EmbeddingTable& o) {
    if (this != &o) {
      dim_ = o.dim_;
      oov_ = o.oov_;
      tokens_ = o.tokens_;
      index_ = o.index_;
      data_ = o.data_;
      std::lock_guard lock(mu_);
      oov_cache_.clear();
    }
    return *this;
  }
  EmbeddingTable(EmbeddingTable&& o) noexcept
      : dim_(o.dim_), oov_(o.oov_), tokens_(std::move(o.tokens_)), index_(std::move(o.index_)), data_(std::move(o.data_)) {}
  EmbeddingTable& operator=(EmbeddingTable&& o) noexcept {
    dim_ = o.dim_;
    oov_ = o.oov_;
    tokens_ = std::move(o.tokens_);
    index_ = std::move(o.index_);
    data_ = std::move(o.data_);
    oov_cache_.clear();
    return *this;
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const OovConfig& oov() const { return oov_; }
  void set_oov(OovConfig oov) {
    oov_ = oov;
    std::lock_guard lock(mu_);
    oov_cache_.clear();
  }

  bool contains(const std::string& token) const { return index_.count(token) != 0; }

  void add(const std::string& token, std::span<const double> v) {
    if (v.size() != dim_) throw DataError("vector for '" + token + "' has wrong dimension");
    if (contains(token)) throw DataError("duplicate token '" + token + "'");
    index_[token] = tokens_.size();
    tokens_.push_back(token);
    data_.insert(data_.end(), v.begin(), v.end());
  }

  std::span<const double> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }

  std::span<const double> lookup(const std::string& token) const {
    if (auto it = index_.find(token); it != index_.end()) return row(it->second);
    if (oov_.policy == OovPolicy::kError) throw DataError("no vector for token '" + token + "'");
    std::lock_guard lock(mu_);
    auto [it, inserted] = oov_cache_.try_emplace(token);
    if (inserted) {
      it->second.assign(dim_, 0.0);
      if (oov_.policy == OovPolicy::kRandom) {
        std::uint64_t seed = oov_.seed;
        Rng rng(fnv1a(token) ^ Rng::splitmix(seed));
        for (auto& x : it->second) x = rng.uniform(-oov_.scale, oov_.scale);
      }
    }
    return it->second;
  }

 private:
  std::size_t dim_ = 0;
  OovConfig oov_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> data_;
  mutable std::mutex mu_;
  // std::map nodes are stable, so spans into cached vectors stay valid.
  mutable std::map<std::string, std::vector<double>> oov_cache_;
};

// GloVe-style text: `token v1 v2 ... vd` per line, most frequent first.
// Keeps the first `max_vocab` rows (0 = all). A leading word2vec-style
// "count dim" header line is skipped.
inline EmbeddingTable read_vectors(std::istream& in, std::size_t max_vocab = 0, OovConfig oov = {},
                                   const std::string& source = "<stream>") {
  EmbeddingTable table;
  bool have_dim = false;
  std::string line;
  std::size_t lineno = 0;
  std::vector<double> v;
  while (std::getline(in, line)) {
    ++lineno;
    if (max_vocab && table.size() >= max_vocab) break;
    const auto f = split_ws(trim_eol(line));
    if (f.empty()) continue;
    if (lineno == 1 && f.size() == 2) {
      std::size_t a = 0, b = 0;
      if (parse_int(f[0], a) && parse_int(f[1], b)) continue;
    }
    if (f.size() < 2) throw DataError(source + ":" + std::to_string(lineno) + ": token without components");
    const std::size_t d = f.size() - 1;
    if (!have_dim) {
      table = EmbeddingTable(d, oov);
      have_dim = true;
    } else if (d != table.dim()) {
      throw DataError(source + ":" + std::to_string(lineno) + ": expected " + std::to_string(table.dim()) +
                      " components, found " + std::to_string(d));
    }
    v.resize(d);
    for (std::size_t k = 0; k < d; ++k) {
      if (!parse_double(f[k + 1], v[k])) {
        throw DataError(source + ":" + std::to_string(lineno) + ": bad number '" + std::string(f[k + 1]) + "'");
      }
    }
    table.add(std::string(f[0]), v);
  }
  if (!have_dim) throw DataError(source + ": no vectors");
  return table;
}

inline EmbeddingTable load_vectors(const std::filesystem::path& path, std::size_t max_vocab = 0, OovConfig oov = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vector file " + path.string());
  return read_vectors(in, max_vocab, oov, path.string());
}

// Writes rows with shortest round-trip number formatting.
inline void write_vectors(std::ostream& out, const EmbeddingTable& table) {
  for (std::size_t i = 0; i < table.size(); ++i) {
    out << table.tokens()[i];
    for (double x : table.row(i)) out << ' ' << format_double(x);
    out << '\n';
  }
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// Cosine similarity; nullopt when either vector has zero norm.
inline std::optional<double> cosine(std::span<const double> a, std::span<const double> b) {
  const double na = norm(a), nb = norm(b);
  if (na == 0 || nb == 0) return std::nullopt;
  return dot(a, b) / (na * nb);
}

struct Neighbor {
  std::string token;
  double similarity = 0;
};

using TokenFilter = std::function<bool(const std::string&)>;

inline bool is_nc_token(const std::string& token) { return token.find('_') != std::string::npos; }

// Exact top-k by cosine over the given candidates, excluding the query.
// Zero-norm candidates are skipped; ties go to the lexicographically smaller token.
inline std::vector<Neighbor> cosine_topk(const EmbeddingTable& table, const std::string& query,
                                         const std::vector<std::string>& candidates, std::size_t k = 10) {
  if (k == 0) throw UsageError("cosine_topk: k must be >= 1");
  const auto q = table.lookup(query);
  std::vector<Neighbor> scored;
  for (const auto& c : candidates) {
    if (c == query) continue;
    if (auto sim = cosine(q, table.lookup(c))) scored.push_back({c, *sim});
  }
  auto better = [](const Neighbor& a, const Neighbor& b) {
    return a.similarity != b.similarity ? a.similarity > b.similarity : a.token < b.token;
  };
  const std::size_t keep = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(), better);
  scored.resize(keep);
  return scored;
}

// Candidates are the table's stored tokens passing `filter` (all when empty).
inline std::vector<Neighbor> cosine_topk(const EmbeddingTable& table, const std::string& query, std::size_t k = 10,
                                         const TokenFilter& filter = {}) {
  std::vector<std::string> candidates;
  for (const auto& t : table.tokens()) {
    if (!filter || filter(t)) candidates.push_back(t);
  }
  return cosine_topk(table, query, candidates, k);
}

}  // namespace ncrel
