#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ncrel/error.hpp"
#include "ncrel/util.hpp"

namespace ncrel {

struct Token {
  std::string form;
  std::string lemma;
  std::string pos;
  int head = 0;  // 1-based CoNLL-U head; 0 = root
  std::string deprel;
};

struct ParsedSentence {
  std::vector<Token> tokens;

  std::size_t size() const { return tokens.size(); }
  // 0-based parent index, or nullopt for the root.
  std::optional<std::size_t> parent(std::size_t i) const {
    const int h = tokens[i].head;
    if (h <= 0) return std::nullopt;
    return static_cast<std::size_t>(h - 1);
  }
};

struct CorpusStats {
  std::uint64_t sentences = 0;
  std::uint64_t dropped_long = 0;
  std::uint64_t malformed = 0;
  std::uint64_t disconnected = 0;
  std::uint64_t over_edge_budget = 0;
};

inline constexpr std::size_t kMaxSentenceTokens = 32;
inline constexpr std::size_t kMaxPathEdges = 8;
inline constexpr std::size_t kPathsPerNC = 1000;

namespace detail {

// Exactly one root, heads in range, and every token reaches the root.
inline bool well_formed_tree(const ParsedSentence& s) {
  const std::size_t n = s.size();
  std::size_t roots = 0;
  for (const auto& t : s.tokens) {
    if (t.head < 0 || static_cast<std::size_t>(t.head) > n) return false;
    if (t.head == 0) ++roots;
  }
  if (roots != 1) return false;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t cur = i;
    std::size_t steps = 0;
    while (auto p = s.parent(cur)) {
      cur = *p;
      if (++steps > n) return false;
    }
  }
  return true;
}

}  // namespace detail

// Streams sentences out of 10-column CoNLL-U. Multiword-token ranges and
// empty nodes are skipped; blocks with a bad head field or a broken tree are
// skipped and counted; sentences longer than `max_tokens` are dropped.
class ConlluReader {
 public:
  explicit ConlluReader(std::istream& in, std::size_t max_tokens = kMaxSentenceTokens)
      : in_(in), max_tokens_(max_tokens) {}

  bool next(ParsedSentence& out) {
    std::vector<std::string> block;
    while (read_block(block)) {
      ParsedSentence s;
      if (!parse_block(block, s)) {
        ++stats_.malformed;
        continue;
      }
      if (s.size() > max_tokens_) {
        ++stats_.dropped_long;
        continue;
      }
      ++stats_.sentences;
      out = std::move(s);
      return true;
    }
    return false;
  }

  const CorpusStats& stats() const { return stats_; }

 private:
  bool read_block(std::vector<std::string>& block) {
    block.clear();
    std::string line;
    while (std::getline(in_, line)) {
      const auto view = trim_eol(line);
      if (view.empty()) {
        if (!block.empty()) return true;
        continue;
      }
      if (view.front() == '#') continue;
      block.emplace_back(view);
    }
    return !block.empty();
  }

  static bool parse_block(const std::vector<std::string>& block, ParsedSentence& s) {
    for (const auto& line : block) {
      const auto f = split(line, '\t');
      if (f.size() != 10) return false;
      if (f[0].find_first_of("-.") != std::string_view::npos) continue;
      Token t;
      t.form = std::string(f[1]);
      t.lemma = f[2] == "_" ? std::string(f[1]) : std::string(f[2]);
      t.pos = f[3] == "_" ? std::string(f[4]) : std::string(f[3]);
      if (!parse_int(f[6], t.head)) return false;
      t.deprel = std::string(f[7]);
      s.tokens.push_back(std::move(t));
    }
    return !s.tokens.empty() && detail::well_formed_tree(s);
  }

  std::istream& in_;
  std::size_t max_tokens_;
  CorpusStats stats_;
};

inline std::vector<ParsedSentence> read_conllu(std::istream& in, std::size_t max_tokens = kMaxSentenceTokens,
                                               CorpusStats* stats = nullptr) {
  ConlluReader reader(in, max_tokens);
  std::vector<ParsedSentence> out;
  ParsedSentence s;
  while (reader.next(s)) out.push_back(std::move(s));
  if (stats) *stats = reader.stats();
  return out;
}

enum class Direction { kUp, kDown, kEnd, kSatLeft, kSatRight };

inline const char* to_string(Direction d) {
  switch (d) {
    case Direction::kUp: return "UP";
    case Direction::kDown: return "DOWN";
    case Direction::kEnd: return "END";
    case Direction::kSatLeft: return "SAT_LEFT";
    case Direction::kSatRight: return "SAT_RIGHT";
  }
  return "?";
}

inline std::optional<Direction> parse_direction(std::string_view s) {
  if (s == "UP") return Direction::kUp;
  if (s == "DOWN") return Direction::kDown;
  if (s == "END") return Direction::kEnd;
  if (s == "SAT_LEFT") return Direction::kSatLeft;
  if (s == "SAT_RIGHT") return Direction::kSatRight;
  return std::nullopt;
}

inline const std::string kSlotX = "<X>";
inline const std::string kSlotY = "<Y>";

struct PathNode {
  std::string lemma;
  std::string pos;
  std::string dep;
  Direction dir = Direction::kEnd;

  bool operator==(const PathNode&) const = default;
};

// Nodes run from w1's token to w2's token, optionally with one satellite
// node before (SAT_LEFT) and/or after (SAT_RIGHT) the core.
struct DependencyPath {
  std::vector<PathNode> nodes;

  std::size_t edge_count() const { return nodes.empty() ? 0 : nodes.size() - 1; }
  bool operator==(const DependencyPath&) const = default;
};

namespace detail {

// '/' and whitespace are field separators in the serialized form.
inline std::string path_field(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c == '/' || c == ' ' || c == '\t') c = '_';
  }
  if (out.empty()) out = "_";
  return out;
}

}  // namespace detail

inline std::string serialize_path(const DependencyPath& p) {
  std::string out;
  for (std::size_t i = 0; i < p.nodes.size(); ++i) {
    const auto& n = p.nodes[i];
    if (i) out += ' ';
    out += n.lemma;
    out += '/';
    out += n.pos;
    out += '/';
    out += n.dep;
    out += '/';
    out += to_string(n.dir);
  }
  return out;
}

inline DependencyPath parse_path(std::string_view s) {
  DependencyPath p;
  for (auto tok : split(s, ' ')) {
    const auto f = split(tok, '/');
    if (f.size() != 4 || f[0].empty() || f[1].empty() || f[2].empty()) {
      throw DataError("bad path node '" + std::string(tok) + "': expected lemma/POS/dep/dir");
    }
    auto dir = parse_direction(f[3]);
    if (!dir) throw DataError("bad path direction '" + std::string(f[3]) + "'");
    p.nodes.push_back({std::string(f[0]), std::string(f[1]), std::string(f[2]), *dir});
  }
  if (p.nodes.empty()) throw DataError("empty path string");
  return p;
}

struct PathOptions {
  std::size_t max_edges = kMaxPathEdges;
  bool with_satellites = false;
};

namespace detail {

inline PathNode make_node(const ParsedSentence& s, std::size_t k, Direction dir) {
  const auto& t = s.tokens[k];
  return {path_field(to_lower(t.lemma)), path_field(t.pos), path_field(t.deprel), dir};
}

// Token indices along the tree route from i to j, via their lowest common
// ancestor. Empty when the two tokens are not connected.
inline std::vector<std::size_t> tree_route(const ParsedSentence& s, std::size_t i, std::size_t j) {
  const std::size_t n = s.size();
  std::vector<std::size_t> up_i{i}, up_j{j};
  for (auto p = s.parent(i); p && up_i.size() <= n; p = s.parent(*p)) up_i.push_back(*p);
  for (auto p = s.parent(j); p && up_j.size() <= n; p = s.parent(*p)) up_j.push_back(*p);
  std::vector<std::size_t> depth_in_i(n, n + 1);
  for (std::size_t d = 0; d < up_i.size() && d <= n; ++d) {
    if (up_i[d] < n && depth_in_i[up_i[d]] == n + 1) depth_in_i[up_i[d]] = d;
  }
  for (std::size_t dj = 0; dj < up_j.size(); ++dj) {
    const std::size_t a = up_j[dj];
    if (a >= n || depth_in_i[a] == n + 1) continue;
    std::vector<std::size_t> route(up_i.begin(), up_i.begin() + static_cast<std::ptrdiff_t>(depth_in_i[a] + 1));
    for (std::size_t k = dj; k-- > 0;) route.push_back(up_j[k]);
    return route;
  }
  return {};
}

// Nearest dependent of `e` that is not on the route; ties go to the left.
inline std::optional<std::size_t> satellite_of(const ParsedSentence& s, std::size_t e,
                                               const std::vector<std::size_t>& route) {
  std::optional<std::size_t> best;
  std::size_t best_dist = 0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (s.parent(k) != e) continue;
    if (std::find(route.begin(), route.end(), k) != route.end()) continue;
    const std::size_t dist = k > e ? k - e : e - k;
    if (!best || dist < best_dist) {
      best = k;
      best_dist = dist;
    }
  }
  return best;
}

}  // namespace detail

// The tree path between tokens i (w1, rendered <X>) and j (w2, rendered <Y>).
// A node's direction says whether the route continues to its head (UP) or to
// one of its dependents (DOWN); the last core node is END.
inline std::optional<DependencyPath> extract_core_path(const ParsedSentence& s, std::size_t i, std::size_t j,
                                                       std::size_t max_edges = kMaxPathEdges,
                                                       CorpusStats* stats = nullptr) {
  if (i == j || i >= s.size() || j >= s.size()) throw UsageError("extract_path: bad token indices");
  const auto route = detail::tree_route(s, i, j);
  if (route.empty()) {
    if (stats) ++stats->disconnected;
    return std::nullopt;
  }
  if (route.size() - 1 > max_edges) {
    if (stats) ++stats->over_edge_budget;
    return std::nullopt;
  }
  DependencyPath p;
  for (std::size_t k = 0; k < route.size(); ++k) {
    Direction dir = Direction::kEnd;
    if (k + 1 < route.size()) dir = s.parent(route[k]) == route[k + 1] ? Direction::kUp : Direction::kDown;
    p.nodes.push_back(detail::make_node(s, route[k], dir));
  }
  p.nodes.front().lemma = kSlotX;
  p.nodes.back().lemma = kSlotY;
  return p;
}

// Core path first, then (if requested) the satellite variants: w1-side,
// w2-side, and both, each kept only within the edge budget.
inline std::vector<DependencyPath> extract_paths(const ParsedSentence& s, std::size_t i, std::size_t j,
                                                 const PathOptions& opt = {}, CorpusStats* stats = nullptr) {
  std::vector<DependencyPath> out;
  auto core = extract_core_path(s, i, j, opt.max_edges, stats);
  if (!core) return out;
  out.push_back(*core);
  if (!opt.with_satellites) return out;

  const auto route = detail::tree_route(s, i, j);
  const auto left = detail::satellite_of(s, i, route);
  const auto right = detail::satellite_of(s, j, route);
  const std::size_t edges = core->edge_count();
  std::optional<PathNode> left_node, right_node;
  if (left) left_node = detail::make_node(s, *left, Direction::kSatLeft);
  if (right) right_node = detail::make_node(s, *right, Direction::kSatRight);

  if (left_node && edges + 1 <= opt.max_edges) {
    DependencyPath p = *core;
    p.nodes.insert(p.nodes.begin(), *left_node);
    out.push_back(std::move(p));
  }
  if (right_node && edges + 1 <= opt.max_edges) {
    DependencyPath p = *core;
    p.nodes.push_back(*right_node);
    out.push_back(std::move(p));
  }
  if (left_node && right_node && edges + 2 <= opt.max_edges) {
    DependencyPath p = *core;
    p.nodes.insert(p.nodes.begin(), *left_node);
    p.nodes.push_back(*right_node);
    out.push_back(std::move(p));
  }
  return out;
}

using NCKey = std::pair<std::string, std::string>;

struct PathCount {
  std::string path;  // serialized
  std::uint64_t count = 0;

  bool operator==(const PathCount&) const = default;
};

// Finalized store: per (w1, w2), paths sorted by count desc then path asc.
class PathStore {
 public:
  using Map = std::map<NCKey, std::vector<PathCount>>;

  const std::vector<PathCount>& paths(const std::string& w1, const std::string& w2) const {
    static const std::vector<PathCount> kEmpty;
    auto it = entries_.find({w1, w2});
    return it == entries_.end() ? kEmpty : it->second;
  }

  const Map& entries() const { return entries_; }
  Map& mutable_entries() { return entries_; }
  std::size_t size() const { return entries_.size(); }

  std::vector<std::string> distinct_paths() const {
    std::set<std::string> all;
    for (const auto& [key, list] : entries_) {
      for (const auto& pc : list) all.insert(pc.path);
    }
    return {all.begin(), all.end()};
  }

  bool operator==(const PathStore&) const = default;

 private:
  Map entries_;
};

// Accumulates raw counts. Merging is additive, so any partition of the corpus
// produces the same finalized store.
class PathCounter {
 public:
  explicit PathCounter(const std::vector<NCKey>& targets, PathOptions opt = {}) : opt_(opt) {
    for (const auto& [w1, w2] : targets) by_modifier_[to_lower(w1)].insert(to_lower(w2));
  }

  void add(const NCKey& key, const std::string& path, std::uint64_t count = 1) { counts_[key][path] += count; }

  void add_sentence(const ParsedSentence& s) {
    std::unordered_map<std::string, std::vector<std::size_t>> positions;
    for (std::size_t k = 0; k < s.size(); ++k) positions[to_lower(s.tokens[k].lemma)].push_back(k);
    for (const auto& [lemma, pos_w1] : positions) {
      auto it = by_modifier_.find(lemma);
      if (it == by_modifier_.end()) continue;
      for (const auto& w2 : it->second) {
        auto jt = positions.find(w2);
        if (jt == positions.end()) continue;
        for (auto i : pos_w1) {
          for (auto j : jt->second) {
            if (i == j) continue;
            for (const auto& p : extract_paths(s, i, j, opt_, &stats_)) add({lemma, w2}, serialize_path(p));
          }
        }
      }
    }
  }

  void merge(const PathCounter& other) {
    for (const auto& [key, m] : other.counts_) {
      for (const auto& [path, c] : m) counts_[key][path] += c;
    }
  }

  // Keeps the `cap` most frequent paths per NC; ties by ascending path string.
  PathStore finalize(std::size_t cap = kPathsPerNC) const {
    PathStore store;
    for (const auto& [key, m] : counts_) {
      std::vector<PathCount> list;
      list.reserve(m.size());
      for (const auto& [path, c] : m) list.push_back({path, c});
      std::sort(list.begin(), list.end(), [](const PathCount& a, const PathCount& b) {
        return a.count != b.count ? a.count > b.count : a.path < b.path;
      });
      if (list.size() > cap) list.resize(cap);
      store.mutable_entries()[key] = std::move(list);
    }
    return store;
  }

  const CorpusStats& stats() const { return stats_; }

 private:
  PathOptions opt_;
  std::map<std::string, std::set<std::string>> by_modifier_;
  std::map<NCKey, std::unordered_map<std::string, std::uint64_t>> counts_;
  CorpusStats stats_;
};

inline PathStore build_path_store(const std::vector<ParsedSentence>& sentences, const std::vector<NCKey>& targets,
                                  std::size_t cap = kPathsPerNC, PathOptions opt = {}) {
  if (targets.empty()) throw UsageError("build_path_store: no target noun compounds");
  PathCounter counter(targets, opt);
  for (const auto& s : sentences) counter.add_sentence(s);
  return counter.finalize(cap);
}

// Streams CoNLL-U straight into the counter.
inline PathStore build_path_store(std::istream& conllu, const std::vector<NCKey>& targets, std::size_t cap,
                                  PathOptions opt, std::size_t max_sentence = kMaxSentenceTokens,
                                  CorpusStats* stats = nullptr) {
  if (targets.empty()) throw UsageError("build_path_store: no target noun compounds");
  PathCounter counter(targets, opt);
  ConlluReader reader(conllu, max_sentence);
  ParsedSentence s;
  while (reader.next(s)) counter.add_sentence(s);
  if (stats) {
    *stats = reader.stats();
    stats->disconnected = counter.stats().disconnected;
    stats->over_edge_budget = counter.stats().over_edge_budget;
  }
  return counter.finalize(cap);
}

// TSV rows `w1<TAB>w2<TAB>path<TAB>count`, ordered by (w1, w2, count desc, path asc).
inline void write_path_store(std::ostream& out, const PathStore& store) {
  for (const auto& [key, list] : store.entries()) {
    for (const auto& pc : list) out << key.first << '\t' << key.second << '\t' << pc.path << '\t' << pc.count << '\n';
  }
}

inline PathStore read_path_store(std::istream& in, const std::string& source = "<stream>") {
  PathStore store;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto view = trim_eol(line);
    if (view.empty()) continue;
    const auto f = split(view, '\t');
    std::uint64_t count = 0;
    if (f.size() != 4 || !parse_int(f[3], count) || count == 0) {
      throw DataError(source + ":" + std::to_string(lineno) + ": expected w1, w2, path, count>0");
    }
    parse_path(f[2]);
    store.mutable_entries()[{std::string(f[0]), std::string(f[1])}].push_back({std::string(f[2]), count});
  }
  return store;
}

inline PathStore load_path_store(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open path store " + path.string());
  return read_path_store(in, path.string());
}

// Replaces each contiguous (w1, w2) token bigram matching a target NC,
// compared case-insensitively, with the single token `w1_w2`. Matching is
// leftmost-first and non-overlapping.
class NCRewriter {
 public:
  explicit NCRewriter(const std::vector<NCKey>& targets) {
    for (const auto& [w1, w2] : targets) pairs_.insert({to_lower(w1), to_lower(w2)});
  }

  std::vector<std::string> rewrite(const std::vector<std::string>& tokens) const {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    std::size_t i = 0;
    while (i < tokens.size()) {
      if (i + 1 < tokens.size()) {
        NCKey key{to_lower(tokens[i]), to_lower(tokens[i + 1])};
        if (pairs_.count(key)) {
          out.push_back(key.first + "_" + key.second);
          i += 2;
          continue;
        }
      }
      out.push_back(tokens[i]);
      ++i;
    }
    return out;
  }

  std::string rewrite_line(std::string_view line) const {
    std::vector<std::string> tokens;
    for (auto t : split_ws(line)) tokens.emplace_back(t);
    std::string out;
    for (const auto& t : rewrite(tokens)) {
      if (!out.empty()) out += ' ';
      out += t;
    }
    return out;
  }

 private:
  std::set<NCKey> pairs_;
};

inline std::vector<std::string> rewrite_nc_tokens(const std::vector<std::string>& tokens,
                                                  const std::vector<NCKey>& targets) {
  return NCRewriter(targets).rewrite(tokens);
}

}  // namespace ncrel
