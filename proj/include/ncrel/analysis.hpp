#pragma once

#include <algorithm>
#include <ostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ncrel/dataset.hpp"
#include "ncrel/embed.hpp"
#include "ncrel/error.hpp"
#include "ncrel/pathenc.hpp"
#include "ncrel/util.hpp"

namespace ncrel {

inline constexpr double kIndicativeThreshold = 0.8;

struct IndicativePathRow {
  std::size_t relation = 0;
  std::string relation_name;
  std::string path;
  double score = 0;
};

// Each path alone goes through the encoder's path-level prediction and is
// assigned to its best relation; rows scoring at least `threshold` are kept,
// grouped by relation (inventory order) and sorted by score, then path.
inline std::vector<IndicativePathRow> indicative_paths(const PathEncoder& enc, const std::vector<std::string>& universe,
                                                       const std::vector<std::string>& relations,
                                                       double threshold = kIndicativeThreshold, unsigned threads = 1) {
  std::vector<Vec> dists(universe.size());
  parallel_for(universe.size(), threads,
               [&](std::size_t i) { dists[i] = enc.path_distribution(parse_path(universe[i])); });
  std::vector<IndicativePathRow> rows;
  for (std::size_t i = 0; i < universe.size(); ++i) {
    const std::size_t r = argmax(dists[i]);
    if (dists[i][r] < threshold) continue;
    rows.push_back({r, r < relations.size() ? relations[r] : std::to_string(r), universe[i], dists[i][r]});
  }
  std::sort(rows.begin(), rows.end(), [](const IndicativePathRow& a, const IndicativePathRow& b) {
    if (a.relation != b.relation) return a.relation < b.relation;
    if (a.score != b.score) return a.score > b.score;
    return a.path < b.path;
  });
  return rows;
}

// Renders "<X>/NOUN/pobj/UP of/ADP/prep/UP <Y>/NOUN/root/END" as "[w1] of [w2]"
// in path order, for reading analysis output.
inline std::string path_gloss(const std::string& serialized) {
  std::string out;
  for (const auto& n : parse_path(serialized).nodes) {
    if (!out.empty()) out += ' ';
    if (n.lemma == kSlotX) {
      out += "[w1]";
    } else if (n.lemma == kSlotY) {
      out += "[w2]";
    } else {
      out += n.lemma;
    }
  }
  return out;
}

inline void write_indicative_tsv(std::ostream& out, const std::vector<IndicativePathRow>& rows) {
  out << "relation\tscore\tpath\tgloss\n";
  for (const auto& r : rows) {
    out << r.relation_name << '\t' << format_double(r.score) << '\t' << r.path << '\t' << path_gloss(r.path) << '\n';
  }
}

struct NeighborMismatch {
  std::string nc;
  std::string label;
  std::string nearest;
  std::string nearest_label;
};

struct NeighborAgreement {
  std::size_t queries = 0;        // labeled query NCs
  std::size_t covered = 0;        // queries with a stored vector
  std::size_t agreeing = 0;       // covered queries whose neighbors mostly share the label
  double coverage = 0;
  double fraction = 0;
  std::size_t k = 10;
  std::vector<NeighborMismatch> mismatches;  // nearest neighbor carries a different label
};

// For every query NC with a stored vector, the `k` cosine-nearest NCs are
// taken from the pool (labeled NCs with stored vectors, query excluded). A
// query agrees when strictly more than half of those neighbors carry its
// label. The first label seen for a token is used when a token repeats.
inline NeighborAgreement nc_neighbor_agreement(const EmbeddingTable& table, const std::vector<NCInstance>& queries,
                                               const std::vector<NCInstance>& pool, std::size_t k = 10) {
  if (k == 0) throw UsageError("neighbor agreement: k must be >= 1");
  std::map<std::string, std::string> label_of;
  std::vector<std::string> candidates;
  for (const auto& nc : pool) {
    const auto tok = nc.token();
    if (!table.contains(tok) || label_of.count(tok)) continue;
    label_of[tok] = nc.label;
    candidates.push_back(tok);
  }
  if (candidates.size() < k + 1) {
    throw DataError("neighbor agreement needs at least " + std::to_string(k + 1) + " labeled NCs with vectors, found " +
                    std::to_string(candidates.size()));
  }
  NeighborAgreement res;
  res.k = k;
  std::set<std::string> seen;
  for (const auto& q : queries) {
    const auto tok = q.token();
    if (!seen.insert(tok).second) continue;
    ++res.queries;
    if (!table.contains(tok)) continue;
    ++res.covered;
    const auto nn = cosine_topk(table, tok, candidates, k);
    std::size_t same = 0;
    for (const auto& n : nn) same += label_of.at(n.token) == q.label ? 1 : 0;
    if (2 * same > nn.size()) ++res.agreeing;
    if (!nn.empty() && label_of.at(nn.front().token) != q.label) {
      res.mismatches.push_back({tok, q.label, nn.front().token, label_of.at(nn.front().token)});
    }
  }
  res.coverage = res.queries ? static_cast<double>(res.covered) / static_cast<double>(res.queries) : 0.0;
  res.fraction = res.covered ? static_cast<double>(res.agreeing) / static_cast<double>(res.covered) : 0.0;
  return res;
}

inline void write_neighbor_report(std::ostream& out, const NeighborAgreement& r) {
  out << "# queries=" << r.queries << " covered=" << r.covered << " coverage=" << format_double(r.coverage)
      << " k=" << r.k << " agreeing=" << r.agreeing << " fraction=" << format_double(r.fraction)
      << " pool=all_labeled\n";
  out << "nc\tlabel\tnearest\tnearest_label\n";
  for (const auto& m : r.mismatches) out << m.nc << '\t' << m.label << '\t' << m.nearest << '\t' << m.nearest_label << '\n';
}

}  // namespace ncrel
