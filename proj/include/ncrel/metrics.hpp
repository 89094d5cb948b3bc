#pragma once

#include <algorithm>
#include <iomanip>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "ncrel/dataset.hpp"
#include "ncrel/error.hpp"
#include "ncrel/util.hpp"

namespace ncrel {

struct ClassScores {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::size_t support = 0;    // gold count
  std::size_t predicted = 0;  // predicted count
};

struct EvalReport {
  std::vector<std::string> relations;
  std::vector<ClassScores> per_class;
  std::vector<std::vector<std::size_t>> confusion;  // [gold][predicted]
  double macro_f1 = 0;
  double weighted_f1 = 0;
  double accuracy = 0;
  std::size_t n = 0;
};

// Per-class precision/recall/F1 with 0 for empty denominators. Macro-F1
// averages the relations that occur in gold or predictions; weighted-F1
// weights each relation's F1 by its gold support.
inline EvalReport evaluate(std::span<const std::size_t> predicted, std::span<const std::size_t> gold,
                           std::size_t k) {
  if (predicted.size() != gold.size()) throw UsageError("evaluate: predictions and golds differ in length");
  EvalReport r;
  r.n = gold.size();
  r.confusion.assign(k, std::vector<std::size_t>(k, 0));
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] >= k || predicted[i] >= k) throw DataError("evaluate: label index outside the inventory");
    ++r.confusion[gold[i]][predicted[i]];
  }
  r.per_class.resize(k);
  std::size_t correct = 0, present = 0;
  double macro = 0, weighted = 0;
  for (std::size_t c = 0; c < k; ++c) {
    auto& s = r.per_class[c];
    const std::size_t tp = r.confusion[c][c];
    correct += tp;
    for (std::size_t j = 0; j < k; ++j) {
      s.support += r.confusion[c][j];
      s.predicted += r.confusion[j][c];
    }
    s.precision = s.predicted ? static_cast<double>(tp) / static_cast<double>(s.predicted) : 0.0;
    s.recall = s.support ? static_cast<double>(tp) / static_cast<double>(s.support) : 0.0;
    s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    if (s.support || s.predicted) {
      ++present;
      macro += s.f1;
    }
    weighted += s.f1 * static_cast<double>(s.support);
  }
  if (r.n) {
    r.accuracy = static_cast<double>(correct) / static_cast<double>(r.n);
    r.weighted_f1 = weighted / static_cast<double>(r.n);
  }
  r.macro_f1 = present ? macro / static_cast<double>(present) : 0.0;
  return r;
}

inline EvalReport evaluate(const std::vector<std::string>& predicted, const std::vector<std::string>& gold,
                           const RelationInventory& inventory) {
  std::vector<std::size_t> p, g;
  p.reserve(predicted.size());
  g.reserve(gold.size());
  for (const auto& s : predicted) p.push_back(inventory.index_of(s));
  for (const auto& s : gold) g.push_back(inventory.index_of(s));
  auto r = evaluate(p, g, inventory.k());
  r.relations = inventory.names();
  return r;
}

inline void write_report_tsv(std::ostream& out, const EvalReport& r) {
  out << "relation\tprecision\trecall\tf1\tsupport\n";
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& s = r.per_class[c];
    const std::string name = c < r.relations.size() ? r.relations[c] : std::to_string(c);
    out << name << '\t' << format_double(s.precision) << '\t' << format_double(s.recall) << '\t'
        << format_double(s.f1) << '\t' << s.support << '\n';
  }
  out << "#macro_f1\t" << format_double(r.macro_f1) << '\n';
  out << "#weighted_f1\t" << format_double(r.weighted_f1) << '\n';
  out << "#accuracy\t" << format_double(r.accuracy) << '\n';
  out << "#n\t" << r.n << '\n';
}

inline void write_confusion_tsv(std::ostream& out, const EvalReport& r) {
  out << "gold\\predicted";
  for (const auto& name : r.relations) out << '\t' << name;
  out << '\n';
  for (std::size_t g = 0; g < r.confusion.size(); ++g) {
    out << (g < r.relations.size() ? r.relations[g] : std::to_string(g));
    for (auto c : r.confusion[g]) out << '\t' << c;
    out << '\n';
  }
}

// One cell of a results table: a method's score on a dataset/split.
struct ResultCell {
  std::string dataset;
  std::string split;
  std::string method;
  double f1 = 0;
};

// Aligned text table with one row per (dataset, split) and one column per
// method, in first-seen order.
inline std::string format_results_table(const std::vector<ResultCell>& cells) {
  std::vector<std::string> methods;
  std::vector<std::pair<std::string, std::string>> rows;
  std::map<std::tuple<std::string, std::string, std::string>, double> value;
  for (const auto& c : cells) {
    if (std::find(methods.begin(), methods.end(), c.method) == methods.end()) methods.push_back(c.method);
    const std::pair<std::string, std::string> row{c.dataset, c.split};
    if (std::find(rows.begin(), rows.end(), row) == rows.end()) rows.push_back(row);
    value[{c.dataset, c.split, c.method}] = c.f1;
  }
  std::vector<std::string> header{"Dataset", "Split"};
  header.insert(header.end(), methods.begin(), methods.end());
  std::vector<std::vector<std::string>> grid{header};
  for (const auto& [ds, sp] : rows) {
    std::vector<std::string> line{ds, sp};
    for (const auto& m : methods) {
      auto it = value.find({ds, sp, m});
      if (it == value.end()) {
        line.emplace_back("-");
      } else {
        std::ostringstream v;
        v << std::fixed << std::setprecision(3) << it->second;
        line.push_back(v.str());
      }
    }
    grid.push_back(std::move(line));
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& line : grid) {
    for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());
  }
  std::ostringstream out;
  for (const auto& line : grid) {
    for (std::size_t c = 0; c < line.size(); ++c) {
      if (c) out << "  ";
      out << std::left << std::setw(static_cast<int>(width[c])) << line[c];
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace ncrel
