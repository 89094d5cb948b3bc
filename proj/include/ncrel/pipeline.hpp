#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ncrel/analysis.hpp"
#include "ncrel/classify.hpp"
#include "ncrel/config.hpp"
#include "ncrel/corpus.hpp"
#include "ncrel/dataset.hpp"
#include "ncrel/embed.hpp"
#include "ncrel/error.hpp"
#include "ncrel/gradcheck.hpp"
#include "ncrel/metrics.hpp"
#include "ncrel/pathenc.hpp"

namespace ncrel {

namespace fs = std::filesystem;

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitCheck = 3 };

inline const std::vector<std::string>& pipeline_commands() {
  static const std::vector<std::string> c{"split",       "extract-paths", "rewrite-nc",     "train-paths",
                                          "export-paths", "train",         "eval",           "baseline-freq",
                                          "analyze-paths", "analyze-neighbors", "grad-check"};
  return c;
}

// Output directory written under `<dir>.partial` and renamed into place on
// commit, so an interrupted or failed command never leaves a directory
// that looks complete.
class StagedDir {
 public:
  explicit StagedDir(fs::path final_dir) : final_(std::move(final_dir)), tmp_(final_.string() + ".partial") {
    fs::remove_all(tmp_);
    fs::create_directories(tmp_);
  }
  StagedDir(const StagedDir&) = delete;
  StagedDir& operator=(const StagedDir&) = delete;
  ~StagedDir() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(tmp_, ec);
    }
  }

  const fs::path& path() const { return tmp_; }
  fs::path operator/(const std::string& name) const { return tmp_ / name; }

  void commit() {
    fs::remove_all(final_);
    fs::rename(tmp_, final_);
    committed_ = true;
  }

 private:
  fs::path final_;
  fs::path tmp_;
  bool committed_ = false;
};

namespace detail {

inline std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + p.string());
  return out;
}

inline std::ifstream open_in(const fs::path& p, const char* what) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError(std::string("missing ") + what + ": " + p.string());
  return in;
}

inline std::vector<std::string> manifest_lines(const std::string& command, const RunConfig& cfg) {
  return {"command=" + command, "config_hash=" + cfg.hash(), "seed=" + cfg.str("seed")};
}

inline void write_manifest(const fs::path& file, const std::string& command, const RunConfig& cfg,
                           const std::vector<std::string>& extra = {}) {
  auto out = open_out(file);
  for (const auto& l : manifest_lines(command, cfg)) out << l << '\n';
  for (const auto& l : extra) out << l << '\n';
  out << "# config\n" << cfg.to_text();
}

inline std::map<std::string, std::string> checkpoint_meta(const std::string& command, const RunConfig& cfg) {
  return {{"command", command}, {"config_hash", cfg.hash()}, {"seed", cfg.str("seed")}};
}

inline std::vector<NCKey> nc_keys(const std::vector<NCInstance>& instances) {
  std::set<NCKey> keys;
  for (const auto& nc : instances) keys.insert({nc.modifier, nc.head});
  return {keys.begin(), keys.end()};
}

struct Workspace {
  fs::path root;
  fs::path split() const { return root / "split"; }
  fs::path paths_dir() const { return root / "paths"; }
  fs::path paths_file() const { return paths_dir() / "paths.tsv"; }
  fs::path encoder() const { return root / "encoder"; }
  fs::path cache_dir() const { return root / "path_cache"; }
  fs::path cache_file() const { return cache_dir() / "path_cache.tsv"; }
  fs::path classifier(const std::string& v) const { return root / ("classifier_" + v); }
  fs::path eval(const std::string& v) const { return root / ("eval_" + v); }
};

inline Workspace workspace(const RunConfig& cfg) { return {cfg.path("work_dir")}; }

inline PathEmbeddingCache load_cache(const Workspace& ws) {
  auto in = open_in(ws.cache_file(), "path cache (run export-paths first)");
  return read_path_cache(in);
}

inline PathStore load_store(const Workspace& ws) {
  auto in = open_in(ws.paths_file(), "path store (run extract-paths first)");
  return read_path_store(in, ws.paths_file().string());
}

// Tables, cache, and store needed by the configured variant.
struct LoadedSources {
  std::optional<EmbeddingTable> words, ncs;
  std::optional<PathEmbeddingCache> cache;
  std::optional<PathStore> store;

  InputSources view() const {
    return {words ? &*words : nullptr, ncs ? &*ncs : nullptr, cache ? &*cache : nullptr, store ? &*store : nullptr};
  }
};

inline LoadedSources load_sources(Variant v, const RunConfig& cfg, const Workspace& ws) {
  LoadedSources s;
  InputSpec probe{v, 1, 1, 1};
  if (probe.uses_words()) s.words = load_vectors(cfg.path("word_vectors"), cfg.size("max_vocab"), cfg.oov());
  if (probe.uses_nc()) s.ncs = load_vectors(cfg.path("nc_vectors"), cfg.size("max_vocab"), cfg.oov());
  if (probe.uses_paths()) {
    s.cache = load_cache(ws);
    s.store = load_store(ws);
  }
  return s;
}

inline std::string dataset_name(const RunConfig& cfg) {
  return fs::path(cfg.str("dataset")).stem().string() + "-" + cfg.str("level");
}

inline void write_predictions(std::ostream& out, const std::vector<NCInstance>& ncs, const std::vector<std::size_t>& pred,
                              const RelationInventory& inv) {
  for (std::size_t i = 0; i < ncs.size(); ++i) {
    out << ncs[i].modifier << '\t' << ncs[i].head << '\t' << ncs[i].label << '\t' << inv.name(pred[i]) << '\n';
  }
}

inline std::vector<std::size_t> gold_indices(const std::vector<NCInstance>& ncs, const RelationInventory& inv) {
  std::vector<std::size_t> g;
  for (const auto& nc : ncs) g.push_back(inv.index_of(nc.label));
  return g;
}

// Commands. Each reads and writes only under the configured work_dir.

inline void cmd_split(const RunConfig& cfg, std::ostream& log) {
  const auto ds = load_dataset(cfg.path("dataset"), cfg.level());
  const auto s = make_split(ds.instances, parse_split_kind(cfg.str("split_kind")), cfg.type_ratios(),
                            cfg.u64("split_seed"));
  const auto ws = workspace(cfg);
  StagedDir out(ws.split());
  auto extra = manifest_lines("split", cfg);
  extra.push_back("train=" + std::to_string(s.train.size()));
  extra.push_back("validation=" + std::to_string(s.validation.size()));
  extra.push_back("test=" + std::to_string(s.test.size()));
  extra.push_back("discarded=" + std::to_string(s.discarded.size()));
  extra.push_back("relations=" + std::to_string(ds.inventory.k()));
  write_split(out.path(), ds.instances, s, extra);
  out.commit();
  log << "split " << to_string(s.kind) << ": train=" << s.train.size() << " validation=" << s.validation.size()
      << " test=" << s.test.size() << " discarded=" << s.discarded.size() << " (k=" << ds.inventory.k() << ")\n";
}

inline void cmd_extract_paths(const RunConfig& cfg, std::ostream& log) {
  const auto ds = load_dataset(cfg.path("dataset"), cfg.level());
  auto in = open_in(cfg.path("corpus"), "corpus");
  CorpusStats stats;
  const auto store = build_path_store(in, nc_keys(ds.instances), cfg.size("path_cap"), cfg.path_options(),
                                      cfg.size("max_sentence"), &stats);
  const auto ws = workspace(cfg);
  StagedDir out(ws.paths_dir());
  {
    auto f = open_out(out / "paths.tsv");
    write_path_store(f, store);
  }
  const auto distinct = store.distinct_paths().size();
  write_manifest(out / "manifest.txt", "extract-paths", cfg,
                 {"sentences=" + std::to_string(stats.sentences), "dropped_long=" + std::to_string(stats.dropped_long),
                  "malformed=" + std::to_string(stats.malformed), "disconnected=" + std::to_string(stats.disconnected),
                  "over_edge_budget=" + std::to_string(stats.over_edge_budget),
                  "ncs_with_paths=" + std::to_string(store.size()), "distinct_paths=" + std::to_string(distinct)});
  out.commit();
  log << "extract-paths: " << stats.sentences << " sentences (" << stats.dropped_long << " too long, "
      << stats.malformed << " malformed); " << store.size() << " NCs with paths, " << distinct << " distinct paths\n";
}

inline void cmd_rewrite_nc(const RunConfig& cfg, std::ostream& log) {
  const auto ds = load_dataset(cfg.path("dataset"), cfg.level());
  const NCRewriter rewriter(nc_keys(ds.instances));
  const auto corpus = cfg.path("corpus");
  auto in = open_in(corpus, "corpus");
  const auto ws = workspace(cfg);
  StagedDir out(ws.root / "rewrite");
  auto f = open_out(out / "corpus.txt");
  std::size_t lines = 0;
  const auto ext = corpus.extension().string();
  if (ext == ".conllu" || ext == ".conll") {
    ConlluReader reader(in, std::numeric_limits<std::size_t>::max());
    ParsedSentence s;
    while (reader.next(s)) {
      std::vector<std::string> forms;
      for (const auto& t : s.tokens) forms.push_back(t.form);
      const auto r = rewriter.rewrite(forms);
      for (std::size_t i = 0; i < r.size(); ++i) f << (i ? " " : "") << r[i];
      f << '\n';
      ++lines;
    }
  } else {
    std::string line;
    while (std::getline(in, line)) {
      f << rewriter.rewrite_line(trim_eol(line)) << '\n';
      ++lines;
    }
  }
  f.close();
  write_manifest(out / "manifest.txt", "rewrite-nc", cfg, {"lines=" + std::to_string(lines)});
  out.commit();
  log << "rewrite-nc: " << lines << " lines\n";
}

inline void cmd_train_paths(const RunConfig& cfg, std::ostream& log) {
  const auto ds = load_dataset(cfg.path("dataset"), cfg.level());
  const auto ws = workspace(cfg);
  const auto split = read_split(ws.split());
  const auto store = load_store(ws);
  auto with_paths = [&](const std::vector<NCInstance>& v) {
    std::vector<NCInstance> out;
    for (const auto& nc : v) {
      if (!store.paths(nc.modifier, nc.head).empty()) out.push_back(nc);
    }
    return out;
  };
  const auto train = with_paths(split.train);
  const auto val = with_paths(split.validation);
  std::optional<EmbeddingTable> lemmas;
  if (!cfg.str("lemma_vectors").empty()) lemmas = load_vectors(cfg.path("lemma_vectors"), cfg.size("max_vocab"));
  auto res = train_path_encoder(store, train, val, ds.inventory, cfg.train_config(), cfg.encoder_dims(),
                                lemmas ? &*lemmas : nullptr);
  StagedDir out(ws.encoder());
  auto meta = checkpoint_meta("train-paths", cfg);
  meta["train_ncs"] = std::to_string(train.size());
  meta["train_ncs_without_paths"] = std::to_string(split.train.size() - train.size());
  res.encoder.save(out.path(), meta, ds.inventory.names());
  {
    auto h = open_out(out / "history.tsv");
    write_history(h, res.history);
  }
  out.commit();
  log << "train-paths: " << train.size() << " training NCs with paths (" << split.train.size() - train.size()
      << " without); best epoch " << res.history.best_epoch << "\n";
}

inline void cmd_export_paths(const RunConfig& cfg, std::ostream& log) {
  const auto ws = workspace(cfg);
  const auto enc = PathEncoder::load(ws.encoder());
  const auto store = load_store(ws);
  const auto cache = export_path_embeddings(enc, store, cfg.threads());
  StagedDir out(ws.cache_dir());
  {
    auto f = open_out(out / "path_cache.tsv");
    write_path_cache(f, cache, encoder_hash(ws.encoder()));
  }
  write_manifest(out / "manifest.txt", "export-paths", cfg, {"paths=" + std::to_string(cache.vectors.size())});
  out.commit();
  log << "export-paths: " << cache.vectors.size() << " path embeddings\n";
}

inline void cmd_train(const RunConfig& cfg, std::ostream& log) {
  const auto ds = load_dataset(cfg.path("dataset"), cfg.level());
  const auto ws = workspace(cfg);
  const auto split = read_split(ws.split());
  const auto variant = parse_variant(cfg.str("variant"));
  const auto sources = load_sources(variant, cfg, ws);
  const auto spec = make_input_spec(variant, sources.view());
  const auto train = build_inputs(spec, split.train, ds.inventory, sources.view());
  const auto val = build_inputs(spec, split.validation, ds.inventory, sources.view());
  auto res = train_classifier(spec, train, val, ds.inventory.k(), cfg.train_config());
  StagedDir out(ws.classifier(to_string(variant)));
  res.classifier.save(out.path(), checkpoint_meta("train", cfg));
  {
    auto h = open_out(out / "history.tsv");
    write_history(h, res.history);
  }
  out.commit();
  log << "train " << to_string(variant) << ": |x|=" << spec.dim() << " hidden=" << spec.hidden_dim() << " best epoch "
      << res.history.best_epoch << " (val F1 "
      << (res.history.best_epoch ? res.history.epochs[res.history.best_epoch - 1].val_f1 : 0.0) << ")\n";
}

inline void write_eval_outputs(const StagedDir& out, const RunConfig& cfg, const std::string& method,
                               const std::vector<NCInstance>& test, const std::vector<std::size_t>& pred,
                               const RelationInventory& inv, const std::string& suffix = "") {
  auto report = evaluate(pred, gold_indices(test, inv), inv.k());
  report.relations = inv.names();
  {
    auto f = open_out(out / ("predictions" + suffix + ".tsv"));
    write_predictions(f, test, pred, inv);
  }
  {
    auto f = open_out(out / ("report" + suffix + ".tsv"));
    write_report_tsv(f, report);
  }
  {
    auto f = open_out(out / ("confusion" + suffix + ".tsv"));
    write_confusion_tsv(f, report);
  }
  {
    auto f = open_out(out / ("report" + suffix + ".txt"));
    f << format_results_table({{dataset_name(cfg), cfg.str("split_kind"), method, report.weighted_f1}});
    f << "macro_f1=" << format_double(report.macro_f1) << " weighted_f1=" << format_double(report.weighted_f1)
      << " n=" << report.n << '\n';
  }
}

inline void cmd_eval(const RunConfig& cfg, std::ostream& log) {
  const auto ds = load_dataset(cfg.path("dataset"), cfg.level());
  const auto ws = workspace(cfg);
  const auto split = read_split(ws.split());
  const auto variant = parse_variant(cfg.str("variant"));
  const auto clf = Classifier::load(ws.classifier(to_string(variant)));
  const auto sources = load_sources(variant, cfg, ws);
  const auto test = build_inputs(clf.spec(), split.test, ds.inventory, sources.view());
  const auto pred = predict_all(clf, test.x, cfg.threads());
  StagedDir out(ws.eval(to_string(variant)));
  write_eval_outputs(out, cfg, to_string(variant), split.test, pred, ds.inventory);
  const auto report = evaluate(pred, test.gold, ds.inventory.k());
  write_manifest(out / "manifest.txt", "eval", cfg,
                 {"variant=" + std::string(to_string(variant)), "weighted_f1=" + format_double(report.weighted_f1),
                  "macro_f1=" + format_double(report.macro_f1), "n=" + std::to_string(report.n)});
  out.commit();
  log << "eval " << to_string(variant) << ": weighted F1 " << report.weighted_f1 << ", macro F1 " << report.macro_f1
      << " on " << report.n << " test NCs\n";
}

inline void cmd_baseline_freq(const RunConfig& cfg, std::ostream& log) {
  const auto ds = load_dataset(cfg.path("dataset"), cfg.level());
  const auto ws = workspace(cfg);
  const auto split = read_split(ws.split());
  StagedDir out(ws.root / "baseline_freq");
  std::vector<std::string> extra;
  double best = -1;
  std::string best_name;
  for (auto slot : {Slot::kHead, Slot::kMod}) {
    const std::string name = slot == Slot::kHead ? "head_freq" : "mod_freq";
    auto fb = FreqBaseline::fit(split.train, ds.inventory, slot, cfg.u64("seed"));
    std::vector<std::size_t> pred;
    for (const auto& nc : split.test) pred.push_back(fb.predict(nc));
    write_eval_outputs(out, cfg, name, split.test, pred, ds.inventory, "_" + name);
    const auto report = evaluate(pred, gold_indices(split.test, ds.inventory), ds.inventory.k());
    extra.push_back(name + "_weighted_f1=" + format_double(report.weighted_f1));
    extra.push_back(name + "_macro_f1=" + format_double(report.macro_f1));
    if (report.weighted_f1 > best) {
      best = report.weighted_f1;
      best_name = name;
    }
    log << "baseline " << name << ": weighted F1 " << report.weighted_f1 << "\n";
  }
  extra.push_back("best=" + best_name);
  extra.push_back("best_weighted_f1=" + format_double(best));
  write_manifest(out / "manifest.txt", "baseline-freq", cfg, extra);
  out.commit();
}

inline void cmd_analyze_paths(const RunConfig& cfg, std::ostream& log) {
  const auto ws = workspace(cfg);
  std::vector<std::string> relations;
  const auto enc = PathEncoder::load(ws.encoder(), &relations);
  const auto store = load_store(ws);
  const auto rows =
      indicative_paths(enc, store.distinct_paths(), relations, cfg.real("indicative_threshold"), cfg.threads());
  StagedDir out(ws.root / "analysis_paths");
  {
    auto f = open_out(out / "indicative_paths.tsv");
    write_indicative_tsv(f, rows);
  }
  write_manifest(out / "manifest.txt", "analyze-paths", cfg,
                 {"threshold=" + cfg.str("indicative_threshold"), "rows=" + std::to_string(rows.size())});
  out.commit();
  log << "analyze-paths: " << rows.size() << " indicative paths\n";
}

inline void cmd_analyze_neighbors(const RunConfig& cfg, std::ostream& log) {
  const auto ws = workspace(cfg);
  const auto split = read_split(ws.split());
  const auto table = load_vectors(cfg.path("nc_vectors"), cfg.size("max_vocab"), {OovPolicy::kError, 0, 0});
  std::vector<NCInstance> pool = split.train;
  pool.insert(pool.end(), split.validation.begin(), split.validation.end());
  pool.insert(pool.end(), split.test.begin(), split.test.end());
  const auto res = nc_neighbor_agreement(table, split.test, pool, cfg.size("neighbors_k"));
  StagedDir out(ws.root / "analysis_neighbors");
  {
    auto f = open_out(out / "nc_neighbors.tsv");
    write_neighbor_report(f, res);
  }
  write_manifest(out / "manifest.txt", "analyze-neighbors", cfg,
                 {"coverage=" + format_double(res.coverage), "fraction=" + format_double(res.fraction)});
  out.commit();
  log << "analyze-neighbors: coverage " << res.covered << "/" << res.queries << ", " << res.agreeing << "/"
      << res.covered << " NCs mostly similar to same-label NCs (" << res.fraction << ")\n";
}

// Returns kExitCheck when any component's error reaches the tolerance.
inline int cmd_grad_check(const RunConfig& cfg, std::ostream& log) {
  const double tol = cfg.real("grad_tolerance");
  const auto start = std::chrono::steady_clock::now();
  const auto entries = run_gradient_suite(cfg.u64("seed"));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  double worst = 0;
  for (const auto& e : entries) {
    log << e.name << "\tmax_rel_error=" << e.result.max_rel_error << "\t(" << e.result.checked << " coords, worst "
        << e.result.worst_param << "[" << e.result.worst_index << "])\n";
    worst = std::max(worst, e.result.max_rel_error);
  }
  log << "max relative error " << worst << " (tolerance " << tol << ", " << secs << " s)\n";
  return worst < tol ? kExitOk : kExitCheck;
}

}  // namespace detail

// Runs one pipeline command. Throws UsageError / DataError / CheckFailure.
inline int run_command(const std::string& command, const RunConfig& cfg, std::ostream& log = std::cerr) {
  cfg.validate();
  if (command == "split") detail::cmd_split(cfg, log);
  else if (command == "extract-paths") detail::cmd_extract_paths(cfg, log);
  else if (command == "rewrite-nc") detail::cmd_rewrite_nc(cfg, log);
  else if (command == "train-paths") detail::cmd_train_paths(cfg, log);
  else if (command == "export-paths") detail::cmd_export_paths(cfg, log);
  else if (command == "train") detail::cmd_train(cfg, log);
  else if (command == "eval") detail::cmd_eval(cfg, log);
  else if (command == "baseline-freq") detail::cmd_baseline_freq(cfg, log);
  else if (command == "analyze-paths") detail::cmd_analyze_paths(cfg, log);
  else if (command == "analyze-neighbors") detail::cmd_analyze_neighbors(cfg, log);
  else if (command == "grad-check") return detail::cmd_grad_check(cfg, log);
  else throw UsageError("unknown command '" + command + "'");
  return kExitOk;
}

// run_command with errors mapped to exit codes and reported on `log`.
inline int run_guarded(const std::string& command, const RunConfig& cfg, std::ostream& log = std::cerr) {
  try {
    return run_command(command, cfg, log);
  } catch (const UsageError& e) {
    log << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    log << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const CheckFailure& e) {
    log << "check failed: " << e.what() << '\n';
    return kExitCheck;
  } catch (const fs::filesystem_error& e) {
    log << "data error: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace ncrel
