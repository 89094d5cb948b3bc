#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ncrel/corpus.hpp"
#include "ncrel/dataset.hpp"
#include "ncrel/embed.hpp"
#include "ncrel/error.hpp"
#include "ncrel/metrics.hpp"
#include "ncrel/neural.hpp"
#include "ncrel/training.hpp"
#include "ncrel/util.hpp"

namespace ncrel {

inline const std::string kUnknown = "<UNK>";

// String -> dense index map; index 0 is the unknown entry.
class Vocabulary {
 public:
  Vocabulary() { add(kUnknown); }

  std::size_t add(const std::string& s) {
    auto [it, inserted] = index_.try_emplace(s, items_.size());
    if (inserted) items_.push_back(s);
    return it->second;
  }

  std::size_t index_of(const std::string& s) const {
    auto it = index_.find(s);
    return it == index_.end() ? 0 : it->second;
  }

  bool contains(const std::string& s) const { return index_.count(s) != 0; }
  std::size_t size() const { return items_.size(); }
  const std::vector<std::string>& items() const { return items_; }

  bool operator==(const Vocabulary& o) const { return items_ == o.items_; }

 private:
  std::vector<std::string> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct EdgeVocabularies {
  Vocabulary lemma, pos, dep, dir;

  EdgeVocabularies() {
    lemma.add(kSlotX);
    lemma.add(kSlotY);
    for (auto d : {Direction::kUp, Direction::kDown, Direction::kEnd, Direction::kSatLeft, Direction::kSatRight}) {
      dir.add(to_string(d));
    }
  }

  void add(const DependencyPath& p) {
    for (const auto& n : p.nodes) {
      lemma.add(n.lemma);
      pos.add(n.pos);
      dep.add(n.dep);
    }
  }

  // Vocabularies over every distinct path of the store, in sorted path order.
  static EdgeVocabularies from_store(const PathStore& store) {
    EdgeVocabularies v;
    for (const auto& p : store.distinct_paths()) v.add(parse_path(p));
    return v;
  }

  bool operator==(const EdgeVocabularies&) const = default;
};

struct EncoderDims {
  std::size_t lemma = 50;
  std::size_t pos = 4;
  std::size_t dep = 5;
  std::size_t dir = 1;
  std::size_t path = 60;

  std::size_t edge() const { return lemma + pos + dep + dir; }
};

// A path with its corpus frequency for one noun compound.
struct WeightedPath {
  DependencyPath path;
  double freq = 1;
};

struct PooledPrediction {
  Vec distribution;              // frequency-weighted mean of per-path softmaxes
  std::size_t relation = 0;      // argmax, lowest index on ties
  std::vector<Vec> per_path;     // softmax of each path's projected embedding
};

// LSTM path encoder with a k-way projection used for distant supervision.
class PathEncoder {
 public:
  PathEncoder() = default;

  PathEncoder(EdgeVocabularies vocab, EncoderDims dims, std::size_t k)
      : vocab_(std::move(vocab)),
        dims_(dims),
        k_(k),
        lemma_("emb.lemma", {vocab_.lemma.size(), dims.lemma}),
        pos_("emb.pos", {vocab_.pos.size(), dims.pos}),
        dep_("emb.dep", {vocab_.dep.size(), dims.dep}),
        dir_("emb.dir", {vocab_.dir.size(), dims.dir}),
        lstm_("lstm", dims.edge(), dims.path),
        out_("proj", dims.path, k, Activation::kIdentity) {
    if (dims.path == 0) throw UsageError("path embedding dimension must be >= 1");
    if (k == 0) throw UsageError("path encoder needs at least one relation");
  }

  // Random init; lemma rows with a pretrained vector of matching width copy it.
  void init(Rng& rng, const EmbeddingTable* pretrained_lemmas = nullptr) {
    init_uniform(lemma_.value, 0.1, rng);
    init_uniform(pos_.value, 0.1, rng);
    init_uniform(dep_.value, 0.1, rng);
    init_uniform(dir_.value, 0.1, rng);
    lstm_.init(rng);
    out_.init(rng);
    if (pretrained_lemmas && pretrained_lemmas->dim() == dims_.lemma) {
      for (std::size_t i = 0; i < vocab_.lemma.size(); ++i) {
        const auto& w = vocab_.lemma.items()[i];
        if (!pretrained_lemmas->contains(w)) continue;
        const auto v = pretrained_lemmas->lookup(w);
        std::copy(v.begin(), v.end(), lemma_.value.row(i).begin());
      }
    }
  }

  const EncoderDims& dims() const { return dims_; }
  const EdgeVocabularies& vocab() const { return vocab_; }
  std::size_t k() const { return k_; }
  Lstm& lstm() { return lstm_; }
  Dense& projection() { return out_; }
  Param& lemma_table() { return lemma_; }

  ParamList params() { return {&lemma_, &pos_, &dep_, &dir_, &lstm_.W, &lstm_.U, &lstm_.b, &out_.W, &out_.b}; }

  // [v_lemma; v_pos; v_dep; v_dir]
  Vec encode_edge(const PathNode& n) const {
    Vec v;
    v.reserve(dims_.edge());
    auto append = [&v](const Param& table, std::size_t row) {
      const auto r = table.value.row(row);
      v.insert(v.end(), r.begin(), r.end());
    };
    append(lemma_, vocab_.lemma.index_of(n.lemma));
    append(pos_, vocab_.pos.index_of(n.pos));
    append(dep_, vocab_.dep.index_of(n.dep));
    append(dir_, vocab_.dir.index_of(to_string(n.dir)));
    return v;
  }

  Vec embed(const DependencyPath& p) const { return lstm_.forward(edge_sequence(p)).back().h; }

  // softmax(W_o p + b) for a single path.
  Vec path_distribution(const DependencyPath& p) const { return softmax(out_.forward(embed(p)).y); }

  PooledPrediction pooled_prediction(const std::vector<WeightedPath>& paths) const {
    const double total = check_weights(paths);
    PooledPrediction r;
    r.distribution.assign(k_, 0.0);
    for (const auto& wp : paths) {
      r.per_path.push_back(path_distribution(wp.path));
      const double w = wp.freq / total;
      for (std::size_t c = 0; c < k_; ++c) r.distribution[c] += w * r.per_path.back()[c];
    }
    r.relation = argmax(r.distribution);
    return r;
  }

  // Cross-entropy of the pooled distribution against `gold`. Adds
  // `scale` x the gradient into every parameter's grad.
  double loss_and_grad(const std::vector<WeightedPath>& paths, std::size_t gold, double scale = 1.0) {
    const double total = check_weights(paths);
    struct PathTrace {
      Lstm::Trace lstm;
      Dense::Trace proj;
      Vec probs;
    };
    std::vector<PathTrace> traces;
    traces.reserve(paths.size());
    Vec o(k_, 0.0);
    for (const auto& wp : paths) {
      PathTrace t;
      t.lstm = lstm_.forward(edge_sequence(wp.path));
      t.proj = out_.forward(t.lstm.back().h);
      t.probs = softmax(t.proj.y);
      const double w = wp.freq / total;
      for (std::size_t c = 0; c < k_; ++c) o[c] += w * t.probs[c];
      traces.push_back(std::move(t));
    }
    const auto ce = cross_entropy(o, gold);
    for (std::size_t n = 0; n < paths.size(); ++n) {
      const double w = scale * paths[n].freq / total;
      Vec ds(k_);
      for (std::size_t c = 0; c < k_; ++c) ds[c] = w * ce.grad[c];
      const Vec dz = softmax_backward(traces[n].probs, ds);
      const Vec dp = out_.backward(traces[n].proj, dz);
      const auto dxs = lstm_.backward(traces[n].lstm, dp);
      scatter_edge_grads(paths[n].path, dxs);
    }
    return ce.loss;
  }

  // Gradient of ||p||^2 for one path (used to check the embedding tables).
  double squared_norm_and_grad(const DependencyPath& p) {
    const auto trace = lstm_.forward(edge_sequence(p));
    const auto& h = trace.back().h;
    Vec dh(h.size());
    double loss = 0;
    for (std::size_t i = 0; i < h.size(); ++i) {
      loss += h[i] * h[i];
      dh[i] = 2 * h[i];
    }
    scatter_edge_grads(p, lstm_.backward(trace, dh));
    return loss;
  }

  void save(const std::filesystem::path& dir, std::map<std::string, std::string> meta,
            const std::vector<std::string>& relations) {
    meta["model"] = "path_encoder";
    meta["d_lemma"] = std::to_string(dims_.lemma);
    meta["d_pos"] = std::to_string(dims_.pos);
    meta["d_dep"] = std::to_string(dims_.dep);
    meta["d_dir"] = std::to_string(dims_.dir);
    meta["d_path"] = std::to_string(dims_.path);
    meta["k"] = std::to_string(k_);
    save_checkpoint(dir, params(), meta);
    auto dump = [&](const char* name, const std::vector<std::string>& items) {
      std::ofstream out(dir / name, std::ios::binary);
      for (const auto& s : items) out << s << '\n';
    };
    dump("vocab.lemma.txt", vocab_.lemma.items());
    dump("vocab.pos.txt", vocab_.pos.items());
    dump("vocab.dep.txt", vocab_.dep.items());
    dump("vocab.dir.txt", vocab_.dir.items());
    dump("relations.txt", relations);
  }

  static PathEncoder load(const std::filesystem::path& dir, std::vector<std::string>* relations = nullptr) {
    const auto ck = load_checkpoint(dir);
    if (ck.get("model") != "path_encoder") throw DataError(dir.string() + " is not a path encoder checkpoint");
    auto num = [&](const char* key) {
      std::size_t v = 0;
      if (!parse_int(ck.get(key), v)) throw DataError(std::string("bad checkpoint value for ") + key);
      return v;
    };
    EncoderDims dims{num("d_lemma"), num("d_pos"), num("d_dep"), num("d_dir"), num("d_path")};
    EdgeVocabularies vocab;
    auto fill = [&](const char* name, Vocabulary& v) {
      std::ifstream in(dir / name);
      if (!in) throw DataError("missing " + (dir / name).string());
      std::string line;
      while (std::getline(in, line)) v.add(line);
    };
    fill("vocab.lemma.txt", vocab.lemma);
    fill("vocab.pos.txt", vocab.pos);
    fill("vocab.dep.txt", vocab.dep);
    fill("vocab.dir.txt", vocab.dir);
    PathEncoder enc(std::move(vocab), dims, num("k"));
    assign_params(ck, enc.params());
    if (relations) {
      relations->clear();
      std::ifstream in(dir / "relations.txt");
      std::string line;
      while (std::getline(in, line)) relations->push_back(line);
    }
    return enc;
  }

 private:
  static double check_weights(const std::vector<WeightedPath>& paths) {
    if (paths.empty()) throw DataError("pooled prediction needs at least one path");
    double total = 0;
    for (const auto& wp : paths) {
      if (!(wp.freq > 0)) throw DataError("path frequencies must be positive");
      total += wp.freq;
    }
    return total;
  }

  std::vector<Vec> edge_sequence(const DependencyPath& p) const {
    if (p.nodes.empty()) throw DataError("cannot embed an empty path");
    std::vector<Vec> xs;
    xs.reserve(p.nodes.size());
    for (const auto& n : p.nodes) xs.push_back(encode_edge(n));
    return xs;
  }

  void scatter_edge_grads(const DependencyPath& p, const std::vector<Vec>& dxs) {
    for (std::size_t t = 0; t < p.nodes.size(); ++t) {
      const auto& n = p.nodes[t];
      const auto& dx = dxs[t];
      std::size_t off = 0;
      auto add = [&](Param& table, std::size_t row, std::size_t width) {
        auto g = table.grad.row(row);
        for (std::size_t i = 0; i < width; ++i) g[i] += dx[off + i];
        off += width;
      };
      add(lemma_, vocab_.lemma.index_of(n.lemma), dims_.lemma);
      add(pos_, vocab_.pos.index_of(n.pos), dims_.pos);
      add(dep_, vocab_.dep.index_of(n.dep), dims_.dep);
      add(dir_, vocab_.dir.index_of(to_string(n.dir)), dims_.dir);
    }
  }

  EdgeVocabularies vocab_;
  EncoderDims dims_;
  std::size_t k_ = 0;
  Param lemma_, pos_, dep_, dir_;
  Lstm lstm_;
  Dense out_;
};

// The paths of one NC, parsed, with frequencies.
inline std::vector<WeightedPath> weighted_paths(const std::vector<PathCount>& list) {
  std::vector<WeightedPath> out;
  out.reserve(list.size());
  for (const auto& pc : list) out.push_back({parse_path(pc.path), static_cast<double>(pc.count)});
  return out;
}

struct EncoderTrainResult {
  PathEncoder encoder;
  History history;
};

namespace detail {

struct EncoderExample {
  std::vector<WeightedPath> paths;
  std::size_t gold = 0;
};

inline std::vector<EncoderExample> encoder_examples(const std::vector<NCInstance>& ncs, const PathStore& store,
                                                    const RelationInventory& inv, bool require_paths) {
  std::vector<EncoderExample> out;
  std::vector<std::string> missing;
  for (const auto& nc : ncs) {
    const auto& list = store.paths(nc.modifier, nc.head);
    if (list.empty()) {
      missing.push_back(nc.modifier + " " + nc.head);
      continue;
    }
    out.push_back({weighted_paths(list), inv.index_of(nc.label)});
  }
  if (require_paths && !missing.empty()) {
    std::string msg = "training noun compounds without paths:";
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg += " [" + missing[i] + "]";
    if (missing.size() > 20) msg += " ... (" + std::to_string(missing.size()) + " total)";
    throw DataError(msg);
  }
  return out;
}

inline std::pair<double, double> encoder_loss_f1(const PathEncoder& enc, const std::vector<EncoderExample>& data,
                                                 std::size_t k) {
  if (data.empty()) return {0.0, 0.0};
  std::vector<std::size_t> pred, gold;
  double loss = 0;
  for (const auto& ex : data) {
    const auto r = enc.pooled_prediction(ex.paths);
    loss += cross_entropy(r.distribution, ex.gold).loss;
    pred.push_back(r.relation);
    gold.push_back(ex.gold);
  }
  return {loss / static_cast<double>(data.size()), evaluate(pred, gold, k).weighted_f1};
}

// Training-time copy with each non-endpoint lemma replaced by <UNK> with
// probability p.
inline std::vector<WeightedPath> drop_lemmas(std::vector<WeightedPath> paths, double p, Rng& rng) {
  for (auto& wp : paths) {
    for (auto& n : wp.path.nodes) {
      if (n.lemma != kSlotX && n.lemma != kSlotY && rng.bernoulli(p)) n.lemma = kUnknown;
    }
  }
  return paths;
}

}  // namespace detail

// Distant supervision: each NC's pooled path prediction is trained against
// its relation label. Mini-batch Adam on the mean batch loss; validation F1
// (weighted) drives early stopping and best-epoch selection. NCs of the
// validation set without paths are ignored.
inline EncoderTrainResult train_path_encoder(const PathStore& store, const std::vector<NCInstance>& train,
                                             const std::vector<NCInstance>& validation,
                                             const RelationInventory& inventory, const TrainConfig& cfg,
                                             EncoderDims dims = {}, const EmbeddingTable* pretrained_lemmas = nullptr) {
  const auto train_ex = detail::encoder_examples(train, store, inventory, true);
  const auto val_ex = detail::encoder_examples(validation, store, inventory, false);
  if (train_ex.empty()) throw DataError("path encoder: empty training set");

  Rng rng(cfg.seed);
  EncoderTrainResult res{PathEncoder(EdgeVocabularies::from_store(store), dims, inventory.k()), {}};
  auto& enc = res.encoder;
  enc.init(rng, pretrained_lemmas);
  const auto params = enc.params();
  Adam adam(cfg.adam);
  EarlyStopping stopper(cfg.f1_drop);
  auto best = snapshot(params);

  res.history.initial_loss = detail::encoder_loss_f1(enc, train_ex, inventory.k()).first;
  std::vector<std::size_t> order(train_ex.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      zero_grads(params);
      const double scale = 1.0 / static_cast<double>(end - start);
      for (std::size_t b = start; b < end; ++b) {
        const auto& ex = train_ex[order[b]];
        const double loss = cfg.encoder_word_dropout && cfg.word_dropout > 0
                                ? enc.loss_and_grad(detail::drop_lemmas(ex.paths, cfg.word_dropout, rng), ex.gold, scale)
                                : enc.loss_and_grad(ex.paths, ex.gold, scale);
        if (!std::isfinite(loss)) throw CheckFailure("path encoder: non-finite loss in epoch " + std::to_string(epoch));
      }
      adam.step(params);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    std::tie(rec.train_loss, rec.train_f1) = detail::encoder_loss_f1(enc, train_ex, inventory.k());
    rec.val_f1 = val_ex.empty() ? rec.train_f1 : detail::encoder_loss_f1(enc, val_ex, inventory.k()).second;
    res.history.epochs.push_back(rec);
    const bool stop = stopper.update(rec.val_f1);
    if (stopper.improved()) best = snapshot(params);
    if (stop) {
      res.history.stopped_early = true;
      break;
    }
  }
  res.history.best_epoch = stopper.best_epoch();
  restore(params, best);
  return res;
}

// Frozen path embeddings keyed by serialized path.
struct PathEmbeddingCache {
  std::size_t dim = 0;
  std::map<std::string, Vec> vectors;

  const Vec* find(const std::string& path) const {
    auto it = vectors.find(path);
    return it == vectors.end() ? nullptr : &it->second;
  }
  bool operator==(const PathEmbeddingCache&) const = default;
};

inline PathEmbeddingCache export_path_embeddings(const PathEncoder& enc, const std::vector<std::string>& paths,
                                                 unsigned threads = 1) {
  PathEmbeddingCache cache;
  cache.dim = enc.dims().path;
  std::vector<Vec> out(paths.size());
  parallel_for(paths.size(), threads, [&](std::size_t i) { out[i] = enc.embed(parse_path(paths[i])); });
  for (std::size_t i = 0; i < paths.size(); ++i) cache.vectors[paths[i]] = std::move(out[i]);
  return cache;
}

inline PathEmbeddingCache export_path_embeddings(const PathEncoder& enc, const PathStore& store,
                                                 unsigned threads = 1) {
  return export_path_embeddings(enc, store.distinct_paths(), threads);
}

// Header `# d_path=<d> count=<n> encoder=<hash>`, then `path<TAB>v1 v2 ...`.
inline void write_path_cache(std::ostream& out, const PathEmbeddingCache& cache, const std::string& encoder_hash) {
  out << "# d_path=" << cache.dim << " count=" << cache.vectors.size() << " encoder=" << encoder_hash << '\n';
  for (const auto& [path, v] : cache.vectors) {
    out << path << '\t';
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out << ' ';
      out << format_double(v[i]);
    }
    out << '\n';
  }
}

inline PathEmbeddingCache read_path_cache(std::istream& in, std::string* encoder_hash = nullptr) {
  PathEmbeddingCache cache;
  std::string line;
  std::size_t lineno = 0, expected = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto view = trim_eol(line);
    if (view.empty()) continue;
    if (view.front() == '#') {
      for (auto field : split_ws(view.substr(1))) {
        const auto kv = split(field, '=');
        if (kv.size() != 2) continue;
        if (kv[0] == "d_path") parse_int(kv[1], cache.dim);
        if (kv[0] == "count") parse_int(kv[1], expected);
        if (kv[0] == "encoder" && encoder_hash) *encoder_hash = std::string(kv[1]);
      }
      continue;
    }
    const auto tab = view.find('\t');
    if (tab == std::string_view::npos) throw DataError("path cache line " + std::to_string(lineno) + ": missing tab");
    Vec v;
    for (auto tok : split_ws(view.substr(tab + 1))) {
      double x = 0;
      if (!parse_double(tok, x)) throw DataError("path cache line " + std::to_string(lineno) + ": bad number");
      v.push_back(x);
    }
    if (v.size() != cache.dim) throw DataError("path cache line " + std::to_string(lineno) + ": wrong dimension");
    cache.vectors[std::string(view.substr(0, tab))] = std::move(v);
  }
  if (cache.vectors.size() != expected) throw DataError("path cache: count in header does not match rows");
  return cache;
}

// Hash of an encoder checkpoint directory including its vocabularies.
inline std::string encoder_hash(const std::filesystem::path& dir) {
  std::uint64_t h = fnv1a(checkpoint_hash(dir));
  for (const char* name : {"vocab.lemma.txt", "vocab.pos.txt", "vocab.dep.txt", "vocab.dir.txt", "relations.txt"}) {
    h = fnv1a(detail::read_file(dir / name), h);
  }
  return hex64(h);
}

}  // namespace ncrel
