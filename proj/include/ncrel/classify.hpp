#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "ncrel/corpus.hpp"
#include "ncrel/dataset.hpp"
#include "ncrel/embed.hpp"
#include "ncrel/error.hpp"
#include "ncrel/metrics.hpp"
#include "ncrel/neural.hpp"
#include "ncrel/pathenc.hpp"
#include "ncrel/training.hpp"

namespace ncrel {

enum class Variant { kPath, kDist, kDistNC, kIntegrated, kIntegratedNC };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::kPath: return "path";
    case Variant::kDist: return "dist";
    case Variant::kDistNC: return "dist_nc";
    case Variant::kIntegrated: return "integrated";
    case Variant::kIntegratedNC: return "integrated_nc";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  for (auto v : {Variant::kPath, Variant::kDist, Variant::kDistNC, Variant::kIntegrated, Variant::kIntegratedNC}) {
    if (s == to_string(v)) return v;
  }
  throw UsageError("unknown classifier variant '" + s + "'");
}

// Input layout [v_w1, v_w2, v_nc, v_P], keeping only the variant's parts.
struct InputSpec {
  Variant variant = Variant::kIntegrated;
  std::size_t d_word = 0;
  std::size_t d_nc = 0;
  std::size_t d_path = 0;

  bool uses_words() const { return variant != Variant::kPath; }
  bool uses_nc() const { return variant == Variant::kDistNC || variant == Variant::kIntegratedNC; }
  bool uses_paths() const {
    return variant == Variant::kPath || variant == Variant::kIntegrated || variant == Variant::kIntegratedNC;
  }

  std::size_t dim() const {
    return (uses_words() ? 2 * d_word : 0) + (uses_nc() ? d_nc : 0) + (uses_paths() ? d_path : 0);
  }
  std::size_t hidden_dim() const { return dim() / 2; }

  // Distributional slots subject to word dropout (never v_P).
  std::vector<SlotRange> dropout_slots() const {
    std::vector<SlotRange> s;
    if (uses_words()) {
      s.push_back({0, d_word});
      s.push_back({d_word, d_word});
    }
    if (uses_nc()) s.push_back({uses_words() ? 2 * d_word : 0, d_nc});
    return s;
  }
};

// Everything build_input may read. Tables a variant does not use may be null.
struct InputSources {
  const EmbeddingTable* words = nullptr;
  const EmbeddingTable* ncs = nullptr;
  const PathEmbeddingCache* path_cache = nullptr;
  const PathStore* store = nullptr;
};

// Frequency-weighted mean of the cached embeddings of the NC's paths; zero
// when the NC has no (cached) paths.
inline Vec path_average(const NCInstance& nc, const PathEmbeddingCache& cache, const PathStore& store) {
  Vec v(cache.dim, 0.0);
  double total = 0;
  for (const auto& pc : store.paths(nc.modifier, nc.head)) {
    const Vec* e = cache.find(pc.path);
    if (!e) continue;
    const double f = static_cast<double>(pc.count);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += f * (*e)[i];
    total += f;
  }
  if (total > 0) {
    for (auto& x : v) x /= total;
  }
  return v;
}

inline Vec build_input(const InputSpec& spec, const NCInstance& nc, const InputSources& src) {
  Vec x;
  x.reserve(spec.dim());
  auto append = [&x](std::span<const double> v) { x.insert(x.end(), v.begin(), v.end()); };
  if (spec.uses_words()) {
    if (!src.words) throw UsageError("variant " + std::string(to_string(spec.variant)) + " needs word vectors");
    append(src.words->lookup(nc.modifier));
    append(src.words->lookup(nc.head));
  }
  if (spec.uses_nc()) {
    if (!src.ncs) throw UsageError("variant " + std::string(to_string(spec.variant)) + " needs NC vectors");
    append(src.ncs->lookup(nc.token()));
  }
  if (spec.uses_paths()) {
    if (!src.path_cache || !src.store) {
      throw UsageError("variant " + std::string(to_string(spec.variant)) + " needs a path cache and store");
    }
    append(path_average(nc, *src.path_cache, *src.store));
  }
  if (x.size() != spec.dim()) throw DataError("input for " + nc.token() + " has the wrong dimension");
  return x;
}

inline InputSpec make_input_spec(Variant v, const InputSources& src) {
  InputSpec s;
  s.variant = v;
  if (src.words) s.d_word = src.words->dim();
  if (src.ncs) s.d_nc = src.ncs->dim();
  if (src.path_cache) s.d_path = src.path_cache->dim;
  if (s.dim() < 2) throw UsageError("classifier input must have at least 2 components");
  return s;
}

struct Prediction {
  Vec distribution;
  std::size_t relation = 0;
};

// x -> tanh hidden layer of floor(|x|/2) units -> softmax over k relations.
class Classifier {
 public:
  Classifier() = default;
  Classifier(InputSpec spec, std::size_t k)
      : spec_(spec),
        k_(k),
        hidden_("hidden", spec.dim(), spec.hidden_dim(), Activation::kTanh),
        output_("output", spec.hidden_dim(), k, Activation::kSoftmax) {
    if (spec.dim() < 2) throw UsageError("classifier input must have at least 2 components");
  }

  void init(Rng& rng) {
    hidden_.init(rng);
    output_.init(rng);
  }

  const InputSpec& spec() const { return spec_; }
  std::size_t k() const { return k_; }
  Dense& hidden() { return hidden_; }
  Dense& output() { return output_; }
  ParamList params() { return {&hidden_.W, &hidden_.b, &output_.W, &output_.b}; }

  Prediction classify(std::span<const double> x) const {
    if (x.size() != spec_.dim()) {
      throw DataError("classifier: input has " + std::to_string(x.size()) + " components, expected " +
                      std::to_string(spec_.dim()));
    }
    Prediction p;
    p.distribution = output_.forward(hidden_.forward(x).y).y;
    p.relation = argmax(p.distribution);
    return p;
  }

  // Cross-entropy loss; adds scale x gradient into the parameters.
  double loss_and_grad(std::span<const double> x, std::size_t gold, double scale = 1.0) {
    const auto h = hidden_.forward(x);
    const auto o = output_.forward(h.y);
    auto ce = cross_entropy(o.y, gold);
    for (auto& g : ce.grad) g *= scale;
    hidden_.backward(h, output_.backward(o, ce.grad));
    return ce.loss;
  }

  void save(const std::filesystem::path& dir, std::map<std::string, std::string> meta) {
    meta["model"] = "classifier";
    meta["variant"] = to_string(spec_.variant);
    meta["d_word"] = std::to_string(spec_.d_word);
    meta["d_nc"] = std::to_string(spec_.d_nc);
    meta["d_path"] = std::to_string(spec_.d_path);
    meta["input_dim"] = std::to_string(spec_.dim());
    meta["hidden_dim"] = std::to_string(spec_.hidden_dim());
    meta["k"] = std::to_string(k_);
    save_checkpoint(dir, params(), meta);
  }

  static Classifier load(const std::filesystem::path& dir) {
    const auto ck = load_checkpoint(dir);
    if (ck.get("model") != "classifier") throw DataError(dir.string() + " is not a classifier checkpoint");
    auto num = [&](const char* key) {
      std::size_t v = 0;
      if (!parse_int(ck.get(key), v)) throw DataError(std::string("bad checkpoint value for ") + key);
      return v;
    };
    InputSpec spec{parse_variant(ck.get("variant")), num("d_word"), num("d_nc"), num("d_path")};
    Classifier c(spec, num("k"));
    assign_params(ck, c.params());
    return c;
  }

 private:
  InputSpec spec_;
  std::size_t k_ = 0;
  Dense hidden_;
  Dense output_;
};

struct LabeledInputs {
  std::vector<Vec> x;
  std::vector<std::size_t> gold;
};

inline LabeledInputs build_inputs(const InputSpec& spec, const std::vector<NCInstance>& ncs,
                                  const RelationInventory& inv, const InputSources& src) {
  LabeledInputs out;
  out.x.reserve(ncs.size());
  for (const auto& nc : ncs) {
    out.x.push_back(build_input(spec, nc, src));
    out.gold.push_back(inv.index_of(nc.label));
  }
  return out;
}

inline std::vector<std::size_t> predict_all(const Classifier& c, const std::vector<Vec>& xs, unsigned threads = 1) {
  std::vector<std::size_t> out(xs.size());
  parallel_for(xs.size(), threads, [&](std::size_t i) { out[i] = c.classify(xs[i]).relation; });
  return out;
}

struct ClassifierTrainResult {
  Classifier classifier;
  History history;
};

namespace detail {

inline std::pair<double, double> classifier_loss_f1(const Classifier& c, const LabeledInputs& data) {
  if (data.x.empty()) return {0.0, 0.0};
  double loss = 0;
  std::vector<std::size_t> pred;
  pred.reserve(data.x.size());
  for (std::size_t i = 0; i < data.x.size(); ++i) {
    const auto p = c.classify(data.x[i]);
    loss += cross_entropy(p.distribution, data.gold[i]).loss;
    pred.push_back(p.relation);
  }
  return {loss / static_cast<double>(data.x.size()), evaluate(pred, data.gold, c.k()).weighted_f1};
}

}  // namespace detail

// Mini-batch Adam with word dropout on the distributional slots. After each
// epoch the weighted validation F1 is computed; training stops once it falls
// more than `f1_drop` below the best seen, and the best epoch's parameters
// are returned.
inline ClassifierTrainResult train_classifier(const InputSpec& spec, const LabeledInputs& train,
                                              const LabeledInputs& validation, std::size_t k,
                                              const TrainConfig& cfg) {
  if (train.x.empty()) throw DataError("classifier: empty training set");
  Rng rng(cfg.seed);
  ClassifierTrainResult res{Classifier(spec, k), {}};
  auto& clf = res.classifier;
  clf.init(rng);
  const auto params = clf.params();
  const auto slots = spec.dropout_slots();
  Adam adam(cfg.adam);
  EarlyStopping stopper(cfg.f1_drop);
  auto best = snapshot(params);

  res.history.initial_loss = detail::classifier_loss_f1(clf, train).first;
  std::vector<std::size_t> order(train.x.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Vec x;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      zero_grads(params);
      const double scale = 1.0 / static_cast<double>(end - start);
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t i = order[b];
        x = train.x[i];
        word_dropout(x, slots, cfg.word_dropout, rng, true);
        const double loss = clf.loss_and_grad(x, train.gold[i], scale);
        if (!std::isfinite(loss)) {
          throw CheckFailure("classifier: non-finite loss at epoch " + std::to_string(epoch) + ", training instance " +
                             std::to_string(i));
        }
      }
      adam.step(params);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    std::tie(rec.train_loss, rec.train_f1) = detail::classifier_loss_f1(clf, train);
    rec.val_f1 = validation.x.empty() ? rec.train_f1 : detail::classifier_loss_f1(clf, validation).second;
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

// Majority relation per head (or modifier) word of the training set.
// Unseen words draw a uniformly random relation from the baseline's own
// seeded stream; reset() rewinds that stream.
class FreqBaseline {
 public:
  FreqBaseline() = default;

  static FreqBaseline fit(const std::vector<NCInstance>& train, const RelationInventory& inv, Slot slot,
                          std::uint64_t seed) {
    if (train.empty()) throw DataError("frequency baseline: empty training set");
    FreqBaseline fb;
    fb.slot_ = slot;
    fb.k_ = inv.k();
    fb.seed_ = seed;
    fb.rng_.reseed(seed);
    std::map<std::string, std::vector<std::size_t>> counts;
    for (const auto& nc : train) {
      auto& c = counts[fb.word(nc)];
      c.resize(inv.k(), 0);
      ++c[inv.index_of(nc.label)];
    }
    // Inventory order is lexicographic, so the first maximum is the
    // lexicographically smallest relation among ties.
    for (const auto& [w, c] : counts) {
      fb.majority_[w] = static_cast<std::size_t>(std::max_element(c.begin(), c.end()) - c.begin());
    }
    return fb;
  }

  std::size_t predict(const NCInstance& nc) {
    auto it = majority_.find(word(nc));
    if (it != majority_.end()) return it->second;
    return static_cast<std::size_t>(rng_.below(k_));
  }

  bool seen(const NCInstance& nc) const { return majority_.count(word(nc)) != 0; }
  void reset() { rng_.reseed(seed_); }
  Slot slot() const { return slot_; }
  const std::map<std::string, std::size_t>& majority() const { return majority_; }

 private:
  const std::string& word(const NCInstance& nc) const { return slot_ == Slot::kHead ? nc.head : nc.modifier; }

  Slot slot_ = Slot::kHead;
  std::size_t k_ = 0;
  std::uint64_t seed_ = 0;
  Rng rng_;
  std::map<std::string, std::size_t> majority_;
};

}  // namespace ncrel
