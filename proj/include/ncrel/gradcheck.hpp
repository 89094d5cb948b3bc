#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ncrel/classify.hpp"
#include "ncrel/corpus.hpp"
#include "ncrel/neural.hpp"
#include "ncrel/pathenc.hpp"
#include "ncrel/util.hpp"

namespace ncrel {

struct GradCheckEntry {
  std::string name;
  GradCheckResult result;
};

// Zeroes grads, runs `analytic` to fill them, then compares against
// central differences of `loss`.
inline GradCheckResult check_gradients(const ParamList& params, const std::function<void()>& analytic,
                                       const std::function<double()>& loss, const GradCheckOptions& opt = {}) {
  zero_grads(params);
  analytic();
  return grad_check(loss, params, opt);
}

namespace detail {

inline Vec random_vec(std::size_t n, Rng& rng, double scale = 1.0) {
  Vec v(n);
  for (auto& x : v) x = rng.uniform(-scale, scale);
  return v;
}

// Random toy paths over a tiny vocabulary, with <X>/<Y> endpoints.
inline DependencyPath random_path(Rng& rng, std::size_t max_core = 4) {
  static const char* kLemmas[] = {"of", "in", "contain", "make", "for"};
  static const char* kPos[] = {"NOUN", "ADP", "VERB"};
  static const char* kDeps[] = {"prep", "pobj", "nsubj", "dobj"};
  const std::size_t core = 2 + rng.below(max_core - 1);
  DependencyPath p;
  for (std::size_t i = 0; i < core; ++i) {
    PathNode n;
    n.lemma = i == 0 ? kSlotX : (i + 1 == core ? kSlotY : kLemmas[rng.below(5)]);
    n.pos = kPos[rng.below(3)];
    n.dep = kDeps[rng.below(4)];
    n.dir = i + 1 == core ? Direction::kEnd : (rng.bernoulli(0.5) ? Direction::kUp : Direction::kDown);
    p.nodes.push_back(n);
  }
  if (rng.bernoulli(0.3)) p.nodes.insert(p.nodes.begin(), {"the", "DET", "det", Direction::kSatLeft});
  return p;
}

inline PathEncoder toy_encoder(Rng& rng, std::size_t k = 3) {
  EdgeVocabularies vocab;
  for (int i = 0; i < 20; ++i) vocab.add(random_path(rng));
  PathEncoder enc(vocab, EncoderDims{3, 2, 2, 1, 4}, k);
  enc.init(rng);
  return enc;
}

}  // namespace detail

// Every differentiable component and composed model at float64: dense
// layers, LSTM, single-path embedding, the pooled distant-supervision loss
// on 1/2/5-path instances, and all classifier variants.
inline std::vector<GradCheckEntry> run_gradient_suite(std::uint64_t seed = 7) {
  std::vector<GradCheckEntry> out;
  Rng rng(seed);

  for (auto act : {Activation::kIdentity, Activation::kTanh, Activation::kSoftmax}) {
    Dense layer("dense", 5, 3, act);
    layer.init(rng);
    init_uniform(layer.b.value, 0.5, rng);
    Param x("x", {5});
    x.value.data = detail::random_vec(5, rng);
    const Vec c = detail::random_vec(3, rng);
    auto params = layer.params();
    params.push_back(&x);
    auto loss = [&] {
      const auto y = layer.forward(x.value.data).y;
      return act == Activation::kSoftmax ? cross_entropy(y, 1).loss : dot(y, c);
    };
    auto analytic = [&] {
      const auto t = layer.forward(x.value.data);
      const Vec dy = act == Activation::kSoftmax ? cross_entropy(t.y, 1).grad : c;
      const Vec dx = layer.backward(t, dy);
      for (std::size_t i = 0; i < dx.size(); ++i) x.grad.data[i] += dx[i];
    };
    const char* name = act == Activation::kIdentity ? "dense/identity" : (act == Activation::kTanh ? "dense/tanh" : "dense/softmax+xent");
    out.push_back({name, check_gradients(params, analytic, loss)});
  }

  {
    Lstm lstm("lstm", 4, 3);
    lstm.init(rng);
    init_uniform(lstm.b.value, 0.5, rng);
    std::vector<Param> xs;
    for (int t = 0; t < 3; ++t) {
      xs.emplace_back("x" + std::to_string(t), std::vector<std::size_t>{4});
      xs.back().value.data = detail::random_vec(4, rng);
    }
    const Vec c = detail::random_vec(3, rng);
    auto params = lstm.params();
    for (auto& x : xs) params.push_back(&x);
    auto inputs = [&] {
      std::vector<Vec> v;
      for (auto& x : xs) v.push_back(x.value.data);
      return v;
    };
    auto loss = [&] { return dot(lstm.forward(inputs()).back().h, c); };
    auto analytic = [&] {
      const auto trace = lstm.forward(inputs());
      const auto dxs = lstm.backward(trace, c);
      for (std::size_t t = 0; t < xs.size(); ++t) {
        for (std::size_t i = 0; i < 4; ++i) xs[t].grad.data[i] += dxs[t][i];
      }
    };
    out.push_back({"lstm/3-step", check_gradients(params, analytic, loss)});
  }

  {
    auto enc = detail::toy_encoder(rng);
    const auto path = detail::random_path(rng);
    auto loss = [&] {
      const auto p = enc.embed(path);
      return dot(p, p);
    };
    out.push_back({"path_embedding/squared_norm",
                   check_gradients(enc.params(), [&] { enc.squared_norm_and_grad(path); }, loss)});
  }

  for (std::size_t n_paths : {1u, 2u, 5u}) {
    auto enc = detail::toy_encoder(rng);
    std::vector<WeightedPath> paths;
    for (std::size_t i = 0; i < n_paths; ++i) paths.push_back({detail::random_path(rng), 1.0 + static_cast<double>(rng.below(5))});
    const std::size_t gold = rng.below(enc.k());
    auto loss = [&] { return cross_entropy(enc.pooled_prediction(paths).distribution, gold).loss; };
    out.push_back({"pooled_loss/" + std::to_string(n_paths) + "-path",
                   check_gradients(enc.params(), [&] { enc.loss_and_grad(paths, gold); }, loss)});
  }

  for (auto v : {Variant::kPath, Variant::kDist, Variant::kDistNC, Variant::kIntegrated, Variant::kIntegratedNC}) {
    InputSpec spec{v, 3, 2, 4};
    Classifier clf(spec, 3);
    clf.init(rng);
    const Vec x = detail::random_vec(spec.dim(), rng);
    const std::size_t gold = rng.below(3);
    auto loss = [&] { return cross_entropy(clf.classify(x).distribution, gold).loss; };
    out.push_back({std::string("classifier/") + to_string(v),
                   check_gradients(clf.params(), [&] { clf.loss_and_grad(x, gold); }, loss)});
  }
  return out;
}

}  // namespace ncrel
