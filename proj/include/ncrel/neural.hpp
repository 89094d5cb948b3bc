#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ncrel/error.hpp"
#include "ncrel/util.hpp"

namespace ncrel {

using Vec = std::vector<double>;

// Dense row-major array. 1-D tensors are treated as column vectors.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
    data.assign(std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>()), 0.0);
  }

  std::size_t size() const { return data.size(); }
  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols(), cols()}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols(), cols()}; }

  void zero() { std::fill(data.begin(), data.end(), 0.0); }
  bool operator==(const Tensor&) const = default;
};

// A trainable tensor and its gradient accumulator.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;

  Param() = default;
  Param(std::string n, std::vector<std::size_t> shape) : name(std::move(n)), value(shape), grad(std::move(shape)) {}
};

using ParamList = std::vector<Param*>;

inline void zero_grads(const ParamList& params) {
  for (auto* p : params) p->grad.zero();
}

inline void init_uniform(Tensor& t, double scale, Rng& rng) {
  for (auto& x : t.data) x = rng.uniform(-scale, scale);
}

// Glorot/Xavier uniform for a fan_in -> fan_out map.
inline void init_glorot(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  init_uniform(t, std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)), rng);
}

// y = W x + b
inline void affine(const Tensor& W, const Tensor& b, std::span<const double> x, std::span<double> y) {
  for (std::size_t r = 0; r < W.rows(); ++r) {
    double s = b.data[r];
    const auto w = W.row(r);
    for (std::size_t c = 0; c < x.size(); ++c) s += w[c] * x[c];
    y[r] = s;
  }
}

// dW += dy x^T, db += dy, dx += W^T dy (dx may be empty).
inline void affine_backward(const Tensor& W, std::span<const double> x, std::span<const double> dy, Tensor& dW,
                            Tensor* db, std::span<double> dx) {
  for (std::size_t r = 0; r < W.rows(); ++r) {
    const double g = dy[r];
    if (g == 0) continue;
    auto gw = dW.row(r);
    for (std::size_t c = 0; c < x.size(); ++c) gw[c] += g * x[c];
    if (db) db->data[r] += g;
    if (!dx.empty()) {
      const auto w = W.row(r);
      for (std::size_t c = 0; c < dx.size(); ++c) dx[c] += w[c] * g;
    }
  }
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Vec softmax(std::span<const double> z) {
  Vec s(z.begin(), z.end());
  if (s.empty()) return s;
  const double m = *std::max_element(s.begin(), s.end());
  double sum = 0;
  for (auto& v : s) {
    v = std::exp(v - m);
    sum += v;
  }
  for (auto& v : s) v /= sum;
  return s;
}

// dz for s = softmax(z) given ds.
inline Vec softmax_backward(std::span<const double> s, std::span<const double> ds) {
  double inner = 0;
  for (std::size_t i = 0; i < s.size(); ++i) inner += s[i] * ds[i];
  Vec dz(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) dz[i] = s[i] * (ds[i] - inner);
  return dz;
}

// Lowest index wins ties.
inline std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

struct LossGrad {
  double loss = 0;
  Vec grad;  // d loss / d o
};

inline constexpr double kProbFloor = 1e-12;

// -log o[gold], with o clamped away from zero.
inline LossGrad cross_entropy(std::span<const double> o, std::size_t gold) {
  if (gold >= o.size()) {
    throw UsageError("cross_entropy: gold index " + std::to_string(gold) + " out of range " + std::to_string(o.size()));
  }
  LossGrad r;
  const double p = std::max(o[gold], kProbFloor);
  r.loss = -std::log(p);
  r.grad.assign(o.size(), 0.0);
  r.grad[gold] = o[gold] > kProbFloor ? -1.0 / p : 0.0;
  return r;
}

enum class Activation { kIdentity, kTanh, kSoftmax };

// Fully connected layer y = act(W x + b), W: out x in.
struct Dense {
  Param W;
  Param b;
  Activation act = Activation::kIdentity;

  struct Trace {
    Vec x;
    Vec y;
  };

  Dense() = default;
  Dense(const std::string& name, std::size_t in, std::size_t out, Activation a)
      : W(name + ".W", {out, in}), b(name + ".b", {out}), act(a) {}

  std::size_t in_dim() const { return W.value.cols(); }
  std::size_t out_dim() const { return W.value.rows(); }

  void init(Rng& rng) {
    init_glorot(W.value, in_dim(), out_dim(), rng);
    b.value.zero();
  }

  Trace forward(std::span<const double> x) const {
    if (x.size() != in_dim()) {
      throw DataError("dense '" + W.name + "': input has " + std::to_string(x.size()) + " components, expected " +
                      std::to_string(in_dim()));
    }
    Trace t;
    t.x.assign(x.begin(), x.end());
    t.y.resize(out_dim());
    affine(W.value, b.value, x, t.y);
    switch (act) {
      case Activation::kIdentity: break;
      case Activation::kTanh:
        for (auto& v : t.y) v = std::tanh(v);
        break;
      case Activation::kSoftmax: t.y = softmax(t.y); break;
    }
    return t;
  }

  // Accumulates dW, db; returns dx.
  Vec backward(const Trace& t, std::span<const double> dy) {
    if (dy.size() != out_dim()) throw DataError("dense '" + W.name + "': gradient shape mismatch");
    Vec dz(dy.begin(), dy.end());
    switch (act) {
      case Activation::kIdentity: break;
      case Activation::kTanh:
        for (std::size_t i = 0; i < dz.size(); ++i) dz[i] *= 1.0 - t.y[i] * t.y[i];
        break;
      case Activation::kSoftmax: dz = softmax_backward(t.y, dy); break;
    }
    Vec dx(in_dim(), 0.0);
    affine_backward(W.value, t.x, dz, W.grad, &b.grad, dx);
    return dx;
  }

  ParamList params() { return {&W, &b}; }
};

// Standard LSTM: gates [input, forget, output, candidate] stacked in 4H rows;
// sigmoid gates, tanh candidate and cell output, h0 = c0 = 0.
struct Lstm {
  Param W;  // 4H x D
  Param U;  // 4H x H
  Param b;  // 4H

  struct Step {
    Vec x, h_prev, c_prev;
    Vec i, f, o, g, c, tanh_c, h;
  };
  using Trace = std::vector<Step>;

  Lstm() = default;
  Lstm(const std::string& name, std::size_t input_dim, std::size_t hidden_dim)
      : W(name + ".W", {4 * hidden_dim, input_dim}),
        U(name + ".U", {4 * hidden_dim, hidden_dim}),
        b(name + ".b", {4 * hidden_dim}) {}

  std::size_t input_dim() const { return W.value.cols(); }
  std::size_t hidden_dim() const { return U.value.cols(); }

  void init(Rng& rng) {
    init_glorot(W.value, input_dim(), 4 * hidden_dim(), rng);
    init_glorot(U.value, hidden_dim(), 4 * hidden_dim(), rng);
    b.value.zero();
  }

  Trace forward(const std::vector<Vec>& xs) const {
    if (xs.empty()) throw DataError("lstm: empty input sequence");
    const std::size_t H = hidden_dim();
    Trace trace;
    trace.reserve(xs.size());
    Vec h(H, 0.0), c(H, 0.0), a(4 * H);
    for (const auto& x : xs) {
      if (x.size() != input_dim()) throw DataError("lstm: input dimension mismatch");
      Step s;
      s.x = x;
      s.h_prev = h;
      s.c_prev = c;
      affine(W.value, b.value, x, a);
      for (std::size_t r = 0; r < 4 * H; ++r) {
        const auto u = U.value.row(r);
        double acc = 0;
        for (std::size_t k = 0; k < H; ++k) acc += u[k] * h[k];
        a[r] += acc;
      }
      s.i.resize(H);
      s.f.resize(H);
      s.o.resize(H);
      s.g.resize(H);
      s.c.resize(H);
      s.tanh_c.resize(H);
      s.h.resize(H);
      for (std::size_t k = 0; k < H; ++k) {
        s.i[k] = sigmoid(a[k]);
        s.f[k] = sigmoid(a[H + k]);
        s.o[k] = sigmoid(a[2 * H + k]);
        s.g[k] = std::tanh(a[3 * H + k]);
        s.c[k] = s.f[k] * c[k] + s.i[k] * s.g[k];
        s.tanh_c[k] = std::tanh(s.c[k]);
        s.h[k] = s.o[k] * s.tanh_c[k];
      }
      h = s.h;
      c = s.c;
      trace.push_back(std::move(s));
    }
    return trace;
  }

  // Backpropagation through time from a gradient on the final hidden state.
  // Accumulates parameter gradients; returns d loss / d x_t for every step.
  std::vector<Vec> backward(const Trace& trace, std::span<const double> dh_last) {
    const std::size_t H = hidden_dim();
    std::vector<Vec> dxs(trace.size(), Vec(input_dim(), 0.0));
    Vec dh(dh_last.begin(), dh_last.end()), dc(H, 0.0), da(4 * H), dh_prev(H);
    for (std::size_t t = trace.size(); t-- > 0;) {
      const Step& s = trace[t];
      for (std::size_t k = 0; k < H; ++k) {
        const double d_o = dh[k] * s.tanh_c[k];
        const double d_c = dc[k] + dh[k] * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
        da[k] = d_c * s.g[k] * s.i[k] * (1.0 - s.i[k]);
        da[H + k] = d_c * s.c_prev[k] * s.f[k] * (1.0 - s.f[k]);
        da[2 * H + k] = d_o * s.o[k] * (1.0 - s.o[k]);
        da[3 * H + k] = d_c * s.i[k] * (1.0 - s.g[k] * s.g[k]);
        dc[k] = d_c * s.f[k];
      }
      affine_backward(W.value, s.x, da, W.grad, &b.grad, dxs[t]);
      std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
      affine_backward(U.value, s.h_prev, da, U.grad, nullptr, dh_prev);
      dh = dh_prev;
    }
    return dxs;
  }

  ParamList params() { return {&W, &U, &b}; }
};

struct AdamConfig {
  double alpha = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias correction. Moments are created lazily on the first step
// and are matched to parameters by position.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(const ParamList& params) {
    for (const auto* p : params) {
      for (double g : p->grad.data) {
        if (!std::isfinite(g)) throw CheckFailure("adam: non-finite gradient in parameter '" + p->name + "'");
      }
    }
    if (m_.empty()) {
      for (const auto* p : params) {
        m_.emplace_back(p->value.size(), 0.0);
        v_.emplace_back(p->value.size(), 0.0);
      }
    }
    if (m_.size() != params.size()) throw UsageError("adam: parameter list changed between steps");
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto& val = params[k]->value.data;
      const auto& grad = params[k]->grad.data;
      if (grad.size() != m_[k].size()) throw UsageError("adam: shape mismatch for '" + params[k]->name + "'");
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < val.size(); ++i) {
        const double g = grad[i];
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
        val[i] -= cfg_.alpha * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.epsilon);
      }
    }
  }

  std::uint64_t steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::uint64_t t_ = 0;
  std::vector<Vec> m_, v_;
};

// A contiguous block of an input vector holding one word vector.
struct SlotRange {
  std::size_t offset = 0;
  std::size_t length = 0;
};

// In training mode zeroes each slot independently with probability p and
// returns which slots were dropped. Evaluation mode never masks.
inline std::vector<bool> word_dropout(std::span<double> x, std::span<const SlotRange> slots, double p, Rng& rng,
                                      bool training) {
  if (!(p >= 0 && p < 1)) throw UsageError("word dropout probability must be in [0, 1)");
  std::vector<bool> dropped(slots.size(), false);
  if (!training || p == 0) return dropped;
  for (std::size_t s = 0; s < slots.size(); ++s) {
    if (!rng.bernoulli(p)) continue;
    dropped[s] = true;
    const auto& r = slots[s];
    if (r.offset + r.length > x.size()) throw UsageError("word dropout slot out of range");
    std::fill(x.begin() + static_cast<std::ptrdiff_t>(r.offset),
              x.begin() + static_cast<std::ptrdiff_t>(r.offset + r.length), 0.0);
  }
  return dropped;
}

struct GradCheckOptions {
  double h = 1e-5;
  std::size_t max_coords_per_param = 0;  // 0 = every coordinate
  std::uint64_t seed = 0;
  double denom_floor = 1e-6;
};

struct GradCheckResult {
  double max_rel_error = 0;
  std::string worst_param;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

// Compares the analytic gradients already stored in each param's `grad` to
// central differences of `loss`. Relative error per coordinate is
// |a - n| / max(|a|, |n|, denom_floor).
inline GradCheckResult grad_check(const std::function<double()>& loss, const ParamList& params,
                                  const GradCheckOptions& opt = {}) {
  GradCheckResult res;
  Rng rng(opt.seed);
  for (auto* p : params) {
    std::vector<std::size_t> coords(p->value.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (opt.max_coords_per_param && coords.size() > opt.max_coords_per_param) {
      rng.shuffle(coords);
      coords.resize(opt.max_coords_per_param);
      std::sort(coords.begin(), coords.end());
    }
    for (auto idx : coords) {
      double& x = p->value.data[idx];
      const double saved = x;
      x = saved + opt.h;
      const double up = loss();
      x = saved - opt.h;
      const double down = loss();
      x = saved;
      const double numeric = (up - down) / (2 * opt.h);
      const double analytic = p->grad.data[idx];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), opt.denom_floor});
      const double err = std::abs(analytic - numeric) / denom;
      ++res.checked;
      if (res.checked == 1 || err > res.max_rel_error) {
        res.max_rel_error = err;
        res.worst_param = p->name;
        res.worst_index = idx;
      }
    }
  }
  return res;
}

// Checkpoint container: manifest.txt (meta key=value lines, then one
// `tensor <name> <dims...>` line per tensor) plus <name>.f32 holding the
// raw little-endian float32 components.
struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<std::string> order;
  std::map<std::string, Tensor> tensors;

  const Tensor& tensor(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw DataError("checkpoint has no tensor '" + name + "'");
    return it->second;
  }

  const std::string& get(const std::string& key) const {
    auto it = meta.find(key);
    if (it == meta.end()) throw DataError("checkpoint manifest has no key '" + key + "'");
    return it->second;
  }
};

namespace detail {

inline std::string f32_bytes(const Tensor& t) {
  std::string out;
  out.reserve(t.size() * 4);
  for (double v : t.data) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((bits >> (8 * k)) & 0xff));
  }
  return out;
}

inline std::vector<double> from_f32_bytes(const std::string& bytes) {
  std::vector<double> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t bits = 0;
    for (int k = 0; k < 4; ++k) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 * i + k])) << (8 * k);
    out[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  return out;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& dir, const ParamList& params,
                            const std::map<std::string, std::string>& meta) {
  std::filesystem::create_directories(dir);
  std::ostringstream manifest;
  for (const auto& [k, v] : meta) manifest << k << '=' << v << '\n';
  for (const auto* p : params) {
    manifest << "tensor " << p->name;
    for (auto d : p->value.shape) manifest << ' ' << d;
    manifest << '\n';
    std::ofstream out(dir / (p->name + ".f32"), std::ios::binary);
    if (!out) throw DataError("cannot write tensor file for " + p->name);
    out << detail::f32_bytes(p->value);
  }
  std::ofstream m(dir / "manifest.txt", std::ios::binary);
  if (!m) throw DataError("cannot write checkpoint manifest in " + dir.string());
  m << manifest.str();
}

inline Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  Checkpoint ck;
  std::istringstream manifest(detail::read_file(dir / "manifest.txt"));
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    if (line.rfind("tensor ", 0) == 0) {
      const auto f = split_ws(line);
      if (f.size() < 3) throw DataError("bad tensor line in checkpoint manifest: " + line);
      std::vector<std::size_t> shape;
      for (std::size_t k = 2; k < f.size(); ++k) {
        std::size_t d = 0;
        if (!parse_int(f[k], d)) throw DataError("bad tensor shape: " + line);
        shape.push_back(d);
      }
      Tensor t(shape);
      const std::string name(f[1]);
      const auto values = detail::from_f32_bytes(detail::read_file(dir / (name + ".f32")));
      if (values.size() != t.size()) throw DataError("tensor '" + name + "' has wrong size on disk");
      t.data = values;
      ck.order.push_back(name);
      ck.tensors[name] = std::move(t);
    } else {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw DataError("bad checkpoint manifest line: " + line);
      ck.meta[line.substr(0, eq)] = line.substr(eq + 1);
    }
  }
  return ck;
}

inline void assign_params(const Checkpoint& ck, const ParamList& params) {
  for (auto* p : params) {
    const auto& t = ck.tensor(p->name);
    if (t.shape != p->value.shape) throw DataError("checkpoint tensor '" + p->name + "' has the wrong shape");
    p->value = t;
    p->grad = Tensor(t.shape);
  }
}

// Content hash over the manifest and every tensor file.
inline std::string checkpoint_hash(const std::filesystem::path& dir) {
  const auto ck_manifest = detail::read_file(dir / "manifest.txt");
  std::uint64_t h = fnv1a(ck_manifest);
  std::istringstream m(ck_manifest);
  std::string line;
  while (std::getline(m, line)) {
    if (line.rfind("tensor ", 0) != 0) continue;
    const auto f = split_ws(line);
    h = fnv1a(detail::read_file(dir / (std::string(f[1]) + ".f32")), h);
  }
  return hex64(h);
}

}  // namespace ncrel
