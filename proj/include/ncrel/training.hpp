#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include "ncrel/neural.hpp"
#include "ncrel/util.hpp"

namespace ncrel {

struct TrainConfig {
  std::size_t batch_size = 10;
  std::size_t max_epochs = 30;
  double f1_drop = 0.08;  // stop once validation F1 < best - f1_drop
  double word_dropout = 0.1;
  bool encoder_word_dropout = false;  // path encoder: drop path lemmas to <UNK>
  AdamConfig adam;
  std::uint64_t seed = 1;
};

// Tracks the best validation F1 seen so far. Among epochs tied at the best
// score the latest wins, since it has trained longest.
class EarlyStopping {
 public:
  explicit EarlyStopping(double drop = 0.08) : drop_(drop) {}

  // Records one epoch's score; returns true when training should stop.
  bool update(double f1) {
    ++epoch_;
    improved_ = best_epoch_ == 0 || f1 >= best_;
    if (improved_) {
      best_ = f1;
      best_epoch_ = epoch_;
    }
    return f1 < best_ - drop_;
  }

  bool improved() const { return improved_; }
  double best() const { return best_; }
  std::size_t best_epoch() const { return best_epoch_; }

 private:
  double drop_;
  double best_ = 0;
  std::size_t best_epoch_ = 0;
  std::size_t epoch_ = 0;
  bool improved_ = false;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0;
  double train_f1 = 0;
  double val_f1 = 0;
};

struct History {
  double initial_loss = 0;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  bool stopped_early = false;

  bool operator==(const History& o) const {
    if (initial_loss != o.initial_loss || best_epoch != o.best_epoch || stopped_early != o.stopped_early ||
        epochs.size() != o.epochs.size()) {
      return false;
    }
    for (std::size_t i = 0; i < epochs.size(); ++i) {
      const auto& a = epochs[i];
      const auto& b = o.epochs[i];
      if (a.epoch != b.epoch || a.train_loss != b.train_loss || a.train_f1 != b.train_f1 || a.val_f1 != b.val_f1) {
        return false;
      }
    }
    return true;
  }
};

inline void write_history(std::ostream& out, const History& h) {
  out << "epoch\ttrain_loss\ttrain_f1\tval_f1\n";
  out << "0\t" << format_double(h.initial_loss) << "\t-\t-\n";
  for (const auto& e : h.epochs) {
    out << e.epoch << '\t' << format_double(e.train_loss) << '\t' << format_double(e.train_f1) << '\t'
        << format_double(e.val_f1) << '\n';
  }
  out << "# best_epoch=" << h.best_epoch << " stopped_early=" << (h.stopped_early ? 1 : 0) << '\n';
}

// Snapshot of parameter values, used to restore the best epoch.
inline std::vector<Tensor> snapshot(const ParamList& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const auto* p : params) out.push_back(p->value);
  return out;
}

inline void restore(const ParamList& params, const std::vector<Tensor>& values) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
}

inline void scale_grads(const ParamList& params, double s) {
  for (auto* p : params) {
    for (auto& g : p->grad.data) g *= s;
  }
}

}  // namespace ncrel
