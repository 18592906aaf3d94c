#pragma once

#include <cmath>

#include "ktele/core/tape.hpp"

namespace ktele::ad {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled
};

// Adam over every param in a store. Gradients are whatever has been
// accumulated since the last zero_grads(); accumulation across micro-batches
// is the caller's concern.
class Adam {
 public:
  Adam(ParamStore& store, AdamConfig cfg) : store_(store), cfg_(cfg) {}

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
    for (auto& [name, p] : store_) {
      p->ensure_grad();
      if (p->m.size() == 0) {
        p->m = Mat::Zero(p->value.rows(), p->value.cols());
        p->v = Mat::Zero(p->value.rows(), p->value.cols());
      }
      p->m = cfg_.beta1 * p->m + (1.0 - cfg_.beta1) * p->grad;
      p->v = cfg_.beta2 * p->v.array() + (1.0 - cfg_.beta2) * p->grad.array().square();
      Mat mhat = p->m / bc1;
      Mat vhat = p->v / bc2;
      if (cfg_.weight_decay > 0.0)
        p->value -= cfg_.lr * cfg_.weight_decay * p->value;
      p->value.array() -= cfg_.lr * mhat.array() / (vhat.array().sqrt() + cfg_.eps);
    }
  }

  long steps() const { return t_; }
  AdamConfig& config() { return cfg_; }

 private:
  ParamStore& store_;
  AdamConfig cfg_;
  long t_ = 0;
};

}  // namespace ktele::ad
