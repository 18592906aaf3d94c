#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "ktele/core/adam.hpp"
#include "ktele/core/tape.hpp"

namespace ktele::ad {

struct GradCheckResult {
  std::size_t checked = 0;
  double max_rel_err = 0.0;
  std::string worst;  // "param[i,j]"
};

// Central finite differences against the tape gradient, on `samples`
// parameter entries chosen deterministically from `seed`. `loss` must build a
// fresh graph from the store's current values on every call.
inline GradCheckResult gradient_check(ParamStore& store,
                                      const std::function<double()>& loss_value,
                                      const std::function<void()>& loss_backward,
                                      std::size_t samples, Rng rng,
                                      double h = 1e-5) {
  store.zero_grads();
  loss_backward();

  struct Entry {
    Param* p;
    Index i, j;
  };
  std::vector<Entry> all;
  for (auto& [name, p] : store)
    for (Index j = 0; j < p->value.cols(); ++j)
      for (Index i = 0; i < p->value.rows(); ++i) all.push_back({p.get(), i, j});

  rng.shuffle(all);
  if (all.size() > samples) all.resize(samples);

  GradCheckResult res;
  for (const auto& e : all) {
    const double keep = e.p->value(e.i, e.j);
    e.p->value(e.i, e.j) = keep + h;
    const double up = loss_value();
    e.p->value(e.i, e.j) = keep - h;
    const double dn = loss_value();
    e.p->value(e.i, e.j) = keep;
    const double fd = (up - dn) / (2.0 * h);
    const double an = e.p->grad(e.i, e.j);
    const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8});
    ++res.checked;
    if (rel > res.max_rel_err) {
      res.max_rel_err = rel;
      res.worst = e.p->name + "[" + std::to_string(e.i) + "," + std::to_string(e.j) + "]";
    }
  }
  return res;
}

}  // namespace ktele::ad
