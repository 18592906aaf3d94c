#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace ktele::schedule {

enum class Strategy { STL, PMTL, IMTL };

Strategy strategy_from_string(const std::string& s);
std::string to_string(Strategy s);

// Exact scaling of the paper-scale step counts, e.g. "1/100" or "0.25".
struct Rational {
  long long num = 1;
  long long den = 1;

  static Rational parse(const std::string& text);
  double value() const { return double(num) / double(den); }
  std::string str() const;
};

struct Stage {
  int stage_id = 1;
  long long steps_mask = 0;
  long long steps_ke = 0;
};

struct TrainingPlan {
  Strategy mode = Strategy::STL;
  std::vector<Stage> stages;
  Rational scale;

  long long total_mask() const;
  long long total_ke() const;
  std::string to_json() const;
};

// STL: one 60k-step mask stage. PMTL: both tasks every step for 60k steps.
// IMTL: (40k,0), (10k,40k), (10k,20k), each scaled.
TrainingPlan build_plan(Strategy mode, Rational scale);

struct StepRecord {
  int stage = 0;
  long long step = 0;       // execution slot within the stage
  std::string task;         // "mask" | "ke" | "joint"
  double loss = 0.0;
};

struct TrainingLog {
  std::vector<StepRecord> rows;
  bool aborted = false;
  std::string error;

  long long count_task(const std::string& task) const;
  std::string to_json() const;
};

// Hooks accumulate gradients and return the step loss; apply_update performs
// one optimizer step (and gradient reset). Under PMTL both hooks run before a
// single update, realizing the summed objective.
struct TrainerHooks {
  std::function<double(int stage, long long step)> mask_step;
  std::function<double(int stage, long long step)> ke_step;
  std::function<void()> apply_update;
};

// Executes the plan exactly; within an IMTL stage the two tasks interleave in
// a Bresenham pattern proportional to their quotas. A throwing hook aborts the
// run with completed rows preserved.
TrainingLog run_plan(const TrainingPlan& plan, const TrainerHooks& hooks);

}  // namespace ktele::schedule
