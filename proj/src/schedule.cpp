#include "ktele/schedule.hpp"

#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace ktele::schedule {

using nlohmann::json;

Strategy strategy_from_string(const std::string& s) {
  if (s == "stl" || s == "STL") return Strategy::STL;
  if (s == "pmtl" || s == "PMTL") return Strategy::PMTL;
  if (s == "imtl" || s == "IMTL") return Strategy::IMTL;
  throw std::invalid_argument("unknown strategy: " + s);
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::STL: return "stl";
    case Strategy::PMTL: return "pmtl";
    case Strategy::IMTL: return "imtl";
  }
  throw std::logic_error("bad strategy");
}

Rational Rational::parse(const std::string& text) {
  Rational r;
  const auto slash = text.find('/');
  if (slash != std::string::npos) {
    r.num = std::stoll(text.substr(0, slash));
    r.den = std::stoll(text.substr(slash + 1));
  } else if (text.find('.') != std::string::npos) {
    // decimal -> rational with a power-of-ten denominator
    const auto dot = text.find('.');
    const std::string digits = text.substr(0, dot) + text.substr(dot + 1);
    r.num = std::stoll(digits);
    r.den = 1;
    for (std::size_t i = dot + 1; i < text.size(); ++i) r.den *= 10;
  } else {
    r.num = std::stoll(text);
    r.den = 1;
  }
  if (r.den <= 0 || r.num <= 0) throw std::invalid_argument("scale must be positive");
  const long long g = std::gcd(r.num, r.den);
  r.num /= g;
  r.den /= g;
  return r;
}

std::string Rational::str() const {
  return den == 1 ? std::to_string(num) : std::to_string(num) + "/" + std::to_string(den);
}

namespace {

long long scaled(long long base, const Rational& s) {
  const long long prod = base * s.num;
  return (prod + s.den / 2) / s.den;  // exact when divisible
}

}  // namespace

long long TrainingPlan::total_mask() const {
  long long t = 0;
  for (const auto& st : stages) t += st.steps_mask;
  return t;
}
long long TrainingPlan::total_ke() const {
  long long t = 0;
  for (const auto& st : stages) t += st.steps_ke;
  return t;
}

std::string TrainingPlan::to_json() const {
  json j;
  j["mode"] = to_string(mode);
  j["scale"] = scale.str();
  j["stages"] = json::array();
  for (const auto& s : stages)
    j["stages"].push_back({{"stage", s.stage_id},
                           {"steps_mask", s.steps_mask},
                           {"steps_ke", s.steps_ke}});
  return j.dump();
}

TrainingPlan build_plan(Strategy mode, Rational scale) {
  if (scale.num <= 0 || scale.den <= 0) throw std::invalid_argument("scale must be positive");
  TrainingPlan plan;
  plan.mode = mode;
  plan.scale = scale;
  switch (mode) {
    case Strategy::STL:
      plan.stages = {{1, scaled(60000, scale), 0}};
      break;
    case Strategy::PMTL:
      plan.stages = {{1, scaled(60000, scale), scaled(60000, scale)}};
      break;
    case Strategy::IMTL:
      plan.stages = {{1, scaled(40000, scale), 0},
                     {2, scaled(10000, scale), scaled(40000, scale)},
                     {3, scaled(10000, scale), scaled(20000, scale)}};
      break;
  }
  return plan;
}

long long TrainingLog::count_task(const std::string& task) const {
  long long n = 0;
  for (const auto& r : rows)
    if (r.task == task) ++n;
  return n;
}

std::string TrainingLog::to_json() const {
  json j;
  j["aborted"] = aborted;
  if (aborted) j["error"] = error;
  j["rows"] = json::array();
  for (const auto& r : rows)
    j["rows"].push_back(
        {{"stage", r.stage}, {"step", r.step}, {"task", r.task}, {"loss", r.loss}});
  return j.dump();
}

TrainingLog run_plan(const TrainingPlan& plan, const TrainerHooks& hooks) {
  TrainingLog log;
  if (!hooks.apply_update) throw std::invalid_argument("apply_update hook required");
  try {
    for (const auto& stage : plan.stages) {
      if (plan.mode == Strategy::PMTL) {
        if (stage.steps_mask != stage.steps_ke)
          throw std::logic_error("PMTL stages must pair the tasks step for step");
        for (long long s = 0; s < stage.steps_mask; ++s) {
          const double lm = hooks.mask_step(stage.stage_id, s);
          const double lk = hooks.ke_step(stage.stage_id, s);
          hooks.apply_update();
          log.rows.push_back({stage.stage_id, s, "mask", lm});
          log.rows.push_back({stage.stage_id, s, "ke", lk});
          log.rows.push_back({stage.stage_id, s, "joint", lm + lk});
        }
        continue;
      }
      // STL / IMTL: proportional interleave (STL stages have zero KE quota)
      long long done_mask = 0, done_ke = 0;
      const long long total = stage.steps_mask + stage.steps_ke;
      for (long long s = 0; s < total; ++s) {
        bool pick_mask;
        if (done_mask >= stage.steps_mask) {
          pick_mask = false;
        } else if (done_ke >= stage.steps_ke) {
          pick_mask = true;
        } else {
          pick_mask = (done_mask + 1) * stage.steps_ke <= (done_ke + 1) * stage.steps_mask;
        }
        if (pick_mask) {
          const double l = hooks.mask_step(stage.stage_id, s);
          hooks.apply_update();
          log.rows.push_back({stage.stage_id, s, "mask", l});
          ++done_mask;
        } else {
          const double l = hooks.ke_step(stage.stage_id, s);
          hooks.apply_update();
          log.rows.push_back({stage.stage_id, s, "ke", l});
          ++done_ke;
        }
      }
    }
  } catch (const std::exception& e) {
    log.aborted = true;
    log.error = e.what();
  }
  return log;
}

}  // namespace ktele::schedule
