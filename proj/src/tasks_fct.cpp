#include "ktele/tasks/fct.hpp"

#include <cmath>
#include <stdexcept>

#include "ktele/ke.hpp"

namespace ktele::tasks {

using namespace ktele::ad;

void FaultQuadruple::validate() const {
  if (head.empty() || relation.empty() || tail.empty())
    throw std::invalid_argument("quadruple surfaces must be non-empty");
  if (confidence < 0.0 || confidence > 1.0)
    throw std::invalid_argument("confidence must be in [0,1]");
}

std::vector<FaultQuadruple> rules_filter(const std::vector<FaultQuadruple>& quads,
                                         const std::set<std::string>& whitelist) {
  if (whitelist.empty()) return quads;
  std::vector<FaultQuadruple> out;
  for (const auto& q : quads)
    if (whitelist.count(q.relation)) out.push_back(q);
  return out;
}

Var fct_loss(Tape& t, const std::vector<Var>& d_pos,
             const std::vector<std::vector<Var>>& d_neg,
             const std::vector<double>& confidence, double margin, double alpha) {
  if (margin <= 0.0 || alpha <= 0.0) throw std::invalid_argument("M and alpha must be > 0");
  if (d_pos.size() != d_neg.size() || d_pos.size() != confidence.size())
    throw std::invalid_argument("fct_loss: batch size mismatch");
  Var total = t.constant(Mat::Zero(1, 1));
  for (std::size_t i = 0; i < d_pos.size(); ++i) {
    const double s = confidence[i];
    if (s < 0.0 || s > 1.0) throw std::invalid_argument("confidence outside [0,1]");
    const double margin_term = std::pow(s, alpha) * margin;
    for (const auto& dn : d_neg[i]) {
      Var hinge = relu(t, add_const(t, sub(t, d_pos[i], dn), margin_term));
      total = add(t, total, hinge);
    }
  }
  return total;
}

double fct_loss_value(const std::vector<double>& d_pos,
                      const std::vector<std::vector<double>>& d_neg,
                      const std::vector<double>& confidence, double margin, double alpha) {
  if (margin <= 0.0 || alpha <= 0.0) throw std::invalid_argument("M and alpha must be > 0");
  double total = 0.0;
  for (std::size_t i = 0; i < d_pos.size(); ++i) {
    const double margin_term = std::pow(confidence[i], alpha) * margin;
    for (double dn : d_neg[i]) total += std::max(0.0, d_pos[i] - dn + margin_term);
  }
  return total;
}

FctModel::FctModel(const std::vector<std::string>& entities,
                   const std::vector<std::string>& relations, FctConfig cfg,
                   ParamStore& store, Rng& rng, std::string prefix)
    : cfg_(std::move(cfg)), store_(&store), prefix_(std::move(prefix)),
      entities_(entities), relations_(relations) {
  if (entities_.empty() || relations_.empty())
    throw std::invalid_argument("FCT needs entities and relations");
  for (std::size_t i = 0; i < entities_.size(); ++i) ent_idx_[entities_[i]] = int(i);
  for (std::size_t i = 0; i < relations_.size(); ++i) rel_idx_[relations_[i]] = int(i);
  store.create_normal(prefix_ + "ent", Index(entities_.size()), cfg_.embed_dim, 0.5, rng);
  store.create_normal(prefix_ + "rel", Index(relations_.size()), cfg_.embed_dim, 0.5, rng);
}

void FctModel::init_entities(const std::map<std::string, Vec>& vectors) {
  Mat& ent = store_->get(prefix_ + "ent").value;
  for (const auto& [name, vec] : vectors) {
    auto it = ent_idx_.find(name);
    if (it == ent_idx_.end()) continue;
    for (int k = 0; k < cfg_.embed_dim; ++k)
      ent(it->second, k) = k < vec.size() ? vec(k) : 0.0;
  }
}

int FctModel::entity_index(const std::string& e) const {
  auto it = ent_idx_.find(e);
  if (it == ent_idx_.end()) throw std::out_of_range("unknown FCT entity: " + e);
  return it->second;
}

Var FctModel::distance(Tape& t, const std::string& h, const std::string& r,
                       const std::string& s) const {
  Var ent = t.param(store_->get(prefix_ + "ent"));
  Var rel = t.param(store_->get(prefix_ + "rel"));
  Var eh = gather_rows(t, ent, {entity_index(h)});
  Var et = gather_rows(t, ent, {entity_index(s)});
  auto rit = rel_idx_.find(r);
  if (rit == rel_idx_.end()) throw std::out_of_range("unknown FCT relation: " + r);
  Var er = gather_rows(t, rel, {rit->second});
  return ke::transe_distance(t, eh, er, et);
}

double FctModel::distance_eval(const std::string& h, const std::string& r,
                               const std::string& s) const {
  const Mat& ent = store_->get(prefix_ + "ent").value;
  const Mat& rel = store_->get(prefix_ + "rel").value;
  auto rit = rel_idx_.find(r);
  if (rit == rel_idx_.end()) throw std::out_of_range("unknown FCT relation: " + r);
  const Vec eh = ent.row(entity_index(h)).transpose();
  const Vec et = ent.row(entity_index(s)).transpose();
  const Vec er = rel.row(rit->second).transpose();
  return ke::transe_distance(eh, er, et);
}

Var FctModel::batch_loss(Tape& t, const std::vector<FaultQuadruple>& batch,
                         const std::set<std::string>& known_keys, std::uint64_t seed) const {
  if (batch.empty()) throw std::invalid_argument("empty FCT batch");
  Rng rng(seed);
  std::vector<Var> d_pos;
  std::vector<std::vector<Var>> d_neg;
  std::vector<double> conf;
  for (const auto& q : batch) {
    q.validate();
    d_pos.push_back(distance(t, q.head, q.relation, q.tail));
    std::vector<Var> negs;
    int attempts = 0;
    while (int(negs.size()) < cfg_.n_neg) {
      if (++attempts > 100 * cfg_.n_neg)
        throw std::runtime_error("FCT negative sampling exhausted");
      const bool corrupt_tail = negs.size() % 2 == 0;
      const std::string& cand = entities_[rng.index(entities_.size())];
      std::string h = q.head, s = q.tail;
      if (corrupt_tail) {
        if (cand == q.tail) continue;
        s = cand;
      } else {
        if (cand == q.head) continue;
        h = cand;
      }
      if (known_keys.count(ke::triple_key(h, q.relation, s))) continue;
      negs.push_back(distance(t, h, q.relation, s));
    }
    d_neg.push_back(std::move(negs));
    conf.push_back(q.confidence);
  }
  return fct_loss(t, d_pos, d_neg, conf, cfg_.margin, cfg_.alpha);
}

double fct_tail_rank(const FctModel& model, const FaultQuadruple& query,
                     const std::set<std::string>& known_keys) {
  const double true_d = model.distance_eval(query.head, query.relation, query.tail);
  double better = 0, tied = 0;
  for (const auto& cand : model.entities()) {
    if (cand == query.tail) continue;
    if (known_keys.count(ke::triple_key(query.head, query.relation, cand))) continue;
    const double d = model.distance_eval(query.head, query.relation, cand);
    if (d < true_d) ++better;
    else if (d == true_d) ++tied;
  }
  return better + 1.0 + tied / 2.0;
}

}  // namespace ktele::tasks
