#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ktele/core/tape.hpp"

namespace ktele::tasks {

struct FaultQuadruple {
  std::string head;
  std::string relation;
  std::string tail;
  double confidence = 1.0;  // s in [0,1]

  void validate() const;
};

struct FctConfig {
  double margin = 1.0;      // M
  double alpha = 1.0;       // confidence exponent
  int embed_dim = 64;       // 2000 at paper scale
  int n_neg = 10;
  std::set<std::string> relation_whitelist;  // "rules lightning" filter; empty = keep all
};

// Drops quadruples whose relation is not whitelisted.
std::vector<FaultQuadruple> rules_filter(const std::vector<FaultQuadruple>& quads,
                                         const std::set<std::string>& whitelist);

// sum_pos sum_neg [ d(h,r,t) - d(h',r,t') + s^alpha * M ]_+
ad::Var fct_loss(ad::Tape& t, const std::vector<ad::Var>& d_pos,
                 const std::vector<std::vector<ad::Var>>& d_neg,
                 const std::vector<double>& confidence, double margin, double alpha);
double fct_loss_value(const std::vector<double>& d_pos,
                      const std::vector<std::vector<double>>& d_neg,
                      const std::vector<double>& confidence, double margin, double alpha);

// Shallow TransE-style embeddings over alarm/NE nodes, optionally initialized
// from encoder service vectors.
class FctModel {
 public:
  FctModel(const std::vector<std::string>& entities, const std::vector<std::string>& relations,
           FctConfig cfg, ad::ParamStore& store, Rng& rng, std::string prefix = "fct/");

  // Overwrites the entity rows with externally computed vectors (projected or
  // truncated/padded to embed_dim).
  void init_entities(const std::map<std::string, Vec>& vectors);

  ad::Var distance(ad::Tape& t, const std::string& h, const std::string& r,
                   const std::string& s) const;
  double distance_eval(const std::string& h, const std::string& r,
                       const std::string& s) const;

  // One training step's loss over a batch of quadruples with sampled tail/head
  // corruptions.
  ad::Var batch_loss(ad::Tape& t, const std::vector<FaultQuadruple>& batch,
                     const std::set<std::string>& known_keys, std::uint64_t seed) const;

  const std::vector<std::string>& entities() const { return entities_; }
  int entity_index(const std::string& e) const;
  const FctConfig& config() const { return cfg_; }

 private:
  FctConfig cfg_;
  ad::ParamStore* store_;
  std::string prefix_;
  std::vector<std::string> entities_;
  std::vector<std::string> relations_;
  std::map<std::string, int> ent_idx_;
  std::map<std::string, int> rel_idx_;
};

// Filtered tail ranking over the model's entity pool (mean rank for ties).
double fct_tail_rank(const FctModel& model, const FaultQuadruple& query,
                     const std::set<std::string>& known_keys);

}  // namespace ktele::tasks
