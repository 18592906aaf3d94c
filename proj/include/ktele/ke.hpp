#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ktele/backbone.hpp"
#include "ktele/corpus.hpp"
#include "ktele/core/tape.hpp"

namespace ktele::ke {

enum class NegWeighting { uniform, self_adversarial };

struct KEConfig {
  double gamma = 1.0;
  int n_neg = 10;
  NegWeighting neg_weighting = NegWeighting::uniform;
  double adversarial_temperature = 1.0;

  void validate() const;
};

enum class CorruptionSide { head, tail };

struct CorruptedTriple {
  corpus::KnowledgeTriple triple;
  CorruptionSide side = CorruptionSide::tail;
};

struct TripleBatch {
  std::vector<corpus::KnowledgeTriple> positives;
  std::vector<std::vector<CorruptedTriple>> negatives;  // n_neg per positive
};

std::string triple_key(const std::string& h, const std::string& r, const std::string& t);
std::string triple_key(const corpus::KnowledgeTriple& t);

// "[ENT] surface" / "[REL] surface" wrapped, encoded, pooled CLS vector.
enum class ElementRole { entity, relation };
Vec embed_element(const backbone::Encoder& enc, const tokenizer::Vocabulary& vocab,
                  const std::string& surface, ElementRole role);
ad::Var embed_element(ad::Tape& t, const backbone::Encoder& enc,
                      const tokenizer::Vocabulary& vocab, const std::string& surface,
                      ElementRole role);

double transe_distance(const Vec& e_h, const Vec& e_r, const Vec& e_t);
// Inputs are 1 x d vars; output 1 x 1.
ad::Var transe_distance(ad::Tape& t, ad::Var e_h, ad::Var e_r, ad::Var e_t);

// Alternating head/tail corruption, rejecting known positives; deterministic
// per seed. Throws after 100 * n failed attempts.
std::vector<CorruptedTriple> sample_negatives(const corpus::KnowledgeTriple& positive,
                                              const std::vector<std::string>& entity_pool,
                                              const std::set<std::string>& known_positives,
                                              int n, std::uint64_t seed);

// -ln sigma(gamma - d_pos) - sum_i p_i ln sigma(d_neg_i - gamma). Weights are
// uniform or self-adversarial softmax over -d_neg (treated as constants).
ad::Var ke_loss(ad::Tape& t, ad::Var d_pos, const std::vector<ad::Var>& d_neg,
                const KEConfig& cfg);
double ke_loss_value(double d_pos, const std::vector<double>& d_neg, const KEConfig& cfg);

// ---- KG files and joint training --------------------------------------------

struct KnowledgeGraph {
  std::vector<corpus::KnowledgeTriple> triples;
  std::vector<std::optional<double>> confidence;  // parallel to triples
  std::vector<std::string> entities;              // sorted unique surfaces
  std::vector<std::string> relations;
  std::set<std::string> known_keys;

  static KnowledgeGraph from_triples(std::vector<corpus::KnowledgeTriple> triples,
                                     std::vector<std::optional<double>> confidence = {});
};

// TSV: head<TAB>relation<TAB>tail[<TAB>confidence]
KnowledgeGraph load_kg_tsv(const std::string& path);
void save_kg_tsv(const std::string& path, const KnowledgeGraph& kg);

// Joint text-encoder KE trainer (entity/relation vectors recomputed through
// the backbone every step).
class KETrainer {
 public:
  KETrainer(const backbone::Encoder& enc, const tokenizer::Vocabulary& vocab,
            KEConfig cfg);

  // One step over a batch of positive indices: builds the loss on `t` and
  // returns it (caller backwards + applies the optimizer).
  ad::Var step_loss(ad::Tape& t, const KnowledgeGraph& kg,
                    const std::vector<std::size_t>& positive_idx, std::uint64_t seed);

  // Frozen-cache mode: one eval-mode embedding per element surface.
  std::map<std::string, Vec> embed_all(const KnowledgeGraph& kg) const;

 private:
  const backbone::Encoder* enc_;
  const tokenizer::Vocabulary* vocab_;
  KEConfig cfg_;
};

// Filtered tail ranking: score every pool entity as tail of (h, r, ?), drop
// other known positives, rank the truth (ties get the mean rank of the block).
double filtered_tail_rank(const corpus::KnowledgeTriple& query,
                          const std::map<std::string, Vec>& entity_vecs,
                          const std::map<std::string, Vec>& relation_vecs,
                          const std::vector<std::string>& entity_pool,
                          const std::set<std::string>& known_positives);

}  // namespace ktele::ke
