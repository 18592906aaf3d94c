#include "ktele/ke.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ktele::ke {

using namespace ktele::ad;
using corpus::KnowledgeTriple;

void KEConfig::validate() const {
  if (gamma <= 0.0) throw std::invalid_argument("margin gamma must be positive");
  if (n_neg < 1) throw std::invalid_argument("n_neg must be >= 1");
  if (adversarial_temperature <= 0.0)
    throw std::invalid_argument("adversarial temperature must be positive");
}

std::string triple_key(const std::string& h, const std::string& r, const std::string& t) {
  return h + "\t" + r + "\t" + t;
}
std::string triple_key(const KnowledgeTriple& t) {
  return triple_key(t.head_surface, t.relation_surface, t.tail_surface);
}

Vec embed_element(const backbone::Encoder& enc, const tokenizer::Vocabulary& vocab,
                  const std::string& surface, ElementRole role) {
  const auto seq = role == ElementRole::entity ? prompting::wrap_entity_surface(surface)
                                               : prompting::wrap_relation_surface(surface);
  return enc.encode(seq, vocab).pooled;
}

Var embed_element(Tape& t, const backbone::Encoder& enc, const tokenizer::Vocabulary& vocab,
                  const std::string& surface, ElementRole role) {
  const auto seq = role == ElementRole::entity ? prompting::wrap_entity_surface(surface)
                                               : prompting::wrap_relation_surface(surface);
  Var hidden = enc.forward(t, vocab.encode_units(seq.units));
  return slice_rows(t, hidden, 0, 1);  // pooled CLS row
}

double transe_distance(const Vec& e_h, const Vec& e_r, const Vec& e_t) {
  if (e_h.size() != e_r.size() || e_h.size() != e_t.size())
    throw std::invalid_argument("transe_distance: dim mismatch");
  return (e_h + e_r - e_t).norm();
}

Var transe_distance(Tape& t, Var e_h, Var e_r, Var e_t) {
  Var diff = sub(t, add(t, e_h, e_r), e_t);
  return sqrt(t, sum_all(t, square(t, diff)));
}

std::vector<CorruptedTriple> sample_negatives(const KnowledgeTriple& positive,
                                              const std::vector<std::string>& entity_pool,
                                              const std::set<std::string>& known_positives,
                                              int n, std::uint64_t seed) {
  if (entity_pool.size() < 2) throw std::invalid_argument("entity pool too small");
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  Rng rng(seed);
  std::vector<CorruptedTriple> out;
  out.reserve(std::size_t(n));
  const long max_attempts = 100L * n;
  long attempts = 0;
  while (int(out.size()) < n) {
    // alternate: even slots corrupt the head, odd slots the tail
    const CorruptionSide side =
        out.size() % 2 == 0 ? CorruptionSide::head : CorruptionSide::tail;
    if (++attempts > max_attempts)
      throw std::runtime_error("sample_negatives: exhausted attempts; pool too constrained");
    const std::string& candidate = entity_pool[rng.index(entity_pool.size())];
    KnowledgeTriple corrupted = positive;
    corrupted.attributes.clear();
    if (side == CorruptionSide::head) {
      if (candidate == positive.head_surface) continue;
      corrupted.head_surface = candidate;
    } else {
      if (candidate == positive.tail_surface) continue;
      corrupted.tail_surface = candidate;
    }
    if (known_positives.count(triple_key(corrupted))) continue;
    out.push_back({std::move(corrupted), side});
  }
  return out;
}

namespace {

std::vector<double> negative_weights(const std::vector<double>& d_neg, const KEConfig& cfg) {
  const std::size_t n = d_neg.size();
  std::vector<double> p(n, 1.0 / double(n));
  if (cfg.neg_weighting == NegWeighting::self_adversarial) {
    // one joint softmax over -d/T across every negative of the positive
    double mx = -1e300;
    for (double d : d_neg) mx = std::max(mx, -d / cfg.adversarial_temperature);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = std::exp(-d_neg[i] / cfg.adversarial_temperature - mx);
      z += p[i];
    }
    for (auto& w : p) w /= z;
  }
  return p;
}

}  // namespace

Var ke_loss(Tape& t, Var d_pos, const std::vector<Var>& d_neg, const KEConfig& cfg) {
  cfg.validate();
  if (d_neg.empty()) throw std::invalid_argument("ke_loss: no negatives");
  std::vector<double> dvals(d_neg.size());
  for (std::size_t i = 0; i < d_neg.size(); ++i) dvals[i] = t.scalar(d_neg[i]);
  const auto p = negative_weights(dvals, cfg);

  Var loss = softplus(t, add_const(t, d_pos, -cfg.gamma));  // -ln sigma(gamma - d_pos)
  for (std::size_t i = 0; i < d_neg.size(); ++i) {
    Var term = softplus(t, neg(t, add_const(t, d_neg[i], -cfg.gamma)));
    loss = add(t, loss, scale(t, term, p[i]));
  }
  return loss;
}

double ke_loss_value(double d_pos, const std::vector<double>& d_neg, const KEConfig& cfg) {
  cfg.validate();
  const auto p = negative_weights(d_neg, cfg);
  double loss = stable_softplus(d_pos - cfg.gamma);
  for (std::size_t i = 0; i < d_neg.size(); ++i)
    loss += p[i] * stable_softplus(cfg.gamma - d_neg[i]);
  return loss;
}

// ---- KG files ----------------------------------------------------------------

KnowledgeGraph KnowledgeGraph::from_triples(std::vector<KnowledgeTriple> triples,
                                            std::vector<std::optional<double>> confidence) {
  KnowledgeGraph kg;
  kg.triples = std::move(triples);
  if (confidence.empty())
    kg.confidence.assign(kg.triples.size(), std::nullopt);
  else if (confidence.size() == kg.triples.size())
    kg.confidence = std::move(confidence);
  else
    throw std::invalid_argument("confidence count mismatch");
  std::set<std::string> ents, rels;
  for (const auto& t : kg.triples) {
    ents.insert(t.head_surface);
    ents.insert(t.tail_surface);
    rels.insert(t.relation_surface);
    kg.known_keys.insert(triple_key(t));
  }
  kg.entities.assign(ents.begin(), ents.end());
  kg.relations.assign(rels.begin(), rels.end());
  return kg;
}

KnowledgeGraph load_kg_tsv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open KG file: " + path);
  std::vector<KnowledgeTriple> triples;
  std::vector<std::optional<double>> conf;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string h, r, t, s;
    if (!std::getline(ls, h, '\t') || !std::getline(ls, r, '\t') || !std::getline(ls, t, '\t'))
      throw std::runtime_error("malformed KG line: " + line);
    KnowledgeTriple trip;
    trip.head_surface = h;
    trip.relation_surface = r;
    trip.tail_surface = t;
    triples.push_back(std::move(trip));
    if (std::getline(ls, s, '\t'))
      conf.emplace_back(std::stod(s));
    else
      conf.emplace_back(std::nullopt);
  }
  return KnowledgeGraph::from_triples(std::move(triples), std::move(conf));
}

void save_kg_tsv(const std::string& path, const KnowledgeGraph& kg) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write KG file: " + path);
  for (std::size_t i = 0; i < kg.triples.size(); ++i) {
    const auto& t = kg.triples[i];
    os << t.head_surface << "\t" << t.relation_surface << "\t" << t.tail_surface;
    if (kg.confidence[i]) {
      std::ostringstream ss;
      ss << *kg.confidence[i];
      os << "\t" << ss.str();
    }
    os << "\n";
  }
}

// ---- trainer -------------------------------------------------------------------

KETrainer::KETrainer(const backbone::Encoder& enc, const tokenizer::Vocabulary& vocab,
                     KEConfig cfg)
    : enc_(&enc), vocab_(&vocab), cfg_(cfg) {
  cfg_.validate();
}

Var KETrainer::step_loss(Tape& t, const KnowledgeGraph& kg,
                         const std::vector<std::size_t>& positive_idx, std::uint64_t seed) {
  if (positive_idx.empty()) throw std::invalid_argument("empty KE batch");

  TripleBatch batch;
  for (std::size_t k = 0; k < positive_idx.size(); ++k) {
    const auto& pos = kg.triples.at(positive_idx[k]);
    batch.positives.push_back(pos);
    batch.negatives.push_back(
        sample_negatives(pos, kg.entities, kg.known_keys, cfg_.n_neg, seed + k));
  }

  // each distinct surface is encoded once per step
  std::map<std::string, Var> ent_vec, rel_vec;
  auto ent = [&](const std::string& s) {
    auto it = ent_vec.find(s);
    if (it == ent_vec.end())
      it = ent_vec.emplace(s, embed_element(t, *enc_, *vocab_, s, ElementRole::entity)).first;
    return it->second;
  };
  auto rel = [&](const std::string& s) {
    auto it = rel_vec.find(s);
    if (it == rel_vec.end())
      it = rel_vec.emplace(s, embed_element(t, *enc_, *vocab_, s, ElementRole::relation)).first;
    return it->second;
  };

  Var total = t.constant(Mat::Zero(1, 1));
  for (std::size_t k = 0; k < batch.positives.size(); ++k) {
    const auto& pos = batch.positives[k];
    Var d_pos = transe_distance(t, ent(pos.head_surface), rel(pos.relation_surface),
                                ent(pos.tail_surface));
    std::vector<Var> d_neg;
    d_neg.reserve(batch.negatives[k].size());
    for (const auto& negt : batch.negatives[k])
      d_neg.push_back(transe_distance(t, ent(negt.triple.head_surface),
                                      rel(negt.triple.relation_surface),
                                      ent(negt.triple.tail_surface)));
    total = add(t, total, ke_loss(t, d_pos, d_neg, cfg_));
  }
  return scale(t, total, 1.0 / double(batch.positives.size()));
}

std::map<std::string, Vec> KETrainer::embed_all(const KnowledgeGraph& kg) const {
  std::map<std::string, Vec> out;
  for (const auto& e : kg.entities)
    out["e:" + e] = embed_element(*enc_, *vocab_, e, ElementRole::entity);
  for (const auto& r : kg.relations)
    out["r:" + r] = embed_element(*enc_, *vocab_, r, ElementRole::relation);
  return out;
}

double filtered_tail_rank(const KnowledgeTriple& query,
                          const std::map<std::string, Vec>& entity_vecs,
                          const std::map<std::string, Vec>& relation_vecs,
                          const std::vector<std::string>& entity_pool,
                          const std::set<std::string>& known_positives) {
  const Vec& h = entity_vecs.at(query.head_surface);
  const Vec& r = relation_vecs.at(query.relation_surface);
  const double true_d = transe_distance(h, r, entity_vecs.at(query.tail_surface));
  double better = 0;
  double tied = 0;
  for (const auto& cand : entity_pool) {
    if (cand == query.tail_surface) continue;
    if (known_positives.count(triple_key(query.head_surface, query.relation_surface, cand)))
      continue;  // filtered setting
    const double d = transe_distance(h, r, entity_vecs.at(cand));
    if (d < true_d) ++better;
    else if (d == true_d) ++tied;
  }
  return better + 1.0 + tied / 2.0;  // mean rank of the tied block
}

}  // namespace ktele::ke
