#include "mtlsp/eval.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>

#include "mtlsp/corpus.hpp"
#include "mtlsp/rng.hpp"

namespace mtlsp {

MatchResult exact_match(const std::vector<std::string>& predictions,
                        const std::vector<std::string>& golds) {
  if (predictions.size() != golds.size()) {
    throw DataError("exact_match: prediction/gold counts differ");
  }
  MatchResult r;
  r.matches.reserve(predictions.size());
  int64_t hit = 0;
  for (size_t i = 0; i < predictions.size(); ++i) {
    const bool m = tokenize_ws(predictions[i]) == tokenize_ws(golds[i]);
    r.matches.push_back(m);
    hit += m ? 1 : 0;
  }
  r.accuracy = predictions.empty()
                   ? 0.0
                   : static_cast<double>(hit) / static_cast<double>(predictions.size());
  return r;
}

std::vector<Triple> to_triples(const AmrGraph& graph) {
  graph.validate();
  std::vector<Triple> out;
  for (const auto& [var, concept] : graph.nodes) {
    out.push_back({var, "instance", concept, false});
  }
  for (const AmrEdge& e : graph.edges) {
    out.push_back({e.source, e.relation, e.target, e.target_is_var});
  }
  out.push_back({graph.top, "TOP", graph.concept_of(graph.top), false});
  return out;
}

SmatchResult smatch_from_counts(int64_t matched, int64_t gold_count,
                                int64_t pred_count) {
  SmatchResult r;
  r.matched = matched;
  r.gold_count = gold_count;
  r.pred_count = pred_count;
  r.precision = pred_count > 0 ? static_cast<double>(matched) / static_cast<double>(pred_count) : 0.0;
  r.recall = gold_count > 0 ? static_cast<double>(matched) / static_cast<double>(gold_count) : 0.0;
  r.f1 = (r.precision + r.recall) > 0.0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

namespace {

struct Interner {
  std::map<std::string, int> ids;
  int intern(const std::string& s) {
    auto [it, inserted] = ids.emplace(s, static_cast<int>(ids.size()));
    return it->second;
  }
};

}  // namespace

AlignmentProblem::AlignmentProblem(const AmrGraph& gold, const AmrGraph& pred) {
  Interner labels;    // relation labels + "instance" + "TOP"
  Interner constants; // concepts and attribute values
  std::map<std::string, int> gold_vars, pred_vars;
  for (const auto& [v, c] : gold.nodes) {
    gold_vars.emplace(v, static_cast<int>(gold_vars.size()));
  }
  for (const auto& [v, c] : pred.nodes) {
    pred_vars.emplace(v, static_cast<int>(pred_vars.size()));
  }
  gold_concepts_.resize(gold_vars.size());
  for (const auto& [v, c] : gold.nodes) gold_concepts_[gold_vars[v]] = constants.intern(c);
  pred_concepts_.resize(pred_vars.size());
  for (const auto& [v, c] : pred.nodes) pred_concepts_[pred_vars[v]] = constants.intern(c);

  auto encode_side = [&](const AmrGraph& g, std::map<std::string, int>& vars,
                         std::vector<EncTriple>* store,
                         std::vector<uint64_t>* keys) {
    int64_t total = 0;
    auto emit = [&](int a, int rel, int b, bool b_is_var) {
      ++total;
      if (store) store->push_back({a, rel, b, b_is_var});
      if (keys) keys->push_back(encode(a, rel, b, b_is_var));
    };
    for (const Triple& t : to_triples(g)) {
      const int a = vars.at(t.a);
      const int rel = labels.intern(t.rel);
      if (t.b_is_var) {
        emit(a, rel, vars.at(t.b), true);
      } else {
        emit(a, rel, constants.intern(t.b), false);
      }
    }
    return total;
  };
  gold_total_ = encode_side(gold, gold_vars, &gold_triples_, nullptr);
  pred_total_ = encode_side(pred, pred_vars, nullptr, &pred_keys_);
  std::sort(pred_keys_.begin(), pred_keys_.end());
}

uint64_t AlignmentProblem::encode(int a, int rel, int b, bool b_is_var) const {
  return (static_cast<uint64_t>(a) << 42) | (static_cast<uint64_t>(rel) << 21) |
         (static_cast<uint64_t>(b) << 1) | (b_is_var ? 1u : 0u);
}

int64_t AlignmentProblem::matched(const std::vector<int>& mapping) const {
  int64_t count = 0;
  for (const EncTriple& t : gold_triples_) {
    const int ma = mapping[static_cast<size_t>(t.a)];
    if (ma < 0) continue;
    int b = t.b;
    if (t.b_is_var) {
      b = mapping[static_cast<size_t>(t.b)];
      if (b < 0) continue;
    }
    const uint64_t key = encode(ma, t.rel, b, t.b_is_var);
    if (std::binary_search(pred_keys_.begin(), pred_keys_.end(), key)) ++count;
  }
  return count;
}

namespace {

// Best-improvement local search over single reassignments and swaps.
int64_t hill_climb(const AlignmentProblem& prob, std::vector<int>& mapping) {
  const int ng = static_cast<int>(prob.gold_var_count());
  const int np = static_cast<int>(prob.pred_var_count());
  std::vector<int> owner(static_cast<size_t>(np), -1);  // pred var -> gold var
  for (int i = 0; i < ng; ++i) {
    if (mapping[static_cast<size_t>(i)] >= 0) owner[static_cast<size_t>(mapping[static_cast<size_t>(i)])] = i;
  }
  int64_t score = prob.matched(mapping);
  while (true) {
    int64_t best_gain = 0;
    int best_i = -1, best_j = -2;
    for (int i = 0; i < ng; ++i) {
      const int old = mapping[static_cast<size_t>(i)];
      for (int j = -1; j < np; ++j) {
        if (j == old) continue;
        const int other = j >= 0 ? owner[static_cast<size_t>(j)] : -1;
        mapping[static_cast<size_t>(i)] = j;
        if (other >= 0) mapping[static_cast<size_t>(other)] = old;
        const int64_t s = prob.matched(mapping);
        mapping[static_cast<size_t>(i)] = old;
        if (other >= 0) mapping[static_cast<size_t>(other)] = j;
        if (s - score > best_gain) {
          best_gain = s - score;
          best_i = i;
          best_j = j;
        }
      }
    }
    if (best_i < 0) break;
    const int old = mapping[static_cast<size_t>(best_i)];
    const int other = best_j >= 0 ? owner[static_cast<size_t>(best_j)] : -1;
    mapping[static_cast<size_t>(best_i)] = best_j;
    if (other >= 0) mapping[static_cast<size_t>(other)] = old;
    if (best_j >= 0) owner[static_cast<size_t>(best_j)] = best_i;
    if (old >= 0) owner[static_cast<size_t>(old)] = other >= 0 ? other : -1;
    score += best_gain;
  }
  return score;
}

std::vector<int> concept_greedy_start(const AlignmentProblem& prob) {
  const int ng = static_cast<int>(prob.gold_var_count());
  const int np = static_cast<int>(prob.pred_var_count());
  std::vector<int> mapping(static_cast<size_t>(ng), -1);
  std::vector<bool> used(static_cast<size_t>(np), false);
  for (int i = 0; i < ng; ++i) {
    for (int j = 0; j < np; ++j) {
      if (!used[static_cast<size_t>(j)] &&
          prob.pred_concept_ids()[static_cast<size_t>(j)] ==
              prob.gold_concept_ids()[static_cast<size_t>(i)]) {
        mapping[static_cast<size_t>(i)] = j;
        used[static_cast<size_t>(j)] = true;
        break;
      }
    }
  }
  for (int i = 0; i < ng; ++i) {
    if (mapping[static_cast<size_t>(i)] >= 0) continue;
    for (int j = 0; j < np; ++j) {
      if (!used[static_cast<size_t>(j)]) {
        mapping[static_cast<size_t>(i)] = j;
        used[static_cast<size_t>(j)] = true;
        break;
      }
    }
  }
  return mapping;
}

std::vector<int> random_start(const AlignmentProblem& prob, Rng& rng) {
  const int ng = static_cast<int>(prob.gold_var_count());
  const int np = static_cast<int>(prob.pred_var_count());
  std::vector<int> perm(static_cast<size_t>(np));
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = np - 1; i > 0; --i) {
    const auto j = static_cast<int>(rng.below(static_cast<uint64_t>(i + 1)));
    std::swap(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(j)]);
  }
  std::vector<int> mapping(static_cast<size_t>(ng), -1);
  for (int i = 0; i < ng && i < np; ++i) mapping[static_cast<size_t>(i)] = perm[static_cast<size_t>(i)];
  return mapping;
}

}  // namespace

SmatchResult smatch(const AmrGraph& gold, const AmrGraph& pred, int restarts,
                    uint64_t seed) {
  AlignmentProblem prob(gold, pred);
  Rng rng(seed);
  int64_t best = 0;
  {
    std::vector<int> m = concept_greedy_start(prob);
    best = hill_climb(prob, m);
  }
  for (int r = 0; r < restarts; ++r) {
    std::vector<int> m = random_start(prob, rng);
    best = std::max(best, hill_climb(prob, m));
  }
  return smatch_from_counts(best, prob.gold_triple_count(), prob.pred_triple_count());
}

namespace {

void enumerate(const AlignmentProblem& prob, int i, std::vector<int>& mapping,
               std::vector<bool>& used, bool swapped, int64_t& best) {
  const int ng = static_cast<int>(prob.gold_var_count());
  const int np = static_cast<int>(prob.pred_var_count());
  const int small = swapped ? np : ng;
  if (i == small) {
    if (swapped) {
      // mapping currently maps pred -> gold; invert for scoring
      std::vector<int> inv(static_cast<size_t>(ng), -1);
      for (int k = 0; k < small; ++k) {
        if (mapping[static_cast<size_t>(k)] >= 0) {
          inv[static_cast<size_t>(mapping[static_cast<size_t>(k)])] = k;
        }
      }
      best = std::max(best, prob.matched(inv));
    } else {
      best = std::max(best, prob.matched(mapping));
    }
    return;
  }
  const int large = swapped ? ng : np;
  for (int j = 0; j < large; ++j) {
    if (used[static_cast<size_t>(j)]) continue;
    used[static_cast<size_t>(j)] = true;
    mapping[static_cast<size_t>(i)] = j;
    enumerate(prob, i + 1, mapping, used, swapped, best);
    used[static_cast<size_t>(j)] = false;
  }
  mapping[static_cast<size_t>(i)] = -1;
}

}  // namespace

SmatchResult smatch_exhaustive(const AmrGraph& gold, const AmrGraph& pred) {
  AlignmentProblem prob(gold, pred);
  const int64_t ng = prob.gold_var_count(), np = prob.pred_var_count();
  if (std::min(ng, np) > 8) {
    throw UsageError("smatch_exhaustive: more than 8 variables on both sides");
  }
  // Enumerate injections from the smaller variable set into the larger.
  const bool swapped = np < ng;
  std::vector<int> mapping(static_cast<size_t>(swapped ? np : ng), -1);
  std::vector<bool> used(static_cast<size_t>(swapped ? ng : np), false);
  int64_t best = 0;
  enumerate(prob, 0, mapping, used, swapped, best);
  return smatch_from_counts(best, prob.gold_triple_count(), prob.pred_triple_count());
}

SmatchResult smatch_corpus(const std::vector<AmrGraph>& golds,
                           const std::vector<AmrGraph>& preds, int restarts,
                           uint64_t seed) {
  if (golds.size() != preds.size()) {
    throw DataError("smatch_corpus: gold/pred counts differ");
  }
  int64_t matched = 0, gold_count = 0, pred_count = 0;
  for (size_t i = 0; i < golds.size(); ++i) {
    const SmatchResult r = smatch(golds[i], preds[i], restarts, seed + i);
    matched += r.matched;
    gold_count += r.gold_count;
    pred_count += r.pred_count;
  }
  return smatch_from_counts(matched, gold_count, pred_count);
}

}  // namespace mtlsp
