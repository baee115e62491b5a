#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtlsp/amr.hpp"

namespace mtlsp {

struct MatchResult {
  std::vector<bool> matches;
  double accuracy = 0.0;
};

// Whitespace-normalized comparison: "a  b" equals "a b".
MatchResult exact_match(const std::vector<std::string>& predictions,
                        const std::vector<std::string>& golds);

struct Triple {
  std::string a;      // variable
  std::string rel;    // "instance", "TOP", or a relation label
  std::string b;      // variable, concept, or constant
  bool b_is_var = false;
  bool operator==(const Triple&) const = default;
};

// Instance triples, relation triples, attribute triples, and one
// (top, "TOP", concept-of-top) triple.
std::vector<Triple> to_triples(const AmrGraph& graph);

struct SmatchResult {
  int64_t matched = 0;
  int64_t gold_count = 0;
  int64_t pred_count = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

SmatchResult smatch_from_counts(int64_t matched, int64_t gold_count,
                                int64_t pred_count);

// Variable-alignment instance shared by the hill climber, the exhaustive
// oracle, and the property tests. mapping[i] is the pred-variable index
// assigned to gold variable i, or -1 for unmapped.
class AlignmentProblem {
 public:
  AlignmentProblem(const AmrGraph& gold, const AmrGraph& pred);

  int64_t gold_var_count() const { return static_cast<int64_t>(gold_concepts_.size()); }
  int64_t pred_var_count() const { return static_cast<int64_t>(pred_concepts_.size()); }
  int64_t gold_triple_count() const { return gold_total_; }
  int64_t pred_triple_count() const { return pred_total_; }

  int64_t matched(const std::vector<int>& mapping) const;

  const std::vector<int>& gold_concept_ids() const { return gold_concepts_; }
  const std::vector<int>& pred_concept_ids() const { return pred_concepts_; }

 private:
  struct EncTriple {
    int a;    // gold/pred var index
    int rel;  // interned label
    int b;    // var index when b_is_var, else interned constant
    bool b_is_var;
  };
  std::vector<EncTriple> gold_triples_;
  std::vector<int> gold_concepts_, pred_concepts_;
  int64_t gold_total_ = 0, pred_total_ = 0;
  std::vector<uint64_t> pred_keys_;  // sorted encoded pred triples

  uint64_t encode(int a, int rel, int b, bool b_is_var) const;
};

// Greedy hill climbing over variable mappings: one heuristic start
// (concept-match greedy) plus `restarts` seeded random starts, each
// improved by best single reassignment or swap until a local optimum.
SmatchResult smatch(const AmrGraph& gold, const AmrGraph& pred,
                    int restarts = 4, uint64_t seed = 0);

// Exact maximum over all injective mappings; requires
// min(|vars_gold|, |vars_pred|) <= 8.
SmatchResult smatch_exhaustive(const AmrGraph& gold, const AmrGraph& pred);

// Micro-average: triple counts summed over pairs before P/R/F1.
SmatchResult smatch_corpus(const std::vector<AmrGraph>& golds,
                           const std::vector<AmrGraph>& preds,
                           int restarts = 4, uint64_t seed = 0);

}  // namespace mtlsp
