#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mtlsp/errors.hpp"

namespace mtlsp {

// Rooted directed labeled graph. Nodes and edges keep insertion order:
// serialization and linearization walk children in input edge order.
struct AmrEdge {
  std::string source;    // variable
  std::string relation;  // label without the leading ':'
  std::string target;    // variable name or constant literal
  bool target_is_var = false;
};

struct AmrGraph {
  std::vector<std::pair<std::string, std::string>> nodes;  // var -> concept
  std::vector<AmrEdge> edges;
  std::string top;

  bool has_var(const std::string& var) const;
  const std::string& concept_of(const std::string& var) const;
  // top in nodes, edge endpoints defined, vars unique, connected from top
  // following edges in either direction. Throws DataError on violation.
  void validate() const;
};

// Matches the variable namespace: one lowercase letter plus optional digits.
bool is_variable_token(const std::string& token);

// PENMAN text -> graph. Bare references to defined variables become
// re-entrant edges; bare atoms outside the variable pattern are constants.
AmrGraph parse_penman(const std::string& text);

// Single-line PENMAN. Every node must be forward-reachable from top;
// re-entrant references serialize as bare variables.
std::string to_penman(const AmrGraph& graph);

// Variable-free bracketed token sequence, depth-first from top in input
// edge order. A re-entrant reference duplicates the target's concept only.
std::vector<std::string> linearize(const AmrGraph& graph);

// Thrown by restore() when no graph can be recovered; carries the graph
// built from the longest parseable prefix when one exists.
class RestoreError : public DataError {
 public:
  RestoreError(const std::string& message, std::optional<AmrGraph> prefix)
      : DataError(message), prefix_(std::move(prefix)) {}
  const std::optional<AmrGraph>& prefix() const { return prefix_; }

 private:
  std::optional<AmrGraph> prefix_;
};

// Inverse of linearize on model output. Repairs unbalanced brackets
// (drops excess closers, closes at end) and dangling relation labels,
// assigns fresh variables, then merges later duplicate leaf concepts into
// the earliest node with that concept to recover re-entrancies.
AmrGraph restore(const std::vector<std::string>& tokens);

}  // namespace mtlsp
