#include "mtlsp/amr.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <sstream>

namespace mtlsp {

bool AmrGraph::has_var(const std::string& var) const {
  for (const auto& [v, c] : nodes) {
    if (v == var) return true;
  }
  return false;
}

const std::string& AmrGraph::concept_of(const std::string& var) const {
  for (const auto& [v, c] : nodes) {
    if (v == var) return c;
  }
  throw DataError("unknown variable: " + var);
}

void AmrGraph::validate() const {
  if (nodes.empty()) throw DataError("graph has no nodes");
  std::set<std::string> vars;
  for (const auto& [v, c] : nodes) {
    if (!vars.insert(v).second) throw DataError("duplicate variable: " + v);
    if (c.empty()) throw DataError("empty concept for variable: " + v);
  }
  if (!vars.count(top)) throw DataError("top variable not defined: " + top);
  for (const AmrEdge& e : edges) {
    if (!vars.count(e.source)) {
      throw DataError("edge from undefined variable: " + e.source);
    }
    if (e.target_is_var && !vars.count(e.target)) {
      throw DataError("edge to undefined variable: " + e.target);
    }
  }
  // Undirected reachability from top.
  std::set<std::string> seen{top};
  bool grew = true;
  while (grew) {
    grew = false;
    for (const AmrEdge& e : edges) {
      if (!e.target_is_var) {
        continue;
      }
      const bool s = seen.count(e.source) > 0, t = seen.count(e.target) > 0;
      if (s && !t) {
        seen.insert(e.target);
        grew = true;
      } else if (t && !s) {
        seen.insert(e.source);
        grew = true;
      }
    }
  }
  if (seen.size() != vars.size()) {
    throw DataError("graph is not connected from top");
  }
}

bool is_variable_token(const std::string& token) {
  if (token.empty()) return false;
  if (token[0] < 'a' || token[0] > 'z') return false;
  for (size_t i = 1; i < token.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(token[i]))) return false;
  }
  return true;
}

namespace {

std::vector<std::string> penman_tokens(const std::string& text) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '(' || c == ')' || c == '/') {
      out.emplace_back(1, c);
      ++i;
    } else if (c == '"') {
      size_t j = i + 1;
      while (j < text.size() && text[j] != '"') ++j;
      if (j == text.size()) throw DataError("unterminated string literal");
      out.push_back(text.substr(i, j - i + 1));
      i = j + 1;
    } else {
      size_t j = i;
      while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j])) &&
             text[j] != '(' && text[j] != ')' && text[j] != '/') {
        ++j;
      }
      out.push_back(text.substr(i, j - i));
      i = j;
    }
  }
  return out;
}

struct PenmanParser {
  const std::vector<std::string>& toks;
  size_t pos = 0;
  AmrGraph graph;
  // Bare edge targets are resolved after the whole string is read, so
  // forward references work.
  std::vector<size_t> pending_bare;  // indices into graph.edges

  const std::string& peek() const {
    if (pos >= toks.size()) throw DataError("unexpected end of PENMAN input");
    return toks[pos];
  }
  std::string next() {
    if (pos >= toks.size()) throw DataError("unexpected end of PENMAN input");
    return toks[pos++];
  }

  // node := '(' var '/' concept (':' label value)* ')'
  std::string parse_node() {
    if (next() != "(") throw DataError("expected '(' in PENMAN input");
    const std::string var = next();
    if (var == "(" || var == ")" || var == "/") {
      throw DataError("expected variable after '('");
    }
    if (graph.has_var(var)) throw DataError("duplicate variable definition: " + var);
    if (next() != "/") throw DataError("expected '/' after variable " + var);
    const std::string concept = next();
    if (concept == "(" || concept == ")" || concept == "/") {
      throw DataError("expected concept after '/'");
    }
    graph.nodes.emplace_back(var, concept);
    while (true) {
      const std::string& t = peek();
      if (t == ")") {
        ++pos;
        return var;
      }
      if (t.empty() || t[0] != ':') {
        throw DataError("expected relation or ')' but found '" + t + "'");
      }
      const std::string label = next().substr(1);
      if (label.empty()) throw DataError("empty relation label");
      if (peek() == "(") {
        const std::string child = parse_node();
        graph.edges.push_back({var, label, child, true});
      } else {
        const std::string value = next();
        if (value == ")" || value == "/") {
          throw DataError("missing value after relation :" + label);
        }
        graph.edges.push_back({var, label, value, false});
        if (is_variable_token(value)) {
          pending_bare.push_back(graph.edges.size() - 1);
        }
      }
    }
  }
};

}  // namespace

AmrGraph parse_penman(const std::string& text) {
  const std::vector<std::string> toks = penman_tokens(text);
  if (toks.empty()) throw DataError("empty PENMAN input");
  PenmanParser p{toks};
  p.graph.top = p.parse_node();
  if (p.pos != toks.size()) {
    throw DataError("trailing tokens after PENMAN graph");
  }
  for (size_t idx : p.pending_bare) {
    AmrEdge& e = p.graph.edges[idx];
    if (p.graph.has_var(e.target)) {
      e.target_is_var = true;
    } else {
      throw DataError("undefined variable reference: " + e.target);
    }
  }
  p.graph.validate();
  return p.graph;
}

namespace {

void penman_write(const AmrGraph& g, const std::string& var,
                  std::set<std::string>& open, std::set<std::string>& done,
                  std::ostringstream& os) {
  os << "(" << var << " / " << g.concept_of(var);
  open.insert(var);
  done.insert(var);
  for (const AmrEdge& e : g.edges) {
    if (e.source != var) continue;
    os << " :" << e.relation << " ";
    if (!e.target_is_var) {
      os << e.target;
    } else if (done.count(e.target)) {
      os << e.target;
    } else {
      penman_write(g, e.target, open, done, os);
    }
  }
  os << ")";
  open.erase(var);
}

}  // namespace

std::string to_penman(const AmrGraph& graph) {
  graph.validate();
  std::ostringstream os;
  std::set<std::string> open, done;
  penman_write(graph, graph.top, open, done, os);
  if (done.size() != graph.nodes.size()) {
    throw DataError("graph has nodes unreachable along edge direction");
  }
  return os.str();
}

namespace {

void linearize_visit(const AmrGraph& g, const std::string& var,
                     std::set<std::string>& visited,
                     std::vector<std::string>& out) {
  visited.insert(var);
  out.push_back("(");
  out.push_back(g.concept_of(var));
  for (const AmrEdge& e : g.edges) {
    if (e.source != var) continue;
    out.push_back(":" + e.relation);
    if (!e.target_is_var) {
      out.push_back(e.target);
    } else if (!visited.count(e.target)) {
      linearize_visit(g, e.target, visited, out);
    } else {
      // re-entrant reference: concept only
      out.push_back("(");
      out.push_back(g.concept_of(e.target));
      out.push_back(")");
    }
  }
  out.push_back(")");
}

}  // namespace

std::vector<std::string> linearize(const AmrGraph& graph) {
  graph.validate();
  std::vector<std::string> out;
  std::set<std::string> visited;
  linearize_visit(graph, graph.top, visited, out);
  return out;
}

namespace {

// Bracket repair: drop closers that would go below depth zero, then close
// whatever is still open at the end.
std::vector<std::string> repair_brackets(const std::vector<std::string>& tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size() + 2);
  int depth = 0;
  for (const std::string& t : tokens) {
    if (t == ")") {
      if (depth == 0) continue;
      --depth;
    } else if (t == "(") {
      ++depth;
    }
    out.push_back(t);
  }
  if (out.empty() || out.front() != "(") {
    out.insert(out.begin(), "(");
    ++depth;
  }
  for (; depth > 0; --depth) out.emplace_back(")");
  return out;
}

struct RestoreParser {
  const std::vector<std::string>& toks;
  size_t pos = 0;
  AmrGraph graph;
  int next_var = 0;

  std::string fresh_var() { return "v" + std::to_string(next_var++); }

  bool at_end() const { return pos >= toks.size(); }
  const std::string& peek() const { return toks[pos]; }

  // node := '(' concept (':' label value)* ')'
  // value := node | bare constant token
  std::string parse_node() {
    ++pos;  // '('
    if (at_end() || peek() == ")" || peek() == "(" ||
        (!peek().empty() && peek()[0] == ':')) {
      throw DataError("node without concept");
    }
    const std::string concept = toks[pos++];
    const std::string var = fresh_var();
    graph.nodes.emplace_back(var, concept);
    while (!at_end() && peek() != ")") {
      const std::string& t = peek();
      if (t.empty() || t[0] != ':') {
        throw DataError("expected relation label, found '" + t + "'");
      }
      const std::string label = t.substr(1);
      ++pos;
      if (at_end() || peek() == ")" || (!peek().empty() && peek()[0] == ':')) {
        continue;  // dangling relation label: dropped
      }
      if (label.empty()) throw DataError("empty relation label");
      if (peek() == "(") {
        const std::string child = parse_node();
        graph.edges.push_back({var, label, child, true});
      } else {
        graph.edges.push_back({var, label, toks[pos++], false});
      }
    }
    if (!at_end()) ++pos;  // ')'
    return var;
  }
};

// Later duplicates of an already-seen concept merge into its first node,
// provided the duplicate is a leaf. Linearization always expands the
// first depth-first occurrence, so copies are leaves appearing later.
void merge_duplicate_leaves(AmrGraph& g) {
  std::set<std::string> has_children;
  for (const AmrEdge& e : g.edges) has_children.insert(e.source);

  std::map<std::string, std::string> first_with_concept;  // concept -> var
  std::map<std::string, std::string> replace;             // old var -> new var
  std::vector<std::pair<std::string, std::string>> kept;
  for (const auto& [var, concept] : g.nodes) {
    auto it = first_with_concept.find(concept);
    const bool leaf = !has_children.count(var);
    if (it != first_with_concept.end() && leaf && var != g.top) {
      replace[var] = it->second;
    } else {
      kept.emplace_back(var, concept);
      if (it == first_with_concept.end()) first_with_concept[concept] = var;
    }
  }
  if (replace.empty()) return;
  g.nodes = std::move(kept);
  for (AmrEdge& e : g.edges) {
    if (!e.target_is_var) continue;
    auto it = replace.find(e.target);
    if (it != replace.end()) e.target = it->second;
  }
}

}  // namespace

namespace {

// Longest valid prefix: the component reachable from the first node over
// the edges that materialized before the failure.
std::optional<AmrGraph> prefix_graph(const AmrGraph& partial) {
  if (partial.nodes.empty()) return std::nullopt;
  AmrGraph prefix;
  prefix.top = partial.nodes.front().first;
  std::set<std::string> reach{prefix.top};
  bool grew = true;
  while (grew) {
    grew = false;
    for (const AmrEdge& e : partial.edges) {
      if (e.target_is_var && reach.count(e.source) && !reach.count(e.target) &&
          partial.has_var(e.target)) {
        reach.insert(e.target);
        grew = true;
      }
    }
  }
  for (const auto& [var, concept] : partial.nodes) {
    if (reach.count(var)) prefix.nodes.emplace_back(var, concept);
  }
  for (const AmrEdge& e : partial.edges) {
    if (reach.count(e.source) && (!e.target_is_var || reach.count(e.target))) {
      prefix.edges.push_back(e);
    }
  }
  try {
    merge_duplicate_leaves(prefix);
    prefix.validate();
  } catch (const DataError&) {
    return std::nullopt;
  }
  return prefix;
}

}  // namespace

AmrGraph restore(const std::vector<std::string>& tokens) {
  const std::vector<std::string> repaired = repair_brackets(tokens);
  RestoreParser p{repaired};
  std::string message;
  try {
    p.graph.top = p.parse_node();
    merge_duplicate_leaves(p.graph);
    p.graph.validate();
    return p.graph;
  } catch (const DataError& e) {
    message = e.what();
  }
  throw RestoreError("irreparable sequence: " + message, prefix_graph(p.graph));
}

}  // namespace mtlsp
