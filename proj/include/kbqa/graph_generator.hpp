#pragma once

// Staged candidate generation: main paths from each linked entity, then
// entity, type, time and ordinal constraints in that order. Every stage keeps
// its input graphs and only adds constrained variants that still execute to
// at least one answer.

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "kbqa/focus_linker.hpp"
#include "kbqa/graph_executor.hpp"
#include "kbqa/kb_store.hpp"
#include "kbqa/query_graph.hpp"

namespace kbqa {

struct GeneratorConfig {
  /// Allow 2-hop paths through nodes that are not marked as CVT.
  bool allow_non_cvt = false;
  std::size_t max_main_paths = 500;
  std::size_t max_candidates = 2000;
};

namespace detail {

inline std::vector<std::string> distinct_entity_ids(const FocusLinks& focus) {
  std::vector<std::string> ids;
  for (const auto& e : focus.entities) {
    if (std::find(ids.begin(), ids.end(), e.id) == ids.end()) ids.push_back(e.id);
  }
  return ids;
}

/// Non-reserved (predicate, direction, neighbour) steps out of `node`.
inline std::vector<std::pair<Hop, const Edge*>> steps_from(const KnowledgeBase& kb, const std::string& node) {
  std::vector<std::pair<Hop, const Edge*>> out;
  for (const auto& e : kb.out_edges(node)) {
    if (!is_reserved_predicate(e.predicate)) out.push_back({{e.predicate, Direction::Forward}, &e});
  }
  for (const auto& e : kb.in_edges(node)) {
    if (!is_reserved_predicate(e.predicate)) out.push_back({{e.predicate, Direction::Backward}, &e});
  }
  return out;
}

/// Values bound to `node` across the graph's bindings.
inline std::set<std::string> node_values(const QueryGraph& g, const AnswerSet& result, NodeRef node) {
  std::set<std::string> values;
  if (node == NodeRef::Topic) {
    values.insert(g.main.topic);
    return values;
  }
  for (const auto& b : result.bindings) values.insert(node_value(g, b, node));
  return values;
}

inline std::vector<NodeRef> path_nodes(const QueryGraph& g) {
  if (g.main.has_mediator()) return {NodeRef::Topic, NodeRef::Mediator, NodeRef::Answer};
  return {NodeRef::Topic, NodeRef::Answer};
}

inline bool graph_order(const QueryGraph& a, const QueryGraph& b) {
  if (a.main.hops.size() != b.main.hops.size()) return a.main.hops.size() < b.main.hops.size();
  return serialize(a) < serialize(b);
}

}  // namespace detail

/// All distinct 1-hop paths and all 2-hop paths through a CVT node (or any
/// entity when allow_non_cvt) from every linked entity. A second hop that
/// walks straight back over the first predicate is skipped. Reserved
/// predicates (isa, name) are never traversed.
inline std::vector<MainPath> generate_main_paths(const FocusLinks& focus, const KnowledgeBase& kb,
                                                 const GeneratorConfig& limits = {}) {
  std::vector<MainPath> one_hop, two_hop;
  for (const auto& topic : detail::distinct_entity_ids(focus)) {
    std::set<Hop> firsts;
    std::set<std::pair<Hop, Hop>> seconds;
    for (const auto& [hop1, edge1] : detail::steps_from(kb, topic)) {
      firsts.insert(hop1);
      const std::string& mid = edge1->node;
      if (edge1->kind != LiteralKind::None) continue;
      if (!limits.allow_non_cvt && !kb.is_cvt(mid)) continue;
      for (const auto& [hop2, edge2] : detail::steps_from(kb, mid)) {
        (void)edge2;
        if (hop2.predicate == hop1.predicate && hop2.direction != hop1.direction) continue;
        seconds.insert({hop1, hop2});
      }
    }
    for (const auto& h : firsts) one_hop.push_back({topic, {h}});
    for (const auto& [h1, h2] : seconds) two_hop.push_back({topic, {h1, h2}});
  }
  std::vector<MainPath> out = std::move(one_hop);
  out.insert(out.end(), two_hop.begin(), two_hop.end());
  if (out.size() > limits.max_main_paths) out.resize(limits.max_main_paths);
  return out;
}

/// Adds every satisfiable combination of entity constraints, at most one per
/// linked entity (other than the topic). Unconstrained graphs are kept.
inline std::vector<QueryGraph> attach_entity_constraints(const std::vector<QueryGraph>& graphs,
                                                         const FocusLinks& focus, const KnowledgeBase& kb) {
  std::vector<QueryGraph> out;
  const auto entity_ids = detail::distinct_entity_ids(focus);
  for (const auto& g : graphs) {
    std::vector<EntityConstraint> options;
    const AnswerSet base = execute(g, kb);
    for (const auto& ent : entity_ids) {
      if (ent == g.main.topic) continue;
      std::set<EntityConstraint> found;
      for (NodeRef node : detail::path_nodes(g)) {
        for (const auto& v : detail::node_values(g, base, node)) {
          for (const auto& e : kb.out_edges(v)) {
            if (e.node == ent && !is_reserved_predicate(e.predicate)) {
              found.insert({node, e.predicate, Direction::Forward, ent});
            }
          }
          for (const auto& e : kb.in_edges(v)) {
            if (e.node == ent && !is_reserved_predicate(e.predicate)) {
              found.insert({node, e.predicate, Direction::Backward, ent});
            }
          }
        }
      }
      options.insert(options.end(), found.begin(), found.end());
    }

    std::vector<QueryGraph> local{g};
    for (const auto& c : options) {
      const std::size_t n = local.size();
      for (std::size_t i = 0; i < n; ++i) {
        const auto& h = local[i];
        bool used = std::any_of(h.entities.begin(), h.entities.end(),
                                [&](const EntityConstraint& x) { return x.entity == c.entity; });
        if (used) continue;
        QueryGraph next = h;
        next.entities.push_back(c);
        std::sort(next.entities.begin(), next.entities.end());
        if (!execute(next, kb).empty()) local.push_back(std::move(next));
      }
    }
    out.insert(out.end(), local.begin(), local.end());
  }
  return out;
}

/// Adds Type(t) on the answer for each linked type some answer carries.
inline std::vector<QueryGraph> attach_type_constraints(const std::vector<QueryGraph>& graphs,
                                                       const FocusLinks& focus, const KnowledgeBase& kb) {
  std::vector<std::string> types;
  for (const auto& t : focus.types) {
    if (std::find(types.begin(), types.end(), t.id) == types.end()) types.push_back(t.id);
  }
  std::vector<QueryGraph> out;
  for (const auto& g : graphs) {
    out.push_back(g);
    if (g.type) continue;
    for (const auto& t : types) {
      QueryGraph next = g;
      next.type = t;
      if (!execute(next, kb).empty()) out.push_back(std::move(next));
    }
  }
  return out;
}

/// Adds Time(node, p, year, comparator) for each time link and each
/// date-valued predicate on a path node.
inline std::vector<QueryGraph> attach_time_constraints(const std::vector<QueryGraph>& graphs,
                                                       const FocusLinks& focus, const KnowledgeBase& kb) {
  std::set<TimeValue> seen;
  std::vector<TimeValue> times;
  for (const auto& t : focus.times) {
    if (seen.insert(t.time).second) times.push_back(t.time);
  }
  std::vector<QueryGraph> out;
  for (const auto& g : graphs) {
    out.push_back(g);
    if (g.time || times.empty()) continue;
    const AnswerSet base = execute(g, kb);
    for (NodeRef node : detail::path_nodes(g)) {
      std::set<std::string> preds;
      for (const auto& v : detail::node_values(g, base, node)) {
        for (const auto& e : kb.out_edges(v)) {
          if (e.kind == LiteralKind::Date && !is_reserved_predicate(e.predicate)) preds.insert(e.predicate);
        }
      }
      for (const auto& p : preds) {
        for (const auto& t : times) {
          QueryGraph next = g;
          next.time = TimeConstraint{node, p, t};
          if (!execute(next, kb).empty()) out.push_back(std::move(next));
        }
      }
    }
  }
  return out;
}

/// Adds Ordinal(node, p, direction, rank) for each ordinal link and each
/// numeric- or date-valued predicate on the mediator or answer.
inline std::vector<QueryGraph> attach_ordinal_constraints(const std::vector<QueryGraph>& graphs,
                                                          const FocusLinks& focus, const KnowledgeBase& kb) {
  std::set<OrdinalValue> seen;
  std::vector<OrdinalValue> ordinals;
  for (const auto& o : focus.ordinals) {
    if (seen.insert(o.ordinal).second) ordinals.push_back(o.ordinal);
  }
  std::vector<QueryGraph> out;
  for (const auto& g : graphs) {
    out.push_back(g);
    if (g.ordinal || ordinals.empty()) continue;
    const AnswerSet base = execute(g, kb);
    for (NodeRef node : detail::path_nodes(g)) {
      if (node == NodeRef::Topic) continue;
      std::set<std::string> preds;
      for (const auto& v : detail::node_values(g, base, node)) {
        for (const auto& e : kb.out_edges(v)) {
          if ((is_numeric_kind(e.kind) || e.kind == LiteralKind::Date) && !is_reserved_predicate(e.predicate)) {
            preds.insert(e.predicate);
          }
        }
      }
      for (const auto& p : preds) {
        for (const auto& o : ordinals) {
          QueryGraph next = g;
          next.ordinal = OrdinalConstraint{node, p, o};
          if (!execute(next, kb).empty()) out.push_back(std::move(next));
        }
      }
    }
  }
  return out;
}

/// Dedupes and orders (shorter paths first, then canonical text), then caps.
inline std::vector<QueryGraph> finalize_candidates(std::vector<QueryGraph> graphs, std::size_t cap) {
  std::sort(graphs.begin(), graphs.end(), detail::graph_order);
  graphs.erase(std::unique(graphs.begin(), graphs.end()), graphs.end());
  if (graphs.size() > cap) graphs.resize(cap);
  return graphs;
}

/// Candidate set for already-linked focus nodes.
inline std::vector<QueryGraph> generate_candidates(const FocusLinks& focus, const KnowledgeBase& kb,
                                                   const GeneratorConfig& config = {}) {
  std::vector<QueryGraph> graphs;
  for (auto& path : generate_main_paths(focus, kb, config)) graphs.push_back(make_graph(std::move(path)));
  graphs = attach_entity_constraints(graphs, focus, kb);
  graphs = attach_type_constraints(graphs, focus, kb);
  graphs = attach_time_constraints(graphs, focus, kb);
  graphs = attach_ordinal_constraints(graphs, focus, kb);
  return finalize_candidates(std::move(graphs), config.max_candidates);
}

inline std::vector<QueryGraph> generate_candidates(const Tokens& question, const KnowledgeBase& kb,
                                                   const Lexicon& lexicon, const LinkerConfig& linker = {},
                                                   const GeneratorConfig& config = {}) {
  return generate_candidates(link_focus_nodes(question, kb, lexicon, linker), kb, config);
}

}  // namespace kbqa
