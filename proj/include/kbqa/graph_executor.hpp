#pragma once

// Executes query graphs against the in-memory KB.
//
// Semantics: a binding assigns the mediator (2-hop paths), the answer, and
// the values read by the time and ordinal constraints. Bindings must match
// every main-path and entity-constraint edge and the answer type. Time
// constraints keep values whose year compares strictly (after/before) or
// equally (in). Ordinal constraints sort the surviving bindings by value
// (then answer id, then the rest of the binding) and keep the rank-th one.

#include <algorithm>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "kbqa/kb_store.hpp"
#include "kbqa/query_graph.hpp"

namespace kbqa {

struct Binding {
  std::string mediator;  // empty for 1-hop paths
  std::string answer;
  std::string time_value;
  std::string ordinal_value;
  auto operator<=>(const Binding&) const = default;
};

struct AnswerSet {
  std::set<std::string> answers;
  std::vector<Binding> bindings;

  bool empty() const { return answers.empty(); }
};

namespace detail {

/// Edges of `edges` (sorted by predicate) whose predicate equals `p`.
inline std::span<const Edge> with_predicate(std::span<const Edge> edges, std::string_view p) {
  auto lo = std::lower_bound(edges.begin(), edges.end(), p,
                             [](const Edge& e, std::string_view v) { return e.predicate < v; });
  auto hi = std::upper_bound(lo, edges.end(), p,
                             [](std::string_view v, const Edge& e) { return v < e.predicate; });
  return {lo, hi};
}

/// Neighbours of `node` across `hop`, with their literal kinds.
inline std::span<const Edge> step(const KnowledgeBase& kb, const std::string& node, const Hop& hop) {
  return hop.direction == Direction::Forward ? with_predicate(kb.out_edges(node), hop.predicate)
                                             : with_predicate(kb.in_edges(node), hop.predicate);
}

inline const std::string& node_value(const QueryGraph& g, const Binding& b, NodeRef n) {
  switch (n) {
    case NodeRef::Topic: return g.main.topic;
    case NodeRef::Mediator: return b.mediator;
    case NodeRef::Answer: break;
  }
  return b.answer;
}

inline bool year_matches(int year, const TimeValue& t) {
  switch (t.comparator) {
    case TimeComparator::After: return year > t.year;
    case TimeComparator::Before: return year < t.year;
    case TimeComparator::In: break;
  }
  return year == t.year;
}

}  // namespace detail

inline AnswerSet execute(const QueryGraph& g, const KnowledgeBase& kb) {
  AnswerSet result;
  if (!g.well_formed()) return result;

  std::vector<Binding> rows;
  for (const auto& e1 : detail::step(kb, g.main.topic, g.main.hops[0])) {
    if (!g.main.has_mediator()) {
      rows.push_back({"", e1.node, "", ""});
      continue;
    }
    if (e1.kind != LiteralKind::None) continue;  // mediators are entities
    for (const auto& e2 : detail::step(kb, e1.node, g.main.hops[1])) {
      rows.push_back({e1.node, e2.node, "", ""});
    }
  }

  auto keep = [&](auto&& pred) {
    rows.erase(std::remove_if(rows.begin(), rows.end(), [&](const Binding& b) { return !pred(b); }), rows.end());
  };
  for (const auto& c : g.entities) {
    keep([&](const Binding& b) {
      const auto& v = detail::node_value(g, b, c.node);
      return c.direction == Direction::Forward ? kb.has_triple(v, c.predicate, c.entity)
                                               : kb.has_triple(c.entity, c.predicate, v);
    });
  }
  if (g.type) {
    keep([&](const Binding& b) { return kb.types_of(b.answer).contains(*g.type); });
  }
  if (g.time) {
    std::vector<Binding> next;
    for (const auto& b : rows) {
      const auto& v = detail::node_value(g, b, g.time->node);
      for (const auto& e : detail::with_predicate(kb.out_edges(v), g.time->predicate)) {
        if (e.kind != LiteralKind::Date) continue;
        auto year = date_year(e.node);
        if (year && detail::year_matches(*year, g.time->value)) {
          Binding nb = b;
          nb.time_value = e.node;
          next.push_back(std::move(nb));
        }
      }
    }
    rows = std::move(next);
  }

  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());

  if (g.ordinal) {
    struct Keyed {
      double key;
      Binding row;
    };
    std::vector<Keyed> keyed;
    for (const auto& b : rows) {
      const auto& v = detail::node_value(g, b, g.ordinal->node);
      for (const auto& e : detail::with_predicate(kb.out_edges(v), g.ordinal->predicate)) {
        if (!is_numeric_kind(e.kind) && e.kind != LiteralKind::Date) continue;
        auto key = literal_sort_value(e.node, e.kind);
        if (!key) continue;
        Binding nb = b;
        nb.ordinal_value = e.node;
        keyed.push_back({*key, std::move(nb)});
      }
    }
    const bool descending = g.ordinal->value.direction == OrdinalDirection::Max;
    std::sort(keyed.begin(), keyed.end(), [&](const Keyed& a, const Keyed& b) {
      if (a.key != b.key) return descending ? a.key > b.key : a.key < b.key;
      if (a.row.answer != b.row.answer) return a.row.answer < b.row.answer;
      return a.row < b.row;
    });
    keyed.erase(std::unique(keyed.begin(), keyed.end(),
                            [](const Keyed& a, const Keyed& b) { return a.row == b.row; }),
                keyed.end());
    rows.clear();
    const auto rank = static_cast<std::size_t>(g.ordinal->value.rank);
    if (rank >= 1 && rank <= keyed.size()) rows.push_back(keyed[rank - 1].row);
  }

  for (const auto& b : rows) result.answers.insert(b.answer);
  result.bindings = std::move(rows);
  return result;
}

/// Answer F1 = 2PR/(P+R). Zero when either side is empty (including both).
inline double answer_f1(const std::set<std::string>& predicted, const std::set<std::string>& gold) {
  if (predicted.empty() || gold.empty()) return 0.0;
  std::size_t hit = 0;
  for (const auto& a : predicted) hit += gold.contains(a) ? 1 : 0;
  if (hit == 0) return 0.0;
  const double p = static_cast<double>(hit) / static_cast<double>(predicted.size());
  const double r = static_cast<double>(hit) / static_cast<double>(gold.size());
  return 2.0 * p * r / (p + r);
}

inline double answer_f1(const AnswerSet& predicted, const std::set<std::string>& gold) {
  return answer_f1(predicted.answers, gold);
}

/// SPARQL-style rendering for export and debugging. Execution never goes
/// through this text.
inline std::string to_sparql_text(const QueryGraph& g) {
  auto iri = [](const std::string& id) { return "<" + id + ">"; };
  const std::string topic = iri(g.main.topic);
  auto term = [&](NodeRef n) -> std::string {
    switch (n) {
      case NodeRef::Topic: return topic;
      case NodeRef::Mediator: return "?m";
      case NodeRef::Answer: break;
    }
    return "?x";
  };
  auto edge = [&](const std::string& from, const std::string& p, const std::string& to, Direction d) {
    return d == Direction::Forward ? "  " + from + " " + iri(p) + " " + to + " .\n"
                                   : "  " + to + " " + iri(p) + " " + from + " .\n";
  };

  std::ostringstream out;
  out << "SELECT DISTINCT ?x WHERE {\n";
  const auto& hops = g.main.hops;
  const std::string first_target = g.main.has_mediator() ? "?m" : "?x";
  out << edge(topic, hops[0].predicate, first_target, hops[0].direction);
  if (g.main.has_mediator()) out << edge("?m", hops[1].predicate, "?x", hops[1].direction);
  for (const auto& c : g.entities) out << edge(term(c.node), c.predicate, iri(c.entity), c.direction);
  if (g.type) out << "  ?x " << iri(std::string(kIsaPredicate)) << " " << iri(*g.type) << " .\n";
  if (g.time) {
    out << "  " << term(g.time->node) << " " << iri(g.time->predicate) << " ?tv .\n";
    const char* op = g.time->value.comparator == TimeComparator::After    ? ">"
                     : g.time->value.comparator == TimeComparator::Before ? "<"
                                                                          : "=";
    out << "  FILTER (YEAR(?tv) " << op << " " << g.time->value.year << ")\n";
  }
  if (g.ordinal) out << "  " << term(g.ordinal->node) << " " << iri(g.ordinal->predicate) << " ?ov .\n";
  out << "}";
  if (g.ordinal) {
    out << "\nORDER BY " << (g.ordinal->value.direction == OrdinalDirection::Max ? "DESC" : "ASC")
        << "(?ov) ?x LIMIT 1";
    if (g.ordinal->value.rank > 1) out << " OFFSET " << (g.ordinal->value.rank - 1);
  }
  out << "\n";
  return out.str();
}

}  // namespace kbqa
