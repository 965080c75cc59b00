#pragma once

// Query graph: a 1-2 hop main path from a topic entity to the answer variable,
// plus optional entity, type, time and ordinal constraints.
//
// Canonical text form, one graph per line, five TAB-separated fields:
//   main      topic +pred1 [-pred2]          (+ forward, - backward)
//   entities  node +pred entity [node -pred entity ...] | -
//   type      type-id | -
//   time      node pred before|after|in year | -
//   ordinal   node pred max|min rank | -
// where node is one of topic|mediator|answer.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kbqa/focus_linker.hpp"
#include "kbqa/text.hpp"

namespace kbqa {

enum class NodeRef : std::uint8_t { Topic, Mediator, Answer };
enum class Direction : std::uint8_t { Forward, Backward };

inline std::string_view node_name(NodeRef n) {
  switch (n) {
    case NodeRef::Topic: return "topic";
    case NodeRef::Mediator: return "mediator";
    case NodeRef::Answer: break;
  }
  return "answer";
}

inline std::optional<NodeRef> parse_node(std::string_view s) {
  if (s == "topic") return NodeRef::Topic;
  if (s == "mediator") return NodeRef::Mediator;
  if (s == "answer") return NodeRef::Answer;
  return std::nullopt;
}

struct Hop {
  std::string predicate;
  Direction direction = Direction::Forward;
  auto operator<=>(const Hop&) const = default;
};

struct MainPath {
  std::string topic;
  std::vector<Hop> hops;  // 1 or 2

  bool has_mediator() const { return hops.size() == 2; }
  auto operator<=>(const MainPath&) const = default;
};

/// Forward: node --predicate--> entity. Backward: entity --predicate--> node.
struct EntityConstraint {
  NodeRef node = NodeRef::Answer;
  std::string predicate;
  Direction direction = Direction::Forward;
  std::string entity;
  auto operator<=>(const EntityConstraint&) const = default;
};

/// node --predicate--> date literal whose year satisfies the comparator.
struct TimeConstraint {
  NodeRef node = NodeRef::Answer;
  std::string predicate;
  TimeValue value;
  auto operator<=>(const TimeConstraint&) const = default;
};

/// Sort bindings by node --predicate--> value and keep the rank-th.
struct OrdinalConstraint {
  NodeRef node = NodeRef::Answer;
  std::string predicate;
  OrdinalValue value;
  auto operator<=>(const OrdinalConstraint&) const = default;
};

struct QueryGraph {
  MainPath main;
  std::vector<EntityConstraint> entities;  // kept sorted
  std::optional<std::string> type;         // on the answer node
  std::optional<TimeConstraint> time;
  std::optional<OrdinalConstraint> ordinal;

  std::size_t constraint_count() const {
    return entities.size() + (type ? 1 : 0) + (time ? 1 : 0) + (ordinal ? 1 : 0);
  }

  bool uses_node(NodeRef n) const {
    return n != NodeRef::Mediator || main.has_mediator();
  }

  /// Structural validity: 1-2 hops, constraints on existing nodes, rank >= 1.
  bool well_formed() const {
    if (main.topic.empty() || main.hops.empty() || main.hops.size() > 2) return false;
    for (const auto& h : main.hops) {
      if (h.predicate.empty()) return false;
    }
    for (const auto& e : entities) {
      if (!uses_node(e.node) || e.predicate.empty() || e.entity.empty()) return false;
    }
    if (type && type->empty()) return false;
    if (time && (!uses_node(time->node) || time->predicate.empty())) return false;
    if (ordinal && (!uses_node(ordinal->node) || ordinal->predicate.empty() || ordinal->value.rank < 1)) {
      return false;
    }
    return true;
  }

  auto operator<=>(const QueryGraph&) const = default;
};

inline std::string signed_predicate(const std::string& p, Direction d) {
  return (d == Direction::Forward ? "+" : "-") + p;
}

inline std::string serialize(const QueryGraph& g) {
  std::string out = g.main.topic;
  for (const auto& h : g.main.hops) out += " " + signed_predicate(h.predicate, h.direction);
  out += '\t';
  if (g.entities.empty()) {
    out += '-';
  } else {
    for (std::size_t i = 0; i < g.entities.size(); ++i) {
      const auto& e = g.entities[i];
      if (i) out += ' ';
      out += std::string(node_name(e.node)) + " " + signed_predicate(e.predicate, e.direction) + " " + e.entity;
    }
  }
  out += '\t';
  out += g.type ? *g.type : "-";
  out += '\t';
  if (g.time) {
    out += std::string(node_name(g.time->node)) + " " + g.time->predicate + " " +
           std::string(comparator_word(g.time->value.comparator)) + " " + std::to_string(g.time->value.year);
  } else {
    out += '-';
  }
  out += '\t';
  if (g.ordinal) {
    out += std::string(node_name(g.ordinal->node)) + " " + g.ordinal->predicate + " " +
           std::string(direction_word(g.ordinal->value.direction)) + " " +
           std::to_string(g.ordinal->value.rank);
  } else {
    out += '-';
  }
  return out;
}

namespace detail {

inline Hop parse_signed(const std::string& s, const std::string& line) {
  if (s.size() < 2 || (s[0] != '+' && s[0] != '-')) throw DataError("bad signed predicate '" + s + "' in: " + line);
  return {s.substr(1), s[0] == '+' ? Direction::Forward : Direction::Backward};
}

inline NodeRef parse_node_or_throw(const std::string& s, const std::string& line) {
  auto n = parse_node(s);
  if (!n) throw DataError("bad node '" + s + "' in: " + line);
  return *n;
}

inline int parse_int_or_throw(const std::string& s, const std::string& line) {
  std::string_view v = s;
  if (!v.empty() && v[0] == '-') v.remove_prefix(1);
  if (!is_digits(v) || v.size() > 9) throw DataError("bad integer '" + s + "' in: " + line);
  return std::stoi(s);
}

}  // namespace detail

/// Inverse of serialize(). Throws DataError on malformed input.
inline QueryGraph parse_graph(const std::string& line) {
  auto fields = split(line, '\t');
  if (fields.size() != 5) throw DataError("query graph needs 5 tab-separated fields: " + line);
  QueryGraph g;
  auto main = split_ws(fields[0]);
  if (main.size() < 2 || main.size() > 3) throw DataError("main path needs topic and 1-2 hops: " + line);
  g.main.topic = main[0];
  for (std::size_t i = 1; i < main.size(); ++i) g.main.hops.push_back(detail::parse_signed(main[i], line));

  if (fields[1] != "-") {
    auto toks = split_ws(fields[1]);
    if (toks.empty() || toks.size() % 3 != 0) throw DataError("entity constraints come in triples: " + line);
    for (std::size_t i = 0; i < toks.size(); i += 3) {
      auto hop = detail::parse_signed(toks[i + 1], line);
      g.entities.push_back({detail::parse_node_or_throw(toks[i], line), hop.predicate, hop.direction, toks[i + 2]});
    }
    std::sort(g.entities.begin(), g.entities.end());
  }
  if (fields[2] != "-") g.type = fields[2];
  if (fields[3] != "-") {
    auto toks = split_ws(fields[3]);
    auto cmp = toks.size() == 4 ? parse_comparator(toks[2]) : std::nullopt;
    if (!cmp) throw DataError("bad time constraint: " + line);
    g.time = TimeConstraint{detail::parse_node_or_throw(toks[0], line), toks[1],
                            {detail::parse_int_or_throw(toks[3], line), *cmp}};
  }
  if (fields[4] != "-") {
    auto toks = split_ws(fields[4]);
    auto dir = toks.size() == 4 ? parse_direction(toks[2]) : std::nullopt;
    if (!dir) throw DataError("bad ordinal constraint: " + line);
    g.ordinal = OrdinalConstraint{detail::parse_node_or_throw(toks[0], line), toks[1],
                                  {detail::parse_int_or_throw(toks[3], line), *dir}};
  }
  if (!g.well_formed()) throw DataError("query graph is not well formed: " + line);
  return g;
}

inline QueryGraph make_graph(MainPath main) {
  QueryGraph g;
  g.main = std::move(main);
  return g;
}

}  // namespace kbqa
