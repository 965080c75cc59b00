#pragma once

// In-memory triple store with forward/backward adjacency.
//
// File format (UTF-8, one record per line):
//   subject<TAB>predicate<TAB>object[<TAB>literal-kind]
//   # comment
//   #cvt<TAB>entity-id
// literal-kind is one of string|integer|float|date. Objects without a kind
// are entity ids. Types are asserted with the reserved predicate `isa`,
// display names with `name`.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "kbqa/text.hpp"

namespace kbqa {

inline constexpr std::string_view kIsaPredicate = "isa";
inline constexpr std::string_view kNamePredicate = "name";

inline bool is_reserved_predicate(std::string_view p) {
  return p == kIsaPredicate || p == kNamePredicate;
}

enum class LiteralKind : std::uint8_t { None = 0, String, Integer, Float, Date };

inline std::string_view literal_kind_name(LiteralKind k) {
  switch (k) {
    case LiteralKind::String: return "string";
    case LiteralKind::Integer: return "integer";
    case LiteralKind::Float: return "float";
    case LiteralKind::Date: return "date";
    case LiteralKind::None: break;
  }
  return "entity";
}

inline std::optional<LiteralKind> parse_literal_kind(std::string_view s) {
  if (s == "string") return LiteralKind::String;
  if (s == "integer") return LiteralKind::Integer;
  if (s == "float") return LiteralKind::Float;
  if (s == "date") return LiteralKind::Date;
  return std::nullopt;
}

inline bool is_numeric_kind(LiteralKind k) {
  return k == LiteralKind::Integer || k == LiteralKind::Float;
}

/// Year of a date literal ("1980", "1980-05", "1980-05-17").
inline std::optional<int> date_year(std::string_view v) {
  std::size_t n = 0;
  while (n < v.size() && std::isdigit(static_cast<unsigned char>(v[n]))) ++n;
  if (n < 1 || n > 4) return std::nullopt;
  if (n < v.size() && v[n] != '-') return std::nullopt;
  return std::stoi(std::string(v.substr(0, n)));
}

/// Sort key for ordinal comparison. Dates map to yyyymmdd.
inline std::optional<double> literal_sort_value(std::string_view v, LiteralKind k) {
  try {
    if (is_numeric_kind(k)) {
      std::size_t used = 0;
      double d = std::stod(std::string(v), &used);
      if (used != v.size()) return std::nullopt;
      return d;
    }
    if (k == LiteralKind::Date) {
      auto parts = split(v, '-');
      if (parts.empty() || parts.size() > 3) return std::nullopt;
      double out = 0.0;
      const double scale[3] = {10000.0, 100.0, 1.0};
      for (std::size_t i = 0; i < parts.size(); ++i) {
        if (!is_digits(parts[i])) return std::nullopt;
        out += std::stod(parts[i]) * scale[i];
      }
      return out;
    }
  } catch (const std::exception&) {
  }
  return std::nullopt;
}

struct Triple {
  std::string subject;
  std::string predicate;
  std::string object;
  LiteralKind kind = LiteralKind::None;  // kind of `object`

  bool is_literal() const { return kind != LiteralKind::None; }
  auto operator<=>(const Triple&) const = default;
};

/// One adjacency entry. For out-edges `node` is the object and `kind` its
/// literal kind; for in-edges `node` is the subject (always an entity).
struct Edge {
  std::string predicate;
  std::string node;
  LiteralKind kind = LiteralKind::None;

  auto operator<=>(const Edge&) const = default;
};

class KnowledgeBase {
 public:
  KnowledgeBase() = default;

  /// Builds from a triple list; duplicates collapse. Throws DataError if a
  /// CVT mark names an unknown node or `isa` points at a literal.
  static KnowledgeBase from_triples(std::vector<Triple> triples,
                                    const std::set<std::string>& cvt_marks = {}) {
    KnowledgeBase kb;
    std::sort(triples.begin(), triples.end());
    triples.erase(std::unique(triples.begin(), triples.end()), triples.end());
    kb.triples_ = std::move(triples);
    for (const auto& t : kb.triples_) {
      kb.out_[t.subject].push_back({t.predicate, t.object, t.kind});
      kb.in_[t.object].push_back({t.predicate, t.subject, LiteralKind::None});
      kb.entities_.insert(t.subject);
      if (t.is_literal()) {
        kb.literal_kind_.emplace(t.object, t.kind);
      } else {
        kb.entities_.insert(t.object);
      }
      if (t.predicate == kIsaPredicate) {
        if (t.is_literal()) throw DataError("isa object must be a type id: " + t.subject);
        kb.types_[t.subject].insert(t.object);
        kb.type_vocab_.insert(t.object);
      } else if (t.predicate == kNamePredicate && !kb.names_.contains(t.subject)) {
        kb.names_.emplace(t.subject, t.object);
      }
    }
    for (auto& [_, edges] : kb.out_) std::sort(edges.begin(), edges.end());
    for (auto& [_, edges] : kb.in_) std::sort(edges.begin(), edges.end());
    for (const auto& c : cvt_marks) {
      if (!kb.entities_.contains(c)) throw DataError("cvt mark for unknown node: " + c);
    }
    kb.cvt_ = cvt_marks;
    return kb;
  }

  const std::vector<Triple>& triples() const { return triples_; }
  std::size_t size() const { return triples_.size(); }

  /// Edges with subject `e`, sorted by (predicate, object).
  std::span<const Edge> out_edges(const std::string& e) const {
    auto it = out_.find(e);
    if (it == out_.end()) return {};
    return it->second;
  }

  /// Edges with object `e`, sorted by (predicate, subject).
  std::span<const Edge> in_edges(const std::string& e) const {
    auto it = in_.find(e);
    if (it == in_.end()) return {};
    return it->second;
  }

  const std::set<std::string>& types_of(const std::string& e) const {
    static const std::set<std::string> kEmpty;
    auto it = types_.find(e);
    return it == types_.end() ? kEmpty : it->second;
  }

  bool has_triple(const std::string& s, std::string_view p, const std::string& o) const {
    for (const auto& e : out_edges(s)) {
      if (e.predicate == p && e.node == o) return true;
    }
    return false;
  }

  bool is_cvt(const std::string& e) const { return cvt_.contains(e); }
  const std::set<std::string>& cvt_marks() const { return cvt_; }
  const std::set<std::string>& type_vocab() const { return type_vocab_; }
  const std::set<std::string>& entities() const { return entities_; }

  /// Literal kind of a node that only ever occurs as a literal object.
  LiteralKind kind_of(const std::string& node) const {
    if (entities_.contains(node)) return LiteralKind::None;
    auto it = literal_kind_.find(node);
    return it == literal_kind_.end() ? LiteralKind::None : it->second;
  }

  bool is_literal(const std::string& node) const { return kind_of(node) != LiteralKind::None; }

  /// Display name from the first `name` triple, if any.
  std::optional<std::string> name_of(const std::string& id) const {
    auto it = names_.find(id);
    if (it == names_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::vector<Triple> triples_;
  std::unordered_map<std::string, std::vector<Edge>> out_;
  std::unordered_map<std::string, std::vector<Edge>> in_;
  std::unordered_map<std::string, std::set<std::string>> types_;
  std::unordered_map<std::string, LiteralKind> literal_kind_;
  std::unordered_map<std::string, std::string> names_;
  std::set<std::string> entities_;
  std::set<std::string> type_vocab_;
  std::set<std::string> cvt_;
};

namespace detail {

inline bool has_whitespace(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

inline void validate_literal(std::string_view value, LiteralKind kind, const std::string& where) {
  bool ok = true;
  switch (kind) {
    case LiteralKind::Integer: {
      std::string_view v = value;
      if (!v.empty() && (v[0] == '-' || v[0] == '+')) v.remove_prefix(1);
      ok = is_digits(v);
      break;
    }
    case LiteralKind::Float:
      ok = literal_sort_value(value, kind).has_value();
      break;
    case LiteralKind::Date: {
      ok = date_year(value).has_value() && literal_sort_value(value, kind).has_value();
      auto parts = split(value, '-');
      const int limits[3] = {9999, 12, 31};
      for (std::size_t i = 1; ok && i < parts.size(); ++i) {
        const int v = parts[i].size() <= 2 ? std::stoi(parts[i]) : 0;
        ok = v >= 1 && v <= limits[i];
      }
      break;
    }
    default:
      break;
  }
  if (!ok) {
    throw DataError(where + ": bad " + std::string(literal_kind_name(kind)) + " literal '" +
                    std::string(value) + "'");
  }
}

}  // namespace detail

/// Parses triple-file text. `source` is used in error messages.
inline KnowledgeBase parse_kb(std::istream& in, const std::string& source = "<kb>") {
  std::vector<Triple> triples;
  std::set<std::string> cvt;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string where = source + ":" + std::to_string(lineno);
    if (trim(line).empty()) continue;
    if (line[0] == '#') {
      if (line.rfind("#cvt\t", 0) == 0) {
        std::string id = line.substr(5);
        if (id.empty() || detail::has_whitespace(id)) throw DataError(where + ": bad #cvt directive");
        cvt.insert(std::move(id));
      }
      continue;
    }
    auto fields = split(line, '\t');
    if (fields.size() != 3 && fields.size() != 4) {
      throw DataError(where + ": expected 3 or 4 tab-separated fields, got " +
                      std::to_string(fields.size()));
    }
    Triple t{fields[0], fields[1], fields[2], LiteralKind::None};
    if (t.subject.empty() || t.predicate.empty() || t.object.empty()) {
      throw DataError(where + ": empty field");
    }
    if (detail::has_whitespace(t.subject) || detail::has_whitespace(t.predicate)) {
      throw DataError(where + ": whitespace in subject or predicate");
    }
    if (fields.size() == 4) {
      auto kind = parse_literal_kind(fields[3]);
      if (!kind) throw DataError(where + ": unknown literal kind '" + fields[3] + "'");
      t.kind = *kind;
      detail::validate_literal(t.object, t.kind, where);
    } else if (detail::has_whitespace(t.object)) {
      throw DataError(where + ": whitespace in entity id (missing literal kind?)");
    }
    triples.push_back(std::move(t));
  }
  return KnowledgeBase::from_triples(std::move(triples), cvt);
}

inline KnowledgeBase load_kb(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open KB file: " + path);
  return parse_kb(in, path);
}

/// Writes the triple-file format; parse_kb(write_kb(kb)) reproduces kb.
inline void write_kb(std::ostream& out, const KnowledgeBase& kb) {
  for (const auto& c : kb.cvt_marks()) out << "#cvt\t" << c << '\n';
  for (const auto& t : kb.triples()) {
    out << t.subject << '\t' << t.predicate << '\t' << t.object;
    if (t.is_literal()) out << '\t' << literal_kind_name(t.kind);
    out << '\n';
  }
}

}  // namespace kbqa
