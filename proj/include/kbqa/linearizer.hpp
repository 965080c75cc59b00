#pragma once

// Query graph -> token sequence. The graph is split into TypePath,
// EntityPath, TimePath, OrdinalPath and MainPath, concatenated in that order
// with [unused0]..[unused3] between them. The [A] slot at the end of the
// main path is replaced by the retrieved answers.

#include <string>
#include <vector>

#include "kbqa/graph_executor.hpp"
#include "kbqa/kb_store.hpp"
#include "kbqa/query_graph.hpp"
#include "kbqa/text.hpp"

namespace kbqa {

inline constexpr const char* kSeparators[4] = {"[unused0]", "[unused1]", "[unused2]", "[unused3]"};
inline constexpr std::string_view kAnswerSlot = "[A]";
inline constexpr std::string_view kHopJoiner = "--";

/// Surface strings for ids: the KB `name` if present, otherwise the id with
/// '.' and '_' turned into spaces. Output is lowercased and tokenized.
class NameResolver {
 public:
  NameResolver() = default;
  explicit NameResolver(const KnowledgeBase& kb) : kb_(&kb) {}

  Tokens operator()(const std::string& id) const {
    if (kb_) {
      if (auto name = kb_->name_of(id)) return tokenize(*name);
      if (kb_->is_literal(id)) return tokenize(id);
    }
    std::string s = id;
    for (char& c : s) {
      if (c == '.' || c == '_') c = ' ';
    }
    return tokenize(s);
  }

 private:
  const KnowledgeBase* kb_ = nullptr;
};

struct SubPaths {
  Tokens type_path;
  Tokens entity_path;
  Tokens time_path;
  Tokens ordinal_path;
  Tokens main_path;

  const Tokens& constraint_path(std::size_t i) const {
    switch (i) {
      case 0: return type_path;
      case 1: return entity_path;
      case 2: return time_path;
      default: return ordinal_path;
    }
  }
};

struct LinearizerConfig {
  /// false reproduces the "without constraints" ablation.
  bool include_constraints = true;
  /// false keeps the literal [A] token ("without answer" ablation).
  bool fill_answer = true;
  /// Emit a separator even when the preceding sub-path is empty.
  bool emit_empty_separators = true;
  std::size_t max_answers = 3;
};

struct LinearSequence {
  Tokens tokens;

  /// Space-joined, with "." and "," attached to the preceding token.
  std::string text() const {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const bool attach = i > 0 && (tokens[i] == "." || tokens[i] == ",");
      if (i > 0 && !attach) out += ' ';
      out += tokens[i];
    }
    return out;
  }
  bool operator==(const LinearSequence&) const = default;
};

namespace detail {

inline void append(Tokens& out, const Tokens& more) { out.insert(out.end(), more.begin(), more.end()); }

}  // namespace detail

inline SubPaths decompose(const QueryGraph& g, const NameResolver& names) {
  SubPaths sp;
  if (g.type) {
    detail::append(sp.type_path, names(*g.type));
    sp.type_path.emplace_back(".");
  }
  for (const auto& c : g.entities) {
    detail::append(sp.entity_path, names(c.predicate));
    detail::append(sp.entity_path, names(c.entity));
    sp.entity_path.emplace_back(".");
  }
  if (g.time) {
    detail::append(sp.time_path, names(g.time->predicate));
    sp.time_path.emplace_back(comparator_word(g.time->value.comparator));
    sp.time_path.push_back(std::to_string(g.time->value.year));
    sp.time_path.emplace_back(".");
  }
  if (g.ordinal) {
    detail::append(sp.ordinal_path, names(g.ordinal->predicate));
    sp.ordinal_path.emplace_back(direction_word(g.ordinal->value.direction));
    sp.ordinal_path.push_back(std::to_string(g.ordinal->value.rank));
    sp.ordinal_path.emplace_back(".");
  }
  detail::append(sp.main_path, names(g.main.topic));
  for (std::size_t i = 0; i < g.main.hops.size(); ++i) {
    if (i > 0) sp.main_path.emplace_back(kHopJoiner);
    detail::append(sp.main_path, names(g.main.hops[i].predicate));
  }
  sp.main_path.emplace_back(kAnswerSlot);
  return sp;
}

/// Tokens substituted for [A]: up to max_answers answers in sorted order,
/// separated by ",". Empty when there is nothing to show.
inline Tokens answer_tokens(const AnswerSet& answers, const NameResolver& names, std::size_t max_answers) {
  Tokens out;
  std::size_t n = 0;
  for (const auto& a : answers.answers) {
    if (n == max_answers) break;
    if (n > 0) out.emplace_back(",");
    detail::append(out, names(a));
    ++n;
  }
  return out;
}

inline LinearSequence linearize(const SubPaths& sp, const Tokens& answer, const LinearizerConfig& config = {}) {
  LinearSequence seq;
  for (std::size_t i = 0; i < 4; ++i) {
    const Tokens& path = sp.constraint_path(i);
    if (config.include_constraints) detail::append(seq.tokens, path);
    const bool path_emitted = config.include_constraints && !path.empty();
    if (config.emit_empty_separators || path_emitted) seq.tokens.emplace_back(kSeparators[i]);
  }
  for (const auto& tok : sp.main_path) {
    if (tok == kAnswerSlot && config.fill_answer && !answer.empty()) {
      detail::append(seq.tokens, answer);
    } else {
      seq.tokens.push_back(tok);
    }
  }
  return seq;
}

inline LinearSequence linearize(const QueryGraph& g, const AnswerSet& answers, const NameResolver& names,
                                const LinearizerConfig& config = {}) {
  return linearize(decompose(g, names), answer_tokens(answers, names, config.max_answers), config);
}

}  // namespace kbqa
