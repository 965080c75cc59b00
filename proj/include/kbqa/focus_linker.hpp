#pragma once

// Focus node linking: entity mentions, implicit types, time expressions and
// ordinals in a tokenized question.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "kbqa/kb_store.hpp"
#include "kbqa/text.hpp"

namespace kbqa {

enum class LinkKind : std::uint8_t { Entity, Type, Time, Ordinal };
enum class TimeComparator : std::uint8_t { Before, After, In };
enum class OrdinalDirection : std::uint8_t { Max, Min };

inline std::string_view comparator_word(TimeComparator c) {
  switch (c) {
    case TimeComparator::Before: return "before";
    case TimeComparator::After: return "after";
    case TimeComparator::In: break;
  }
  return "in";
}

inline std::optional<TimeComparator> parse_comparator(std::string_view s) {
  if (s == "before") return TimeComparator::Before;
  if (s == "after") return TimeComparator::After;
  if (s == "in") return TimeComparator::In;
  return std::nullopt;
}

inline std::string_view direction_word(OrdinalDirection d) {
  return d == OrdinalDirection::Max ? "max" : "min";
}

inline std::optional<OrdinalDirection> parse_direction(std::string_view s) {
  if (s == "max") return OrdinalDirection::Max;
  if (s == "min") return OrdinalDirection::Min;
  return std::nullopt;
}

/// Half-open token range [begin, end).
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool overlaps(const Span& o) const { return begin < o.end && o.begin < end; }
  auto operator<=>(const Span&) const = default;
};

struct TimeValue {
  int year = 0;
  TimeComparator comparator = TimeComparator::In;
  auto operator<=>(const TimeValue&) const = default;
};

struct OrdinalValue {
  int rank = 1;
  OrdinalDirection direction = OrdinalDirection::Max;
  auto operator<=>(const OrdinalValue&) const = default;
};

struct LinkResult {
  Span span;
  LinkKind kind = LinkKind::Entity;
  // entity-id / type-id for Entity and Type links
  std::string id;
  TimeValue time;
  OrdinalValue ordinal;
  double score = 1.0;

  bool operator==(const LinkResult&) const = default;
};

struct FocusLinks {
  std::vector<LinkResult> entities;
  std::vector<LinkResult> types;  // descending score, at most max_types
  std::vector<LinkResult> times;
  std::vector<LinkResult> ordinals;

  bool empty() const {
    return entities.empty() && types.empty() && times.empty() && ordinals.empty();
  }
  bool operator==(const FocusLinks&) const = default;
};

struct LexiconEntry {
  std::string entity;
  double prior = 1.0;
  auto operator<=>(const LexiconEntry&) const = default;
};

/// Lowercase mention string -> candidate entities, highest prior first.
class Lexicon {
 public:
  void add(const std::string& mention, std::string entity, double prior) {
    auto& v = entries_[to_lower(mention)];
    v.push_back({std::move(entity), prior});
    std::sort(v.begin(), v.end(), [](const LexiconEntry& a, const LexiconEntry& b) {
      if (a.prior != b.prior) return a.prior > b.prior;
      return a.entity < b.entity;
    });
    std::size_t words = split_ws(mention).size();
    max_words_ = std::max(max_words_, words);
  }

  const std::vector<LexiconEntry>* find(const std::string& mention) const {
    auto it = entries_.find(mention);
    return it == entries_.end() ? nullptr : &it->second;
  }

  std::size_t max_words() const { return max_words_; }
  const std::map<std::string, std::vector<LexiconEntry>>& entries() const { return entries_; }

 private:
  std::map<std::string, std::vector<LexiconEntry>> entries_;
  std::size_t max_words_ = 0;
};

/// `mention<TAB>entity-id<TAB>prior`, `#` comments allowed.
inline Lexicon parse_lexicon(std::istream& in, const std::string& source = "<lexicon>") {
  Lexicon lex;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line[0] == '#') continue;
    auto f = split(line, '\t');
    const std::string where = source + ":" + std::to_string(lineno);
    if (f.size() != 3 || f[0].empty() || f[1].empty()) throw DataError(where + ": expected mention<TAB>entity<TAB>prior");
    double prior = 0.0;
    try {
      prior = std::stod(f[2]);
    } catch (const std::exception&) {
      throw DataError(where + ": bad prior '" + f[2] + "'");
    }
    if (!(prior >= 0.0 && prior <= 1.0)) throw DataError(where + ": prior outside [0,1]");
    lex.add(join(split_ws(f[0])), f[1], prior);
  }
  return lex;
}

inline Lexicon load_lexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open lexicon: " + path);
  return parse_lexicon(in, path);
}

using SuperlativeVocab = std::map<std::string, OrdinalDirection>;

inline SuperlativeVocab default_superlatives() {
  SuperlativeVocab v;
  for (const char* w : {"largest", "biggest", "highest", "tallest", "longest", "latest",
                        "newest", "most", "greatest", "heaviest"}) {
    v.emplace(w, OrdinalDirection::Max);
  }
  for (const char* w : {"smallest", "lowest", "shortest", "earliest", "least", "oldest",
                        "fewest", "lightest", "cheapest", "weakest"}) {
    v.emplace(w, OrdinalDirection::Min);
  }
  return v;
}

/// `word<TAB>max|min` per line.
inline SuperlativeVocab parse_superlatives(std::istream& in, const std::string& source = "<superlatives>") {
  SuperlativeVocab v;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line[0] == '#') continue;
    auto f = split(line, '\t');
    auto dir = f.size() == 2 ? parse_direction(f[1]) : std::nullopt;
    if (!dir || f[0].empty()) {
      throw DataError(source + ":" + std::to_string(lineno) + ": expected word<TAB>max|min");
    }
    v[to_lower(f[0])] = *dir;
  }
  return v;
}

inline SuperlativeVocab load_superlatives(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open superlative vocabulary: " + path);
  return parse_superlatives(in, path);
}

using StringSimilarity = std::function<double(const std::string&, const std::string&)>;

/// Surface form used when matching a type id against question n-grams:
/// "people.person" -> "people person".
inline std::string type_surface(const std::string& type_id) {
  std::string out = type_id;
  for (char& c : out) {
    if (c == '.' || c == '_') c = ' ';
  }
  return to_lower(out);
}

/// Default type similarity: normalized edit similarity against the full
/// surface form and against its last word, whichever is higher.
inline double default_type_similarity(const std::string& ngram, const std::string& type_id) {
  std::string full = type_surface(type_id);
  double s = edit_similarity(ngram, full);
  auto words = split_ws(full);
  if (words.size() > 1) s = std::max(s, edit_similarity(ngram, words.back()));
  return s;
}

// ---------------------------------------------------------------- entities

/// Longest-match, non-overlapping lexicon matching. Matches are taken
/// greedily by (length desc, start asc); each returned span carries the
/// highest-prior entity for its mention.
inline std::vector<LinkResult> link_entities(const Tokens& question, const Lexicon& lexicon) {
  struct Match {
    Span span;
    const std::vector<LexiconEntry>* entries;
  };
  std::vector<Match> matches;
  const std::size_t max_len = lexicon.max_words();
  for (std::size_t b = 0; b < question.size(); ++b) {
    for (std::size_t len = 1; len <= max_len && b + len <= question.size(); ++len) {
      if (const auto* e = lexicon.find(join_range(question, b, b + len))) {
        matches.push_back({{b, b + len}, e});
      }
    }
  }
  std::stable_sort(matches.begin(), matches.end(), [](const Match& x, const Match& y) {
    if (x.span.size() != y.span.size()) return x.span.size() > y.span.size();
    return x.span.begin < y.span.begin;
  });
  std::vector<Match> chosen;
  for (const auto& m : matches) {
    bool clash = std::any_of(chosen.begin(), chosen.end(),
                             [&](const Match& c) { return c.span.overlaps(m.span); });
    if (!clash) chosen.push_back(m);
  }
  std::sort(chosen.begin(), chosen.end(),
            [](const Match& x, const Match& y) { return x.span < y.span; });
  std::vector<LinkResult> out;
  for (const auto& m : chosen) {
    const auto& best = m.entries->front();
    LinkResult r;
    r.span = m.span;
    r.kind = LinkKind::Entity;
    r.id = best.entity;
    r.score = best.prior;
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------- types

/// Scores every 1-3 word n-gram (punctuation excluded) against every type in
/// the KB and keeps the best `top_k` pairs. Ties: type id, then span start,
/// then span length.
inline std::vector<LinkResult> link_types(const Tokens& question, const KnowledgeBase& kb,
                                          const StringSimilarity& similarity,
                                          std::size_t top_k = 10) {
  std::vector<LinkResult> all;
  if (kb.type_vocab().empty()) return all;
  for (std::size_t b = 0; b < question.size(); ++b) {
    for (std::size_t len = 1; len <= 3 && b + len <= question.size(); ++len) {
      if (is_punct_token(question[b + len - 1])) break;
      std::string gram = join_range(question, b, b + len);
      for (const auto& type : kb.type_vocab()) {
        LinkResult r;
        r.span = {b, b + len};
        r.kind = LinkKind::Type;
        r.id = type;
        r.score = similarity(gram, type);
        all.push_back(std::move(r));
      }
    }
  }
  auto order = [](const LinkResult& x, const LinkResult& y) {
    if (x.score != y.score) return x.score > y.score;
    if (x.id != y.id) return x.id < y.id;
    if (x.span.begin != y.span.begin) return x.span.begin < y.span.begin;
    return x.span.end < y.span.end;
  };
  if (all.size() > top_k) {
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(top_k), all.end(), order);
    all.resize(top_k);
  } else {
    std::sort(all.begin(), all.end(), order);
  }
  return all;
}

// ---------------------------------------------------------------- time

/// Every 3-4 digit token without a leading zero is a year. The preceding
/// word picks the comparator: before -> before, after/since -> after, in/during -> in; default in.
inline std::vector<LinkResult> link_time(const Tokens& question) {
  static const std::regex kYear("^[1-9][0-9]{2,3}$");
  std::vector<LinkResult> out;
  for (std::size_t i = 0; i < question.size(); ++i) {
    if (!std::regex_match(question[i], kYear)) continue;
    LinkResult r;
    r.kind = LinkKind::Time;
    r.span = {i, i + 1};
    r.time.year = std::stoi(question[i]);
    r.time.comparator = TimeComparator::In;
    if (i > 0) {
      const auto& prev = question[i - 1];
      if (prev == "before") {
        r.time.comparator = TimeComparator::Before;
      } else if (prev == "after" || prev == "since") {
        r.time.comparator = TimeComparator::After;
      }
      if (prev == "before" || prev == "after" || prev == "since" || prev == "in" || prev == "during") {
        r.span.begin = i - 1;
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

/// Renders the year back as it appeared in the question.
inline std::string render_year(const TimeValue& t) { return std::to_string(t.year); }

// ---------------------------------------------------------------- ordinals

/// Ordinal words 1-10, spelled and numeric-suffixed.
inline std::optional<int> ordinal_word_rank(std::string_view w) {
  static const std::map<std::string, int, std::less<>> kWords = {
      {"first", 1}, {"second", 2}, {"third", 3}, {"fourth", 4}, {"fifth", 5},
      {"sixth", 6}, {"seventh", 7}, {"eighth", 8}, {"ninth", 9}, {"tenth", 10},
      {"1st", 1},   {"2nd", 2},    {"3rd", 3},   {"4th", 4},    {"5th", 5},
      {"6th", 6},   {"7th", 7},    {"8th", 8},   {"9th", 9},    {"10th", 10}};
  auto it = kWords.find(w);
  if (it == kWords.end()) return std::nullopt;
  return it->second;
}

/// Bare superlative -> rank 1; "<ordinal word> <superlative>" -> that rank.
inline std::vector<LinkResult> link_ordinals(const Tokens& question, const SuperlativeVocab& vocab) {
  std::vector<LinkResult> out;
  for (std::size_t i = 0; i < question.size(); ++i) {
    auto it = vocab.find(question[i]);
    if (it == vocab.end()) continue;
    LinkResult r;
    r.kind = LinkKind::Ordinal;
    r.span = {i, i + 1};
    r.ordinal = {1, it->second};
    if (i > 0) {
      if (auto rank = ordinal_word_rank(question[i - 1])) {
        r.ordinal.rank = *rank;
        r.span.begin = i - 1;
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------- aggregate

struct LinkerConfig {
  StringSimilarity type_similarity = default_type_similarity;
  SuperlativeVocab superlatives = default_superlatives();
  std::size_t max_types = 10;
  /// Type links scoring below this are dropped before the top-k cut.
  double min_type_score = 0.0;
  bool enrich_entities = true;
};

/// Runs the four linkers. Enrichment adds the other lexicon entities sharing
/// a linked mention as extra candidates on the same span.
inline FocusLinks link_focus_nodes(const Tokens& question, const KnowledgeBase& kb,
                                   const Lexicon& lexicon, const LinkerConfig& config = {}) {
  FocusLinks links;
  if (question.empty()) return links;
  for (auto& r : link_entities(question, lexicon)) {
    links.entities.push_back(r);
    if (!config.enrich_entities) continue;
    const auto* entries = lexicon.find(join_range(question, r.span.begin, r.span.end));
    for (std::size_t i = 1; entries && i < entries->size(); ++i) {
      LinkResult alias = r;
      alias.id = (*entries)[i].entity;
      alias.score = (*entries)[i].prior;
      links.entities.push_back(std::move(alias));
    }
  }
  for (auto& r : link_types(question, kb, config.type_similarity, kb.type_vocab().size() * question.size() * 3)) {
    if (r.score < config.min_type_score || links.types.size() >= config.max_types) break;
    links.types.push_back(std::move(r));
  }
  links.times = link_time(question);
  links.ordinals = link_ordinals(question, config.superlatives);
  return links;
}

}  // namespace kbqa
