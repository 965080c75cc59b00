#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "support/oracles.hpp"

using namespace kbqa;

namespace {

Lexicon lexicon_of(std::initializer_list<std::tuple<const char*, const char*, double>> rows) {
  Lexicon lex;
  for (const auto& [m, e, p] : rows) lex.add(m, e, p);
  return lex;
}

KnowledgeBase spain_kb() { return load_kb(std::string(KBQA_DATA_DIR) + "/spain/kb.tsv"); }

Lexicon spain_lexicon() { return load_lexicon(std::string(KBQA_DATA_DIR) + "/spain/lexicon.tsv"); }

struct SubstringMatch {
  Span span;
  std::string entity;
  double prior;
};

// Every lexicon hit over every substring of the question.
std::vector<SubstringMatch> all_matches(const Tokens& q, const Lexicon& lex) {
  std::vector<SubstringMatch> out;
  for (std::size_t b = 0; b < q.size(); ++b) {
    for (std::size_t e = b + 1; e <= q.size(); ++e) {
      std::string s;
      for (std::size_t i = b; i < e; ++i) s += (i > b ? " " : "") + q[i];
      for (const auto& [mention, entries] : lex.entries()) {
        if (mention != s) continue;
        double best = -1;
        std::string id;
        for (const auto& entry : entries) {
          if (entry.prior > best || (entry.prior == best && entry.entity < id)) {
            best = entry.prior;
            id = entry.entity;
          }
        }
        out.push_back({{b, e}, id, best});
      }
    }
  }
  return out;
}

}  // namespace

TEST(LinkEntities, SingleExactMatch) {
  auto lex = lexicon_of({{"spain", "m.spain", 0.9}});
  auto out = link_entities(tokenize("who is the prime minister of spain"), lex);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].id, "m.spain");
  EXPECT_EQ(out[0].span, (Span{6, 7}));
  EXPECT_DOUBLE_EQ(out[0].score, 0.9);
  EXPECT_EQ(out[0].kind, LinkKind::Entity);
}

TEST(LinkEntities, NoHits) {
  auto lex = lexicon_of({{"spain", "m.spain", 0.9}});
  EXPECT_TRUE(link_entities(tokenize("who wrote hamlet"), lex).empty());
}

TEST(LinkEntities, LongestMatchWins) {
  auto lex = lexicon_of({{"new york", "m.ny_state", 0.7}, {"new york city", "m.nyc", 0.8}, {"york", "m.york", 0.9}});
  auto out = link_entities(tokenize("what is the population of new york city"), lex);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].id, "m.nyc");
  EXPECT_EQ(out[0].span, (Span{5, 8}));
}

// Brute-force check: every returned span is a lexicon hit with the best
// prior, spans are disjoint, and every hit left out overlaps a returned span
// that is longer, or equally long and further left.
TEST(LinkEntities, AgreesWithSubstringEnumeration) {
  std::mt19937_64 rng(11);
  const std::vector<std::string> words = {"a", "b", "c", "d"};
  for (int trial = 0; trial < 300; ++trial) {
    Lexicon lex;
    const int n_mentions = std::uniform_int_distribution<int>(1, 8)(rng);
    for (int i = 0; i < n_mentions; ++i) {
      const int len = std::uniform_int_distribution<int>(1, 3)(rng);
      std::string m;
      for (int k = 0; k < len; ++k) m += (k ? " " : "") + words[std::uniform_int_distribution<std::size_t>(0, 3)(rng)];
      lex.add(m, "ent" + std::to_string(i), std::uniform_int_distribution<int>(1, 9)(rng) / 10.0);
    }
    Tokens q;
    const int qlen = std::uniform_int_distribution<int>(0, 10)(rng);
    for (int i = 0; i < qlen; ++i) q.push_back(words[std::uniform_int_distribution<std::size_t>(0, 3)(rng)]);

    auto got = link_entities(q, lex);
    auto hits = all_matches(q, lex);
    for (std::size_t i = 0; i < got.size(); ++i) {
      auto it = std::find_if(hits.begin(), hits.end(), [&](const SubstringMatch& h) { return h.span == got[i].span; });
      ASSERT_NE(it, hits.end());
      EXPECT_EQ(it->entity, got[i].id);
      EXPECT_DOUBLE_EQ(it->prior, got[i].score);
      for (std::size_t j = i + 1; j < got.size(); ++j) EXPECT_FALSE(got[i].span.overlaps(got[j].span));
    }
    for (const auto& h : hits) {
      bool taken = std::any_of(got.begin(), got.end(), [&](const LinkResult& r) { return r.span == h.span; });
      if (taken) continue;
      bool blocked = std::any_of(got.begin(), got.end(), [&](const LinkResult& r) {
        return r.span.overlaps(h.span) &&
               (r.span.size() > h.span.size() || (r.span.size() == h.span.size() && r.span.begin < h.span.begin));
      });
      EXPECT_TRUE(blocked) << "unblocked hit at " << h.span.begin << ".." << h.span.end;
    }
  }
}

TEST(LinkTypes, ExactTypeWordScoresMaximum) {
  auto kb = KnowledgeBase::from_triples({{"x", "isa", "president"}, {"y", "isa", "government.office"}});
  auto out = link_types(tokenize("who was the president of france"), kb, default_type_similarity);
  ASSERT_FALSE(out.empty());
  EXPECT_EQ(out[0].id, "president");
  EXPECT_DOUBLE_EQ(out[0].score, 1.0);
  EXPECT_EQ(out[0].span, (Span{3, 4}));
}

TEST(LinkTypes, EmptyVocabulary) {
  KnowledgeBase kb = KnowledgeBase::from_triples({{"a", "p", "b"}});
  EXPECT_TRUE(link_types(tokenize("who is it"), kb, default_type_similarity).empty());
}

TEST(LinkTypes, MatchesExhaustiveScoring) {
  std::vector<Triple> ts;
  for (int i = 0; i < 20; ++i) ts.push_back({"x" + std::to_string(i), "isa", "domain.type_" + std::string(1, static_cast<char>('a' + i))});
  ts.push_back({"y", "isa", "people.person"});
  auto kb = KnowledgeBase::from_triples(ts);
  std::mt19937_64 rng(5);
  const std::vector<std::string> words = {"person", "type", "a", "b", "people", "who", "?"};
  for (int trial = 0; trial < 50; ++trial) {
    Tokens q;
    for (int i = 0; i < 5; ++i) q.push_back(words[std::uniform_int_distribution<std::size_t>(0, words.size() - 1)(rng)]);
    struct Scored {
      double score;
      std::string id;
      std::size_t b, e;
    };
    std::vector<Scored> all;
    for (std::size_t b = 0; b < q.size(); ++b) {
      for (std::size_t e = b + 1; e <= std::min(q.size(), b + 3); ++e) {
        bool punct = false;
        for (std::size_t i = b; i < e; ++i) punct = punct || q[i] == "?";
        if (punct) continue;
        std::string gram;
        for (std::size_t i = b; i < e; ++i) gram += (i > b ? " " : "") + q[i];
        for (const auto& t : kb.type_vocab()) all.push_back({default_type_similarity(gram, t), t, b, e});
      }
    }
    std::sort(all.begin(), all.end(), [](const Scored& x, const Scored& y) {
      return std::tie(y.score, x.id, x.b, x.e) < std::tie(x.score, y.id, y.b, y.e);
    });
    if (all.size() > 10) all.resize(10);
    auto got = link_types(q, kb, default_type_similarity, 10);
    ASSERT_EQ(got.size(), all.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].id, all[i].id);
      EXPECT_EQ(got[i].span, (Span{all[i].b, all[i].e}));
      EXPECT_DOUBLE_EQ(got[i].score, all[i].score);
    }
  }
}

TEST(LinkTypes, PluggableSimilarity) {
  auto kb = KnowledgeBase::from_triples({{"x", "isa", "t1"}, {"y", "isa", "t2"}});
  StringSimilarity sim = [](const std::string& gram, const std::string& type) {
    return gram == "leader" && type == "t2" ? 0.75 : 0.0;
  };
  auto out = link_types(tokenize("the leader"), kb, sim, 1);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].id, "t2");
  EXPECT_DOUBLE_EQ(out[0].score, 0.75);
}

TEST(LinkTime, ComparatorFromPreviousWord) {
  auto out = link_time(tokenize("who is the highest prime minister of spain after 1980?"));
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].time, (TimeValue{1980, TimeComparator::After}));
  EXPECT_EQ(out[0].span, (Span{8, 10}));
  EXPECT_TRUE(link_time(tokenize("who wrote hamlet")).empty());
  EXPECT_EQ(link_time(tokenize("since 1990"))[0].time.comparator, TimeComparator::After);
  EXPECT_EQ(link_time(tokenize("before 1990"))[0].time.comparator, TimeComparator::Before);
  EXPECT_EQ(link_time(tokenize("during 1990"))[0].time.comparator, TimeComparator::In);
  EXPECT_EQ(link_time(tokenize("1990 elections"))[0].time.comparator, TimeComparator::In);
}

TEST(LinkTime, BetweenYieldsTwoInLinks) {
  auto out = link_time(tokenize("who ruled between 1990 and 1995"));
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].time, (TimeValue{1990, TimeComparator::In}));
  EXPECT_EQ(out[1].time, (TimeValue{1995, TimeComparator::In}));
}

TEST(LinkTime, AgreesWithTokenEnumeration) {
  std::mt19937_64 rng(3);
  const std::vector<std::string> words = {"in", "after", "before", "since", "x", "12", "0999", "1999", "205", "20000"};
  for (int trial = 0; trial < 500; ++trial) {
    Tokens q;
    for (int i = 0; i < 6; ++i) q.push_back(words[std::uniform_int_distribution<std::size_t>(0, words.size() - 1)(rng)]);
    std::vector<int> expected;
    for (const auto& t : q) {
      if ((t.size() == 3 || t.size() == 4) && t[0] != '0' && is_digits(t)) expected.push_back(std::stoi(t));
    }
    auto got = link_time(q);
    ASSERT_EQ(got.size(), expected.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].time.year, expected[i]);
      EXPECT_EQ(render_year(got[i].time), q[got[i].span.end - 1]);
    }
  }
}

TEST(LinkOrdinals, SuperlativesAndRanks) {
  auto vocab = default_superlatives();
  EXPECT_EQ(vocab.size(), 20u);
  auto hi = link_ordinals(tokenize("the highest prime minister"), vocab);
  ASSERT_EQ(hi.size(), 1u);
  EXPECT_EQ(hi[0].ordinal, (OrdinalValue{1, OrdinalDirection::Max}));
  EXPECT_TRUE(link_ordinals(tokenize("who wrote hamlet"), vocab).empty());
  auto third = link_ordinals(tokenize("the third smallest city"), vocab);
  ASSERT_EQ(third.size(), 1u);
  EXPECT_EQ(third[0].ordinal, (OrdinalValue{3, OrdinalDirection::Min}));
  EXPECT_EQ(third[0].span, (Span{1, 3}));
}

TEST(LinkOrdinals, PatternEnumeration) {
  const auto vocab = load_superlatives(std::string(KBQA_DATA_DIR) + "/superlatives.tsv");
  EXPECT_EQ(vocab, default_superlatives());
  const std::vector<std::string> spelled = {"first", "second", "third", "fourth", "fifth",
                                            "sixth", "seventh", "eighth", "ninth", "tenth"};
  const std::vector<std::string> suffixed = {"1st", "2nd", "3rd", "4th", "5th", "6th", "7th", "8th", "9th", "10th"};
  for (const auto& [word, dir] : vocab) {
    for (int r = 1; r <= 10; ++r) {
      for (const auto* forms : {&spelled, &suffixed}) {
        auto out = link_ordinals({"the", (*forms)[static_cast<std::size_t>(r - 1)], word, "one"}, vocab);
        ASSERT_EQ(out.size(), 1u);
        EXPECT_EQ(out[0].ordinal, (OrdinalValue{r, dir})) << word << " " << r;
        EXPECT_EQ(out[0].span, (Span{1, 3}));
      }
    }
    auto bare = link_ordinals({word}, vocab);
    ASSERT_EQ(bare.size(), 1u);
    EXPECT_EQ(bare[0].ordinal, (OrdinalValue{1, dir}));
  }
}

TEST(Superlatives, MalformedFile) {
  std::istringstream in("largest\tup\n");
  EXPECT_THROW(parse_superlatives(in), DataError);
}

TEST(Lexicon, ParsesAndRejects) {
  std::istringstream ok("# mentions\nNew York\tm.ny\t0.5\nnew york\tm.nyc\t0.7\n");
  auto lex = parse_lexicon(ok);
  const auto* e = lex.find("new york");
  ASSERT_NE(e, nullptr);
  ASSERT_EQ(e->size(), 2u);
  EXPECT_EQ((*e)[0].entity, "m.nyc");
  EXPECT_EQ(lex.max_words(), 2u);
  std::istringstream bad("spain\tm.spain\tlots\n");
  EXPECT_THROW(parse_lexicon(bad), DataError);
}

TEST(LinkFocusNodes, RunningExample) {
  auto kb = spain_kb();
  auto q = tokenize("Who is the highest prime minister of Spain after 1980?");
  auto f = link_focus_nodes(q, kb, spain_lexicon());
  std::set<std::string> ents;
  for (const auto& e : f.entities) ents.insert(e.id);
  EXPECT_TRUE(ents.contains("m.spain"));
  EXPECT_TRUE(ents.contains("m.prime_minister"));
  ASSERT_EQ(f.times.size(), 1u);
  EXPECT_EQ(f.times[0].time, (TimeValue{1980, TimeComparator::After}));
  ASSERT_EQ(f.ordinals.size(), 1u);
  EXPECT_EQ(f.ordinals[0].ordinal, (OrdinalValue{1, OrdinalDirection::Max}));
  EXPECT_LE(f.types.size(), 10u);
  bool person = std::any_of(f.types.begin(), f.types.end(), [](const LinkResult& r) { return r.id == "people.person"; });
  EXPECT_TRUE(person);
  for (std::size_t i = 1; i < f.types.size(); ++i) EXPECT_GE(f.types[i - 1].score, f.types[i].score);
  EXPECT_EQ(f, link_focus_nodes(q, kb, spain_lexicon()));
}

TEST(LinkFocusNodes, EmptyQuestion) {
  EXPECT_TRUE(link_focus_nodes({}, spain_kb(), spain_lexicon()).empty());
}

TEST(LinkFocusNodes, EnrichmentAddsSameMentionAliases) {
  auto kb = KnowledgeBase::from_triples({{"a", "p", "b"}});
  auto lex = lexicon_of({{"paris", "m.paris", 0.9}, {"paris", "m.paris_texas", 0.2}});
  auto f = link_focus_nodes(tokenize("where is paris"), kb, lex);
  ASSERT_EQ(f.entities.size(), 2u);
  EXPECT_EQ(f.entities[0].id, "m.paris");
  EXPECT_EQ(f.entities[1].id, "m.paris_texas");
  EXPECT_EQ(f.entities[1].span, f.entities[0].span);
  LinkerConfig plain;
  plain.enrich_entities = false;
  EXPECT_EQ(link_focus_nodes(tokenize("where is paris"), kb, lex, plain).entities.size(), 1u);
}

// Questions assembled from known pieces; each planted mention must come back.
TEST(LinkFocusNodes, RecoversPlantedMentions) {
  std::vector<Triple> ts;
  const std::vector<std::string> types = {"sports.team", "music.album", "film.actor", "book.author"};
  for (std::size_t i = 0; i < types.size(); ++i) ts.push_back({"x" + std::to_string(i), "isa", types[i]});
  auto kb = KnowledgeBase::from_triples(ts);
  Lexicon lex;
  for (int i = 0; i < 30; ++i) lex.add("place" + std::to_string(i), "m.p" + std::to_string(i), 0.5);
  const auto vocab = default_superlatives();
  std::vector<std::string> sup;
  for (const auto& [w, _] : vocab) sup.push_back(w);
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const auto ent = std::uniform_int_distribution<int>(0, 29)(rng);
    const auto& type = types[std::uniform_int_distribution<std::size_t>(0, types.size() - 1)(rng)];
    const auto& word = sup[std::uniform_int_distribution<std::size_t>(0, sup.size() - 1)(rng)];
    const int year = std::uniform_int_distribution<int>(1900, 2020)(rng);
    const std::string last = split_ws(type_surface(type)).back();
    auto q = tokenize("which " + word + " " + last + " of place" + std::to_string(ent) + " before " +
                      std::to_string(year) + " ?");
    auto f = link_focus_nodes(q, kb, lex);
    ASSERT_EQ(f.entities.size(), 1u);
    EXPECT_EQ(f.entities[0].id, "m.p" + std::to_string(ent));
    ASSERT_FALSE(f.types.empty());
    EXPECT_EQ(f.types[0].id, type);
    ASSERT_EQ(f.times.size(), 1u);
    EXPECT_EQ(f.times[0].time, (TimeValue{year, TimeComparator::Before}));
    ASSERT_EQ(f.ordinals.size(), 1u);
    EXPECT_EQ(f.ordinals[0].ordinal.direction, vocab.at(word));
    for (const auto* group : {&f.entities, &f.types, &f.times, &f.ordinals}) {
      for (const auto& r : *group) EXPECT_LE(r.span.end, q.size());
    }
  }
}
