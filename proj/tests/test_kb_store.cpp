#include <gtest/gtest.h>

#include <sstream>

#include "kbqa/kb_store.hpp"
#include "support/oracles.hpp"

using namespace kbqa;

namespace {

KnowledgeBase parse(const std::string& text) {
  std::istringstream in(text);
  return parse_kb(in);
}

std::vector<std::pair<std::string, std::string>> pairs(std::span<const Edge> edges) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : edges) out.push_back({e.predicate, e.node});
  return out;
}

}  // namespace

TEST(KbStore, LoadsSpainFixture) {
  auto kb = load_kb(std::string(KBQA_DATA_DIR) + "/spain/kb.tsv");
  EXPECT_TRUE(kb.is_cvt("cvt_pm1"));
  EXPECT_FALSE(kb.is_cvt("m.spain"));
  EXPECT_TRUE(kb.types_of("m.felipe_gonzalez").contains("people.person"));
  EXPECT_EQ(kb.name_of("m.spain"), std::optional<std::string>("spain"));
  EXPECT_EQ(kb.kind_of("1.85"), LiteralKind::Float);
  EXPECT_TRUE(kb.has_triple("m.spain", "governing_officials", "cvt_pm1"));
}

TEST(KbStore, AdjacencyMatchesFullScan) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto toy = oracle::random_toy_kb(seed);
    std::set<std::string> nodes;
    for (const auto& t : toy.triples) {
      nodes.insert(t.subject);
      nodes.insert(t.object);
    }
    for (const auto& n : nodes) {
      EXPECT_EQ(pairs(toy.kb.out_edges(n)), oracle::scan_out(toy.triples, n)) << n;
      EXPECT_EQ(pairs(toy.kb.in_edges(n)), oracle::scan_in(toy.triples, n)) << n;
      EXPECT_EQ(toy.kb.types_of(n), oracle::scan_types(toy.triples, n)) << n;
    }
  }
}

TEST(KbStore, DuplicatesCollapse) {
  auto kb = parse("a\tp\tb\na\tp\tb\n");
  EXPECT_EQ(kb.size(), 1u);
}

TEST(KbStore, RoundTripsThroughWriter) {
  auto toy = oracle::random_toy_kb(7);
  std::ostringstream out;
  write_kb(out, toy.kb);
  auto again = parse(out.str());
  EXPECT_EQ(again.triples(), toy.kb.triples());
  EXPECT_EQ(again.cvt_marks(), toy.kb.cvt_marks());
}

TEST(KbStore, CommentsAndLiteralKinds) {
  auto kb = parse("# comment\n\na\tborn\t1975-03-02\tdate\na\tcount\t12\tinteger\na\tlabel\thello world\tstring\n#cvt\ta\n");
  EXPECT_EQ(kb.kind_of("1975-03-02"), LiteralKind::Date);
  EXPECT_EQ(kb.kind_of("12"), LiteralKind::Integer);
  EXPECT_EQ(kb.kind_of("hello world"), LiteralKind::String);
  EXPECT_TRUE(kb.is_cvt("a"));
  EXPECT_EQ(date_year("1975-03-02"), std::optional<int>(1975));
  EXPECT_EQ(literal_sort_value("1975-03-02", LiteralKind::Date), std::optional<double>(19750302.0));
}

TEST(KbStore, MalformedLinesReportLineNumber) {
  const std::vector<std::string> bad = {
      "a\tp\n",                   // too few fields
      "a\tp\tb\tweird\n",         // unknown kind
      "a\tp\tx\tinteger\n",       // invalid integer
      "a\tp\t1980-13-01\tdate\n", // invalid month
      "a b\tp\tc\n",              // whitespace in id
      "a\t\tc\n",                 // empty predicate
      "a\tisa\t12\tinteger\n",    // literal type
      "#cvt\tghost\n",            // unknown cvt node
  };
  for (const auto& text : bad) {
    EXPECT_THROW(parse("x\ty\tz\n" + text), DataError) << text;
  }
  try {
    parse("x\ty\tz\na\tp\n");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
}

TEST(KbStore, MissingFileIsDataError) {
  EXPECT_THROW(load_kb("/nonexistent/kb.tsv"), DataError);
}
