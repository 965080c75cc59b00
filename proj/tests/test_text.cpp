#include <gtest/gtest.h>

#include "kbqa/text.hpp"

using namespace kbqa;

TEST(Tokenize, LowercasesAndSplitsPunctuation) {
  EXPECT_EQ(tokenize("Who was the Prime Minister of Spain after 1980?"),
            (Tokens{"who", "was", "the", "prime", "minister", "of", "spain", "after", "1980", "?"}));
  EXPECT_EQ(tokenize("a, b; (c)"), (Tokens{"a", ",", "b", ";", "(", "c", ")"}));
}

TEST(Tokenize, KeepsDecimalsSplitsTrailingPeriod) {
  EXPECT_EQ(tokenize("height 1.85."), (Tokens{"height", "1.85", "."}));
  EXPECT_EQ(tokenize("wait ..."), (Tokens{"wait", "..."}));
  EXPECT_TRUE(tokenize("   ").empty());
}

TEST(Split, KeepsEmptyFields) {
  EXPECT_EQ(split("a\t\tb", '\t'), (std::vector<std::string>{"a", "", "b"}));
  EXPECT_EQ(split_ws("  a  b "), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(trim(" \tx y \n"), "x y");
}

TEST(EditDistance, MatchesHandComputedValues) {
  EXPECT_EQ(edit_distance("kitten", "sitting"), 3u);
  EXPECT_EQ(edit_distance("", "abc"), 3u);
  EXPECT_DOUBLE_EQ(edit_similarity("person", "person"), 1.0);
  EXPECT_DOUBLE_EQ(edit_similarity("", ""), 1.0);
  EXPECT_NEAR(edit_similarity("kitten", "sitting"), 1.0 - 3.0 / 7.0, 1e-12);
}

TEST(Join, RangeAndSeparator) {
  Tokens t{"a", "b", "c"};
  EXPECT_EQ(join(t), "a b c");
  EXPECT_EQ(join(t, "-"), "a-b-c");
  EXPECT_EQ(join_range(t, 1, 3), "b c");
  EXPECT_TRUE(is_digits("1980"));
  EXPECT_FALSE(is_digits("19a0"));
  EXPECT_FALSE(is_digits(""));
}
