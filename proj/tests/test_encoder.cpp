#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "support/oracles.hpp"

using namespace kbqa;

namespace {

Vocabulary small_vocab() {
  return Vocabulary(std::set<std::string>{"who", "what", "is", "spain", "capital", "madrid", "x", "y", "z"});
}

Tokens random_tokens(std::mt19937_64& rng, std::size_t n) {
  const std::vector<std::string> words = {"who", "what", "is", "spain", "capital", "madrid", "x", "y", "z",
                                          "[A]", "[unused0]", "oov"};
  Tokens t;
  for (std::size_t i = 0; i < n; ++i) t.push_back(words[std::uniform_int_distribution<std::size_t>(0, words.size() - 1)(rng)]);
  return t;
}

EncoderShape tiny_shape(int dim = 6, int depth = 2) { return {dim, depth, 24, true}; }

std::vector<TrainingGroup> random_batch(std::mt19937_64& rng, LossKind kind) {
  std::vector<TrainingGroup> batch;
  const int groups = std::uniform_int_distribution<int>(1, 2)(rng);
  for (int g = 0; g < groups; ++g) {
    TrainingGroup group;
    const std::size_t n = kind == LossKind::Pair ? 2 : std::uniform_int_distribution<std::size_t>(2, 4)(rng);
    for (std::size_t i = 0; i < n; ++i) {
      group.pairs.push_back(make_sequence_pair(random_tokens(rng, 3), random_tokens(rng, std::uniform_int_distribution<std::size_t>(1, 5)(rng))));
      group.labels.push_back(i == 0 ? 1 : (kind == LossKind::Point ? std::bernoulli_distribution(0.5)(rng) : 0));
    }
    batch.push_back(std::move(group));
  }
  return batch;
}

}  // namespace

TEST(MakePair, MinimalLayout) {
  auto p = make_sequence_pair({"who"}, Tokens{"x"});
  EXPECT_EQ(p.tokens, (Tokens{"[CLS]", "who", "[SEP]", "x", "[SEP]"}));
  EXPECT_EQ(p.segments, (std::vector<int>{0, 0, 0, 1, 1}));
  EXPECT_THROW(make_sequence_pair({}, Tokens{"x"}), std::invalid_argument);
  EXPECT_THROW(make_sequence_pair({"who"}, Tokens{}), std::invalid_argument);
}

TEST(MakePair, TruncatesGraphSideFirst) {
  Tokens q{"a", "b", "c"};
  Tokens g(50, "g");
  auto p = make_sequence_pair(q, g, 16);
  EXPECT_EQ(p.tokens.size(), 16u);
  EXPECT_EQ(Tokens(p.tokens.begin() + 1, p.tokens.begin() + 4), q);
  EXPECT_EQ(std::count(p.tokens.begin(), p.tokens.end(), "[SEP]"), 2);
  EXPECT_EQ(p.tokens.back(), "[SEP]");
  Tokens long_q(40, "q");
  auto p2 = make_sequence_pair(long_q, Tokens{"x"}, 16);
  EXPECT_EQ(p2.tokens.size(), 16u);
  EXPECT_EQ(std::count(p2.tokens.begin(), p2.tokens.end(), "x"), 1);
}

TEST(MakePair, RunningExampleLength) {
  auto q = tokenize("Who is the highest prime minister of Spain after 1980?");
  auto kb = load_kb(std::string(KBQA_DATA_DIR) + "/spain/kb.tsv");
  auto g = parse_graph(
      "m.spain +governing_officials +office_holder\tmediator +basic_title m.prime_minister\t"
      "people.person\tmediator from after 1980\tanswer height max 1");
  auto seq = linearize(g, execute(g, kb), NameResolver(kb));
  auto p = make_sequence_pair(q, seq);
  EXPECT_EQ(p.tokens.size(), 1 + q.size() + 1 + seq.tokens.size() + 1);
  EXPECT_EQ(std::count(p.segments.begin(), p.segments.end(), 1), static_cast<long>(seq.tokens.size() + 1));
}

TEST(Vocabulary, SpecialsFirstAndOrderFree) {
  Vocabulary v(std::set<std::string>{"b", "a", "[A]"});
  EXPECT_EQ(v.tokens()[0], "[UNK]");
  EXPECT_EQ(v.index("[CLS]"), 1);
  EXPECT_EQ(v.index("a") + 1, v.index("b"));
  EXPECT_EQ(v.index("never seen"), v.unk());
  EXPECT_EQ(v.size(), 10u);
  EXPECT_THROW(Vocabulary::from_list({"a", "a"}), DataError);
  EXPECT_THROW(Vocabulary::from_list({"a"}), DataError);
}

TEST(Encode, ZeroParamsGiveConstantRepresentation) {
  EncoderParams<double> p(small_vocab(), tiny_shape());
  auto f1 = encode(make_sequence_pair({"who"}, Tokens{"x"}), p);
  auto f2 = encode(make_sequence_pair({"what", "is", "spain"}, Tokens{"madrid", "capital"}), p);
  EXPECT_EQ(f1, f2);
  EXPECT_TRUE(f1.isZero());
  p.score_b(0, 0) = 0.7;
  EXPECT_DOUBLE_EQ(score_pair(make_sequence_pair({"who"}, Tokens{"x"}), p), 0.7);
}

TEST(Encode, BagOfTokensWithoutPositions) {
  std::mt19937_64 rng(3);
  auto shape = tiny_shape(8, 2);
  shape.use_positions = false;
  auto p = init_params<double>(small_vocab(), shape, 9, 0.5);
  for (int i = 0; i < 50; ++i) {
    auto pair = make_sequence_pair(random_tokens(rng, 4), random_tokens(rng, 5));
    SequencePair shuffled = pair;
    std::vector<std::size_t> order(pair.tokens.size() - 1);
    std::iota(order.begin(), order.end(), 1);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t k = 0; k < order.size(); ++k) {
      shuffled.tokens[k + 1] = pair.tokens[order[k]];
      shuffled.segments[k + 1] = pair.segments[order[k]];
    }
    EXPECT_LT((encode(pair, p) - encode(shuffled, p)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Encode, MatchesStraightLineRecomputation) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 30; ++i) {
    auto p = init_params<double>(small_vocab(), {16, 2, 32, i % 2 == 0}, static_cast<std::uint64_t>(i), 0.3);
    auto pair = make_sequence_pair(random_tokens(rng, 5), random_tokens(rng, 9));
    auto f = encode(pair, p);
    auto ref = oracle::reference_encode(pair, p);
    for (Eigen::Index k = 0; k < f.size(); ++k) EXPECT_NEAR(f(k), ref[static_cast<std::size_t>(k)], 1e-6);
  }
}

TEST(Score, LinearLayer) {
  auto p = init_params<double>(small_vocab(), tiny_shape(), 1);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(6);
  p.score_w.setZero();
  p.score_b(0, 0) = 0.7;
  EXPECT_DOUBLE_EQ(score(f, p), 0.7);
  f(0) = 1.0;
  p.score_w(0, 0) = 1.0;
  p.score_b(0, 0) = 0.0;
  EXPECT_DOUBLE_EQ(score(f, p), 1.0);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd a(6), b(6);
    for (int k = 0; k < 6; ++k) {
      a(k) = u(rng);
      b(k) = u(rng);
      p.score_w(k, 0) = u(rng);
    }
    p.score_b(0, 0) = u(rng);
    long double dot = p.score_b(0, 0);
    for (int k = 0; k < 6; ++k) dot += static_cast<long double>(a(k)) * p.score_w(k, 0);
    EXPECT_NEAR(score(a, p), static_cast<double>(dot), 1e-9);
    const double alpha = u(rng), beta = u(rng);
    EXPECT_NEAR(score(Eigen::VectorXd(alpha * a + beta * b), p),
                alpha * score(a, p) + beta * score(b, p) - (alpha + beta - 1) * p.score_b(0, 0), 1e-12);
  }
}

TEST(Gradients, SymmetricStationaryPoint) {
  auto p = init_params<double>(small_vocab(), tiny_shape(), 5);
  auto pair = make_sequence_pair({"who", "is"}, Tokens{"spain", "capital"});
  p.score_w.setZero();  // every score is the bias
  std::vector<TrainingGroup> batch{{{pair, pair}, {1, 0}}};
  auto g = gradients<double>(batch, LossKind::Point, p);
  for (const auto* b : g.grad.blocks()) EXPECT_LT(b->cwiseAbs().maxCoeff(), 1e-15);
  batch = {{{pair, pair, pair}, {1, 0, 0}}};
  auto gl = gradients<double>(batch, LossKind::List, p);
  EXPECT_LT(gl.grad.token_emb.cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Gradients, MatchFiniteDifferences) {
  std::mt19937_64 rng(6);
  for (int draw = 0; draw < 12; ++draw) {
    for (LossKind kind : {LossKind::Point, LossKind::Pair, LossKind::List}) {
      auto p = init_params<double>(small_vocab(), tiny_shape(4 + draw % 3, 1 + draw % 2), rng(), 0.5);
      auto batch = random_batch(rng, kind);
      EXPECT_LT(oracle::max_gradient_error(batch, kind, p), 1e-3) << loss_kind_name(kind) << " draw " << draw;
    }
  }
}

TEST(Gradients, EmptyBatchAndBadLabels) {
  auto p = init_params<double>(small_vocab(), tiny_shape(), 5);
  std::vector<TrainingGroup> empty;
  EXPECT_THROW(gradients<double>(empty, LossKind::List, p), std::invalid_argument);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  EncoderParams<double> p(small_vocab(), tiny_shape());
  auto g = p.zeros_like();
  g.score_b(0, 0) = 3.0;
  g.score_w(1, 0) = -0.25;
  Adam<double> adam(p, 0.01);
  adam.step(p, g);
  EXPECT_NEAR(p.score_b(0, 0), -0.01, 1e-9);
  EXPECT_NEAR(p.score_w(1, 0), 0.01, 1e-9);
  EXPECT_EQ(p.score_w(0, 0), 0.0);
  EXPECT_EQ(adam.steps(), 1);
}

TEST(Training, SameSeedSameParameters) {
  std::mt19937_64 rng(8);
  auto batch = random_batch(rng, LossKind::List);
  auto run = [&] {
    auto p = init_params<double>(small_vocab(), tiny_shape(), 3);
    Adam<double> adam(p, 1e-3);
    std::mt19937_64 drop(77);
    for (int step = 0; step < 10; ++step) adam.step(p, gradients<double>(batch, LossKind::List, p, 0.5, {0.1, &drop}).grad);
    return p;
  };
  auto a = run(), b = run();
  auto ab = a.blocks(), bb = b.blocks();
  for (std::size_t i = 0; i < ab.size(); ++i) EXPECT_TRUE(*ab[i] == *bb[i]);
}

TEST(Checkpoint, RoundTripAndCorruption) {
  auto dir = std::filesystem::temp_directory_path() / "kbqa_ckpt_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "model.bin").string();
  auto p = init_params<double>(small_vocab(), tiny_shape(), 12);
  save_checkpoint(p, path);
  auto q = load_checkpoint<double>(path);
  EXPECT_EQ(q.vocab, p.vocab);
  EXPECT_EQ(q.shape, p.shape);
  auto pb = p.blocks(), qb = q.blocks();
  for (std::size_t i = 0; i < pb.size(); ++i) EXPECT_TRUE(*pb[i] == *qb[i]);

  auto f = load_checkpoint<float>(path);
  auto pair = make_sequence_pair({"who"}, Tokens{"spain"});
  EXPECT_NEAR(score_pair(pair, f), score_pair(pair, p), 1e-5);

  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 3);
  EXPECT_THROW(load_checkpoint<double>(path), DataError);
  std::ofstream(path, std::ios::binary) << "garbage";
  EXPECT_THROW(load_checkpoint<double>(path), DataError);
  EXPECT_THROW(load_checkpoint<double>((dir / "missing.bin").string()), DataError);
  std::filesystem::remove_all(dir);
}
