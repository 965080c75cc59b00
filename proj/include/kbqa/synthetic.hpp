#pragma once

// Seeded synthetic benchmarks.
//
// marker benchmark: candidate lists where exactly the positive sequences
//   contain a marker token; exercises the ranker without a KB.
// KB benchmark: a toy KB with 1-hop and CVT 2-hop facts per topic entity,
//   questions "what is the <attribute> of <place> ?" and gold answers. The
//   gold relation is always named primary_<attribute>; distractor relations
//   are aux_<attribute>.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "kbqa/focus_linker.hpp"
#include "kbqa/harness.hpp"
#include "kbqa/kb_store.hpp"
#include "kbqa/ranker.hpp"

namespace kbqa::synthetic {

inline constexpr const char* kMarker = "primary";

struct MarkerBenchmarkConfig {
  std::size_t questions = 100;
  std::size_t candidates = 12;
  std::size_t word_pool = 200;
  /// Probability that a question has a second positive candidate.
  double second_positive = 0.2;
};

inline std::vector<QuestionCandidates> marker_benchmark(const MarkerBenchmarkConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> word(0, cfg.word_pool - 1);
  std::uniform_int_distribution<std::size_t> len(4, 7);
  std::bernoulli_distribution two(cfg.second_positive);
  auto w = [&] { return "w" + std::to_string(word(rng)); };
  std::vector<QuestionCandidates> out;
  for (std::size_t q = 0; q < cfg.questions; ++q) {
    QuestionCandidates qc;
    qc.id = "m" + std::to_string(q);
    qc.question = {"what", "is", "the"};
    for (int i = 0; i < 3; ++i) qc.question.push_back(w());
    qc.question.emplace_back("?");
    std::uniform_int_distribution<std::size_t> slot(0, cfg.candidates - 1);
    std::set<std::size_t> positives{slot(rng)};
    if (two(rng)) positives.insert(slot(rng));
    for (std::size_t c = 0; c < cfg.candidates; ++c) {
      Tokens body;
      const std::size_t n = len(rng);
      for (std::size_t i = 0; i < n; ++i) body.push_back(w());
      const bool pos = positives.contains(c);
      if (pos) {
        std::uniform_int_distribution<std::size_t> at(0, body.size());
        body.insert(body.begin() + static_cast<std::ptrdiff_t>(at(rng)), kMarker);
      }
      LinearSequence seq;
      seq.tokens = {"[unused0]", "[unused1]", "[unused2]", "[unused3]"};
      seq.tokens.insert(seq.tokens.end(), body.begin(), body.end());
      seq.tokens.emplace_back("[A]");
      QueryGraph g;
      g.main = {qc.id, {{"c" + std::to_string(c), Direction::Forward}}};
      qc.candidates.push_back(make_candidate(std::move(g), std::move(seq), pos ? 1.0 : 0.0));
    }
    out.push_back(std::move(qc));
  }
  return out;
}

struct KbBenchmarkConfig {
  std::size_t train = 200;
  std::size_t validation = 50;
  std::size_t test = 100;
  std::size_t distractors = 3;
};

struct KbBenchmark {
  std::vector<Triple> triples;
  std::set<std::string> cvt;
  KnowledgeBase kb;
  Lexicon lexicon;
  std::vector<std::pair<std::string, std::string>> lexicon_rows;  // mention, entity
  std::vector<QAExample> examples;
};

inline const std::vector<std::string>& attributes() {
  static const std::vector<std::string> kAttrs = {"capital", "currency", "language", "anthem",
                                                  "founder", "leader",   "mascot",   "river"};
  return kAttrs;
}

inline KbBenchmark kb_benchmark(const KbBenchmarkConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto& attrs = attributes();
  std::uniform_int_distribution<std::size_t> pick_attr(0, attrs.size() - 1);
  std::bernoulli_distribution coin(0.5);
  std::bernoulli_distribution rare(0.2);
  const std::size_t total = cfg.train + cfg.validation + cfg.test;
  std::uniform_int_distribution<std::size_t> pick_topic(0, total - 1);

  KbBenchmark b;
  auto add = [&](std::string s, std::string p, std::string o, LiteralKind k = LiteralKind::None) {
    b.triples.push_back({std::move(s), std::move(p), std::move(o), k});
  };
  const char* answer_types[2] = {"people.person", "location.city"};
  for (std::size_t i = 0; i < total; ++i) {
    const std::string id = std::to_string(i);
    const std::string topic = "t" + id;
    add(topic, "name", "place" + id, LiteralKind::String);
    add(topic, "isa", "location.country");
    b.lexicon_rows.push_back({"place" + id, topic});

    const std::string& attr = attrs[pick_attr(rng)];
    std::set<std::string> gold;
    auto new_entity = [&](const std::string& stem) {
      std::string e = stem + id;
      add(e, "name", "item " + stem + id, LiteralKind::String);
      add(e, "isa", answer_types[coin(rng) ? 1 : 0]);
      return e;
    };
    auto attach = [&](const std::string& pred, const std::string& target, bool two_hop, const std::string& tag) {
      if (!two_hop) {
        add(topic, pred, target);
        return;
      }
      const std::string mediator = "cvt" + tag + id;
      b.cvt.insert(mediator);
      add(topic, pred, mediator);
      add(mediator, "value", target);
    };

    const bool gold_two_hop = coin(rng);
    const std::string a = new_entity("a");
    gold.insert(a);
    attach("primary_" + attr, a, gold_two_hop, "g");
    if (rare(rng)) {
      const std::string a2 = new_entity("b");
      gold.insert(a2);
      if (gold_two_hop) {
        add("cvtg" + id, "value", a2);
      } else {
        add(topic, "primary_" + attr, a2);
      }
    }
    for (std::size_t d = 0; d < cfg.distractors; ++d) {
      const std::string& other = attrs[pick_attr(rng)];
      const std::string target = new_entity("d" + std::to_string(d) + "x");
      attach("aux_" + other, target, coin(rng), "d" + std::to_string(d));
    }
    // another topic points at this one: backward candidates
    add("t" + std::to_string(pick_topic(rng)), "aux_neighbor", topic);

    QAExample ex;
    ex.id = "q" + id;
    ex.question = "what is the " + attr + " of place" + id + " ?";
    ex.gold_answers = gold;
    ex.split = i < cfg.train ? Split::Train : (i < cfg.train + cfg.validation ? Split::Validation : Split::Test);
    b.examples.push_back(std::move(ex));
  }
  for (const auto& [m, e] : b.lexicon_rows) b.lexicon.add(m, e, 1.0);
  b.kb = KnowledgeBase::from_triples(b.triples, b.cvt);
  return b;
}

/// Writes kb.tsv, lexicon.tsv and dataset.jsonl into `dir`.
inline void write_kb_benchmark(const KbBenchmark& b, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "kb.tsv");
    if (!out) throw DataError("cannot write " + (dir / "kb.tsv").string());
    write_kb(out, b.kb);
  }
  {
    std::ofstream out(dir / "lexicon.tsv");
    for (const auto& [m, e] : b.lexicon_rows) out << m << '\t' << e << '\t' << "1.0\n";
  }
  std::ofstream out(dir / "dataset.jsonl");
  write_dataset(out, b.examples);
}

}  // namespace kbqa::synthetic
