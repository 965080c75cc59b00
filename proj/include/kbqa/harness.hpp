#pragma once

// Dataset ingestion, end-to-end pipeline runs, evaluation and ablations.
//
// Dataset format: JSON lines, one record per line:
//   {"id": "q1", "question": "...", "answers": ["m.x", ...], "split": "train"}
// split is one of train|validation|test. Answers may only be empty in test.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "kbqa/encoder.hpp"
#include "kbqa/focus_linker.hpp"
#include "kbqa/graph_executor.hpp"
#include "kbqa/graph_generator.hpp"
#include "kbqa/kb_store.hpp"
#include "kbqa/linearizer.hpp"
#include "kbqa/ranker.hpp"

namespace kbqa {

enum class Split { Train, Validation, Test };

inline std::string_view split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: break;
  }
  return "test";
}

inline std::optional<Split> parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "validation") return Split::Validation;
  if (s == "test") return Split::Test;
  return std::nullopt;
}

struct QAExample {
  std::string id;
  std::string question;
  std::set<std::string> gold_answers;
  Split split = Split::Train;
  bool operator==(const QAExample&) const = default;
};

inline std::vector<QAExample> parse_dataset(std::istream& in, const std::string& source = "<dataset>") {
  std::vector<QAExample> out;
  std::set<std::string> ids;
  std::string line;
  std::size_t record = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++record;
    const std::string where = source + ": record " + std::to_string(record);
    QAExample ex;
    try {
      auto j = nlohmann::json::parse(line);
      ex.id = j.at("id").get<std::string>();
      ex.question = j.at("question").get<std::string>();
      for (const auto& a : j.at("answers")) ex.gold_answers.insert(a.get<std::string>());
      auto split = parse_split(j.at("split").get<std::string>());
      if (!split) throw DataError("unknown split");
      ex.split = *split;
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
    if (ex.id.empty()) throw DataError(where + ": empty id");
    if (trim(ex.question).empty()) throw DataError(where + ": empty question");
    if (ex.gold_answers.empty() && ex.split != Split::Test) {
      throw DataError(where + ": no gold answers in " + std::string(split_name(ex.split)) + " split");
    }
    if (!ids.insert(ex.id).second) throw DataError(where + ": duplicate id " + ex.id);
    out.push_back(std::move(ex));
  }
  return out;
}

inline std::vector<QAExample> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset: " + path);
  return parse_dataset(in, path);
}

inline void write_dataset(std::ostream& out, const std::vector<QAExample>& examples) {
  for (const auto& ex : examples) {
    nlohmann::json j;
    j["id"] = ex.id;
    j["question"] = ex.question;
    j["answers"] = std::vector<std::string>(ex.gold_answers.begin(), ex.gold_answers.end());
    j["split"] = std::string(split_name(ex.split));
    out << j.dump() << '\n';
  }
}

inline std::vector<QAExample> select_split(const std::vector<QAExample>& all, Split split) {
  std::vector<QAExample> out;
  for (const auto& ex : all) {
    if (ex.split == split) out.push_back(ex);
  }
  return out;
}

// ---------------------------------------------------------------- pipeline

struct PipelineConfig {
  LinkerConfig linker;
  GeneratorConfig generator;
  LinearizerConfig linearizer;
  std::size_t max_len = 128;
  unsigned threads = 1;
};

/// Generates, executes and linearizes every candidate of one question and
/// scores it against the gold answers.
inline QuestionCandidates build_question_candidates(const QAExample& ex, const KnowledgeBase& kb, const Lexicon& lexicon,
                                                    const PipelineConfig& config) {
  QuestionCandidates qc;
  qc.id = ex.id;
  qc.question = tokenize(ex.question);
  const NameResolver names(kb);
  for (auto& g : generate_candidates(qc.question, kb, lexicon, config.linker, config.generator)) {
    AnswerSet answers = execute(g, kb);
    LinearSequence seq = linearize(g, answers, names, config.linearizer);
    const double f1 = answer_f1(answers, ex.gold_answers);
    qc.candidates.push_back(make_candidate(std::move(g), std::move(seq), f1));
  }
  return qc;
}

inline std::vector<QuestionCandidates> build_candidates(const std::vector<QAExample>& examples, const KnowledgeBase& kb,
                                                        const Lexicon& lexicon, const PipelineConfig& config) {
  std::vector<QuestionCandidates> out(examples.size());
  const unsigned threads = std::max(1u, config.threads);
  auto work = [&](unsigned t) {
    for (std::size_t i = t; i < examples.size(); i += threads) {
      out[i] = build_question_candidates(examples[i], kb, lexicon, config);
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t);
    for (auto& th : pool) th.join();
  }
  return out;
}

/// Sorted token set over questions and sequences.
inline Vocabulary build_vocabulary(std::span<const QuestionCandidates> questions) {
  std::set<std::string> corpus;
  for (const auto& q : questions) {
    corpus.insert(q.question.begin(), q.question.end());
    for (const auto& c : q.candidates) corpus.insert(c.sequence.tokens.begin(), c.sequence.tokens.end());
  }
  return Vocabulary(corpus);
}

struct QuestionResult {
  std::string id;
  std::string selected;  // canonical graph, empty when nothing was generated
  std::set<std::string> predicted;
  double f1 = 0.0;
  double ceiling = 0.0;
  std::size_t candidates = 0;
  std::string error;
};

inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

struct RunReport {
  std::vector<QuestionResult> rows;
  double average_f1 = 0.0;
  double average_ceiling = 0.0;
  std::vector<std::pair<std::string, std::string>> config;
  double elapsed_seconds = 0.0;  // not part of to_text()

  /// Deterministic text form: config echo, one row per question, totals.
  std::string to_text() const {
    std::ostringstream o;
    for (const auto& [k, v] : config) o << "# " << k << '\t' << v << '\n';
    o << "id\tf1\tceiling\tcandidates\tanswers\tgraph\n";
    for (const auto& r : rows) {
      std::string graph = r.selected;
      std::replace(graph.begin(), graph.end(), '\t', '|');
      std::string answers;
      for (const auto& a : r.predicted) answers += (answers.empty() ? "" : ";") + a;
      o << r.id << '\t' << format_real(r.f1) << '\t' << format_real(r.ceiling) << '\t' << r.candidates << '\t'
        << answers << '\t' << (r.error.empty() ? graph : "error: " + r.error) << '\n';
    }
    o << "questions\t" << rows.size() << '\n';
    o << "average_f1\t" << format_real(average_f1) << '\n';
    o << "generation_ceiling\t" << format_real(average_ceiling) << '\n';
    return o.str();
  }

  /// `question-id<TAB>answer;answer;...`
  std::string answer_dump() const {
    std::ostringstream o;
    for (const auto& r : rows) {
      o << r.id << '\t';
      bool first = true;
      for (const auto& a : r.predicted) o << (first ? "" : ";") << a, first = false;
      o << '\n';
    }
    return o.str();
  }
};

/// Selects g* for one already-built question and scores it.
template <typename Scorer>
QuestionResult answer_question(const QuestionCandidates& qc, const std::set<std::string>& gold, const KnowledgeBase& kb,
                               const Scorer& scorer) {
  QuestionResult r;
  r.id = qc.id;
  r.candidates = qc.candidates.size();
  r.ceiling = qc.ceiling();
  if (qc.candidates.empty()) return r;
  const auto& best = qc.candidates[select_best_index(qc.question, qc.candidates, scorer)];
  r.selected = serialize(best.graph);
  r.predicted = execute(best.graph, kb).answers;
  r.f1 = answer_f1(r.predicted, gold);
  return r;
}

/// Generate -> linearize -> select -> execute -> F1 for every example.
/// Questions are processed on config.threads workers; rows keep input order.
template <typename Scorer>
RunReport run_pipeline(const std::vector<QAExample>& examples, const KnowledgeBase& kb, const Lexicon& lexicon,
                       const Scorer& scorer, const PipelineConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  RunReport report;
  report.rows.resize(examples.size());
  const unsigned threads = std::max(1u, config.threads);
  auto work = [&](unsigned t) {
    for (std::size_t i = t; i < examples.size(); i += threads) {
      try {
        report.rows[i] = answer_question(build_question_candidates(examples[i], kb, lexicon, config),
                                         examples[i].gold_answers, kb, scorer);
      } catch (const std::exception& e) {
        QuestionResult r;
        r.id = examples[i].id;
        r.error = e.what();
        report.rows[i] = std::move(r);
      }
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t);
    for (auto& th : pool) th.join();
  }
  for (const auto& r : report.rows) {
    report.average_f1 += r.f1;
    report.average_ceiling += r.ceiling;
  }
  if (!report.rows.empty()) {
    report.average_f1 /= static_cast<double>(report.rows.size());
    report.average_ceiling /= static_cast<double>(report.rows.size());
  }
  report.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

// ---------------------------------------------------------------- ablation

enum class SequenceInfo { AllPath, NoConstraints, NoAnswer };

inline std::string_view sequence_info_name(SequenceInfo s) {
  switch (s) {
    case SequenceInfo::AllPath: return "all";
    case SequenceInfo::NoConstraints: return "no-constraints";
    case SequenceInfo::NoAnswer: break;
  }
  return "no-answer";
}

inline std::optional<SequenceInfo> parse_sequence_info(std::string_view s) {
  if (s == "all") return SequenceInfo::AllPath;
  if (s == "no-constraints") return SequenceInfo::NoConstraints;
  if (s == "no-answer") return SequenceInfo::NoAnswer;
  return std::nullopt;
}

inline LinearizerConfig linearizer_for(SequenceInfo info, LinearizerConfig base = {}) {
  base.include_constraints = info != SequenceInfo::NoConstraints;
  base.fill_answer = info != SequenceInfo::NoAnswer;
  return base;
}

struct AblationSetting {
  LossKind strategy = LossKind::List;
  SequenceInfo info = SequenceInfo::AllPath;
  std::size_t negatives = 10;
};

struct AblationRow {
  AblationSetting setting;
  double val_f1 = 0.0;
  double average_f1 = 0.0;
  double ceiling = 0.0;
  int best_epoch = 0;
};

struct AblationTable {
  std::vector<AblationRow> rows;

  std::string to_text() const {
    std::ostringstream o;
    o << "strategy\tsequence\tnegatives\tval_f1\tavg_f1\tceiling\tbest_epoch\n";
    for (const auto& r : rows) {
      o << loss_kind_name(r.setting.strategy) << '\t' << sequence_info_name(r.setting.info) << '\t'
        << r.setting.negatives << '\t' << format_real(r.val_f1) << '\t' << format_real(r.average_f1) << '\t'
        << format_real(r.ceiling) << '\t' << r.best_epoch << '\n';
    }
    return o.str();
  }
};

/// Trains one model per setting on the train split (selecting on
/// validation) and evaluates it on `eval_split`.
inline AblationTable run_ablation(const std::vector<QAExample>& dataset, const KnowledgeBase& kb, const Lexicon& lexicon,
                                  const std::vector<AblationSetting>& settings, const TrainConfig& base_train,
                                  const EncoderShape& shape, const PipelineConfig& base_pipeline,
                                  Split eval_split = Split::Test) {
  AblationTable table;
  const auto train_ex = select_split(dataset, Split::Train);
  const auto val_ex = select_split(dataset, Split::Validation);
  const auto eval_ex = select_split(dataset, eval_split);
  struct Built {
    std::vector<QuestionCandidates> train, val;
  };
  std::map<SequenceInfo, Built> cache;
  for (const auto& s : settings) {
    PipelineConfig pc = base_pipeline;
    pc.linearizer = linearizer_for(s.info, base_pipeline.linearizer);
    auto it = cache.find(s.info);
    if (it == cache.end()) {
      Built b{build_candidates(train_ex, kb, lexicon, pc), build_candidates(val_ex, kb, lexicon, pc)};
      it = cache.emplace(s.info, std::move(b)).first;
    }
    TrainConfig tc = base_train;
    tc.strategy = s.strategy;
    tc.negatives = s.negatives;
    auto params = init_params<double>(build_vocabulary(it->second.train), shape, tc.seed);
    auto trained = train<double>(it->second.train, it->second.val, tc, std::move(params));
    const EncoderScorer<double> scorer{&trained.params, tc.max_len};
    auto report = run_pipeline(eval_ex, kb, lexicon, scorer, pc);
    AblationRow row;
    row.setting = s;
    row.best_epoch = trained.best_epoch;
    row.val_f1 = trained.metrics[static_cast<std::size_t>(trained.best_epoch - 1)].val_f1;
    row.average_f1 = report.average_f1;
    row.ceiling = report.average_ceiling;
    table.rows.push_back(row);
  }
  return table;
}

}  // namespace kbqa
