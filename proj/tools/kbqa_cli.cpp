// kbqa command-line front end.
//
// Exit codes: 0 ok, 1 usage, 2 data, 3 numerical.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include "kbqa/graph_executor.hpp"
#include "kbqa/harness.hpp"
#include "kbqa/synthetic.hpp"

namespace {

using namespace kbqa;

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Options {
  // inputs
  std::string kb;
  std::string lexicon;
  std::string dataset;
  std::string superlatives;
  std::string model;
  std::string out;
  std::string question;
  std::string split = "test";
  // pipeline
  unsigned threads = 1;
  std::size_t max_candidates = 2000;
  std::size_t max_types = 10;
  bool allow_non_cvt = false;
  bool no_enrich = false;
  std::string sequence = "all";
  // encoder
  int dim = 64;
  int depth = 2;
  int max_len = 128;
  bool no_positions = false;
  // training
  std::string strategy = "listwise";
  std::size_t negatives = 10;
  int epochs = 5;
  std::uint64_t seed = 0;
  double learning_rate = 5e-5;
  double margin = 0.5;
  double dropout = 0.1;
  std::size_t batch_size = 1;
  bool no_subsample = false;
  std::string metrics;
  bool untrained = false;
  // ablate
  std::vector<std::string> strategies = {"pointwise", "pairwise", "listwise"};
  std::vector<std::size_t> sweep = {1, 5, 10, 20};
  std::vector<std::string> sequences = {"all"};
  std::string eval_split = "test";
  // generate / export
  std::size_t limit = 0;
  bool all = false;
  // synth
  std::size_t synth_train = 200;
  std::size_t synth_validation = 50;
  std::size_t synth_test = 100;
};

std::string require(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string("missing required option ") + flag);
  return value;
}

Split split_or_throw(const std::string& s) {
  auto v = parse_split(s);
  if (!v) throw UsageError("unknown split: " + s);
  return *v;
}

LossKind strategy_or_throw(const std::string& s) {
  auto v = parse_strategy(s);
  if (!v) throw UsageError("unknown strategy: " + s);
  return *v;
}

SequenceInfo sequence_or_throw(const std::string& s) {
  auto v = parse_sequence_info(s);
  if (!v) throw UsageError("unknown sequence setting: " + s);
  return *v;
}

/// Writes to --out when given, else stdout.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty()) return;
    file_ = std::make_unique<std::ofstream>(path);
    if (!*file_) throw DataError("cannot write " + path);
  }
  std::ostream& operator*() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

PipelineConfig pipeline_config(const Options& o) {
  PipelineConfig pc;
  pc.threads = o.threads;
  pc.max_len = static_cast<std::size_t>(o.max_len);
  pc.generator.max_candidates = o.max_candidates;
  pc.generator.allow_non_cvt = o.allow_non_cvt;
  pc.linker.max_types = o.max_types;
  pc.linker.enrich_entities = !o.no_enrich;
  if (!o.superlatives.empty()) pc.linker.superlatives = load_superlatives(o.superlatives);
  pc.linearizer = linearizer_for(sequence_or_throw(o.sequence));
  return pc;
}

EncoderShape encoder_shape(const Options& o) {
  if (o.dim < 1 || o.depth < 0 || o.max_len < 4) throw UsageError("bad encoder shape");
  return {o.dim, o.depth, o.max_len, !o.no_positions};
}

TrainConfig train_config(const Options& o) {
  TrainConfig tc;
  tc.strategy = strategy_or_throw(o.strategy);
  tc.negatives = o.negatives;
  tc.epochs = o.epochs;
  tc.seed = o.seed;
  tc.learning_rate = o.learning_rate;
  tc.margin = o.margin;
  tc.dropout = o.dropout;
  tc.batch_size = o.batch_size;
  tc.point_subsample = !o.no_subsample;
  tc.max_len = static_cast<std::size_t>(o.max_len);
  try {
    tc.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return tc;
}

struct World {
  KnowledgeBase kb;
  Lexicon lexicon;
};

World load_world(const Options& o) {
  World w;
  w.kb = load_kb(require(o.kb, "--kb"));
  w.lexicon = load_lexicon(require(o.lexicon, "--lexicon"));
  return w;
}

/// The questions a command works on: --question, else the --split of --dataset.
std::vector<QAExample> questions(const Options& o) {
  if (!o.question.empty()) return {QAExample{"cli", o.question, {}, Split::Test}};
  return select_split(load_dataset(require(o.dataset, "--dataset (or --question)")), split_or_throw(o.split));
}

std::vector<std::pair<std::string, std::string>> config_echo(const Options& o, bool trained) {
  std::vector<std::pair<std::string, std::string>> c = {
      {"kb", o.kb},
      {"dataset", o.dataset},
      {"split", o.split},
      {"sequence", o.sequence},
      {"max-candidates", std::to_string(o.max_candidates)},
      {"allow-non-cvt", o.allow_non_cvt ? "true" : "false"},
  };
  if (trained) {
    c.emplace_back("model", o.model);
  } else {
    c.emplace_back("untrained-seed", std::to_string(o.seed));
  }
  return c;
}

// ---------------------------------------------------------------- commands

int cmd_ingest(const Options& o, const std::string& write_to) {
  Output out(o.out);
  const auto kb = load_kb(require(o.kb, "--kb"));
  std::size_t literals = 0;
  for (const auto& t : kb.triples()) literals += t.is_literal();
  *out << "triples\t" << kb.size() << '\n'
       << "entities\t" << kb.entities().size() << '\n'
       << "literal_objects\t" << literals << '\n'
       << "types\t" << kb.type_vocab().size() << '\n'
       << "cvt\t" << kb.cvt_marks().size() << '\n';
  if (!o.lexicon.empty()) {
    (void)load_lexicon(o.lexicon);
    *out << "lexicon\tok\n";
  }
  if (!o.dataset.empty()) {
    const auto ds = load_dataset(o.dataset);
    for (Split s : {Split::Train, Split::Validation, Split::Test}) {
      *out << "dataset_" << split_name(s) << '\t' << select_split(ds, s).size() << '\n';
    }
  }
  if (!write_to.empty()) {
    std::ofstream f(write_to);
    if (!f) throw DataError("cannot write " + write_to);
    write_kb(f, kb);
  }
  return kOk;
}

void print_link(std::ostream& out, const std::string& id, const Tokens& q, const LinkResult& r) {
  static const char* kinds[] = {"entity", "type", "time", "ordinal"};
  out << id << '\t' << kinds[static_cast<int>(r.kind)] << '\t' << r.span.begin << '-' << r.span.end << '\t'
      << join_range(q, r.span.begin, r.span.end) << '\t';
  switch (r.kind) {
    case LinkKind::Entity:
    case LinkKind::Type: out << r.id; break;
    case LinkKind::Time: out << comparator_word(r.time.comparator) << ' ' << r.time.year; break;
    case LinkKind::Ordinal: out << direction_word(r.ordinal.direction) << ' ' << r.ordinal.rank; break;
  }
  out << '\t' << format_real(r.score) << '\n';
}

int cmd_link(const Options& o) {
  const auto w = load_world(o);
  const auto pc = pipeline_config(o);
  Output out(o.out);
  *out << "id\tkind\tspan\tmention\ttarget\tscore\n";
  for (const auto& ex : questions(o)) {
    const Tokens q = tokenize(ex.question);
    const auto links = link_focus_nodes(q, w.kb, w.lexicon, pc.linker);
    for (const auto* group : {&links.entities, &links.types, &links.times, &links.ordinals}) {
      for (const auto& r : *group) print_link(*out, ex.id, q, r);
    }
  }
  return kOk;
}

int cmd_generate(const Options& o) {
  const auto w = load_world(o);
  const auto pc = pipeline_config(o);
  Output out(o.out);
  *out << "id\tf1\tanswers\tgraph\tsequence\n";
  for (const auto& ex : questions(o)) {
    const auto qc = build_question_candidates(ex, w.kb, w.lexicon, pc);
    std::size_t shown = 0;
    for (const auto& c : qc.candidates) {
      if (o.limit != 0 && shown++ >= o.limit) break;
      std::string graph = serialize(c.graph);
      std::replace(graph.begin(), graph.end(), '\t', '|');
      const auto answers = execute(c.graph, w.kb).answers;
      *out << ex.id << '\t' << format_real(c.f1_vs_gold) << '\t' << answers.size() << '\t' << graph << '\t'
           << c.sequence.text() << '\n';
    }
  }
  return kOk;
}

void log_metrics(std::ostream& out, const TrainResult<double>& r) {
  out << "epoch\tstrategy\tloss\tval_f1\tval_hit_rate\n";
  for (const auto& m : r.metrics) out << m.log_line() << '\t' << format_real(m.val_hit_rate) << '\n';
  out << "best_epoch\t" << r.best_epoch << '\n';
}

int cmd_train(const Options& o) {
  const auto tc = train_config(o);
  const auto shape = encoder_shape(o);
  const std::string model = require(o.model, "--model");
  const auto w = load_world(o);
  const auto pc = pipeline_config(o);
  const auto ds = load_dataset(require(o.dataset, "--dataset"));
  const auto train_set = build_candidates(select_split(ds, Split::Train), w.kb, w.lexicon, pc);
  const auto val_set = build_candidates(select_split(ds, Split::Validation), w.kb, w.lexicon, pc);
  if (train_set.empty()) throw DataError("dataset has no train split");
  auto result = train<double>(train_set, val_set, tc, init_params<double>(build_vocabulary(train_set), shape, tc.seed));
  save_checkpoint(result.params, model);
  Output out(o.metrics);
  log_metrics(*out, result);
  return kOk;
}

/// Runs the pipeline with a trained or seeded-untrained encoder.
RunReport run(const Options& o) {
  const auto w = load_world(o);
  const auto pc = pipeline_config(o);
  const auto examples = select_split(load_dataset(require(o.dataset, "--dataset")), split_or_throw(o.split));
  EncoderParams<double> params;
  if (o.untrained) {
    params = init_params<double>(build_vocabulary(build_candidates(examples, w.kb, w.lexicon, pc)), encoder_shape(o),
                                 o.seed);
  } else {
    params = load_checkpoint<double>(require(o.model, "--model (or --untrained)"));
  }
  auto report = run_pipeline(examples, w.kb, w.lexicon, EncoderScorer<double>{&params, pc.max_len}, pc);
  report.config = config_echo(o, !o.untrained);
  return report;
}

int cmd_predict(const Options& o) {
  const auto report = run(o);
  Output out(o.out);
  *out << report.answer_dump();
  return kOk;
}

int cmd_eval(const Options& o) {
  const auto report = run(o);
  Output out(o.out);
  *out << report.to_text();
  std::cerr << "evaluated " << report.rows.size() << " questions in " << format_real(report.elapsed_seconds) << " s\n";
  return kOk;
}

int cmd_ablate(const Options& o) {
  auto tc = train_config(o);
  const auto shape = encoder_shape(o);
  const auto w = load_world(o);
  const auto pc = pipeline_config(o);
  std::vector<AblationSetting> settings;
  for (const auto& s : o.strategies) {
    for (const auto& seq : o.sequences) {
      for (std::size_t m : o.sweep) {
        if (m == 0) throw UsageError("negative counts must be positive");
        settings.push_back({strategy_or_throw(s), sequence_or_throw(seq), m});
      }
    }
  }
  const auto ds = load_dataset(require(o.dataset, "--dataset"));
  const auto table = run_ablation(ds, w.kb, w.lexicon, settings, tc, shape, pc, split_or_throw(o.eval_split));
  Output out(o.out);
  *out << table.to_text();
  return kOk;
}

int cmd_export_sparql(const Options& o) {
  const auto w = load_world(o);
  const auto pc = pipeline_config(o);
  std::unique_ptr<EncoderParams<double>> params;
  if (!o.all) params = std::make_unique<EncoderParams<double>>(load_checkpoint<double>(require(o.model, "--model (or --all)")));
  Output out(o.out);
  for (const auto& ex : questions(o)) {
    const auto qc = build_question_candidates(ex, w.kb, w.lexicon, pc);
    if (qc.candidates.empty()) {
      *out << "# " << ex.id << "\tno candidates\n\n";
      continue;
    }
    std::vector<std::size_t> chosen;
    if (o.all) {
      for (std::size_t i = 0; i < qc.candidates.size(); ++i) chosen.push_back(i);
    } else {
      chosen.push_back(select_best_index(qc.question, qc.candidates, EncoderScorer<double>{params.get(), pc.max_len}));
    }
    for (std::size_t i : chosen) {
      std::string graph = serialize(qc.candidates[i].graph);
      std::replace(graph.begin(), graph.end(), '\t', '|');
      *out << "# " << ex.id << '\t' << graph << '\n' << to_sparql_text(qc.candidates[i].graph) << "\n";
    }
  }
  return kOk;
}

int cmd_synth(const Options& o, const std::string& dir) {
  synthetic::KbBenchmarkConfig cfg;
  cfg.train = o.synth_train;
  cfg.validation = o.synth_validation;
  cfg.test = o.synth_test;
  if (cfg.train + cfg.validation + cfg.test == 0) throw UsageError("empty benchmark");
  synthetic::write_kb_benchmark(synthetic::kb_benchmark(cfg, o.seed), require(dir, "--dir"));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Query-graph KBQA: generation, linearization and learned ranking"};
  app.set_config("--config", "", "key = value file; keys are long flag names, [subcommand] sections allowed");
  app.allow_config_extras(false);
  app.require_subcommand(1);
  app.fallthrough();

  Options o;
  std::string write_to;
  std::string synth_dir;

  auto* g = app.add_option_group("inputs");
  g->add_option("--kb", o.kb, "triple file");
  g->add_option("--lexicon", o.lexicon, "mention lexicon (mention<TAB>entity<TAB>prior)");
  g->add_option("--dataset", o.dataset, "JSON-lines dataset");
  g->add_option("--superlatives", o.superlatives, "superlative vocabulary (word<TAB>max|min)");
  g->add_option("--model", o.model, "encoder checkpoint path");
  g->add_option("--out", o.out, "output file (default stdout)");
  g->add_option("--question", o.question, "single question instead of a dataset split");
  g->add_option("--split", o.split, "dataset split")->check(CLI::IsMember({"train", "validation", "test"}));
  app.add_option("--threads", o.threads, "worker threads")->check(CLI::Range(1u, 256u));
  app.add_option("--max-candidates", o.max_candidates, "candidate cap per question")->check(CLI::PositiveNumber);
  app.add_option("--max-types", o.max_types, "type links kept per question");
  app.add_flag("--allow-non-cvt", o.allow_non_cvt, "allow 2-hop paths through non-CVT nodes");
  app.add_flag("--no-enrich", o.no_enrich, "do not add lexicon aliases as entity candidates");
  app.add_option("--sequence", o.sequence, "linearization: all|no-constraints|no-answer")
      ->check(CLI::IsMember({"all", "no-constraints", "no-answer"}));
  app.add_option("--dim", o.dim, "encoder width");
  app.add_option("--depth", o.depth, "encoder blocks");
  app.add_option("--max-len", o.max_len, "max sequence-pair length");
  app.add_flag("--no-positions", o.no_positions, "disable position embeddings");

  auto add_training = [&](CLI::App* c, bool seed_required) {
    c->add_option("--strategy", o.strategy, "pointwise|pairwise|listwise")
        ->check(CLI::IsMember({"pointwise", "pairwise", "listwise"}));
    c->add_option("--negatives", o.negatives, "negatives per positive (m)")->check(CLI::PositiveNumber);
    c->add_option("--epochs", o.epochs, "training epochs")->check(CLI::PositiveNumber);
    auto* seed = c->add_option("--seed", o.seed, "random seed");
    if (seed_required) seed->required();
    c->add_option("--learning-rate", o.learning_rate, "Adam step size");
    c->add_option("--margin", o.margin, "pairwise hinge margin");
    c->add_option("--dropout", o.dropout, "dropout rate");
    c->add_option("--batch-size", o.batch_size, "groups per update")->check(CLI::PositiveNumber);
    c->add_flag("--no-subsample", o.no_subsample, "pointwise: keep every negative");
  };

  auto* ingest = app.add_subcommand("ingest-kb", "validate a KB (and optional lexicon/dataset), print statistics");
  ingest->add_option("--write", write_to, "write the normalized KB here");
  auto* link = app.add_subcommand("link", "print focus-node links");
  auto* generate = app.add_subcommand("generate", "print candidate graphs with F1 and linearization");
  generate->add_option("--limit", o.limit, "max candidates per question (0 = all)");
  auto* train_cmd = app.add_subcommand("train", "train the ranker; writes --model and a metrics log");
  add_training(train_cmd, true);
  train_cmd->add_option("--metrics", o.metrics, "metrics log file (default stdout)");
  auto* predict = app.add_subcommand("predict", "print predicted answers per question");
  auto* eval = app.add_subcommand("eval", "print the evaluation report");
  for (auto* c : {predict, eval}) {
    c->add_flag("--untrained", o.untrained, "score with seeded random weights instead of --model");
    c->add_option("--seed", o.seed, "seed for --untrained");
  }
  auto* ablate = app.add_subcommand("ablate", "train and evaluate every strategy x sequence x negatives setting");
  add_training(ablate, false);
  ablate->add_option("--strategies", o.strategies, "strategies to compare")->delimiter(',');
  ablate->add_option("--sweep", o.sweep, "negative counts")->delimiter(',');
  ablate->add_option("--sequences", o.sequences, "linearization settings")->delimiter(',');
  ablate->add_option("--eval-split", o.eval_split, "split to evaluate")->check(CLI::IsMember({"validation", "test"}));
  auto* sparql = app.add_subcommand("export-sparql", "print SPARQL for the selected graph of each question");
  sparql->add_flag("--all", o.all, "export every candidate, no model needed");
  auto* synth = app.add_subcommand("synth", "write a synthetic KB benchmark (kb.tsv, lexicon.tsv, dataset.jsonl)");
  synth->add_option("--dir", synth_dir, "output directory")->required();
  synth->add_option("--seed", o.seed, "benchmark seed");
  synth->add_option("--train", o.synth_train, "train questions");
  synth->add_option("--validation", o.synth_validation, "validation questions");
  synth->add_option("--test", o.synth_test, "test questions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (ingest->parsed()) return cmd_ingest(o, write_to);
    if (link->parsed()) return cmd_link(o);
    if (generate->parsed()) return cmd_generate(o);
    if (train_cmd->parsed()) return cmd_train(o);
    if (predict->parsed()) return cmd_predict(o);
    if (eval->parsed()) return cmd_eval(o);
    if (ablate->parsed()) return cmd_ablate(o);
    if (sparql->parsed()) return cmd_export_sparql(o);
    if (synth->parsed()) return cmd_synth(o, synth_dir);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}
