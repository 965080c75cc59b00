#pragma once

// Training-instance construction, the training loop over the three ranking
// objectives, and optimal-graph selection.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kbqa/encoder.hpp"
#include "kbqa/losses.hpp"
#include "kbqa/query_graph.hpp"

namespace kbqa {

inline constexpr double kPositiveF1Threshold = 0.1;

inline int label_for_f1(double f1) { return f1 > kPositiveF1Threshold ? 1 : 0; }

struct Candidate {
  QueryGraph graph;
  LinearSequence sequence;
  double f1_vs_gold = 0.0;
  int label = 0;
};

inline Candidate make_candidate(QueryGraph graph, LinearSequence sequence, double f1) {
  return {std::move(graph), std::move(sequence), f1, label_for_f1(f1)};
}

/// One question with its scored candidate graphs.
struct QuestionCandidates {
  std::string id;
  Tokens question;
  std::vector<Candidate> candidates;

  /// Best F1 reachable by any candidate.
  double ceiling() const {
    double best = 0.0;
    for (const auto& c : candidates) best = std::max(best, c.f1_vs_gold);
    return best;
  }
};

inline std::optional<LossKind> parse_strategy(std::string_view s) {
  if (s == "pointwise") return LossKind::Point;
  if (s == "pairwise") return LossKind::Pair;
  if (s == "listwise") return LossKind::List;
  return std::nullopt;
}

/// Indices into a question's candidate list. Pair instances are
/// (positive, negative); List instances start with the positive.
struct TrainingInstance {
  LossKind kind = LossKind::List;
  std::vector<std::size_t> members;
  std::vector<int> labels;
  bool operator==(const TrainingInstance&) const = default;
};

namespace detail {

/// m negatives: without replacement when enough exist, else with.
inline std::vector<std::size_t> sample_negatives(const std::vector<std::size_t>& negatives, std::size_t m,
                                                 std::mt19937_64& rng) {
  std::vector<std::size_t> out;
  if (negatives.empty() || m == 0) return out;
  if (negatives.size() >= m) {
    // partial Fisher-Yates keeps the draw order
    std::vector<std::size_t> pool = negatives;
    for (std::size_t i = 0; i < m; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
      out.push_back(pool[i]);
    }
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, negatives.size() - 1);
    for (std::size_t i = 0; i < m; ++i) out.push_back(negatives[pick(rng)]);
  }
  return out;
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t x = seed ^ (a * 0x9E3779B97F4A7C15ULL) ^ (b * 0xC2B2AE3D27D4EB4FULL);
  x ^= x >> 33;
  x *= 0xFF51AFD7ED558CCDULL;
  x ^= x >> 33;
  return x;
}

}  // namespace detail

/// Point: every candidate, or (subsample) each positive plus m sampled
/// negatives per positive. Pair: each positive crossed with m sampled
/// negatives. List: each positive followed by m sampled negatives.
/// Pair/List need at least one positive and one negative.
inline std::vector<TrainingInstance> build_instances(std::span<const Candidate> candidates, LossKind strategy,
                                                     std::size_t m, std::uint64_t seed,
                                                     bool point_subsample = true) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < candidates.size(); ++i) (candidates[i].label ? pos : neg).push_back(i);
  std::mt19937_64 rng(seed);
  std::vector<TrainingInstance> out;
  if (strategy == LossKind::Point) {
    if (!point_subsample) {
      for (std::size_t i = 0; i < candidates.size(); ++i) out.push_back({LossKind::Point, {i}, {candidates[i].label}});
      return out;
    }
    for (std::size_t p : pos) out.push_back({LossKind::Point, {p}, {1}});
    for (std::size_t n : detail::sample_negatives(neg, std::min(neg.size(), m * pos.size()), rng)) {
      out.push_back({LossKind::Point, {n}, {0}});
    }
    return out;
  }
  if (pos.empty() || neg.empty()) return out;
  for (std::size_t p : pos) {
    auto sampled = detail::sample_negatives(neg, m, rng);
    if (strategy == LossKind::Pair) {
      for (std::size_t n : sampled) out.push_back({LossKind::Pair, {p, n}, {1, 0}});
    } else {
      TrainingInstance inst{LossKind::List, {p}, {1}};
      for (std::size_t n : sampled) {
        inst.members.push_back(n);
        inst.labels.push_back(0);
      }
      out.push_back(std::move(inst));
    }
  }
  return out;
}

// ---------------------------------------------------------------- selection

/// Index of the highest score; ties go to the smallest key.
inline std::size_t argmax_with_keys(std::span<const double> scores, std::span<const std::string> keys) {
  if (scores.empty()) throw std::invalid_argument("no parse: empty candidate set");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best] || (scores[i] == scores[best] && keys[i] < keys[best])) best = i;
  }
  return best;
}

using SequenceScorer = std::function<double(const Tokens&, const LinearSequence&)>;

/// Scores question/sequence pairs with an encoder.
template <typename Scalar = double>
struct EncoderScorer {
  const EncoderParams<Scalar>* params;
  std::size_t max_len = 128;

  double operator()(const Tokens& question, const LinearSequence& seq) const {
    return static_cast<double>(score_pair(make_sequence_pair(question, seq, max_len), *params));
  }
};

/// Index of g*: argmax score, ties broken by canonical serialization.
template <typename Scorer>
std::size_t select_best_index(const Tokens& question, std::span<const Candidate> candidates, const Scorer& scorer) {
  if (candidates.empty()) throw std::invalid_argument("no parse: empty candidate set");
  std::vector<double> scores;
  std::vector<std::string> keys;
  for (const auto& c : candidates) {
    scores.push_back(scorer(question, c.sequence));
    keys.push_back(serialize(c.graph));
  }
  return argmax_with_keys(scores, keys);
}

template <typename Scalar>
const QueryGraph& select_best(const Tokens& question, std::span<const Candidate> candidates,
                              const EncoderParams<Scalar>& params, std::size_t max_len = 128) {
  return candidates[select_best_index(question, candidates, EncoderScorer<Scalar>{&params, max_len})].graph;
}

// ---------------------------------------------------------------- training

struct TrainConfig {
  LossKind strategy = LossKind::List;
  std::size_t negatives = 10;
  double margin = kDefaultMargin;
  int epochs = 5;
  std::uint64_t seed = 0;
  double learning_rate = 5e-5;
  double dropout = 0.1;
  /// Groups per optimizer step. A pointwise group is one candidate; pair and
  /// list groups are never split.
  std::size_t batch_size = 1;
  bool point_subsample = true;
  std::size_t max_len = 128;

  void validate() const {
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (!(margin > 0.0 && margin < 1.0)) throw std::invalid_argument("margin must lie in (0, 1)");
    if (negatives < 1) throw std::invalid_argument("negatives must be >= 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must lie in [0, 1)");
    if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  }
};

struct EpochMetrics {
  int epoch = 0;
  LossKind strategy = LossKind::List;
  double train_loss = 0.0;
  double val_f1 = 0.0;
  double val_hit_rate = 0.0;  // fraction of questions whose top graph is positive

  /// `epoch<TAB>strategy<TAB>train_loss<TAB>val_f1`
  std::string log_line() const {
    std::ostringstream o;
    o << epoch << '\t' << loss_kind_name(strategy) << '\t' << std::setprecision(10) << train_loss << '\t'
      << val_f1;
    return o.str();
  }
};

struct ValidationScore {
  double avg_f1 = 0.0;
  double hit_rate = 0.0;
};

/// Average F1 of the selected candidate and how often it is a positive.
/// Questions without candidates count as 0.
template <typename Scorer>
ValidationScore evaluate_selection(std::span<const QuestionCandidates> questions, const Scorer& scorer) {
  ValidationScore out;
  if (questions.empty()) return out;
  for (const auto& q : questions) {
    if (q.candidates.empty()) continue;
    const auto& best = q.candidates[select_best_index(q.question, q.candidates, scorer)];
    out.avg_f1 += best.f1_vs_gold;
    out.hit_rate += best.label;
  }
  out.avg_f1 /= static_cast<double>(questions.size());
  out.hit_rate /= static_cast<double>(questions.size());
  return out;
}

template <typename Scalar>
struct TrainResult {
  EncoderParams<Scalar> params;  // best on validation (or last epoch without validation)
  std::vector<EpochMetrics> metrics;
  int best_epoch = 0;
};

/// Minibatch Adam on the strategy's loss. Instances are resampled each epoch
/// from seeds derived from config.seed, so runs are replayable.
template <typename Scalar>
TrainResult<Scalar> train(std::span<const QuestionCandidates> train_set, std::span<const QuestionCandidates> validation,
                          const TrainConfig& config, EncoderParams<Scalar> params) {
  config.validate();
  if (train_set.empty()) throw std::invalid_argument("training set is empty");

  // pairs are fixed per candidate; build them once
  std::vector<std::vector<SequencePair>> pairs(train_set.size());
  for (std::size_t q = 0; q < train_set.size(); ++q) {
    for (const auto& c : train_set[q].candidates) {
      pairs[q].push_back(make_sequence_pair(train_set[q].question, c.sequence, config.max_len));
    }
  }

  Adam<Scalar> adam(params, config.learning_rate);
  std::mt19937_64 dropout_rng(detail::mix_seed(config.seed, 0xD809));
  const DropoutConfig dropout{config.dropout, &dropout_rng};
  const EncoderScorer<Scalar> scorer{&params, config.max_len};

  TrainResult<Scalar> result{params, {}, 0};
  double best_val = -1.0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<TrainingGroup> groups;
    for (std::size_t q = 0; q < train_set.size(); ++q) {
      auto seed = detail::mix_seed(config.seed, static_cast<std::uint64_t>(epoch), q + 1);
      for (const auto& inst :
           build_instances(train_set[q].candidates, config.strategy, config.negatives, seed, config.point_subsample)) {
        TrainingGroup g;
        for (std::size_t idx : inst.members) g.pairs.push_back(pairs[q][idx]);
        g.labels = inst.labels;
        groups.push_back(std::move(g));
      }
    }
    std::mt19937_64 shuffle_rng(detail::mix_seed(config.seed, static_cast<std::uint64_t>(epoch), 0x5F));
    std::shuffle(groups.begin(), groups.end(), shuffle_rng);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < groups.size(); start += config.batch_size) {
      const std::size_t end = std::min(groups.size(), start + config.batch_size);
      std::span<const TrainingGroup> batch(groups.data() + start, end - start);
      BatchGradient<Scalar> bg;
      try {
        bg = gradients(batch, config.strategy, params, config.margin, dropout);
      } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", batch starting at group " +
                             std::to_string(start));
      }
      loss_sum += bg.loss * static_cast<double>(batch.size());
      adam.step(params, bg.grad);
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.strategy = config.strategy;
    m.train_loss = groups.empty() ? 0.0 : loss_sum / static_cast<double>(groups.size());
    if (!validation.empty()) {
      auto v = evaluate_selection(validation, scorer);
      m.val_f1 = v.avg_f1;
      m.val_hit_rate = v.hit_rate;
    }
    result.metrics.push_back(m);
    const bool better = validation.empty() ? true : m.val_f1 > best_val;
    if (better) {
      best_val = m.val_f1;
      result.params = params;
      result.best_epoch = epoch;
    }
  }
  return result;
}

}  // namespace kbqa
