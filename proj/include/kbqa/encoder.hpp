#pragma once

// Sequence-pair encoder and linear scorer.
//
// Input:  [CLS] question [SEP] graph-sequence [SEP], segment ids 0 / 1.
// Embed:  X = E[token] + P[position] + S[segment]
// Layer:  A = softmax(X Wq (X Wk)^T / sqrt(d))
//         Y = X + A (X Wv) Wo + bo
//         X' = Y + tanh(Y Wf + bf)
// Output: f = X'[0] after the last layer, score s = w . f + b.
//
// Gradients are hand-derived; tests check them against finite differences.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kbqa/linearizer.hpp"
#include "kbqa/losses.hpp"
#include "kbqa/text.hpp"

namespace kbqa {

inline constexpr const char* kUnkToken = "[UNK]";
inline constexpr const char* kClsToken = "[CLS]";
inline constexpr const char* kSepToken = "[SEP]";

/// Token -> index. Special tokens come first in a fixed order, then the
/// corpus tokens in sorted order, so indices never depend on insertion order.
class Vocabulary {
 public:
  Vocabulary() { rebuild({}); }

  explicit Vocabulary(const std::set<std::string>& corpus) { rebuild(corpus); }

  static const std::vector<std::string>& specials() {
    static const std::vector<std::string> kSpecials = {
        kUnkToken, kClsToken, kSepToken, "[unused0]", "[unused1]", "[unused2]", "[unused3]", "[A]"};
    return kSpecials;
  }

  /// Exact token list, one per index (for checkpoint sidecars).
  static Vocabulary from_list(const std::vector<std::string>& tokens) {
    Vocabulary v;
    v.tokens_ = tokens;
    v.index_.clear();
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (!v.index_.emplace(tokens[i], static_cast<int>(i)).second) {
        throw DataError("duplicate vocabulary token: " + tokens[i]);
      }
    }
    for (const auto& s : specials()) {
      if (!v.index_.contains(s)) throw DataError("vocabulary lacks special token " + s);
    }
    return v;
  }

  int index(const std::string& tok) const {
    auto it = index_.find(tok);
    return it == index_.end() ? unk() : it->second;
  }
  int unk() const { return index_.at(kUnkToken); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  bool contains(const std::string& tok) const { return index_.contains(tok); }
  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

 private:
  void rebuild(const std::set<std::string>& corpus) {
    tokens_ = specials();
    std::set<std::string> special_set(tokens_.begin(), tokens_.end());
    for (const auto& t : corpus) {
      if (!special_set.contains(t)) tokens_.push_back(t);
    }
    index_.clear();
    for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], static_cast<int>(i));
  }

  std::vector<std::string> tokens_;
  std::map<std::string, int> index_;
};

struct SequencePair {
  Tokens tokens;
  std::vector<int> segments;
};

/// Lays out [CLS] q [SEP] g [SEP]. Over-long inputs lose graph tokens first;
/// the question is only cut when it alone would leave no room for one graph
/// token.
inline SequencePair make_sequence_pair(const Tokens& question, const Tokens& graph, std::size_t max_len = 128) {
  if (question.empty()) throw std::invalid_argument("make_sequence_pair: empty question");
  if (graph.empty()) throw std::invalid_argument("make_sequence_pair: empty graph sequence");
  if (max_len < 5) throw std::invalid_argument("make_sequence_pair: max_len must be >= 5");
  std::size_t q = std::min(question.size(), max_len - 4);
  std::size_t g = std::min(graph.size(), max_len - 3 - q);
  SequencePair p;
  p.tokens.reserve(q + g + 3);
  p.tokens.emplace_back(kClsToken);
  p.tokens.insert(p.tokens.end(), question.begin(), question.begin() + static_cast<std::ptrdiff_t>(q));
  p.tokens.emplace_back(kSepToken);
  p.segments.assign(q + 2, 0);
  p.tokens.insert(p.tokens.end(), graph.begin(), graph.begin() + static_cast<std::ptrdiff_t>(g));
  p.tokens.emplace_back(kSepToken);
  p.segments.resize(p.tokens.size(), 1);
  return p;
}

inline SequencePair make_sequence_pair(const Tokens& question, const LinearSequence& seq, std::size_t max_len = 128) {
  return make_sequence_pair(question, seq.tokens, max_len);
}

struct EncoderShape {
  int dim = 64;
  int depth = 2;
  int max_len = 128;
  bool use_positions = true;
  bool operator==(const EncoderShape&) const = default;
};

template <typename Scalar = double>
struct EncoderParams {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  struct Layer {
    Matrix wq, wk, wv, wo, bo, wf, bf;  // biases are 1 x d
  };

  Vocabulary vocab;
  EncoderShape shape;
  Matrix token_emb;     // |V| x d
  Matrix position_emb;  // max_len x d
  Matrix segment_emb;   // 2 x d
  std::vector<Layer> layers;
  Matrix score_w;  // d x 1
  Matrix score_b;  // 1 x 1

  EncoderParams() = default;

  /// Zero parameters of the given shape.
  EncoderParams(Vocabulary v, EncoderShape s) : vocab(std::move(v)), shape(s) {
    const int d = s.dim;
    token_emb = Matrix::Zero(static_cast<Eigen::Index>(vocab.size()), d);
    position_emb = Matrix::Zero(s.max_len, d);
    segment_emb = Matrix::Zero(2, d);
    layers.resize(static_cast<std::size_t>(s.depth));
    for (auto& l : layers) {
      for (Matrix* m : {&l.wq, &l.wk, &l.wv, &l.wo, &l.wf}) *m = Matrix::Zero(d, d);
      l.bo = Matrix::Zero(1, d);
      l.bf = Matrix::Zero(1, d);
    }
    score_w = Matrix::Zero(d, 1);
    score_b = Matrix::Zero(1, 1);
  }

  /// Every parameter block in a fixed order (checkpoint layout, optimizer).
  std::vector<Matrix*> blocks() {
    std::vector<Matrix*> out{&token_emb, &position_emb, &segment_emb};
    for (auto& l : layers) {
      for (Matrix* m : {&l.wq, &l.wk, &l.wv, &l.wo, &l.bo, &l.wf, &l.bf}) out.push_back(m);
    }
    out.push_back(&score_w);
    out.push_back(&score_b);
    return out;
  }
  std::vector<const Matrix*> blocks() const {
    auto tmp = const_cast<EncoderParams*>(this)->blocks();
    return {tmp.begin(), tmp.end()};
  }

  EncoderParams zeros_like() const { return EncoderParams(vocab, shape); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto* b : blocks()) n += static_cast<std::size_t>(b->size());
    return n;
  }

  bool all_finite() const {
    for (const auto* b : blocks()) {
      if (!b->allFinite()) return false;
    }
    return true;
  }
};

/// Uniform(-range, range) weights and embeddings; zero biases.
template <typename Scalar = double>
EncoderParams<Scalar> init_params(Vocabulary vocab, EncoderShape shape, std::uint64_t seed, double range = 0.05) {
  EncoderParams<Scalar> p(std::move(vocab), shape);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-range, range);
  auto fill = [&](auto& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = static_cast<Scalar>(dist(rng));
    }
  };
  fill(p.token_emb);
  fill(p.position_emb);
  fill(p.segment_emb);
  for (auto& l : p.layers) {
    for (auto* m : {&l.wq, &l.wk, &l.wv, &l.wo, &l.wf}) fill(*m);
  }
  fill(p.score_w);
  return p;
}

// ---------------------------------------------------------------- forward

template <typename Scalar>
struct LayerCache {
  using Matrix = typename EncoderParams<Scalar>::Matrix;
  Matrix x, q, k, v, a, c, u_mask, y, g;
};

template <typename Scalar>
struct ForwardCache {
  using Matrix = typename EncoderParams<Scalar>::Matrix;
  std::vector<int> ids;
  std::vector<int> segments;
  Matrix x0_mask;  // empty when dropout is off
  std::vector<LayerCache<Scalar>> layers;
  Matrix out;  // final hidden states
};

struct DropoutConfig {
  double rate = 0.0;
  std::mt19937_64* rng = nullptr;
  bool active() const { return rate > 0.0 && rng != nullptr; }
};

namespace detail {

template <typename Matrix>
Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, const DropoutConfig& dropout) {
  Matrix m(rows, cols);
  std::bernoulli_distribution keep(1.0 - dropout.rate);
  const auto scale = static_cast<typename Matrix::Scalar>(1.0 / (1.0 - dropout.rate));
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = keep(*dropout.rng) ? scale : 0;
  }
  return m;
}

template <typename Matrix>
void softmax_rows(Matrix& s) {
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    auto row = s.row(i);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
}

}  // namespace detail

template <typename Scalar>
ForwardCache<Scalar> forward(const SequencePair& pair, const EncoderParams<Scalar>& p, const DropoutConfig& dropout = {}) {
  using Matrix = typename EncoderParams<Scalar>::Matrix;
  const auto n = static_cast<Eigen::Index>(pair.tokens.size());
  const int d = p.shape.dim;
  if (n > p.shape.max_len) throw std::invalid_argument("sequence longer than encoder max_len");
  ForwardCache<Scalar> cache;
  cache.ids.reserve(pair.tokens.size());
  for (const auto& t : pair.tokens) cache.ids.push_back(p.vocab.index(t));
  cache.segments = pair.segments;

  Matrix x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    x.row(i) = p.token_emb.row(cache.ids[static_cast<std::size_t>(i)]) +
               p.segment_emb.row(cache.segments[static_cast<std::size_t>(i)] ? 1 : 0);
    if (p.shape.use_positions) x.row(i) += p.position_emb.row(i);
  }
  if (dropout.active()) {
    cache.x0_mask = detail::dropout_mask<Matrix>(n, d, dropout);
    x = x.cwiseProduct(cache.x0_mask);
  }
  const Scalar inv_sqrt_d = static_cast<Scalar>(1.0 / std::sqrt(static_cast<double>(d)));
  for (const auto& layer : p.layers) {
    LayerCache<Scalar> lc;
    lc.x = x;
    lc.q = x * layer.wq;
    lc.k = x * layer.wk;
    lc.v = x * layer.wv;
    lc.a = (lc.q * lc.k.transpose()) * inv_sqrt_d;
    detail::softmax_rows(lc.a);
    lc.c = lc.a * lc.v;
    Matrix u = lc.c * layer.wo;
    u.rowwise() += layer.bo.row(0);
    if (dropout.active()) {
      lc.u_mask = detail::dropout_mask<Matrix>(n, d, dropout);
      u = u.cwiseProduct(lc.u_mask);
    }
    lc.y = x + u;
    Matrix z = lc.y * layer.wf;
    z.rowwise() += layer.bf.row(0);
    lc.g = z.array().tanh().matrix();
    x = lc.y + lc.g;
    cache.layers.push_back(std::move(lc));
  }
  cache.out = std::move(x);
  return cache;
}

/// Representation f: the final state at the [CLS] position.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> encode(const SequencePair& pair, const EncoderParams<Scalar>& p) {
  return forward(pair, p).out.row(0).transpose();
}

template <typename Scalar>
Scalar score(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& f, const EncoderParams<Scalar>& p) {
  return f.dot(p.score_w.col(0)) + p.score_b(0, 0);
}

template <typename Scalar>
Scalar score_pair(const SequencePair& pair, const EncoderParams<Scalar>& p) {
  return score<Scalar>(encode(pair, p), p);
}

// ---------------------------------------------------------------- backward

/// Accumulates d(score)/d(params) * dscore into `grad`.
template <typename Scalar>
void backward(const ForwardCache<Scalar>& cache, const EncoderParams<Scalar>& p, Scalar dscore,
              EncoderParams<Scalar>& grad) {
  using Matrix = typename EncoderParams<Scalar>::Matrix;
  const Eigen::Index n = cache.out.rows();
  const int d = p.shape.dim;
  grad.score_b(0, 0) += dscore;
  grad.score_w.col(0) += dscore * cache.out.row(0).transpose();

  Matrix dx = Matrix::Zero(n, d);
  dx.row(0) = dscore * p.score_w.col(0).transpose();
  const Scalar inv_sqrt_d = static_cast<Scalar>(1.0 / std::sqrt(static_cast<double>(d)));

  for (std::size_t li = p.layers.size(); li-- > 0;) {
    const auto& layer = p.layers[li];
    const auto& lc = cache.layers[li];
    auto& gl = grad.layers[li];
    // X' = Y + tanh(Y Wf + bf)
    Matrix dz = dx.cwiseProduct((Matrix::Ones(n, d) - lc.g.cwiseProduct(lc.g)));
    gl.wf += lc.y.transpose() * dz;
    gl.bf += dz.colwise().sum();
    Matrix dy = dx + dz * layer.wf.transpose();
    // Y = X + (C Wo + bo) * mask
    Matrix du = lc.u_mask.size() ? Matrix(dy.cwiseProduct(lc.u_mask)) : dy;
    gl.wo += lc.c.transpose() * du;
    gl.bo += du.colwise().sum();
    Matrix dc = du * layer.wo.transpose();
    // C = A V
    Matrix da = dc * lc.v.transpose();
    Matrix dv = lc.a.transpose() * dc;
    // A = softmax(S), row-wise
    Matrix ds = lc.a.cwiseProduct(da);
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> row_dot = ds.rowwise().sum();
    ds -= lc.a.cwiseProduct(row_dot.replicate(1, n));
    ds *= inv_sqrt_d;
    // S = Q K^T
    Matrix dq = ds * lc.k;
    Matrix dk = ds.transpose() * lc.q;
    gl.wq += lc.x.transpose() * dq;
    gl.wk += lc.x.transpose() * dk;
    gl.wv += lc.x.transpose() * dv;
    dx = dy + dq * layer.wq.transpose() + dk * layer.wk.transpose() + dv * layer.wv.transpose();
  }
  if (cache.x0_mask.size()) dx = dx.cwiseProduct(cache.x0_mask);
  for (Eigen::Index i = 0; i < n; ++i) {
    grad.token_emb.row(cache.ids[static_cast<std::size_t>(i)]) += dx.row(i);
    grad.segment_emb.row(cache.segments[static_cast<std::size_t>(i)] ? 1 : 0) += dx.row(i);
    if (p.shape.use_positions) grad.position_emb.row(i) += dx.row(i);
  }
}

/// One training group: scored pairs plus binary labels (see group_loss_grad).
struct TrainingGroup {
  std::vector<SequencePair> pairs;
  std::vector<int> labels;
};

template <typename Scalar>
struct BatchGradient {
  double loss = 0.0;  // mean group loss
  EncoderParams<Scalar> grad;
};

/// Mean loss over the groups and its exact gradient w.r.t. every parameter.
template <typename Scalar>
BatchGradient<Scalar> gradients(std::span<const TrainingGroup> batch, LossKind kind, const EncoderParams<Scalar>& p,
                                double margin = kDefaultMargin, const DropoutConfig& dropout = {}) {
  if (batch.empty()) throw std::invalid_argument("gradients: empty batch");
  BatchGradient<Scalar> out{0.0, p.zeros_like()};
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (const auto& group : batch) {
    std::vector<ForwardCache<Scalar>> caches;
    std::vector<double> scores;
    for (const auto& pair : group.pairs) {
      caches.push_back(forward(pair, p, dropout));
      scores.push_back(static_cast<double>(score<Scalar>(caches.back().out.row(0).transpose(), p)));
    }
    LossGrad lg = group_loss_grad(kind, scores, group.labels, margin);
    out.loss += lg.loss * inv;
    for (std::size_t i = 0; i < caches.size(); ++i) {
      if (lg.dscores[i] == 0.0) continue;
      backward(caches[i], p, static_cast<Scalar>(lg.dscores[i] * inv), out.grad);
    }
  }
  detail::check_finite(out.loss, "batch loss");
  if (!out.grad.all_finite()) throw NumericalError("non-finite gradient");
  return out;
}

/// Forward-only batch loss, matching gradients().loss.
template <typename Scalar>
double batch_loss(std::span<const TrainingGroup> batch, LossKind kind, const EncoderParams<Scalar>& p,
                  double margin = kDefaultMargin) {
  double total = 0.0;
  for (const auto& group : batch) {
    std::vector<double> scores;
    for (const auto& pair : group.pairs) scores.push_back(static_cast<double>(score_pair(pair, p)));
    total += group_loss_grad(kind, scores, group.labels, margin).loss;
  }
  return total / static_cast<double>(batch.size());
}

// ---------------------------------------------------------------- optimizer

template <typename Scalar>
class Adam {
 public:
  Adam(const EncoderParams<Scalar>& like, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(like.zeros_like()), v_(like.zeros_like()) {}

  void step(EncoderParams<Scalar>& params, const EncoderParams<Scalar>& grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    auto pb = params.blocks();
    auto gb = grad.blocks();
    auto mb = m_.blocks();
    auto vb = v_.blocks();
    const auto b1 = static_cast<Scalar>(beta1_), b2 = static_cast<Scalar>(beta2_);
    const auto step_size = static_cast<Scalar>(lr_ / c1);
    const auto inv_c2 = static_cast<Scalar>(1.0 / c2);
    const auto eps = static_cast<Scalar>(eps_);
    for (std::size_t i = 0; i < pb.size(); ++i) {
      auto& m = *mb[i];
      auto& v = *vb[i];
      const auto& g = *gb[i];
      m = b1 * m + (1 - b1) * g;
      v = b2 * v + (1 - b2) * g.cwiseProduct(g);
      *pb[i] -= (step_size * m.array() / ((v.array() * inv_c2).sqrt() + eps)).matrix();
    }
  }

  std::int64_t steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  EncoderParams<Scalar> m_, v_;
};

// ---------------------------------------------------------------- checkpoint

inline constexpr char kCheckpointMagic[8] = {'K', 'B', 'Q', 'A', 'E', 'N', 'C', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary checkpoint: magic, then u32 version, dim, depth, vocab size,
/// max_len, use_positions; then every block row-major as float64. The
/// vocabulary goes to `<path>.vocab`, one token per line.
template <typename Scalar>
void save_checkpoint(const EncoderParams<Scalar>& p, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  auto put = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); };
  put(kCheckpointVersion);
  put(static_cast<std::uint32_t>(p.shape.dim));
  put(static_cast<std::uint32_t>(p.shape.depth));
  put(static_cast<std::uint32_t>(p.vocab.size()));
  put(static_cast<std::uint32_t>(p.shape.max_len));
  put(p.shape.use_positions ? 1u : 0u);
  for (const auto* b : p.blocks()) {
    for (Eigen::Index i = 0; i < b->rows(); ++i) {
      for (Eigen::Index j = 0; j < b->cols(); ++j) {
        double v = static_cast<double>((*b)(i, j));
        out.write(reinterpret_cast<const char*>(&v), sizeof v);
      }
    }
  }
  std::ofstream voc(path + ".vocab");
  if (!voc) throw DataError("cannot write vocabulary: " + path + ".vocab");
  for (const auto& t : p.vocab.tokens()) voc << t << '\n';
  if (!out || !voc) throw DataError("short write on checkpoint " + path);
}

template <typename Scalar = double>
EncoderParams<Scalar> load_checkpoint(const std::string& path) {
  std::ifstream voc(path + ".vocab");
  if (!voc) throw DataError("cannot open vocabulary: " + path + ".vocab");
  std::vector<std::string> tokens;
  for (std::string line; std::getline(voc, line);) tokens.push_back(line);

  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) throw DataError("not a checkpoint: " + path);
  auto get = [&]() {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw DataError("truncated checkpoint header: " + path);
    return v;
  };
  if (get() != kCheckpointVersion) throw DataError("unsupported checkpoint version: " + path);
  EncoderShape shape;
  shape.dim = static_cast<int>(get());
  shape.depth = static_cast<int>(get());
  const std::uint32_t vocab_size = get();
  shape.max_len = static_cast<int>(get());
  shape.use_positions = get() != 0;
  if (vocab_size != tokens.size()) throw DataError("vocabulary sidecar size does not match checkpoint: " + path);
  EncoderParams<Scalar> p(Vocabulary::from_list(tokens), shape);
  for (auto* b : p.blocks()) {
    for (Eigen::Index i = 0; i < b->rows(); ++i) {
      for (Eigen::Index j = 0; j < b->cols(); ++j) {
        double v = 0;
        in.read(reinterpret_cast<char*>(&v), sizeof v);
        if (!in) throw DataError("truncated checkpoint body: " + path);
        (*b)(i, j) = static_cast<Scalar>(v);
      }
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw DataError("trailing bytes in checkpoint: " + path);
  if (!p.all_finite()) throw DataError("non-finite weights in checkpoint: " + path);
  return p;
}

}  // namespace kbqa
