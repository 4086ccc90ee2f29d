#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "pielab/common.hpp"
#include "pielab/corpus.hpp"

namespace pielab::nn {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

enum class Family { MeanEmbeddingMlp, BiLstm };

std::string_view to_string(Family f);
Family family_from_string(std::string_view s);

struct ModelSpec {
  Family family = Family::MeanEmbeddingMlp;
  int vocab_size = 2;
  int embedding_dim = 32;
  int hidden_dim = 32;
  int num_classes = 2;
  LabelKind kind = LabelKind::Single;

  void validate() const;
  bool operator==(const ModelSpec&) const = default;
};

enum class Role { Embedding, Recurrent, Dense, Classifier, Bias };

std::string_view to_string(Role r);
Role role_from_string(std::string_view s);

/// Embeddings, biases and the classifier are never pruned.
constexpr bool is_prunable(Role r) { return r == Role::Recurrent || r == Role::Dense; }

template <typename Scalar>
struct Layer {
  std::string name;
  Role role = Role::Dense;
  Matrix<Scalar> value;

  bool prunable() const { return is_prunable(role); }
};

template <typename Scalar>
struct ParamSet {
  ModelSpec spec;
  std::vector<Layer<Scalar>> layers;

  std::size_t index_of(std::string_view name) const {
    for (std::size_t i = 0; i < layers.size(); ++i)
      if (layers[i].name == name) return i;
    throw Error("no parameter array named " + std::string(name));
  }
  const Matrix<Scalar>& operator[](std::string_view name) const { return layers[index_of(name)].value; }
  Matrix<Scalar>& operator[](std::string_view name) { return layers[index_of(name)].value; }

  std::int64_t parameter_count() const {
    std::int64_t n = 0;
    for (const auto& l : layers) n += l.value.size();
    return n;
  }

  template <typename To>
  ParamSet<To> cast() const {
    ParamSet<To> out;
    out.spec = spec;
    for (const auto& l : layers) out.layers.push_back({l.name, l.role, l.value.template cast<To>()});
    return out;
  }
};

/// One gradient array per parameter array, same order and shapes.
template <typename Scalar>
using Gradients = std::vector<Matrix<Scalar>>;

template <typename Scalar>
Gradients<Scalar> zeros_like(const ParamSet<Scalar>& params) {
  Gradients<Scalar> g;
  g.reserve(params.layers.size());
  for (const auto& l : params.layers) g.push_back(Matrix<Scalar>::Zero(l.value.rows(), l.value.cols()));
  return g;
}

/// Layer names, roles and shapes for a spec, before any values are drawn.
std::vector<Layer<float>> layer_layout(const ModelSpec& spec);

/// Glorot-uniform dense/recurrent weights, N(0, 0.1) embeddings with the OOV row
/// set to the mean of the corpus rows and the PAD row drawn from the table's
/// empirical mean/std, zero biases. Values are drawn in double and rounded to
/// Scalar, so init_params<float> and init_params<double> agree up to rounding.
template <typename Scalar>
ParamSet<Scalar> init_params(const ModelSpec& spec, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Forward / loss / backward

template <typename Scalar>
struct BackwardResult {
  Scalar loss = 0;
  Gradients<Scalar> grads;
};

namespace detail {

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  if (x >= 0) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

template <typename Scalar>
Vector<Scalar> sigmoid(const Vector<Scalar>& x) {
  return x.unaryExpr([](Scalar v) { return sigmoid(v); });
}

template <typename Scalar>
void check_ids(const corpus::EncodedExample& ex, int vocab_size) {
  for (int t = 0; t < ex.true_length; ++t) {
    const auto id = ex.token_ids[static_cast<std::size_t>(t)];
    if (id < 0 || id >= vocab_size)
      throw Error("token id " + std::to_string(id) + " out of range for vocabulary of " + std::to_string(vocab_size));
  }
}

// Per-direction LSTM trace kept for backpropagation through time.
template <typename Scalar>
struct LstmTrace {
  std::vector<int> ids;                 // token id per step, in processing order
  std::vector<Vector<Scalar>> gates;    // activated [i f g o], 4H each
  std::vector<Vector<Scalar>> cells;    // c_t
  std::vector<Vector<Scalar>> hiddens;  // h_t
};

template <typename Scalar>
Vector<Scalar> lstm_run(const Matrix<Scalar>& emb, const Matrix<Scalar>& w_ih, const Matrix<Scalar>& w_hh,
                        const Matrix<Scalar>& bias, std::span<const int> ids, int hidden, LstmTrace<Scalar>* trace) {
  const auto H = static_cast<Eigen::Index>(hidden);
  Vector<Scalar> h = Vector<Scalar>::Zero(H);
  Vector<Scalar> c = Vector<Scalar>::Zero(H);
  for (int id : ids) {
    Vector<Scalar> z = w_ih * emb.row(id).transpose() + w_hh * h + bias.col(0);
    Vector<Scalar> a(4 * H);
    a.segment(0, H) = sigmoid<Scalar>(z.segment(0, H));
    a.segment(H, H) = sigmoid<Scalar>(z.segment(H, H));
    a.segment(2 * H, H) = z.segment(2 * H, H).array().tanh();
    a.segment(3 * H, H) = sigmoid<Scalar>(z.segment(3 * H, H));
    c = a.segment(H, H).cwiseProduct(c) + a.segment(0, H).cwiseProduct(a.segment(2 * H, H));
    h = a.segment(3 * H, H).cwiseProduct(c.array().tanh().matrix());
    if (trace) {
      trace->ids.push_back(id);
      trace->gates.push_back(a);
      trace->cells.push_back(c);
      trace->hiddens.push_back(h);
    }
  }
  return h;
}

// Accumulates gradients of one LSTM direction given dL/dh_final.
template <typename Scalar>
void lstm_backward(const Matrix<Scalar>& emb, const Matrix<Scalar>& w_ih, const Matrix<Scalar>& w_hh,
                   const LstmTrace<Scalar>& trace, const Vector<Scalar>& d_h_final, int hidden, Matrix<Scalar>& g_emb,
                   Matrix<Scalar>& g_ih, Matrix<Scalar>& g_hh, Matrix<Scalar>& g_bias) {
  const auto H = static_cast<Eigen::Index>(hidden);
  Vector<Scalar> dh = d_h_final;
  Vector<Scalar> dc = Vector<Scalar>::Zero(H);
  for (std::size_t step = trace.ids.size(); step-- > 0;) {
    const auto& a = trace.gates[step];
    const auto& c = trace.cells[step];
    const Vector<Scalar> c_prev = step > 0 ? trace.cells[step - 1] : Vector<Scalar>::Zero(H);
    const Vector<Scalar> h_prev = step > 0 ? trace.hiddens[step - 1] : Vector<Scalar>::Zero(H);
    const auto i = a.segment(0, H).array();
    const auto f = a.segment(H, H).array();
    const auto g = a.segment(2 * H, H).array();
    const auto o = a.segment(3 * H, H).array();
    const Eigen::Array<Scalar, Eigen::Dynamic, 1> tc = c.array().tanh();

    dc.array() += dh.array() * o * (Scalar(1) - tc.square());
    Vector<Scalar> dz(4 * H);
    dz.segment(0, H) = (dc.array() * g * i * (Scalar(1) - i)).matrix();
    dz.segment(H, H) = (dc.array() * c_prev.array() * f * (Scalar(1) - f)).matrix();
    dz.segment(2 * H, H) = (dc.array() * i * (Scalar(1) - g.square())).matrix();
    dz.segment(3 * H, H) = (dh.array() * tc * o * (Scalar(1) - o)).matrix();

    const int id = trace.ids[step];
    g_ih.noalias() += dz * emb.row(id);
    g_hh.noalias() += dz * h_prev.transpose();
    g_bias.col(0) += dz;
    g_emb.row(id).noalias() += (w_ih.transpose() * dz).transpose();

    dh = w_hh.transpose() * dz;
    dc = (dc.array() * f).matrix();
  }
}

template <typename Scalar>
std::vector<int> active_ids(const corpus::EncodedExample& ex) {
  return std::vector<int>(ex.token_ids.begin(), ex.token_ids.begin() + ex.true_length);
}

// Logits for one example; when `grads` is non-null, also backpropagates
// `d_logits_fn(logits)` into `grads`.
template <typename Scalar, typename DLogits>
Vector<Scalar> run_example(const ParamSet<Scalar>& p, const corpus::EncodedExample& ex, Gradients<Scalar>* grads,
                           DLogits&& d_logits_fn) {
  const ModelSpec& spec = p.spec;
  check_ids<Scalar>(ex, spec.vocab_size);
  const auto& emb = p.layers[0].value;
  const std::vector<int> ids = active_ids<Scalar>(ex);

  if (spec.family == Family::MeanEmbeddingMlp) {
    const auto& w1 = p.layers[1].value;
    const auto& b1 = p.layers[2].value;
    const auto& wc = p.layers[3].value;
    const auto& bc = p.layers[4].value;
    Vector<Scalar> x = Vector<Scalar>::Zero(spec.embedding_dim);
    for (int id : ids) x += emb.row(id).transpose();
    if (!ids.empty()) x /= static_cast<Scalar>(ids.size());
    const Vector<Scalar> pre = w1 * x + b1.col(0);
    const Vector<Scalar> h = pre.cwiseMax(Scalar(0));
    Vector<Scalar> logits = wc * h + bc.col(0);
    if (grads) {
      const Vector<Scalar> dl = d_logits_fn(logits);
      auto& g = *grads;
      g[3].noalias() += dl * h.transpose();
      g[4].col(0) += dl;
      const Vector<Scalar> dh = wc.transpose() * dl;
      const Vector<Scalar> dpre = dh.cwiseProduct(
          pre.unaryExpr([](Scalar v) { return v > Scalar(0) ? Scalar(1) : Scalar(0); }));
      g[1].noalias() += dpre * x.transpose();
      g[2].col(0) += dpre;
      if (!ids.empty()) {
        const Vector<Scalar> dx = (w1.transpose() * dpre) / static_cast<Scalar>(ids.size());
        for (int id : ids) g[0].row(id) += dx.transpose();
      }
    }
    return logits;
  }

  // BiLSTM: layers 1..3 forward direction, 4..6 backward direction, 7..8 classifier.
  const int H = spec.hidden_dim;
  const std::vector<int> rev(ids.rbegin(), ids.rend());
  LstmTrace<Scalar> tf;
  LstmTrace<Scalar> tb;
  const Vector<Scalar> hf = lstm_run<Scalar>(emb, p.layers[1].value, p.layers[2].value, p.layers[3].value, ids, H,
                                             grads ? &tf : nullptr);
  const Vector<Scalar> hb = lstm_run<Scalar>(emb, p.layers[4].value, p.layers[5].value, p.layers[6].value, rev, H,
                                             grads ? &tb : nullptr);
  Vector<Scalar> feat(2 * H);
  feat << hf, hb;
  const auto& wc = p.layers[7].value;
  Vector<Scalar> logits = wc * feat + p.layers[8].value.col(0);
  if (grads) {
    auto& g = *grads;
    const Vector<Scalar> dl = d_logits_fn(logits);
    g[7].noalias() += dl * feat.transpose();
    g[8].col(0) += dl;
    const Vector<Scalar> dfeat = wc.transpose() * dl;
    lstm_backward<Scalar>(emb, p.layers[1].value, p.layers[2].value, tf, dfeat.head(H), H, g[0], g[1], g[2], g[3]);
    lstm_backward<Scalar>(emb, p.layers[4].value, p.layers[5].value, tb, dfeat.tail(H), H, g[0], g[4], g[5], g[6]);
  }
  return logits;
}

template <typename Scalar>
Vector<Scalar> target_vector(const corpus::EncodedExample& ex, int num_classes) {
  if (static_cast<int>(ex.label_vector.size()) != num_classes)
    throw Error("label vector has " + std::to_string(ex.label_vector.size()) + " entries, model has " +
                std::to_string(num_classes) + " classes");
  Vector<Scalar> y(num_classes);
  for (int c = 0; c < num_classes; ++c) y[c] = static_cast<Scalar>(ex.label_vector[static_cast<std::size_t>(c)]);
  return y;
}

// Loss of one example and its gradient with respect to the logits.
template <typename Scalar>
Scalar example_loss(const Vector<Scalar>& logits, const Vector<Scalar>& y, LabelKind kind, Vector<Scalar>* d_logits) {
  if (kind == LabelKind::Single) {
    const Scalar m = logits.maxCoeff();
    const Vector<Scalar> e = (logits.array() - m).exp().matrix();
    const Scalar s = e.sum();
    const Scalar lse = m + std::log(s);
    if (d_logits) *d_logits = (e / s) * y.sum() - y;
    return lse * y.sum() - y.dot(logits);
  }
  const auto C = static_cast<Scalar>(logits.size());
  Scalar total = 0;
  if (d_logits) d_logits->resize(logits.size());
  for (Eigen::Index c = 0; c < logits.size(); ++c) {
    const Scalar z = logits[c];
    total += std::max(z, Scalar(0)) - z * y[c] + std::log1p(std::exp(-std::abs(z)));
    if (d_logits) (*d_logits)[c] = (sigmoid(z) - y[c]) / C;
  }
  return total / C;
}

}  // namespace detail

/// Logits, one row per example.
template <typename Scalar>
Matrix<Scalar> forward(const ParamSet<Scalar>& params, std::span<const corpus::EncodedExample> batch) {
  Matrix<Scalar> out(static_cast<Eigen::Index>(batch.size()), params.spec.num_classes);
  const auto none = [](const Vector<Scalar>&) { return Vector<Scalar>(); };
  for (std::size_t b = 0; b < batch.size(); ++b)
    out.row(static_cast<Eigen::Index>(b)) = detail::run_example<Scalar>(params, batch[b], nullptr, none).transpose();
  return out;
}

/// Mean over the batch of softmax cross-entropy (single-label) or of the
/// per-class mean sigmoid binary cross-entropy (multi-label).
template <typename Scalar>
Scalar loss(const Matrix<Scalar>& logits, std::span<const corpus::EncodedExample> batch, LabelKind kind) {
  if (static_cast<std::size_t>(logits.rows()) != batch.size()) throw Error("loss: logits/batch size mismatch");
  if (batch.empty()) return Scalar(0);
  Scalar total = 0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Vector<Scalar> z = logits.row(static_cast<Eigen::Index>(b)).transpose();
    total += detail::example_loss<Scalar>(z, detail::target_vector<Scalar>(batch[b], static_cast<int>(z.size())), kind,
                                          nullptr);
  }
  return total / static_cast<Scalar>(batch.size());
}

/// Mean loss over the batch and its gradient for every parameter array.
/// Masked weights get their true gradient here; the optimizer enforces masks.
template <typename Scalar>
BackwardResult<Scalar> backward(const ParamSet<Scalar>& params, std::span<const corpus::EncodedExample> batch) {
  BackwardResult<Scalar> out{Scalar(0), zeros_like(params)};
  if (batch.empty()) return out;
  const auto inv_b = Scalar(1) / static_cast<Scalar>(batch.size());
  for (const auto& ex : batch) {
    const Vector<Scalar> y = detail::target_vector<Scalar>(ex, params.spec.num_classes);
    Scalar ex_loss = 0;
    detail::run_example<Scalar>(params, ex, &out.grads, [&](const Vector<Scalar>& logits) {
      Vector<Scalar> d;
      ex_loss = detail::example_loss<Scalar>(logits, y, params.spec.kind, &d);
      return Vector<Scalar>(d * inv_b);
    });
    out.loss += ex_loss;
  }
  out.loss *= inv_b;
  return out;
}

/// Softmax rows (single-label) or element-wise sigmoid (multi-label).
template <typename Scalar>
Matrix<Scalar> probabilities(const Matrix<Scalar>& logits, LabelKind kind) {
  Matrix<Scalar> p(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    if (kind == LabelKind::Single) {
      const Scalar m = logits.row(r).maxCoeff();
      const auto e = (logits.row(r).array() - m).exp();
      p.row(r) = (e / e.sum()).matrix();
    } else {
      for (Eigen::Index c = 0; c < logits.cols(); ++c) p(r, c) = detail::sigmoid(logits(r, c));
    }
  }
  return p;
}

template <typename Scalar>
Matrix<Scalar> predict(const ParamSet<Scalar>& params, std::span<const corpus::EncodedExample> examples) {
  return probabilities<Scalar>(forward(params, examples), params.spec.kind);
}

}  // namespace pielab::nn
