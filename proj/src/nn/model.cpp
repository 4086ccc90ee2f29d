#include "pielab/nn/model.hpp"

#include <cmath>

namespace pielab::nn {

std::string_view to_string(Family f) { return f == Family::MeanEmbeddingMlp ? "mlp" : "bilstm"; }

Family family_from_string(std::string_view s) {
  if (s == "mlp" || s == "mean-embedding-mlp") return Family::MeanEmbeddingMlp;
  if (s == "bilstm") return Family::BiLstm;
  throw ConfigError("unknown model family \"" + std::string(s) + "\" (expected mlp|bilstm)");
}

std::string_view to_string(Role r) {
  switch (r) {
    case Role::Embedding: return "embedding";
    case Role::Recurrent: return "recurrent";
    case Role::Dense: return "dense";
    case Role::Classifier: return "classifier";
    case Role::Bias: return "bias";
  }
  return "?";
}

Role role_from_string(std::string_view s) {
  for (Role r : {Role::Embedding, Role::Recurrent, Role::Dense, Role::Classifier, Role::Bias})
    if (to_string(r) == s) return r;
  throw FormatError("unknown layer role \"" + std::string(s) + "\"");
}

void ModelSpec::validate() const {
  if (vocab_size < 2) throw ConfigError("vocab_size must be >= 2 (PAD and OOV are reserved)");
  if (embedding_dim < 1 || hidden_dim < 1) throw ConfigError("model dimensions must be >= 1");
  if (num_classes < 1) throw ConfigError("num_classes must be >= 1");
}

std::vector<Layer<float>> layer_layout(const ModelSpec& spec) {
  spec.validate();
  using M = Matrix<float>;
  const auto V = spec.vocab_size;
  const auto D = spec.embedding_dim;
  const auto H = spec.hidden_dim;
  const auto C = spec.num_classes;
  std::vector<Layer<float>> layers;
  layers.push_back({"embedding", Role::Embedding, M::Zero(V, D)});
  if (spec.family == Family::MeanEmbeddingMlp) {
    layers.push_back({"hidden.weight", Role::Dense, M::Zero(H, D)});
    layers.push_back({"hidden.bias", Role::Bias, M::Zero(H, 1)});
    layers.push_back({"classifier.weight", Role::Classifier, M::Zero(C, H)});
    layers.push_back({"classifier.bias", Role::Bias, M::Zero(C, 1)});
  } else {
    for (const char* dir : {"lstm_fwd", "lstm_bwd"}) {
      const std::string d(dir);
      layers.push_back({d + ".weight_ih", Role::Recurrent, M::Zero(4 * H, D)});
      layers.push_back({d + ".weight_hh", Role::Recurrent, M::Zero(4 * H, H)});
      layers.push_back({d + ".bias", Role::Bias, M::Zero(4 * H, 1)});
    }
    layers.push_back({"classifier.weight", Role::Classifier, M::Zero(C, 2 * H)});
    layers.push_back({"classifier.bias", Role::Bias, M::Zero(C, 1)});
  }
  return layers;
}

template <typename Scalar>
ParamSet<Scalar> init_params(const ModelSpec& spec, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x494e4954));
  ParamSet<Scalar> out;
  out.spec = spec;
  for (auto& proto : layer_layout(spec)) {
    const auto rows = proto.value.rows();
    const auto cols = proto.value.cols();
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> v =
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Zero(rows, cols);
    switch (proto.role) {
      case Role::Embedding: {
        for (Eigen::Index r = 0; r < rows; ++r)
          for (Eigen::Index c = 0; c < cols; ++c) v(r, c) = 0.1 * rng.normal();
        if (rows > 2) {
          const auto corpus_rows = v.bottomRows(rows - 2);
          v.row(corpus::kOovId) = corpus_rows.colwise().mean();
          const double mean = corpus_rows.mean();
          const double var = (corpus_rows.array() - mean).square().sum() / static_cast<double>(corpus_rows.size());
          const double sd = std::sqrt(var);
          for (Eigen::Index c = 0; c < cols; ++c) v(corpus::kPadId, c) = mean + sd * rng.normal();
        }
        break;
      }
      case Role::Recurrent:
      case Role::Dense:
      case Role::Classifier: {
        // rows = fan_out, cols = fan_in
        const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
        for (Eigen::Index r = 0; r < rows; ++r)
          for (Eigen::Index c = 0; c < cols; ++c) v(r, c) = (2.0 * rng.uniform() - 1.0) * limit;
        break;
      }
      case Role::Bias:
        break;
    }
    out.layers.push_back({proto.name, proto.role, v.cast<Scalar>()});
  }
  return out;
}

template ParamSet<float> init_params<float>(const ModelSpec&, std::uint64_t);
template ParamSet<double> init_params<double>(const ModelSpec&, std::uint64_t);

}  // namespace pielab::nn
