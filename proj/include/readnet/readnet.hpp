#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "readnet/embed.hpp"
#include "readnet/features.hpp"
#include "readnet/num/graph.hpp"
#include "readnet/num/ops.hpp"
#include "readnet/num/params.hpp"

namespace readnet {

struct ModelConfig {
  std::size_t m_words = 50;      // tokens kept per sentence (pad or truncate)
  std::size_t n_sentences = 50;  // sentences kept per document
  std::size_t d = 96;
  std::size_t h = 3;
  std::size_t p = 6;  // sentence-encoder layers
  std::size_t q = 6;  // document-encoder layers
  std::size_t d_ff = 0;  // FFN hidden width; 0 means d (resp. d+6 at document level)
  std::size_t num_classes = 2;
  std::size_t batch = 32;
  double lr = 0.001;
  std::size_t max_epochs = 300;
  std::uint64_t seed = 1;
  bool residual = false;         // add x to each sublayer output before LayerNorm
  bool softmax_scores = false;   // r = softmax(W_t(y + v)) instead of the pre-activation
  bool positional = true;

  std::size_t d_k() const { return d / h; }
  std::size_t document_width() const { return d + kSentenceFeatureCount; }
  void validate() const;
  /// A few-thousand-parameter configuration used by tests and experiments.
  static ModelConfig tiny();
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// P[i][j] = sin(i / 10^(4j/d)) for even j, cos(i / 10^(4(j-1)/d)) for odd j.
num::Tensor positional_encoding(std::size_t m, std::size_t d);

/// Score-matrix shapes seen during one forward pass, for structural checks,
/// and the largest |row sum - 1| over every attention weight matrix.
struct AttentionTrace {
  std::vector<num::Shape> sentence_scores;
  std::vector<num::Shape> document_scores;
  double max_row_sum_error = 0.0;
  std::vector<num::Shape>* active = nullptr;
};

struct AttentionVars {
  std::vector<num::Var> w_q, w_k, w_v;  // one d x d_k block per head
  num::Var w;                           // d x d output projection
};

struct EncoderLayerVars {
  AttentionVars attention;
  num::Var ffn_w1, ffn_b1, ffn_w2, ffn_b2;
  num::Var ln1_gain, ln1_bias, ln2_gain, ln2_bias;
};

struct AggregationVars {
  num::Var w1, b1, c;
};

/// Concatenated per-head softmax(Q W_Qi (K W_Ki)^T / sqrt(d_k)) (V W_Vi),
/// projected by W. Masked key positions get zero weight.
num::Var multi_head_attention(const num::Var& q, const num::Var& k, const num::Var& v, const AttentionVars& params,
                              const num::Mask& key_mask, AttentionTrace* trace = nullptr);

/// Post-sublayer LayerNorm around attention and the position-wise FFN.
num::Var encoder_layer(const num::Var& h, const EncoderLayerVars& params, const num::Mask& mask, bool residual,
                       AttentionTrace* trace = nullptr);

/// U = tanh(H W1 + b1), w = softmax(U C) over unmasked rows, returns w^T H.
num::Var attention_aggregate(const num::Var& h, const AggregationVars& params, const num::Mask& mask);

/// -sum_k log sigmoid(s_k (theta_k - r_k)) with s_k = -1 for k < y, else +1.
num::Var ordinal_loss(const num::Var& r, const num::Var& theta, int y);

/// 1 + #{k : r_k > theta_k}, clipped to [1, m].
int decode_class(std::span<const double> r, std::span<const double> theta, std::size_t num_classes);

/// Model input for one document: token indices per kept sentence (truncated,
/// unpadded), normalized sentence features u_i and document features v.
struct EncodedDocument {
  std::string id;
  std::vector<std::vector<std::size_t>> sentences;
  std::vector<std::vector<double>> u;
  std::vector<double> v;
  int label = 0;  // 0 when unlabeled
};

struct Prediction {
  std::vector<double> r;
  int label = 1;
  double score = 0.0;  // sigma(r_1 - theta_1) for binary models
};

struct EpochLog {
  std::size_t epoch = 0;
  double loss = 0.0;
  double train_acc = 0.0;
};

struct TrainOptions {
  std::size_t epochs = 300;
  std::size_t batch = 32;
  double lr = 0.001;
  std::uint64_t seed = 1;
  /// Stop once an epoch's training accuracy reaches this value.
  std::optional<double> target_accuracy;
  std::ostream* log = nullptr;  // one JSON line per epoch
};

TrainOptions train_options_from(const ModelConfig& c);

class ReadNet {
 public:
  /// Allocates and initializes every parameter from config.seed.
  ReadNet(ModelConfig config, embed::Vocabulary vocab, FeatureStats sentence_stats, FeatureStats document_stats);

  const ModelConfig& config() const { return config_; }
  ModelConfig& mutable_config() { return config_; }
  const embed::Vocabulary& vocab() const { return vocab_; }
  const FeatureStats& sentence_stats() const { return sentence_stats_; }
  const FeatureStats& document_stats() const { return document_stats_; }
  num::ParameterStore& params() { return params_; }
  const num::ParameterStore& params() const { return params_; }

  /// Graph bindings for every parameter. Trainable bindings accumulate
  /// gradients into the store; inference bindings are constants.
  struct Bound;
  Bound bind(num::Graph& g, bool track_gradients);

  std::vector<EncodedDocument> prepare(std::span<const TokenizedDocument> docs, const LexiconSet& lexicons) const;

  /// h_i* = h_i (+) u_i, width d+6.
  num::Var encode_sentence(const Bound& b, std::span<const std::size_t> tokens, std::span<const double> u,
                           AttentionTrace* trace = nullptr) const;
  /// Article embedding y, width d+6.
  num::Var encode_document(const Bound& b, const EncodedDocument& doc, AttentionTrace* trace = nullptr) const;
  /// (m-1)-vector r = (y (+) v) W_t.
  num::Var scores(const Bound& b, const EncodedDocument& doc, AttentionTrace* trace = nullptr) const;
  num::Var loss(const Bound& b, const EncodedDocument& doc) const;

  Prediction predict(const EncodedDocument& doc) const;
  /// Independent per-document inference, parallel across documents.
  std::vector<Prediction> predict_all(std::span<const EncodedDocument> docs) const;
  /// y (+) v for every document, computed with frozen parameters.
  std::vector<std::vector<double>> transfer_inputs(std::span<const EncodedDocument> docs) const;

  /// Copies rows for words present in both vocabularies; returns the count.
  std::size_t load_embeddings(const embed::LoadedEmbeddings& e);

  /// Replaces W_t and theta with freshly initialized ones for `num_classes`.
  void reset_transfer_layer(std::size_t num_classes, std::uint64_t seed);

  void save(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  static ReadNet load(std::istream& in);
  static ReadNet load(const std::filesystem::path& path);

  static bool is_transfer_parameter(const std::string& name);

 private:
  void init_parameters();
  Prediction predict_with(const Bound& b, const EncodedDocument& doc) const;

  ModelConfig config_;
  embed::Vocabulary vocab_;
  FeatureStats sentence_stats_;
  FeatureStats document_stats_;
  num::ParameterStore params_;
};

struct ReadNet::Bound {
  num::Graph* graph = nullptr;
  num::Var embedding;
  std::vector<EncoderLayerVars> sentence_layers;
  AggregationVars sentence_aggregate;
  std::vector<EncoderLayerVars> document_layers;
  AggregationVars document_aggregate;
  num::Var w_t;
  num::Var theta;
  num::Var sentence_positions;  // m_words x d
  num::Var document_positions;  // n_sentences x (d+6)
};

/// Mini-batch Adam over all trainable parameters. Returns the epoch log.
std::vector<EpochLog> train(ReadNet& model, std::span<const EncodedDocument> docs, const TrainOptions& options);

/// Builds the vocabulary and feature statistics from `docs`, initializes a
/// model and trains it.
ReadNet fit_readnet(std::span<const TokenizedDocument> docs, const LexiconSet& lexicons, const ModelConfig& config,
                    const embed::LoadedEmbeddings* embeddings = nullptr, std::vector<EpochLog>* log_out = nullptr,
                    std::ostream* log = nullptr);

/// Freezes everything except W_t and theta, re-shapes the transfer layer when
/// the target class count differs, and trains it on the target corpus.
ReadNet transfer_train(const ReadNet& pretrained, std::span<const TokenizedDocument> target,
                       const LexiconSet& lexicons, std::size_t num_classes, const TrainOptions& options,
                       std::vector<EpochLog>* log_out = nullptr);

}  // namespace readnet
