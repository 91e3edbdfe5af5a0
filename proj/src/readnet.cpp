#include "readnet/readnet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "readnet/num/serialize.hpp"

namespace readnet {

using num::Graph;
using num::Mask;
using num::Tensor;
using num::Var;

namespace {

constexpr char kMagic[4] = {'R', 'N', 'E', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

Var layer_norm_affine(const Var& x, const Var& gain, const Var& bias) {
  return num::add(num::mul(num::layer_norm(x, 1), gain), bias);
}

std::string layer_name(const char* level, std::size_t l, const std::string& leaf) {
  return std::string(level) + ".l" + std::to_string(l) + "." + leaf;
}

}  // namespace

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v < 1) throw std::invalid_argument(std::string("model config: ") + name + " must be >= 1");
  };
  positive(m_words, "m_words");
  positive(n_sentences, "n_sentences");
  positive(d, "d");
  positive(h, "h");
  positive(p, "p");
  positive(q, "q");
  positive(batch, "batch");
  if (d % h != 0)
    throw std::invalid_argument("model config: d=" + std::to_string(d) + " is not divisible by h=" + std::to_string(h));
  if (document_width() % h != 0)
    throw std::invalid_argument("model config: document width d+6=" + std::to_string(document_width()) +
                                " is not divisible by h=" + std::to_string(h));
  if (num_classes < 2) throw std::invalid_argument("model config: num_classes must be >= 2");
  if (!(lr > 0)) throw std::invalid_argument("model config: lr must be positive");
}

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.m_words = 24;
  c.n_sentences = 8;
  c.d = 16;
  c.h = 2;
  c.p = 1;
  c.q = 1;
  c.batch = 8;
  c.lr = 0.01;
  return c;
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"m_words", c.m_words},
          {"n_sentences", c.n_sentences},
          {"d", c.d},
          {"h", c.h},
          {"p", c.p},
          {"q", c.q},
          {"d_ff", c.d_ff},
          {"num_classes", c.num_classes},
          {"batch", c.batch},
          {"lr", c.lr},
          {"max_epochs", c.max_epochs},
          {"seed", c.seed},
          {"residual", c.residual},
          {"softmax_scores", c.softmax_scores},
          {"positional", c.positional}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.m_words = j.at("m_words").get<std::size_t>();
  c.n_sentences = j.at("n_sentences").get<std::size_t>();
  c.d = j.at("d").get<std::size_t>();
  c.h = j.at("h").get<std::size_t>();
  c.p = j.at("p").get<std::size_t>();
  c.q = j.at("q").get<std::size_t>();
  c.d_ff = j.at("d_ff").get<std::size_t>();
  c.num_classes = j.at("num_classes").get<std::size_t>();
  c.batch = j.at("batch").get<std::size_t>();
  c.lr = j.at("lr").get<double>();
  c.max_epochs = j.at("max_epochs").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.residual = j.at("residual").get<bool>();
  c.softmax_scores = j.at("softmax_scores").get<bool>();
  c.positional = j.at("positional").get<bool>();
  c.validate();
  return c;
}

TrainOptions train_options_from(const ModelConfig& c) {
  TrainOptions o;
  o.epochs = c.max_epochs;
  o.batch = c.batch;
  o.lr = c.lr;
  o.seed = c.seed;
  return o;
}

Tensor positional_encoding(std::size_t m, std::size_t d) {
  Tensor p({m, d});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const std::size_t even = j - j % 2;
      const double angle = static_cast<double>(i) / std::pow(10.0, 4.0 * static_cast<double>(even) / static_cast<double>(d));
      p(i, j) = j % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  }
  return p;
}

Var multi_head_attention(const Var& q, const Var& k, const Var& v, const AttentionVars& params, const Mask& key_mask,
                         AttentionTrace* trace) {
  const std::size_t heads = params.w_q.size();
  if (heads == 0 || params.w_k.size() != heads || params.w_v.size() != heads)
    throw std::invalid_argument("multi_head_attention: inconsistent head count");
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(params.w_q[0].cols()));
  std::vector<Var> outputs;
  outputs.reserve(heads);
  for (std::size_t i = 0; i < heads; ++i) {
    const auto qi = num::matmul(q, params.w_q[i]);
    const auto ki = num::matmul(k, params.w_k[i]);
    const auto vi = num::matmul(v, params.w_v[i]);
    const auto logits = num::scale(num::matmul(qi, num::transpose(ki)), inv_sqrt_dk);
    if (trace && trace->active) trace->active->push_back(logits.value().shape());
    const auto weights = num::softmax(logits, 1, key_mask);
    if (trace) {
      const auto& w = weights.value();
      for (std::size_t r = 0; r < w.rows(); ++r) {
        double total = 0.0;
        for (std::size_t c = 0; c < w.cols(); ++c) total += w(r, c);
        trace->max_row_sum_error = std::max(trace->max_row_sum_error, std::abs(total - 1.0));
      }
    }
    outputs.push_back(num::matmul(weights, vi));
  }
  return num::matmul(num::concat(outputs, 1), params.w);
}

Var encoder_layer(const Var& h, const EncoderLayerVars& params, const Mask& mask, bool residual,
                  AttentionTrace* trace) {
  auto a = multi_head_attention(h, h, h, params.attention, mask, trace);
  if (a.value().shape() != h.value().shape())
    throw std::invalid_argument("encoder_layer: attention output " + num::shape_string(a.value().shape()) +
                                " does not match input " + num::shape_string(h.value().shape()));
  if (residual) a = num::add(a, h);
  a = layer_norm_affine(a, params.ln1_gain, params.ln1_bias);
  const auto hidden = num::relu(num::add(num::matmul(a, params.ffn_w1), params.ffn_b1));
  auto f = num::add(num::matmul(hidden, params.ffn_w2), params.ffn_b2);
  if (residual) f = num::add(f, a);
  return layer_norm_affine(f, params.ln2_gain, params.ln2_bias);
}

Var attention_aggregate(const Var& h, const AggregationVars& params, const Mask& mask) {
  const auto u = num::tanh(num::add(num::matmul(h, params.w1), params.b1));
  const auto w = num::softmax(num::matmul(u, params.c), 0, mask);
  return num::matmul(num::transpose(w), h);
}

Var ordinal_loss(const Var& r, const Var& theta, int y) {
  const std::size_t k = r.cols();
  if (r.rows() != 1 || theta.rows() != 1 || theta.cols() != k)
    throw std::invalid_argument("ordinal_loss: r " + num::shape_string(r.value().shape()) + " and theta " +
                                num::shape_string(theta.value().shape()) + " must be matching rows");
  if (y < 1 || static_cast<std::size_t>(y) > k + 1)
    throw std::out_of_range("ordinal_loss: label " + std::to_string(y) + " outside [1, " + std::to_string(k + 1) + "]");
  Tensor signs({1, k});
  for (std::size_t i = 0; i < k; ++i) signs[i] = static_cast<int>(i + 1) < y ? -1.0 : 1.0;
  auto& g = *r.graph();
  const auto margin = num::mul(num::sub(theta, r), g.constant(std::move(signs)));
  return num::scale(num::sum(num::log_sigmoid(margin)), -1.0);
}

int decode_class(std::span<const double> r, std::span<const double> theta, std::size_t num_classes) {
  int above = 0;
  for (std::size_t k = 0; k < r.size() && k < theta.size(); ++k) above += r[k] > theta[k] ? 1 : 0;
  return std::clamp(1 + above, 1, static_cast<int>(num_classes));
}

ReadNet::ReadNet(ModelConfig config, embed::Vocabulary vocab, FeatureStats sentence_stats,
                 FeatureStats document_stats)
    : config_(config),
      vocab_(std::move(vocab)),
      sentence_stats_(std::move(sentence_stats)),
      document_stats_(std::move(document_stats)) {
  config_.validate();
  if (sentence_stats_.dims() != kSentenceFeatureCount || document_stats_.dims() != kDocumentFeatureCount)
    throw std::invalid_argument("ReadNet: feature statistics have the wrong width");
  init_parameters();
}

void ReadNet::init_parameters() {
  num::Rng rng(config_.seed);
  const std::size_t d = config_.d;
  params_.add_uniform("embedding", {vocab_.size(), d}, d, rng);
  auto add_level = [&](const char* level, std::size_t width, std::size_t layers) {
    const std::size_t dk = width / config_.h;
    const std::size_t ff = config_.d_ff ? config_.d_ff : width;
    for (std::size_t l = 0; l < layers; ++l) {
      for (std::size_t i = 0; i < config_.h; ++i) {
        const auto head = "head" + std::to_string(i) + ".";
        params_.add_uniform(layer_name(level, l, head + "W_Q"), {width, dk}, width, rng);
        params_.add_uniform(layer_name(level, l, head + "W_K"), {width, dk}, width, rng);
        params_.add_uniform(layer_name(level, l, head + "W_V"), {width, dk}, width, rng);
      }
      params_.add_uniform(layer_name(level, l, "W"), {width, width}, width, rng);
      params_.add_uniform(layer_name(level, l, "ffn.W1"), {width, ff}, width, rng);
      params_.add(layer_name(level, l, "ffn.b1"), Tensor({1, ff}));
      params_.add_uniform(layer_name(level, l, "ffn.W2"), {ff, width}, ff, rng);
      params_.add(layer_name(level, l, "ffn.b2"), Tensor({1, width}));
      params_.add(layer_name(level, l, "ln1.gain"), Tensor({1, width}, 1.0));
      params_.add(layer_name(level, l, "ln1.bias"), Tensor({1, width}));
      params_.add(layer_name(level, l, "ln2.gain"), Tensor({1, width}, 1.0));
      params_.add(layer_name(level, l, "ln2.bias"), Tensor({1, width}));
    }
    params_.add_uniform(std::string(level) + ".agg.W_1", {width, width}, width, rng);
    params_.add(std::string(level) + ".agg.b_1", Tensor({1, width}));
    params_.add_uniform(std::string(level) + ".agg.C", {width, 1}, width, rng);
  };
  add_level("sent", d, config_.p);
  add_level("doc", config_.document_width(), config_.q);
  const std::size_t in = config_.document_width() + kDocumentFeatureCount;
  params_.add_uniform("transfer.W_t", {in, config_.num_classes - 1}, in, rng);
  params_.add("transfer.theta", Tensor({1, config_.num_classes - 1}));
}

bool ReadNet::is_transfer_parameter(const std::string& name) { return name.rfind("transfer.", 0) == 0; }

void ReadNet::reset_transfer_layer(std::size_t num_classes, std::uint64_t seed) {
  if (num_classes < 2) throw std::invalid_argument("transfer layer: num_classes must be >= 2");
  num::Rng rng(num::derive_seed(seed, 0x7472616e73666572ULL));
  params_.erase("transfer.W_t");
  params_.erase("transfer.theta");
  config_.num_classes = num_classes;
  const std::size_t in = config_.document_width() + kDocumentFeatureCount;
  params_.add_uniform("transfer.W_t", {in, num_classes - 1}, in, rng);
  params_.add("transfer.theta", Tensor({1, num_classes - 1}));
}

ReadNet::Bound ReadNet::bind(Graph& g, bool track_gradients) {
  auto get = [&](const std::string& name) {
    auto& p = params_.at(name);
    return track_gradients ? g.parameter(p) : g.constant(p.value);
  };
  Bound b;
  b.graph = &g;
  b.embedding = get("embedding");
  auto level = [&](const char* name, std::size_t layers, std::vector<EncoderLayerVars>& out, AggregationVars& agg) {
    for (std::size_t l = 0; l < layers; ++l) {
      EncoderLayerVars v;
      for (std::size_t i = 0; i < config_.h; ++i) {
        const auto head = "head" + std::to_string(i) + ".";
        v.attention.w_q.push_back(get(layer_name(name, l, head + "W_Q")));
        v.attention.w_k.push_back(get(layer_name(name, l, head + "W_K")));
        v.attention.w_v.push_back(get(layer_name(name, l, head + "W_V")));
      }
      v.attention.w = get(layer_name(name, l, "W"));
      v.ffn_w1 = get(layer_name(name, l, "ffn.W1"));
      v.ffn_b1 = get(layer_name(name, l, "ffn.b1"));
      v.ffn_w2 = get(layer_name(name, l, "ffn.W2"));
      v.ffn_b2 = get(layer_name(name, l, "ffn.b2"));
      v.ln1_gain = get(layer_name(name, l, "ln1.gain"));
      v.ln1_bias = get(layer_name(name, l, "ln1.bias"));
      v.ln2_gain = get(layer_name(name, l, "ln2.gain"));
      v.ln2_bias = get(layer_name(name, l, "ln2.bias"));
      out.push_back(std::move(v));
    }
    agg.w1 = get(std::string(name) + ".agg.W_1");
    agg.b1 = get(std::string(name) + ".agg.b_1");
    agg.c = get(std::string(name) + ".agg.C");
  };
  level("sent", config_.p, b.sentence_layers, b.sentence_aggregate);
  level("doc", config_.q, b.document_layers, b.document_aggregate);
  b.w_t = get("transfer.W_t");
  b.theta = get("transfer.theta");
  b.sentence_positions = g.constant(positional_encoding(config_.m_words, config_.d));
  b.document_positions = g.constant(positional_encoding(config_.n_sentences, config_.document_width()));
  return b;
}

std::vector<EncodedDocument> ReadNet::prepare(std::span<const TokenizedDocument> docs,
                                              const LexiconSet& lexicons) const {
  std::vector<EncodedDocument> out;
  out.reserve(docs.size());
  for (const auto& doc : docs) {
    if (doc.sentences.empty()) throw std::invalid_argument("document '" + doc.id + "' has no sentences");
    EncodedDocument e;
    e.id = doc.id;
    e.label = doc.label.value_or(0);
    e.v = normalize_features(to_vector(document_features(doc, lexicons)), document_stats_);
    const std::size_t kept = std::min(doc.sentences.size(), config_.n_sentences);
    for (std::size_t s = 0; s < kept; ++s) {
      const auto& sentence = doc.sentences[s];
      auto ids = vocab_.encode(sentence);
      if (ids.size() > config_.m_words) ids.resize(config_.m_words);
      e.sentences.push_back(std::move(ids));
      e.u.push_back(normalize_features(to_vector(sentence_features(sentence)), sentence_stats_));
    }
    out.push_back(std::move(e));
  }
  return out;
}

Var ReadNet::encode_sentence(const Bound& b, std::span<const std::size_t> tokens, std::span<const double> u,
                             AttentionTrace* trace) const {
  const std::size_t m = config_.m_words;
  if (tokens.empty()) throw std::invalid_argument("empty sequence");
  if (tokens.size() > m) throw std::invalid_argument("encode_sentence: sentence longer than m_words");
  if (u.size() != kSentenceFeatureCount) throw std::invalid_argument("encode_sentence: u must have 6 entries");
  auto& g = *b.graph;
  std::vector<std::size_t> padded(m, embed::kPadIndex);
  Mask mask(m, 0);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    padded[i] = tokens[i];
    mask[i] = 1;
  }
  auto h = num::row_select(b.embedding, padded);
  if (config_.positional) h = num::add(h, b.sentence_positions);
  if (trace) trace->active = &trace->sentence_scores;
  for (const auto& layer : b.sentence_layers) h = encoder_layer(h, layer, mask, config_.residual, trace);
  const auto hi = attention_aggregate(h, b.sentence_aggregate, mask);
  const Var parts[] = {hi, g.constant(Tensor::row(u))};
  return num::concat(parts, 1);
}

Var ReadNet::encode_document(const Bound& b, const EncodedDocument& doc, AttentionTrace* trace) const {
  const std::size_t n = config_.n_sentences;
  const std::size_t kept = std::min(doc.sentences.size(), n);
  if (kept == 0) throw std::invalid_argument("empty sequence");
  if (doc.u.size() < kept) throw std::invalid_argument("encode_document: missing sentence features");
  auto& g = *b.graph;
  std::vector<Var> rows;
  rows.reserve(kept + 1);
  for (std::size_t s = 0; s < kept; ++s) {
    std::span<const std::size_t> tokens = doc.sentences[s];
    if (tokens.size() > config_.m_words) tokens = tokens.first(config_.m_words);
    rows.push_back(encode_sentence(b, tokens, doc.u[s], trace));
  }
  // Pad sentences are never encoded: their rows are zeros and they are masked.
  if (kept < n) rows.push_back(g.constant(Tensor({n - kept, config_.document_width()})));
  Mask mask(n, 0);
  std::fill_n(mask.begin(), kept, 1);
  auto h = num::concat(rows, 0);
  if (config_.positional) h = num::add(h, b.document_positions);
  if (trace) trace->active = &trace->document_scores;
  for (const auto& layer : b.document_layers) h = encoder_layer(h, layer, mask, config_.residual, trace);
  if (trace) trace->active = nullptr;
  return attention_aggregate(h, b.document_aggregate, mask);
}

Var ReadNet::scores(const Bound& b, const EncodedDocument& doc, AttentionTrace* trace) const {
  if (doc.v.size() != kDocumentFeatureCount) throw std::invalid_argument("scores: v must have 22 entries");
  const Var parts[] = {encode_document(b, doc, trace), b.graph->constant(Tensor::row(doc.v))};
  const auto r = num::matmul(num::concat(parts, 1), b.w_t);
  return config_.softmax_scores ? num::softmax(r, 1) : r;
}

Var ReadNet::loss(const Bound& b, const EncodedDocument& doc) const {
  if (doc.label < 1 || static_cast<std::size_t>(doc.label) > config_.num_classes)
    throw std::out_of_range("document '" + doc.id + "': label " + std::to_string(doc.label) + " outside [1, " +
                            std::to_string(config_.num_classes) + "]");
  return ordinal_loss(scores(b, doc), b.theta, doc.label);
}

namespace {

Prediction make_prediction(std::span<const double> r, std::span<const double> theta, std::size_t num_classes) {
  Prediction p;
  p.r.assign(r.begin(), r.end());
  p.label = decode_class(r, theta, num_classes);
  double total = 0.0;
  for (std::size_t k = 0; k < r.size(); ++k) total += sigmoid(r[k] - theta[k]);
  p.score = total / static_cast<double>(r.size());
  return p;
}

template <typename Fn>
void for_each_chunk(std::size_t count, Fn&& fn) {
  constexpr std::size_t kChunk = 16;
  const auto chunks = static_cast<std::ptrdiff_t>((count + kChunk - 1) / kChunk);
  std::vector<std::string> errors(static_cast<std::size_t>(chunks));
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t c = 0; c < chunks; ++c) {
    const std::size_t lo = static_cast<std::size_t>(c) * kChunk;
    try {
      fn(lo, std::min(count, lo + kChunk));
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(c)] = e.what();
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw std::runtime_error(e);
  }
}

}  // namespace

Prediction ReadNet::predict_with(const Bound& b, const EncodedDocument& doc) const {
  const auto r = scores(b, doc);
  return make_prediction(r.value().data(), b.theta.value().data(), config_.num_classes);
}

Prediction ReadNet::predict(const EncodedDocument& doc) const {
  Graph g;
  const auto b = const_cast<ReadNet*>(this)->bind(g, false);
  return predict_with(b, doc);
}

std::vector<Prediction> ReadNet::predict_all(std::span<const EncodedDocument> docs) const {
  std::vector<Prediction> out(docs.size());
  for_each_chunk(docs.size(), [&](std::size_t lo, std::size_t hi) {
    Graph g;
    // Inference bindings copy values and never touch gradient state, so the
    // const_cast is read-only in practice.
    const auto b = const_cast<ReadNet*>(this)->bind(g, false);
    for (std::size_t i = lo; i < hi; ++i) out[i] = predict_with(b, docs[i]);
  });
  return out;
}

std::vector<std::vector<double>> ReadNet::transfer_inputs(std::span<const EncodedDocument> docs) const {
  std::vector<std::vector<double>> out(docs.size());
  for_each_chunk(docs.size(), [&](std::size_t lo, std::size_t hi) {
    Graph g;
    const auto b = const_cast<ReadNet*>(this)->bind(g, false);
    for (std::size_t i = lo; i < hi; ++i) {
      const auto y = encode_document(b, docs[i]);
      out[i].assign(y.value().data().begin(), y.value().data().end());
      out[i].insert(out[i].end(), docs[i].v.begin(), docs[i].v.end());
    }
  });
  return out;
}

std::size_t ReadNet::load_embeddings(const embed::LoadedEmbeddings& e) {
  if (e.dim != config_.d)
    throw std::invalid_argument("embedding file has dim " + std::to_string(e.dim) + ", model expects d=" +
                                std::to_string(config_.d));
  auto& table = params_.at("embedding").value;
  std::size_t copied = 0;
  for (std::size_t r = 0; r < e.words.size(); ++r) {
    const auto idx = vocab_.find(e.words[r]);
    if (!idx) continue;
    std::copy_n(e.vectors.row_span(r).begin(), config_.d, table.row_span(*idx).begin());
    ++copied;
  }
  return copied;
}

void ReadNet::save(std::ostream& out) const {
  out.write(kMagic, 4);
  num::write_u32(out, kFormatVersion);
  nlohmann::json header;
  header["config"] = to_json(config_);
  header["vocab"] = vocab_.ranked();
  num::write_string(out, header.dump());
  for (const auto* stats : {&sentence_stats_, &document_stats_}) {
    num::write_u32(out, static_cast<std::uint32_t>(stats->dims()));
    for (double x : stats->mean) num::write_f64(out, x);
    for (double x : stats->stddev) num::write_f64(out, x);
  }
  const auto all = params_.all();
  num::write_u32(out, static_cast<std::uint32_t>(all.size()));
  for (const auto* p : all) num::write_tensor(out, p->name, p->value, num::DType::kFloat64);
  if (!out) throw std::runtime_error("checkpoint write failed");
}

void ReadNet::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  save(out);
}

ReadNet ReadNet::load(std::istream& in) {
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || !std::equal(magic, magic + 4, kMagic)) throw std::runtime_error("checkpoint: bad magic bytes");
  const auto version = num::read_u32(in);
  if (version != kFormatVersion) throw std::runtime_error("checkpoint: unsupported format version " + std::to_string(version));
  const auto header = nlohmann::json::parse(num::read_string(in));
  const auto config = model_config_from_json(header.at("config"));
  auto vocab = embed::Vocabulary::from_ranked(header.at("vocab").get<std::vector<std::pair<std::string, std::size_t>>>());
  FeatureStats stats[2];
  for (auto& s : stats) {
    const auto dims = num::read_u32(in);
    if (dims > 1024) throw std::runtime_error("checkpoint: implausible feature width");
    s.mean.resize(dims);
    s.stddev.resize(dims);
    for (auto& x : s.mean) x = num::read_f64(in);
    for (auto& x : s.stddev) x = num::read_f64(in);
  }
  ReadNet model(config, std::move(vocab), std::move(stats[0]), std::move(stats[1]));
  const auto count = num::read_u32(in);
  if (count != model.params_.size())
    throw std::runtime_error("checkpoint: expected " + std::to_string(model.params_.size()) + " tensors, found " +
                             std::to_string(count));
  for (std::uint32_t i = 0; i < count; ++i) {
    auto named = num::read_tensor(in);
    if (!model.params_.contains(named.name)) throw std::runtime_error("checkpoint: unknown tensor " + named.name);
    auto& p = model.params_.at(named.name);
    if (p.value.shape() != named.tensor.shape())
      throw std::runtime_error("checkpoint: tensor " + named.name + " has shape " +
                               num::shape_string(named.tensor.shape()) + ", expected " +
                               num::shape_string(p.value.shape()));
    p.value = std::move(named.tensor);
  }
  return model;
}

ReadNet ReadNet::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  return load(in);
}

namespace {

void write_epoch(std::ostream* log, const EpochLog& e) {
  if (!log) return;
  nlohmann::json j{{"epoch", e.epoch}, {"loss", e.loss}, {"train_acc", e.train_acc}};
  *log << j.dump() << '\n';
}

// Shared mini-batch loop: `batch_loss` builds the summed loss of a batch and
// counts correct predictions.
template <typename BatchLoss>
std::vector<EpochLog> run_epochs(num::ParameterStore& store, std::size_t n, const TrainOptions& options,
                                 BatchLoss&& batch_loss) {
  if (n == 0) throw std::invalid_argument("train: no documents");
  if (options.batch < 1) throw std::invalid_argument("train: batch must be >= 1");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  num::Rng rng(options.seed);
  num::AdamConfig adam;
  adam.lr = options.lr;
  std::vector<EpochLog> logs;
  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double total = 0.0;
    std::size_t correct = 0;
    for (std::size_t lo = 0; lo < n; lo += options.batch) {
      const std::size_t hi = std::min(n, lo + options.batch);
      Graph g;
      const auto summed = batch_loss(g, std::span<const std::size_t>(order).subspan(lo, hi - lo), correct);
      total += summed.value().item();
      g.backward(num::scale(summed, 1.0 / static_cast<double>(hi - lo)));
      num::adam_step(store, adam);
    }
    EpochLog e{epoch, total / static_cast<double>(n), static_cast<double>(correct) / static_cast<double>(n)};
    write_epoch(options.log, e);
    logs.push_back(e);
    if (options.target_accuracy && e.train_acc >= *options.target_accuracy) break;
  }
  return logs;
}

}  // namespace

std::vector<EpochLog> train(ReadNet& model, std::span<const EncodedDocument> docs, const TrainOptions& options) {
  const auto m = model.config().num_classes;
  return run_epochs(model.params(), docs.size(), options,
                    [&](Graph& g, std::span<const std::size_t> batch, std::size_t& correct) {
                      const auto b = model.bind(g, true);
                      Var total;
                      for (auto i : batch) {
                        const auto& doc = docs[i];
                        if (doc.label < 1 || static_cast<std::size_t>(doc.label) > m)
                          throw std::out_of_range("document '" + doc.id + "': label outside [1, " +
                                                  std::to_string(m) + "]");
                        const auto r = model.scores(b, doc);
                        if (decode_class(r.value().data(), b.theta.value().data(), m) == doc.label) ++correct;
                        const auto l = ordinal_loss(r, b.theta, doc.label);
                        total = total.valid() ? num::add(total, l) : l;
                      }
                      return total;
                    });
}

ReadNet fit_readnet(std::span<const TokenizedDocument> docs, const LexiconSet& lexicons, const ModelConfig& config,
                    const embed::LoadedEmbeddings* embeddings, std::vector<EpochLog>* log_out, std::ostream* log) {
  if (docs.empty()) throw std::invalid_argument("empty corpus");
  std::vector<std::vector<double>> sentence_rows, document_rows;
  for (const auto& doc : docs) {
    document_rows.push_back(to_vector(document_features(doc, lexicons)));
    for (const auto& s : doc.sentences) sentence_rows.push_back(to_vector(sentence_features(s)));
  }
  ReadNet model(config, embed::Vocabulary::build(docs), fit_feature_stats(sentence_rows),
                fit_feature_stats(document_rows));
  if (embeddings) model.load_embeddings(*embeddings);
  const auto encoded = model.prepare(docs, lexicons);
  auto options = train_options_from(config);
  options.log = log;
  auto logs = train(model, encoded, options);
  if (log_out) *log_out = std::move(logs);
  return model;
}

ReadNet transfer_train(const ReadNet& pretrained, std::span<const TokenizedDocument> target,
                       const LexiconSet& lexicons, std::size_t num_classes, const TrainOptions& options,
                       std::vector<EpochLog>* log_out) {
  std::stringstream buffer;
  pretrained.save(buffer);
  auto model = ReadNet::load(buffer);
  model.reset_transfer_layer(num_classes, options.seed);
  for (auto* p : model.params().all()) p->trainable = ReadNet::is_transfer_parameter(p->name);

  // With the encoder frozen, y (+) v is a constant per document, so it is
  // computed once instead of on every step. The loss and its gradient with
  // respect to W_t and theta are the same as running the full network.
  const auto encoded = model.prepare(target, lexicons);
  const auto inputs = model.transfer_inputs(encoded);
  const bool softmax_scores = model.config().softmax_scores;
  auto& w_t = model.params().at("transfer.W_t");
  auto& theta = model.params().at("transfer.theta");
  auto logs = run_epochs(model.params(), encoded.size(), options,
                         [&](Graph& g, std::span<const std::size_t> batch, std::size_t& correct) {
                           const auto w = g.parameter(w_t);
                           const auto th = g.parameter(theta);
                           Var total;
                           for (auto i : batch) {
                             const auto& doc = encoded[i];
                             if (doc.label < 1 || static_cast<std::size_t>(doc.label) > num_classes)
                               throw std::out_of_range("document '" + doc.id + "': label outside [1, " +
                                                       std::to_string(num_classes) + "]");
                             auto r = num::matmul(g.constant(Tensor::row(inputs[i])), w);
                             if (softmax_scores) r = num::softmax(r, 1);
                             if (decode_class(r.value().data(), th.value().data(), num_classes) == doc.label)
                               ++correct;
                             const auto l = ordinal_loss(r, th, doc.label);
                             total = total.valid() ? num::add(total, l) : l;
                           }
                           return total;
                         });
  for (auto* p : model.params().all()) p->trainable = true;
  if (log_out) *log_out = std::move(logs);
  return model;
}

}  // namespace readnet
