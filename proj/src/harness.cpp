#include "readnet/harness.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "readnet/num/ops.hpp"
#include "readnet/num/params.hpp"
#include "readnet/num/rng.hpp"

namespace readnet::harness {

Corpus parse_corpus(std::istream& in, const std::string& name, std::optional<std::size_t> class_count) {
  Corpus corpus;
  corpus.name = name;
  std::set<std::string> ids;
  std::vector<std::size_t> label_lines;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw std::runtime_error(name + ":" + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) fail("expected a JSON object");
    if (!j.contains("id") || !j["id"].is_string()) fail("missing string field 'id'");
    if (!j.contains("text") || !j["text"].is_string()) fail("missing string field 'text'");
    RawDocument doc{j["id"].get<std::string>(), j["text"].get<std::string>(), std::nullopt};
    if (j.contains("label") && !j["label"].is_null()) {
      if (!j["label"].is_number_integer()) fail("label must be an integer");
      doc.label = j["label"].get<int>();
      if (*doc.label < 1) fail("label " + std::to_string(*doc.label) + " must be >= 1");
      if (class_count && static_cast<std::size_t>(*doc.label) > *class_count)
        fail("label " + std::to_string(*doc.label) + " outside [1, " + std::to_string(*class_count) + "]");
      if (doc.text.find_first_not_of(" \t\r\n") == std::string::npos) fail("labeled document has empty text");
    }
    if (!ids.insert(doc.id).second) fail("duplicate id '" + doc.id + "'");
    corpus.documents.push_back(std::move(doc));
  }
  if (corpus.documents.empty()) throw std::runtime_error("empty corpus");
  if (class_count) {
    corpus.class_count = *class_count;
  } else {
    int top = 0;
    for (const auto& d : corpus.documents) top = std::max(top, d.label.value_or(0));
    corpus.class_count = static_cast<std::size_t>(top);
  }
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, std::optional<std::size_t> class_count) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus " + path.string());
  return parse_corpus(in, path.string(), class_count);
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& d : corpus.documents) {
    nlohmann::json j{{"id", d.id}, {"text", d.text}};
    if (d.label) j["label"] = *d.label;
    out << j.dump() << '\n';
  }
}

std::vector<TokenizedDocument> tokenize_corpus(const Corpus& corpus, const LexiconSet& lexicons) {
  const auto n = static_cast<std::ptrdiff_t>(corpus.documents.size());
  std::vector<TokenizedDocument> out(corpus.documents.size());
  std::vector<std::string> errors(corpus.documents.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto& doc = corpus.documents[static_cast<std::size_t>(i)];
    try {
      out[static_cast<std::size_t>(i)] = tokenize_document(doc, lexicons);
      if (out[static_cast<std::size_t>(i)].sentences.empty())
        errors[static_cast<std::size_t>(i)] = "document '" + doc.id + "' has no words";
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = "document '" + doc.id + "': " + e.what();
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw std::runtime_error(e);
  }
  return out;
}

FoldPlan kfold(const Corpus& corpus, std::size_t k, std::uint64_t seed, bool stratify) {
  const std::size_t n = corpus.documents.size();
  if (k < 2) throw std::invalid_argument("kfold: k must be >= 2");
  if (k > n) throw std::invalid_argument("kfold: k=" + std::to_string(k) + " exceeds corpus size " + std::to_string(n));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  num::Rng rng(seed);
  rng.shuffle(order.begin(), order.end());
  FoldPlan plan{seed, std::vector<std::vector<std::size_t>>(k)};
  if (stratify) {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return corpus.documents[a].label.value_or(0) < corpus.documents[b].label.value_or(0);
    });
    for (std::size_t i = 0; i < n; ++i) plan.folds[i % k].push_back(order[i]);
  } else {
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
      const std::size_t size = n / k + (f < n % k ? 1 : 0);
      plan.folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                           order.begin() + static_cast<std::ptrdiff_t>(pos + size));
      pos += size;
    }
  }
  return plan;
}

num::Var logistic_loss(const num::Var& x, const num::Var& weights, const num::Var& bias, std::span<const int> labels) {
  auto& g = *x.graph();
  const auto logits = num::add(num::matmul(x, weights), bias);
  const std::size_t n = logits.rows(), classes = logits.cols();
  if (labels.size() != n) throw std::invalid_argument("logistic_loss: label count differs from row count");
  num::Tensor onehot({n, classes});
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 1 || static_cast<std::size_t>(labels[i]) > classes)
      throw std::out_of_range("logistic_loss: label outside [1, " + std::to_string(classes) + "]");
    onehot(i, static_cast<std::size_t>(labels[i] - 1)) = 1.0;
  }
  const auto picked = num::sum(num::mul(num::log_softmax(logits), g.constant(std::move(onehot))));
  return num::scale(picked, -1.0 / static_cast<double>(n));
}

std::vector<double> LogisticModel::probabilities(std::span<const double> features) const {
  const std::size_t classes = weights.cols();
  std::vector<double> logits(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    double s = bias[c];
    for (std::size_t f = 0; f < features.size(); ++f) s += features[f] * weights(f, c);
    logits[c] = s;
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (auto& l : logits) total += (l = std::exp(l - top));
  for (auto& l : logits) l /= total;
  return logits;
}

std::vector<int> LogisticModel::predict(std::span<const std::vector<double>> features) const {
  std::vector<int> out;
  out.reserve(features.size());
  for (const auto& row : features) {
    const auto p = probabilities(row);
    out.push_back(static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin()) + 1);
  }
  return out;
}

LogisticModel logistic_baseline_train(std::span<const std::vector<double>> features, std::span<const int> labels,
                                      std::size_t classes, const LogisticConfig& config) {
  if (features.empty() || features.size() != labels.size())
    throw std::invalid_argument("logistic baseline: need one label per feature row");
  if (std::set<int>(labels.begin(), labels.end()).size() < 2)
    throw std::invalid_argument("logistic baseline: training data has a single class");
  const std::size_t dims = features[0].size();
  num::Tensor x({features.size(), dims});
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].size() != dims) throw std::invalid_argument("logistic baseline: ragged feature rows");
    std::copy(features[i].begin(), features[i].end(), x.row_span(i).begin());
  }
  num::ParameterStore store;
  auto& w = store.add("W", num::Tensor({dims, classes}));
  auto& b = store.add("b", num::Tensor({1, classes}));
  num::AdamConfig adam;
  adam.lr = config.lr;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    num::Graph g;
    g.backward(logistic_loss(g.constant(x), g.parameter(w), g.parameter(b), labels));
    num::adam_step(store, adam);
  }
  return {w.value, b.value};
}

std::string model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kReadNet: return "readnet";
    case ModelKind::kLogistic: return "logistic";
    case ModelKind::kMajority: return "majority";
  }
  return "unknown";
}

ModelKind parse_model_kind(const std::string& name) {
  if (name == "readnet") return ModelKind::kReadNet;
  if (name == "logistic") return ModelKind::kLogistic;
  if (name == "majority") return ModelKind::kMajority;
  throw std::invalid_argument("unknown model kind '" + name + "' (expected readnet, logistic or majority)");
}

void finalize_report(EvalReport& report) {
  const auto k = static_cast<double>(report.fold_accuracy.size());
  if (k == 0) return;
  report.mean = std::accumulate(report.fold_accuracy.begin(), report.fold_accuracy.end(), 0.0) / k;
  double var = 0.0;
  for (double a : report.fold_accuracy) var += (a - report.mean) * (a - report.mean);
  report.stddev = std::sqrt(var / k);
}

nlohmann::json EvalReport::to_json() const {
  return {{"model", model},     {"classes", class_count}, {"fold_accuracy", fold_accuracy}, {"fold_sizes", fold_sizes},
          {"mean", mean},       {"std", stddev},          {"confusion", confusion}};
}

std::string EvalReport::to_table() const {
  std::ostringstream out;
  char buf[96];
  out << "model: " << model << "  classes: " << class_count << '\n';
  out << "fold   size  accuracy\n";
  for (std::size_t f = 0; f < fold_accuracy.size(); ++f) {
    std::snprintf(buf, sizeof buf, "%4zu  %5zu  %8.4f\n", f + 1, fold_sizes[f], fold_accuracy[f]);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "mean %.4f  std %.4f\n", mean, stddev);
  out << buf << "confusion (rows true, columns predicted):\n";
  for (const auto& row : confusion) {
    for (auto c : row) {
      std::snprintf(buf, sizeof buf, "%6zu", c);
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

namespace {

struct FoldResult {
  std::vector<int> truth;
  std::vector<int> predicted;
};

FoldResult run_fold(const Corpus& corpus, const std::vector<TokenizedDocument>& docs, const FoldPlan& plan,
                    std::size_t fold, const LexiconSet& lexicons, const EvalConfig& config) {
  std::vector<TokenizedDocument> train_docs, test_docs;
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    for (auto i : plan.folds[f]) (f == fold ? test_docs : train_docs).push_back(docs[i]);
  }
  FoldResult r;
  for (const auto& d : test_docs) r.truth.push_back(d.label.value_or(0));
  const std::uint64_t seed = num::derive_seed(config.seed, fold);
  switch (config.kind) {
    case ModelKind::kMajority: {
      std::map<int, std::size_t> counts;
      for (const auto& d : train_docs) ++counts[d.label.value_or(0)];
      const auto best = std::max_element(counts.begin(), counts.end(),
                                         [](const auto& a, const auto& b) { return a.second < b.second; });
      r.predicted.assign(test_docs.size(), best->first);
      break;
    }
    case ModelKind::kLogistic: {
      std::vector<std::vector<double>> train_rows, test_rows;
      std::vector<int> labels;
      for (const auto& d : train_docs) {
        train_rows.push_back(to_vector(document_features(d, lexicons)));
        labels.push_back(d.label.value_or(0));
      }
      for (const auto& d : test_docs) test_rows.push_back(to_vector(document_features(d, lexicons)));
      const auto stats = fit_feature_stats(train_rows);
      const auto model = logistic_baseline_train(normalize_features(train_rows, stats), labels, corpus.class_count,
                                                 config.logistic);
      r.predicted = model.predict(normalize_features(test_rows, stats));
      break;
    }
    case ModelKind::kReadNet: {
      auto model_config = config.model;
      model_config.num_classes = corpus.class_count;
      model_config.seed = seed;
      const auto model = fit_readnet(train_docs, lexicons, model_config);
      for (const auto& p : model.predict_all(model.prepare(test_docs, lexicons))) r.predicted.push_back(p.label);
      break;
    }
  }
  return r;
}

}  // namespace

EvalReport cross_validate(const Corpus& corpus, const LexiconSet& lexicons, const EvalConfig& config) {
  if (corpus.class_count < 2) throw std::invalid_argument("cross_validate: corpus needs at least two classes");
  for (const auto& d : corpus.documents) {
    if (!d.label) throw std::invalid_argument("cross_validate: document '" + d.id + "' is unlabeled");
  }
  const auto docs = tokenize_corpus(corpus, lexicons);
  const auto plan = kfold(corpus, config.k, config.seed, config.stratify);
  std::vector<FoldResult> results(config.k);
  std::vector<std::string> errors(config.k);
  const int jobs = config.jobs > 0 ? config.jobs : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(jobs)
  for (std::ptrdiff_t f = 0; f < static_cast<std::ptrdiff_t>(config.k); ++f) {
    const auto fold = static_cast<std::size_t>(f);
    try {
      results[fold] = run_fold(corpus, docs, plan, fold, lexicons, config);
    } catch (const std::exception& e) {
      errors[fold] = "fold " + std::to_string(fold + 1) + ": " + e.what();
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw std::runtime_error(e);
  }
  EvalReport report;
  report.model = model_kind_name(config.kind);
  report.class_count = corpus.class_count;
  report.confusion.assign(corpus.class_count, std::vector<std::size_t>(corpus.class_count, 0));
  for (const auto& r : results) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < r.truth.size(); ++i) {
      correct += r.truth[i] == r.predicted[i] ? 1 : 0;
      ++report.confusion[static_cast<std::size_t>(r.truth[i] - 1)][static_cast<std::size_t>(r.predicted[i] - 1)];
    }
    report.fold_sizes.push_back(r.truth.size());
    report.fold_accuracy.push_back(static_cast<double>(correct) / static_cast<double>(r.truth.size()));
  }
  finalize_report(report);
  return report;
}

nlohmann::json ScoreReport::to_json() const {
  nlohmann::json docs = nlohmann::json::array();
  for (std::size_t i = 0; i < ids.size(); ++i) docs.push_back({{"id", ids[i]}, {"group", groups[i]}, {"score", scores[i]}});
  nlohmann::json groups_json = nlohmann::json::array();
  for (const auto& [group, s] : by_group)
    groups_json.push_back({{"group", group}, {"count", s.count}, {"mean", s.mean}, {"std", s.stddev}});
  return {{"documents", docs}, {"groups", groups_json}};
}

ScoreReport score_documents(const ReadNet& model, std::span<const RawDocument> docs, const LexiconSet& lexicons) {
  if (model.config().num_classes != 2)
    throw std::invalid_argument("score: model has " + std::to_string(model.config().num_classes) +
                                " classes; difficulty scores need a binary model");
  Corpus corpus;
  corpus.documents.assign(docs.begin(), docs.end());
  const auto tokenized = tokenize_corpus(corpus, lexicons);
  const auto predictions = model.predict_all(model.prepare(tokenized, lexicons));
  ScoreReport report;
  std::map<int, std::vector<double>> grouped;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    report.ids.push_back(docs[i].id);
    report.scores.push_back(predictions[i].score);
    report.groups.push_back(docs[i].label.value_or(0));
    grouped[report.groups.back()].push_back(predictions[i].score);
  }
  for (const auto& [group, values] : grouped) {
    GroupStats s;
    s.count = values.size();
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(s.count);
    double var = 0.0;
    for (double v : values) var += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(var / static_cast<double>(s.count));
    report.by_group[group] = s;
  }
  return report;
}

namespace {

struct WordPools {
  std::vector<std::string> easy, hard;
};

const WordPools& nouns() {
  static const WordPools p{
      {"cat", "dog", "bird", "fish", "ball", "cake", "milk", "hat", "bed", "box", "apple", "garden", "farm", "river",
       "lake", "hill", "boat", "train", "bus", "flower", "song", "horse", "cow", "duck", "egg", "bread", "cup",
       "shoe", "coat", "toy", "sun", "tree"},
      {"phenomenon", "meteorology", "infrastructure", "photosynthesis", "epistemology", "jurisprudence",
       "bureaucracy", "hypothesis", "equilibrium", "metamorphosis", "proliferation", "methodology", "paradigm",
       "consciousness", "ambiguity", "legislation", "constituency", "manifestation", "configuration",
       "interpretation", "circumstance", "deterioration", "accumulation", "articulation", "characteristic"}};
  return p;
}

const WordPools& verbs() {
  static const WordPools p{
      {"sees", "likes", "eats", "jumps", "sings", "plays", "runs", "shines", "wants", "starts", "changes", "saw",
       "ran", "ate", "played", "made", "took", "gave", "found"},
      {"characterize", "necessitate", "substantiate", "ameliorate", "disseminate", "extrapolate", "corroborate",
       "instantiate", "differentiate", "facilitate", "encompass", "exacerbate", "promulgate", "circumvent",
       "perpetuate", "consolidate", "reconcile", "scrutinize", "elucidate", "accommodate"}};
  return p;
}

const WordPools& adjectives() {
  static const WordPools p{
      {"big", "red", "blue", "green", "happy", "nice", "pretty", "hot", "cold", "warm", "soft", "kind", "funny",
       "sweet", "tall", "little", "good", "old"},
      {"sophisticated", "comprehensive", "hierarchical", "ubiquitous", "idiosyncratic", "heterogeneous",
       "indispensable", "unprecedented", "professional", "complicated", "ambiguous", "contemporary", "fundamental",
       "substantial", "theoretical", "empirical", "philosophical", "meteorological"}};
  return p;
}

const WordPools& adverbs() {
  static const WordPools p{{"very", "often", "always", "now", "still", "quickly", "slowly", "happily", "today"},
                           {"predominantly", "substantially", "approximately", "systematically", "inherently",
                            "considerably", "simultaneously", "subsequently", "fundamentally", "theoretically"}};
  return p;
}

const std::vector<std::string>& joiners() {
  static const std::vector<std::string> j = {"and", "but", "because", "so", "while", "although"};
  return j;
}

const std::string& pick(const std::vector<std::string>& pool, num::Rng& rng) { return pool[rng.below(pool.size())]; }

std::string slot(const WordPools& pools, double hard, num::Rng& rng) {
  return rng.uniform() < hard ? pick(pools.hard, rng) : pick(pools.easy, rng);
}

std::string clause(double hard, num::Rng& rng) {
  std::string c = "the ";
  if (rng.below(2)) c += slot(adjectives(), hard, rng) + " ";
  c += slot(nouns(), hard, rng) + " " + slot(verbs(), hard, rng) + " the ";
  if (rng.below(2)) c += slot(adjectives(), hard, rng) + " ";
  c += slot(nouns(), hard, rng);
  if (rng.below(3) == 0) c += " " + slot(adverbs(), hard, rng);
  return c;
}

}  // namespace

std::vector<SyntheticLevel> synthetic_levels(std::size_t levels) {
  if (levels < 2) throw std::invalid_argument("synthetic corpus: levels must be >= 2");
  std::vector<SyntheticLevel> out;
  for (std::size_t l = 1; l <= levels; ++l) {
    const double t = static_cast<double>(l - 1) / static_cast<double>(levels - 1);
    out.push_back({static_cast<int>(l), 0.05 + 0.45 * t, 1 + static_cast<std::size_t>(std::lround(3.0 * t))});
  }
  return out;
}

nlohmann::json synthetic_parameters(std::size_t levels, std::size_t docs_per_level, std::uint64_t seed) {
  nlohmann::json per_level = nlohmann::json::array();
  for (const auto& l : synthetic_levels(levels)) {
    per_level.push_back(
        {{"level", l.level}, {"hard_word_probability", l.hard_word_probability}, {"max_clauses", l.max_clauses}});
  }
  return {{"levels", levels},
          {"docs_per_level", docs_per_level},
          {"seed", seed},
          {"sentences_per_doc", {3, 6}},
          {"per_level", per_level}};
}

Corpus make_synthetic_corpus(std::size_t levels, std::size_t docs_per_level, std::uint64_t seed) {
  const auto spec = synthetic_levels(levels);
  Corpus corpus;
  corpus.name = "synthetic";
  corpus.class_count = levels;
  num::Rng rng(seed);
  for (const auto& level : spec) {
    for (std::size_t n = 0; n < docs_per_level; ++n) {
      std::string text;
      const std::size_t sentences = 3 + rng.below(4);
      for (std::size_t s = 0; s < sentences; ++s) {
        std::string sentence = clause(level.hard_word_probability, rng);
        const std::size_t clauses = 1 + rng.below(level.max_clauses);
        for (std::size_t c = 1; c < clauses; ++c) {
          sentence += (c == 1 ? ", " : " ") + pick(joiners(), rng) + " " + clause(level.hard_word_probability, rng);
        }
        sentence[0] = static_cast<char>(sentence[0] - 'a' + 'A');
        text += (text.empty() ? "" : " ") + sentence + ".";
      }
      char id[32];
      std::snprintf(id, sizeof id, "L%d-%03zu", level.level, n + 1);
      corpus.documents.push_back({id, text, level.level});
    }
  }
  return corpus;
}

}  // namespace readnet::harness
