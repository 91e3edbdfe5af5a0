#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "readnet/embed.hpp"
#include "readnet/features.hpp"
#include "readnet/harness.hpp"
#include "readnet/readnet.hpp"

namespace {

using namespace readnet;
using nlohmann::json;

constexpr int kUsageError = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

// Writes to `path`, or to stdout when the path is empty or "-".
template <typename F>
void emit(const std::string& path, F&& write) {
  if (path.empty() || path == "-") {
    write(std::cout);
    std::cout.flush();
    return;
  }
  auto out = open_out(path);
  write(out);
  if (!out) throw std::runtime_error("error writing " + path);
}

struct Common {
  std::string lexicon_dir;
  std::uint64_t seed = 1;

  LexiconSet lexicons() const {
    return LexiconSet::load(lexicon_dir.empty() ? LexiconSet::default_directory() : std::filesystem::path(lexicon_dir));
  }
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--lexicon-dir", c.lexicon_dir, "Lexicon directory (default: $READNET_LEXICON_DIR or built-in)");
  cmd->add_option("--seed", c.seed, "Random seed");
}

// Model hyperparameters. Values given on the command line override the
// config file, which overrides the preset.
struct ModelFlags {
  bool tiny = false;
  std::string config_file;
  std::size_t m_words = 0, n_sentences = 0, d = 0, h = 0, p = 0, q = 0, d_ff = 0, batch = 0, epochs = 0;
  double lr = 0.0;
  bool residual = false, softmax_scores = false, no_positional = false;
  CLI::App* cmd = nullptr;

  bool given(const char* name) const { return cmd->count(name) > 0; }

  ModelConfig resolve(std::size_t classes, std::uint64_t seed) const {
    ModelConfig c = tiny ? ModelConfig::tiny() : ModelConfig{};
    if (!config_file.empty()) {
      std::ifstream in(config_file);
      if (!in) throw std::runtime_error("cannot read " + config_file);
      json j = to_json(c);
      j.update(json::parse(in));
      c = model_config_from_json(j);
    }
    if (given("--m-words")) c.m_words = m_words;
    if (given("--n-sentences")) c.n_sentences = n_sentences;
    if (given("--d")) c.d = d;
    if (given("--heads")) c.h = h;
    if (given("--p")) c.p = p;
    if (given("--q")) c.q = q;
    if (given("--d-ff")) c.d_ff = d_ff;
    if (given("--batch")) c.batch = batch;
    if (given("--epochs")) c.max_epochs = epochs;
    if (given("--lr")) c.lr = lr;
    if (residual) c.residual = true;
    if (softmax_scores) c.softmax_scores = true;
    if (no_positional) c.positional = false;
    c.num_classes = classes;
    c.seed = seed;
    try {
      c.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    return c;
  }
};

void add_model_flags(CLI::App* cmd, ModelFlags& f) {
  f.cmd = cmd;
  cmd->add_flag("--tiny", f.tiny, "Start from the small test configuration");
  cmd->add_option("--config", f.config_file, "JSON model config; command-line flags win")->check(CLI::ExistingFile);
  cmd->add_option("--m-words", f.m_words, "Tokens per sentence");
  cmd->add_option("--n-sentences", f.n_sentences, "Sentences per document");
  cmd->add_option("--d", f.d, "Word embedding width");
  cmd->add_option("--heads", f.h, "Attention heads");
  cmd->add_option("--p", f.p, "Sentence encoder layers");
  cmd->add_option("--q", f.q, "Document encoder layers");
  cmd->add_option("--d-ff", f.d_ff, "Feed-forward width (0: layer width)");
  cmd->add_option("--batch", f.batch, "Mini-batch size");
  cmd->add_option("--epochs", f.epochs, "Training epochs");
  cmd->add_option("--lr", f.lr, "Adam learning rate");
  cmd->add_flag("--residual", f.residual, "Residual connections around sublayers");
  cmd->add_flag("--softmax-scores", f.softmax_scores, "Softmax over the ordinal scores");
  cmd->add_flag("--no-positional", f.no_positional, "Disable positional encodings");
}

std::vector<TokenizedDocument> labelled(const harness::Corpus& corpus, const LexiconSet& lex) {
  for (const auto& d : corpus.documents) {
    if (!d.label) throw std::runtime_error(corpus.name + ": document '" + d.id + "' has no label");
  }
  return harness::tokenize_corpus(corpus, lex);
}

std::vector<std::vector<std::string>> corpus_sentences(std::span<const TokenizedDocument> docs) {
  std::vector<std::vector<std::string>> out;
  for (const auto& d : docs) {
    for (const auto& s : d.sentences) {
      auto& words = out.emplace_back();
      for (const auto& t : s) words.push_back(t.normalized);
    }
  }
  return out;
}

void write_epoch_log(const std::string& path, const std::vector<EpochLog>& logs) {
  if (path.empty()) return;
  emit(path, [&](std::ostream& out) {
    for (const auto& e : logs) out << json{{"epoch", e.epoch}, {"loss", e.loss}, {"train_acc", e.train_acc}}.dump() << '\n';
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Readability assessment: features, embeddings, training and evaluation"};
  app.require_subcommand(1);
  app.fallthrough(false);

  Common common;

  // features
  auto* features = app.add_subcommand("features", "Document features of a JSONL corpus as CSV");
  std::string corpus_path, out_path, sentence_out;
  features->add_option("corpus", corpus_path, "Input JSONL corpus")->required()->check(CLI::ExistingFile);
  features->add_option("-o,--out", out_path, "Document CSV (default stdout)");
  features->add_option("--sentences", sentence_out, "Also write per-sentence features to this CSV");
  features->add_option("--lexicon-dir", common.lexicon_dir, "Lexicon directory");

  // vocab
  auto* vocab = app.add_subcommand("vocab", "Ranked vocabulary with difficulty scores as TSV");
  vocab->add_option("corpus", corpus_path, "Input JSONL corpus")->required()->check(CLI::ExistingFile);
  vocab->add_option("-o,--out", out_path, "Output TSV (default stdout)");
  vocab->add_option("--lexicon-dir", common.lexicon_dir, "Lexicon directory");

  // embed
  auto* embed_cmd = app.add_subcommand("embed", "Train skip-gram word embeddings");
  embed::EmbedConfig ecfg;
  bool aware = false;
  std::string query, embed_log;
  std::size_t top_n = 10;
  embed_cmd->add_option("corpus", corpus_path, "Input JSONL corpus")->required()->check(CLI::ExistingFile);
  embed_cmd->add_option("-o,--out", out_path, "Embedding file")->required();
  embed_cmd->add_flag("--readability-aware", aware, "Weight the loss by word difficulty");
  embed_cmd->add_option("--dim", ecfg.dim, "Vector width");
  embed_cmd->add_option("--window", ecfg.window, "Context window");
  embed_cmd->add_option("--negatives", ecfg.negatives, "Negative samples per pair");
  embed_cmd->add_option("--epochs", ecfg.epochs, "Passes over the corpus");
  embed_cmd->add_option("--lr", ecfg.lr, "SGD learning rate");
  embed_cmd->add_option("--log", embed_log, "Per-epoch JSON lines");
  embed_cmd->add_option("--neighbors", query, "Print nearest neighbours of this word after training");
  embed_cmd->add_option("--top", top_n, "Neighbours to print");
  add_common(embed_cmd, common);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
  ModelFlags train_flags;
  std::size_t classes = 0;
  std::string embeddings_path, log_path;
  train_cmd->add_option("corpus", corpus_path, "Labelled JSONL corpus")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("-o,--out", out_path, "Checkpoint path")->required();
  train_cmd->add_option("--classes", classes, "Number of classes (default: largest label)");
  train_cmd->add_option("--embeddings", embeddings_path, "Initial word vectors")->check(CLI::ExistingFile);
  train_cmd->add_option("--log", log_path, "Per-epoch JSON lines");
  add_model_flags(train_cmd, train_flags);
  add_common(train_cmd, common);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "k-fold cross validation");
  ModelFlags eval_flags;
  std::string model_kind = "readnet", json_out;
  std::size_t folds = 5;
  bool stratify = false;
  int jobs = 0;
  eval_cmd->add_option("corpus", corpus_path, "Labelled JSONL corpus")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--classes", classes, "Number of classes (default: largest label)");
  eval_cmd->add_option("--model", model_kind, "readnet, logistic or majority")
      ->check(CLI::IsMember({"readnet", "logistic", "majority"}));
  eval_cmd->add_option("-k,--folds", folds, "Number of folds");
  eval_cmd->add_flag("--stratify", stratify, "Stratify folds by class");
  eval_cmd->add_option("--jobs", jobs, "Parallel fold jobs (0: OpenMP default)");
  eval_cmd->add_option("--json", json_out, "Write the report as JSON here");
  add_model_flags(eval_cmd, eval_flags);
  add_common(eval_cmd, common);

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "Predict classes with a checkpoint");
  std::string checkpoint;
  predict_cmd->add_option("--model", checkpoint, "Checkpoint")->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("corpus", corpus_path, "JSONL corpus")->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("-o,--out", out_path, "JSON lines output (default stdout)");
  predict_cmd->add_option("--lexicon-dir", common.lexicon_dir, "Lexicon directory");

  // transfer
  auto* transfer_cmd = app.add_subcommand("transfer", "Train only the transfer layer of a pretrained model");
  std::size_t t_epochs = 300, t_batch = 32;
  double t_lr = 0.001;
  transfer_cmd->add_option("--from", checkpoint, "Pretrained checkpoint")->required()->check(CLI::ExistingFile);
  transfer_cmd->add_option("--corpus", corpus_path, "Labelled target corpus")->required()->check(CLI::ExistingFile);
  transfer_cmd->add_option("-o,--out", out_path, "Output checkpoint")->required();
  transfer_cmd->add_option("--classes", classes, "Target classes (default: largest label)");
  transfer_cmd->add_option("--epochs", t_epochs, "Training epochs");
  transfer_cmd->add_option("--batch", t_batch, "Mini-batch size");
  transfer_cmd->add_option("--lr", t_lr, "Adam learning rate");
  transfer_cmd->add_option("--log", log_path, "Per-epoch JSON lines");
  add_common(transfer_cmd, common);

  // score
  auto* score_cmd = app.add_subcommand("score", "Difficulty scores from a binary checkpoint");
  score_cmd->add_option("--model", checkpoint, "Binary checkpoint")->required()->check(CLI::ExistingFile);
  score_cmd->add_option("corpus", corpus_path, "JSONL corpus; labels are used as level tags")
      ->required()
      ->check(CLI::ExistingFile);
  score_cmd->add_option("-o,--out", out_path, "JSON output (default stdout)");
  score_cmd->add_option("--lexicon-dir", common.lexicon_dir, "Lexicon directory");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic graded corpus");
  std::size_t levels = 5, per_level = 20;
  std::string params_out;
  synth_cmd->add_option("-o,--out", out_path, "JSONL corpus (default stdout)");
  synth_cmd->add_option("--levels", levels, "Difficulty levels");
  synth_cmd->add_option("--per-level", per_level, "Documents per level");
  synth_cmd->add_option("--params", params_out, "Write generative parameters as JSON here");
  synth_cmd->add_option("--seed", common.seed, "Random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    if (app.get_subcommands().empty()) std::cerr << app.help();
    return kUsageError;
  }

  const auto class_count = [&]() -> std::optional<std::size_t> {
    return classes > 0 ? std::optional<std::size_t>(classes) : std::nullopt;
  };

  try {
    if (*features) {
      const auto lex = common.lexicons();
      const auto corpus = harness::load_corpus(corpus_path);
      const auto table = extract_features(corpus.documents, lex);
      emit(out_path, [&](std::ostream& out) { write_document_csv(out, table); });
      if (!sentence_out.empty()) emit(sentence_out, [&](std::ostream& out) { write_sentence_csv(out, table); });
    } else if (*vocab) {
      const auto lex = common.lexicons();
      const auto docs = harness::tokenize_corpus(harness::load_corpus(corpus_path), lex);
      const auto v = embed::Vocabulary::build(docs);
      emit(out_path, [&](std::ostream& out) {
        out << "index\tword\tfrequency\tdifficulty\n";
        for (std::size_t i = 0; i < v.size(); ++i) {
          const auto& e = v.entry(i);
          char buf[32];
          std::snprintf(buf, sizeof buf, "%.6f", e.difficulty);
          out << i << '\t' << e.word << '\t' << e.frequency << '\t' << buf << '\n';
        }
      });
    } else if (*embed_cmd) {
      ecfg.readability_aware = aware;
      ecfg.seed = common.seed;
      try {
        ecfg.validate();
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      const auto lex = common.lexicons();
      const auto docs = harness::tokenize_corpus(harness::load_corpus(corpus_path), lex);
      const auto sentences = corpus_sentences(docs);
      const auto v = embed::Vocabulary::build(sentences);
      std::vector<embed::EmbedEpochLog> logs;
      const auto table = embed::train_embeddings(embed::encode_corpus(sentences, v), v, ecfg, &logs);
      embed::write_embedding_file(out_path, v, table);
      if (!embed_log.empty()) {
        emit(embed_log, [&](std::ostream& out) {
          for (const auto& e : logs) {
            out << json{{"epoch", e.epoch}, {"pairs", e.pairs}, {"loss", e.mean_loss}}.dump() << '\n';
          }
        });
      }
      if (!query.empty()) {
        for (const auto& [word, sim] : embed::nearest_neighbors(query, v, table, top_n)) {
          std::printf("%s\t%.6f\n", word.c_str(), sim);
        }
      }
    } else if (*train_cmd) {
      const auto lex = common.lexicons();
      const auto corpus = harness::load_corpus(corpus_path, class_count());
      const auto docs = labelled(corpus, lex);
      const auto config = train_flags.resolve(corpus.class_count, common.seed);
      std::optional<embed::LoadedEmbeddings> vectors;
      if (!embeddings_path.empty()) vectors = embed::read_embedding_file(embeddings_path);
      std::vector<EpochLog> logs;
      const auto model = fit_readnet(docs, lex, config, vectors ? &*vectors : nullptr, &logs);
      model.save(std::filesystem::path(out_path));
      write_epoch_log(log_path, logs);
    } else if (*eval_cmd) {
      const auto lex = common.lexicons();
      const auto corpus = harness::load_corpus(corpus_path, class_count());
      harness::EvalConfig config;
      config.kind = harness::parse_model_kind(model_kind);
      config.k = folds;
      config.seed = common.seed;
      config.stratify = stratify;
      config.jobs = jobs;
      config.model = eval_flags.resolve(corpus.class_count, common.seed);
      const auto report = harness::cross_validate(corpus, lex, config);
      std::cout << report.to_table();
      if (!json_out.empty()) emit(json_out, [&](std::ostream& out) { out << report.to_json().dump(2) << '\n'; });
    } else if (*predict_cmd) {
      const auto lex = common.lexicons();
      const auto model = ReadNet::load(std::filesystem::path(checkpoint));
      const auto corpus = harness::load_corpus(corpus_path);
      const auto encoded = model.prepare(harness::tokenize_corpus(corpus, lex), lex);
      const auto predictions = model.predict_all(encoded);
      emit(out_path, [&](std::ostream& out) {
        for (std::size_t i = 0; i < predictions.size(); ++i) {
          json row{{"id", corpus.documents[i].id}, {"label", predictions[i].label}, {"r", predictions[i].r}};
          if (model.config().num_classes == 2) row["score"] = predictions[i].score;
          out << row.dump() << '\n';
        }
      });
    } else if (*transfer_cmd) {
      const auto lex = common.lexicons();
      const auto base = ReadNet::load(std::filesystem::path(checkpoint));
      const auto corpus = harness::load_corpus(corpus_path, class_count());
      const auto docs = labelled(corpus, lex);
      TrainOptions options;
      options.epochs = t_epochs;
      options.batch = t_batch;
      options.lr = t_lr;
      options.seed = common.seed;
      std::vector<EpochLog> logs;
      const auto tuned = transfer_train(base, docs, lex, corpus.class_count, options, &logs);
      tuned.save(std::filesystem::path(out_path));
      write_epoch_log(log_path, logs);
    } else if (*score_cmd) {
      const auto lex = common.lexicons();
      const auto model = ReadNet::load(std::filesystem::path(checkpoint));
      const auto corpus = harness::load_corpus(corpus_path);
      const auto report = harness::score_documents(model, corpus.documents, lex);
      emit(out_path, [&](std::ostream& out) { out << report.to_json().dump(2) << '\n'; });
    } else if (*synth_cmd) {
      if (levels < 2 || per_level == 0) throw UsageError("--levels must be at least 2 and --per-level positive");
      const auto corpus = harness::make_synthetic_corpus(levels, per_level, common.seed);
      emit(out_path, [&](std::ostream& out) { harness::write_corpus(out, corpus); });
      if (!params_out.empty()) {
        emit(params_out, [&](std::ostream& out) {
          out << harness::synthetic_parameters(levels, per_level, common.seed).dump(2) << '\n';
        });
      }
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
