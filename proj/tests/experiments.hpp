#pragma once

// Desk-scale experiments shared by the acceptance suite.

#include <map>
#include <vector>

#include "readnet/harness.hpp"
#include "readnet/readnet.hpp"

namespace readnet::testing {

struct OverfitResult {
  double first_loss = 0.0;
  double last_loss = 0.0;
  double train_accuracy = 0.0;
  std::size_t epochs = 0;
};

/// 32 two-class synthetic documents, tiny model, up to 300 epochs.
inline OverfitResult overfit_experiment(const LexiconSet& lex, std::uint64_t seed) {
  const auto corpus = harness::make_synthetic_corpus(2, 16, seed);
  const auto docs = harness::tokenize_corpus(corpus, lex);
  auto config = ModelConfig::tiny();
  config.max_epochs = 300;
  config.seed = seed;
  std::vector<EpochLog> log;
  const auto model = fit_readnet(docs, lex, config, nullptr, &log);
  const auto encoded = model.prepare(docs, lex);
  const auto predictions = model.predict_all(encoded);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < encoded.size(); ++i) correct += predictions[i].label == encoded[i].label ? 1 : 0;
  return {log.front().loss, log.back().loss, static_cast<double>(correct) / static_cast<double>(encoded.size()),
          log.size()};
}

/// Keeps levels `low` and `high` of a synthetic corpus, relabelled 1 and 2.
inline std::vector<TokenizedDocument> binary_levels(const harness::Corpus& corpus, const LexiconSet& lex, int low,
                                                    int high) {
  harness::Corpus kept;
  for (const auto& d : corpus.documents) {
    if (d.label == low || d.label == high) kept.documents.push_back({d.id, d.text, d.label == low ? 1 : 2});
  }
  return harness::tokenize_corpus(kept, lex);
}

inline double accuracy(const ReadNet& model, const std::vector<TokenizedDocument>& docs, const LexiconSet& lex) {
  const auto encoded = model.prepare(docs, lex);
  const auto predictions = model.predict_all(encoded);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < encoded.size(); ++i) correct += predictions[i].label == encoded[i].label ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(encoded.size());
}

struct TransferResult {
  double pretrained_accuracy = 0.0;
  double random_accuracy = 0.0;
  bool frozen = true;  // every non-transfer parameter byte-identical after transfer
};

/// Pretrain a binary model on levels {1, 5}, then train only the transfer
/// layer on a 60-document 5-level target corpus. Target accuracy is pooled
/// over a 5-way rotation so every target document is held out once. The
/// control uses the same vocabulary and statistics with an untrained, frozen
/// encoder.
inline TransferResult transfer_experiment(const LexiconSet& lex, std::uint64_t seed) {
  auto config = ModelConfig::tiny();
  config.max_epochs = 60;
  config.seed = num::derive_seed(seed, 1);
  const auto source = binary_levels(harness::make_synthetic_corpus(5, 16, num::derive_seed(seed, 2)), lex, 1, 5);
  const auto pretrained = fit_readnet(source, lex, config);

  // Same vocabulary and feature statistics, encoder left at its random init.
  auto random_config = config;
  random_config.seed = num::derive_seed(seed, 5);
  const ReadNet random_encoder(random_config, pretrained.vocab(), pretrained.sentence_stats(),
                               pretrained.document_stats());

  const auto target = harness::tokenize_corpus(harness::make_synthetic_corpus(5, 12, num::derive_seed(seed, 3)), lex);

  TrainOptions options;
  options.epochs = 150;
  options.batch = 8;
  options.lr = 0.02;
  options.seed = num::derive_seed(seed, 4);

  TransferResult result;
  double hits_pretrained = 0.0, hits_random = 0.0;
  for (std::size_t fold = 0; fold < 5; ++fold) {
    std::vector<TokenizedDocument> train_docs, test_docs;
    for (std::size_t i = 0; i < target.size(); ++i) (i % 5 == fold ? test_docs : train_docs).push_back(target[i]);
    const auto n = static_cast<double>(test_docs.size());

    const auto tuned = transfer_train(pretrained, train_docs, lex, 5, options);
    hits_pretrained += accuracy(tuned, test_docs, lex) * n;
    for (const auto* p : pretrained.params().all()) {
      if (ReadNet::is_transfer_parameter(p->name)) continue;
      if (!(tuned.params().at(p->name).value == p->value)) result.frozen = false;
    }
    hits_random += accuracy(transfer_train(random_encoder, train_docs, lex, 5, options), test_docs, lex) * n;
  }
  result.pretrained_accuracy = hits_pretrained / static_cast<double>(target.size());
  result.random_accuracy = hits_random / static_cast<double>(target.size());
  return result;
}

/// Group-mean difficulty scores per level from a binary model trained on
/// levels {1, 5}, scored on a fresh 5-level corpus.
inline std::map<int, double> scoring_experiment(const LexiconSet& lex, std::uint64_t seed) {
  auto config = ModelConfig::tiny();
  config.max_epochs = 60;
  config.seed = num::derive_seed(seed, 1);
  const auto train_docs = binary_levels(harness::make_synthetic_corpus(5, 16, num::derive_seed(seed, 2)), lex, 1, 5);
  const auto model = fit_readnet(train_docs, lex, config);
  const auto held_out = harness::make_synthetic_corpus(5, 16, num::derive_seed(seed, 3));
  const auto report = harness::score_documents(model, held_out.documents, lex);
  std::map<int, double> means;
  for (const auto& [group, stats] : report.by_group) means[group] = stats.mean;
  return means;
}

}  // namespace readnet::testing
