#pragma once

#include <string>
#include <vector>

#include "readnet/readnet.hpp"

namespace readnet::testing {

inline const LexiconSet& lexicons() {
  static const LexiconSet lex = LexiconSet::load(READNET_LEXICON_DIR);
  return lex;
}

inline std::vector<TokenizedDocument> tokenize_all(const std::vector<std::string>& texts, int label = 1) {
  std::vector<TokenizedDocument> docs;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    docs.push_back(tokenize_document(RawDocument{"d" + std::to_string(i), texts[i], label}, lexicons()));
  }
  return docs;
}

inline ReadNet model_for(const std::vector<TokenizedDocument>& docs, const ModelConfig& config) {
  std::vector<std::vector<double>> sentence_rows, document_rows;
  for (const auto& doc : docs) {
    document_rows.push_back(to_vector(document_features(doc, lexicons())));
    for (const auto& s : doc.sentences) sentence_rows.push_back(to_vector(sentence_features(s)));
  }
  return ReadNet(config, embed::Vocabulary::build(docs), fit_feature_stats(sentence_rows),
                 fit_feature_stats(document_rows));
}

inline const std::vector<std::string>& sample_texts() {
  static const std::vector<std::string> texts = {
      "The cat sat. It was happy.",
      "A rainbow is an arc of colours. Scientists describe the phenomenon carefully. We like it.",
      "He ran home quickly because it rained. Then he slept.",
      "Sophisticated terminology complicates communication. However, readers persevere."};
  return texts;
}

/// A random document over the model vocabulary with `n` sentences of up to
/// `max_len` tokens and random normalized features.
inline EncodedDocument random_document(const ReadNet& model, num::Rng& rng, std::size_t n, std::size_t max_len) {
  EncodedDocument doc;
  doc.id = "random";
  doc.label = 1;
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<std::size_t> tokens(1 + rng.below(max_len));
    for (auto& t : tokens) t = 1 + rng.below(model.vocab().size() - 1);
    doc.sentences.push_back(tokens);
    std::vector<double> u(kSentenceFeatureCount);
    for (auto& x : u) x = rng.uniform(-1, 1);
    doc.u.push_back(u);
  }
  doc.v.resize(kDocumentFeatureCount);
  for (auto& x : doc.v) x = rng.uniform(-1, 1);
  return doc;
}

}  // namespace readnet::testing
