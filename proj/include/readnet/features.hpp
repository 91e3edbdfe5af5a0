#pragma once

#include <array>
#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "readnet/textproc.hpp"

namespace readnet {

inline constexpr std::size_t kSentenceFeatureCount = 6;
inline constexpr std::size_t kReadabilityIndexCount = 9;
inline constexpr std::size_t kCohesionFeatureCount = 13;
inline constexpr std::size_t kDocumentFeatureCount = kReadabilityIndexCount + kCohesionFeatureCount;

using SentenceFeatureVector = std::array<double, kSentenceFeatureCount>;
using ReadabilityIndices = std::array<double, kReadabilityIndexCount>;
using CohesionFeatures = std::array<double, kCohesionFeatureCount>;
using DocumentFeatureVector = std::array<double, kDocumentFeatureCount>;

inline constexpr std::array<std::string_view, kSentenceFeatureCount> kSentenceFeatureNames = {
    "chars_per_word", "syllables_per_word", "n_words", "n_long_words", "n_difficult_words", "n_pronouns"};

inline constexpr std::array<std::string_view, kDocumentFeatureCount> kDocumentFeatureNames = {
    "flesch_reading_ease", "flesch_kincaid_grade", "automated_readability_index", "coleman_liau",
    "gunning_fog", "lix", "rix", "smog", "dale_chall",
    "conn_additive", "conn_logic", "conn_temporal", "conn_causal", "conn_negative",
    "logic_operator_connectivity", "lexical_diversity", "content_diversity",
    "inc_adjective", "inc_noun", "inc_verb", "inc_adverb", "inc_pronoun"};

/// Raw counts behind the document-level formulas.
struct DocumentCounts {
  std::size_t n_sentences = 0;
  std::size_t n_words = 0;
  std::size_t n_letters = 0;
  std::size_t n_syllables = 0;
  std::size_t n_long_words = 0;
  std::size_t n_difficult_words = 0;
  std::size_t n_complex_words = 0;   // syllables >= 3 (Gunning Fog)
  std::size_t n_polysyllables = 0;   // syllables >= 3 (SMOG)
  std::size_t n_unique_words = 0;
  std::size_t n_content_words = 0;
  std::array<std::size_t, kConnectiveKinds> connectives{};
  std::size_t n_logic_operators = 0;
  std::size_t n_adjectives = 0;
  std::size_t n_nouns = 0;
  std::size_t n_verbs = 0;
  std::size_t n_adverbs = 0;
  std::size_t n_pronouns = 0;
};

SentenceFeatureVector sentence_features(std::span<const Token> sentence);

DocumentCounts document_counts(const TokenizedDocument& doc, const LexiconSet& lexicons);

/// FRE, FKGL, ARI, Coleman-Liau, Gunning Fog, LIX, RIX, SMOG, Dale-Chall.
ReadabilityIndices readability_indices(const DocumentCounts& c);

/// Five connective incidences, logic-operator connectivity, lexical and
/// content diversity, five part-of-speech incidences. Incidences are per
/// 1000 words.
CohesionFeatures cohesion_and_diversity(const DocumentCounts& c);

DocumentFeatureVector document_features(const TokenizedDocument& doc, const LexiconSet& lexicons);

/// Per-document features for a whole corpus.
struct FeatureTable {
  std::vector<std::string> ids;
  std::vector<DocumentFeatureVector> documents;
  std::vector<std::vector<SentenceFeatureVector>> sentences;
};

/// Tokenizes and featurizes documents in parallel (one OpenMP task per
/// document). Output order and values match extract_features_reference.
FeatureTable extract_features(std::span<const RawDocument> docs, const LexiconSet& lexicons);
FeatureTable extract_features_reference(std::span<const RawDocument> docs, const LexiconSet& lexicons);

/// z-score statistics per dimension (population standard deviation).
struct FeatureStats {
  std::vector<double> mean;
  std::vector<double> stddev;

  bool fitted() const { return !mean.empty(); }
  std::size_t dims() const { return mean.size(); }
};

FeatureStats fit_feature_stats(std::span<const std::vector<double>> rows);

/// (x - mean) / stddev per dimension; zero-variance dimensions pass through
/// unchanged. Throws if `stats` is unfitted or the width differs.
std::vector<double> normalize_features(std::span<const double> row, const FeatureStats& stats);
std::vector<std::vector<double>> normalize_features(std::span<const std::vector<double>> rows,
                                                    const FeatureStats& stats);

template <std::size_t N>
std::vector<double> to_vector(const std::array<double, N>& a) {
  return std::vector<double>(a.begin(), a.end());
}

/// Header of the 22 canonical names (prefixed by "id"), values with 6 decimals.
void write_document_csv(std::ostream& out, const FeatureTable& table);
/// id, sentence index, then the 6 sentence-level features.
void write_sentence_csv(std::ostream& out, const FeatureTable& table);

}  // namespace readnet
