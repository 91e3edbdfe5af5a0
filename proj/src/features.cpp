#include "readnet/features.hpp"

#include <cmath>
#include <cstdio>
#include <optional>
#include <set>
#include <stdexcept>

namespace readnet {

SentenceFeatureVector sentence_features(std::span<const Token> sentence) {
  if (sentence.empty()) throw std::invalid_argument("sentence_features: empty sentence");
  double chars = 0, syllables = 0, longs = 0, difficult = 0, pronouns = 0;
  for (const auto& t : sentence) {
    chars += t.char_count;
    syllables += t.syllable_count;
    longs += t.is_long ? 1 : 0;
    difficult += t.is_difficult ? 1 : 0;
    pronouns += t.pos == PosTag::kPronoun ? 1 : 0;
  }
  const double n = static_cast<double>(sentence.size());
  return {chars / n, syllables / n, n, longs, difficult, pronouns};
}

DocumentCounts document_counts(const TokenizedDocument& doc, const LexiconSet& lexicons) {
  if (doc.sentences.empty()) throw std::invalid_argument("document_counts: document '" + doc.id + "' has no sentences");
  DocumentCounts c;
  std::set<std::string> unique;
  for (const auto& sentence : doc.sentences) {
    ++c.n_sentences;
    for (std::size_t k = 0; k < kConnectiveKinds; ++k) {
      c.connectives[k] += count_phrase_matches(sentence, lexicons.connectives[k]);
    }
    c.n_logic_operators += count_phrase_matches(sentence, lexicons.logic_operators);
    for (const auto& t : sentence) {
      ++c.n_words;
      c.n_letters += static_cast<std::size_t>(t.char_count);
      c.n_syllables += static_cast<std::size_t>(t.syllable_count);
      c.n_long_words += t.is_long ? 1 : 0;
      c.n_difficult_words += t.is_difficult ? 1 : 0;
      if (t.syllable_count >= 3) {
        ++c.n_complex_words;
        ++c.n_polysyllables;
      }
      unique.insert(t.normalized);
      switch (t.pos) {
        case PosTag::kAdjective: ++c.n_adjectives; ++c.n_content_words; break;
        case PosTag::kNoun: ++c.n_nouns; ++c.n_content_words; break;
        case PosTag::kVerb: ++c.n_verbs; ++c.n_content_words; break;
        case PosTag::kAdverb: ++c.n_adverbs; ++c.n_content_words; break;
        case PosTag::kPronoun: ++c.n_pronouns; break;
        case PosTag::kOther: break;
      }
    }
  }
  c.n_unique_words = unique.size();
  return c;
}

ReadabilityIndices readability_indices(const DocumentCounts& c) {
  if (c.n_words == 0 || c.n_sentences == 0) {
    throw std::invalid_argument("readability_indices: need at least one word and one sentence");
  }
  const double words = static_cast<double>(c.n_words);
  const double sentences = static_cast<double>(c.n_sentences);
  const double words_per_sentence = words / sentences;
  const double syllables_per_word = static_cast<double>(c.n_syllables) / words;
  const double letters_per_word = static_cast<double>(c.n_letters) / words;
  const double long_ratio = static_cast<double>(c.n_long_words) / words;

  const double fre = 206.835 - 1.015 * words_per_sentence - 84.6 * syllables_per_word;
  const double fkgl = 0.39 * words_per_sentence + 11.8 * syllables_per_word - 15.59;
  const double ari = 4.71 * letters_per_word + 0.5 * words_per_sentence - 21.43;
  // Printed form: both ratios per 100 words, both terms added, no constant.
  const double coleman_liau = 0.0588 * (letters_per_word * 100.0) + 0.296 * (sentences / words) * 100.0;
  const double fog = 0.4 * (words_per_sentence + 100.0 * static_cast<double>(c.n_complex_words) / words);
  // Printed form: long-word ratio without the conventional x100.
  const double lix = long_ratio + words_per_sentence;
  const double rix = static_cast<double>(c.n_long_words) / sentences;
  const double smog = 1.0430 * std::sqrt(static_cast<double>(c.n_polysyllables) * (30.0 / sentences)) + 3.1291;
  const double dale_chall =
      0.1579 * (static_cast<double>(c.n_difficult_words) / words) * 100.0 + 0.0496 * words_per_sentence;
  return {fre, fkgl, ari, coleman_liau, fog, lix, rix, smog, dale_chall};
}

CohesionFeatures cohesion_and_diversity(const DocumentCounts& c) {
  if (c.n_words == 0) throw std::invalid_argument("cohesion_and_diversity: need at least one word");
  const double words = static_cast<double>(c.n_words);
  auto incidence = [words](std::size_t count) { return 1000.0 * static_cast<double>(count) / words; };
  return {incidence(c.connectives[0]),
          incidence(c.connectives[1]),
          incidence(c.connectives[2]),
          incidence(c.connectives[3]),
          incidence(c.connectives[4]),
          incidence(c.n_logic_operators),
          static_cast<double>(c.n_unique_words) / words,
          static_cast<double>(c.n_content_words) / words,
          incidence(c.n_adjectives),
          incidence(c.n_nouns),
          incidence(c.n_verbs),
          incidence(c.n_adverbs),
          incidence(c.n_pronouns)};
}

DocumentFeatureVector document_features(const TokenizedDocument& doc, const LexiconSet& lexicons) {
  const auto counts = document_counts(doc, lexicons);
  const auto indices = readability_indices(counts);
  const auto cohesion = cohesion_and_diversity(counts);
  DocumentFeatureVector out{};
  std::copy(indices.begin(), indices.end(), out.begin());
  std::copy(cohesion.begin(), cohesion.end(), out.begin() + kReadabilityIndexCount);
  return out;
}

namespace {

struct Featurized {
  DocumentFeatureVector document{};
  std::vector<SentenceFeatureVector> sentences;
};

Featurized featurize_one(const RawDocument& raw, const LexiconSet& lexicons) {
  const auto doc = tokenize_document(raw, lexicons);
  Featurized f;
  f.document = document_features(doc, lexicons);
  for (const auto& s : doc.sentences) f.sentences.push_back(sentence_features(s));
  return f;
}

FeatureTable assemble(std::span<const RawDocument> docs, std::vector<Featurized>& parts) {
  FeatureTable table;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    table.ids.push_back(docs[i].id);
    table.documents.push_back(parts[i].document);
    table.sentences.push_back(std::move(parts[i].sentences));
  }
  return table;
}

}  // namespace

FeatureTable extract_features(std::span<const RawDocument> docs, const LexiconSet& lexicons) {
  std::vector<Featurized> parts(docs.size());
  std::vector<std::optional<std::string>> errors(docs.size());
  const long n = static_cast<long>(docs.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (long i = 0; i < n; ++i) {
    try {
      parts[i] = featurize_one(docs[i], lexicons);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (errors[i]) throw std::runtime_error("document '" + docs[i].id + "': " + *errors[i]);
  }
  return assemble(docs, parts);
}

FeatureTable extract_features_reference(std::span<const RawDocument> docs, const LexiconSet& lexicons) {
  std::vector<Featurized> parts;
  for (const auto& d : docs) {
    try {
      parts.push_back(featurize_one(d, lexicons));
    } catch (const std::exception& e) {
      throw std::runtime_error("document '" + d.id + "': " + e.what());
    }
  }
  return assemble(docs, parts);
}

FeatureStats fit_feature_stats(std::span<const std::vector<double>> rows) {
  if (rows.empty()) throw std::invalid_argument("fit_feature_stats: no rows");
  const auto dims = rows.front().size();
  FeatureStats stats{std::vector<double>(dims, 0.0), std::vector<double>(dims, 0.0)};
  for (const auto& r : rows) {
    if (r.size() != dims) throw std::invalid_argument("fit_feature_stats: ragged rows");
    for (std::size_t j = 0; j < dims; ++j) stats.mean[j] += r[j];
  }
  const double n = static_cast<double>(rows.size());
  for (auto& m : stats.mean) m /= n;
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < dims; ++j) {
      const double d = r[j] - stats.mean[j];
      stats.stddev[j] += d * d;
    }
  }
  for (auto& s : stats.stddev) s = std::sqrt(s / n);
  return stats;
}

std::vector<double> normalize_features(std::span<const double> row, const FeatureStats& stats) {
  if (!stats.fitted()) throw std::logic_error("normalize_features: statistics not fitted");
  if (row.size() != stats.dims()) {
    throw std::invalid_argument("normalize_features: width " + std::to_string(row.size()) + " vs stats " +
                                std::to_string(stats.dims()));
  }
  std::vector<double> out(row.begin(), row.end());
  for (std::size_t j = 0; j < out.size(); ++j) {
    if (stats.stddev[j] > 0.0) out[j] = (out[j] - stats.mean[j]) / stats.stddev[j];
  }
  return out;
}

std::vector<std::vector<double>> normalize_features(std::span<const std::vector<double>> rows,
                                                    const FeatureStats& stats) {
  std::vector<std::vector<double>> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(normalize_features(r, stats));
  return out;
}

namespace {

void write_value(std::ostream& out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  out << buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

}  // namespace

void write_document_csv(std::ostream& out, const FeatureTable& table) {
  out << "id";
  for (auto name : kDocumentFeatureNames) out << ',' << name;
  out << '\n';
  for (std::size_t i = 0; i < table.documents.size(); ++i) {
    out << csv_field(table.ids[i]);
    for (double v : table.documents[i]) {
      out << ',';
      write_value(out, v);
    }
    out << '\n';
  }
}

void write_sentence_csv(std::ostream& out, const FeatureTable& table) {
  out << "id,sentence";
  for (auto name : kSentenceFeatureNames) out << ',' << name;
  out << '\n';
  for (std::size_t i = 0; i < table.sentences.size(); ++i) {
    for (std::size_t s = 0; s < table.sentences[i].size(); ++s) {
      out << csv_field(table.ids[i]) << ',' << s;
      for (double v : table.sentences[i][s]) {
        out << ',';
        write_value(out, v);
      }
      out << '\n';
    }
  }
}

}  // namespace readnet
