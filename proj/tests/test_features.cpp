#include <omp.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "readnet/features.hpp"
#include "readnet/num/rng.hpp"

using namespace readnet;

namespace {

const LexiconSet& lexicons() {
  static const LexiconSet lex = LexiconSet::load(READNET_LEXICON_DIR);
  return lex;
}

TokenizedDocument doc_of(const std::string& text) {
  return tokenize_document(RawDocument{"doc", text, std::nullopt}, lexicons());
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("sentence features") {
  const auto cat = doc_of("The cat sat");
  const auto u = sentence_features(cat.sentences[0]);
  CHECK(u == SentenceFeatureVector{3.0, 1.0, 3, 0, 0, 0});
  const auto i = doc_of("I");
  CHECK(sentence_features(i.sentences[0]) == SentenceFeatureVector{1.0, 1.0, 1, 0, 0, 1});
  CHECK_THROWS_AS(sentence_features(std::span<const Token>{}), std::invalid_argument);

  num::Rng rng(8);
  auto tokens = doc_of("Extraordinary people rarely understand marionette theatre").sentences[0];
  const auto before = sentence_features(tokens);
  for (int k = 0; k < 10; ++k) {
    rng.shuffle(tokens.begin(), tokens.end());
    CHECK(sentence_features(tokens) == before);
  }
}

TEST_CASE("document counts") {
  const auto c = document_counts(doc_of("The cat sat"), lexicons());
  CHECK(c.n_sentences == 1);
  CHECK(c.n_words == 3);
  CHECK(c.n_letters == 9);
  CHECK(c.n_syllables == 3);

  const auto one = document_counts(doc_of("a"), lexicons());
  CHECK(one.n_words == 1);
  CHECK(one.n_letters == 1);

  const std::string text = "A rainbow is an arc. Because it rains, we see colours and light.";
  const auto single = document_counts(doc_of(text), lexicons());
  const auto twice = document_counts(doc_of(text + " " + text), lexicons());
  CHECK(twice.n_sentences == 2 * single.n_sentences);
  CHECK(twice.n_words == 2 * single.n_words);
  CHECK(twice.n_letters == 2 * single.n_letters);
  CHECK(twice.n_syllables == 2 * single.n_syllables);
  CHECK(twice.n_long_words == 2 * single.n_long_words);
  CHECK(twice.n_difficult_words == 2 * single.n_difficult_words);
  CHECK(twice.n_polysyllables == 2 * single.n_polysyllables);
  CHECK(twice.n_content_words == 2 * single.n_content_words);
  CHECK(twice.connectives == decltype(single.connectives){2 * single.connectives[0], 2 * single.connectives[1],
                                                          2 * single.connectives[2], 2 * single.connectives[3],
                                                          2 * single.connectives[4]});
  CHECK(twice.n_unique_words == single.n_unique_words);

  CHECK_THROWS_AS(document_counts(TokenizedDocument{"empty", {}, std::nullopt}, lexicons()), std::invalid_argument);
}

TEST_CASE("readability indices on hand-computed counts") {
  DocumentCounts c;
  c.n_words = 3;
  c.n_sentences = 1;
  c.n_syllables = 3;
  const auto idx = readability_indices(c);
  CHECK(std::abs(idx[0] - 119.19) < 1e-9);
  CHECK(std::abs(idx[1] - (-2.62)) < 1e-9);
  CHECK(std::abs(idx[7] - 3.1291) < 1e-9);

  DocumentCounts empty;
  CHECK_THROWS_AS(readability_indices(empty), std::invalid_argument);
}

TEST_CASE("cohesion and diversity") {
  DocumentCounts c;
  c.n_words = 4;
  c.n_sentences = 1;
  c.n_nouns = 2;
  c.n_unique_words = 4;
  c.n_content_words = 2;
  const auto f = cohesion_and_diversity(c);
  for (std::size_t k = 0; k < 5; ++k) CHECK(f[k] == 0.0);
  CHECK(f[6] == 1.0);
  CHECK(f[9] == 500.0);
}

TEST_CASE("fixture documents match the frozen oracle to 1e-9") {
  const std::filesystem::path dir = READNET_FIXTURE_DIR;
  const auto oracle = nlohmann::json::parse(read_file(dir / "features_oracle.json"));
  REQUIRE(oracle.size() >= 5);
  for (const auto& [name, expected] : oracle.items()) {
    CAPTURE(name);
    const auto doc = doc_of(read_file(dir / "texts" / name));
    const auto counts = document_counts(doc, lexicons());
    CHECK(counts.n_words == expected["counts"]["n_words"].get<std::size_t>());
    CHECK(counts.n_sentences == expected["counts"]["n_sentences"].get<std::size_t>());
    CHECK(counts.n_syllables == expected["counts"]["n_syllables"].get<std::size_t>());
    const auto v = document_features(doc, lexicons());
    const auto want = expected["features"].get<std::vector<double>>();
    REQUIRE(want.size() == kDocumentFeatureCount);
    for (std::size_t k = 0; k < kDocumentFeatureCount; ++k) {
      CAPTURE(kDocumentFeatureNames[k]);
      CHECK(std::abs(v[k] - want[k]) < 1e-9);
    }
  }
}

TEST_CASE("ratio features are invariant under self-concatenation; shuffling sentences leaves v fixed") {
  const std::string text =
      "The pattern of colours starts with red. It changes through orange and yellow. Scientists "
      "describe the phenomenon with sophisticated terminology.";
  const auto v1 = document_features(doc_of(text), lexicons());
  const auto v2 = document_features(doc_of(text + " " + text), lexicons());
  for (std::size_t k = 0; k < kDocumentFeatureCount; ++k) {
    if (kDocumentFeatureNames[k] == "lexical_diversity") {
      CHECK(v2[k] == doctest::Approx(v1[k] / 2));
      continue;
    }
    CAPTURE(kDocumentFeatureNames[k]);
    if (kDocumentFeatureNames[k] == "smog" || kDocumentFeatureNames[k] == "rix") {
      // Functions of polysyllables / long words per sentence: also unchanged.
      CHECK(v2[k] == doctest::Approx(v1[k]));
      continue;
    }
    CHECK(v2[k] == doctest::Approx(v1[k]));
  }

  auto doc = doc_of(text);
  num::Rng rng(3);
  rng.shuffle(doc.sentences.begin(), doc.sentences.end());
  const auto shuffled = document_features(doc, lexicons());
  for (std::size_t k = 0; k < kDocumentFeatureCount; ++k) CHECK(shuffled[k] == doctest::Approx(v1[k]));
}

TEST_CASE("diversity bounds hold on random documents") {
  num::Rng rng(12);
  const std::vector<std::string> words = {"the", "cat", "sat", "quickly", "gorgeous", "he", "and", "because",
                                          "phenomenon", "ran", "blue", "if"};
  for (int trial = 0; trial < 40; ++trial) {
    std::string text;
    const auto n = 1 + rng.below(30);
    for (std::size_t i = 0; i < n; ++i) text += words[rng.below(words.size())] + (rng.below(4) ? " " : ". ");
    const auto v = document_features(doc_of(text), lexicons());
    CHECK(v.size() == 22);
    CHECK(v[15] >= 0.0);
    CHECK(v[15] <= 1.0);
    CHECK(v[16] >= 0.0);
    CHECK(v[16] <= 1.0);
    for (std::size_t k = 17; k < 22; ++k) CHECK(v[k] >= 0.0);
  }
}

TEST_CASE("feature normalization") {
  const std::vector<std::vector<double>> rows = {{5.0, 0.0}, {5.0, 2.0}};
  const auto stats = fit_feature_stats(rows);
  const auto z = normalize_features(std::span<const std::vector<double>>(rows), stats);
  CHECK(z[0][0] == 5.0);
  CHECK(z[1][0] == 5.0);
  CHECK(z[0][1] == doctest::Approx(-1.0));
  CHECK(z[1][1] == doctest::Approx(1.0));

  num::Rng rng(1);
  std::vector<std::vector<double>> random_rows;
  for (int i = 0; i < 50; ++i) random_rows.push_back({rng.uniform(-5, 20), rng.uniform(0, 1)});
  const auto s2 = fit_feature_stats(random_rows);
  const auto z2 = normalize_features(std::span<const std::vector<double>>(random_rows), s2);
  for (std::size_t j = 0; j < 2; ++j) {
    double mean = 0;
    for (const auto& r : z2) mean += r[j];
    CHECK(std::abs(mean / 50) < 1e-9);
  }
  CHECK_THROWS_AS(normalize_features(std::vector<double>{1.0}, FeatureStats{}), std::logic_error);
}

TEST_CASE("parallel extraction matches the serial reference and exports CSV") {
  std::vector<RawDocument> docs;
  const std::filesystem::path dir = READNET_FIXTURE_DIR;
  for (const auto& entry : std::filesystem::directory_iterator(dir / "texts")) {
    docs.push_back({entry.path().filename().string(), read_file(entry.path()), std::nullopt});
  }
  std::sort(docs.begin(), docs.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  omp_set_num_threads(3);
  const auto par = extract_features(docs, lexicons());
  const auto ref = extract_features_reference(docs, lexicons());
  CHECK(par.ids == ref.ids);
  CHECK(par.documents == ref.documents);
  CHECK(par.sentences == ref.sentences);

  std::ostringstream csv;
  write_document_csv(csv, par);
  std::istringstream lines(csv.str());
  std::string header;
  std::getline(lines, header);
  CHECK(header.rfind("id,flesch_reading_ease,", 0) == 0);
  std::size_t rows = 0;
  for (std::string line; std::getline(lines, line);) ++rows;
  CHECK(rows == docs.size());

  std::ostringstream sentence_csv;
  write_sentence_csv(sentence_csv, par);
  CHECK(sentence_csv.str().rfind("id,sentence,chars_per_word", 0) == 0);

  std::vector<RawDocument> bad = {{"x", "...", std::nullopt}};
  CHECK_THROWS_AS(extract_features(bad, lexicons()), std::runtime_error);
}
