#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "readnet/num/graph.hpp"
#include "readnet/num/rng.hpp"
#include "readnet/num/tensor.hpp"
#include "readnet/textproc.hpp"

namespace readnet::embed {

inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::size_t kPadIndex = 0;
inline constexpr std::size_t kUnkIndex = 1;

struct VocabEntry {
  std::string word;
  std::size_t frequency = 0;
  std::size_t rank = 0;  // 1 = most frequent; 0 for the reserved entries
  double difficulty = 0.0;
};

/// Frequency-ranked vocabulary. Index 0 is PAD, 1 is UNK, and word with rank r
/// sits at index r + 1.
class Vocabulary {
 public:
  /// Counts every token; ranks by descending frequency with ties broken
  /// lexicographically. Throws "empty corpus" when there are no tokens.
  static Vocabulary build(std::span<const std::vector<std::string>> sentences);
  static Vocabulary build(std::span<const TokenizedDocument> documents);
  /// Rebuilds from (word, frequency) pairs already in rank order.
  static Vocabulary from_ranked(std::vector<std::pair<std::string, std::size_t>> ranked);

  /// Entries including PAD and UNK.
  std::size_t size() const noexcept { return entries_.size(); }
  /// N, the number of distinct corpus words.
  std::size_t distinct() const noexcept { return entries_.size() - 2; }
  std::optional<std::size_t> find(std::string_view word) const;
  /// Index of `word`, or kUnkIndex when it was never seen.
  std::size_t index(std::string_view word) const;
  const VocabEntry& entry(std::size_t index) const { return entries_.at(index); }
  double difficulty(std::size_t index) const { return entries_.at(index).difficulty; }
  std::vector<std::size_t> encode(std::span<const std::string> words) const;
  std::vector<std::size_t> encode(std::span<const Token> sentence) const;
  /// (word, frequency) in rank order, without the reserved entries.
  std::vector<std::pair<std::string, std::size_t>> ranked() const;

 private:
  std::vector<VocabEntry> entries_;
  std::unordered_map<std::string, std::size_t> lookup_;
};

/// d(w) = log(rank) / log(N); 0 when N = 1.
double rank_difficulty(std::size_t rank, std::size_t n);

/// D(a, b) = |d(a) - d(b)| + 1.
double difficulty_weight(std::size_t a, std::size_t b, const Vocabulary& vocab);

struct EmbedConfig {
  std::size_t dim = 50;
  std::size_t window = 2;       // c; the sliding window spans 2c+1 tokens
  std::size_t negatives = 5;    // k
  std::size_t epochs = 5;
  double lr = 0.025;
  double noise_exponent = 0.75;
  bool readability_aware = true;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Input vectors v_w and output vectors v'_w, one row per vocabulary index.
struct EmbeddingTable {
  num::Tensor input;
  num::Tensor output;

  std::size_t dim() const { return input.cols(); }
};

/// Unigram frequency raised to `exponent`, over the corpus words only.
class NoiseSampler {
 public:
  NoiseSampler(const Vocabulary& vocab, double exponent);
  std::size_t sample(num::Rng& rng) const;
  double probability(std::size_t index) const;

 private:
  std::vector<double> cumulative_;  // indexed by rank - 1
};

/// Initial tables: input rows uniform in +-0.5/dim, output rows zero. The
/// PAD row of the input table is zero too.
EmbeddingTable initial_table(const Vocabulary& vocab, std::size_t dim, num::Rng& rng);

/// -[D(O,I) log s(v'_O . v_I) + sum_i D(i,I) log s(-v'_i . v_I)] on autodiff
/// tables (rows indexed by vocabulary index). With readability_aware off
/// every D is 1.
num::Var nce_loss(const num::Var& input_table, const num::Var& output_table, std::size_t center, std::size_t context,
                  std::span<const std::size_t> negatives, const Vocabulary& vocab, bool readability_aware);

/// Sentences mapped to vocabulary indices, as consumed by the trainer.
std::vector<std::vector<std::size_t>> encode_corpus(std::span<const std::vector<std::string>> sentences,
                                                    const Vocabulary& vocab);

struct EmbedEpochLog {
  std::size_t epoch = 0;
  std::size_t pairs = 0;
  double mean_loss = 0.0;
};

/// Skip-gram with negative sampling, plain SGD. Sentences are visited in
/// order; for each centre and each context within the window, k negatives
/// are drawn and the output rows are updated before the centre row.
EmbeddingTable train_embeddings(std::span<const std::vector<std::size_t>> sentences, const Vocabulary& vocab,
                                const EmbedConfig& config, std::vector<EmbedEpochLog>* log = nullptr);

/// Descending cosine similarity over the input vectors of corpus words,
/// excluding `word` itself and the reserved entries. Ties keep vocabulary
/// order. Throws for out-of-vocabulary words.
std::vector<std::pair<std::string, double>> nearest_neighbors(std::string_view word, const Vocabulary& vocab,
                                                              const EmbeddingTable& table, std::size_t top_n);

double cosine(std::span<const double> a, std::span<const double> b);

/// Text format: "dim N" header, then one line per corpus word with its input
/// vector.
void write_embedding_file(const std::filesystem::path& path, const Vocabulary& vocab, const EmbeddingTable& table);

struct LoadedEmbeddings {
  std::size_t dim = 0;
  std::vector<std::string> words;
  num::Tensor vectors;  // words.size() x dim
};

LoadedEmbeddings read_embedding_file(const std::filesystem::path& path);

}  // namespace readnet::embed
