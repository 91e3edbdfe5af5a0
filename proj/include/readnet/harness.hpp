#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "readnet/features.hpp"
#include "readnet/num/graph.hpp"
#include "readnet/readnet.hpp"

namespace readnet::harness {

struct Corpus {
  std::string name;
  std::size_t class_count = 0;
  std::vector<RawDocument> documents;
};

/// JSON lines with fields id, text and optional integer label. When
/// `class_count` is not given it is the largest label seen. Errors name the
/// offending line.
Corpus parse_corpus(std::istream& in, const std::string& name, std::optional<std::size_t> class_count = std::nullopt);
Corpus load_corpus(const std::filesystem::path& path, std::optional<std::size_t> class_count = std::nullopt);
void write_corpus(std::ostream& out, const Corpus& corpus);

/// Tokenizes every document in parallel.
std::vector<TokenizedDocument> tokenize_corpus(const Corpus& corpus, const LexiconSet& lexicons);

struct FoldPlan {
  std::uint64_t seed = 0;
  std::vector<std::vector<std::size_t>> folds;  // document indices
};

/// Seeded shuffle, then contiguous partition into k folds whose sizes differ
/// by at most one. With `stratify`, documents are dealt round-robin per class
/// after the shuffle.
FoldPlan kfold(const Corpus& corpus, std::size_t k, std::uint64_t seed, bool stratify = false);

struct LogisticConfig {
  std::size_t epochs = 500;
  double lr = 0.05;
};

/// Softmax regression over normalized document features.
struct LogisticModel {
  num::Tensor weights;  // features x classes
  num::Tensor bias;     // 1 x classes

  std::vector<int> predict(std::span<const std::vector<double>> features) const;
  /// Class probabilities for one feature row.
  std::vector<double> probabilities(std::span<const double> features) const;
};

/// Mean negative log-likelihood; labels are 1-based.
num::Var logistic_loss(const num::Var& x, const num::Var& weights, const num::Var& bias, std::span<const int> labels);

/// Zero-initialized weights, full-batch Adam. Throws when only one class is
/// present.
LogisticModel logistic_baseline_train(std::span<const std::vector<double>> features, std::span<const int> labels,
                                      std::size_t classes, const LogisticConfig& config);

enum class ModelKind { kReadNet, kLogistic, kMajority };

std::string model_kind_name(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

struct EvalConfig {
  ModelKind kind = ModelKind::kReadNet;
  std::size_t k = 5;
  std::uint64_t seed = 1;
  bool stratify = false;
  ModelConfig model;
  LogisticConfig logistic;
  int jobs = 0;  // parallel fold jobs; 0 uses the OpenMP default
};

struct EvalReport {
  std::string model;
  std::size_t class_count = 0;
  std::vector<double> fold_accuracy;
  std::vector<std::size_t> fold_sizes;
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation over folds
  std::vector<std::vector<std::size_t>> confusion;  // [true - 1][predicted - 1]

  nlohmann::json to_json() const;
  std::string to_table() const;
};

/// Trains one model per fold on the other folds and evaluates the held-out
/// one. Vocabulary and feature statistics come from the training split only.
EvalReport cross_validate(const Corpus& corpus, const LexiconSet& lexicons, const EvalConfig& config);

/// Accuracy summary from per-fold results.
void finalize_report(EvalReport& report);

struct GroupStats {
  std::size_t count = 0;
  double mean = 0.0;
  double stddev = 0.0;
};

struct ScoreReport {
  std::vector<std::string> ids;
  std::vector<double> scores;
  std::vector<int> groups;  // document label used as the level tag, 0 if absent
  std::map<int, GroupStats> by_group;

  nlohmann::json to_json() const;
};

/// Difficulty score sigma(r_1 - theta_1) from a binary model, grouped by the
/// documents' labels. Throws for non-binary models.
ScoreReport score_documents(const ReadNet& model, std::span<const RawDocument> docs, const LexiconSet& lexicons);

struct SyntheticLevel {
  int level = 1;
  double hard_word_probability = 0.0;
  std::size_t max_clauses = 1;
};

/// Generative parameters per level: the chance that a content-word slot is
/// filled from the hard pool grows linearly from 0.05 to 0.5, and the maximum
/// clauses per sentence grows with the level.
std::vector<SyntheticLevel> synthetic_levels(std::size_t levels);
nlohmann::json synthetic_parameters(std::size_t levels, std::size_t docs_per_level, std::uint64_t seed);

/// Documents of 3 to 6 sentences built from easy and hard word pools. Labels
/// are the levels 1..levels; ids are "L<level>-<n>".
Corpus make_synthetic_corpus(std::size_t levels, std::size_t docs_per_level, std::uint64_t seed);

}  // namespace readnet::harness
