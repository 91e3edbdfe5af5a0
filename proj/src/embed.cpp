#include "readnet/embed.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "readnet/num/ops.hpp"

namespace readnet::embed {

double rank_difficulty(std::size_t rank, std::size_t n) {
  if (rank < 1 || rank > n) throw std::out_of_range("rank_difficulty: rank outside 1..N");
  if (n == 1) return 0.0;
  return std::log(static_cast<double>(rank)) / std::log(static_cast<double>(n));
}

Vocabulary Vocabulary::build(std::span<const std::vector<std::string>> sentences) {
  std::map<std::string, std::size_t> counts;
  for (const auto& sentence : sentences) {
    for (const auto& w : sentence) ++counts[w];
  }
  if (counts.empty()) throw std::invalid_argument("empty corpus");
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  // counts is already lexicographic, so a stable sort on frequency breaks ties that way.
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return from_ranked(std::move(ranked));
}

Vocabulary Vocabulary::build(std::span<const TokenizedDocument> documents) {
  std::vector<std::vector<std::string>> sentences;
  for (const auto& doc : documents) {
    for (const auto& s : doc.sentences) {
      std::vector<std::string> words;
      for (const auto& t : s) words.push_back(t.normalized);
      sentences.push_back(std::move(words));
    }
  }
  return build(sentences);
}

Vocabulary Vocabulary::from_ranked(std::vector<std::pair<std::string, std::size_t>> ranked) {
  if (ranked.empty()) throw std::invalid_argument("empty corpus");
  Vocabulary v;
  const std::size_t n = ranked.size();
  v.entries_.push_back({std::string(kPadToken), 0, 0, 0.0});
  // Unseen words are treated as rarer than anything in the corpus.
  v.entries_.push_back({std::string(kUnkToken), 0, 0, 1.0});
  for (std::size_t r = 0; r < n; ++r) {
    auto& [word, freq] = ranked[r];
    if (word == kPadToken || word == kUnkToken) throw std::invalid_argument("vocabulary: reserved word '" + word + "'");
    if (!v.lookup_.emplace(word, v.entries_.size()).second)
      throw std::invalid_argument("vocabulary: duplicate word '" + word + "'");
    v.entries_.push_back({std::move(word), freq, r + 1, rank_difficulty(r + 1, n)});
  }
  return v;
}

std::optional<std::size_t> Vocabulary::find(std::string_view word) const {
  auto it = lookup_.find(std::string(word));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

std::size_t Vocabulary::index(std::string_view word) const { return find(word).value_or(kUnkIndex); }

std::vector<std::size_t> Vocabulary::encode(std::span<const std::string> words) const {
  std::vector<std::size_t> out;
  out.reserve(words.size());
  for (const auto& w : words) out.push_back(index(w));
  return out;
}

std::vector<std::size_t> Vocabulary::encode(std::span<const Token> sentence) const {
  std::vector<std::size_t> out;
  out.reserve(sentence.size());
  for (const auto& t : sentence) out.push_back(index(t.normalized));
  return out;
}

std::vector<std::pair<std::string, std::size_t>> Vocabulary::ranked() const {
  std::vector<std::pair<std::string, std::size_t>> out;
  for (std::size_t i = 2; i < entries_.size(); ++i) out.emplace_back(entries_[i].word, entries_[i].frequency);
  return out;
}

double difficulty_weight(std::size_t a, std::size_t b, const Vocabulary& vocab) {
  return std::abs(vocab.difficulty(a) - vocab.difficulty(b)) + 1.0;
}

void EmbedConfig::validate() const {
  if (dim < 1) throw std::invalid_argument("embed config: dim must be >= 1");
  if (window < 1) throw std::invalid_argument("embed config: window c must be >= 1");
  if (!(lr > 0)) throw std::invalid_argument("embed config: lr must be positive");
  if (!(noise_exponent >= 0)) throw std::invalid_argument("embed config: noise exponent must be >= 0");
}

NoiseSampler::NoiseSampler(const Vocabulary& vocab, double exponent) {
  double total = 0.0;
  cumulative_.reserve(vocab.distinct());
  for (std::size_t i = 2; i < vocab.size(); ++i) {
    total += std::pow(static_cast<double>(vocab.entry(i).frequency), exponent);
    cumulative_.push_back(total);
  }
  for (auto& c : cumulative_) c /= total;
  cumulative_.back() = 1.0;
}

std::size_t NoiseSampler::sample(num::Rng& rng) const {
  const double u = rng.uniform();
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  return static_cast<std::size_t>(it - cumulative_.begin()) + 2;
}

double NoiseSampler::probability(std::size_t index) const {
  if (index < 2 || index - 2 >= cumulative_.size()) return 0.0;
  const std::size_t r = index - 2;
  return cumulative_[r] - (r == 0 ? 0.0 : cumulative_[r - 1]);
}

EmbeddingTable initial_table(const Vocabulary& vocab, std::size_t dim, num::Rng& rng) {
  EmbeddingTable t;
  t.input = num::init_uniform({vocab.size(), dim}, 0.5 / static_cast<double>(dim), rng);
  for (auto& x : t.input.row_span(kPadIndex)) x = 0.0;
  t.output = num::Tensor({vocab.size(), dim});
  return t;
}

num::Var nce_loss(const num::Var& input_table, const num::Var& output_table, std::size_t center, std::size_t context,
                  std::span<const std::size_t> negatives, const Vocabulary& vocab, bool readability_aware) {
  auto& g = *input_table.graph();
  g.check_owner(output_table);
  const std::size_t centre_row[] = {center};
  const std::size_t context_row[] = {context};
  const auto v_in = num::transpose(num::row_select(input_table, centre_row));
  const auto positive = num::log_sigmoid(num::matmul(num::row_select(output_table, context_row), v_in));
  auto total = num::scale(positive, readability_aware ? difficulty_weight(context, center, vocab) : 1.0);
  if (!negatives.empty()) {
    num::Tensor weights({negatives.size(), 1}, 1.0);
    if (readability_aware) {
      for (std::size_t i = 0; i < negatives.size(); ++i) weights[i] = difficulty_weight(negatives[i], center, vocab);
    }
    const auto scores = num::matmul(num::row_select(output_table, negatives), v_in);
    const auto terms = num::mul(num::log_sigmoid(num::scale(scores, -1.0)), g.constant(std::move(weights)));
    total = num::add(total, num::sum(terms));
  }
  return num::scale(total, -1.0);
}

std::vector<std::vector<std::size_t>> encode_corpus(std::span<const std::vector<std::string>> sentences,
                                                    const Vocabulary& vocab) {
  std::vector<std::vector<std::size_t>> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back(vocab.encode(s));
  return out;
}

namespace {

double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }
double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

EmbeddingTable train_embeddings(std::span<const std::vector<std::size_t>> sentences, const Vocabulary& vocab,
                                const EmbedConfig& config, std::vector<EmbedEpochLog>* log) {
  config.validate();
  num::Rng rng(config.seed);
  auto table = initial_table(vocab, config.dim, rng);
  const NoiseSampler noise(vocab, config.noise_exponent);
  const std::size_t c = config.window;
  std::vector<std::size_t> negs(config.negatives);
  std::vector<double> centre_grad(config.dim);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    EmbedEpochLog entry{epoch, 0, 0.0};
    for (const auto& s : sentences) {
      for (std::size_t i = 0; i < s.size(); ++i) {
        const std::size_t lo = i >= c ? i - c : 0;
        const std::size_t hi = std::min(s.size() - 1, i + c);
        for (std::size_t j = lo; j <= hi; ++j) {
          if (j == i) continue;
          const std::size_t centre = s[i];
          for (auto& n : negs) n = noise.sample(rng);
          auto v_in = table.input.row_span(centre);
          std::fill(centre_grad.begin(), centre_grad.end(), 0.0);

          auto update = [&](std::size_t word, double label) {
            auto v_out = table.output.row_span(word);
            const double weight = config.readability_aware ? difficulty_weight(word, centre, vocab) : 1.0;
            const double score = dot(v_out, v_in);
            entry.mean_loss -= weight * log_sigmoid(label > 0 ? score : -score);
            // d(loss)/d(score) for -w log s(+-score).
            const double g = weight * (sigmoid(score) - label);
            for (std::size_t k = 0; k < v_in.size(); ++k) {
              centre_grad[k] += g * v_out[k];
              v_out[k] -= config.lr * g * v_in[k];
            }
          };
          update(s[j], 1.0);
          for (auto n : negs) update(n, 0.0);
          for (std::size_t k = 0; k < v_in.size(); ++k) v_in[k] -= config.lr * centre_grad[k];
          ++entry.pairs;
        }
      }
    }
    if (entry.pairs > 0) entry.mean_loss /= static_cast<double>(entry.pairs);
    if (log) log->push_back(entry);
  }
  return table;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

std::vector<std::pair<std::string, double>> nearest_neighbors(std::string_view word, const Vocabulary& vocab,
                                                              const EmbeddingTable& table, std::size_t top_n) {
  const auto self = vocab.find(word);
  if (!self) throw std::invalid_argument("nearest_neighbors: '" + std::string(word) + "' is not in the vocabulary");
  const auto query = table.input.row_span(*self);
  std::vector<double> sims(vocab.size(), 0.0);
  const auto n = static_cast<std::ptrdiff_t>(vocab.size());
#pragma omp parallel for schedule(static) if (n > 4096)
  for (std::ptrdiff_t i = 2; i < n; ++i) {
    sims[static_cast<std::size_t>(i)] = cosine(query, table.input.row_span(static_cast<std::size_t>(i)));
  }
  std::vector<std::size_t> order;
  for (std::size_t i = 2; i < vocab.size(); ++i) {
    if (i != *self) order.push_back(i);
  }
  const std::size_t keep = std::min(top_n, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                    [&](std::size_t a, std::size_t b) { return sims[a] != sims[b] ? sims[a] > sims[b] : a < b; });
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t i = 0; i < keep; ++i) out.emplace_back(vocab.entry(order[i]).word, sims[order[i]]);
  return out;
}

void write_embedding_file(const std::filesystem::path& path, const Vocabulary& vocab, const EmbeddingTable& table) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << table.dim() << ' ' << vocab.distinct() << '\n';
  char buf[32];
  for (std::size_t i = 2; i < vocab.size(); ++i) {
    out << vocab.entry(i).word;
    for (double x : table.input.row_span(i)) {
      std::snprintf(buf, sizeof buf, " %.17g", x);
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

LoadedEmbeddings read_embedding_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embedding file " + path.string());
  LoadedEmbeddings e;
  std::size_t n = 0;
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  if (!(hs >> e.dim >> n) || e.dim == 0 || n == 0)
    throw std::runtime_error(path.string() + ":1: expected header 'dim N'");
  e.vectors = num::Tensor({n, e.dim});
  std::string line;
  for (std::size_t r = 0; r < n; ++r) {
    if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": expected " + std::to_string(n) + " rows");
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    for (std::size_t k = 0; k < e.dim; ++k) {
      if (!(ls >> e.vectors(r, k)))
        throw std::runtime_error(path.string() + ":" + std::to_string(r + 2) + ": too few values");
    }
    e.words.push_back(std::move(word));
  }
  return e;
}

}  // namespace readnet::embed
