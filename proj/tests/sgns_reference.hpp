#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "readnet/embed.hpp"

namespace readnet::testing {

using embed::EmbedConfig;
using embed::kPadIndex;
using embed::NoiseSampler;
using embed::Vocabulary;

// Textbook skip-gram with negative sampling, no difficulty weighting. It
// shares the initialisation and noise draws with the library trainer and
// nothing else.
inline num::Tensor reference_sgns(std::span<const std::vector<std::size_t>> sentences, const Vocabulary& vocab,
                           const EmbedConfig& config) {
  num::Rng rng(config.seed);
  num::Tensor in = num::init_uniform({vocab.size(), config.dim}, 0.5 / static_cast<double>(config.dim), rng);
  for (std::size_t k = 0; k < config.dim; ++k) in(kPadIndex, k) = 0.0;
  num::Tensor out({vocab.size(), config.dim});
  const NoiseSampler noise(vocab, config.noise_exponent);
  const long c = static_cast<long>(config.window);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (const auto& s : sentences) {
      const long len = static_cast<long>(s.size());
      for (long i = 0; i < len; ++i) {
        for (long j = std::max(0L, i - c); j <= std::min(len - 1, i + c); ++j) {
          if (j == i) continue;
          std::vector<std::pair<std::size_t, double>> targets = {{s[j], 1.0}};
          std::vector<std::size_t> drawn(config.negatives);
          for (auto& n : drawn) n = noise.sample(rng);
          for (auto n : drawn) targets.emplace_back(n, 0.0);
          std::vector<double> neu1e(config.dim, 0.0);
          const std::size_t w = s[i];
          for (const auto& [t, label] : targets) {
            double f = 0.0;
            for (std::size_t k = 0; k < config.dim; ++k) f += out(t, k) * in(w, k);
            const double sig = f >= 0 ? 1.0 / (1.0 + std::exp(-f)) : std::exp(f) / (1.0 + std::exp(f));
            const double g = sig - label;
            for (std::size_t k = 0; k < config.dim; ++k) {
              neu1e[k] += g * out(t, k);
              out(t, k) -= config.lr * g * in(w, k);
            }
          }
          for (std::size_t k = 0; k < config.dim; ++k) in(w, k) -= config.lr * neu1e[k];
        }
      }
    }
  }
  return in;
}

}  // namespace readnet::testing
