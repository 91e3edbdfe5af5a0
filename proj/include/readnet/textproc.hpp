#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace readnet {

enum class PosTag { kOther, kAdjective, kNoun, kVerb, kAdverb, kPronoun };

std::string_view pos_name(PosTag tag);

struct RawDocument {
  std::string id;
  std::string text;
  std::optional<int> label;
};

struct Token {
  std::string surface;
  std::string normalized;
  int char_count = 0;      // letters and digits, apostrophes excluded
  int syllable_count = 1;
  bool is_long = false;    // char_count > 6
  bool is_difficult = false;
  PosTag pos = PosTag::kOther;
};

using Sentence = std::vector<Token>;

struct TokenizedDocument {
  std::string id;
  std::vector<Sentence> sentences;
  std::optional<int> label;

  std::size_t token_count() const;
};

enum class ConnectiveKind : std::size_t { kAdditive, kLogic, kTemporal, kCausal, kNegative };
inline constexpr std::size_t kConnectiveKinds = 5;

/// A connective or operator entry; multi-word entries match contiguous tokens.
using Phrase = std::vector<std::string>;

struct LexiconSet {
  std::unordered_set<std::string> easy_words;
  std::unordered_set<std::string> pronouns;
  std::array<std::vector<Phrase>, kConnectiveKinds> connectives;
  std::vector<Phrase> logic_operators;
  std::unordered_map<std::string, PosTag> pos_lexicon;

  /// Reads easy_words.txt, pronouns.txt, connectives_<kind>.txt,
  /// logic_operators.txt and pos.tsv from `dir`.
  static LexiconSet load(const std::filesystem::path& dir);
  /// $READNET_LEXICON_DIR if set, otherwise the directory baked in at build time.
  static std::filesystem::path default_directory();
};

/// Lexicon file lines: '#' comments and blank lines skipped, trailing
/// whitespace trimmed, entries lowercased.
std::vector<std::string> read_lexicon_lines(const std::filesystem::path& path);

/// Splits at '.', '!' or '?' runs (plus closing quotes/brackets) followed by
/// whitespace or end of text. A '.' after a known abbreviation or a single
/// capital initial does not end a sentence; "3.14" never splits because the
/// dot is not followed by whitespace.
std::vector<std::string> split_sentences(std::string_view text);

/// Maximal runs of letters, digits and apostrophes; surrounding apostrophes
/// are trimmed. Throws std::invalid_argument("empty sentence") when nothing
/// word-like remains. Lexicon-dependent fields are left at defaults.
std::vector<Token> tokenize(std::string_view sentence);

/// Vowel groups (a e i o u y) with a silent trailing 'e' dropped when another
/// group exists. Minimum 1. Throws when `word` has no letters.
int count_syllables(std::string_view word);

Token classify_token(Token token, const LexiconSet& lexicons);

/// Segments, tokenizes and classifies. Sentences without word characters are
/// dropped, so every returned sentence has at least one token.
TokenizedDocument tokenize_document(const RawDocument& doc, const LexiconSet& lexicons);

/// Non-overlapping, longest-first matches of `phrases` within one sentence.
std::size_t count_phrase_matches(std::span<const Token> sentence, std::span<const Phrase> phrases);

}  // namespace readnet
