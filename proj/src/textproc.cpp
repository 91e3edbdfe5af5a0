#include "readnet/textproc.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

#ifndef READNET_DEFAULT_LEXICON_DIR
#define READNET_DEFAULT_LEXICON_DIR "data/lexicon"
#endif

namespace readnet {
namespace {

bool is_ascii_alpha(unsigned char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_ascii_digit(unsigned char c) { return c >= '0' && c <= '9'; }
bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead & 0xE0) == 0xC0) return 2;
  if ((lead & 0xF0) == 0xE0) return 3;
  if ((lead & 0xF8) == 0xF0) return 4;
  return 1;  // stray continuation byte
}

enum class CharClass { kLetter, kDigit, kApostrophe, kOther };

// Classifies the code point starting at text[i] and reports its byte length.
CharClass classify_at(std::string_view text, std::size_t i, std::size_t& len) {
  const auto c = static_cast<unsigned char>(text[i]);
  len = std::min(utf8_length(c), text.size() - i);
  if (c < 0x80) {
    if (is_ascii_alpha(c)) return CharClass::kLetter;
    if (is_ascii_digit(c)) return CharClass::kDigit;
    if (c == '\'') return CharClass::kApostrophe;
    return CharClass::kOther;
  }
  if (len < 2) return CharClass::kOther;
  const auto c1 = static_cast<unsigned char>(text[i + 1]);
  if (c == 0xC2) return CharClass::kOther;  // Latin-1 punctuation and NBSP (U+0080..U+00BF)
  if (c == 0xC3 && (c1 == 0x97 || c1 == 0xB7)) return CharClass::kOther;  // multiplication / division signs
  if (c == 0xE2 && len == 3) {
    const auto c2 = static_cast<unsigned char>(text[i + 2]);
    if (c1 == 0x80 && (c2 == 0x98 || c2 == 0x99)) return CharClass::kApostrophe;  // U+2018, U+2019
    if (c1 >= 0x80 && c1 <= 0xAF) return CharClass::kOther;  // general punctuation, arrows, symbols
  }
  if (c == 0xE3 && c1 == 0x80) return CharClass::kOther;  // CJK punctuation
  return CharClass::kLetter;
}

constexpr std::array<std::string_view, 24> kAbbreviations = {
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "vs", "etc", "e.g", "i.e",
    "inc", "ltd", "co", "no", "fig", "approx", "dept", "est", "gen", "gov", "mt", "vol"};

bool guarded_abbreviation(std::string_view text, std::size_t dot) {
  std::size_t begin = dot;
  while (begin > 0) {
    const auto c = static_cast<unsigned char>(text[begin - 1]);
    if (is_ascii_alpha(c) || c == '.') {
      --begin;
    } else {
      break;
    }
  }
  if (begin == dot) return false;
  std::string word;
  for (std::size_t i = begin; i < dot; ++i) word.push_back(ascii_lower(text[i]));
  if (std::find(kAbbreviations.begin(), kAbbreviations.end(), word) != kAbbreviations.end()) return true;
  // A lone capital initial such as "J. Smith"; "I." still ends a sentence.
  return dot - begin == 1 && text[begin] >= 'A' && text[begin] <= 'Z' && text[begin] != 'I';
}

bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }
bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }

std::string_view trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

PosTag parse_tag(std::string_view tag, const std::filesystem::path& path) {
  if (tag == "adjective") return PosTag::kAdjective;
  if (tag == "noun") return PosTag::kNoun;
  if (tag == "verb") return PosTag::kVerb;
  if (tag == "adverb") return PosTag::kAdverb;
  if (tag == "pronoun") return PosTag::kPronoun;
  if (tag == "other") return PosTag::kOther;
  throw std::runtime_error(path.string() + ": unknown part-of-speech tag '" + std::string(tag) + "'");
}

Phrase split_phrase(std::string_view entry) {
  Phrase words;
  std::size_t i = 0;
  while (i < entry.size()) {
    while (i < entry.size() && is_space(static_cast<unsigned char>(entry[i]))) ++i;
    std::size_t j = i;
    while (j < entry.size() && !is_space(static_cast<unsigned char>(entry[j]))) ++j;
    if (j > i) words.emplace_back(entry.substr(i, j - i));
    i = j;
  }
  return words;
}

std::vector<Phrase> load_phrases(const std::filesystem::path& path) {
  std::vector<Phrase> phrases;
  for (const auto& line : read_lexicon_lines(path)) phrases.push_back(split_phrase(line));
  // Longest first so "because of" wins over "because".
  std::stable_sort(phrases.begin(), phrases.end(), [](const Phrase& a, const Phrase& b) { return a.size() > b.size(); });
  return phrases;
}

}  // namespace

std::string_view pos_name(PosTag tag) {
  switch (tag) {
    case PosTag::kAdjective: return "adjective";
    case PosTag::kNoun: return "noun";
    case PosTag::kVerb: return "verb";
    case PosTag::kAdverb: return "adverb";
    case PosTag::kPronoun: return "pronoun";
    case PosTag::kOther: break;
  }
  return "other";
}

std::size_t TokenizedDocument::token_count() const {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.size();
  return n;
}

std::vector<std::string> read_lexicon_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open lexicon file " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.front() == '#') continue;
    auto view = trim(line);
    if (view.empty()) continue;
    std::string entry(view);
    std::transform(entry.begin(), entry.end(), entry.begin(), ascii_lower);
    lines.push_back(std::move(entry));
  }
  return lines;
}

LexiconSet LexiconSet::load(const std::filesystem::path& dir) {
  LexiconSet lex;
  for (auto& w : read_lexicon_lines(dir / "easy_words.txt")) lex.easy_words.insert(std::move(w));
  for (auto& w : read_lexicon_lines(dir / "pronouns.txt")) lex.pronouns.insert(std::move(w));
  static constexpr std::array<std::string_view, kConnectiveKinds> kFiles = {
      "connectives_additive.txt", "connectives_logic.txt", "connectives_temporal.txt", "connectives_causal.txt",
      "connectives_negative.txt"};
  for (std::size_t k = 0; k < kConnectiveKinds; ++k) lex.connectives[k] = load_phrases(dir / kFiles[k]);
  lex.logic_operators = load_phrases(dir / "logic_operators.txt");
  const auto pos_path = dir / "pos.tsv";
  for (const auto& line : read_lexicon_lines(pos_path)) {
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw std::runtime_error(pos_path.string() + ": expected word<TAB>tag in '" + line + "'");
    lex.pos_lexicon[std::string(trim(std::string_view(line).substr(0, tab)))] =
        parse_tag(trim(std::string_view(line).substr(tab + 1)), pos_path);
  }
  return lex;
}

std::filesystem::path LexiconSet::default_directory() {
  if (const char* env = std::getenv("READNET_LEXICON_DIR"); env && *env) return env;
  return READNET_DEFAULT_LEXICON_DIR;
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  std::size_t i = 0;
  auto emit = [&](std::size_t end) {
    auto piece = trim(text.substr(start, end - start));
    if (!piece.empty()) out.emplace_back(piece);
    start = end;
  };
  while (i < text.size()) {
    if (!is_terminator(text[i])) {
      ++i;
      continue;
    }
    const std::size_t first = i;
    while (i < text.size() && is_terminator(text[i])) ++i;
    const bool single_dot = i - first == 1 && text[first] == '.';
    while (i < text.size() && is_closer(text[i])) ++i;
    const bool at_break = i == text.size() || is_space(static_cast<unsigned char>(text[i]));
    if (!at_break) continue;
    if (single_dot && guarded_abbreviation(text, first)) continue;
    emit(i);
  }
  emit(text.size());
  return out;
}

int count_syllables(std::string_view word) {
  int groups = 0;
  bool in_vowel = false;
  bool any_letter = false;
  char last_letter = 0;
  char before_last = 0;
  std::size_t i = 0;
  while (i < word.size()) {
    std::size_t len = 1;
    const auto cls = classify_at(word, i, len);
    if (cls == CharClass::kLetter) {
      any_letter = true;
      const char c = len == 1 ? ascii_lower(word[i]) : '\0';  // non-ASCII letters count as consonants
      const bool vowel = c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y';
      if (vowel && !in_vowel) ++groups;
      in_vowel = vowel;
      before_last = last_letter;
      last_letter = c == '\0' ? 'x' : c;
    } else {
      in_vowel = false;
    }
    i += len;
  }
  if (!any_letter) throw std::invalid_argument("count_syllables: no letters in '" + std::string(word) + "'");
  const bool silent_e = last_letter == 'e' && before_last != 0 && before_last != 'a' && before_last != 'e' &&
                        before_last != 'i' && before_last != 'o' && before_last != 'u' && before_last != 'y';
  if (silent_e && groups > 1) --groups;
  return std::max(groups, 1);
}

std::vector<Token> tokenize(std::string_view sentence) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < sentence.size()) {
    std::size_t len = 1;
    auto cls = classify_at(sentence, i, len);
    if (cls == CharClass::kOther) {
      i += len;
      continue;
    }
    // Gather the maximal run, remembering code-point boundaries.
    struct Piece {
      std::size_t begin, len;
      CharClass cls;
    };
    std::vector<Piece> run;
    while (i < sentence.size()) {
      cls = classify_at(sentence, i, len);
      if (cls == CharClass::kOther) break;
      run.push_back({i, len, cls});
      i += len;
    }
    std::size_t b = 0, e = run.size();
    while (b < e && run[b].cls == CharClass::kApostrophe) ++b;
    while (e > b && run[e - 1].cls == CharClass::kApostrophe) --e;
    if (b == e) continue;
    Token t;
    bool has_letter = false;
    for (std::size_t k = b; k < e; ++k) {
      const auto piece = sentence.substr(run[k].begin, run[k].len);
      t.surface.append(piece);
      if (run[k].cls == CharClass::kApostrophe) {
        t.normalized.push_back('\'');
        continue;
      }
      ++t.char_count;
      has_letter = has_letter || run[k].cls == CharClass::kLetter;
      if (piece.size() == 1) {
        t.normalized.push_back(ascii_lower(piece[0]));
      } else {
        t.normalized.append(piece);
      }
    }
    t.syllable_count = has_letter ? count_syllables(t.normalized) : 1;
    t.is_long = t.char_count > 6;
    tokens.push_back(std::move(t));
  }
  if (tokens.empty()) throw std::invalid_argument("empty sentence");
  return tokens;
}

Token classify_token(Token token, const LexiconSet& lexicons) {
  token.is_difficult = !lexicons.easy_words.contains(token.normalized);
  if (lexicons.pronouns.contains(token.normalized)) {
    token.pos = PosTag::kPronoun;
  } else if (auto it = lexicons.pos_lexicon.find(token.normalized); it != lexicons.pos_lexicon.end()) {
    token.pos = it->second;
  } else {
    token.pos = PosTag::kOther;
  }
  return token;
}

TokenizedDocument tokenize_document(const RawDocument& doc, const LexiconSet& lexicons) {
  TokenizedDocument out{doc.id, {}, doc.label};
  for (const auto& sentence : split_sentences(doc.text)) {
    std::vector<Token> tokens;
    try {
      tokens = tokenize(sentence);
    } catch (const std::invalid_argument&) {
      continue;  // punctuation-only fragment
    }
    for (auto& t : tokens) t = classify_token(std::move(t), lexicons);
    out.sentences.push_back(std::move(tokens));
  }
  return out;
}

std::size_t count_phrase_matches(std::span<const Token> sentence, std::span<const Phrase> phrases) {
  std::size_t count = 0;
  std::size_t i = 0;
  while (i < sentence.size()) {
    std::size_t advance = 1;
    for (const auto& phrase : phrases) {
      if (phrase.empty() || i + phrase.size() > sentence.size()) continue;
      bool match = true;
      for (std::size_t k = 0; k < phrase.size() && match; ++k) match = sentence[i + k].normalized == phrase[k];
      if (match) {
        ++count;
        advance = phrase.size();
        break;
      }
    }
    i += advance;
  }
  return count;
}

}  // namespace readnet
