#include <algorithm>
#include <cctype>

#include "pee/corpus.hpp"

namespace pee::corpus {

// Parsed by tests/oracles/vegan_jaccard.py; keep one quoted word per entry.
static constexpr const char* kStopwords[] = {
    "a",       "about",    "above",   "after",    "again",   "against", "all",     "am",
    "an",      "and",      "any",     "are",      "as",      "at",      "be",      "because",
    "been",    "before",   "being",   "below",    "between", "both",    "but",     "by",
    "can",     "could",    "did",     "do",       "does",    "doing",   "don",     "down",
    "during",  "each",     "few",     "for",      "from",    "further", "had",     "has",
    "have",    "having",   "he",      "her",      "here",    "hers",    "herself", "him",
    "himself", "his",      "how",     "i",        "if",      "in",      "into",    "is",
    "it",      "its",      "itself",  "just",     "ll",      "m",       "me",      "might",
    "more",    "most",     "must",    "my",       "myself",  "no",      "nor",     "not",
    "now",     "of",       "off",     "on",       "once",    "only",    "or",      "other",
    "ought",   "our",      "ours",    "ourselves", "out",    "over",    "own",     "re",
    "s",       "same",     "shall",   "she",      "should",  "so",      "some",    "such",
    "t",       "than",     "that",    "the",      "their",   "theirs",  "them",    "themselves",
    "then",    "there",    "these",   "they",     "this",    "those",   "through", "to",
    "too",     "under",    "until",   "up",       "ve",      "very",    "was",     "we",
    "were",    "what",     "when",    "where",    "which",   "while",   "who",     "whom",
    "why",     "will",     "with",    "would",    "you",     "your",    "yours",   "yourself",
    "yourselves", "d",     "y",       "also",     "yes",     "yeah",    "oh",      "ok",
    "okay",    "well",     "really",  "get",      "got",     "im",      "dont",    "lol",
};

const std::unordered_set<std::string>& stopwords() {
  static const std::unordered_set<std::string> set(std::begin(kStopwords), std::end(kStopwords));
  return set;
}

bool is_stopword(std::string_view token) {
  if (token.empty()) return true;
  const bool all_punct = std::all_of(token.begin(), token.end(), [](char c) {
    return std::ispunct(static_cast<unsigned char>(c)) != 0;
  });
  return all_punct || stopwords().count(std::string(token)) > 0;
}

std::unordered_set<std::string> content_tokens(const TokenList& tokens) {
  std::unordered_set<std::string> out;
  for (const auto& t : tokens) {
    if (!is_stopword(t)) out.insert(t);
  }
  return out;
}

}  // namespace pee::corpus
