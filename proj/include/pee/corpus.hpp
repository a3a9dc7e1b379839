#pragma once
// Dialogue corpora: tokenization, Persona-Chat ingestion, vocabularies,
// tf-idf document vectors and pretrained word embeddings.

#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace pee::corpus {

using TokenList = std::vector<std::string>;

// Lowercases ASCII letters, splits on whitespace and emits every ASCII
// punctuation character as a token of its own.
TokenList tokenize(std::string_view text);
std::string detokenize(const TokenList& tokens);

// Fixed English function-word list. Tokens made only of punctuation are also
// treated as stop-words.
const std::unordered_set<std::string>& stopwords();
bool is_stopword(std::string_view token);
// Distinct tokens of `tokens` that are not stop-words.
std::unordered_set<std::string> content_tokens(const TokenList& tokens);

struct DialogueExample {
  std::size_t conversation = 0;
  // Index of the response within the conversation's utterance list.
  std::size_t turn = 0;
  std::vector<TokenList> persona;
  std::vector<TokenList> history;
  TokenList response;
};

struct Conversation {
  std::size_t id = 0;
  std::vector<TokenList> persona;
  // Alternating partner / persona-owner utterances, in order.
  std::vector<TokenList> utterances;
  // True for utterances spoken by the persona owner.
  std::vector<bool> owner_turn;

  // One example per persona-owner utterance that has at least one prior
  // utterance.
  std::vector<DialogueExample> examples() const;
  // Persona sentences followed by every utterance, as one token list.
  TokenList document() const;
};

// Persona-Chat text format. Throws ParseError with the 1-based line index on
// a malformed line number or a missing tab separator.
std::vector<Conversation> parse_personachat(std::istream& in);
std::vector<Conversation> load_personachat(const std::filesystem::path& path);
std::vector<DialogueExample> expand_examples(const std::vector<Conversation>& conversations);

class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::size_t kSos = 2;
  static constexpr std::size_t kEos = 3;
  static constexpr std::size_t kNumReserved = 4;

  Vocabulary();
  // Reserved tokens followed by `tokens` in order. Duplicates are ignored.
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  std::size_t size() const noexcept { return tokens_.size(); }
  std::size_t content_size() const noexcept { return tokens_.size() - kNumReserved; }
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  std::optional<std::size_t> find(std::string_view token) const;
  bool contains(std::string_view token) const { return find(token).has_value(); }
  // UNK for unknown tokens.
  std::size_t id(std::string_view token) const;

  std::vector<std::size_t> encode(const TokenList& tokens) const;
  // Stops at the first EOS; drops PAD and SOS.
  TokenList decode(const std::vector<std::size_t>& ids) const;

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Keeps the most frequent tokens until the vocabulary (reserved entries
// included) reaches `size_limit`. Ties are broken lexicographically.
Vocabulary build_vocab(const std::vector<TokenList>& corpus, std::size_t size_limit,
                       bool remove_stopwords);

// Sparse tf-idf vector. Indices address the content words of the topic
// vocabulary: index = vocabulary id - Vocabulary::kNumReserved.
struct TfIdfDoc {
  std::vector<std::pair<std::size_t, double>> entries;  // sorted by index

  double weight(std::size_t index) const;
  bool empty() const noexcept { return entries.empty(); }
  // Dense copy of length `dim`.
  std::vector<double> dense(std::size_t dim) const;
};

// weight(w, d) = count(w, d) * log(N / (1 + df(w))), clamped at 0. Tokens
// outside `vocab` and reserved tokens are ignored.
std::vector<TfIdfDoc> compute_tfidf(const std::vector<TokenList>& documents,
                                    const Vocabulary& vocab);

struct EmbeddingTable {
  std::size_t dim = 0;
  std::unordered_map<std::string, std::vector<double>> vectors;

  const std::vector<double>* find(const std::string& token) const;
  std::size_t size() const noexcept { return vectors.size(); }
};

// GloVe-style text: token followed by `dim` reals per line. Tokens outside
// `vocab` are skipped. Throws ParseError naming the line on inconsistent
// arity or a non-numeric value.
EmbeddingTable parse_embeddings(std::istream& in, const Vocabulary& vocab);
EmbeddingTable load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab);

}  // namespace pee::corpus
