#include "pee/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "pee/error.hpp"

namespace pee::corpus {

TokenList tokenize(std::string_view text) {
  TokenList out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (c < 128 && std::ispunct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur.push_back(static_cast<char>(c < 128 ? std::tolower(c) : c));
    }
  }
  flush();
  return out;
}

std::string detokenize(const TokenList& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

std::vector<DialogueExample> Conversation::examples() const {
  std::vector<DialogueExample> out;
  for (std::size_t t = 0; t < utterances.size(); ++t) {
    if (!owner_turn[t] || t == 0 || utterances[t].empty()) continue;
    DialogueExample ex;
    ex.conversation = id;
    ex.turn = t;
    ex.persona = persona;
    ex.history.assign(utterances.begin(), utterances.begin() + static_cast<std::ptrdiff_t>(t));
    ex.response = utterances[t];
    out.push_back(std::move(ex));
  }
  return out;
}

TokenList Conversation::document() const {
  TokenList doc;
  for (const auto& s : persona) doc.insert(doc.end(), s.begin(), s.end());
  for (const auto& u : utterances) doc.insert(doc.end(), u.begin(), u.end());
  return doc;
}

namespace {

constexpr std::string_view kYourPersona = "your persona:";
constexpr std::string_view kPartnerPersona = "partner's persona:";
constexpr std::string_view kSilence = "__SILENCE__";

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

std::vector<Conversation> parse_personachat(std::istream& in) {
  std::vector<Conversation> out;
  std::string line;
  std::size_t line_no = 0;
  long prev_index = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;

    const std::size_t space = line.find(' ');
    if (space == std::string::npos || space == 0) throw ParseError("missing line number", line_no);
    long index = 0;
    const auto [ptr, ec] = std::from_chars(line.data(), line.data() + space, index);
    if (ec != std::errc() || ptr != line.data() + space || index < 1) {
      throw ParseError("malformed line number '" + line.substr(0, space) + "'", line_no);
    }
    if (index == 1) {
      Conversation c;
      c.id = out.size();
      out.push_back(std::move(c));
    } else if (out.empty() || index != prev_index + 1) {
      throw ParseError("line number " + std::to_string(index) + " out of sequence", line_no);
    }
    prev_index = index;
    Conversation& conv = out.back();

    const std::string_view rest(line.data() + space + 1, line.size() - space - 1);
    if (rest.substr(0, kYourPersona.size()) == kYourPersona) {
      conv.persona.push_back(tokenize(rest.substr(kYourPersona.size())));
      continue;
    }
    if (rest.substr(0, kPartnerPersona.size()) == kPartnerPersona) continue;

    const std::size_t tab = rest.find('\t');
    if (tab == std::string_view::npos) throw ParseError("missing tab separator", line_no);
    const std::string_view partner = trim(rest.substr(0, tab));
    std::string_view target = rest.substr(tab + 1);
    target = trim(target.substr(0, target.find('\t')));
    if (partner != kSilence) {
      conv.utterances.push_back(tokenize(partner));
      conv.owner_turn.push_back(false);
    }
    conv.utterances.push_back(tokenize(target));
    conv.owner_turn.push_back(true);
  }
  return out;
}

std::vector<Conversation> load_personachat(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return parse_personachat(in);
}

std::vector<DialogueExample> expand_examples(const std::vector<Conversation>& conversations) {
  std::vector<DialogueExample> out;
  for (const auto& c : conversations) {
    auto ex = c.examples();
    std::move(ex.begin(), ex.end(), std::back_inserter(out));
  }
  return out;
}

Vocabulary::Vocabulary() {
  for (const char* t : {"<pad>", "<unk>", "<sos>", "<eos>"}) {
    index_.emplace(t, tokens_.size());
    tokens_.emplace_back(t);
  }
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  Vocabulary v;
  for (const auto& t : tokens) {
    if (v.index_.emplace(t, v.tokens_.size()).second) v.tokens_.push_back(t);
  }
  return v;
}

std::optional<std::size_t> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Vocabulary::id(std::string_view token) const { return find(token).value_or(kUnk); }

std::vector<std::size_t> Vocabulary::encode(const TokenList& tokens) const {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

TokenList Vocabulary::decode(const std::vector<std::size_t>& ids) const {
  TokenList out;
  for (std::size_t i : ids) {
    if (i == kEos) break;
    if (i == kPad || i == kSos) continue;
    out.push_back(token(i));
  }
  return out;
}

Vocabulary build_vocab(const std::vector<TokenList>& corpus, std::size_t size_limit,
                       bool remove_stopwords) {
  if (size_limit <= Vocabulary::kNumReserved) {
    throw ContractError("build_vocab: size_limit must exceed the reserved entries");
  }
  std::map<std::string, std::size_t> counts;
  for (const auto& doc : corpus) {
    for (const auto& t : doc) {
      if (remove_stopwords && is_stopword(t)) continue;
      ++counts[t];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> keep;
  const std::size_t room = size_limit - Vocabulary::kNumReserved;
  for (std::size_t i = 0; i < ranked.size() && keep.size() < room; ++i) {
    keep.push_back(ranked[i].first);
  }
  return Vocabulary::from_tokens(keep);
}

double TfIdfDoc::weight(std::size_t index) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), index,
                             [](const auto& e, std::size_t i) { return e.first < i; });
  return it != entries.end() && it->first == index ? it->second : 0.0;
}

std::vector<double> TfIdfDoc::dense(std::size_t dim) const {
  std::vector<double> out(dim, 0.0);
  for (const auto& [i, w] : entries) out.at(i) = w;
  return out;
}

std::vector<TfIdfDoc> compute_tfidf(const std::vector<TokenList>& documents,
                                    const Vocabulary& vocab) {
  const std::size_t dim = vocab.content_size();
  std::vector<std::map<std::size_t, std::size_t>> counts(documents.size());
  std::vector<std::size_t> df(dim, 0);
  for (std::size_t d = 0; d < documents.size(); ++d) {
    for (const auto& t : documents[d]) {
      const auto id = vocab.find(t);
      if (!id || *id < Vocabulary::kNumReserved) continue;
      ++counts[d][*id - Vocabulary::kNumReserved];
    }
    for (const auto& [w, c] : counts[d]) ++df[w];
  }
  const double n = static_cast<double>(documents.size());
  std::vector<TfIdfDoc> out(documents.size());
  for (std::size_t d = 0; d < documents.size(); ++d) {
    for (const auto& [w, c] : counts[d]) {
      const double idf = std::log(n / (1.0 + static_cast<double>(df[w])));
      const double weight = std::max(0.0, static_cast<double>(c) * idf);
      if (weight > 0.0) out[d].entries.emplace_back(w, weight);
    }
  }
  return out;
}

const std::vector<double>* EmbeddingTable::find(const std::string& token) const {
  auto it = vectors.find(token);
  return it == vectors.end() ? nullptr : &it->second;
}

EmbeddingTable parse_embeddings(std::istream& in, const Vocabulary& vocab) {
  EmbeddingTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::istringstream fields(line);
    std::string token;
    fields >> token;
    std::vector<double> vec;
    std::string num;
    while (fields >> num) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), v);
      if (ec != std::errc() || ptr != num.data() + num.size() || !std::isfinite(v)) {
        throw ParseError("non-numeric embedding value '" + num + "'", line_no);
      }
      vec.push_back(v);
    }
    if (vec.empty()) throw ParseError("embedding line has no values", line_no);
    if (table.dim == 0) table.dim = vec.size();
    if (vec.size() != table.dim) {
      throw ParseError("embedding dimension " + std::to_string(vec.size()) + ", expected " +
                           std::to_string(table.dim),
                       line_no);
    }
    if (vocab.contains(token)) table.vectors.emplace(token, std::move(vec));
  }
  return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return parse_embeddings(in, vocab);
}

}  // namespace pee::corpus
