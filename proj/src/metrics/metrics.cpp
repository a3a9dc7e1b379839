#include "pee/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>

#include "pee/error.hpp"
#include "pee/expansion.hpp"

namespace pee::metrics {

using corpus::TokenList;

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts ngrams(const TokenList& tokens, std::size_t n) {
  NgramCounts out;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++out[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                   tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return out;
}

std::vector<std::vector<double>> embedded(const TokenList& tokens, const corpus::EmbeddingTable& table) {
  std::vector<std::vector<double>> out;
  for (const auto& t : tokens) {
    if (const auto* v = table.find(t)) out.push_back(*v);
  }
  return out;
}

std::vector<double> mean_vector(const std::vector<std::vector<double>>& vs) {
  std::vector<double> m(vs.front().size(), 0.0);
  for (const auto& v : vs) {
    for (std::size_t d = 0; d < m.size(); ++d) m[d] += v[d];
  }
  for (double& x : m) x /= static_cast<double>(vs.size());
  return m;
}

std::vector<double> extrema_vector(const std::vector<std::vector<double>>& vs) {
  std::vector<double> m(vs.front().size(), 0.0);
  for (const auto& v : vs) {
    for (std::size_t d = 0; d < m.size(); ++d) {
      if (std::abs(v[d]) > std::abs(m[d])) m[d] = v[d];
    }
  }
  return m;
}

double greedy_direction(const std::vector<std::vector<double>>& from,
                        const std::vector<std::vector<double>>& to) {
  double total = 0.0;
  for (const auto& a : from) {
    double best = -1.0;
    for (const auto& b : to) best = std::max(best, expansion::cosine(a, b));
    total += best;
  }
  return total / static_cast<double>(from.size());
}

}  // namespace

double bleu_n(const std::vector<TokenList>& candidates, const std::vector<TokenList>& references,
              int n) {
  if (candidates.size() != references.size()) {
    throw ContractError("bleu_n: candidate and reference counts differ");
  }
  if (n < 1 || n > 4) throw ContractError("bleu_n: order must be in 1..4");
  std::vector<std::size_t> matched(static_cast<std::size_t>(n), 0);
  std::vector<std::size_t> total(static_cast<std::size_t>(n), 0);
  std::size_t cand_len = 0, ref_len = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    cand_len += candidates[i].size();
    ref_len += references[i].size();
    for (std::size_t k = 1; k <= static_cast<std::size_t>(n); ++k) {
      const NgramCounts ref = ngrams(references[i], k);
      for (const auto& [gram, count] : ngrams(candidates[i], k)) {
        auto it = ref.find(gram);
        matched[k - 1] += it == ref.end() ? 0 : std::min(count, it->second);
        total[k - 1] += count;
      }
    }
  }
  double log_sum = 0.0;
  for (std::size_t k = 0; k < matched.size(); ++k) {
    if (matched[k] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(matched[k]) / static_cast<double>(total[k]));
  }
  const double bp = cand_len > ref_len
                        ? 1.0
                        : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len));
  return 100.0 * bp * std::exp(log_sum / n);
}

double f1_tokens(const TokenList& candidate, const TokenList& reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  std::map<std::string, std::size_t> ref;
  for (const auto& t : reference) ++ref[t];
  std::size_t common = 0;
  for (const auto& t : candidate) {
    auto it = ref.find(t);
    if (it != ref.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  if (common == 0) return 0.0;
  const double p = static_cast<double>(common) / static_cast<double>(candidate.size());
  const double r = static_cast<double>(common) / static_cast<double>(reference.size());
  return 2.0 * p * r / (p + r);
}

double emb_average(const TokenList& candidate, const TokenList& reference,
                   const corpus::EmbeddingTable& table) {
  const auto c = embedded(candidate, table), r = embedded(reference, table);
  if (c.empty() || r.empty()) return 0.0;
  return expansion::cosine(mean_vector(c), mean_vector(r));
}

double emb_extrema(const TokenList& candidate, const TokenList& reference,
                   const corpus::EmbeddingTable& table) {
  const auto c = embedded(candidate, table), r = embedded(reference, table);
  if (c.empty() || r.empty()) return 0.0;
  return expansion::cosine(extrema_vector(c), extrema_vector(r));
}

double emb_greedy(const TokenList& candidate, const TokenList& reference,
                  const corpus::EmbeddingTable& table) {
  const auto c = embedded(candidate, table), r = embedded(reference, table);
  if (c.empty() || r.empty()) return 0.0;
  return 0.5 * (greedy_direction(c, r) + greedy_direction(r, c));
}

double persona_use_ratio(const std::vector<TokenList>& persona, const std::vector<TokenList>& responses) {
  std::set<std::string> words;
  for (const auto& s : persona) {
    for (const auto& t : corpus::content_tokens(s)) words.insert(t);
  }
  if (words.empty()) return 0.0;
  std::set<std::string> used;
  for (const auto& r : responses) {
    for (const auto& t : r) {
      if (words.count(t) > 0) used.insert(t);
    }
  }
  return static_cast<double>(used.size()) / static_cast<double>(words.size());
}

EvalReport evaluate(const std::vector<EvalItem>& items, const corpus::EmbeddingTable& table) {
  EvalReport rep;
  if (items.empty()) return rep;
  std::vector<TokenList> cands, refs;
  std::map<std::size_t, std::pair<const EvalItem*, std::vector<TokenList>>> by_conv;
  for (const auto& it : items) {
    cands.push_back(it.candidate);
    refs.push_back(it.reference);
    rep.f1 += f1_tokens(it.candidate, it.reference);
    rep.emb_average += emb_average(it.candidate, it.reference, table);
    rep.emb_extrema += emb_extrema(it.candidate, it.reference, table);
    rep.emb_greedy += emb_greedy(it.candidate, it.reference, table);
    auto& slot = by_conv[it.conversation];
    if (slot.first == nullptr) slot.first = &it;
    slot.second.push_back(it.candidate);
  }
  const double n = static_cast<double>(items.size());
  rep.f1 /= n;
  rep.emb_average /= n;
  rep.emb_extrema /= n;
  rep.emb_greedy /= n;
  rep.bleu1 = bleu_n(cands, refs, 1);
  rep.bleu2 = bleu_n(cands, refs, 2);
  rep.bleu3 = bleu_n(cands, refs, 3);
  rep.bleu4 = bleu_n(cands, refs, 4);
  for (const auto& [id, group] : by_conv) {
    rep.persona_use_ratio += persona_use_ratio(group.first->persona, group.second);
  }
  rep.persona_use_ratio /= static_cast<double>(by_conv.size());
  return rep;
}

}  // namespace pee::metrics
