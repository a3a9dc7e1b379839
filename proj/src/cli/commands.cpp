#include "commands.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "pee/error.hpp"
#include "pee/expansion.hpp"
#include "pee/metrics.hpp"
#include "pee/net.hpp"
#include "pee/topic.hpp"
#include "pee/training.hpp"

namespace pee::cli::detail {

using corpus::Vocabulary;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

Config effective_config(const Options& opt) {
  Config c = opt.config_path.empty() ? Config{} : load_config(opt.config_path);
  if (opt.seed) c.seed = *opt.seed;
  return c;
}

const std::string& require(const std::string& value, const std::string& what) {
  if (value.empty()) throw UserError("missing " + what);
  return value;
}

std::vector<corpus::Conversation> read_dialogues(const std::string& path) {
  if (!fs::is_regular_file(path)) throw UserError("cannot read dialogue file " + path);
  return corpus::load_personachat(path);
}

// Writes to --out when given, otherwise to the command's stdout.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) {
    if (path.empty()) {
      stream_ = &fallback;
      return;
    }
    file_.open(path, std::ios::trunc);
    if (!file_) throw UserError("cannot write " + path);
    stream_ = &file_;
  }
  std::ostream& operator*() { return *stream_; }

 private:
  std::ofstream file_;
  std::ostream* stream_ = nullptr;
};

Vocabulary vocab_from_checkpoint(const std::vector<std::string>& tokens) {
  const Vocabulary reserved;
  if (tokens.size() < Vocabulary::kNumReserved ||
      !std::equal(reserved.tokens().begin(), reserved.tokens().end(), tokens.begin())) {
    throw UserError("checkpoint: vocabulary lacks the reserved entries");
  }
  Vocabulary v = Vocabulary::from_tokens({tokens.begin() + Vocabulary::kNumReserved, tokens.end()});
  if (v.size() != tokens.size()) throw UserError("checkpoint: vocabulary has duplicate tokens");
  return v;
}

json parse_metadata(const Checkpoint& c) {
  try {
    return json::parse(c.metadata);
  } catch (const json::exception&) {
    throw UserError("checkpoint: unreadable metadata");
  }
}

template <typename T>
T meta_field(const json& meta, const char* section, const char* key) {
  try {
    return meta.at(section).at(key).get<T>();
  } catch (const json::exception&) {
    throw UserError(std::string("checkpoint: metadata lacks ") + section + "." + key);
  }
}

// ---- topic checkpoints ----

struct LoadedTopic {
  topic::TopicModel model;
  Vocabulary vocab;
  std::size_t vocab_limit = 0;
};

LoadedTopic load_topic(const std::string& path) {
  Checkpoint c = load_checkpoint(require(path, "--topic checkpoint"));
  if (c.kind != "topic") throw UserError(path + " is a '" + c.kind + "' checkpoint, not a topic model");
  const json meta = parse_metadata(c);
  Vocabulary vocab = vocab_from_checkpoint(c.vocabulary);
  const auto limit = meta_field<std::size_t>(meta, "topic", "vocab_size");
  try {
    auto model = topic::TopicModel::from_params(std::move(c.params));
    if (model.vocab_dim() != vocab.content_size()) {
      throw UserError("topic checkpoint: model covers " + std::to_string(model.vocab_dim()) +
                      " words but its vocabulary has " + std::to_string(vocab.content_size()));
    }
    return {std::move(model), std::move(vocab), limit};
  } catch (const ContractError& e) {
    throw UserError(std::string("topic checkpoint: ") + e.what());
  }
}

// ---- PEE checkpoints ----

struct LoadedModel {
  net::PeeModel model;
  Vocabulary vocab;
};

LoadedModel load_model(const std::string& path) {
  Checkpoint c = load_checkpoint(require(path, "--model checkpoint"));
  if (c.kind != "pee") throw UserError(path + " is a '" + c.kind + "' checkpoint, not a dialogue model");
  const json meta = parse_metadata(c);
  net::ModelConfig mc;
  mc.vocab_size = meta_field<std::size_t>(meta, "model", "vocab_size");
  mc.embed_dim = meta_field<std::size_t>(meta, "model", "embed_dim");
  mc.hidden = meta_field<std::size_t>(meta, "model", "hidden");
  mc.hops = meta_field<std::size_t>(meta, "model", "hops");
  Vocabulary vocab = vocab_from_checkpoint(c.vocabulary);
  if (vocab.size() != mc.vocab_size) throw UserError("checkpoint: vocabulary size disagrees with the model");
  try {
    return {net::PeeModel::from_params(mc, std::move(c.params)), std::move(vocab)};
  } catch (const ContractError& e) {
    throw UserError(std::string("model checkpoint: ") + e.what());
  }
}

Checkpoint model_checkpoint(const net::PeeModel& model, const Vocabulary& vocab, const Config& cfg,
                            std::size_t epoch) {
  Checkpoint c;
  c.kind = "pee";
  const auto& mc = model.config();
  json meta;
  meta["model"] = {{"vocab_size", mc.vocab_size}, {"embed_dim", mc.embed_dim}, {"hidden", mc.hidden},
                   {"hops", mc.hops}};
  meta["epoch"] = epoch;
  meta["config"] = json::parse(config_to_json(cfg));
  c.metadata = meta.dump();
  c.vocabulary = vocab.tokens();
  for (std::size_t i = 0; i < model.params().size(); ++i) {
    c.params.add(model.params().name(i), model.params().tensor(i));
  }
  return c;
}

// ---- expansion records ----

using ExpansionMap = std::map<std::size_t, std::vector<std::string>>;

ExpansionMap read_expansions(const std::string& path) {
  ExpansionMap out;
  if (path.empty()) return out;
  std::ifstream in(path);
  if (!in) throw UserError("cannot read expansions " + path);
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json r = json::parse(line);
      auto& words = out[r.at("conversation").get<std::size_t>()];
      for (const auto& w : r.at("words")) words.push_back(w.at(0).get<std::string>());
    } catch (const json::exception&) {
      throw UserError(path + ": line " + std::to_string(n) + ": malformed expansion record");
    }
  }
  return out;
}

const std::vector<std::string>& expansion_for(const ExpansionMap& m, std::size_t conversation,
                                              std::size_t& missing) {
  static const std::vector<std::string> kNone;
  const auto it = m.find(conversation);
  if (it == m.end()) {
    ++missing;
    return kNone;
  }
  return it->second;
}

void warn_missing(std::ostream& err, std::size_t missing, const std::string& what) {
  if (missing > 0) {
    err << "warning: " << missing << ' ' << what
        << " had no expansion record; their external memory is empty\n";
  }
}

json loss_json(const net::LossValues& v) {
  return {{"total", v.total}, {"nll", v.nll}, {"p_match", v.p_match}, {"p_bows", v.p_bows}};
}

net::LossWeights loss_weights(const Config& c) {
  return {c.losses.gamma1, c.losses.gamma2, c.losses.lambda, c.losses.threshold};
}

net::GenerateConfig generate_config(const Config& c, const Options& opt) {
  return {opt.greedy ? net::SearchMode::Greedy : net::SearchMode::Beam, opt.greedy ? 1 : c.model.beam,
          c.model.max_len};
}

// Runs fn(i) for i in [0, n) over up to `threads` workers. Results land in
// caller-owned slots, so output order never depends on scheduling.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += threads) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct GeneratedResponse {
  corpus::TokenList tokens;
  net::Generation generation;
};

std::vector<GeneratedResponse> generate_all(const LoadedModel& lm,
                                            const std::vector<corpus::DialogueExample>& examples,
                                            const ExpansionMap& expansions,
                                            const net::GenerateConfig& gc, std::size_t threads,
                                            std::ostream& err) {
  std::vector<net::DialogueInput> inputs;
  std::size_t missing = 0;
  for (const auto& ex : examples) {
    inputs.push_back(net::make_input(ex.persona, ex.history,
                                     expansion_for(expansions, ex.conversation, missing), lm.vocab));
  }
  if (!expansions.empty()) warn_missing(err, missing, "examples");
  std::vector<GeneratedResponse> out(examples.size());
  parallel_for(examples.size(), threads, [&](std::size_t i) {
    out[i].generation = net::generate(lm.model, inputs[i], gc);
    out[i].tokens = lm.vocab.decode(out[i].generation.tokens);
  });
  return out;
}

std::vector<corpus::DialogueExample> examples_with_persona(const std::vector<corpus::Conversation>& convs,
                                                           std::ostream& err) {
  std::vector<corpus::DialogueExample> out;
  std::size_t skipped = 0;
  for (const auto& ex : corpus::expand_examples(convs)) {
    const bool has_persona =
        std::any_of(ex.persona.begin(), ex.persona.end(), [](const auto& s) { return !s.empty(); });
    if (has_persona) {
      out.push_back(ex);
    } else {
      ++skipped;
    }
  }
  if (skipped > 0) err << "warning: skipped " << skipped << " examples without persona sentences\n";
  return out;
}

}  // namespace

void pretrain_topic(const Options& opt, Streams io) {
  const Config cfg = effective_config(opt);
  const std::string& out_path = require(opt.out, "--out checkpoint path");
  std::vector<std::string> paths = opt.data;
  if (paths.empty()) paths = cfg.paths.topic_corpora;
  if (paths.empty() && !cfg.paths.train.empty()) paths.push_back(cfg.paths.train);
  if (paths.empty()) throw UserError("no corpora: pass --data or set paths.topic_corpora");

  std::vector<corpus::TokenList> docs;
  for (const auto& p : paths) {
    for (const auto& c : read_dialogues(p)) docs.push_back(c.document());
  }
  const Vocabulary vocab = corpus::build_vocab(docs, cfg.topic.vocab_size, true);
  if (vocab.content_size() == 0) throw UserError("corpora contain no content words");
  const auto tfidf = corpus::compute_tfidf(docs, vocab);

  topic::TopicConfig tc;
  tc.num_topics = cfg.topic.num_topics;
  tc.hidden = cfg.topic.hidden;
  tc.epochs = cfg.topic.epochs;
  tc.batch_size = cfg.topic.batch_size;
  tc.learning_rate = cfg.topic.learning_rate;
  tc.seed = cfg.seed;
  auto result = topic::train_topic_model(tfidf, vocab.content_size(), tc);
  for (std::size_t e = 0; e < result.epoch_losses.size(); ++e) {
    io.out << json{{"epoch", e + 1}, {"loss", result.epoch_losses[e]}}.dump() << '\n';
  }

  Checkpoint c;
  c.kind = "topic";
  json meta;
  meta["topic"] = {{"num_topics", tc.num_topics}, {"hidden", tc.hidden},
                   {"vocab_size", cfg.topic.vocab_size}, {"documents", docs.size()}};
  meta["config"] = json::parse(config_to_json(cfg));
  c.metadata = meta.dump();
  c.vocabulary = vocab.tokens();
  for (std::size_t i = 0; i < result.model.params().size(); ++i) {
    c.params.add(result.model.params().name(i), result.model.params().tensor(i));
  }
  save_checkpoint(out_path, c);
}

void expand(const Options& opt, Streams io) {
  const Config cfg = effective_config(opt);
  const LoadedTopic lt = load_topic(opt.topic);
  if (lt.vocab_limit != cfg.topic.vocab_size) {
    throw UserError("topic checkpoint was built with topic.vocab_size " + std::to_string(lt.vocab_limit) +
                    " but the config asks for " + std::to_string(cfg.topic.vocab_size));
  }
  const std::string path = opt.data.empty() ? cfg.paths.train : opt.data.front();
  const auto convs = read_dialogues(require(path, "dialogue data (--data or paths.train)"));
  const auto vectors = topic::word_topic_vectors(lt.model, lt.vocab);
  const expansion::ExpansionConfig ec{cfg.expansion.neighbors, cfg.expansion.max_words};
  Sink sink(opt.out, io.out);
  for (const auto& conv : convs) {
    const auto r = expansion::expand(conv, vectors, ec);
    json words = json::array();
    for (const auto& w : r.words) words.push_back(json::array({w.token, w.score}));
    *sink << json{{"conversation", r.conversation}, {"words", words}}.dump() << '\n';
  }
}

void train(const Options& opt, Streams io) {
  const Config cfg = effective_config(opt);
  const std::string& out_path = require(opt.out, "--out checkpoint path");
  const std::string train_path = opt.data.empty() ? cfg.paths.train : opt.data.front();
  const std::string valid_path = opt.valid.empty() ? cfg.paths.valid : opt.valid;
  const auto train_convs = read_dialogues(require(train_path, "training data (--data or paths.train)"));
  const auto valid_convs = valid_path.empty() ? std::vector<corpus::Conversation>{} : read_dialogues(valid_path);

  std::vector<corpus::TokenList> text;
  for (const auto& c : train_convs) {
    text.insert(text.end(), c.persona.begin(), c.persona.end());
    text.insert(text.end(), c.utterances.begin(), c.utterances.end());
  }
  const Vocabulary vocab = corpus::build_vocab(text, cfg.model.vocab_size, false);
  corpus::EmbeddingTable embeddings;
  const std::string emb_path = opt.embeddings.empty() ? cfg.paths.embeddings : opt.embeddings;
  if (!emb_path.empty()) {
    if (!fs::is_regular_file(emb_path)) throw UserError("cannot read embeddings " + emb_path);
    embeddings = corpus::load_embeddings(emb_path, vocab);
    if (embeddings.dim != cfg.model.embed_dim) {
      io.err << "warning: embeddings have dimension " << embeddings.dim << ", model.embed_dim is "
             << cfg.model.embed_dim << "; using random initialisation\n";
    }
  }

  const net::LossWeights weights = loss_weights(cfg);
  auto prepare = [&](const std::vector<corpus::Conversation>& convs, const std::string& exp_path,
                     const char* label) {
    const ExpansionMap exp = read_expansions(exp_path);
    std::vector<net::TrainingExample> out;
    std::size_t missing = 0;
    for (const auto& ex : examples_with_persona(convs, io.err)) {
      out.push_back(net::prepare_example(ex, expansion_for(exp, ex.conversation, missing), vocab, weights));
    }
    warn_missing(io.err, missing, label);
    return out;
  };
  const auto train_set = prepare(train_convs, opt.expansions, "training examples");
  const auto valid_set = prepare(valid_convs, opt.valid_expansions, "validation examples");
  if (train_set.empty()) throw UserError("training data yields no examples");

  nk::Rng rng(cfg.seed);
  net::PeeModel model = net::PeeModel::create(
      {vocab.size(), cfg.model.embed_dim, cfg.model.hidden, cfg.model.hops}, rng, &vocab, &embeddings);
  net::TrainConfig tc;
  tc.epochs = cfg.model.epochs;
  tc.batch_size = cfg.model.batch_size;
  tc.learning_rate = cfg.model.learning_rate;
  tc.clip_norm = cfg.model.clip_norm;
  tc.weights = weights;

  if (tc.epochs == 0) save_checkpoint(out_path, model_checkpoint(model, vocab, cfg, 0));
  net::train(model, train_set, valid_set, tc, rng, [&](const net::EpochRecord& r) {
    json rec{{"epoch", r.epoch}, {"train", loss_json(r.train)}, {"best", r.best}};
    rec["valid"] = r.valid ? loss_json(*r.valid) : json(nullptr);
    io.out << rec.dump() << '\n' << std::flush;
    if (r.best) save_checkpoint(out_path, model_checkpoint(model, vocab, cfg, r.epoch));
  });
}

void generate(const Options& opt, Streams io) {
  const Config cfg = effective_config(opt);
  const LoadedModel lm = load_model(opt.model);
  const std::string path = opt.data.empty() ? cfg.paths.test : opt.data.front();
  const auto examples = examples_with_persona(read_dialogues(require(path, "test data (--data or paths.test)")), io.err);
  const auto responses =
      generate_all(lm, examples, read_expansions(opt.expansions), generate_config(cfg, opt), opt.threads, io.err);
  Sink sink(opt.out, io.out);
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& g = responses[i].generation;
    json rec{{"conversation", examples[i].conversation},
             {"turn", examples[i].turn},
             {"response", corpus::detokenize(responses[i].tokens)},
             {"log_prob", g.log_prob}};
    if (opt.diagnostics) {
      rec["persona_weights"] = g.persona_weights;
      json steps = json::array();
      for (std::size_t t = 0; t < g.steps.size(); ++t) {
        steps.push_back({{"token", lm.vocab.token(g.tokens[t])},
                         {"attention", g.steps[t].attention},
                         {"word_memory", g.steps[t].word_memory},
                         {"external_memory", g.steps[t].external_memory}});
      }
      rec["steps"] = steps;
    }
    *sink << rec.dump() << '\n';
  }
}

void eval(const Options& opt, Streams io) {
  const Config cfg = effective_config(opt);
  const std::string path = opt.data.empty() ? cfg.paths.test : opt.data.front();
  const auto examples = examples_with_persona(read_dialogues(require(path, "reference data (--data or paths.test)")), io.err);

  std::vector<corpus::TokenList> candidates;
  if (!opt.candidates.empty()) {
    std::ifstream in(opt.candidates);
    if (!in) throw UserError("cannot read candidates " + opt.candidates);
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        candidates.push_back(corpus::tokenize(json::parse(line).at("response").get<std::string>()));
      } catch (const json::exception&) {
        throw UserError(opt.candidates + ": line " + std::to_string(n) + ": expected a record with a response");
      }
    }
  } else if (!opt.model.empty()) {
    const LoadedModel lm = load_model(opt.model);
    for (auto& r : generate_all(lm, examples, read_expansions(opt.expansions), generate_config(cfg, opt),
                                opt.threads, io.err)) {
      candidates.push_back(std::move(r.tokens));
    }
  } else {
    throw UserError("eval needs --candidates or --model");
  }
  if (candidates.size() != examples.size()) {
    throw UserError("got " + std::to_string(candidates.size()) + " candidates for " +
                    std::to_string(examples.size()) + " reference responses");
  }

  std::vector<metrics::EvalItem> items;
  std::vector<corpus::TokenList> all_tokens;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    items.push_back({examples[i].conversation, examples[i].persona, candidates[i], examples[i].response});
    all_tokens.push_back(candidates[i]);
    all_tokens.push_back(examples[i].response);
  }
  corpus::EmbeddingTable table;
  const std::string emb_path = opt.embeddings.empty() ? cfg.paths.embeddings : opt.embeddings;
  if (emb_path.empty()) {
    io.err << "warning: no embeddings configured; Average, Extrema and Greedy are reported as 0\n";
  } else {
    if (!fs::is_regular_file(emb_path)) throw UserError("cannot read embeddings " + emb_path);
    table = corpus::load_embeddings(emb_path, corpus::build_vocab(all_tokens, SIZE_MAX, false));
  }
  const auto r = metrics::evaluate(items, table);
  Sink sink(opt.out, io.out);
  *sink << json{{"BLEU1", r.bleu1},       {"BLEU2", r.bleu2},       {"BLEU3", r.bleu3},
                {"BLEU4", r.bleu4},       {"F1", r.f1},             {"Average", r.emb_average},
                {"Extrema", r.emb_extrema}, {"Greedy", r.emb_greedy}, {"persona_use_ratio", r.persona_use_ratio}}
               .dump()
        << '\n';
}

void chat(const Options& opt, Streams io) {
  const Config cfg = effective_config(opt);
  const LoadedModel lm = load_model(opt.model);
  std::ifstream pin(require(opt.persona, "--persona file"));
  if (!pin) throw UserError("cannot read persona " + opt.persona);
  std::vector<corpus::TokenList> persona;
  for (std::string line; std::getline(pin, line);) {
    if (auto t = corpus::tokenize(line); !t.empty()) persona.push_back(std::move(t));
  }
  if (persona.empty()) throw UserError("persona file has no sentences");

  std::vector<std::string> external;
  if (!opt.topic.empty()) {
    const LoadedTopic lt = load_topic(opt.topic);
    const auto vectors = topic::word_topic_vectors(lt.model, lt.vocab);
    const auto r = expansion::expand(0, expansion::persona_vocab(persona, vectors), vectors,
                                     {cfg.expansion.neighbors, cfg.expansion.max_words});
    for (const auto& w : r.words) external.push_back(w.token);
  }

  const auto gc = generate_config(cfg, opt);
  std::vector<corpus::TokenList> history;
  std::string line;
  while (true) {
    io.err << "> " << std::flush;
    if (!std::getline(io.in, line)) break;
    auto tokens = corpus::tokenize(line);
    if (tokens.empty()) continue;
    history.push_back(std::move(tokens));
    const auto input = net::make_input(persona, history, external, lm.vocab);
    const auto g = net::generate(lm.model, input, gc);
    history.push_back(lm.vocab.decode(g.tokens));
    io.out << corpus::detokenize(history.back()) << '\n' << std::flush;
  }
}

}  // namespace pee::cli::detail
