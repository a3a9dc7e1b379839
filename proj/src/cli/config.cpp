#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "pee/cli.hpp"

namespace pee::cli {

using nlohmann::json;

namespace {

// Walks one JSON object, consuming known keys and rejecting the rest.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw UserError("config: " + label() + " must be an object");
  }

  // Call once every known key has been read.
  void done() const {
    for (const auto& [key, value] : node_.items()) {
      if (!seen_.count(key)) throw UserError("config: unknown key " + qualify(key));
    }
  }

  template <typename T>
  void read(const char* key, T& target) {
    seen_.insert(key);
    const auto it = node_.find(key);
    if (it == node_.end()) return;
    try {
      target = it->template get<T>();
    } catch (const json::exception&) {
      throw UserError("config: " + qualify(key) + " has the wrong type");
    }
  }

  void size(const char* key, std::size_t& target) {
    seen_.insert(key);
    const auto it = node_.find(key);
    if (it == node_.end()) return;
    if (!it->is_number_unsigned() || it->get<std::size_t>() == 0) {
      throw UserError("config: " + qualify(key) + " must be a positive integer");
    }
    target = it->get<std::size_t>();
  }

  void positive(const char* key, double& target) {
    read(key, target);
    if (!(target > 0.0)) throw UserError("config: " + qualify(key) + " must be positive");
  }

  void non_negative(const char* key, double& target) {
    read(key, target);
    if (!(target >= 0.0)) throw UserError("config: " + qualify(key) + " must be non-negative");
  }

  const json* child(const char* key) {
    seen_.insert(key);
    const auto it = node_.find(key);
    return it == node_.end() ? nullptr : &*it;
  }

  std::string qualify(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string label() const { return path_.empty() ? "document" : path_; }

  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string resolve(const std::string& p, const std::filesystem::path& base) {
  if (p.empty() || base.empty() || std::filesystem::path(p).is_absolute()) return p;
  return (base / p).lexically_normal().string();
}

}  // namespace

Config parse_config(const std::string& json_text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw UserError(std::string("config: invalid JSON: ") + e.what());
  }
  Config c;
  Section root(doc, "");
  if (const json* n = root.child("paths")) {
    Section s(*n, "paths");
    s.read("train", c.paths.train);
    s.read("valid", c.paths.valid);
    s.read("test", c.paths.test);
    s.read("embeddings", c.paths.embeddings);
    s.read("topic_corpora", c.paths.topic_corpora);
    s.done();
  }
  if (const json* n = root.child("topic")) {
    Section s(*n, "topic");
    s.size("num_topics", c.topic.num_topics);
    s.size("vocab_size", c.topic.vocab_size);
    s.size("hidden", c.topic.hidden);
    s.read("epochs", c.topic.epochs);
    s.size("batch_size", c.topic.batch_size);
    s.positive("learning_rate", c.topic.learning_rate);
    s.done();
  }
  if (const json* n = root.child("expansion")) {
    Section s(*n, "expansion");
    s.read("neighbors", c.expansion.neighbors);
    s.read("max_words", c.expansion.max_words);
    s.done();
  }
  if (const json* n = root.child("model")) {
    Section s(*n, "model");
    s.size("vocab_size", c.model.vocab_size);
    s.size("embed_dim", c.model.embed_dim);
    s.size("hidden", c.model.hidden);
    s.size("hops", c.model.hops);
    s.size("batch_size", c.model.batch_size);
    s.positive("learning_rate", c.model.learning_rate);
    s.positive("clip_norm", c.model.clip_norm);
    s.read("epochs", c.model.epochs);
    s.size("beam", c.model.beam);
    s.size("max_len", c.model.max_len);
    s.done();
  }
  if (const json* n = root.child("losses")) {
    Section s(*n, "losses");
    s.non_negative("gamma1", c.losses.gamma1);
    s.non_negative("gamma2", c.losses.gamma2);
    s.non_negative("lambda", c.losses.lambda);
    s.non_negative("threshold", c.losses.threshold);
    s.done();
  }
  root.read("seed", c.seed);
  root.done();

  if (c.topic.vocab_size <= corpus::Vocabulary::kNumReserved ||
      c.model.vocab_size <= corpus::Vocabulary::kNumReserved) {
    throw UserError("config: vocab_size must exceed the 4 reserved entries");
  }
  for (std::string* p : {&c.paths.train, &c.paths.valid, &c.paths.test, &c.paths.embeddings}) {
    *p = resolve(*p, base_dir);
  }
  for (auto& p : c.paths.topic_corpora) p = resolve(p, base_dir);
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UserError("cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.parent_path());
}

std::string config_to_json(const Config& c) {
  json j;
  j["paths"] = {{"train", c.paths.train},
                {"valid", c.paths.valid},
                {"test", c.paths.test},
                {"embeddings", c.paths.embeddings},
                {"topic_corpora", c.paths.topic_corpora}};
  j["topic"] = {{"num_topics", c.topic.num_topics}, {"vocab_size", c.topic.vocab_size},
                {"hidden", c.topic.hidden},         {"epochs", c.topic.epochs},
                {"batch_size", c.topic.batch_size}, {"learning_rate", c.topic.learning_rate}};
  j["expansion"] = {{"neighbors", c.expansion.neighbors}, {"max_words", c.expansion.max_words}};
  j["model"] = {{"vocab_size", c.model.vocab_size}, {"embed_dim", c.model.embed_dim},
                {"hidden", c.model.hidden},         {"hops", c.model.hops},
                {"batch_size", c.model.batch_size}, {"learning_rate", c.model.learning_rate},
                {"clip_norm", c.model.clip_norm},   {"epochs", c.model.epochs},
                {"beam", c.model.beam},             {"max_len", c.model.max_len}};
  j["losses"] = {{"gamma1", c.losses.gamma1},
                 {"gamma2", c.losses.gamma2},
                 {"lambda", c.losses.lambda},
                 {"threshold", c.losses.threshold}};
  j["seed"] = c.seed;
  return j.dump();
}

}  // namespace pee::cli
