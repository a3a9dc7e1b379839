#pragma once
// Subcommand bodies behind pee::cli::run.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pee/cli.hpp"

namespace pee::cli::detail {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> data;
  std::string valid;
  std::string topic;
  std::string model;
  std::string expansions;
  std::string valid_expansions;
  std::string candidates;
  std::string persona;
  std::string embeddings;
  bool greedy = false;
  bool diagnostics = false;
  std::size_t threads = 1;
};

struct Streams {
  std::istream& in;
  std::ostream& out;
  std::ostream& err;
};

void pretrain_topic(const Options& opt, Streams io);
void expand(const Options& opt, Streams io);
void train(const Options& opt, Streams io);
void generate(const Options& opt, Streams io);
void eval(const Options& opt, Streams io);
void chat(const Options& opt, Streams io);

}  // namespace pee::cli::detail
