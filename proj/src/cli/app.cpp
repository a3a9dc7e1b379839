#include <algorithm>
#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "pee/error.hpp"

namespace pee::cli {

namespace {

using detail::Options;

void common_flags(CLI::App& cmd, Options& opt) {
  cmd.add_option("--config", opt.config_path, "JSON configuration file")->check(CLI::ExistingFile);
  cmd.add_option("--seed", opt.seed, "random seed, overrides the config");
  cmd.add_option("--out", opt.out, "output path");
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  Options opt;
  CLI::App app{"Persona exploration and exploitation dialogue toolkit", "pee"};
  app.require_subcommand(1);

  auto* pretrain = app.add_subcommand("pretrain-topic", "train the topic model on dialogue corpora");
  common_flags(*pretrain, opt);
  pretrain->add_option("--data", opt.data, "Persona-Chat format corpora (repeatable)");

  auto* expand = app.add_subcommand("expand", "write expanded persona words per conversation");
  common_flags(*expand, opt);
  expand->add_option("--topic", opt.topic, "topic model checkpoint")->required();
  expand->add_option("--data", opt.data, "dialogue file")->expected(1);

  auto* train = app.add_subcommand("train", "train the dialogue model");
  common_flags(*train, opt);
  train->add_option("--data", opt.data, "training dialogues")->expected(1);
  train->add_option("--valid", opt.valid, "validation dialogues");
  train->add_option("--expansions", opt.expansions, "expansion records for the training data");
  train->add_option("--valid-expansions", opt.valid_expansions, "expansion records for the validation data");
  train->add_option("--embeddings", opt.embeddings, "pretrained word vectors");

  auto* generate = app.add_subcommand("generate", "generate responses for test dialogues");
  common_flags(*generate, opt);
  generate->add_option("--model", opt.model, "dialogue model checkpoint")->required();
  generate->add_option("--data", opt.data, "test dialogues")->expected(1);
  generate->add_option("--expansions", opt.expansions, "expansion records for the test data");
  generate->add_flag("--greedy", opt.greedy, "greedy decoding instead of beam search");
  generate->add_flag("--diagnostics", opt.diagnostics, "include persona and memory weights");
  generate->add_option("--threads", opt.threads, "worker threads")->check(CLI::PositiveNumber);

  auto* eval = app.add_subcommand("eval", "score responses against references");
  common_flags(*eval, opt);
  eval->add_option("--data", opt.data, "reference dialogues")->expected(1);
  eval->add_option("--candidates", opt.candidates, "records written by generate");
  eval->add_option("--model", opt.model, "generate candidates with this checkpoint");
  eval->add_option("--expansions", opt.expansions, "expansion records for the reference data");
  eval->add_option("--embeddings", opt.embeddings, "word vectors for the embedding metrics");
  eval->add_flag("--greedy", opt.greedy, "greedy decoding instead of beam search");
  eval->add_option("--threads", opt.threads, "worker threads")->check(CLI::PositiveNumber);

  auto* chat = app.add_subcommand("chat", "talk to a trained model on stdin");
  common_flags(*chat, opt);
  chat->add_option("--model", opt.model, "dialogue model checkpoint")->required();
  chat->add_option("--persona", opt.persona, "persona sentences, one per line")->required();
  chat->add_option("--topic", opt.topic, "topic checkpoint used to expand the persona");
  chat->add_flag("--greedy", opt.greedy, "greedy decoding instead of beam search");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  const detail::Streams io{in, out, err};
  try {
    if (pretrain->parsed()) detail::pretrain_topic(opt, io);
    if (expand->parsed()) detail::expand(opt, io);
    if (train->parsed()) detail::train(opt, io);
    if (generate->parsed()) detail::generate(opt, io);
    if (eval->parsed()) detail::eval(opt, io);
    if (chat->parsed()) detail::chat(opt, io);
  } catch (const UserError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace pee::cli
