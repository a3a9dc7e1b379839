#pragma once
// Command-line pipeline: configuration, checkpoints and subcommands.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "pee/corpus.hpp"
#include "pee/numkit/params.hpp"

namespace pee::cli {

// Bad flags, unreadable or incompatible inputs. Maps to exit code 2.
class UserError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Config {
  struct Paths {
    std::string train, valid, test, embeddings;
    std::vector<std::string> topic_corpora;  // empty: use `train`
  } paths;
  struct Topic {
    std::size_t num_topics = 50;
    std::size_t vocab_size = 10000;  // V', reserved entries included
    std::size_t hidden = 256;
    std::size_t epochs = 50;
    std::size_t batch_size = 64;
    double learning_rate = 2e-3;
  } topic;
  struct Expansion {
    std::size_t neighbors = 20;
    std::size_t max_words = 100;
  } expansion;
  struct Model {
    std::size_t vocab_size = 20000;
    std::size_t embed_dim = 300;
    std::size_t hidden = 512;
    std::size_t hops = 3;
    std::size_t batch_size = 64;
    double learning_rate = 1e-4;
    double clip_norm = 5.0;
    std::size_t epochs = 10;
    std::size_t beam = 2;
    std::size_t max_len = 30;
  } model;
  struct Losses {
    double gamma1 = 0.1;
    double gamma2 = 0.1;
    double lambda = 1.0;
    double threshold = 0.03;
  } losses;
  std::uint64_t seed = 1;
};

// Parses a JSON document whose fields override the defaults above. Unknown
// keys, wrong types and zero sizes raise UserError. Relative paths are
// resolved against `base_dir`.
Config parse_config(const std::string& json_text, const std::filesystem::path& base_dir = {});
Config load_config(const std::filesystem::path& path);
std::string config_to_json(const Config& config);

// Binary container, all integers little-endian:
//   "PEECKPT\0"  u32 version
//   str kind     str metadata (JSON)
//   u64 n, then n vocabulary tokens as str
//   u64 n, then n parameters: str name, u32 rank, u64 dims[rank], f64 values
// where str is a u64 byte length followed by UTF-8 bytes and f64 is the IEEE
// 754 bit pattern stored as a u64.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string kind;      // "topic" or "pee"
  std::string metadata;  // JSON
  std::vector<std::string> vocabulary;
  nk::ParamStore params;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint);
// Throws UserError on a bad magic number, unsupported version or truncation.
Checkpoint load_checkpoint(const std::filesystem::path& path);
Checkpoint read_checkpoint(std::istream& in);

// Runs one subcommand. `args` excludes the program name. Returns the exit
// code: 0 success, 1 internal error, 2 user or input error.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err);

}  // namespace pee::cli
