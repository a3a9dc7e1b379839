#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "pee/cli.hpp"
#include "pee/error.hpp"

namespace pee::cli {

namespace {

constexpr std::array<char, 8> kMagic{'P', 'E', 'E', 'C', 'K', 'P', 'T', '\0'};
// Guards against allocating absurd buffers from a corrupt length field.
constexpr std::uint64_t kMaxLength = std::uint64_t{1} << 40;

template <typename U>
void put(std::ostream& out, U v) {
  unsigned char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  template <typename U>
  U get() {
    unsigned char buf[sizeof(U)];
    read(reinterpret_cast<char*>(buf), sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
    return v;
  }

  std::uint64_t length() {
    const auto n = get<std::uint64_t>();
    if (n > kMaxLength) throw UserError("checkpoint: corrupt length field");
    return n;
  }

  std::string string() {
    std::string s(length(), '\0');
    read(s.data(), s.size());
    return s;
  }

  void read(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw UserError("checkpoint: truncated file");
  }

 private:
  std::istream& in_;
};

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& c) {
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kCheckpointVersion);
  put_string(out, c.kind);
  put_string(out, c.metadata);
  put<std::uint64_t>(out, c.vocabulary.size());
  for (const auto& t : c.vocabulary) put_string(out, t);
  put<std::uint64_t>(out, c.params.size());
  for (std::size_t i = 0; i < c.params.size(); ++i) {
    const nk::Tensor& t = c.params.tensor(i);
    put_string(out, c.params.name(i));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
    for (double x : t.data()) put(out, std::bit_cast<std::uint64_t>(x));
  }
  if (!out) throw std::runtime_error("checkpoint: write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
  Reader r(in);
  std::array<char, 8> magic{};
  try {
    r.read(magic.data(), magic.size());
  } catch (const UserError&) {
    throw UserError("checkpoint: not a checkpoint file");
  }
  if (magic != kMagic) throw UserError("checkpoint: not a checkpoint file");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw UserError("checkpoint: version " + std::to_string(version) + " is not supported (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint c;
  c.kind = r.string();
  c.metadata = r.string();
  c.vocabulary.resize(r.length());
  for (auto& t : c.vocabulary) t = r.string();
  const std::uint64_t count = r.length();
  for (std::uint64_t p = 0; p < count; ++p) {
    std::string name = r.string();
    const auto rank = r.get<std::uint32_t>();
    nk::Shape shape(rank);
    std::uint64_t size = 1;
    for (auto& d : shape) {
      d = r.length();
      size *= d;
      if (size > kMaxLength) throw UserError("checkpoint: corrupt shape for " + name);
    }
    std::vector<double> values(size);
    for (double& x : values) x = std::bit_cast<double>(r.get<std::uint64_t>());
    try {
      c.params.add(name, nk::Tensor(std::move(shape), std::move(values)));
    } catch (const ContractError& e) {
      throw UserError(std::string("checkpoint: ") + e.what());
    }
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UserError("cannot write checkpoint " + path.string());
  write_checkpoint(out, c);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UserError("cannot read checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace pee::cli
