// Checkpoint container, little-endian:
//
//   magic      8 bytes  "MRLCKPT1"
//   version    u32      1
//   spec_len   u64      length of the JSON network spec
//   spec       bytes
//   layers     u64      layer count
//   per layer: rows u64, cols u64, rows*cols f64 (column-major),
//              bias_len u64, bias_len f64
//
// Values are written as raw IEEE-754 doubles, so a write/read round trip is
// bit-exact.

#include "mrl/errors.hpp"
#include "mrl/nn/network.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace mrl::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

namespace {

constexpr std::array<char, 8> kMagic = {'M', 'R', 'L', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

class Reader {
 public:
  Reader(std::istream& is, std::string source) : is_(is), source_(std::move(source)) {}

  template <typename T>
  T get(const char* what) {
    T value{};
    read(reinterpret_cast<char*>(&value), sizeof(T), what);
    return value;
  }

  void read(char* dst, std::size_t n, const char* what) {
    is_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) {
      throw DataError(source_, offset_, std::string("truncated checkpoint while reading ") + what);
    }
    offset_ += static_cast<long long>(n);
  }

  [[noreturn]] void fail(const std::string& msg) const { throw DataError(source_, offset_, msg); }

 private:
  std::istream& is_;
  std::string source_;
  long long offset_ = 0;
};

}  // namespace

void write_checkpoint(std::ostream& os, const Network& net) {
  os.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(os, kVersion);
  const std::string spec = spec_to_json(net.spec());
  put<std::uint64_t>(os, spec.size());
  os.write(spec.data(), static_cast<std::streamsize>(spec.size()));
  put<std::uint64_t>(os, net.params().size());
  for (const auto& p : net.params()) {
    put<std::uint64_t>(os, static_cast<std::uint64_t>(p.weight.rows()));
    put<std::uint64_t>(os, static_cast<std::uint64_t>(p.weight.cols()));
    os.write(reinterpret_cast<const char*>(p.weight.data()),
             static_cast<std::streamsize>(p.weight.size() * sizeof(double)));
    put<std::uint64_t>(os, static_cast<std::uint64_t>(p.bias.size()));
    os.write(reinterpret_cast<const char*>(p.bias.data()),
             static_cast<std::streamsize>(p.bias.size() * sizeof(double)));
  }
  if (!os) throw std::runtime_error("checkpoint write failed");
}

Network read_checkpoint(std::istream& is, const std::string& source) {
  Reader in(is, source);
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size(), "magic");
  if (magic != kMagic) in.fail("not a checkpoint (bad magic)");
  const auto version = in.get<std::uint32_t>("version");
  if (version != kVersion) in.fail("unsupported checkpoint version " + std::to_string(version));
  const auto spec_len = in.get<std::uint64_t>("spec length");
  if (spec_len > (1u << 24)) in.fail("implausible spec length");
  std::string spec_text(spec_len, '\0');
  in.read(spec_text.data(), spec_len, "spec");
  NetworkSpec spec;
  try {
    spec = spec_from_json(spec_text);
  } catch (const std::exception& e) {
    in.fail(std::string("bad network spec: ") + e.what());
  }
  Network net(std::move(spec));
  const auto layers = in.get<std::uint64_t>("layer count");
  if (layers != net.params().size()) in.fail("layer count does not match spec");
  auto& params = net.mutable_params();
  for (auto& p : params) {
    const auto rows = in.get<std::uint64_t>("weight rows");
    const auto cols = in.get<std::uint64_t>("weight cols");
    if (rows != static_cast<std::uint64_t>(p.weight.rows()) || cols != static_cast<std::uint64_t>(p.weight.cols())) {
      in.fail("weight shape does not match spec");
    }
    in.read(reinterpret_cast<char*>(p.weight.data()), p.weight.size() * sizeof(double), "weights");
    const auto bias_len = in.get<std::uint64_t>("bias length");
    if (bias_len != static_cast<std::uint64_t>(p.bias.size())) in.fail("bias length does not match spec");
    in.read(reinterpret_cast<char*>(p.bias.data()), p.bias.size() * sizeof(double), "biases");
  }
  return net;
}

void save_checkpoint(const std::string& path, const Network& net) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_checkpoint(os, net);
}

Network load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError(path, -1, "cannot open checkpoint");
  return read_checkpoint(is, path);
}

}  // namespace mrl::nn
