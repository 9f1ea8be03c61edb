#include "mrl/formats.hpp"

#include "mrl/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace mrl::formats {

namespace fs = std::filesystem;

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError(path, -1, "cannot open file");
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

namespace {

class ByteCursor {
 public:
  ByteCursor(const std::vector<std::uint8_t>& bytes, std::string source)
      : bytes_(bytes), source_(std::move(source)) {}

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  void seek(std::size_t p) { pos_ = p; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) fail(std::string("truncated while reading ") + what);
  }

  std::string tag() {
    need(4, "chunk tag");
    std::string t(reinterpret_cast<const char*>(bytes_.data() + pos_), 4);
    pos_ += 4;
    return t;
  }

  std::uint32_t u32() {
    need(4, "32-bit field");
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | bytes_[pos_ + static_cast<std::size_t>(i)];
    pos_ += 4;
    return v;
  }

  std::uint16_t u16() {
    need(2, "16-bit field");
    const auto v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }

  std::uint8_t u8() {
    need(1, "byte");
    return bytes_[pos_++];
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw DataError(source_, static_cast<long long>(pos_), msg);
  }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace

signalprep::AudioClip parse_wav(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  ByteCursor in(bytes, source);
  if (in.tag() != "RIFF") {
    in.seek(0);
    in.fail("missing RIFF header");
  }
  in.u32();
  if (in.tag() != "WAVE") {
    in.seek(8);
    in.fail("missing WAVE identifier");
  }
  bool have_fmt = false;
  std::uint16_t bits = 0;
  std::uint32_t rate = 0;
  while (in.remaining() >= 8) {
    const std::size_t chunk_start = in.pos();
    const std::string id = in.tag();
    const std::uint32_t size = in.u32();
    if (in.remaining() < size) {
      in.seek(chunk_start);
      in.fail("chunk '" + id + "' runs past end of file");
    }
    const std::size_t body = in.pos();
    if (id == "fmt ") {
      if (size < 16) in.fail("fmt chunk too short");
      const std::uint16_t format = in.u16();
      const std::uint16_t channels = in.u16();
      rate = in.u32();
      in.u32();
      in.u16();
      bits = in.u16();
      if (format != 1) {
        in.seek(body);
        in.fail("unsupported WAV format " + std::to_string(format) + " (PCM only)");
      }
      if (channels != 1) {
        in.seek(body + 2);
        in.fail("only mono WAV is supported, got " + std::to_string(channels) + " channels");
      }
      if (bits != 8 && bits != 16) {
        in.seek(body + 14);
        in.fail("unsupported sample width " + std::to_string(bits) + " bits");
      }
      if (rate == 0) {
        in.seek(body + 4);
        in.fail("sample rate is zero");
      }
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) {
        in.seek(chunk_start);
        in.fail("data chunk before fmt chunk");
      }
      const std::size_t width = bits / 8;
      const std::size_t n = size / width;
      signalprep::AudioClip clip;
      clip.sample_rate = rate;
      clip.samples.resize(static_cast<Index>(n));
      for (std::size_t i = 0; i < n; ++i) {
        if (bits == 8) {
          clip.samples[static_cast<Index>(i)] = (static_cast<double>(in.u8()) - 128.0) / 128.0;
        } else {
          clip.samples[static_cast<Index>(i)] = static_cast<double>(static_cast<std::int16_t>(in.u16())) / 32768.0;
        }
      }
      return clip;
    }
    in.seek(body + size + (size & 1u));
  }
  in.fail(have_fmt ? "no data chunk" : "no fmt chunk");
}

signalprep::AudioClip read_wav(const std::string& path) { return parse_wav(read_file(path), path); }

std::vector<std::uint8_t> encode_wav16(const Eigen::VectorXd& samples, int sample_rate) {
  std::vector<std::uint8_t> out;
  auto put32 = [&out](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  auto put16 = [&out](std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
  };
  auto tag = [&out](const char* t) { out.insert(out.end(), t, t + 4); };
  const auto data_size = static_cast<std::uint32_t>(samples.size() * 2);
  tag("RIFF");
  put32(36 + data_size);
  tag("WAVE");
  tag("fmt ");
  put32(16);
  put16(1);
  put16(1);
  put32(static_cast<std::uint32_t>(sample_rate));
  put32(static_cast<std::uint32_t>(sample_rate * 2));
  put16(2);
  put16(16);
  tag("data");
  put32(data_size);
  for (Index i = 0; i < samples.size(); ++i) {
    const double v = std::clamp(samples[i], -1.0, 1.0);
    const auto s = static_cast<std::int16_t>(std::lround(std::clamp(v * 32768.0, -32768.0, 32767.0)));
    put16(static_cast<std::uint16_t>(s));
  }
  return out;
}

void write_wav16(const std::string& path, const Eigen::VectorXd& samples, int sample_rate) {
  const auto bytes = encode_wav16(samples, sample_rate);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Dataset parse_cifar_batch(const std::vector<std::uint8_t>& bytes, const ImageGeometry& g, const std::string& source) {
  const std::size_t pixels = static_cast<std::size_t>(g.channels * g.rows * g.cols);
  const std::size_t record = 1 + pixels;
  if (pixels == 0) throw ArgumentError("image geometry is empty");
  if (bytes.empty() || bytes.size() % record != 0) {
    throw DataError(source, static_cast<long long>(bytes.size() - bytes.size() % record),
                    "batch size " + std::to_string(bytes.size()) + " is not a multiple of record size " +
                        std::to_string(record));
  }
  Dataset d;
  int max_label = -1;
  for (std::size_t off = 0; off < bytes.size(); off += record) {
    const int label = bytes[off];
    Tensor img({g.channels, g.rows, g.cols});
    for (std::size_t k = 0; k < pixels; ++k) img[static_cast<Index>(k)] = bytes[off + 1 + k] / 255.0;
    d.samples.push_back(std::move(img));
    d.labels.push_back(label);
    max_label = std::max(max_label, label);
  }
  d.num_classes = std::max(max_label + 1, 10);
  return d;
}

Dataset read_cifar_batch(const std::string& path, const ImageGeometry& geometry) {
  return parse_cifar_batch(read_file(path), geometry, path);
}

Tensor parse_pnm(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  std::size_t pos = 0;
  auto fail = [&](const std::string& msg) -> void { throw DataError(source, static_cast<long long>(pos), msg); };
  auto skip_space = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&]() -> long {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) fail("expected a number in header");
    long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > 1'000'000) fail("header value too large");
    }
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) fail("not a binary PGM/PPM file");
  const Index channels = bytes[1] == '5' ? 1 : 3;
  pos = 2;
  const long cols = number();
  const long rows = number();
  const long maxval = number();
  if (cols <= 0 || rows <= 0) fail("image has zero size");
  if (maxval <= 0 || maxval > 255) fail("maxval must be in 1..255");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) fail("missing whitespace after header");
  ++pos;
  const std::size_t need = static_cast<std::size_t>(channels * rows * cols);
  if (bytes.size() - pos < need) fail("pixel data truncated");
  Tensor img(channels == 1 ? std::vector<Index>{rows, cols} : std::vector<Index>{channels, rows, cols});
  // PNM interleaves channels per pixel; tensors are channel-major.
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      for (Index ch = 0; ch < channels; ++ch) {
        img[(ch * rows + r) * cols + c] = bytes[pos++] / static_cast<double>(maxval);
      }
    }
  }
  return img;
}

Tensor read_pnm(const std::string& path) { return parse_pnm(read_file(path), path); }

void write_pnm(const std::string& path, const Tensor& image) {
  const Index channels = image.channels(false);
  if (channels != 1 && channels != 3) throw DimensionError("write_pnm: need 1 or 3 channels");
  const Index rows = image.image_rows(), cols = image.image_cols();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << (channels == 1 ? "P5" : "P6") << "\n" << cols << " " << rows << "\n255\n";
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      for (Index ch = 0; ch < channels; ++ch) {
        const double v = std::clamp(image[(ch * rows + r) * cols + c], 0.0, 1.0);
        os.put(static_cast<char>(std::lround(v * 255.0)));
      }
    }
  }
}

Dataset read_image_directory(const std::string& root) {
  if (!fs::is_directory(root)) throw DataError(root, -1, "not a directory");
  std::vector<std::pair<int, fs::path>> files;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    const std::string name = entry.path().filename().string();
    if (name.empty() || !std::all_of(name.begin(), name.end(), [](unsigned char ch) { return std::isdigit(ch); })) {
      throw DataError(entry.path().string(), -1, "class directory name must be an integer label");
    }
    const int label = std::stoi(name);
    for (const auto& f : fs::directory_iterator(entry.path())) {
      const auto ext = f.path().extension().string();
      if (f.is_regular_file() && (ext == ".pgm" || ext == ".ppm")) files.emplace_back(label, f.path());
    }
  }
  std::sort(files.begin(), files.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
  if (files.empty()) throw DataError(root, -1, "no .pgm/.ppm images found");
  Dataset d;
  int max_label = 0;
  for (const auto& [label, path] : files) {
    d.samples.push_back(read_pnm(path.string()));
    if (d.samples.back().shape() != d.samples.front().shape()) {
      throw DataError(path.string(), -1, "image shape differs from the first image");
    }
    d.labels.push_back(label);
    max_label = std::max(max_label, label);
  }
  d.num_classes = max_label + 1;
  return d;
}

}  // namespace mrl::formats
