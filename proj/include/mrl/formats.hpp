#pragma once

// Ingestion of on-disk datasets.
//
// WAV: RIFF/WAVE, PCM (format 1), mono, 8-bit unsigned or 16-bit signed
// little-endian. Samples are mapped to [-1, 1).
//
// CIFAR-style binary batch: fixed-size records of one label byte followed
// by channels*rows*cols pixel bytes, channel-major then row-major. Pixels
// are scaled to [0, 1].
//
// Image directory: <root>/<label>/<name>.pgm|.ppm, where <label> is a
// non-negative integer class index and files are binary PGM (P5) or PPM
// (P6) with maxval <= 255. Files are visited in sorted path order.

#include "mrl/dataset.hpp"
#include "mrl/signalprep.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mrl::formats {

signalprep::AudioClip parse_wav(const std::vector<std::uint8_t>& bytes, const std::string& source = "<memory>");
signalprep::AudioClip read_wav(const std::string& path);

/// 16-bit PCM mono writer; values are clamped to [-1, 1].
std::vector<std::uint8_t> encode_wav16(const Eigen::VectorXd& samples, int sample_rate);
void write_wav16(const std::string& path, const Eigen::VectorXd& samples, int sample_rate);

struct ImageGeometry {
  Index channels = 3;
  Index rows = 32;
  Index cols = 32;
};

Dataset parse_cifar_batch(const std::vector<std::uint8_t>& bytes, const ImageGeometry& geometry,
                          const std::string& source = "<memory>");
Dataset read_cifar_batch(const std::string& path, const ImageGeometry& geometry = {});

Tensor parse_pnm(const std::vector<std::uint8_t>& bytes, const std::string& source = "<memory>");
Tensor read_pnm(const std::string& path);
/// Writes P5 (one channel) or P6 (three channels); values in [0, 1] are scaled to bytes.
void write_pnm(const std::string& path, const Tensor& image);

Dataset read_image_directory(const std::string& root);

std::vector<std::uint8_t> read_file(const std::string& path);

}  // namespace mrl::formats
