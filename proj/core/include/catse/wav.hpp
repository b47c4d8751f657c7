#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace catse {

inline constexpr std::uint32_t kSampleRate = 16000;

enum class WavFormat { pcm16, float32 };

struct WavData {
  std::uint32_t sample_rate = kSampleRate;
  WavFormat format = WavFormat::float32;
  std::vector<double> samples;
};

// Reads mono 16 kHz WAV (16-bit PCM or 32-bit float). Anything else,
// including other rates and multichannel files, raises DataError.
WavData read_wav(const std::filesystem::path& path);

// Writes mono WAV through a temporary file and rename. PCM output clips to
// [-1, 1].
void write_wav(const std::filesystem::path& path, std::span<const double> samples,
               WavFormat format = WavFormat::float32, std::uint32_t sample_rate = kSampleRate);

// Writes `bytes` to `path` atomically (temp file in the same directory, then rename).
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

}  // namespace catse
