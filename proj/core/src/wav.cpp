#include "catse/wav.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "catse/errors.hpp"

namespace catse {

namespace {

std::uint32_t read_u32(const std::string& b, std::size_t at) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(b[at])) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 1])) << 8 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 2])) << 16 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 3])) << 24;
}

std::uint16_t read_u16(const std::string& b, std::size_t at) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[at]) |
                                    static_cast<unsigned char>(b[at + 1]) << 8);
}

void put_u32(std::string& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::string& b, std::uint16_t v) {
  b.push_back(static_cast<char>(v & 0xff));
  b.push_back(static_cast<char>(v >> 8));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xfffe;

}  // namespace

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

WavData read_wav(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const std::string where = path.string();
  if (bytes.size() < 12 || bytes.compare(0, 4, "RIFF") != 0 || bytes.compare(8, 4, "WAVE") != 0) {
    throw DataError(where + ": not a RIFF/WAVE file");
  }
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::size_t data_at = 0, data_len = 0;
  std::size_t at = 12;
  while (at + 8 <= bytes.size()) {
    const std::string id = bytes.substr(at, 4);
    const std::uint32_t len = read_u32(bytes, at + 4);
    const std::size_t body = at + 8;
    if (id == "fmt ") {
      if (len < 16 || body + len > bytes.size()) throw DataError(where + ": truncated fmt chunk");
      format = read_u16(bytes, body);
      channels = read_u16(bytes, body + 2);
      rate = read_u32(bytes, body + 4);
      bits = read_u16(bytes, body + 14);
      if (format == kFormatExtensible && len >= 26) format = read_u16(bytes, body + 24);
      have_fmt = true;
    } else if (id == "data") {
      data_at = body;
      data_len = std::min<std::size_t>(len, bytes.size() - body);
      break;
    }
    at = body + len + (len & 1);
  }
  if (!have_fmt || data_at == 0) throw DataError(where + ": missing fmt or data chunk");
  if (channels != 1) {
    throw DataError(where + ": expected mono audio, found " + std::to_string(channels) + " channels");
  }
  if (rate != kSampleRate) {
    throw DataError(where + ": expected 16000 Hz, found " + std::to_string(rate) +
                    " Hz (resampling is not supported)");
  }
  WavData wav;
  wav.sample_rate = rate;
  if (format == kFormatPcm && bits == 16) {
    wav.format = WavFormat::pcm16;
    wav.samples.resize(data_len / 2);
    for (std::size_t i = 0; i < wav.samples.size(); ++i) {
      const auto v = static_cast<std::int16_t>(read_u16(bytes, data_at + 2 * i));
      wav.samples[i] = static_cast<double>(v) / 32768.0;
    }
  } else if (format == kFormatFloat && bits == 32) {
    wav.format = WavFormat::float32;
    wav.samples.resize(data_len / 4);
    for (std::size_t i = 0; i < wav.samples.size(); ++i) {
      wav.samples[i] = static_cast<double>(std::bit_cast<float>(read_u32(bytes, data_at + 4 * i)));
    }
  } else {
    throw DataError(where + ": unsupported sample format (need 16-bit PCM or 32-bit float)");
  }
  return wav;
}

void write_wav(const std::filesystem::path& path, std::span<const double> samples, WavFormat format,
               std::uint32_t sample_rate) {
  const std::uint16_t bits = format == WavFormat::pcm16 ? 16 : 32;
  const std::uint32_t block = bits / 8;
  const auto data_len = static_cast<std::uint32_t>(samples.size() * block);
  std::string b;
  b.reserve(44 + data_len);
  b += "RIFF";
  put_u32(b, 36 + data_len);
  b += "WAVEfmt ";
  put_u32(b, 16);
  put_u16(b, format == WavFormat::pcm16 ? kFormatPcm : kFormatFloat);
  put_u16(b, 1);
  put_u32(b, sample_rate);
  put_u32(b, sample_rate * block);
  put_u16(b, static_cast<std::uint16_t>(block));
  put_u16(b, bits);
  b += "data";
  put_u32(b, data_len);
  for (double s : samples) {
    if (format == WavFormat::pcm16) {
      const double clipped = std::clamp(s, -1.0, 1.0);
      const auto v = static_cast<std::int16_t>(std::lround(clipped * 32767.0));
      put_u16(b, static_cast<std::uint16_t>(v));
    } else {
      put_u32(b, std::bit_cast<std::uint32_t>(static_cast<float>(s)));
    }
  }
  write_file_atomic(path, b);
}

}  // namespace catse
