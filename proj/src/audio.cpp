// Copyright 2026 The InnerSelf Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "innerself/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "innerself/error.hpp"

namespace innerself {
namespace {

std::uint32_t read_u32le(std::string_view b, std::size_t at) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(b[at])) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 1])) << 8) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 2])) << 16) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 3])) << 24);
}

std::uint16_t read_u16le(std::string_view b, std::size_t at) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[at]) |
                                    (static_cast<unsigned char>(b[at + 1]) << 8));
}

void put_u32le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xFF);
}

void put_u16le(std::string& out, std::uint16_t v) {
  out += static_cast<char>(v & 0xFF);
  out += static_cast<char>((v >> 8) & 0xFF);
}

[[noreturn]] void bad_wav(const std::string& why) {
  throw Error(ErrorCode::kInvalidAudio, "malformed WAV: " + why);
}

std::string parse_info_comment(std::string_view list) {
  if (list.size() < 4 || list.substr(0, 4) != "INFO") return {};
  std::size_t pos = 4;
  while (pos + 8 <= list.size()) {
    const auto id = list.substr(pos, 4);
    const std::uint32_t size = read_u32le(list, pos + 4);
    if (pos + 8 + size > list.size()) break;
    if (id == "ICMT") {
      std::string text(list.substr(pos + 8, size));
      while (!text.empty() && text.back() == '\0') text.pop_back();
      return text;
    }
    pos += 8 + size + (size & 1U);
  }
  return {};
}

}  // namespace

AudioClip::AudioClip(std::vector<double> samples, int sample_rate, std::string annotation)
    : samples_(std::move(samples)), sample_rate_(sample_rate), annotation_(std::move(annotation)) {
  if (sample_rate_ <= 0) throw Error(ErrorCode::kInvalidAudio, "sample rate must be positive");
  for (double s : samples_) {
    if (!std::isfinite(s) || s < -1.0 || s > 1.0) {
      throw Error(ErrorCode::kInvalidAudio, "sample outside [-1, 1]");
    }
  }
}

double AudioClip::peak() const noexcept {
  double p = 0.0;
  for (double s : samples_) p = std::max(p, std::abs(s));
  return p;
}

AudioClip resample_linear(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0) throw Error(ErrorCode::kInvalidAudio, "target rate must be positive");
  if (clip.sample_rate() == target_rate || clip.empty()) {
    return AudioClip(std::vector<double>(clip.samples().begin(), clip.samples().end()), target_rate,
                     clip.annotation());
  }
  const auto in = clip.samples();
  const double ratio = static_cast<double>(clip.sample_rate()) / target_rate;
  const auto out_len = static_cast<std::size_t>(
      std::llround(static_cast<double>(in.size()) * target_rate / clip.sample_rate()));
  std::vector<double> out(out_len);
  for (std::size_t i = 0; i < out_len; ++i) {
    const double pos = static_cast<double>(i) * ratio;
    const auto i0 = static_cast<std::size_t>(pos);
    if (i0 + 1 >= in.size()) {
      out[i] = in.back();
      continue;
    }
    const double frac = pos - static_cast<double>(i0);
    out[i] = in[i0] + frac * (in[i0 + 1] - in[i0]);
  }
  return AudioClip(std::move(out), target_rate, clip.annotation());
}

AudioClip decode_wav(std::string_view bytes) {
  if (bytes.size() < 12 || bytes.substr(0, 4) != "RIFF" || bytes.substr(8, 4) != "WAVE") {
    bad_wav("missing RIFF/WAVE header");
  }
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t bits = 0;
  std::string_view data;
  bool have_fmt = false;
  bool have_data = false;
  std::string comment;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const auto id = bytes.substr(pos, 4);
    std::uint32_t size = read_u32le(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) {
      // Tolerate truncated streaming writers on the data chunk only.
      if (id != "data") bad_wav("chunk overruns file");
      size = static_cast<std::uint32_t>(bytes.size() - body);
    }
    if (id == "fmt ") {
      if (size < 16) bad_wav("short fmt chunk");
      format = read_u16le(bytes, body);
      channels = read_u16le(bytes, body + 2);
      rate = read_u32le(bytes, body + 4);
      bits = read_u16le(bytes, body + 14);
      if (format == 0xFFFE && size >= 26) format = read_u16le(bytes, body + 24);
      have_fmt = true;
    } else if (id == "data") {
      data = bytes.substr(body, size);
      have_data = true;
    } else if (id == "LIST") {
      comment = parse_info_comment(bytes.substr(body, size));
    }
    pos = body + size + (size & 1U);
  }
  if (!have_fmt || !have_data) bad_wav("missing fmt or data chunk");
  if (channels == 0 || rate == 0) bad_wav("zero channels or rate");

  const bool is_float = format == 3;
  if (!(format == 1 || is_float)) bad_wav("unsupported format tag " + std::to_string(format));
  if (is_float && bits != 32) bad_wav("float WAV must be 32-bit");
  if (!is_float && bits != 8 && bits != 16 && bits != 24 && bits != 32) {
    bad_wav("unsupported bit depth " + std::to_string(bits));
  }
  const std::size_t bytes_per_sample = bits / 8U;
  const std::size_t frame = bytes_per_sample * channels;
  const std::size_t frames = data.size() / frame;

  std::vector<double> mono(frames, 0.0);
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (std::size_t ch = 0; ch < channels; ++ch) {
      const std::size_t at = f * frame + ch * bytes_per_sample;
      double v = 0.0;
      if (is_float) {
        const std::uint32_t raw = read_u32le(data, at);
        float fv = 0.0F;
        std::memcpy(&fv, &raw, sizeof fv);
        v = std::clamp(static_cast<double>(fv), -1.0, 1.0);
        if (!std::isfinite(v)) v = 0.0;
      } else if (bits == 8) {
        v = (static_cast<unsigned char>(data[at]) - 128.0) / 128.0;
      } else if (bits == 16) {
        v = static_cast<std::int16_t>(read_u16le(data, at)) / 32768.0;
      } else if (bits == 24) {
        std::int32_t s = static_cast<unsigned char>(data[at]) |
                         (static_cast<unsigned char>(data[at + 1]) << 8) |
                         (static_cast<unsigned char>(data[at + 2]) << 16);
        if (s & 0x800000) s |= ~0xFFFFFF;
        v = s / 8388608.0;
      } else {
        v = static_cast<std::int32_t>(read_u32le(data, at)) / 2147483648.0;
      }
      acc += v;
    }
    mono[f] = acc / channels;
  }
  return AudioClip(std::move(mono), static_cast<int>(rate), std::move(comment));
}

AudioClip decode_wav_canonical(std::string_view bytes) {
  return resample_linear(decode_wav(bytes), kCanonicalSampleRate);
}

std::string encode_wav(const AudioClip& clip) {
  std::string info;
  if (!clip.annotation().empty()) {
    std::string text = clip.annotation();
    text += '\0';
    if (text.size() & 1U) text += '\0';
    info = "INFO";
    info += "ICMT";
    put_u32le(info, static_cast<std::uint32_t>(text.size()));
    info += text;
  }
  const auto data_bytes = static_cast<std::uint32_t>(clip.size() * 2);
  std::uint32_t riff_size = 4 + (8 + 16) + (8 + data_bytes);
  if (!info.empty()) riff_size += 8 + static_cast<std::uint32_t>(info.size());

  std::string out;
  out.reserve(riff_size + 8);
  out += "RIFF";
  put_u32le(out, riff_size);
  out += "WAVE";
  out += "fmt ";
  put_u32le(out, 16);
  put_u16le(out, 1);
  put_u16le(out, 1);
  put_u32le(out, static_cast<std::uint32_t>(clip.sample_rate()));
  put_u32le(out, static_cast<std::uint32_t>(clip.sample_rate()) * 2);
  put_u16le(out, 2);
  put_u16le(out, 16);
  if (!info.empty()) {
    out += "LIST";
    put_u32le(out, static_cast<std::uint32_t>(info.size()));
    out += info;
  }
  out += "data";
  put_u32le(out, data_bytes);
  for (double s : clip.samples()) {
    const long q = std::clamp(std::lround(s * 32768.0), -32768L, 32767L);
    put_u16le(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  return out;
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kInvalidArgument, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

AudioClip read_wav(const std::filesystem::path& path) {
  return decode_wav_canonical(read_file_bytes(path));
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kInvalidArgument, "cannot write " + path.string());
  const std::string bytes = encode_wav(clip);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace innerself
