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

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace innerself {

inline constexpr int kCanonicalSampleRate = 16000;

/// Mono audio with samples normalized to [-1, 1].
///
/// The optional annotation carries the RIFF INFO/ICMT comment of a WAV
/// file. Fixture clips use it to store the spoken transcript so that the
/// reference speech-to-text adapter can echo it back.
class AudioClip {
 public:
  AudioClip() = default;
  /// Throws Error(kInvalidAudio) on out-of-range or non-finite samples, or a
  /// non-positive sample rate.
  AudioClip(std::vector<double> samples, int sample_rate, std::string annotation = {});

  std::span<const double> samples() const noexcept { return samples_; }
  int sample_rate() const noexcept { return sample_rate_; }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }
  double duration_seconds() const noexcept {
    return static_cast<double>(samples_.size()) / static_cast<double>(sample_rate_);
  }
  double peak() const noexcept;

  const std::string& annotation() const noexcept { return annotation_; }
  void set_annotation(std::string annotation) { annotation_ = std::move(annotation); }

  friend bool operator==(const AudioClip&, const AudioClip&) = default;

 private:
  std::vector<double> samples_;
  int sample_rate_ = kCanonicalSampleRate;
  std::string annotation_;
};

/// Linear-interpolation resampler. Identity when the rates already match.
AudioClip resample_linear(const AudioClip& clip, int target_rate);

/// Parses RIFF/WAVE bytes (PCM 8/16/24/32-bit or IEEE float32, any channel
/// count). Multi-channel input is averaged down to mono; the sample rate is
/// left untouched.
AudioClip decode_wav(std::string_view bytes);

/// decode_wav followed by resampling to the canonical 16 kHz.
AudioClip decode_wav_canonical(std::string_view bytes);

/// PCM 16-bit little-endian mono. Writes a LIST/INFO/ICMT chunk when the clip
/// carries an annotation.
std::string encode_wav(const AudioClip& clip);

AudioClip read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const AudioClip& clip);

std::string read_file_bytes(const std::filesystem::path& path);

}  // namespace innerself
