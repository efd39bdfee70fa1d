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

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "innerself/conversation.hpp"
#include "innerself/emotion.hpp"
#include "innerself/voiceclone.hpp"

namespace innerself {

std::string base64_encode(std::string_view bytes);
/// Throws kInvalidArgument on malformed input.
std::string base64_decode(std::string_view text);

/// Little-endian float32, row-major frames x mels.
std::string encode_mel_f32(const MelSpectrogram& mel);
MelSpectrogram decode_mel_f32(std::string_view bytes, std::size_t frames, std::size_t n_mels);

/// Shared transport for the remote adapters. Any connection failure, timeout
/// or non-2xx status becomes kAdapterUnavailable with details
/// {"adapter", "endpoint", "retry_after_ms", "status"?}.
class HttpEndpoint {
 public:
  HttpEndpoint(std::string adapter, std::string base_url, double timeout_seconds);

  std::string post(const std::string& path, const std::string& body, const std::string& content_type) const;
  nlohmann::json post_json(const std::string& path, const nlohmann::json& body) const;

  const std::string& base_url() const noexcept { return base_url_; }

 private:
  [[noreturn]] void fail(const std::string& why, int status) const;

  std::string adapter_;
  std::string base_url_;
  double timeout_seconds_;
};

/// POST /transcribe (audio/wav) -> {"text"}
class HttpSpeechToText final : public SpeechToTextAdapter {
 public:
  explicit HttpSpeechToText(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
  std::string transcribe(const AudioClip& clip) override;

 private:
  HttpEndpoint endpoint_;
};

/// POST /features (audio/wav) -> {"features": [...]}
class HttpAudioFeatures final : public AudioFeatureAdapter {
 public:
  HttpAudioFeatures(HttpEndpoint endpoint, std::size_t feature_dim)
      : endpoint_(std::move(endpoint)), feature_dim_(feature_dim) {}
  AdapterDescriptor descriptor() const override { return {"http", feature_dim_, endpoint_.base_url()}; }
  FeatureVector extract(const AudioClip& clip) override;

 private:
  HttpEndpoint endpoint_;
  std::size_t feature_dim_;
};

/// POST /complete {"prompt"} -> {"text"}
class HttpLanguageModel final : public LanguageModelAdapter {
 public:
  explicit HttpLanguageModel(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
  std::string complete(const std::string& prompt) override;

 private:
  HttpEndpoint endpoint_;
};

/// POST /embed {"samples": [{"wav_base64", "transcript"}]} -> {"embeddings": [[256]]}
class HttpSpeakerEncoder final : public SpeakerEncoderAdapter {
 public:
  explicit HttpSpeakerEncoder(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
  std::vector<std::vector<double>> embed(std::span<const EnrollmentSample> samples) override;

 private:
  HttpEndpoint endpoint_;
};

/// POST /synthesize {"text", "profile", "prosody"} -> {"frames", "n_mels", "mel_base64"}
class HttpSynthesizer final : public SynthesizerAdapter {
 public:
  explicit HttpSynthesizer(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
  MelSpectrogram synthesize(const std::string& text, const VoiceProfile& profile,
                            const ProsodyParams& prosody) override;

 private:
  HttpEndpoint endpoint_;
};

/// POST /vocode {"frames", "n_mels", "mel_base64"} -> audio/wav
class HttpVocoder final : public VocoderAdapter {
 public:
  explicit HttpVocoder(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
  AudioClip vocode(const MelSpectrogram& mel) override;

 private:
  HttpEndpoint endpoint_;
};

}  // namespace innerself
