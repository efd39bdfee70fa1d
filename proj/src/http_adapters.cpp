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

#include "innerself/http_adapters.hpp"

#include <cstring>

#include <httplib.h>
#include <openssl/evp.h>

#include "innerself/error.hpp"

namespace innerself {

std::string base64_encode(std::string_view bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw Error(ErrorCode::kInvalidArgument, "base64 length is not a multiple of 4");
  if (text.empty()) return {};
  std::string out(3 * (text.size() / 4), '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(text.data()), static_cast<int>(text.size()));
  if (n < 0) throw Error(ErrorCode::kInvalidArgument, "malformed base64");
  // EVP_DecodeBlock keeps the bytes produced by '=' padding.
  std::size_t pad = 0;
  if (text.back() == '=') ++pad;
  if (text.size() >= 2 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

std::string encode_mel_f32(const MelSpectrogram& mel) {
  std::string out;
  out.reserve(mel.data.size() * 4);
  for (double v : mel.data) {
    const auto f = static_cast<float>(v);
    std::uint32_t bits = 0;
    std::memcpy(&bits, &f, 4);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
  }
  return out;
}

MelSpectrogram decode_mel_f32(std::string_view bytes, std::size_t frames, std::size_t n_mels) {
  if (bytes.size() != frames * n_mels * 4) {
    throw Error(ErrorCode::kDimensionMismatch, "mel payload size does not match its shape",
                {{"frames", frames}, {"n_mels", n_mels}, {"bytes", bytes.size()}});
  }
  MelSpectrogram mel;
  mel.params.n_mels = n_mels;
  mel.frames = frames;
  mel.data.resize(frames * n_mels);
  for (std::size_t i = 0; i < mel.data.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 * i + b])) << (8 * b);
    float f = 0.0f;
    std::memcpy(&f, &bits, 4);
    mel.data[i] = f;
  }
  return mel;
}

// ---------------------------------------------------------------------------

HttpEndpoint::HttpEndpoint(std::string adapter, std::string base_url, double timeout_seconds)
    : adapter_(std::move(adapter)), base_url_(std::move(base_url)), timeout_seconds_(timeout_seconds) {
  if (base_url_.rfind("http://", 0) != 0) {
    throw Error(ErrorCode::kConfigError, "adapter endpoint must be an http:// URL",
                {{"adapter", adapter_}, {"endpoint", base_url_}});
  }
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

void HttpEndpoint::fail(const std::string& why, int status) const {
  nlohmann::json details = {{"adapter", adapter_}, {"endpoint", base_url_}, {"retry_after_ms", 1000}};
  if (status > 0) details["status"] = status;
  throw Error(ErrorCode::kAdapterUnavailable, adapter_ + " adapter: " + why, details);
}

std::string HttpEndpoint::post(const std::string& path, const std::string& body,
                               const std::string& content_type) const {
  // Split "http://host:port/prefix" into the client origin and a path prefix.
  const std::size_t slash = base_url_.find('/', std::strlen("http://"));
  const std::string origin = slash == std::string::npos ? base_url_ : base_url_.substr(0, slash);
  const std::string prefix = slash == std::string::npos ? "" : base_url_.substr(slash);

  httplib::Client client(origin);
  const auto whole = static_cast<time_t>(timeout_seconds_);
  const auto usec = static_cast<time_t>((timeout_seconds_ - static_cast<double>(whole)) * 1e6);
  client.set_connection_timeout(whole, usec);
  client.set_read_timeout(whole, usec);
  client.set_write_timeout(whole, usec);
  auto res = client.Post(prefix + path, body, content_type);
  if (!res) fail("request failed: " + httplib::to_string(res.error()), 0);
  if (res->status < 200 || res->status >= 300) fail("HTTP status " + std::to_string(res->status), res->status);
  return res->body;
}

nlohmann::json HttpEndpoint::post_json(const std::string& path, const nlohmann::json& body) const {
  const auto text = post(path, body.dump(), "application/json");
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception&) {
    fail("response is not JSON", 0);
  }
}

namespace {

template <typename F>
auto checked(const std::string& adapter, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kAdapterUnavailable, adapter + " adapter: malformed response: " + e.what(),
                {{"adapter", adapter}, {"retry_after_ms", 1000}});
  }
}

}  // namespace

std::string HttpSpeechToText::transcribe(const AudioClip& clip) {
  const auto body = endpoint_.post("/transcribe", encode_wav(clip), "audio/wav");
  return checked("stt", [&] { return nlohmann::json::parse(body).at("text").get<std::string>(); });
}

FeatureVector HttpAudioFeatures::extract(const AudioClip& clip) {
  const auto body = endpoint_.post("/features", encode_wav(clip), "audio/wav");
  auto values = checked("audio_features",
                        [&] { return nlohmann::json::parse(body).at("features").get<std::vector<double>>(); });
  if (feature_dim_ != 0 && values.size() != feature_dim_) {
    throw Error(ErrorCode::kDimensionMismatch, "audio feature adapter returned the wrong dimension",
                {{"expected", feature_dim_}, {"actual", values.size()}});
  }
  return FeatureVector(Modality::kAudio, std::move(values));
}

std::string HttpLanguageModel::complete(const std::string& prompt) {
  const auto j = endpoint_.post_json("/complete", {{"prompt", prompt}});
  return checked("language_model", [&] { return j.at("text").get<std::string>(); });
}

std::vector<std::vector<double>> HttpSpeakerEncoder::embed(std::span<const EnrollmentSample> samples) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& s : samples) {
    items.push_back({{"wav_base64", base64_encode(encode_wav(s.clip))}, {"transcript", s.transcript}});
  }
  const auto j = endpoint_.post_json("/embed", {{"samples", items}});
  return checked("speaker_encoder", [&] { return j.at("embeddings").get<std::vector<std::vector<double>>>(); });
}

MelSpectrogram HttpSynthesizer::synthesize(const std::string& text, const VoiceProfile& profile,
                                           const ProsodyParams& prosody) {
  const auto j = endpoint_.post_json("/synthesize", {{"text", text}, {"profile", profile}, {"prosody", prosody}});
  return checked("synthesizer", [&] {
    return decode_mel_f32(base64_decode(j.at("mel_base64").get<std::string>()), j.at("frames").get<std::size_t>(),
                          j.at("n_mels").get<std::size_t>());
  });
}

AudioClip HttpVocoder::vocode(const MelSpectrogram& mel) {
  const nlohmann::json req = {
      {"frames", mel.frames}, {"n_mels", mel.n_mels()}, {"mel_base64", base64_encode(encode_mel_f32(mel))}};
  const auto body = endpoint_.post("/vocode", req.dump(), "application/json");
  try {
    return decode_wav_canonical(body);
  } catch (const Error& e) {
    throw Error(ErrorCode::kAdapterUnavailable, std::string("vocoder adapter: ") + e.what(),
                {{"adapter", "vocoder"}, {"retry_after_ms", 1000}});
  }
}

}  // namespace innerself
