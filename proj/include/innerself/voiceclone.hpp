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

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "innerself/audio.hpp"
#include "innerself/prosody.hpp"

namespace innerself {

struct MelParams {
  std::size_t n_fft = 1024;
  std::size_t hop = 256;
  std::size_t n_mels = 80;
  double f_min = 0.0;
  double f_max = 8000.0;
  int sample_rate = kCanonicalSampleRate;

  friend bool operator==(const MelParams&, const MelParams&) = default;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Triangular filters spaced uniformly on the mel scale between f_min and
/// f_max. Filter m rises from edge m to its peak at edge m + 1 and falls to
/// edge m + 2, evaluated at the FFT bin frequencies.
class MelFilterbank {
 public:
  explicit MelFilterbank(const MelParams& params = {});

  std::size_t n_mels() const noexcept { return n_mels_; }
  std::size_t n_bins() const noexcept { return n_bins_; }
  double weight(std::size_t mel, std::size_t bin) const { return weights_[mel * n_bins_ + bin]; }
  std::span<const double> row(std::size_t mel) const {
    return std::span<const double>(weights_).subspan(mel * n_bins_, n_bins_);
  }
  /// Peak frequency (Hz) of each filter, strictly increasing.
  const std::vector<double>& center_frequencies() const noexcept { return centers_; }

 private:
  std::size_t n_mels_;
  std::size_t n_bins_;
  std::vector<double> weights_;
  std::vector<double> centers_;
};

/// Log-power mel spectrogram, frames x mels, row-major.
struct MelSpectrogram {
  static constexpr double kPowerFloor = 1e-10;
  static double log_floor() { return std::log(kPowerFloor); }

  MelParams params;
  std::size_t frames = 0;
  std::vector<double> data;

  std::size_t n_mels() const noexcept { return params.n_mels; }
  double at(std::size_t t, std::size_t m) const { return data[t * params.n_mels + m]; }
  double& at(std::size_t t, std::size_t m) { return data[t * params.n_mels + m]; }
  std::span<const double> frame(std::size_t t) const {
    return std::span<const double>(data).subspan(t * params.n_mels, params.n_mels);
  }

  /// Throws kInvalidArgument on shape mismatch or values that are non-finite
  /// or below the log floor.
  void validate() const;
};

/// Hann-windowed, center-free framing: T = 1 + (N - n_fft) / hop. Entries are
/// log(filterbank * |FFT|^2 + 1e-10). Clips at another rate are resampled
/// first. Throws kClipTooShort when N < n_fft.
MelSpectrogram compute_mel(const AudioClip& clip, const MelParams& params = {});

// ---------------------------------------------------------------------------
// Enrollment

struct EnrollmentSample {
  AudioClip clip;
  std::string transcript;
  bool validated = false;
};

enum class EnrollmentIssue { kTooShort, kTooLong, kTooQuiet, kEmptyTranscript, kInconsistentTranscript };
std::string_view to_string(EnrollmentIssue issue);

struct EnrollmentPolicy {
  double min_seconds = 1.0;
  double max_seconds = 30.0;
  double min_peak = 0.01;
  double seconds_per_word = 0.4;
  double consistency_factor = 4.0;
};

/// Seconds covered by 20 ms frames whose RMS reaches 10% of the loudest frame.
double estimate_voiced_seconds(const AudioClip& clip);

/// Every problem with the sample, in a fixed order; empty means acceptable.
/// The transcript consistency check compares the voiced duration with
/// words * seconds_per_word and fails outside a factor of consistency_factor.
std::vector<EnrollmentIssue> enrollment_issues(const EnrollmentSample& sample,
                                               const EnrollmentPolicy& policy = {});

/// Returns the sample marked validated, or throws kEnrollmentRejected with
/// details {"issues": [...]}.
EnrollmentSample validate_enrollment(EnrollmentSample sample, const EnrollmentPolicy& policy = {});

// ---------------------------------------------------------------------------
// Speaker profile

inline constexpr std::size_t kEmbeddingDim = 256;

struct VoiceProfile {
  std::vector<double> embedding;  // unit L2 norm
  std::size_t sample_count = 0;
  std::string created_at;         // ISO-8601

  /// Throws kInvalidArgument unless the embedding has 256 finite entries with
  /// norm 1 within 1e-6 and sample_count >= 1.
  void validate() const;
};
void to_json(nlohmann::json& j, const VoiceProfile& p);
void from_json(const nlohmann::json& j, VoiceProfile& p);

/// L2-normalizes in place. A zero vector becomes the first basis vector.
void normalize_l2(std::vector<double>& v);
double cosine_similarity(std::span<const double> a, std::span<const double> b);

class SpeakerEncoderAdapter {
 public:
  virtual ~SpeakerEncoderAdapter() = default;
  /// One 256-dimensional vector per sample, in input order.
  virtual std::vector<std::vector<double>> embed(std::span<const EnrollmentSample> samples) = 0;
};

/// Per-sample log-mel statistics: the 80 per-bin means and 80 per-bin standard
/// deviations, each centered on their own average, zero-padded to 256 and
/// normalized.
class ReferenceSpeakerEncoder final : public SpeakerEncoderAdapter {
 public:
  std::vector<std::vector<double>> embed(std::span<const EnrollmentSample> samples) override;
  static std::vector<double> embed_one(const AudioClip& clip);
};

/// Embeds the validated samples and averages them into a unit-norm profile.
/// Throws kNoValidSamples when none are validated.
VoiceProfile embed_speaker(std::span<const EnrollmentSample> samples, SpeakerEncoderAdapter& encoder,
                           std::string created_at);

// ---------------------------------------------------------------------------
// Synthesis and vocoding

class SynthesizerAdapter {
 public:
  virtual ~SynthesizerAdapter() = default;
  virtual MelSpectrogram synthesize(const std::string& text, const VoiceProfile& profile,
                                    const ProsodyParams& prosody) = 0;
};

/// Five frames per Unicode scalar value: vowels get two formant bumps,
/// consonants a band whose centre depends on the letter, and everything else
/// is silent. The speaker embedding adds a per-bin log-power coloring. The
/// prosody argument is ignored here; prosody is applied to the waveform.
class ReferenceSynthesizer final : public SynthesizerAdapter {
 public:
  static constexpr std::size_t kFramesPerChar = 5;
  MelSpectrogram synthesize(const std::string& text, const VoiceProfile& profile,
                            const ProsodyParams& prosody) override;
};

/// Throws kEmptyText for empty text.
MelSpectrogram synthesize(const std::string& text, const VoiceProfile& profile,
                          SynthesizerAdapter& synth, const ProsodyParams& prosody = {});

class VocoderAdapter {
 public:
  virtual ~VocoderAdapter() = default;
  virtual AudioClip vocode(const MelSpectrogram& mel) = 0;
};

/// Sum of sinusoids at the mel filter centres. Per-frame amplitudes are
/// sqrt(exp(mel)) / (n_fft / 4), interpolated linearly between frame centres;
/// output above 1e-3 peak is normalized to 0.9 peak.
class ReferenceVocoder final : public VocoderAdapter {
 public:
  AudioClip vocode(const MelSpectrogram& mel) override;
};

/// Runs the vocoder and enforces the length contract (T * hop samples).
AudioClip vocode(const MelSpectrogram& mel, VocoderAdapter& vocoder);

/// Pitch shift (resample, then overlap-add time stretch back to the original
/// length), then rate change by linear-interpolation resampling to
/// round(N / rate) samples, then gain with clipping to [-1, 1]. Identity
/// parameters return the input unchanged.
AudioClip apply_prosody(const AudioClip& clip, const ProsodyParams& prosody);

}  // namespace innerself
