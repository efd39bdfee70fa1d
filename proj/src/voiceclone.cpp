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

#include "innerself/voiceclone.hpp"

#include <algorithm>
#include <complex>
#include <numbers>
#include <numeric>

#include "innerself/dsp.hpp"
#include "innerself/error.hpp"
#include "innerself/lexicon.hpp"
#include "innerself/utf8.hpp"

namespace innerself {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<char32_t> decode_scalars(std::string_view text) {
  std::vector<char32_t> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c0 = static_cast<unsigned char>(text[i]);
    std::size_t len = c0 < 0x80 ? 1 : (c0 & 0xE0) == 0xC0 ? 2 : (c0 & 0xF0) == 0xE0 ? 3 : 4;
    char32_t cp = len == 1 ? c0 : len == 2 ? (c0 & 0x1F) : len == 3 ? (c0 & 0x0F) : (c0 & 0x07);
    for (std::size_t k = 1; k < len && i + k < text.size(); ++k) {
      cp = (cp << 6) | (static_cast<unsigned char>(text[i + k]) & 0x3F);
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

struct Formant {
  double hz;
  double gain;
  double width_mels;
};

// Spectral recipe for one character of the reference synthesizer.
std::vector<Formant> recipe_for(char32_t cp) {
  char32_t c = cp;
  if (c >= 'A' && c <= 'Z') c = c - 'A' + 'a';
  switch (c) {
    case 'a': return {{730, 1.0, 90}, {1090, 0.6, 110}, {2440, 0.2, 150}};
    case 'e': return {{530, 1.0, 90}, {1840, 0.6, 120}, {2480, 0.2, 150}};
    case 'i': return {{270, 1.0, 80}, {2290, 0.5, 130}, {3010, 0.2, 150}};
    case 'o': return {{570, 1.0, 90}, {840, 0.7, 100}, {2410, 0.15, 150}};
    case 'u': return {{300, 1.0, 80}, {870, 0.6, 100}, {2240, 0.15, 150}};
    case 'y': return {{300, 1.0, 80}, {2000, 0.5, 130}, {2800, 0.2, 150}};
    case 's': case 'z': case 'c': case 'x': return {{5500, 0.3, 400}};
    case 'f': case 'v': case 'h': case 't': case 'k': case 'p': return {{3800, 0.15, 500}};
    default: break;
  }
  if (c >= 'a' && c <= 'z') {
    // Voiced consonants: a low murmur plus one letter-specific band.
    const double band = 900.0 + static_cast<double>((c - 'a') * 211 % 2600);
    return {{250, 0.4, 100}, {band, 0.25, 180}};
  }
  if (c >= '0' && c <= '9') return {{500, 0.6, 120}, {1500, 0.4, 150}};
  if (c > 0x7F) {
    const double band = 400.0 + static_cast<double>(c % 3000);
    return {{band, 0.6, 150}};
  }
  return {};  // whitespace and punctuation are silent
}

std::vector<double> frame_rms_20ms(const AudioClip& clip) {
  const auto x = clip.samples();
  const auto len = static_cast<std::size_t>(std::lround(0.020 * clip.sample_rate()));
  std::vector<double> rms;
  if (len == 0) return rms;
  for (std::size_t start = 0; start + len <= x.size(); start += len) {
    double acc = 0.0;
    for (std::size_t i = start; i < start + len; ++i) acc += x[i] * x[i];
    rms.push_back(std::sqrt(acc / static_cast<double>(len)));
  }
  return rms;
}

}  // namespace

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank::MelFilterbank(const MelParams& p)
    : n_mels_(p.n_mels), n_bins_(p.n_fft / 2 + 1), weights_(p.n_mels * (p.n_fft / 2 + 1), 0.0) {
  if (p.n_mels == 0 || p.n_fft < 2 || p.sample_rate <= 0 || p.f_min < 0.0 || p.f_max <= p.f_min ||
      p.f_max > p.sample_rate / 2.0) {
    throw Error(ErrorCode::kInvalidArgument, "invalid mel parameters");
  }
  const double mel_lo = hz_to_mel(p.f_min);
  const double mel_hi = hz_to_mel(p.f_max);
  std::vector<double> edges(n_mels_ + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                      static_cast<double>(n_mels_ + 1));
  }
  centers_.assign(edges.begin() + 1, edges.end() - 1);
  const double bin_hz = static_cast<double>(p.sample_rate) / static_cast<double>(p.n_fft);
  for (std::size_t m = 0; m < n_mels_; ++m) {
    const double lo = edges[m];
    const double mid = edges[m + 1];
    const double hi = edges[m + 2];
    bool any = false;
    for (std::size_t k = 0; k < n_bins_; ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      double w = 0.0;
      if (f > lo && f <= mid) {
        w = (f - lo) / (mid - lo);
      } else if (f > mid && f < hi) {
        w = (hi - f) / (hi - mid);
      }
      weights_[m * n_bins_ + k] = w;
      any = any || w > 0.0;
    }
    if (!any) {
      throw Error(ErrorCode::kInvalidArgument,
                  "mel filter " + std::to_string(m) + " covers no FFT bin; use more FFT points");
    }
  }
}

void MelSpectrogram::validate() const {
  if (params.n_mels == 0 || data.size() != frames * params.n_mels) {
    throw Error(ErrorCode::kInvalidArgument, "mel spectrogram shape mismatch");
  }
  const double floor = log_floor();
  for (double v : data) {
    if (!std::isfinite(v) || v < floor - 1e-9) {
      throw Error(ErrorCode::kInvalidArgument, "mel entry non-finite or below the log floor");
    }
  }
}

MelSpectrogram compute_mel(const AudioClip& input, const MelParams& params) {
  const AudioClip clip = input.sample_rate() == params.sample_rate
                             ? input
                             : resample_linear(input, params.sample_rate);
  if (clip.size() < params.n_fft) {
    throw Error(ErrorCode::kClipTooShort, "clip shorter than one FFT frame",
                {{"samples", clip.size()}, {"n_fft", params.n_fft}});
  }
  const MelFilterbank bank(params);
  const auto window = dsp::hann_window(params.n_fft);
  dsp::PowerSpectrum spectrum(params.n_fft);

  // Non-zero support of each filter row.
  std::vector<std::pair<std::size_t, std::size_t>> support(bank.n_mels());
  for (std::size_t m = 0; m < bank.n_mels(); ++m) {
    const auto row = bank.row(m);
    std::size_t first = 0;
    while (row[first] == 0.0) ++first;
    std::size_t last = row.size() - 1;
    while (row[last] == 0.0) --last;
    support[m] = {first, last + 1};
  }

  MelSpectrogram mel;
  mel.params = params;
  mel.frames = 1 + (clip.size() - params.n_fft) / params.hop;
  mel.data.resize(mel.frames * params.n_mels);
  std::vector<double> frame(params.n_fft);
  std::vector<double> power(spectrum.bins());
  const auto x = clip.samples();
  for (std::size_t t = 0; t < mel.frames; ++t) {
    const auto src = x.subspan(t * params.hop, params.n_fft);
    for (std::size_t i = 0; i < params.n_fft; ++i) frame[i] = src[i] * window[i];
    spectrum.compute(frame, power);
    for (std::size_t m = 0; m < bank.n_mels(); ++m) {
      double acc = 0.0;
      for (std::size_t k = support[m].first; k < support[m].second; ++k) {
        acc += bank.weight(m, k) * power[k];
      }
      mel.at(t, m) = std::log(acc + MelSpectrogram::kPowerFloor);
    }
  }
  return mel;
}

// ---------------------------------------------------------------------------

std::string_view to_string(EnrollmentIssue issue) {
  switch (issue) {
    case EnrollmentIssue::kTooShort: return "TooShort";
    case EnrollmentIssue::kTooLong: return "TooLong";
    case EnrollmentIssue::kTooQuiet: return "TooQuiet";
    case EnrollmentIssue::kEmptyTranscript: return "EmptyTranscript";
    case EnrollmentIssue::kInconsistentTranscript: return "InconsistentTranscript";
  }
  return "Unknown";
}

double estimate_voiced_seconds(const AudioClip& clip) {
  const auto rms = frame_rms_20ms(clip);
  if (rms.empty()) return 0.0;
  const double loudest = *std::max_element(rms.begin(), rms.end());
  if (loudest <= 0.0) return 0.0;
  const auto voiced = std::count_if(rms.begin(), rms.end(), [&](double r) { return r >= 0.1 * loudest; });
  return static_cast<double>(voiced) * 0.020;
}

std::vector<EnrollmentIssue> enrollment_issues(const EnrollmentSample& sample,
                                               const EnrollmentPolicy& policy) {
  std::vector<EnrollmentIssue> issues;
  const double duration = sample.clip.duration_seconds();
  if (duration < policy.min_seconds) issues.push_back(EnrollmentIssue::kTooShort);
  if (duration > policy.max_seconds) issues.push_back(EnrollmentIssue::kTooLong);
  const bool quiet = sample.clip.peak() < policy.min_peak;
  if (quiet) issues.push_back(EnrollmentIssue::kTooQuiet);
  const auto words = tokenize(sample.transcript).size();
  if (words == 0) {
    issues.push_back(EnrollmentIssue::kEmptyTranscript);
  } else if (!quiet) {
    const double expected = static_cast<double>(words) * policy.seconds_per_word;
    const double voiced = estimate_voiced_seconds(sample.clip);
    if (voiced <= 0.0 || voiced > expected * policy.consistency_factor ||
        voiced < expected / policy.consistency_factor) {
      issues.push_back(EnrollmentIssue::kInconsistentTranscript);
    }
  }
  return issues;
}

EnrollmentSample validate_enrollment(EnrollmentSample sample, const EnrollmentPolicy& policy) {
  const auto issues = enrollment_issues(sample, policy);
  if (!issues.empty()) {
    nlohmann::json names = nlohmann::json::array();
    for (auto i : issues) names.push_back(std::string(to_string(i)));
    sample.validated = false;
    throw Error(ErrorCode::kEnrollmentRejected, "enrollment sample rejected", {{"issues", names}});
  }
  sample.validated = true;
  return sample;
}

// ---------------------------------------------------------------------------

void VoiceProfile::validate() const {
  if (embedding.size() != kEmbeddingDim) {
    throw Error(ErrorCode::kInvalidArgument, "voice profile embedding must have 256 entries");
  }
  double norm2 = 0.0;
  for (double v : embedding) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "non-finite embedding entry");
    norm2 += v * v;
  }
  if (std::abs(std::sqrt(norm2) - 1.0) > 1e-6) {
    throw Error(ErrorCode::kInvalidArgument, "voice profile embedding is not unit norm");
  }
  if (sample_count < 1) throw Error(ErrorCode::kInvalidArgument, "voice profile sample_count < 1");
}

void to_json(nlohmann::json& j, const VoiceProfile& p) {
  j = {{"embedding", p.embedding}, {"sample_count", p.sample_count}, {"created_at", p.created_at}};
}

void from_json(const nlohmann::json& j, VoiceProfile& p) {
  p.embedding = j.at("embedding").get<std::vector<double>>();
  p.sample_count = j.at("sample_count").get<std::size_t>();
  p.created_at = j.at("created_at").get<std::string>();
  p.validate();
}

void normalize_l2(std::vector<double>& v) {
  double norm2 = 0.0;
  for (double x : v) norm2 += x * x;
  if (norm2 <= 1e-24) {
    std::fill(v.begin(), v.end(), 0.0);
    if (!v.empty()) v[0] = 1.0;
    return;
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& x : v) x *= inv;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kDimensionMismatch, "cosine of unequal lengths");
  double ab = 0.0;
  double aa = 0.0;
  double bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return (aa > 0.0 && bb > 0.0) ? ab / std::sqrt(aa * bb) : 0.0;
}

std::vector<double> ReferenceSpeakerEncoder::embed_one(const AudioClip& clip) {
  const auto mel = compute_mel(clip);
  const std::size_t m_count = mel.n_mels();
  std::vector<double> mean(m_count, 0.0);
  std::vector<double> stdev(m_count, 0.0);
  for (std::size_t t = 0; t < mel.frames; ++t) {
    for (std::size_t m = 0; m < m_count; ++m) mean[m] += mel.at(t, m);
  }
  for (double& v : mean) v /= static_cast<double>(mel.frames);
  for (std::size_t t = 0; t < mel.frames; ++t) {
    for (std::size_t m = 0; m < m_count; ++m) {
      const double d = mel.at(t, m) - mean[m];
      stdev[m] += d * d;
    }
  }
  for (double& v : stdev) v = std::sqrt(v / static_cast<double>(mel.frames));

  const auto center = [](std::vector<double>& v) {
    const double avg = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    for (double& x : v) x -= avg;
  };
  center(mean);
  center(stdev);

  std::vector<double> e(kEmbeddingDim, 0.0);
  std::copy(mean.begin(), mean.end(), e.begin());
  std::copy(stdev.begin(), stdev.end(), e.begin() + static_cast<std::ptrdiff_t>(m_count));
  normalize_l2(e);
  return e;
}

std::vector<std::vector<double>> ReferenceSpeakerEncoder::embed(
    std::span<const EnrollmentSample> samples) {
  std::vector<std::vector<double>> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(embed_one(s.clip));
  return out;
}

VoiceProfile embed_speaker(std::span<const EnrollmentSample> samples, SpeakerEncoderAdapter& encoder,
                           std::string created_at) {
  std::vector<EnrollmentSample> valid;
  for (const auto& s : samples) {
    if (s.validated) valid.push_back(s);
  }
  if (valid.empty()) throw Error(ErrorCode::kNoValidSamples, "no validated enrollment samples");

  const auto vectors = encoder.embed(valid);
  if (vectors.size() != valid.size()) {
    throw Error(ErrorCode::kAdapterUnavailable, "speaker encoder returned the wrong number of vectors");
  }
  std::vector<double> mean(kEmbeddingDim, 0.0);
  for (const auto& v : vectors) {
    if (v.size() != kEmbeddingDim) {
      throw Error(ErrorCode::kDimensionMismatch, "speaker encoder vectors must have 256 entries");
    }
    for (std::size_t i = 0; i < kEmbeddingDim; ++i) mean[i] += v[i];
  }
  for (double& x : mean) x /= static_cast<double>(vectors.size());
  normalize_l2(mean);
  VoiceProfile profile{std::move(mean), valid.size(), std::move(created_at)};
  profile.validate();
  return profile;
}

// ---------------------------------------------------------------------------

MelSpectrogram ReferenceSynthesizer::synthesize(const std::string& text, const VoiceProfile& profile,
                                                const ProsodyParams& /*prosody*/) {
  const MelParams params;
  const auto chars = decode_scalars(text);
  const MelFilterbank bank(params);
  const auto& centers = bank.center_frequencies();
  std::vector<double> center_mels(centers.size());
  std::transform(centers.begin(), centers.end(), center_mels.begin(), hz_to_mel);

  // Speaker coloring in log-power units, folded from the whole embedding.
  std::vector<double> coloring(params.n_mels, 0.0);
  for (std::size_t j = 0; j < profile.embedding.size(); ++j) {
    coloring[j % params.n_mels] += 6.0 * profile.embedding[j];
  }

  constexpr double kLevel = 1e4;
  constexpr double kEnvelope[kFramesPerChar] = {0.5, 0.9, 1.0, 0.9, 0.5};
  const double floor = MelSpectrogram::log_floor();

  MelSpectrogram mel;
  mel.params = params;
  mel.frames = chars.size() * kFramesPerChar;
  mel.data.assign(mel.frames * params.n_mels, floor);
  for (std::size_t c = 0; c < chars.size(); ++c) {
    const auto recipe = recipe_for(chars[c]);
    if (recipe.empty()) continue;
    for (std::size_t m = 0; m < params.n_mels; ++m) {
      double shape = 0.0;
      for (const auto& f : recipe) {
        const double d = (center_mels[m] - hz_to_mel(f.hz)) / f.width_mels;
        shape += f.gain * std::exp(-0.5 * d * d);
      }
      for (std::size_t k = 0; k < kFramesPerChar; ++k) {
        const double power = kLevel * kEnvelope[k] * shape;
        const double value = std::log(power + MelSpectrogram::kPowerFloor) + coloring[m];
        mel.at(c * kFramesPerChar + k, m) = std::max(value, floor);
      }
    }
  }
  return mel;
}

MelSpectrogram synthesize(const std::string& text, const VoiceProfile& profile,
                          SynthesizerAdapter& synth, const ProsodyParams& prosody) {
  if (text.empty()) throw Error(ErrorCode::kEmptyText, "nothing to synthesize");
  utf8::require_valid(text);
  profile.validate();
  auto mel = synth.synthesize(text, profile, prosody);
  mel.validate();
  return mel;
}

AudioClip ReferenceVocoder::vocode(const MelSpectrogram& mel) {
  const auto& p = mel.params;
  const MelFilterbank bank(p);
  const auto& centers = bank.center_frequencies();
  const std::size_t n_out = mel.frames * p.hop;
  std::vector<double> out(n_out, 0.0);
  if (mel.frames == 0) return AudioClip(std::move(out), p.sample_rate);

  const double normalizer = static_cast<double>(p.n_fft) / 4.0;
  std::vector<double> amp(mel.frames * p.n_mels);
  for (std::size_t i = 0; i < amp.size(); ++i) amp[i] = std::exp(0.5 * mel.data[i]) / normalizer;

  const double half_hop = static_cast<double>(p.hop) / 2.0;
  for (std::size_t m = 0; m < p.n_mels; ++m) {
    double peak_amp = 0.0;
    for (std::size_t t = 0; t < mel.frames; ++t) peak_amp = std::max(peak_amp, amp[t * p.n_mels + m]);
    if (peak_amp == 0.0) continue;
    const double omega = kTwoPi * centers[m] / p.sample_rate;
    // Fixed quadratic phase spread keeps the partials from adding up coherently.
    const double phase0 = std::numbers::pi * static_cast<double>(m * m) / static_cast<double>(p.n_mels);
    const std::complex<double> step = std::polar(1.0, omega);
    for (std::size_t t = 0; t < mel.frames; ++t) {
      const std::size_t begin = t * p.hop;
      // Re-anchor the oscillator every frame to bound rounding drift.
      std::complex<double> osc = std::polar(1.0, omega * static_cast<double>(begin) + phase0);
      for (std::size_t n = begin; n < begin + p.hop; ++n) {
        const double u = (static_cast<double>(n) - half_hop) / static_cast<double>(p.hop);
        double a = 0.0;
        if (u <= 0.0) {
          a = amp[m];
        } else if (u >= static_cast<double>(mel.frames - 1)) {
          a = amp[(mel.frames - 1) * p.n_mels + m];
        } else {
          const auto t0 = static_cast<std::size_t>(u);
          const double frac = u - static_cast<double>(t0);
          a = amp[t0 * p.n_mels + m] * (1.0 - frac) + amp[(t0 + 1) * p.n_mels + m] * frac;
        }
        out[n] += a * osc.imag();
        osc *= step;
      }
    }
  }

  double peak = 0.0;
  for (double s : out) peak = std::max(peak, std::abs(s));
  if (peak > 1e-3) {
    const double g = 0.9 / peak;
    for (double& s : out) s *= g;
  }
  for (double& s : out) s = std::clamp(s, -1.0, 1.0);
  return AudioClip(std::move(out), p.sample_rate);
}

AudioClip vocode(const MelSpectrogram& mel, VocoderAdapter& vocoder) {
  mel.validate();
  auto clip = vocoder.vocode(mel);
  if (clip.size() != mel.frames * mel.params.hop) {
    throw Error(ErrorCode::kAdapterUnavailable, "vocoder violated the T * hop length contract",
                {{"expected", mel.frames * mel.params.hop}, {"actual", clip.size()}});
  }
  return clip;
}

// ---------------------------------------------------------------------------

namespace {

// Reads x at fractional positions i * step for i in [0, out_len).
std::vector<double> resample_by_step(std::span<const double> x, double step, std::size_t out_len) {
  std::vector<double> out(out_len);
  for (std::size_t i = 0; i < out_len; ++i) {
    const double pos = static_cast<double>(i) * step;
    const auto i0 = static_cast<std::size_t>(pos);
    if (i0 + 1 >= x.size()) {
      out[i] = x.empty() ? 0.0 : x.back();
      continue;
    }
    const double frac = pos - static_cast<double>(i0);
    out[i] = x[i0] + frac * (x[i0 + 1] - x[i0]);
  }
  return out;
}

// WSOLA time stretch to exactly out_len samples: each frame is taken near its
// nominal input position, at the offset whose head best matches the natural
// continuation of the previous frame, so periods line up across overlaps.
std::vector<double> wsola_stretch(std::span<const double> x, std::size_t out_len) {
  constexpr std::size_t kFrame = 640;
  constexpr std::size_t kHop = kFrame / 2;
  constexpr long kTolerance = 200;
  std::vector<double> out(out_len, 0.0);
  std::vector<double> norm(out_len, 0.0);
  if (x.empty() || out_len == 0) return out;
  const auto window = dsp::hann_window(kFrame);
  const auto n = static_cast<long>(x.size());
  auto at = [&](long i) { return i >= 0 && i < n ? x[static_cast<std::size_t>(i)] : 0.0; };
  const double analysis_hop = static_cast<double>(kHop) * static_cast<double>(x.size()) / static_cast<double>(out_len);

  long prev = -1;
  for (std::size_t k = 0;; ++k) {
    const std::size_t out_start = k * kHop;
    if (out_start >= out_len) break;
    const long nominal = std::lround(static_cast<double>(k) * analysis_hop);
    long pick = nominal;
    if (prev >= 0) {
      const long target = prev + static_cast<long>(kHop);
      double best = -std::numeric_limits<double>::infinity();
      for (long c = std::max(0L, nominal - kTolerance); c <= std::min(n - 1, nominal + kTolerance); ++c) {
        double dot = 0.0;
        double energy = 1e-12;
        for (long j = 0; j < static_cast<long>(kHop); ++j) {
          const double v = at(c + j);
          dot += v * at(target + j);
          energy += v * v;
        }
        const double score = dot / std::sqrt(energy);
        if (score > best) {
          best = score;
          pick = c;
        }
      }
    }
    for (std::size_t j = 0; j < kFrame && out_start + j < out_len; ++j) {
      out[out_start + j] += at(pick + static_cast<long>(j)) * window[j];
      norm[out_start + j] += window[j];
    }
    prev = pick;
  }
  for (std::size_t i = 0; i < out_len; ++i) {
    if (norm[i] > 1e-3) out[i] /= norm[i];
  }
  return out;
}

}  // namespace

AudioClip apply_prosody(const AudioClip& clip, const ProsodyParams& prosody) {
  if (!prosody.valid()) throw Error(ErrorCode::kInvalidArgument, "prosody parameters out of range");
  if (prosody.is_identity() || clip.empty()) return clip;

  std::vector<double> x(clip.samples().begin(), clip.samples().end());
  if (prosody.pitch_shift != 0.0) {
    // Resampling by the pitch ratio raises the pitch and shortens the clip;
    // the stretch restores the length.
    const double ratio = std::pow(2.0, prosody.pitch_shift / 12.0);
    const auto shifted_len =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(x.size()) / ratio)));
    const auto shifted = resample_by_step(x, ratio, shifted_len);
    x = wsola_stretch(shifted, x.size());
  }
  if (prosody.rate != 1.0) {
    const auto out_len = static_cast<std::size_t>(std::llround(static_cast<double>(x.size()) / prosody.rate));
    x = resample_by_step(x, prosody.rate, out_len);
  }
  if (prosody.volume_gain != 0.0) {
    const double g = std::pow(10.0, prosody.volume_gain / 20.0);
    for (double& s : x) s *= g;
  }
  for (double& s : x) s = std::clamp(s, -1.0, 1.0);
  return AudioClip(std::move(x), clip.sample_rate(), clip.annotation());
}

}  // namespace innerself
