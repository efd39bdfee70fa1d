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

#include "innerself/emotion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "innerself/dsp.hpp"
#include "innerself/error.hpp"

namespace innerself {
namespace {

constexpr double kLogitClamp = 1e4;

struct FrameLayout {
  std::size_t length;
  std::size_t hop;
  std::size_t count;
};

FrameLayout frames_for(std::size_t n_samples, std::size_t length, std::size_t hop) {
  if (length == 0 || n_samples < length) return {length, hop, 0};
  return {length, hop, 1 + (n_samples - length) / hop};
}

std::size_t seconds_to_samples(double seconds, int rate) {
  return static_cast<std::size_t>(std::lround(seconds * rate));
}

double mean_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double variance_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return acc / static_cast<double>(v.size());
}

std::vector<double> frame_rms(std::span<const double> x, const FrameLayout& layout) {
  std::vector<double> rms(layout.count);
  for (std::size_t f = 0; f < layout.count; ++f) {
    double acc = 0.0;
    const auto frame = x.subspan(f * layout.hop, layout.length);
    for (double s : frame) acc += s * s;
    rms[f] = std::sqrt(acc / static_cast<double>(layout.length));
  }
  return rms;
}

// Normalized cross-correlation between x[0, L-lag) and x[lag, L).
double nccf(std::span<const double> x, std::size_t lag) {
  const std::size_t n = x.size() - lag;
  double num = 0.0;
  double e1 = 0.0;
  double e2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    num += x[i] * x[i + lag];
    e1 += x[i] * x[i];
    e2 += x[i + lag] * x[i + lag];
  }
  const double den = std::sqrt(e1 * e2);
  return den > 0.0 ? num / den : 0.0;
}

void validate_feature_clip(const AudioClip& clip) {
  if (clip.duration_seconds() < kMinFeatureClipSeconds) {
    throw Error(ErrorCode::kClipTooShort, "clip shorter than 0.2 s",
                {{"duration_seconds", clip.duration_seconds()}});
  }
  if (clip.peak() < kSilencePeak) {
    throw Error(ErrorCode::kSilentClip, "clip peak amplitude below 1e-4");
  }
}

}  // namespace

std::string_view to_string(EmotionLabel label) {
  switch (label) {
    case EmotionLabel::kAnxiety: return "anxiety";
    case EmotionLabel::kSadness: return "sadness";
    case EmotionLabel::kShameRegret: return "shame_regret";
    case EmotionLabel::kAnger: return "anger";
    case EmotionLabel::kNeutral: return "neutral";
  }
  return "neutral";
}

EmotionLabel emotion_from_string(std::string_view name) {
  for (auto label : kAllEmotions) {
    if (to_string(label) == name) return label;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown emotion label '" + std::string(name) + "'");
}

std::string_view to_string(Modality modality) {
  switch (modality) {
    case Modality::kAudio: return "audio";
    case Modality::kText: return "text";
    case Modality::kFused: return "fused";
  }
  return "fused";
}

FeatureVector::FeatureVector(Modality modality, std::vector<double> values)
    : modality_(modality), values_(std::move(values)) {
  if (values_.empty()) throw Error(ErrorCode::kInvalidArgument, "feature vector is empty");
  for (double v : values_) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kNonFiniteInput, "non-finite feature value");
  }
}

double EmotionResult::negative_mass() const {
  double mass = 0.0;
  for (auto label : kAllEmotions) {
    if (is_negative(label)) mass += probability(label);
  }
  return mass;
}

EmotionResult EmotionResult::from_probabilities(const std::array<double, kEmotionCount>& probs,
                                                std::vector<double> logits) {
  double sum = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
      throw Error(ErrorCode::kInvalidArgument, "probability outside [0, 1]");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument, "probabilities do not sum to 1");
  }
  EmotionResult r;
  r.probabilities = probs;
  std::size_t best = 0;
  for (std::size_t i = 1; i < kEmotionCount; ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  r.dominant = kAllEmotions[best];
  r.confidence = probs[best];
  r.logits = std::move(logits);
  return r;
}

void to_json(nlohmann::json& j, const EmotionResult& r) {
  nlohmann::json probs = nlohmann::json::object();
  for (auto label : kAllEmotions) probs[std::string(to_string(label))] = r.probability(label);
  j = nlohmann::json{{"probabilities", probs},
                     {"dominant", std::string(to_string(r.dominant))},
                     {"confidence", r.confidence},
                     {"logits", r.logits}};
}

void from_json(const nlohmann::json& j, EmotionResult& r) {
  std::array<double, kEmotionCount> probs{};
  for (auto label : kAllEmotions) {
    probs[index_of(label)] = j.at("probabilities").at(std::string(to_string(label))).get<double>();
  }
  std::vector<double> logits;
  if (j.contains("logits")) logits = j.at("logits").get<std::vector<double>>();
  r = EmotionResult::from_probabilities(probs, std::move(logits));
}

// ---------------------------------------------------------------------------

ClassifierHead::ClassifierHead(std::size_t input_dim, std::vector<double> weights_row_major,
                               std::vector<double> bias)
    : input_dim_(input_dim), weights_(std::move(weights_row_major)), bias_(std::move(bias)) {
  if (input_dim_ == 0 || weights_.size() != kEmotionCount * input_dim_ ||
      bias_.size() != kEmotionCount) {
    throw Error(ErrorCode::kDimensionMismatch, "classifier head shape must be 5 x D with 5 biases");
  }
  for (double w : weights_) {
    if (!std::isfinite(w)) throw Error(ErrorCode::kNonFiniteInput, "non-finite head weight");
  }
  for (double b : bias_) {
    if (!std::isfinite(b)) throw Error(ErrorCode::kNonFiniteInput, "non-finite head bias");
  }
}

ClassifierHead ClassifierHead::from_json(const nlohmann::json& j) {
  try {
    const auto dims = j.at("dims").get<std::vector<std::size_t>>();
    if (dims.size() != 2 || dims[0] != kEmotionCount) {
      throw Error(ErrorCode::kDimensionMismatch, "head dims must be [5, D]");
    }
    const auto rows = j.at("weights").get<std::vector<std::vector<double>>>();
    if (rows.size() != dims[0]) throw Error(ErrorCode::kDimensionMismatch, "weights row count");
    std::vector<double> flat;
    flat.reserve(dims[0] * dims[1]);
    for (const auto& row : rows) {
      if (row.size() != dims[1]) throw Error(ErrorCode::kDimensionMismatch, "weights column count");
      flat.insert(flat.end(), row.begin(), row.end());
    }
    return ClassifierHead(dims[1], std::move(flat), j.at("bias").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kTableError, std::string("classifier head: ") + e.what());
  }
}

ClassifierHead ClassifierHead::load(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file_bytes(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kTableError, path.string() + ": " + e.what());
  }
  return from_json(j);
}

nlohmann::json ClassifierHead::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < kEmotionCount; ++r) {
    rows.push_back(std::vector<double>(weights_.begin() + static_cast<std::ptrdiff_t>(r * input_dim_),
                                       weights_.begin() + static_cast<std::ptrdiff_t>((r + 1) * input_dim_)));
  }
  return {{"dims", {kEmotionCount, input_dim_}}, {"weights", rows}, {"bias", bias_}};
}

// ---------------------------------------------------------------------------

std::vector<double> estimate_f0_track(const AudioClip& clip) {
  const auto x = clip.samples();
  const int sr = clip.sample_rate();
  const auto layout =
      frames_for(x.size(), seconds_to_samples(0.040, sr), seconds_to_samples(0.020, sr));
  const auto lag_min = static_cast<std::size_t>(std::floor(sr / 500.0));
  const auto lag_max = std::min(static_cast<std::size_t>(std::ceil(sr / 60.0)),
                                layout.length > 2 ? layout.length / 2 : 0);
  std::vector<double> track;
  if (layout.count == 0 || lag_min < 2 || lag_max <= lag_min + 1) return track;

  const auto rms = frame_rms(x, layout);
  const double loudest = *std::max_element(rms.begin(), rms.end());
  std::vector<double> frame(layout.length);
  std::vector<double> corr(lag_max + 2, 0.0);

  for (std::size_t f = 0; f < layout.count; ++f) {
    if (loudest <= 0.0 || rms[f] < 0.1 * loudest) continue;
    const auto src = x.subspan(f * layout.hop, layout.length);
    const double m = mean_of(src);
    std::transform(src.begin(), src.end(), frame.begin(), [m](double s) { return s - m; });

    double best = -1.0;
    for (std::size_t lag = lag_min - 1; lag <= lag_max + 1; ++lag) {
      corr[lag] = nccf(frame, lag);
      if (lag >= lag_min && lag <= lag_max) best = std::max(best, corr[lag]);
    }
    if (best < 0.5) continue;

    // The first strong local maximum avoids picking a sub-harmonic.
    std::size_t pick = 0;
    for (std::size_t lag = lag_min; lag <= lag_max; ++lag) {
      if (corr[lag] >= 0.85 * best && corr[lag] >= corr[lag - 1] && corr[lag] >= corr[lag + 1]) {
        pick = lag;
        break;
      }
    }
    if (pick == 0) continue;
    const double a = corr[pick - 1];
    const double b = corr[pick];
    const double c = corr[pick + 1];
    const double denom = a - 2.0 * b + c;
    double offset = denom != 0.0 ? 0.5 * (a - c) / denom : 0.0;
    offset = std::clamp(offset, -0.5, 0.5);
    track.push_back(sr / (static_cast<double>(pick) + offset));
  }
  return track;
}

FeatureVector extract_audio_features(const AudioClip& clip) {
  validate_feature_clip(clip);
  const auto x = clip.samples();
  const int sr = clip.sample_rate();
  std::vector<double> out(kReferenceAudioDim, 0.0);

  // Energy and zero crossings on non-overlapping 20 ms frames.
  const std::size_t len = std::max<std::size_t>(2, seconds_to_samples(0.020, sr));
  const auto energy_layout = frames_for(x.size(), len, len);
  const auto rms = frame_rms(x, energy_layout);
  out[kRmsMean] = mean_of(rms);
  out[kRmsVariance] = variance_of(rms);

  std::vector<double> zcr(energy_layout.count);
  for (std::size_t f = 0; f < energy_layout.count; ++f) {
    const auto frame = x.subspan(f * len, len);
    std::size_t crossings = 0;
    for (std::size_t i = 1; i < frame.size(); ++i) {
      if ((frame[i - 1] >= 0.0) != (frame[i] >= 0.0)) ++crossings;
    }
    zcr[f] = static_cast<double>(crossings) / static_cast<double>(len - 1);
  }
  out[kZeroCrossingRate] = mean_of(zcr);

  const auto f0 = estimate_f0_track(clip);
  if (!f0.empty()) {
    out[kF0Mean] = mean_of(f0);
    out[kF0Variance] = variance_of(f0);
    const auto [lo, hi] = std::minmax_element(f0.begin(), f0.end());
    out[kF0Range] = *hi - *lo;
  }

  // Onsets: upward crossings of half the mean frame energy.
  const double threshold = 0.5 * out[kRmsMean];
  std::size_t onsets = 0;
  bool above = false;
  for (double r : rms) {
    const bool now = r >= threshold;
    if (now && !above) ++onsets;
    above = now;
  }
  out[kSpeakingRate] = static_cast<double>(onsets) / clip.duration_seconds();

  constexpr std::size_t kCentroidFft = 512;
  const auto spec_layout = frames_for(x.size(), kCentroidFft, kCentroidFft / 2);
  if (spec_layout.count > 0) {
    dsp::PowerSpectrum spectrum(kCentroidFft);
    const auto window = dsp::hann_window(kCentroidFft);
    std::vector<double> frame(kCentroidFft);
    std::vector<double> power(spectrum.bins());
    std::vector<double> centroids;
    std::vector<double> energies;
    for (std::size_t f = 0; f < spec_layout.count; ++f) {
      const auto src = x.subspan(f * spec_layout.hop, kCentroidFft);
      for (std::size_t i = 0; i < kCentroidFft; ++i) frame[i] = src[i] * window[i];
      spectrum.compute(frame, power);
      double total = 0.0;
      double weighted = 0.0;
      for (std::size_t k = 0; k < power.size(); ++k) {
        total += power[k];
        weighted += power[k] * static_cast<double>(k) * sr / static_cast<double>(kCentroidFft);
      }
      energies.push_back(total);
      centroids.push_back(total > 0.0 ? weighted / total : 0.0);
    }
    const double loudest = *std::max_element(energies.begin(), energies.end());
    std::vector<double> kept;
    for (std::size_t f = 0; f < centroids.size(); ++f) {
      if (loudest > 0.0 && energies[f] >= 0.01 * loudest) kept.push_back(centroids[f]);
    }
    out[kSpectralCentroid] = mean_of(kept);
  }
  return FeatureVector(Modality::kAudio, std::move(out));
}

// ---------------------------------------------------------------------------

LexiconSet LexiconSet::load(const std::filesystem::path& dir) {
  return LexiconSet{Lexicon::load(dir / "positive.txt"), Lexicon::load(dir / "negative.txt"),
                    Lexicon::load(dir / "absolutes.txt")};
}

bool is_first_person_singular(std::string_view t) {
  static constexpr std::string_view kWords[] = {"i",    "me",   "my",   "mine", "myself",
                                                "i'm",  "i'll", "i've", "i'd"};
  return std::find(std::begin(kWords), std::end(kWords), t) != std::end(kWords);
}

bool is_second_person(std::string_view t) {
  static constexpr std::string_view kWords[] = {"you",    "your",   "yours", "yourself",
                                                "you're", "you'll", "you've", "you'd",
                                                "yourselves"};
  return std::find(std::begin(kWords), std::end(kWords), t) != std::end(kWords);
}

FeatureVector extract_text_features(std::string_view transcript, const LexiconSet& lexicons) {
  const auto tokens = tokenize(transcript);
  if (tokens.empty()) throw Error(ErrorCode::kEmptyTranscript, "transcript has no words");
  const auto n = static_cast<double>(tokens.size());

  std::vector<double> out(kReferenceTextDim, 0.0);
  out[kNegativeRatio] = static_cast<double>(lexicons.negative.find_all(transcript, tokens).size()) / n;
  out[kPositiveRatio] = static_cast<double>(lexicons.positive.find_all(transcript, tokens).size()) / n;
  out[kAbsoluteRatio] = static_cast<double>(lexicons.absolutes.find_all(transcript, tokens).size()) / n;
  out[kFirstPersonRatio] =
      static_cast<double>(std::count_if(tokens.begin(), tokens.end(),
                                        [](const Token& t) { return is_first_person_singular(t.lower); })) /
      n;
  out[kQuestionRatio] = static_cast<double>(std::count(transcript.begin(), transcript.end(), '?')) / n;
  out[kExclamationRatio] = static_cast<double>(std::count(transcript.begin(), transcript.end(), '!')) / n;
  return FeatureVector(Modality::kText, std::move(out));
}

FeatureVector fuse(const FeatureVector& audio, const FeatureVector& text) {
  if (audio.modality() != Modality::kAudio || text.modality() != Modality::kText) {
    throw Error(ErrorCode::kModalityMismatch,
                "fuse expects (audio, text), got (" + std::string(to_string(audio.modality())) +
                    ", " + std::string(to_string(text.modality())) + ")");
  }
  std::vector<double> values(audio.values().begin(), audio.values().end());
  values.insert(values.end(), text.values().begin(), text.values().end());
  return FeatureVector(Modality::kFused, std::move(values));
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw Error(ErrorCode::kInvalidArgument, "softmax of an empty vector");
  std::vector<double> z(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!std::isfinite(logits[i])) throw Error(ErrorCode::kNonFiniteInput, "non-finite logit");
    z[i] = std::clamp(logits[i], -kLogitClamp, kLogitClamp);
  }
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : z) v /= sum;
  return z;
}

EmotionResult classify(const FeatureVector& fused, const ClassifierHead& head) {
  if (fused.dimension() != head.input_dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "head expects " + std::to_string(head.input_dim()) + " features, got " +
                    std::to_string(fused.dimension()));
  }
  std::vector<double> logits(kEmotionCount);
  const auto x = fused.values();
  for (std::size_t r = 0; r < kEmotionCount; ++r) {
    double acc = head.bias()[r];
    for (std::size_t c = 0; c < x.size(); ++c) acc += head.weight(r, c) * x[c];
    logits[r] = acc;
  }
  const auto p = softmax(logits);
  std::array<double, kEmotionCount> probs{};
  std::copy(p.begin(), p.end(), probs.begin());

  EmotionResult r;
  r.probabilities = probs;
  std::size_t best = 0;
  for (std::size_t i = 1; i < kEmotionCount; ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  r.dominant = kAllEmotions[best];
  r.confidence = probs[best];
  r.logits = std::move(logits);
  return r;
}

// ---------------------------------------------------------------------------

void to_json(nlohmann::json& j, const AdapterDescriptor& d) {
  j = {{"name", d.name}, {"feature_dim", d.feature_dim}, {"endpoint", d.endpoint}};
}

void from_json(const nlohmann::json& j, AdapterDescriptor& d) {
  d.name = j.at("name").get<std::string>();
  d.feature_dim = j.at("feature_dim").get<std::size_t>();
  d.endpoint = j.value("endpoint", std::string{});
}

std::string ReferenceSpeechToText::transcribe(const AudioClip& clip) {
  if (clip.peak() < kSilencePeak) return {};
  return clip.annotation();
}

std::string transcribe(const AudioClip& clip, SpeechToTextAdapter& stt) {
  if (clip.empty() || clip.peak() < kSilencePeak) {
    throw Error(ErrorCode::kEmptyTranscript, "clip is silent");
  }
  std::string text = stt.transcribe(clip);
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw Error(ErrorCode::kEmptyTranscript, "speech-to-text returned no words");
  }
  return text;
}

}  // namespace innerself
