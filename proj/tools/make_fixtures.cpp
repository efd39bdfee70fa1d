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

// Generates the labelled speech-like fixture clips under data/fixtures.
//
// Each clip is a train of harmonic "syllables" whose pitch, tempo, loudness,
// attack and spectral tilt follow a per-emotion style. The spoken transcript
// is stored in the WAV comment chunk so the reference speech-to-text adapter
// can return it.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "innerself/audio.hpp"

namespace {

using innerself::AudioClip;
namespace fs = std::filesystem;

struct Style {
  double f0;          // Hz
  double f0_spread;   // per-syllable random pitch offset, fraction of f0
  double glide;       // pitch change across a syllable, fraction of f0
  double tremor;      // vibrato depth, fraction of f0
  double rate;        // syllables per second
  double duty;        // voiced share of each syllable slot
  double attack;      // seconds
  double tilt;        // harmonic rolloff exponent
  double loudness;    // peak amplitude
  double burst;       // consonant noise level relative to loudness
};

Style style_for(const std::string& label) {
  if (label == "anxiety") return {250, 0.12, 0.10, 0.06, 6.0, 0.60, 0.020, 1.0, 0.35, 0.05};
  if (label == "anger") return {210, 0.25, -0.15, 0.02, 5.0, 0.70, 0.005, 0.6, 0.80, 0.20};
  if (label == "sadness") return {120, 0.04, -0.05, 0.01, 2.5, 0.75, 0.080, 1.8, 0.15, 0.01};
  if (label == "shame_regret") return {145, 0.07, -0.08, 0.015, 3.2, 0.55, 0.050, 1.5, 0.20, 0.02};
  if (label == "mixed") return {160, 0.07, -0.02, 0.02, 3.6, 0.60, 0.050, 1.5, 0.22, 0.02};
  return {170, 0.10, 0.02, 0.01, 4.0, 0.65, 0.030, 1.2, 0.40, 0.05};
}

std::size_t word_count(const std::string& text) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : text) {
    const bool w = std::isalnum(static_cast<unsigned char>(c)) || c == '\'';
    if (w && !in_word) ++n;
    in_word = w;
  }
  return n;
}

AudioClip render(const Style& base, const std::string& transcript, unsigned seed) {
  constexpr int kRate = innerself::kCanonicalSampleRate;
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);

  Style s = base;
  s.f0 *= 1.0 + 0.05 * uni(rng);
  s.rate *= 1.0 + 0.08 * uni(rng);

  const auto syllables = static_cast<std::size_t>(std::llround(1.4 * static_cast<double>(word_count(transcript)))) + 1;
  const double slot = 1.0 / s.rate;
  const double lead = 0.15;
  const auto total = static_cast<std::size_t>((lead * 2 + static_cast<double>(syllables) * slot) * kRate);
  std::vector<double> x(total, 0.0);

  double phase = 0.0;
  for (std::size_t k = 0; k < syllables; ++k) {
    const double start = lead + static_cast<double>(k) * slot;
    const double voiced = slot * s.duty * (1.0 + 0.15 * uni(rng));
    const double pitch = s.f0 * (1.0 + s.f0_spread * uni(rng));
    const double accent = 0.7 + 0.3 * std::abs(uni(rng));
    const auto n0 = static_cast<std::size_t>(start * kRate);
    const auto n_voiced = static_cast<std::size_t>(voiced * kRate);

    // Consonant burst just before the vowel.
    const auto n_burst = static_cast<std::size_t>(0.025 * kRate);
    for (std::size_t i = 0; i < n_burst && n0 >= n_burst; ++i) {
      const double env = std::sin(std::numbers::pi * static_cast<double>(i) / static_cast<double>(n_burst));
      x[n0 - n_burst + i] += s.loudness * s.burst * env * uni(rng);
    }

    for (std::size_t i = 0; i < n_voiced && n0 + i < total; ++i) {
      const double t = static_cast<double>(i) / kRate;
      const double u = static_cast<double>(i) / static_cast<double>(n_voiced);
      const double f = pitch * (1.0 + s.glide * (u - 0.5)) * (1.0 + s.tremor * std::sin(kTwoPi * 7.0 * t));
      phase += kTwoPi * f / kRate;
      double v = 0.0;
      for (int h = 1; h * f < 4000.0; ++h) v += std::sin(h * phase) / std::pow(h, s.tilt);
      const double attack = std::min(1.0, t / s.attack);
      const double release = std::min(1.0, (1.0 - u) * voiced / 0.04);
      x[n0 + i] += s.loudness * accent * attack * release * 0.5 * v;
    }
  }
  double peak = 0.0;
  for (double& v : x) {
    v += 0.001 * uni(rng);
    peak = std::max(peak, std::abs(v));
  }
  if (peak > 0.99) {
    for (double& v : x) v *= 0.99 / peak;
  }
  return AudioClip(std::move(x), kRate, transcript);
}

struct FixtureSpec {
  std::string file;
  std::string label;  // emotion label, "mixed", or "enroll"
  std::string transcript;
};

const std::vector<FixtureSpec>& fixture_specs() {
  static const std::vector<FixtureSpec> specs = {
      {"worked_example.wav", "anxiety", "I CAN'T EVER get things done on time. I'll NEVER be good at this."},
      {"anxiety_1.wav", "anxiety", "I always panic before every meeting and my heart races."},
      {"anxiety_2.wav", "anxiety", "I am nervous that I will never finish this project in time."},
      {"anger_1.wav", "anger", "I hate how they always interrupt me, it is so unfair!"},
      {"anger_2.wav", "anger", "Nothing ever works the way it should, this is so annoying!"},
      {"sadness_1.wav", "sadness", "I feel so sad and lonely these days."},
      {"sadness_2.wav", "sadness", "I miss my friends and I cry at night."},
      {"shame_1.wav", "shame_regret", "I regret what I said to my sister, I feel so ashamed."},
      {"shame_2.wav", "shame_regret", "I am sorry I let my team down, I feel guilty."},
      {"neutral_1.wav", "neutral", "Today I went for a walk and had a nice lunch."},
      {"neutral_2.wav", "neutral", "I finished my homework and now I am ready to relax."},
      {"mixed_1.wav", "mixed", "I feel tired and a bit lost about my work."},
      {"enroll_1.wav", "enroll", "The quick brown fox jumps over the lazy dog near the river bank."},
      {"enroll_2.wav", "enroll", "I like to read a good book on a quiet Sunday afternoon."},
      {"enroll_3.wav", "enroll", "My favourite season is spring because the flowers start to bloom."},
  };
  return specs;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate labelled fixture clips"};
  std::string out_dir = "data/fixtures";
  unsigned seed = 20240501;
  app.add_option("-o,--out", out_dir, "Output directory");
  app.add_option("--seed", seed, "Base random seed");
  CLI11_PARSE(app, argc, argv);

  fs::create_directories(out_dir);
  nlohmann::json manifest = nlohmann::json::array();
  unsigned n = 0;
  for (const auto& spec : fixture_specs()) {
    const std::string style = spec.label == "enroll" ? "neutral" : spec.label;
    const AudioClip clip = render(style_for(style), spec.transcript, seed + 7919 * n++);
    innerself::write_wav(fs::path(out_dir) / spec.file, clip);
    manifest.push_back({{"file", spec.file}, {"label", spec.label}, {"transcript", spec.transcript}});
    std::cout << spec.file << "  " << clip.duration_seconds() << " s\n";
  }
  std::ofstream(fs::path(out_dir) / "manifest.json") << manifest.dump(2) << "\n";
  return 0;
}
