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

#include <doctest.h>

#include <algorithm>
#include <random>

#include "innerself/dsp.hpp"
#include "innerself/voiceclone.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace innerself;
using innerself::testing::sine;

namespace {

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

constexpr std::size_t kFrames = 4;
constexpr std::size_t kLength = 1024 + (kFrames - 1) * 256;

}  // namespace

TEST_CASE("hann window is periodic") {
  const auto w = dsp::hann_window(8);
  CHECK(w[0] == doctest::Approx(0.0));
  CHECK(w[4] == doctest::Approx(1.0));
  CHECK(w[2] == doctest::Approx(0.5));
  CHECK(w[6] == doctest::Approx(0.5));
}

TEST_CASE("power spectrum matches a direct DFT") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> frame(256);
  for (auto& v : frame) v = u(rng);
  dsp::PowerSpectrum ps(256);
  std::vector<double> power(ps.bins());
  // PowerSpectrum does not window; feed it the windowed frame.
  const auto w = dsp::hann_window(256);
  std::vector<double> windowed(256);
  for (std::size_t i = 0; i < 256; ++i) windowed[i] = frame[i] * w[i];
  ps.compute(windowed, power);
  const auto expected = oracle::naive_power_spectrum(frame);
  for (std::size_t k = 0; k < power.size(); ++k) {
    CHECK(power[k] == doctest::Approx(static_cast<double>(expected[k])).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("filterbank matches the independent construction") {
  const MelParams p;
  const MelFilterbank fb(p);
  const oracle::Filterbank ref(p.n_mels, p.n_fft, p.sample_rate, p.f_min, p.f_max);
  REQUIRE(fb.n_mels() == 80);
  for (std::size_t m = 0; m < fb.n_mels(); ++m) {
    CHECK(fb.center_frequencies()[m] == doctest::Approx(static_cast<double>(ref.centers[m])).epsilon(1e-12));
    for (std::size_t k = 0; k < fb.n_bins(); ++k) {
      REQUIRE(std::abs(fb.weight(m, k) - static_cast<double>(ref.w[m * ref.n_bins + k])) < 1e-12);
    }
  }
}

TEST_CASE("silence gives the floor everywhere") {
  const AudioClip silence(std::vector<double>(kLength, 0.0), kCanonicalSampleRate);
  const auto mel = compute_mel(silence);
  REQUIRE(mel.frames == kFrames);
  for (double v : mel.data) CHECK(v == MelSpectrogram::log_floor());
}

TEST_CASE("frame count and short clips") {
  CHECK(compute_mel(sine(440, 0.5, 1024)).frames == 1);
  CHECK(compute_mel(sine(440, 0.5, 1024 + 255)).frames == 1);
  CHECK(compute_mel(sine(440, 0.5, 1024 + 256)).frames == 2);
  CHECK_THROWS_AS(compute_mel(sine(440, 0.5, 1023)), innerself::Error);
}

TEST_CASE("sine at each filter centre peaks in that filter") {
  const MelFilterbank fb;
  const oracle::Filterbank ref(80, 1024, 16000, 0, 8000);
  for (std::size_t m = 0; m < 80; ++m) {
    CAPTURE(m);
    const auto clip = sine(fb.center_frequencies()[m], 0.5, kLength);
    const auto mel = compute_mel(clip);
    const auto expected = oracle::mel(clip.samples(), ref, 1024, 256);
    REQUIRE(mel.frames == expected.size());
    for (std::size_t t = 0; t < mel.frames; ++t) {
      CHECK(argmax(mel.frame(t)) == m);
      for (std::size_t j = 0; j < 80; ++j) {
        const double want = static_cast<double>(expected[t][j]);
        // Deep in the floor both sides are dominated by rounding noise.
        if (want > std::log(1e-6)) REQUIRE(std::abs(mel.at(t, j) - want) < 1e-6);
      }
    }
  }
}

TEST_CASE("doubling amplitude adds log 4 to non-floor entries") {
  // Non-floor: power at least 1e-4, where the 1e-10 offset moves the log by
  // under 1e-6.
  const double threshold = std::log(1e-4);
  for (double hz : {150.0, 440.0, 1234.5, 3000.0, 7000.0}) {
    CAPTURE(hz);
    const auto a = compute_mel(sine(hz, 0.25, kLength));
    const auto b = compute_mel(sine(hz, 0.5, kLength));
    std::size_t checked = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
      if (a.data[i] < threshold) continue;
      CHECK(std::abs(b.data[i] - a.data[i] - std::log(4.0)) < 1e-6);
      ++checked;
    }
    CHECK(checked > 0);
  }
}

TEST_CASE("clips at other rates are resampled first") {
  const auto native = compute_mel(sine(1000, 0.5, kLength));
  const auto clip48 = sine(1000, 0.5, kLength * 3, 48000);
  const auto resampled = compute_mel(clip48);
  REQUIRE(resampled.frames == native.frames);
  for (std::size_t t = 0; t < native.frames; ++t) CHECK(argmax(resampled.frame(t)) == argmax(native.frame(t)));
}

TEST_CASE("vocoder length contract") {
  ReferenceVocoder vocoder;
  for (std::size_t frames : {1u, 2u, 7u, 50u}) {
    MelSpectrogram mel;
    mel.frames = frames;
    mel.data.assign(frames * 80, MelSpectrogram::log_floor());
    const auto clip = vocode(mel, vocoder);
    CHECK(clip.size() == frames * mel.params.hop);
    CHECK(clip.sample_rate() == kCanonicalSampleRate);
  }
}

TEST_CASE("vocoder round trip keeps the spectral peak within one mel bin") {
  const MelFilterbank fb;
  ReferenceVocoder vocoder;
  for (std::size_t m = 4; m < 80; m += 5) {
    CAPTURE(m);
    const auto mel = compute_mel(sine(fb.center_frequencies()[m], 0.5, 1024 + 39 * 256));
    const auto audio = vocode(mel, vocoder);
    const auto back = compute_mel(audio);
    REQUIRE(back.frames > 0);
    for (std::size_t t = 0; t < back.frames; ++t) {
      const auto got = static_cast<long>(argmax(back.frame(t)));
      CHECK(std::abs(got - static_cast<long>(m)) <= 1);
    }
  }
}
