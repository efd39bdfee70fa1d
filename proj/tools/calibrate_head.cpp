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

// Fits the reference classifier head on the labelled fixtures.
//
// The head is a nearest-centroid rule in a standardized feature space, with
// one gain for the audio block and one for the text block, written out as an
// ordinary linear layer. Gains are picked from a small grid to maximize the
// smallest logit margin; the temperature is the softest one that still gives
// every training fixture a confidence of at least --min-confidence.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "innerself/audio.hpp"
#include "innerself/emotion.hpp"

namespace {

using namespace innerself;
namespace fs = std::filesystem;

struct Sample {
  std::string file;
  std::string label;
  std::vector<double> x;
};

struct Fit {
  std::vector<double> weights;  // 5 x D
  std::vector<double> bias;
  double min_margin = -std::numeric_limits<double>::infinity();
};

Fit fit(const std::vector<Sample>& train, double audio_gain, double text_gain) {
  const std::size_t d = train.front().x.size();
  std::vector<double> mu(d, 0.0);
  std::vector<double> sd(d, 0.0);
  for (const auto& s : train) {
    for (std::size_t j = 0; j < d; ++j) mu[j] += s.x[j];
  }
  for (auto& v : mu) v /= static_cast<double>(train.size());
  for (const auto& s : train) {
    for (std::size_t j = 0; j < d; ++j) sd[j] += (s.x[j] - mu[j]) * (s.x[j] - mu[j]);
  }
  std::vector<double> scale(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    sd[j] = std::sqrt(sd[j] / static_cast<double>(train.size()));
    const double gain = j < kReferenceAudioDim ? audio_gain : text_gain;
    scale[j] = sd[j] > 1e-12 ? gain / sd[j] : 0.0;
  }

  std::vector<std::vector<double>> centroid(kEmotionCount, std::vector<double>(d, 0.0));
  std::vector<std::size_t> count(kEmotionCount, 0);
  for (const auto& s : train) {
    const auto k = index_of(emotion_from_string(s.label));
    ++count[k];
    for (std::size_t j = 0; j < d; ++j) centroid[k][j] += (s.x[j] - mu[j]) * scale[j];
  }
  Fit f;
  f.weights.assign(kEmotionCount * d, 0.0);
  f.bias.assign(kEmotionCount, 0.0);
  for (std::size_t k = 0; k < kEmotionCount; ++k) {
    if (count[k] == 0) throw std::runtime_error("no training fixture for a label");
    double norm2 = 0.0;
    double shift = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      centroid[k][j] /= static_cast<double>(count[k]);
      norm2 += centroid[k][j] * centroid[k][j];
      f.weights[k * d + j] = centroid[k][j] * scale[j];
      shift += centroid[k][j] * scale[j] * mu[j];
    }
    f.bias[k] = -0.5 * norm2 - shift;
  }

  f.min_margin = std::numeric_limits<double>::infinity();
  for (const auto& s : train) {
    const auto truth = index_of(emotion_from_string(s.label));
    std::vector<double> logits(kEmotionCount);
    for (std::size_t k = 0; k < kEmotionCount; ++k) {
      logits[k] = f.bias[k];
      for (std::size_t j = 0; j < d; ++j) logits[k] += f.weights[k * d + j] * s.x[j];
    }
    double best_other = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < kEmotionCount; ++k) {
      if (k != truth) best_other = std::max(best_other, logits[k]);
    }
    f.min_margin = std::min(f.min_margin, logits[truth] - best_other);
  }
  return f;
}

ClassifierHead scaled(const Fit& f, std::size_t d, double beta) {
  std::vector<double> w(f.weights);
  std::vector<double> b(f.bias);
  for (auto& v : w) v *= beta;
  for (auto& v : b) v *= beta;
  return ClassifierHead(d, std::move(w), std::move(b));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fit the reference emotion head"};
  std::string fixtures = "data/fixtures";
  std::string lexicons = "data/lexicons";
  std::string out = "data/models/reference_head.json";
  double min_confidence = 0.6;
  app.add_option("--fixtures", fixtures, "Fixture directory with manifest.json");
  app.add_option("--lexicons", lexicons, "Lexicon directory");
  app.add_option("-o,--out", out, "Output head file");
  app.add_option("--min-confidence", min_confidence, "Required confidence on every training fixture");
  CLI11_PARSE(app, argc, argv);

  const auto lex = LexiconSet::load(lexicons);
  std::ifstream in(fs::path(fixtures) / "manifest.json");
  const auto manifest = nlohmann::json::parse(in);

  std::vector<Sample> train;
  std::vector<Sample> probe;
  for (const auto& e : manifest) {
    const std::string label = e.at("label");
    if (label == "enroll") continue;
    const std::string file = e.at("file");
    const auto clip = read_wav(fs::path(fixtures) / file);
    const auto fused = fuse(extract_audio_features(clip), extract_text_features(clip.annotation(), lex));
    Sample s{file, label, std::vector<double>(fused.values().begin(), fused.values().end())};
    (label == "mixed" ? probe : train).push_back(std::move(s));
  }
  if (train.empty()) {
    std::cerr << "no training fixtures\n";
    return 1;
  }
  const std::size_t d = train.front().x.size();

  const double gains[] = {0.25, 0.5, 1.0, 2.0, 4.0};
  Fit best;
  double best_ga = 1.0;
  double best_gt = 1.0;
  for (double ga : gains) {
    for (double gt : gains) {
      // Margins scale with the squared gains, so compare at unit total gain.
      Fit f = fit(train, ga, gt);
      const double norm = ga * ga + gt * gt;
      if (f.min_margin / norm > best.min_margin / (best_ga * best_ga + best_gt * best_gt)) {
        best = std::move(f);
        best_ga = ga;
        best_gt = gt;
      }
    }
  }
  if (best.min_margin <= 0.0) {
    std::cerr << "fixtures are not separable by the reference head (margin " << best.min_margin << ")\n";
    return 1;
  }

  double beta = 0.0;
  for (double b = 0.01; b < 100.0; b *= 1.05) {
    const auto head = scaled(best, d, b);
    bool ok = true;
    for (const auto& s : train) {
      const auto r = classify(FeatureVector(Modality::kFused, s.x), head);
      ok = ok && to_string(r.dominant) == s.label && r.confidence >= min_confidence;
    }
    if (ok) {
      beta = b;
      break;
    }
  }
  if (beta == 0.0) {
    std::cerr << "no temperature reaches the required confidence\n";
    return 1;
  }

  const auto head = scaled(best, d, beta);
  fs::create_directories(fs::path(out).parent_path());
  std::ofstream(out) << std::setprecision(17) << head.to_json().dump(2) << "\n";

  std::cout << "audio gain " << best_ga << ", text gain " << best_gt << ", beta " << beta << "\n";
  auto report = [&](const Sample& s) {
    const auto r = classify(FeatureVector(Modality::kFused, s.x), head);
    std::cout << std::left << std::setw(20) << s.file << std::setw(14) << s.label << " -> " << std::setw(14)
              << to_string(r.dominant) << " conf " << std::fixed << std::setprecision(3) << r.confidence
              << " neg " << r.negative_mass() << "\n";
  };
  for (const auto& s : train) report(s);
  for (const auto& s : probe) report(s);
  return 0;
}
