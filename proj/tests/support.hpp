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
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "innerself/error.hpp"
#include "innerself/service.hpp"

namespace innerself::testing {

inline std::filesystem::path source_dir() { return INNERSELF_SOURCE_DIR; }
inline std::filesystem::path fixture(const std::string& name) { return source_dir() / "data" / "fixtures" / name; }
inline std::filesystem::path demo_script() { return source_dir() / "data" / "scripts" / "demo.txt"; }

// Removed with its contents on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "innerself-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

inline Config test_config(const std::filesystem::path& data_dir) {
  Config c = Config::from_json(nlohmann::json::object(), source_dir());
  c.data_dir = data_dir;
  return c;
}

// Engine over a FileStore with reference adapters.
struct Harness {
  explicit Harness(const std::filesystem::path& data_dir, std::unique_ptr<Clock> c = std::make_unique<TurnIndexClock>())
      : config(test_config(data_dir)),
        store(data_dir),
        clock(std::move(c)),
        engine(config, Resources::load(config), Adapters::reference(), store, *clock) {}

  Harness(const std::filesystem::path& data_dir, Adapters adapters)
      : config(test_config(data_dir)),
        store(data_dir),
        clock(std::make_unique<TurnIndexClock>()),
        engine(config, Resources::load(config), std::move(adapters), store, *clock) {}

  Config config;
  FileStore store;
  std::unique_ptr<Clock> clock;
  Engine engine;
};

inline AudioClip sine(double hz, double amplitude, std::size_t n, int rate = kCanonicalSampleRate) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = amplitude * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / rate);
  }
  return AudioClip(std::move(x), rate);
}

inline std::vector<EnrollmentSample> enrollment_fixtures() {
  std::vector<EnrollmentSample> out;
  for (const char* name : {"enroll_1.wav", "enroll_2.wav", "enroll_3.wav"}) {
    auto clip = read_wav(fixture(name));
    auto text = clip.annotation();
    out.push_back({std::move(clip), std::move(text), false});
  }
  return out;
}

}  // namespace innerself::testing
