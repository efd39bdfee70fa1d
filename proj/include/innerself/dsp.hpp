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

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace innerself::dsp {

// Periodic Hann window: w[n] = 0.5 - 0.5 cos(2 pi n / N).
std::vector<double> hann_window(std::size_t length);

/// Magnitude-squared real FFT of a fixed size, backed by an FFTW plan.
///
/// Instances are not thread-safe (they own scratch buffers); create one per
/// thread. Plan construction is serialized internally.
class PowerSpectrum {
 public:
  explicit PowerSpectrum(std::size_t n_fft);
  ~PowerSpectrum();
  PowerSpectrum(PowerSpectrum&&) noexcept;
  PowerSpectrum& operator=(PowerSpectrum&&) noexcept;
  PowerSpectrum(const PowerSpectrum&) = delete;
  PowerSpectrum& operator=(const PowerSpectrum&) = delete;

  std::size_t n_fft() const noexcept;
  std::size_t bins() const noexcept { return n_fft() / 2 + 1; }

  // frame.size() must equal n_fft(); power.size() must equal bins().
  void compute(std::span<const double> frame, std::span<double> power);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace innerself::dsp
