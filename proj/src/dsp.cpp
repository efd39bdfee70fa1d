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

#include "innerself/dsp.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <numbers>

#include "innerself/error.hpp"

namespace innerself::dsp {
namespace {

// The FFTW planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

std::vector<double> hann_window(std::size_t length) {
  std::vector<double> w(length);
  for (std::size_t n = 0; n < length; ++n) {
    w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                                static_cast<double>(length));
  }
  return w;
}

struct PowerSpectrum::Impl {
  std::size_t n = 0;
  double* in = nullptr;
  fftw_complex* out = nullptr;
  fftw_plan plan = nullptr;

  explicit Impl(std::size_t n_fft) : n(n_fft) {
    std::lock_guard lock(planner_mutex());
    in = fftw_alloc_real(n);
    out = fftw_alloc_complex(n / 2 + 1);
    // FFTW_ESTIMATE keeps the chosen algorithm, and therefore the rounding,
    // identical from run to run.
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
  }
  ~Impl() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
    fftw_free(in);
    fftw_free(out);
  }
};

PowerSpectrum::PowerSpectrum(std::size_t n_fft) {
  if (n_fft < 2) throw Error(ErrorCode::kInvalidArgument, "n_fft must be >= 2");
  impl_ = std::make_unique<Impl>(n_fft);
}

PowerSpectrum::~PowerSpectrum() = default;
PowerSpectrum::PowerSpectrum(PowerSpectrum&&) noexcept = default;
PowerSpectrum& PowerSpectrum::operator=(PowerSpectrum&&) noexcept = default;

std::size_t PowerSpectrum::n_fft() const noexcept { return impl_->n; }

void PowerSpectrum::compute(std::span<const double> frame, std::span<double> power) {
  if (frame.size() != impl_->n || power.size() != bins()) {
    throw Error(ErrorCode::kDimensionMismatch, "PowerSpectrum buffer size mismatch");
  }
  std::copy(frame.begin(), frame.end(), impl_->in);
  fftw_execute(impl_->plan);
  for (std::size_t k = 0; k < power.size(); ++k) {
    const double re = impl_->out[k][0];
    const double im = impl_->out[k][1];
    power[k] = re * re + im * im;
  }
}

}  // namespace innerself::dsp
