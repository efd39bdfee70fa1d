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

#include <json.hpp>

namespace innerself {

/// Vocal delivery adjustments. Each field lives in a closed interval.
struct ProsodyParams {
  static constexpr double kMinPitch = -4.0, kMaxPitch = 4.0;  // semitones
  static constexpr double kMinGain = -6.0, kMaxGain = 6.0;    // dB
  static constexpr double kMinRate = 0.8, kMaxRate = 1.2;     // speed multiplier

  double pitch_shift = 0.0;
  double volume_gain = 0.0;
  double rate = 1.0;

  bool valid() const noexcept;
  ProsodyParams clamped() const noexcept;
  bool is_identity() const noexcept { return pitch_shift == 0.0 && volume_gain == 0.0 && rate == 1.0; }

  friend bool operator==(const ProsodyParams&, const ProsodyParams&) = default;
};

void to_json(nlohmann::json& j, const ProsodyParams& p);
void from_json(const nlohmann::json& j, ProsodyParams& p);

}  // namespace innerself
