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
#include <string>
#include <string_view>

namespace innerself::utf8 {

// Strict validation: rejects overlongs, surrogates and values past U+10FFFF.
bool is_valid(std::string_view text);

// Throws Error(kInvalidUtf8) when the text is not well-formed.
void require_valid(std::string_view text);

// Number of Unicode scalar values. Input must be valid.
std::size_t scalar_count(std::string_view text);

// Byte offset of the n-th scalar value (n may equal scalar_count()).
std::size_t byte_offset_of_scalar(std::string_view text, std::size_t n);

// Largest byte offset <= limit that does not split a scalar value.
std::size_t floor_boundary(std::string_view text, std::size_t limit);

std::string ascii_lower(std::string_view text);

// Encodes a single scalar value.
std::string encode(char32_t cp);

}  // namespace innerself::utf8
