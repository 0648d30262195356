// Copyright 2026 The tigs-lab Authors
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

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace tigs {

inline constexpr std::string_view kVersion = "0.1.0";

/// 64-bit FNV-1a, used for config hashes and per-instance seed derivation.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

/// Mixes values into a seed; stable across platforms.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::uint64_t index);

/// "#tigs-lab <version> kind=<kind> seed=<seed> config=<hash hex>"
std::string make_header(std::string_view kind, std::uint64_t seed, std::uint64_t config_hash);
bool is_header_line(std::string_view line);

/// Reads all lines, dropping a trailing '\r' and a leading header line.
std::vector<std::string> read_lines(const std::string& path, bool skip_header = true);

std::vector<std::string> split(std::string_view s, char sep);
std::vector<std::string> split_ws(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace tigs
