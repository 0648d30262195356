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

#include "json.hpp"
#include "tigs/model.hpp"

namespace tigs {

inline constexpr char kCheckpointMagic[8] = {'T', 'I', 'G', 'S', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams params;
  nlohmann::json meta = nlohmann::json::object();  // role, vocab tokens, training config
};

/// Layout is described in docs/checkpoint_format.md. The file is written to a
/// sibling temporary and renamed into place.
void save_checkpoint(const std::string& path, const ModelParams& params,
                     const nlohmann::json& meta = nlohmann::json::object());

/// Throws std::runtime_error naming the path on bad magic, version mismatch,
/// truncation, trailing bytes, or arrays that disagree with the stored config.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace tigs
