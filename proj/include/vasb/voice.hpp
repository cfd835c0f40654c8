// Copyright 2026 The vasb Authors. All Rights Reserved.
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

#include <array>
#include <string>
#include <string_view>

#include "vasb/errors.hpp"

namespace vasb {

enum class VoiceType { SpeechLike, SingingLike };

inline constexpr std::array<VoiceType, 2> kVoiceTypes = {VoiceType::SpeechLike,
                                                         VoiceType::SingingLike};

inline std::string_view to_string(VoiceType v) noexcept {
  return v == VoiceType::SpeechLike ? "speech" : "singing";
}

inline VoiceType parse_voice_type(std::string_view s) {
  if (s == "speech" || s == "SpeechLike") return VoiceType::SpeechLike;
  if (s == "singing" || s == "SingingLike") return VoiceType::SingingLike;
  throw ConfigError("unknown voice type '" + std::string(s) + "'");
}

/// What the bottleneck needs to know about one frame.
struct FrameClass {
  VoiceType voice = VoiceType::SpeechLike;
  bool voiced = true;

  friend bool operator==(const FrameClass&, const FrameClass&) = default;
};

}  // namespace vasb
