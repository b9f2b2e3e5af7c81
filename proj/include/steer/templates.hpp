/*
 * Copyright 2026 The steer Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Prompt templates with `{name}` placeholders. Only identifiers are treated
// as placeholders, so literal JSON such as {"score": <int>} passes through.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "steer/error.hpp"

namespace steer {

// Fixed-point formatting; "-0.000" is normalized to "0.000".
inline std::string format_fixed(double value, int decimals = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  std::string s(buf);
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos)
    s.erase(0, 1);
  return s;
}

class PromptTemplate {
 public:
  PromptTemplate() = default;
  explicit PromptTemplate(std::string text, std::string name = "template")
      : text_(std::move(text)), name_(std::move(name)) {}

  static PromptTemplate from_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw TemplateError("cannot read template file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return PromptTemplate(ss.str(), path.filename().string());
  }

  const std::string& text() const noexcept { return text_; }
  const std::string& name() const noexcept { return name_; }

  std::vector<std::string> placeholders() const {
    std::vector<std::string> out;
    scan([&](std::size_t, std::size_t, std::string_view id) {
      if (std::find(out.begin(), out.end(), id) == out.end()) out.emplace_back(id);
    });
    return out;
  }

  bool has(std::string_view id) const {
    bool found = false;
    scan([&](std::size_t, std::size_t, std::string_view p) { found = found || p == id; });
    return found;
  }

  void require(std::initializer_list<std::string_view> ids) const {
    for (auto id : ids)
      if (!has(id))
        throw TemplateError(name_ + ": missing placeholder {" + std::string(id) + "}");
  }

  std::string render(const std::map<std::string, std::string, std::less<>>& values) const {
    std::string out;
    out.reserve(text_.size());
    std::size_t cursor = 0;
    scan([&](std::size_t begin, std::size_t end, std::string_view id) {
      auto it = values.find(id);
      if (it == values.end())
        throw TemplateError(name_ + ": no value for placeholder {" + std::string(id) + "}");
      out.append(text_, cursor, begin - cursor);
      out += it->second;
      cursor = end;
    });
    out.append(text_, cursor, std::string::npos);
    return out;
  }

 private:
  static bool ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
  }
  static bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
  }

  // Calls fn(begin, end, identifier) for every {identifier} occurrence.
  template <typename Fn>
  void scan(Fn&& fn) const {
    for (std::size_t i = 0; i < text_.size(); ++i) {
      if (text_[i] != '{' || i + 1 >= text_.size() || !ident_start(text_[i + 1])) continue;
      std::size_t j = i + 1;
      while (j < text_.size() && ident_char(text_[j])) ++j;
      if (j < text_.size() && text_[j] == '}') {
        fn(i, j + 1, std::string_view(text_).substr(i + 1, j - i - 1));
        i = j;
      }
    }
  }

  std::string text_;
  std::string name_ = "template";
};

// Built-in defaults. The same text ships under templates/ for editing.
namespace default_templates {

inline constexpr std::string_view kRaterEsi =
    R"(- {persona_block}

Decide the Emergency Severity Index (ESI) level for the patient below: 1 is the most urgent, 5 the least. Decide as the clinician described above would. Their habits and priorities should show in the level you pick, but every statement you make must agree with the case record.

Patient case:
{patient_case}

ESI level definitions:
{scale_definitions}

Work out your answer before replying.
Reply with JSON only, in exactly this shape:
{"reasoning": "...", "esi_level": <int>}
)";

inline constexpr std::string_view kRaterCareLevel =
    R"(- {persona_block}

Decide the care level for the patient below: 1 means urgent or emergency care, 5 means self-care. Decide as the clinician described above would. Their habits and priorities should show in the level you pick, but every statement you make must agree with the case record.

Patient case:
{patient_case}

Care level definitions:
{scale_definitions}

Work out your answer before replying.
Reply with JSON only, in exactly this shape:
{"reasoning": "...", "care_level": <int>}
)";

inline constexpr std::string_view kGapFill =
    R"(Write a system-prompt persona for a {role} in a {setting}. Measured over many cases, its ratings should sit about {target_bias} scale units away from the panel's typical rating.

Sign convention:
- Below zero: {negative_meaning}
- Above zero: {positive_meaning}

Two existing personas bracket the target, at offsets {start_bias} and {end_bias}:

{reference_personas}

Describe how this clinician approaches uncertain presentations, so that the requested offset follows from the persona's own way of reasoning.

Address the persona as "you". Keep it to between three and five sentences. Return the persona text and nothing else.
)";

inline constexpr std::string_view kEdgeExpand =
    R"(Write a system-prompt persona for a {role} in a {setting}. The persona should sit past the current edge of the population: its offset should be about {target_bias} scale units, further in the {direction} direction than the current extreme ({extreme_bias}). It must remain a clinician a hospital would plausibly employ.

The current extreme:

{reference_personas}

{direction_guidance}

Address the persona as "you". Keep it to between three and five sentences. Return the persona text and nothing else.
)";

inline constexpr std::string_view kConservativeGuidance =
    "Let the persona's caution grow out of its own history and working environment. It should "
    "escalate whenever a dangerous cause has not yet been ruled out.";

inline constexpr std::string_view kLenientGuidance =
    "Let the persona's restraint grow out of its own history and working environment. It should "
    "keep escalation for danger that is clear and present.";

inline constexpr std::string_view kJudgeSoundness =
    R"(Rate one piece of triage reasoning.

Case:
{patient_case}

Reasoning to rate:
{rationale}

Question: is the argument from the case findings to the chosen level medically valid and complete?
Answer with an integer from 0 (unacceptable) through 1 (poor), 2 (adequate) and 3 (good) to 4 (excellent).

Reply with JSON only: {"score": <int>}
)";

inline constexpr std::string_view kJudgeGrounding =
    R"(Rate one piece of triage reasoning.

Case:
{patient_case}

Reasoning to rate:
{rationale}

Question: is every claim in the reasoning supported by the case text, with nothing invented?
Answer with an integer from 0 (unacceptable) through 1 (poor), 2 (adequate) and 3 (good) to 4 (excellent).

Reply with JSON only: {"score": <int>}
)";

inline constexpr std::string_view kScaleDefinitionsPlaceholder =
    "[Level definitions are supplied by the deployment.]";

}  // namespace default_templates

}  // namespace steer
