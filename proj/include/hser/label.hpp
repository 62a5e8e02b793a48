#pragma once

#include <array>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>

#include "hser/error.hpp"

namespace hser {

// Declaration order is the canonical class order used everywhere (tie-breaks,
// confusion matrices, probability vectors).
enum class EmotionLabel { angry = 0, calm = 1, panic = 2 };

inline constexpr std::size_t kNumClasses = 3;
inline constexpr std::array<EmotionLabel, kNumClasses> kAllLabels{
    EmotionLabel::angry, EmotionLabel::calm, EmotionLabel::panic};

constexpr std::size_t index_of(EmotionLabel label) { return static_cast<std::size_t>(label); }

constexpr std::string_view to_string(EmotionLabel label) {
    switch (label) {
        case EmotionLabel::angry: return "angry";
        case EmotionLabel::calm: return "calm";
        case EmotionLabel::panic: return "panic";
    }
    return "calm";
}

inline std::optional<EmotionLabel> try_parse_label(std::string_view text) {
    std::string lower;
    lower.reserve(text.size());
    for (char c : text) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    for (auto label : kAllLabels)
        if (lower == to_string(label)) return label;
    return std::nullopt;
}

inline EmotionLabel parse_label_or_throw(std::string_view text, const std::string& where) {
    if (auto label = try_parse_label(text)) return *label;
    throw Error(ErrorKind::SchemaError, where + ": unknown emotion label '" + std::string(text) + "'");
}

}  // namespace hser
