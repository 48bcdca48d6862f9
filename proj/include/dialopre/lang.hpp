#pragma once

#include <array>
#include <string>
#include <string_view>

#include "dialopre/errors.hpp"

namespace dialopre {

enum class Lang : int { de = 0, en = 1, es = 2, fr = 3, it = 4 };

inline constexpr int kNumLangs = 5;
inline constexpr std::array<std::string_view, kNumLangs> kLangNames = {"de", "en", "es", "fr", "it"};

inline std::string to_string(Lang l) {
    return std::string(kLangNames[static_cast<int>(l)]);
}

inline Lang lang_from_string(std::string_view s) {
    for (int i = 0; i < kNumLangs; ++i) {
        if (kLangNames[i] == s) return static_cast<Lang>(i);
    }
    throw DataError("unknown language tag: " + std::string(s));
}

inline bool is_lang_tag(std::string_view s) {
    for (int i = 0; i < kNumLangs; ++i) {
        if (kLangNames[i] == s) return true;
    }
    return false;
}

}  // namespace dialopre
