#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "dialopre/lang.hpp"

namespace dialopre {

// Shared multilingual word-level vocabulary. Ids 0..4 are the specials, then
// one identifier token per language, then regular tokens ranked by
// (frequency desc, lexicographic asc). Immutable after construction.
class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kMask = 2;
    static constexpr int kBos = 3;
    static constexpr int kEos = 4;
    static constexpr int kNumSpecials = 5;

    // Lowercased whitespace tokenization; reserved surface forms ("<mask>",
    // "<en>", ...) never become regular tokens.
    static std::vector<std::string> tokenize(const std::string& text);

    // Pure function of (corpus multiset, max_size). max_size caps |V| including
    // specials and language ids; throws DataError if it cannot fit them.
    static Vocabulary build(const std::vector<std::string>& corpus, int max_size);

    // Persisted layout: {"specials": {...}, "lang_ids": {...}, "tokens": [by id]}.
    // from_json accepts arbitrary id placement (test fixtures pin specific ids).
    static Vocabulary from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    static Vocabulary load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    // Unknown and reserved surface forms map to UNK; never emits id >= size().
    std::vector<int> encode(const std::string& text) const;
    std::string decode(const std::vector<int>& ids) const;

    // Stable id of the language identifier token; DataError if unregistered.
    int language_token(Lang lang) const;

    int size() const { return static_cast<int>(id_to_token_.size()); }
    const std::string& token(int id) const;
    bool is_reserved(int id) const { return reserved_.count(id) > 0; }
    int pad() const { return pad_; }
    int unk() const { return unk_; }
    int mask() const { return mask_; }
    int bos() const { return bos_; }
    int eos() const { return eos_; }

private:
    Vocabulary() = default;
    void index_tokens();  // rebuild token_to_id_ and reserved_ from the tables

    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, int> token_to_id_;
    std::map<Lang, int> lang_ids_;
    std::set<int> reserved_;  // specials + language ids
    int pad_ = kPad, unk_ = kUnk, mask_ = kMask, bos_ = kBos, eos_ = kEos;
};

}  // namespace dialopre
