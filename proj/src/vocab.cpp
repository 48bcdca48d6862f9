#include "dialopre/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "dialopre/errors.hpp"

namespace dialopre {

namespace {

const std::array<std::string, Vocabulary::kNumSpecials> kSpecialSurfaces = {"<pad>", "<unk>", "<mask>", "<bos>",
                                                                            "<eos>"};

std::string lang_surface(Lang l) { return "<" + to_string(l) + ">"; }

bool is_reserved_surface(const std::string& w) {
    for (const auto& s : kSpecialSurfaces)
        if (w == s) return true;
    for (int i = 0; i < kNumLangs; ++i)
        if (w == lang_surface(static_cast<Lang>(i))) return true;
    return false;
}

}  // namespace

std::vector<std::string> Vocabulary::tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
        } else {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

void Vocabulary::index_tokens() {
    token_to_id_.clear();
    for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
        if (!token_to_id_.emplace(id_to_token_[i], static_cast<int>(i)).second)
            throw DataError("vocabulary: duplicate surface form '" + id_to_token_[i] + "'");
    }
    reserved_ = {pad_, unk_, mask_, bos_, eos_};
    for (const auto& [lang, id] : lang_ids_) {
        (void)lang;
        reserved_.insert(id);
    }
    if (reserved_.size() != static_cast<std::size_t>(kNumSpecials) + lang_ids_.size())
        throw DataError("vocabulary: special and language ids must be distinct");
}

Vocabulary Vocabulary::build(const std::vector<std::string>& corpus, int max_size) {
    const int floor_size = kNumSpecials + kNumLangs;
    if (max_size <= floor_size)
        throw DataError("vocabulary max_size must exceed " + std::to_string(floor_size));

    std::map<std::string, long long> freq;  // ordered: lexicographic tie-break for free
    for (const auto& line : corpus) {
        for (auto& w : tokenize(line)) {
            if (is_reserved_surface(w)) continue;
            ++freq[w];
        }
    }
    std::vector<std::pair<std::string, long long>> ranked(freq.begin(), freq.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });

    Vocabulary v;
    for (const auto& s : kSpecialSurfaces) v.id_to_token_.push_back(s);
    for (int i = 0; i < kNumLangs; ++i) {
        v.lang_ids_[static_cast<Lang>(i)] = v.size();
        v.id_to_token_.push_back(lang_surface(static_cast<Lang>(i)));
    }
    for (const auto& [tok, n] : ranked) {
        (void)n;
        if (v.size() >= max_size) break;
        v.id_to_token_.push_back(tok);
    }
    v.index_tokens();
    return v;
}

nlohmann::json Vocabulary::to_json() const {
    nlohmann::json specials;
    specials["<pad>"] = pad_;
    specials["<unk>"] = unk_;
    specials["<mask>"] = mask_;
    specials["<bos>"] = bos_;
    specials["<eos>"] = eos_;
    nlohmann::json langs;
    for (const auto& [lang, id] : lang_ids_) langs[to_string(lang)] = id;
    return nlohmann::json{{"specials", specials}, {"lang_ids", langs}, {"tokens", id_to_token_}};
}

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
    Vocabulary v;
    if (!j.contains("specials") || !j.contains("lang_ids") || !j.contains("tokens"))
        throw DataError("vocabulary json needs specials, lang_ids and tokens");
    v.id_to_token_ = j.at("tokens").get<std::vector<std::string>>();
    const auto need = [&](const char* name) {
        const auto& s = j.at("specials");
        if (!s.contains(name)) throw DataError(std::string("vocabulary json: missing special ") + name);
        int id = s.at(name).get<int>();
        if (id < 0 || id >= v.size()) throw DataError(std::string("vocabulary json: special id out of range: ") + name);
        return id;
    };
    v.pad_ = need("<pad>");
    v.unk_ = need("<unk>");
    v.mask_ = need("<mask>");
    v.bos_ = need("<bos>");
    v.eos_ = need("<eos>");
    for (const auto& [name, idj] : j.at("lang_ids").items()) {
        int id = idj.get<int>();
        if (id < 0 || id >= v.size()) throw DataError("vocabulary json: language id out of range: " + name);
        v.lang_ids_[lang_from_string(name)] = id;
    }
    v.index_tokens();
    return v;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open vocabulary file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed vocabulary json in " + path.string() + ": " + e.what());
    }
    return from_json(j);
}

void Vocabulary::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write vocabulary file: " + path.string());
    out << to_json().dump(2) << "\n";
}

std::vector<int> Vocabulary::encode(const std::string& text) const {
    std::vector<int> out;
    for (const auto& w : tokenize(text)) {
        auto it = token_to_id_.find(w);
        if (it == token_to_id_.end() || reserved_.count(it->second)) {
            out.push_back(unk_);  // reserved surfaces cannot be smuggled in via text
        } else {
            out.push_back(it->second);
        }
    }
    return out;
}

std::string Vocabulary::decode(const std::vector<int>& ids) const {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out.push_back(' ');
        out += token(ids[i]);
    }
    return out;
}

int Vocabulary::language_token(Lang lang) const {
    auto it = lang_ids_.find(lang);
    if (it == lang_ids_.end()) throw DataError("language not registered in vocabulary: " + to_string(lang));
    return it->second;
}

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || id >= size()) throw DataError("token id out of range: " + std::to_string(id));
    return id_to_token_[static_cast<std::size_t>(id)];
}

}  // namespace dialopre
