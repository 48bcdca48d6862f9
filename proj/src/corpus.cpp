#include "dialopre/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <map>

#include "dialopre/errors.hpp"

namespace dialopre {

namespace {

std::string normalize_ws(const std::string& s) {
    std::string out;
    bool in_gap = true;  // eat leading whitespace
    for (char ch : s) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            in_gap = true;
        } else {
            if (in_gap && !out.empty()) out.push_back(' ');
            in_gap = false;
            out.push_back(ch);
        }
    }
    return out;
}

bool json_int(const nlohmann::json& j, const char* key, long long* out) {
    if (!j.contains(key)) return false;
    const auto& v = j.at(key);
    if (!v.is_number_integer() && !v.is_number_unsigned()) return false;
    *out = v.get<long long>();
    return true;
}

}  // namespace

int AlignedContextPair::translated_count() const {
    int n = 0;
    for (const auto& t : translated) n += t.has_value() ? 1 : 0;
    return n;
}

// ---------------------------------------------------------------- parsing

ParseResult parse_subtitle_stream(std::istream& stream, Lang lang, const std::string& movie_id) {
    ParseResult res;
    std::string line;
    while (std::getline(stream, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;  // blank, not malformed
        nlohmann::json j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
        long long start = 0, end = 0;
        if (j.is_discarded() || !j.is_object() || !json_int(j, "start_ms", &start) ||
            !json_int(j, "end_ms", &end) || !j.contains("text") || !j.at("text").is_string()) {
            ++res.skipped;
            continue;
        }
        TimedUtterance u;
        u.text = normalize_ws(j.at("text").get<std::string>());
        if (end < start || u.text.empty()) {
            ++res.skipped;
            continue;
        }
        u.start_ms = start;
        u.end_ms = end;
        u.movie_id = movie_id;
        u.lang = lang;
        if (j.contains("speaker") && j.at("speaker").is_string()) u.speaker = j.at("speaker").get<std::string>();
        res.utterances.push_back(std::move(u));
    }
    if (stream.bad()) throw DataError("i/o failure while reading subtitle stream for " + movie_id);
    std::stable_sort(res.utterances.begin(), res.utterances.end(),
                     [](const TimedUtterance& a, const TimedUtterance& b) { return a.start_ms < b.start_ms; });
    return res;
}

ParseResult read_subtitle_file(const std::filesystem::path& path, Lang lang, const std::string& movie_id) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open subtitle file: " + path.string());
    return parse_subtitle_stream(in, lang, movie_id);
}

// ------------------------------------------------------------ segmentation

std::vector<Conversation> segment_conversations(const std::vector<TimedUtterance>& utts, long long delta_t_ms) {
    std::vector<Conversation> out;
    if (utts.empty()) return out;
    const std::string& movie = utts.front().movie_id;
    Conversation cur;
    cur.movie_id = movie;
    for (std::size_t i = 0; i < utts.size(); ++i) {
        if (utts[i].movie_id != movie) throw DataError("segment_conversations: mixed movie ids");
        if (i > 0) {
            if (utts[i].start_ms < utts[i - 1].start_ms)
                throw DataError("segment_conversations: utterances not time-ordered");
            const long long gap = utts[i].start_ms - utts[i - 1].end_ms;
            if (gap >= delta_t_ms) {  // same conversation iff silence is *shorter* than delta_t
                out.push_back(std::move(cur));
                cur = Conversation{};
                cur.movie_id = movie;
            }
        }
        cur.utterances.push_back(utts[i]);
    }
    out.push_back(std::move(cur));
    return out;
}

// --------------------------------------------------------------- windowing

namespace {

TokUtt tokenize_trimmed(const TimedUtterance& u, const Vocabulary& vocab, int max_utt_tokens) {
    TokUtt t;
    t.ids = vocab.encode(u.text);
    if (static_cast<int>(t.ids.size()) > max_utt_tokens) t.ids.resize(static_cast<std::size_t>(max_utt_tokens));
    t.lang = u.lang;
    return t;
}

}  // namespace

std::vector<Context> window_contexts(const Conversation& conv, const Vocabulary& vocab, int T, int stride,
                                     int max_utt_tokens) {
    if (T < 1 || max_utt_tokens < 1) throw DataError("window_contexts: T and max_utt_tokens must be positive");
    if (stride <= 0) stride = T;
    std::vector<Context> out;
    const int n = static_cast<int>(conv.utterances.size());
    for (int off = 0; off + T <= n; off += stride) {
        Context c;
        c.movie_id = conv.movie_id;
        for (int k = 0; k < T; ++k)
            c.utterances.push_back(tokenize_trimmed(conv.utterances[static_cast<std::size_t>(off + k)], vocab,
                                                    max_utt_tokens));
        out.push_back(std::move(c));
    }
    return out;
}

// --------------------------------------------------------------- alignment

std::vector<AlignedContextPair> join_alignments(const Conversation& conv_a, const Conversation& conv_b,
                                                const std::vector<AlignmentLink>& links, const Vocabulary& vocab,
                                                double min_conf, int T, int stride, int max_utt_tokens) {
    if (stride <= 0) stride = T;
    const int na = static_cast<int>(conv_a.utterances.size());
    const int nb = static_cast<int>(conv_b.utterances.size());
    if (na == 0 || nb == 0) throw DataError("join_alignments: empty conversation");
    const Lang lang_a = conv_a.utterances.front().lang;
    const Lang lang_b = conv_b.utterances.front().lang;
    if (lang_a == lang_b) throw DataError("join_alignments: conversations share a language");

    // survivors: confidence >= min_conf; per src keep highest conf, then lowest tgt
    std::map<int, AlignmentLink> by_src;
    for (const auto& l : links) {
        if (l.confidence < min_conf) continue;
        if (l.src_index < 0 || l.src_index >= na || l.tgt_index < 0 || l.tgt_index >= nb)
            throw DataError("join_alignments: link index out of range");
        auto it = by_src.find(l.src_index);
        if (it == by_src.end() || l.confidence > it->second.confidence ||
            (l.confidence == it->second.confidence && l.tgt_index < it->second.tgt_index)) {
            by_src[l.src_index] = l;
        }
    }

    std::vector<AlignedContextPair> out;
    for (int off = 0; off + T <= na; off += stride) {
        AlignedContextPair pair;
        pair.src_lang = lang_a;
        pair.tgt_lang = lang_b;
        pair.base.movie_id = conv_a.movie_id;
        pair.translated.assign(static_cast<std::size_t>(T), std::nullopt);
        int filled = 0;
        for (int k = 0; k < T; ++k) {
            pair.base.utterances.push_back(
                tokenize_trimmed(conv_a.utterances[static_cast<std::size_t>(off + k)], vocab, max_utt_tokens));
            auto it = by_src.find(off + k);
            if (it != by_src.end()) {
                TokUtt tr = tokenize_trimmed(conv_b.utterances[static_cast<std::size_t>(it->second.tgt_index)],
                                             vocab, max_utt_tokens);
                pair.translated[static_cast<std::size_t>(k)] =
                    TranslatedSlot{std::move(tr.ids), lang_b, it->second.confidence};
                ++filled;
            }
        }
        if (filled > 0) out.push_back(std::move(pair));  // zero translated slots: window discarded
    }
    return out;
}

std::vector<ConversationPairLinks> rebase_links(const std::vector<Conversation>& convs_a,
                                                const std::vector<Conversation>& convs_b,
                                                const std::vector<AlignmentLink>& movie_links) {
    // conversation start offsets in the concatenated per-language streams
    std::vector<int> off_a{0}, off_b{0};
    for (const auto& c : convs_a) off_a.push_back(off_a.back() + static_cast<int>(c.utterances.size()));
    for (const auto& c : convs_b) off_b.push_back(off_b.back() + static_cast<int>(c.utterances.size()));

    const auto locate = [](const std::vector<int>& offs, int idx) -> int {
        auto it = std::upper_bound(offs.begin(), offs.end(), idx);
        return static_cast<int>(it - offs.begin()) - 1;
    };

    std::map<std::pair<int, int>, std::vector<AlignmentLink>> buckets;
    for (const auto& l : movie_links) {
        if (l.src_index < 0 || l.src_index >= off_a.back() || l.tgt_index < 0 || l.tgt_index >= off_b.back())
            throw DataError("rebase_links: link index outside the utterance streams");
        const int ia = locate(off_a, l.src_index);
        const int ib = locate(off_b, l.tgt_index);
        buckets[{ia, ib}].push_back(
            AlignmentLink{l.src_index - off_a[static_cast<std::size_t>(ia)],
                          l.tgt_index - off_b[static_cast<std::size_t>(ib)], l.confidence});
    }
    std::vector<ConversationPairLinks> out;
    for (auto& [key, ls] : buckets) out.push_back(ConversationPairLinks{key.first, key.second, std::move(ls)});
    return out;
}

// ----------------------------------------------------------------- file io

std::vector<AlignmentLink> read_alignment_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open alignment file: " + path.string());
    std::vector<AlignmentLink> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("src") || !j.contains("tgt") ||
            !j.contains("conf") || !j.at("src").is_number_integer() || !j.at("tgt").is_number_integer() ||
            !j.at("conf").is_number()) {
            throw DataError("malformed alignment record at " + path.string() + ":" + std::to_string(lineno));
        }
        AlignmentLink l;
        l.src_index = j.at("src").get<int>();
        l.tgt_index = j.at("tgt").get<int>();
        l.confidence = j.at("conf").get<double>();
        if (l.confidence < 0.0 || l.confidence > 1.0)
            throw DataError("alignment confidence out of [0,1] at " + path.string() + ":" + std::to_string(lineno));
        out.push_back(l);
    }
    return out;
}

nlohmann::json conversation_to_json(const Conversation& conv, Lang lang) {
    nlohmann::json us = nlohmann::json::array();
    for (const auto& u : conv.utterances) {
        nlohmann::json ju{{"text", u.text}, {"start_ms", u.start_ms}, {"end_ms", u.end_ms}};
        if (!u.speaker.empty()) ju["speaker"] = u.speaker;
        us.push_back(std::move(ju));
    }
    return nlohmann::json{{"movie_id", conv.movie_id}, {"lang", to_string(lang)}, {"utterances", us}};
}

Conversation conversation_from_json(const nlohmann::json& j, Lang* lang_out) {
    Conversation c;
    c.movie_id = j.at("movie_id").get<std::string>();
    const Lang lang = lang_from_string(j.at("lang").get<std::string>());
    if (lang_out) *lang_out = lang;
    for (const auto& ju : j.at("utterances")) {
        TimedUtterance u;
        u.text = ju.at("text").get<std::string>();
        u.start_ms = ju.at("start_ms").get<long long>();
        u.end_ms = ju.at("end_ms").get<long long>();
        u.movie_id = c.movie_id;
        u.lang = lang;
        if (ju.contains("speaker")) u.speaker = ju.at("speaker").get<std::string>();
        c.utterances.push_back(std::move(u));
    }
    return c;
}

nlohmann::json context_to_json(const Context& ctx) {
    nlohmann::json utts = nlohmann::json::array();
    nlohmann::json langs = nlohmann::json::array();
    for (const auto& u : ctx.utterances) {
        utts.push_back(u.ids);
        langs.push_back(to_string(u.lang));
    }
    return nlohmann::json{{"movie_id", ctx.movie_id}, {"langs", langs}, {"utterances", utts}};
}

Context context_from_json(const nlohmann::json& j) {
    Context c;
    c.movie_id = j.at("movie_id").get<std::string>();
    const auto& utts = j.at("utterances");
    const auto& langs = j.at("langs");
    if (utts.size() != langs.size()) throw DataError("context json: langs/utterances length mismatch");
    for (std::size_t i = 0; i < utts.size(); ++i) {
        TokUtt t;
        t.ids = utts[i].get<std::vector<int>>();
        t.lang = lang_from_string(langs[i].get<std::string>());
        c.utterances.push_back(std::move(t));
    }
    return c;
}

nlohmann::json aligned_pair_to_json(const AlignedContextPair& pair) {
    nlohmann::json j = context_to_json(pair.base);
    j["lang_pair"] = {to_string(pair.src_lang), to_string(pair.tgt_lang)};
    nlohmann::json tr = nlohmann::json::array();
    for (const auto& slot : pair.translated) {
        if (!slot) {
            tr.push_back(nullptr);
        } else {
            tr.push_back(nlohmann::json{{"ids", slot->ids}, {"lang", to_string(slot->lang)},
                                        {"conf", slot->confidence}});
        }
    }
    j["translated"] = std::move(tr);
    return j;
}

AlignedContextPair aligned_pair_from_json(const nlohmann::json& j) {
    AlignedContextPair p;
    p.base = context_from_json(j);
    p.src_lang = lang_from_string(j.at("lang_pair").at(0).get<std::string>());
    p.tgt_lang = lang_from_string(j.at("lang_pair").at(1).get<std::string>());
    for (const auto& slot : j.at("translated")) {
        if (slot.is_null()) {
            p.translated.emplace_back(std::nullopt);
        } else {
            p.translated.emplace_back(TranslatedSlot{slot.at("ids").get<std::vector<int>>(),
                                                     lang_from_string(slot.at("lang").get<std::string>()),
                                                     slot.at("conf").get<double>()});
        }
    }
    if (p.translated.size() != p.base.utterances.size())
        throw DataError("aligned pair json: translated length mismatch");
    return p;
}

// ------------------------------------------------------------------ sharding

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

bool is_holdout_movie(const std::string& movie_id, double fraction, std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw DataError("is_holdout_movie: fraction must lie in [0, 1]");
    const std::uint64_t h = fnv1a64(movie_id + ":" + std::to_string(seed));
    return static_cast<double>(h % 1000000ull) / 1000000.0 < fraction;
}

}  // namespace dialopre
