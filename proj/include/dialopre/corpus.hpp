#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dialopre/lang.hpp"
#include "dialopre/vocab.hpp"

namespace dialopre {

// ------------------------------------------------------------- domain types

struct TimedUtterance {
    std::string text;  // whitespace-normalized, non-empty
    long long start_ms = 0;
    long long end_ms = 0;
    std::string movie_id;
    Lang lang = Lang::en;
    std::string speaker;  // parsed when present; unused by the model
};

struct Conversation {
    std::vector<TimedUtterance> utterances;  // inter-pausal gaps all < delta_t
    std::string movie_id;
};

struct TokUtt {
    std::vector<int> ids;  // 1..max_utt_tokens token ids
    Lang lang = Lang::en;

    bool operator==(const TokUtt&) const = default;
};

struct Context {
    std::vector<TokUtt> utterances;  // exactly T entries
    std::string movie_id;

    bool operator==(const Context&) const = default;
};

struct AlignmentLink {
    int src_index = 0;
    int tgt_index = 0;
    double confidence = 0.0;
};

struct TranslatedSlot {
    std::vector<int> ids;
    Lang lang = Lang::en;
    double confidence = 0.0;  // link metadata retained so filters stay checkable

    bool operator==(const TranslatedSlot&) const = default;
};

struct AlignedContextPair {
    Context base;                                        // language L
    std::vector<std::optional<TranslatedSlot>> translated;  // length T, language L'
    Lang src_lang = Lang::en;
    Lang tgt_lang = Lang::fr;

    int translated_count() const;
};

// --------------------------------------------------------------- operations

struct ParseResult {
    std::vector<TimedUtterance> utterances;  // non-decreasing start_ms
    int skipped = 0;                         // malformed records counted, not silently dropped
};

// One JSON object per line: {"start_ms": int, "end_ms": int, "text": str[, "speaker": str]}.
// Malformed lines (bad json, missing/ill-typed fields, end < start, empty text)
// are counted and skipped; the survivors are stably sorted by start_ms.
ParseResult parse_subtitle_stream(std::istream& stream, Lang lang, const std::string& movie_id);
ParseResult read_subtitle_file(const std::filesystem::path& path, Lang lang, const std::string& movie_id);

// Split exactly where start_ms[k+1] - end_ms[k] >= delta_t_ms; concatenation of
// the outputs equals the input. Unordered or mixed-movie input is a DataError.
std::vector<Conversation> segment_conversations(const std::vector<TimedUtterance>& utts,
                                                long long delta_t_ms = 6000);

// Non-overlapping windows (offsets 0, stride, ...) of exactly T utterances,
// each tokenized and truncated to max_utt_tokens. stride <= 0 means stride = T.
std::vector<Context> window_contexts(const Conversation& conv, const Vocabulary& vocab, int T = 5,
                                     int stride = 0, int max_utt_tokens = 50);

// Keeps links with confidence >= min_conf (duplicate src: highest confidence,
// then lowest tgt_index), fills translated slots of each T-window of conv_a
// where a surviving link points into conv_b, and discards windows with zero
// translated slots. Indices in links are conversation-local.
std::vector<AlignedContextPair> join_alignments(const Conversation& conv_a, const Conversation& conv_b,
                                                const std::vector<AlignmentLink>& links,
                                                const Vocabulary& vocab, double min_conf = 0.9, int T = 5,
                                                int stride = 0, int max_utt_tokens = 50);

// Rebases movie-level links (indices into the full time-ordered utterance
// streams of two languages) onto conversation-local indices by range
// containment. Returns one entry per conversation pair that received links.
struct ConversationPairLinks {
    int a_index = 0;
    int b_index = 0;
    std::vector<AlignmentLink> links;  // conversation-local indices
};
std::vector<ConversationPairLinks> rebase_links(const std::vector<Conversation>& convs_a,
                                                const std::vector<Conversation>& convs_b,
                                                const std::vector<AlignmentLink>& movie_links);

// ------------------------------------------------------------------- file io

// Alignment JSONL: {"src": int, "tgt": int, "conf": float} per line.
std::vector<AlignmentLink> read_alignment_file(const std::filesystem::path& path);

// ------------------------------------------------------------------ sharding

// Platform-independent FNV-1a, so shard membership never depends on the
// standard library's std::hash.
std::uint64_t fnv1a64(const std::string& s);

// Deterministic movie-level train/eval split: a movie is held out when its
// seeded hash falls below `fraction`. Evaluation instances must only be built
// from held-out movies.
bool is_holdout_movie(const std::string& movie_id, double fraction, std::uint64_t seed);

nlohmann::json conversation_to_json(const Conversation& conv, Lang lang);
Conversation conversation_from_json(const nlohmann::json& j, Lang* lang_out = nullptr);

nlohmann::json context_to_json(const Context& ctx);
Context context_from_json(const nlohmann::json& j);

nlohmann::json aligned_pair_to_json(const AlignedContextPair& pair);
AlignedContextPair aligned_pair_from_json(const nlohmann::json& j);

}  // namespace dialopre
