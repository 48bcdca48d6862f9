#include "dialopre/toy_corpus.hpp"

#include <map>

#include "dialopre/rng.hpp"
#include "json.hpp"

namespace dialopre::toy {

namespace {

constexpr int kTopics = 8;
constexpr int kContentWords = 20;
constexpr int kContentSlice = 8;  // content words reachable per topic

std::string topic_word(int t) { return "topic" + std::to_string(t); }
std::string content_word(int c) { return "c" + std::to_string(c); }

std::string translate(const std::string& en_text) {
    // Deterministic token bijection w -> "f" + w.
    std::string out;
    std::string word;
    auto flush = [&] {
        if (word.empty()) return;
        if (!out.empty()) out += ' ';
        out += "f" + word;
        word.clear();
    };
    for (char ch : en_text) {
        if (ch == ' ')
            flush();
        else
            word += ch;
    }
    flush();
    return out;
}

}  // namespace

std::vector<ToyMovie> generate_toy_corpus(const ToyCorpusConfig& config) {
    if (config.movies < 1 || config.conversations_per_movie < 1 || config.utterances_per_conversation < 1)
        throw DataError("toy corpus: counts must be positive");
    if (config.min_tokens < 2 || config.max_tokens < config.min_tokens)
        throw DataError("toy corpus: need 2 <= min_tokens <= max_tokens");
    if (!(config.translation_rate >= 0.0 && config.translation_rate <= 1.0) ||
        !(config.low_conf_rate >= 0.0 && config.low_conf_rate <= 1.0))
        throw DataError("toy corpus: rates must lie in [0, 1]");

    std::vector<ToyMovie> movies;
    for (int m = 0; m < config.movies; ++m) {
        ToyMovie movie;
        movie.movie_id = "movie" + std::string(m < 10 ? "0" : "") + std::to_string(m);
        Rng rng(substream_seed(config.seed, "toy_movie", m));

        long long base_ms = 0;
        int stream_index = 0;
        for (int conv = 0; conv < config.conversations_per_movie; ++conv) {
            const int topic = rng.uniform_int(0, kTopics - 1);
            for (int u = 0; u < config.utterances_per_conversation; ++u) {
                const int len = rng.uniform_int(config.min_tokens, config.max_tokens);
                std::string text = topic_word(topic);
                for (int k = 1; k < len; ++k) {
                    const int c = (topic * 2 + rng.uniform_int(0, kContentSlice - 1)) % kContentWords;
                    text += ' ' + content_word(c);
                }
                TimedUtterance en;
                en.text = text;
                en.start_ms = base_ms + static_cast<long long>(u) * 2000;
                en.end_ms = en.start_ms + 1500;
                en.movie_id = movie.movie_id;
                en.lang = Lang::en;
                en.speaker = (u % 2 == 0) ? "A" : "B";

                TimedUtterance fr = en;
                fr.text = translate(text);
                fr.lang = Lang::fr;

                movie.en.push_back(en);
                movie.fr.push_back(fr);

                if (rng.bernoulli(config.translation_rate)) {
                    const double conf =
                        rng.bernoulli(config.low_conf_rate) ? 0.5 : config.link_confidence;
                    movie.links.push_back({stream_index, stream_index, conf});
                }
                ++stream_index;
            }
            // Jump past the split threshold so segmentation recovers the
            // conversation boundaries exactly.
            base_ms += static_cast<long long>(config.utterances_per_conversation) * 2000 + 6500;
        }
        movies.push_back(std::move(movie));
    }
    return movies;
}

std::vector<std::string> subtitle_jsonl_lines(const std::vector<TimedUtterance>& utts) {
    std::vector<std::string> lines;
    lines.reserve(utts.size());
    for (const auto& u : utts) {
        nlohmann::json j{{"start_ms", u.start_ms}, {"end_ms", u.end_ms}, {"text", u.text}};
        if (!u.speaker.empty()) j["speaker"] = u.speaker;
        lines.push_back(j.dump());
    }
    return lines;
}

std::vector<std::string> alignment_jsonl_lines(const std::vector<AlignmentLink>& links) {
    std::vector<std::string> lines;
    lines.reserve(links.size());
    for (const auto& l : links)
        lines.push_back(nlohmann::json{{"src", l.src_index}, {"tgt", l.tgt_index}, {"conf", l.confidence}}.dump());
    return lines;
}

ToyDataset build_toy_dataset(const ToyCorpusConfig& config, int context_size, int max_utt_tokens,
                             double holdout_fraction) {
    const auto movies = generate_toy_corpus(config);

    // Shared vocabulary over both languages; sized to hold every surface.
    std::vector<std::string> texts;
    for (const auto& movie : movies) {
        for (const auto& u : movie.en) texts.push_back(u.text);
        for (const auto& u : movie.fr) texts.push_back(u.text);
    }
    ToyDataset ds{Vocabulary::build(texts, 128), {}, {}, {}, {}, {}, {}};

    for (const auto& movie : movies) {
        const bool holdout = is_holdout_movie(movie.movie_id, holdout_fraction, config.seed);
        auto& contexts = holdout ? ds.eval_contexts : ds.train_contexts;
        auto& pairs = holdout ? ds.eval_pairs : ds.train_pairs;
        auto& pools = holdout ? ds.eval_pools : ds.train_pools;

        const auto convs_en = segment_conversations(movie.en);
        const auto convs_fr = segment_conversations(movie.fr);
        for (const auto& conv : convs_en) {
            for (auto& ctx : window_contexts(conv, ds.vocab, context_size, 0, max_utt_tokens))
                contexts.push_back(std::move(ctx));
        }
        for (const auto& rebased : rebase_links(convs_en, convs_fr, movie.links)) {
            for (auto& pair :
                 join_alignments(convs_en[static_cast<std::size_t>(rebased.a_index)],
                                 convs_fr[static_cast<std::size_t>(rebased.b_index)], rebased.links, ds.vocab,
                                 0.9, context_size, 0, max_utt_tokens))
                pairs.push_back(std::move(pair));
        }

        // Same-movie utterance pool with the fr side attached where a
        // confident link exists.
        std::map<int, int> link_by_src;
        for (const auto& l : movie.links)
            if (l.confidence >= 0.9) link_by_src[l.src_index] = l.tgt_index;
        auto& pool = pools[movie.movie_id];
        for (int i = 0; i < static_cast<int>(movie.en.size()); ++i) {
            tasks::PoolEntry entry;
            auto ids = ds.vocab.encode(movie.en[static_cast<std::size_t>(i)].text);
            if (static_cast<int>(ids.size()) > max_utt_tokens) ids.resize(static_cast<std::size_t>(max_utt_tokens));
            entry.utt = TokUtt{std::move(ids), Lang::en};
            const auto it = link_by_src.find(i);
            if (it != link_by_src.end()) {
                auto fr_ids = ds.vocab.encode(movie.fr[static_cast<std::size_t>(it->second)].text);
                if (static_cast<int>(fr_ids.size()) > max_utt_tokens)
                    fr_ids.resize(static_cast<std::size_t>(max_utt_tokens));
                entry.translated = TokUtt{std::move(fr_ids), Lang::fr};
            }
            pool.push_back(std::move(entry));
        }
    }
    return ds;
}

}  // namespace dialopre::toy
