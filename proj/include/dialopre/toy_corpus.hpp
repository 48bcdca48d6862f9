#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dialopre/corpus.hpp"
#include "dialopre/tasks.hpp"

// Deterministic synthetic bilingual subtitle corpus for trainability and
// code-switch experiments, and for CLI pipeline fixtures.
//
// Texture: each conversation carries a topic; utterances open with the topic
// word and continue with content words drawn from a topic-conditioned slice
// of the content vocabulary, so a masked utterance is predictable from its
// context well beyond unigram frequency. The fr side mirrors the en side
// token for token under the bijection w -> "f" + w, with alignment links on
// a seeded subset of utterances (a slice of them down-weighted below the
// default confidence cutoff to keep the filter honest).
namespace dialopre::toy {

struct ToyCorpusConfig {
    int movies = 4;
    int conversations_per_movie = 4;
    int utterances_per_conversation = 12;
    int min_tokens = 3;
    int max_tokens = 6;
    double translation_rate = 0.85;  // fraction of utterances with an fr link
    double low_conf_rate = 0.1;      // fraction of links emitted below min_conf
    double link_confidence = 0.95;
    std::uint64_t seed = 1;
};

// One movie's parallel subtitle streams plus movie-level alignment links
// (stream index -> stream index), ready for the real pipeline: segmentation,
// windowing, link rebasing and alignment joining.
struct ToyMovie {
    std::string movie_id;
    std::vector<TimedUtterance> en;
    std::vector<TimedUtterance> fr;
    std::vector<AlignmentLink> links;
};

std::vector<ToyMovie> generate_toy_corpus(const ToyCorpusConfig& config);

// Subtitle JSONL lines ({"start_ms", "end_ms", "text", "speaker"}) and
// alignment JSONL lines ({"src", "tgt", "conf"}) in the pipeline's file
// formats.
std::vector<std::string> subtitle_jsonl_lines(const std::vector<TimedUtterance>& utts);
std::vector<std::string> alignment_jsonl_lines(const std::vector<AlignmentLink>& links);

// Everything the trainer and task generators consume, produced by running the
// real pipeline over the generated movies and partitioning by movie id.
struct ToyDataset {
    Vocabulary vocab;
    std::vector<Context> train_contexts;
    std::vector<AlignedContextPair> train_pairs;
    std::vector<Context> eval_contexts;
    std::vector<AlignedContextPair> eval_pairs;
    tasks::MoviePool train_pools;
    tasks::MoviePool eval_pools;
};

ToyDataset build_toy_dataset(const ToyCorpusConfig& config, int context_size, int max_utt_tokens,
                             double holdout_fraction);

}  // namespace dialopre::toy
