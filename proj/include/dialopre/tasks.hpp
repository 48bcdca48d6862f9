#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dialopre/corpus.hpp"
#include "dialopre/model.hpp"
#include "dialopre/rng.hpp"
#include "json.hpp"

// Downstream probe tasks generated from held-out contexts:
//   II   — inconsistency identification: one utterance of a T-slot context is
//          replaced by a same-movie negative; predict the replaced slot.
//   NUR  — next utterance retrieval: given the first T-1 utterances, rank
//          D+1 candidates (the true next utterance plus D same-movie
//          distractors).
//   mII / mNUR — bilingual variants where a proportion p_lprime of the
//          context slots is first swapped to aligned L' utterances.
//
// Held-out hygiene is the caller's job: pools and contexts must come from a
// movie-id partition disjoint from the training shards.
namespace dialopre::tasks {

// A same-movie replacement/distractor candidate, with its aligned L' version
// when one exists.
struct PoolEntry {
    TokUtt utt;
    std::optional<TokUtt> translated;
};

// Distractors are drawn from the utterance pool of the instance's own movie.
using MoviePool = std::map<std::string, std::vector<PoolEntry>>;

struct InconsistencyInstance {
    Context context;          // one slot replaced
    int label = 0;            // replaced slot in [0, T)
    std::uint64_t seed = 0;   // per-instance substream, for replay
};

struct RetrievalInstance {
    Context context;                 // first T-1 utterances
    std::vector<TokUtt> candidates;  // D+1, shuffled
    int label = 0;                   // index of the true next utterance
    std::uint64_t seed = 0;
};

// ------------------------------------------------------------- generation
//
// All generators cycle deterministically over their eligible sources to
// produce exactly n_instances instances; instance i draws from the substream
// (seed, task-name, i), so the lists are reproducible and parallelisable.
//
// p_lprime > 0 requires aligned pairs; round(p_lprime * slots) context
// positions are swapped to their L' versions before corruption, sampling
// among translated slots (pairs with too few translated slots are skipped;
// none eligible is an error).

std::vector<InconsistencyInstance> make_ii(const std::vector<Context>& contexts,
                                           const std::vector<AlignedContextPair>& aligned, const MoviePool& pools,
                                           int n_instances, double p_lprime, std::uint64_t seed);

std::vector<RetrievalInstance> make_nur(const std::vector<Context>& contexts,
                                        const std::vector<AlignedContextPair>& aligned, const MoviePool& pools,
                                        int n_instances, int distractors, double p_lprime, std::uint64_t seed);

// ------------------------------------------------------------------ heads
//
// Small MLP probes on top of the frozen encoder. The II head maps the
// context embedding (dim) to T slot logits; the NUR head maps
// concat(context, candidate) (2*dim) to one match score.

struct TaskHeads {
    Matrix ii_w1, ii_b1, ii_w2, ii_b2;      // dim->dim->T
    Matrix nur_w1, nur_b1, nur_w2, nur_b2;  // 2*dim->dim->1

    static TaskHeads init(const ModelConfig& config, std::uint64_t seed);
    nlohmann::json to_json() const;
    static TaskHeads from_json(const nlohmann::json& j);
};

// Predicted replaced-slot index: argmax over T logits, ties to the lowest
// index.
int score_ii(const ModelParams& params, const TaskHeads& heads, const InconsistencyInstance& instance);

// Candidate indices sorted by head score descending, ties by candidate index.
std::vector<int> score_nur(const ModelParams& params, const TaskHeads& heads, const RetrievalInstance& instance);

// A ranking of k candidates by i.i.d. random scores (the no-model baseline).
std::vector<int> random_ranking(int k, Rng& rng);

// How much of the model a task fine-tune may move.
//   full              - every tensor trains alongside the head.
//   frozen_embeddings - upper layers train but the token-embedding table is
//                       pinned, so the lexicon stays exactly as pretraining
//                       left it. At desk scale a handful of task instances
//                       could otherwise relearn a whole toy language from
//                       scratch, which no realistic fine-tuning set can do;
//                       pinning the table keeps cross-lingual comparisons
//                       about the pretraining objectives.
//   head_only         - the encoder is bitwise frozen; only the head trains.
enum class FinetuneScope { full, frozen_embeddings, head_only };

// Fine-tunes for the inconsistency task with AdamW on cross-entropy over the
// T slot logits. Model tensors within scope are updated in place. Returns the
// updated heads; the NUR head passes through untouched either way.
TaskHeads finetune_ii(ModelParams& params, const TaskHeads& start,
                      const std::vector<InconsistencyInstance>& train, int steps, int batch_size, double lr,
                      std::uint64_t seed, FinetuneScope scope = FinetuneScope::full);

// ---------------------------------------------------------------- metrics

struct Metrics {
    double accuracy = 0.0;
    std::map<int, double> recall_at;  // N -> fraction with the label in top N
    long long n_instances = 0;
};

// Classification accuracy over aligned prediction/label lists.
Metrics compute_metrics(const std::vector<int>& predicted, const std::vector<int>& labels);

// Recall@N over ranked candidate lists; the full candidate count is always
// included so recall_at[D+1] == 1 stays checkable. accuracy = recall@1.
Metrics compute_metrics_ranked(const std::vector<std::vector<int>>& rankings, const std::vector<int>& labels,
                               std::vector<int> ns = {1, 2, 5});

// ---------------------------------------------------------- serialization

nlohmann::json instance_to_json(const InconsistencyInstance& instance);
nlohmann::json instance_to_json(const RetrievalInstance& instance);
InconsistencyInstance ii_instance_from_json(const nlohmann::json& j);
RetrievalInstance nur_instance_from_json(const nlohmann::json& j);

nlohmann::json metrics_to_json(const Metrics& m);
// Aligned plain-text table for terminal reports.
std::string metrics_table(const Metrics& m);

}  // namespace dialopre::tasks
