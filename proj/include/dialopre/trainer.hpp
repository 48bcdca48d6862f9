#pragma once

#include <cstdint>
#include <vector>

#include "dialopre/optimizer.hpp"

// Pretraining loop: AdamW on the combined objective (token-level masking on
// the clean target utterances plus one dialog-level generation mode per
// step). With several modes configured, steps cycle through them in order, so
// an equal step budget spreads evenly across modes.
namespace dialopre {

struct TrainerConfig {
    int steps = 200;
    int batch_contexts = 8;
    double lr = 1e-2;
    int warmup_steps = 20;
    double lambda_u = 1.0;
    double lambda_d = 1.0;
    double p_omega = 0.15;  // token mask rate inside one utterance
    double p_c = 0.2;       // slot mask rate inside one context
    std::vector<CorruptionMode> modes = {CorruptionMode::MUG};
    std::uint64_t seed = 1;
};

struct StepLog {
    int step = 0;
    CorruptionMode mode = CorruptionMode::MUG;
    double total = 0.0;
};

struct PretrainResult {
    std::vector<StepLog> logs;
};

// Updates params in place. MUG steps draw from contexts; TMUG steps from
// pairs with at least one translated slot; MMUG steps from any pair. Missing
// sources for a configured mode are a DataError; a non-finite loss is a
// NumericError. Step t draws all its randomness from substream (seed, "step",
// t), so runs replay exactly.
PretrainResult pretrain(ModelParams& params, const std::vector<Context>& contexts,
                        const std::vector<AlignedContextPair>& pairs, const Vocabulary& vocab,
                        const TrainerConfig& config);

// Mean dialog-generation loss over deterministically corrupted contexts
// (substream (seed, "eval_mug", i) for context i); the before/after
// trainability yardstick.
double eval_mug_loss(const ModelParams& params, const std::vector<Context>& contexts, const Vocabulary& vocab,
                     double p_c, std::uint64_t seed);

}  // namespace dialopre
