#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "dialopre/corpus.hpp"
#include "dialopre/model.hpp"
#include "dialopre/rng.hpp"
#include "dialopre/vocab.hpp"

namespace dialopre {

// ------------------------------------------------------------- mask planning

struct MaskPlan {
    std::vector<int> masked_token_positions;  // sorted, distinct, in range
    std::vector<int> target_tokens;           // original ids at those positions
};

// |masked positions| = max(1, round(p_omega * len)); uniform without
// replacement; pure function of (utt, p_omega, rng state).
MaskPlan plan_token_masks(const std::vector<int>& utt, double p_omega, Rng& rng);

// -------------------------------------------------------- context corruption

enum class CorruptionMode { MUG, TMUG, MMUG };

std::string to_string(CorruptionMode m);
CorruptionMode corruption_mode_from_string(const std::string& s);

struct MaskTarget {
    std::vector<int> ids;  // non-empty
    Lang lang = Lang::en;

    bool operator==(const MaskTarget&) const = default;
};

struct CorruptedContext {
    Context context;                    // masked slots replaced by MASK runs of target length
    std::vector<int> masked_positions;  // sorted subset of [0, T)
    std::vector<MaskTarget> targets;    // parallel to masked_positions
    Context pre_corruption;             // substituting targets into masked slots reproduces this
    CorruptionMode mode = CorruptionMode::MUG;
};

// MUG: monolingual context, max(1, round(p_c * T)) random slots masked,
// targets are the originals.
CorruptedContext corrupt_context(const Context& ctx, CorruptionMode mode, double p_c, const Vocabulary& vocab,
                                 Rng& rng);

// TMUG: masks exactly the translated slots (error if none); the surviving
// context stays monolingual in L. MMUG: builds the multilingual context by
// substituting translated utterances at their slots, masks random slots, and
// picks each target's language among the versions available at that slot.
CorruptedContext corrupt_context(const AlignedContextPair& pair, CorruptionMode mode, double p_c,
                                 const Vocabulary& vocab, Rng& rng);

nlohmann::json corrupted_to_json(const CorruptedContext& cc, uint64_t seed = 0);
CorruptedContext corrupted_from_json(const nlohmann::json& j);

// ------------------------------------------------------------------- losses

struct LossValue {
    double total = 0.0;
    double utterance_part = 0.0;
    double dialog_part = 0.0;
    long long token_count = 0;
};

// total = lambda_u * u_part + lambda_d * d_part (scaling factors default 1).
LossValue total_loss(double u_part, double d_part, double lambda_u = 1.0, double lambda_d = 1.0);

namespace losses {

// Mean cross-entropy at the masked token positions of one utterance (the
// masked-token objective); returns a 1x1 node.
int utterance_loss_graph(graph::Ctx& ctx, const std::vector<int>& utt, const MaskPlan& plan,
                         const Vocabulary& vocab);

// Teacher-forced generation loss over every masked slot of a corrupted
// context, averaged over all target tokens; the decoder's first input is the
// target-language token. Returns a 1x1 node.
int context_loss_graph(graph::Ctx& ctx, const CorruptedContext& cc, const Vocabulary& vocab);

}  // namespace losses

// Gradient-free evaluation wrappers over the graph builders.
double utterance_loss(const ModelParams& params, const std::vector<int>& utt, const MaskPlan& plan,
                      const Vocabulary& vocab);
double context_loss(const ModelParams& params, const CorruptedContext& cc, const Vocabulary& vocab);

}  // namespace dialopre
