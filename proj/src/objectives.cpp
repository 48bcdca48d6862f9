#include "dialopre/objectives.hpp"

#include <algorithm>
#include <cmath>

#include "dialopre/errors.hpp"

namespace dialopre {

// ------------------------------------------------------------- mask planning

MaskPlan plan_token_masks(const std::vector<int>& utt, double p_omega, Rng& rng) {
    if (utt.empty()) throw DataError("plan_token_masks: empty utterance");
    if (p_omega <= 0.0 || p_omega > 1.0) throw DataError("plan_token_masks: p_omega must lie in (0, 1]");
    const int len = static_cast<int>(utt.size());
    const int k = std::max(1LL, std::llround(p_omega * len));
    MaskPlan plan;
    plan.masked_token_positions = rng.sample_without_replacement(len, static_cast<int>(k));
    std::sort(plan.masked_token_positions.begin(), plan.masked_token_positions.end());
    for (int pos : plan.masked_token_positions) plan.target_tokens.push_back(utt[static_cast<std::size_t>(pos)]);
    return plan;
}

// -------------------------------------------------------- context corruption

std::string to_string(CorruptionMode m) {
    switch (m) {
        case CorruptionMode::MUG: return "MUG";
        case CorruptionMode::TMUG: return "TMUG";
        case CorruptionMode::MMUG: return "MMUG";
    }
    throw DataError("unknown corruption mode");
}

CorruptionMode corruption_mode_from_string(const std::string& s) {
    if (s == "MUG") return CorruptionMode::MUG;
    if (s == "TMUG") return CorruptionMode::TMUG;
    if (s == "MMUG") return CorruptionMode::MMUG;
    throw DataError("unknown corruption mode: " + s);
}

namespace {

void check_pc(double p_c) {
    if (p_c <= 0.0 || p_c > 1.0) throw DataError("corrupt_context: p_c must lie in (0, 1]");
}

int mask_count(double p_c, int T) { return static_cast<int>(std::max(1LL, std::llround(p_c * T))); }

// Assemble the corrupted context given the surviving base and the chosen
// (position, target) pairs: masked slots become MASK runs of target length.
CorruptedContext assemble(const Context& surviving, std::vector<int> positions, std::vector<MaskTarget> targets,
                          CorruptionMode mode, const Vocabulary& vocab) {
    CorruptedContext cc;
    cc.mode = mode;
    cc.masked_positions = std::move(positions);
    cc.targets = std::move(targets);
    cc.context = surviving;
    cc.pre_corruption = surviving;
    for (std::size_t i = 0; i < cc.masked_positions.size(); ++i) {
        const auto slot = static_cast<std::size_t>(cc.masked_positions[i]);
        const MaskTarget& tgt = cc.targets[i];
        if (tgt.ids.empty()) throw DataError("corrupt_context: empty target");
        cc.pre_corruption.utterances[slot] = TokUtt{tgt.ids, tgt.lang};
        cc.context.utterances[slot] =
            TokUtt{std::vector<int>(tgt.ids.size(), vocab.mask()), tgt.lang};
    }
    return cc;
}

}  // namespace

CorruptedContext corrupt_context(const Context& ctx, CorruptionMode mode, double p_c, const Vocabulary& vocab,
                                 Rng& rng) {
    check_pc(p_c);
    if (mode != CorruptionMode::MUG)
        throw DataError("corrupt_context: " + to_string(mode) + " needs an aligned context pair");
    const int T = static_cast<int>(ctx.utterances.size());
    if (T == 0) throw DataError("corrupt_context: empty context");
    for (const auto& u : ctx.utterances)
        if (u.lang != ctx.utterances.front().lang)
            throw DataError("corrupt_context: MUG requires a monolingual context");

    auto positions = rng.sample_without_replacement(T, mask_count(p_c, T));
    std::sort(positions.begin(), positions.end());
    std::vector<MaskTarget> targets;
    for (int pos : positions) {
        const TokUtt& u = ctx.utterances[static_cast<std::size_t>(pos)];
        targets.push_back(MaskTarget{u.ids, u.lang});
    }
    return assemble(ctx, std::move(positions), std::move(targets), mode, vocab);
}

CorruptedContext corrupt_context(const AlignedContextPair& pair, CorruptionMode mode, double p_c,
                                 const Vocabulary& vocab, Rng& rng) {
    check_pc(p_c);
    const int T = static_cast<int>(pair.base.utterances.size());
    if (T == 0) throw DataError("corrupt_context: empty context");
    if (pair.translated.size() != static_cast<std::size_t>(T))
        throw DataError("corrupt_context: translated slot count mismatch");

    if (mode == CorruptionMode::TMUG) {
        // Mask exactly the translated slots; targets are the L' utterances;
        // the surviving context is the base language only.
        std::vector<int> positions;
        std::vector<MaskTarget> targets;
        for (int k = 0; k < T; ++k) {
            const auto& slot = pair.translated[static_cast<std::size_t>(k)];
            if (!slot) continue;
            positions.push_back(k);
            targets.push_back(MaskTarget{slot->ids, slot->lang});
        }
        if (positions.empty()) throw DataError("corrupt_context: TMUG needs at least one translated slot");
        return assemble(pair.base, std::move(positions), std::move(targets), mode, vocab);
    }

    if (mode != CorruptionMode::MMUG)
        throw DataError("corrupt_context: MUG takes a plain context, not an aligned pair");
    if (pair.translated_count() == 0)
        throw DataError("corrupt_context: MMUG needs at least one translated slot");

    // Multilingual context: translated utterances substituted at their slots.
    Context multi = pair.base;
    for (int k = 0; k < T; ++k) {
        const auto& slot = pair.translated[static_cast<std::size_t>(k)];
        if (slot) multi.utterances[static_cast<std::size_t>(k)] = TokUtt{slot->ids, slot->lang};
    }

    auto positions = rng.sample_without_replacement(T, mask_count(p_c, T));
    std::sort(positions.begin(), positions.end());
    std::vector<MaskTarget> targets;
    for (int pos : positions) {
        const auto& slot = pair.translated[static_cast<std::size_t>(pos)];
        const TokUtt& base = pair.base.utterances[static_cast<std::size_t>(pos)];
        if (slot && rng.bernoulli(0.5)) {
            targets.push_back(MaskTarget{slot->ids, slot->lang});  // generate in L'
        } else {
            targets.push_back(MaskTarget{base.ids, base.lang});  // generate in L
        }
    }
    return assemble(multi, std::move(positions), std::move(targets), mode, vocab);
}

nlohmann::json corrupted_to_json(const CorruptedContext& cc, uint64_t seed) {
    nlohmann::json toks = nlohmann::json::array();
    nlohmann::json langs = nlohmann::json::array();
    for (const auto& u : cc.context.utterances) {
        toks.push_back(u.ids);
        langs.push_back(to_string(u.lang));
    }
    nlohmann::json tgts = nlohmann::json::array();
    for (const auto& t : cc.targets) tgts.push_back(nlohmann::json{{"tokens", t.ids}, {"lang", to_string(t.lang)}});
    return nlohmann::json{{"context_tokens", toks},      {"langs", langs},
                          {"masked_positions", cc.masked_positions},
                          {"targets", tgts},             {"mode", to_string(cc.mode)},
                          {"movie_id", cc.context.movie_id}, {"seed", seed}};
}

CorruptedContext corrupted_from_json(const nlohmann::json& j) {
    CorruptedContext cc;
    cc.mode = corruption_mode_from_string(j.at("mode").get<std::string>());
    cc.context.movie_id = j.at("movie_id").get<std::string>();
    const auto& toks = j.at("context_tokens");
    const auto& langs = j.at("langs");
    if (toks.size() != langs.size()) throw DataError("corrupted context json: langs length mismatch");
    for (std::size_t i = 0; i < toks.size(); ++i)
        cc.context.utterances.push_back(
            TokUtt{toks[i].get<std::vector<int>>(), lang_from_string(langs[i].get<std::string>())});
    cc.masked_positions = j.at("masked_positions").get<std::vector<int>>();
    for (const auto& t : j.at("targets"))
        cc.targets.push_back(
            MaskTarget{t.at("tokens").get<std::vector<int>>(), lang_from_string(t.at("lang").get<std::string>())});
    if (cc.targets.size() != cc.masked_positions.size())
        throw DataError("corrupted context json: targets/positions mismatch");
    // the pre-corruption context is derivable: targets substituted at masked slots
    cc.pre_corruption = cc.context;
    for (std::size_t i = 0; i < cc.masked_positions.size(); ++i) {
        const auto slot = static_cast<std::size_t>(cc.masked_positions[i]);
        if (slot >= cc.pre_corruption.utterances.size())
            throw DataError("corrupted context json: masked position out of range");
        cc.pre_corruption.utterances[slot] = TokUtt{cc.targets[i].ids, cc.targets[i].lang};
    }
    return cc;
}

// ------------------------------------------------------------------- losses

LossValue total_loss(double u_part, double d_part, double lambda_u, double lambda_d) {
    if (!std::isfinite(u_part) || !std::isfinite(d_part)) throw NumericError("total_loss: non-finite parts");
    LossValue v;
    v.utterance_part = u_part;
    v.dialog_part = d_part;
    v.total = lambda_u * u_part + lambda_d * d_part;
    return v;
}

namespace losses {

int utterance_loss_graph(graph::Ctx& ctx, const std::vector<int>& utt, const MaskPlan& plan,
                         const Vocabulary& vocab) {
    if (plan.masked_token_positions.empty()) throw DataError("utterance_loss: empty mask plan");
    if (plan.masked_token_positions.size() != plan.target_tokens.size())
        throw DataError("utterance_loss: plan positions/targets mismatch");
    std::vector<int> corrupted = utt;
    for (int pos : plan.masked_token_positions) {
        if (pos < 0 || pos >= static_cast<int>(utt.size()))
            throw DataError("utterance_loss: mask position out of range");
        corrupted[static_cast<std::size_t>(pos)] = vocab.mask();
    }
    ad::Tape& t = ctx.tape;
    int states = graph::utterance_states(ctx, corrupted);
    int logits = graph::project_logits(ctx, t.select_rows(states, plan.masked_token_positions));
    int ce = t.cross_entropy_sum(logits, plan.target_tokens);
    return t.weighted_sum_scalars({ce}, {1.0 / static_cast<double>(plan.target_tokens.size())});
}

int context_loss_graph(graph::Ctx& ctx, const CorruptedContext& cc, const Vocabulary& vocab) {
    if (cc.masked_positions.empty()) throw DataError("context_loss: no masked positions");
    if (cc.masked_positions.size() != cc.targets.size())
        throw DataError("context_loss: positions/targets mismatch");
    ad::Tape& t = ctx.tape;
    std::vector<int> pooled;
    for (const auto& u : cc.context.utterances)
        pooled.push_back(graph::pooled(ctx, graph::utterance_states(ctx, u.ids)));
    int enc = graph::context_states(ctx, pooled);

    std::vector<int> ce_nodes;
    long long total_tokens = 0;
    for (std::size_t i = 0; i < cc.masked_positions.size(); ++i) {
        const MaskTarget& tgt = cc.targets[i];
        if (tgt.ids.empty()) throw DataError("context_loss: empty target");
        int logits = graph::decoder_logits(ctx, enc, vocab.language_token(tgt.lang), tgt.ids);
        ce_nodes.push_back(t.cross_entropy_sum(logits, tgt.ids));
        total_tokens += static_cast<long long>(tgt.ids.size());
    }
    const std::vector<double> weights(ce_nodes.size(), 1.0 / static_cast<double>(total_tokens));
    return t.weighted_sum_scalars(ce_nodes, weights);
}

}  // namespace losses

double utterance_loss(const ModelParams& params, const std::vector<int>& utt, const MaskPlan& plan,
                      const Vocabulary& vocab) {
    ad::Tape tape;
    GraphParams gp(tape, params, false);
    graph::Ctx ctx{tape, gp, params.config, nullptr};
    return tape.scalar(losses::utterance_loss_graph(ctx, utt, plan, vocab));
}

double context_loss(const ModelParams& params, const CorruptedContext& cc, const Vocabulary& vocab) {
    ad::Tape tape;
    GraphParams gp(tape, params, false);
    graph::Ctx ctx{tape, gp, params.config, nullptr};
    return tape.scalar(losses::context_loss_graph(ctx, cc, vocab));
}

}  // namespace dialopre
