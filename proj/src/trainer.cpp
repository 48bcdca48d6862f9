#include "dialopre/trainer.hpp"

#include "dialopre/autodiff.hpp"

namespace dialopre {

PretrainResult pretrain(ModelParams& params, const std::vector<Context>& contexts,
                        const std::vector<AlignedContextPair>& pairs, const Vocabulary& vocab,
                        const TrainerConfig& config) {
    if (config.steps < 0) throw DataError("pretrain: steps must be non-negative");
    if (config.batch_contexts < 1) throw DataError("pretrain: batch_contexts must be positive");
    if (config.modes.empty()) throw DataError("pretrain: at least one corruption mode required");

    std::vector<const AlignedContextPair*> tmug_sources;
    std::vector<const AlignedContextPair*> mmug_sources;
    for (const auto& p : pairs) {
        if (p.translated_count() > 0) tmug_sources.push_back(&p);
        mmug_sources.push_back(&p);
    }
    for (const auto mode : config.modes) {
        if (mode == CorruptionMode::MUG && contexts.empty())
            throw DataError("pretrain: MUG configured but no monolingual contexts");
        if (mode == CorruptionMode::TMUG && tmug_sources.empty())
            throw DataError("pretrain: TMUG configured but no pairs with translated slots");
        if (mode == CorruptionMode::MMUG && pairs.empty())
            throw DataError("pretrain: MMUG configured but no aligned pairs");
    }

    AdamWConfig opt_cfg;
    opt_cfg.lr = config.lr;
    opt_cfg.warmup_steps = config.warmup_steps;
    AdamW opt(params, opt_cfg);

    PretrainResult result;
    for (int step = 0; step < config.steps; ++step) {
        const CorruptionMode mode = config.modes[static_cast<std::size_t>(step) % config.modes.size()];
        Rng rng(substream_seed(config.seed, "step", step));

        TrainBatch batch;
        for (int b = 0; b < config.batch_contexts; ++b) {
            CorruptedContext corrupted = [&] {
                if (mode == CorruptionMode::MUG) {
                    const auto& src = contexts[static_cast<std::size_t>(
                        rng.uniform_int(0, static_cast<int>(contexts.size()) - 1))];
                    return corrupt_context(src, mode, config.p_c, vocab, rng);
                }
                const auto& pool = mode == CorruptionMode::TMUG ? tmug_sources : mmug_sources;
                const auto& src = *pool[static_cast<std::size_t>(
                    rng.uniform_int(0, static_cast<int>(pool.size()) - 1))];
                return corrupt_context(src, mode, config.p_c, vocab, rng);
            }();

            // Token-level masking trains on the clean version of one slot of
            // the same context.
            const auto& clean = corrupted.pre_corruption.utterances;
            const auto& utt =
                clean[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(clean.size()) - 1))];
            batch.mum_items.push_back({utt.ids, plan_token_masks(utt.ids, config.p_omega, rng)});
            batch.gen_items.push_back(std::move(corrupted));
        }

        ad::Tape tape;
        GraphParams gp(tape, params, true);
        Rng drop_rng(substream_seed(config.seed, "dropout", step));
        graph::Ctx ctx{tape, gp, params.config, params.config.dropout > 0.0 ? &drop_rng : nullptr};
        const int loss =
            batch_loss_graph(ctx, batch, vocab, config.lambda_u, config.lambda_d);
        const double loss_value = tape.value(loss).at(0, 0);
        if (!std::isfinite(loss_value)) throw NumericError("pretrain: non-finite loss");
        tape.backward(loss);
        opt.step(params, gp.collect());

        result.logs.push_back({step, mode, loss_value});
    }
    return result;
}

double eval_mug_loss(const ModelParams& params, const std::vector<Context>& contexts, const Vocabulary& vocab,
                     double p_c, std::uint64_t seed) {
    if (contexts.empty()) throw DataError("eval_mug_loss: no contexts");
    double sum = 0.0;
    for (std::size_t i = 0; i < contexts.size(); ++i) {
        Rng rng(substream_seed(seed, "eval_mug", static_cast<int>(i)));
        const auto corrupted = corrupt_context(contexts[i], CorruptionMode::MUG, p_c, vocab, rng);
        sum += context_loss(params, corrupted, vocab);
    }
    return sum / static_cast<double>(contexts.size());
}

}  // namespace dialopre
