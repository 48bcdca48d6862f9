#include "dialopre/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <optional>

#include "dialopre/autodiff.hpp"
#include "dialopre/optimizer.hpp"

namespace dialopre::tasks {

namespace {

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

bool in_context(const Context& ctx, const TokUtt& u) {
    return std::find(ctx.utterances.begin(), ctx.utterances.end(), u) != ctx.utterances.end();
}

const std::vector<PoolEntry>& pool_for(const MoviePool& pools, const std::string& movie_id) {
    const auto it = pools.find(movie_id);
    if (it == pools.end() || it->second.empty()) throw DataError("tasks: no utterance pool for movie " + movie_id);
    return it->second;
}

// Replacement negatives must be drawable: at least two pool utterances that
// are not already part of the context.
void check_ii_pool(const Context& ctx, const std::vector<PoolEntry>& pool) {
    int outside = 0;
    for (const auto& e : pool)
        if (!in_context(ctx, e.utt) && ++outside >= 2) return;
    throw DataError("tasks: pool for movie " + ctx.movie_id + " has fewer than 2 utterances beyond the context");
}

// Swap k uniformly chosen translated slots (restricted to the first
// slots_limit positions) to their L' versions. Pairs with fewer than k
// translated slots in range are not eligible and were filtered upstream.
Context swap_to_lprime(const AlignedContextPair& pair, int slots_limit, int k, Rng& rng) {
    Context ctx = pair.base;
    std::vector<int> translated_idx;
    for (int i = 0; i < slots_limit; ++i)
        if (pair.translated[static_cast<std::size_t>(i)].has_value()) translated_idx.push_back(i);
    const auto chosen = rng.sample_without_replacement(static_cast<int>(translated_idx.size()), k);
    for (int c : chosen) {
        const auto& slot = *pair.translated[static_cast<std::size_t>(translated_idx[static_cast<std::size_t>(c)])];
        ctx.utterances[static_cast<std::size_t>(translated_idx[static_cast<std::size_t>(c)])] =
            TokUtt{slot.ids, slot.lang};
    }
    return ctx;
}

// A same-movie negative differing from the slot it replaces; matches the
// slot's current language when the pool entry has that language available.
TokUtt draw_negative(const std::vector<PoolEntry>& pool, const TokUtt& original, Lang base_lang, Rng& rng) {
    for (;;) {
        const auto& entry = pool[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(pool.size()) - 1))];
        TokUtt cand = entry.utt;
        if (original.lang != base_lang && entry.translated.has_value() && entry.translated->lang == original.lang)
            cand = *entry.translated;
        if (!(cand == original)) return cand;
    }
}

int round_count(double p, int slots) { return static_cast<int>(std::llround(p * slots)); }

void check_p_lprime(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw DataError("tasks: p_lprime must lie in [0, 1]");
}

std::vector<double> head_hidden(const std::vector<double>& input, const Matrix& w1, const Matrix& b1) {
    std::vector<double> h(static_cast<std::size_t>(w1.cols()), 0.0);
    for (int j = 0; j < w1.cols(); ++j) {
        double s = b1.at(0, j);
        for (int i = 0; i < w1.rows(); ++i) s += input[static_cast<std::size_t>(i)] * w1.at(i, j);
        h[static_cast<std::size_t>(j)] = gelu(s);
    }
    return h;
}

std::vector<double> head_output(const std::vector<double>& h, const Matrix& w2, const Matrix& b2) {
    std::vector<double> out(static_cast<std::size_t>(w2.cols()), 0.0);
    for (int j = 0; j < w2.cols(); ++j) {
        double s = b2.at(0, j);
        for (int i = 0; i < w2.rows(); ++i) s += h[static_cast<std::size_t>(i)] * w2.at(i, j);
        out[static_cast<std::size_t>(j)] = s;
    }
    return out;
}

std::vector<int> rank_desc(const std::vector<double>& scores) {
    std::vector<int> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
    });
    return order;
}

nlohmann::json tokutt_to_json(const TokUtt& u) {
    return nlohmann::json{{"ids", u.ids}, {"lang", to_string(u.lang)}};
}

TokUtt tokutt_from_json(const nlohmann::json& j) {
    TokUtt u;
    u.ids = j.at("ids").get<std::vector<int>>();
    u.lang = lang_from_string(j.at("lang").get<std::string>());
    return u;
}

nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < m.rows(); ++r) rows.push_back(std::vector<double>(m.row(r), m.row(r) + m.cols()));
    return nlohmann::json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", rows}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
    const int rows = j.at("rows").get<int>();
    const int cols = j.at("cols").get<int>();
    if (rows < 0 || cols < 0) throw DataError("tasks: negative matrix shape");
    Matrix m(rows, cols);
    const auto& data = j.at("data");
    if (static_cast<int>(data.size()) != rows) throw DataError("tasks: matrix row count mismatch");
    for (int r = 0; r < rows; ++r) {
        const auto row = data.at(static_cast<std::size_t>(r)).get<std::vector<double>>();
        if (static_cast<int>(row.size()) != cols) throw DataError("tasks: matrix column count mismatch");
        for (int c = 0; c < cols; ++c) m.at(r, c) = row[static_cast<std::size_t>(c)];
    }
    return m;
}

}  // namespace

// --------------------------------------------------------------- generation

std::vector<InconsistencyInstance> make_ii(const std::vector<Context>& contexts,
                                           const std::vector<AlignedContextPair>& aligned, const MoviePool& pools,
                                           int n_instances, double p_lprime, std::uint64_t seed) {
    check_p_lprime(p_lprime);
    if (n_instances < 0) throw DataError("make_ii: n_instances must be non-negative");

    std::vector<InconsistencyInstance> out;
    if (p_lprime == 0.0) {
        if (contexts.empty()) throw DataError("make_ii: no contexts");
        for (const auto& c : contexts) check_ii_pool(c, pool_for(pools, c.movie_id));
        for (int i = 0; i < n_instances; ++i) {
            const std::uint64_t sub = substream_seed(seed, "ii", i);
            Rng rng(sub);
            Context ctx = contexts[static_cast<std::size_t>(i) % contexts.size()];
            const int t = static_cast<int>(ctx.utterances.size());
            const int pos = rng.uniform_int(0, t - 1);
            auto& slot = ctx.utterances[static_cast<std::size_t>(pos)];
            slot = draw_negative(pool_for(pools, ctx.movie_id), slot, slot.lang, rng);
            out.push_back({std::move(ctx), pos, sub});
        }
        return out;
    }

    std::vector<const AlignedContextPair*> eligible;
    for (const auto& p : aligned) {
        const int t = static_cast<int>(p.base.utterances.size());
        if (p.translated_count() >= round_count(p_lprime, t)) eligible.push_back(&p);
    }
    if (eligible.empty()) throw DataError("make_ii: no aligned pairs with enough translated slots");
    for (const auto* p : eligible) check_ii_pool(p->base, pool_for(pools, p->base.movie_id));
    for (int i = 0; i < n_instances; ++i) {
        const std::uint64_t sub = substream_seed(seed, "mii", i);
        Rng rng(sub);
        const auto& pair = *eligible[static_cast<std::size_t>(i) % eligible.size()];
        const int t = static_cast<int>(pair.base.utterances.size());
        Context ctx = swap_to_lprime(pair, t, round_count(p_lprime, t), rng);
        const int pos = rng.uniform_int(0, t - 1);
        auto& slot = ctx.utterances[static_cast<std::size_t>(pos)];
        slot = draw_negative(pool_for(pools, ctx.movie_id), slot, pair.src_lang, rng);
        out.push_back({std::move(ctx), pos, sub});
    }
    return out;
}

std::vector<RetrievalInstance> make_nur(const std::vector<Context>& contexts,
                                        const std::vector<AlignedContextPair>& aligned, const MoviePool& pools,
                                        int n_instances, int distractors, double p_lprime, std::uint64_t seed) {
    check_p_lprime(p_lprime);
    if (n_instances < 0) throw DataError("make_nur: n_instances must be non-negative");
    if (distractors < 1) throw DataError("make_nur: need at least 1 distractor");

    struct Source {
        const Context* ctx = nullptr;
        const AlignedContextPair* pair = nullptr;
    };
    std::vector<Source> sources;
    if (p_lprime == 0.0) {
        for (const auto& c : contexts) sources.push_back({&c, nullptr});
        if (sources.empty()) throw DataError("make_nur: no contexts");
    } else {
        for (const auto& p : aligned) {
            const int t = static_cast<int>(p.base.utterances.size());
            int in_range = 0;
            for (int i = 0; i + 1 < t; ++i)
                if (p.translated[static_cast<std::size_t>(i)].has_value()) ++in_range;
            if (t >= 2 && in_range >= round_count(p_lprime, t - 1)) sources.push_back({nullptr, &p});
        }
        if (sources.empty()) throw DataError("make_nur: no aligned pairs with enough translated slots");
    }
    for (const auto& s : sources) {
        const Context& base = s.pair ? s.pair->base : *s.ctx;
        if (base.utterances.size() < 2) throw DataError("make_nur: contexts need at least 2 utterances");
        const auto& pool = pool_for(pools, base.movie_id);
        const TokUtt& truth = base.utterances.back();
        int distinct = 0;
        for (const auto& e : pool)
            if (!(e.utt == truth)) ++distinct;
        if (distinct < distractors)
            throw DataError("make_nur: pool for movie " + base.movie_id + " has too few distinct distractors");
    }

    std::vector<RetrievalInstance> out;
    for (int i = 0; i < n_instances; ++i) {
        const std::uint64_t sub = substream_seed(seed, p_lprime == 0.0 ? "nur" : "mnur", i);
        Rng rng(sub);
        const auto& src = sources[static_cast<std::size_t>(i) % sources.size()];
        const Context& base = src.pair ? src.pair->base : *src.ctx;
        const int t = static_cast<int>(base.utterances.size());

        RetrievalInstance inst;
        inst.seed = sub;
        inst.context.movie_id = base.movie_id;
        if (src.pair) {
            Context swapped = swap_to_lprime(*src.pair, t - 1, round_count(p_lprime, t - 1), rng);
            inst.context.utterances.assign(swapped.utterances.begin(), swapped.utterances.end() - 1);
        } else {
            inst.context.utterances.assign(base.utterances.begin(), base.utterances.end() - 1);
        }

        // True next utterance; in the bilingual variant every candidate picks
        // its language uniformly when an L' version exists.
        TokUtt truth = base.utterances.back();
        if (src.pair && src.pair->translated.back().has_value() && rng.bernoulli(0.5)) {
            const auto& slot = *src.pair->translated.back();
            truth = TokUtt{slot.ids, slot.lang};
        }
        const auto& pool = pool_for(pools, base.movie_id);
        std::vector<int> usable;
        for (int k = 0; k < static_cast<int>(pool.size()); ++k)
            if (!(pool[static_cast<std::size_t>(k)].utt == base.utterances.back())) usable.push_back(k);
        const auto picks = rng.sample_without_replacement(static_cast<int>(usable.size()), distractors);

        std::vector<TokUtt> assembled;
        assembled.push_back(truth);
        for (int pick : picks) {
            const auto& e = pool[static_cast<std::size_t>(usable[static_cast<std::size_t>(pick)])];
            if (src.pair && e.translated.has_value() && rng.bernoulli(0.5))
                assembled.push_back(*e.translated);
            else
                assembled.push_back(e.utt);
        }
        std::vector<int> perm(assembled.size());
        std::iota(perm.begin(), perm.end(), 0);
        rng.shuffle(perm);
        inst.candidates.resize(assembled.size());
        for (std::size_t k = 0; k < perm.size(); ++k) {
            inst.candidates[k] = assembled[static_cast<std::size_t>(perm[k])];
            if (perm[k] == 0) inst.label = static_cast<int>(k);
        }
        out.push_back(std::move(inst));
    }
    return out;
}

// -------------------------------------------------------------------- heads

TaskHeads TaskHeads::init(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(substream_seed(seed, "task_heads"));
    const int dim = config.dim;
    const int t = config.context_size;
    TaskHeads h;
    h.ii_w1 = Matrix::randn(dim, dim, 0.1, rng);
    h.ii_b1 = Matrix(1, dim);
    h.ii_w2 = Matrix::randn(dim, t, 0.1, rng);
    h.ii_b2 = Matrix(1, t);
    h.nur_w1 = Matrix::randn(2 * dim, dim, 0.1, rng);
    h.nur_b1 = Matrix(1, dim);
    h.nur_w2 = Matrix::randn(dim, 1, 0.1, rng);
    h.nur_b2 = Matrix(1, 1);
    return h;
}

nlohmann::json TaskHeads::to_json() const {
    return nlohmann::json{{"ii_w1", matrix_to_json(ii_w1)},   {"ii_b1", matrix_to_json(ii_b1)},
                          {"ii_w2", matrix_to_json(ii_w2)},   {"ii_b2", matrix_to_json(ii_b2)},
                          {"nur_w1", matrix_to_json(nur_w1)}, {"nur_b1", matrix_to_json(nur_b1)},
                          {"nur_w2", matrix_to_json(nur_w2)}, {"nur_b2", matrix_to_json(nur_b2)}};
}

TaskHeads TaskHeads::from_json(const nlohmann::json& j) {
    TaskHeads h;
    h.ii_w1 = matrix_from_json(j.at("ii_w1"));
    h.ii_b1 = matrix_from_json(j.at("ii_b1"));
    h.ii_w2 = matrix_from_json(j.at("ii_w2"));
    h.ii_b2 = matrix_from_json(j.at("ii_b2"));
    h.nur_w1 = matrix_from_json(j.at("nur_w1"));
    h.nur_b1 = matrix_from_json(j.at("nur_b1"));
    h.nur_w2 = matrix_from_json(j.at("nur_w2"));
    h.nur_b2 = matrix_from_json(j.at("nur_b2"));
    if (h.ii_w1.cols() != h.ii_b1.cols() || h.ii_w2.rows() != h.ii_w1.cols() || h.ii_w2.cols() != h.ii_b2.cols() ||
        h.nur_w1.cols() != h.nur_b1.cols() || h.nur_w2.rows() != h.nur_w1.cols() || h.nur_w2.cols() != 1)
        throw DataError("TaskHeads: inconsistent head shapes");
    return h;
}

// -------------------------------------------------------------------- scoring

namespace {

std::vector<double> context_embedding(const ModelParams& params, const Context& ctx, bool partial) {
    std::vector<std::vector<double>> embs;
    embs.reserve(ctx.utterances.size());
    for (const auto& u : ctx.utterances) embs.push_back(encode_utterance(params, u.ids).embedding);
    return (partial ? encode_context_partial(params, embs) : encode_context(params, embs)).embedding;
}

}  // namespace

int score_ii(const ModelParams& params, const TaskHeads& heads, const InconsistencyInstance& instance) {
    const auto emb = context_embedding(params, instance.context, false);
    const auto logits = head_output(head_hidden(emb, heads.ii_w1, heads.ii_b1), heads.ii_w2, heads.ii_b2);
    int best = 0;
    for (int k = 1; k < static_cast<int>(logits.size()); ++k)
        if (logits[static_cast<std::size_t>(k)] > logits[static_cast<std::size_t>(best)]) best = k;
    return best;
}

std::vector<int> score_nur(const ModelParams& params, const TaskHeads& heads, const RetrievalInstance& instance) {
    const auto ctx_emb = context_embedding(params, instance.context, true);
    std::vector<double> scores;
    scores.reserve(instance.candidates.size());
    for (const auto& cand : instance.candidates) {
        const auto cand_emb = encode_utterance(params, cand.ids).embedding;
        std::vector<double> joint = ctx_emb;
        joint.insert(joint.end(), cand_emb.begin(), cand_emb.end());
        scores.push_back(head_output(head_hidden(joint, heads.nur_w1, heads.nur_b1), heads.nur_w2, heads.nur_b2)[0]);
    }
    return rank_desc(scores);
}

std::vector<int> random_ranking(int k, Rng& rng) {
    if (k < 1) throw DataError("random_ranking: k must be positive");
    std::vector<double> scores(static_cast<std::size_t>(k));
    for (auto& s : scores) s = rng.uniform01();
    return rank_desc(scores);
}

TaskHeads finetune_ii(ModelParams& params, const TaskHeads& start,
                      const std::vector<InconsistencyInstance>& train, int steps, int batch_size, double lr,
                      std::uint64_t seed, FinetuneScope scope) {
    if (train.empty()) throw DataError("finetune_ii: no training instances");
    if (steps < 0 || batch_size < 1) throw DataError("finetune_ii: bad steps/batch_size");
    const bool train_encoder = scope != FinetuneScope::head_only;

    // With the encoder frozen every context embedding is fixed; compute each once.
    std::vector<Matrix> frozen_embs;
    if (!train_encoder) {
        frozen_embs.reserve(train.size());
        for (const auto& inst : train) {
            const auto e = context_embedding(params, inst.context, false);
            Matrix m(1, static_cast<int>(e.size()));
            for (std::size_t i = 0; i < e.size(); ++i) m.at(0, static_cast<int>(i)) = e[i];
            frozen_embs.push_back(std::move(m));
        }
    }

    std::vector<Matrix> head = {start.ii_w1, start.ii_b1, start.ii_w2, start.ii_b2};
    AdamWConfig cfg;
    cfg.lr = lr;
    cfg.warmup_steps = std::max(1, steps / 10);
    AdamW head_opt(head, cfg);
    std::optional<AdamW> model_opt;
    if (train_encoder) model_opt.emplace(params, cfg);
    const int emb_idx = params.index.at("tok_emb");
    const Matrix pinned_emb = params.tensors[static_cast<std::size_t>(emb_idx)];
    Rng batch_rng(substream_seed(seed, "finetune_batches"));

    for (int s = 0; s < steps; ++s) {
        ad::Tape tape;
        GraphParams gp(tape, params, train_encoder);
        graph::Ctx gctx{tape, gp, params.config, nullptr};
        const int w1 = tape.leaf(head[0], true);
        const int b1 = tape.leaf(head[1], true);
        const int w2 = tape.leaf(head[2], true);
        const int b2 = tape.leaf(head[3], true);
        std::vector<int> ce_nodes;
        std::vector<double> weights;
        for (int k = 0; k < batch_size; ++k) {
            const auto idx = static_cast<std::size_t>(batch_rng.uniform_int(0, static_cast<int>(train.size()) - 1));
            int x;
            if (train_encoder) {
                std::vector<int> rows;
                for (const auto& u : train[idx].context.utterances)
                    rows.push_back(graph::pooled(gctx, graph::utterance_states(gctx, u.ids)));
                x = graph::pooled(gctx, graph::context_states(gctx, rows));
            } else {
                x = tape.leaf(frozen_embs[idx], false);
            }
            const int h = tape.gelu(tape.add_rowvec(tape.matmul(x, w1), b1));
            const int logits = tape.add_rowvec(tape.matmul(h, w2), b2);
            ce_nodes.push_back(tape.cross_entropy_sum(logits, {train[idx].label}));
            weights.push_back(1.0 / batch_size);
        }
        tape.backward(tape.weighted_sum_scalars(ce_nodes, weights));
        std::vector<Matrix> hgrads;
        for (int node : {w1, b1, w2, b2}) hgrads.push_back(tape.grad(node));
        head_opt.step(head, hgrads);
        if (train_encoder) {
            Gradients grads = gp.collect();
            if (scope == FinetuneScope::frozen_embeddings)
                grads.g[static_cast<std::size_t>(emb_idx)].zero();
            model_opt->step(params, grads);
            if (scope == FinetuneScope::frozen_embeddings)
                params.tensors[static_cast<std::size_t>(emb_idx)] = pinned_emb;
        }
    }

    TaskHeads out = start;
    out.ii_w1 = head[0];
    out.ii_b1 = head[1];
    out.ii_w2 = head[2];
    out.ii_b2 = head[3];
    return out;
}

// ------------------------------------------------------------------- metrics

Metrics compute_metrics(const std::vector<int>& predicted, const std::vector<int>& labels) {
    if (predicted.size() != labels.size()) throw DataError("compute_metrics: prediction/label length mismatch");
    if (predicted.empty()) throw DataError("compute_metrics: empty input");
    long long hits = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i)
        if (predicted[i] == labels[i]) ++hits;
    Metrics m;
    m.accuracy = static_cast<double>(hits) / static_cast<double>(predicted.size());
    m.n_instances = static_cast<long long>(predicted.size());
    return m;
}

Metrics compute_metrics_ranked(const std::vector<std::vector<int>>& rankings, const std::vector<int>& labels,
                               std::vector<int> ns) {
    if (rankings.size() != labels.size()) throw DataError("compute_metrics_ranked: ranking/label length mismatch");
    if (rankings.empty()) throw DataError("compute_metrics_ranked: empty input");
    const int full = static_cast<int>(rankings.front().size());
    ns.push_back(1);
    ns.push_back(full);
    std::sort(ns.begin(), ns.end());
    ns.erase(std::unique(ns.begin(), ns.end()), ns.end());

    Metrics m;
    m.n_instances = static_cast<long long>(rankings.size());
    for (int n : ns) {
        if (n < 1 || n > full) throw DataError("compute_metrics_ranked: N outside [1, candidates]");
        long long hits = 0;
        for (std::size_t i = 0; i < rankings.size(); ++i) {
            if (static_cast<int>(rankings[i].size()) != full)
                throw DataError("compute_metrics_ranked: uneven candidate counts");
            const auto& r = rankings[i];
            if (std::find(r.begin(), r.begin() + n, labels[i]) != r.begin() + n) ++hits;
        }
        m.recall_at[n] = static_cast<double>(hits) / static_cast<double>(rankings.size());
    }
    m.accuracy = m.recall_at.at(1);
    return m;
}

// ------------------------------------------------------------- serialization

nlohmann::json instance_to_json(const InconsistencyInstance& instance) {
    nlohmann::json utts = nlohmann::json::array();
    nlohmann::json langs = nlohmann::json::array();
    for (const auto& u : instance.context.utterances) {
        utts.push_back(u.ids);
        langs.push_back(to_string(u.lang));
    }
    return nlohmann::json{{"task", "ii"},
                          {"context_tokens", utts},
                          {"langs", langs},
                          {"label", instance.label},
                          {"movie_id", instance.context.movie_id},
                          {"seed", instance.seed}};
}

nlohmann::json instance_to_json(const RetrievalInstance& instance) {
    nlohmann::json utts = nlohmann::json::array();
    nlohmann::json langs = nlohmann::json::array();
    for (const auto& u : instance.context.utterances) {
        utts.push_back(u.ids);
        langs.push_back(to_string(u.lang));
    }
    nlohmann::json cands = nlohmann::json::array();
    for (const auto& c : instance.candidates) cands.push_back(tokutt_to_json(c));
    return nlohmann::json{{"task", "nur"},
                          {"context_tokens", utts},
                          {"langs", langs},
                          {"candidates", cands},
                          {"label", instance.label},
                          {"movie_id", instance.context.movie_id},
                          {"seed", instance.seed}};
}

namespace {

Context context_from_instance_json(const nlohmann::json& j) {
    Context ctx;
    ctx.movie_id = j.at("movie_id").get<std::string>();
    const auto& utts = j.at("context_tokens");
    const auto& langs = j.at("langs");
    if (utts.size() != langs.size()) throw DataError("tasks: context_tokens/langs length mismatch");
    for (std::size_t i = 0; i < utts.size(); ++i) {
        TokUtt u;
        u.ids = utts.at(i).get<std::vector<int>>();
        u.lang = lang_from_string(langs.at(i).get<std::string>());
        ctx.utterances.push_back(std::move(u));
    }
    return ctx;
}

}  // namespace

InconsistencyInstance ii_instance_from_json(const nlohmann::json& j) {
    if (j.at("task").get<std::string>() != "ii") throw DataError("tasks: expected task=ii");
    InconsistencyInstance inst;
    inst.context = context_from_instance_json(j);
    inst.label = j.at("label").get<int>();
    inst.seed = j.at("seed").get<std::uint64_t>();
    if (inst.label < 0 || inst.label >= static_cast<int>(inst.context.utterances.size()))
        throw DataError("tasks: ii label out of range");
    return inst;
}

RetrievalInstance nur_instance_from_json(const nlohmann::json& j) {
    if (j.at("task").get<std::string>() != "nur") throw DataError("tasks: expected task=nur");
    RetrievalInstance inst;
    inst.context = context_from_instance_json(j);
    for (const auto& c : j.at("candidates")) inst.candidates.push_back(tokutt_from_json(c));
    inst.label = j.at("label").get<int>();
    inst.seed = j.at("seed").get<std::uint64_t>();
    if (inst.label < 0 || inst.label >= static_cast<int>(inst.candidates.size()))
        throw DataError("tasks: nur label out of range");
    return inst;
}

nlohmann::json metrics_to_json(const Metrics& m) {
    nlohmann::json recall = nlohmann::json::array();
    for (const auto& [n, v] : m.recall_at) recall.push_back(nlohmann::json::array({n, v}));
    return nlohmann::json{{"accuracy", m.accuracy}, {"recall_at", recall}, {"n_instances", m.n_instances}};
}

std::string metrics_table(const Metrics& m) {
    char buf[64];
    std::string out = "metric        value\n";
    std::snprintf(buf, sizeof(buf), "accuracy      %.4f\n", m.accuracy);
    out += buf;
    for (const auto& [n, v] : m.recall_at) {
        std::snprintf(buf, sizeof(buf), "recall@%-6d %.4f\n", n, v);
        out += buf;
    }
    std::snprintf(buf, sizeof(buf), "n_instances   %lld\n", m.n_instances);
    out += buf;
    return out;
}

}  // namespace dialopre::tasks
