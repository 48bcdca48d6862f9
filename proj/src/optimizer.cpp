#include "dialopre/optimizer.hpp"

#include <algorithm>
#include <cmath>

#include "dialopre/errors.hpp"

namespace dialopre {

// -------------------------------------------------------------------- adamw

AdamW::AdamW(const std::vector<Matrix>& shapes, AdamWConfig cfg) : cfg_(cfg) {
    if (cfg_.warmup_steps < 1) throw DataError("adamw: warmup_steps must be >= 1");
    if (cfg_.lr <= 0.0) throw DataError("adamw: lr must be positive");
    m_.reserve(shapes.size());
    v_.reserve(shapes.size());
    for (const auto& t : shapes) {
        m_.emplace_back(t.rows(), t.cols());
        v_.emplace_back(t.rows(), t.cols());
    }
}

AdamW::AdamW(const ModelParams& shapes, AdamWConfig cfg) : AdamW(shapes.tensors, cfg) {}

double AdamW::effective_lr(long long t) const {
    const double w = static_cast<double>(cfg_.warmup_steps);
    const double s = static_cast<double>(t + 1);
    return cfg_.lr * std::min(s / w, std::sqrt(w / s));
}

void AdamW::step(std::vector<Matrix>& params, const std::vector<Matrix>& grads) {
    if (params.size() != m_.size() || grads.size() != m_.size())
        throw DataError("adamw: parameter/gradient layout mismatch");
    for (const auto& g : grads)
        if (!g.empty() && !g.all_finite()) throw NumericError("adamw: non-finite gradient");

    const double lr = effective_lr(t_);
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_ + 1));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_ + 1));
    for (std::size_t k = 0; k < params.size(); ++k) {
        Matrix& theta = params[k];
        Matrix& m = m_[k];
        Matrix& v = v_[k];
        const Matrix& g = grads[k];
        const bool zero_grad = g.empty();
        if (!zero_grad && !g.same_shape(theta)) throw DataError("adamw: gradient shape mismatch");
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double gi = zero_grad ? 0.0 : g[i];
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            theta[i] -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * theta[i]);
        }
    }
    ++t_;
}

void AdamW::step(ModelParams& params, const Gradients& grads) { step(params.tensors, grads.g); }

// -------------------------------------------------------------- batch losses

int batch_loss_graph(graph::Ctx& ctx, const TrainBatch& batch, const Vocabulary& vocab, double lambda_u,
                     double lambda_d) {
    if (batch.mum_items.empty() && batch.gen_items.empty()) throw DataError("batch_loss: empty batch");
    std::vector<int> nodes;
    std::vector<double> weights;
    for (const auto& [utt, plan] : batch.mum_items) {
        nodes.push_back(losses::utterance_loss_graph(ctx, utt, plan, vocab));
        weights.push_back(lambda_u / static_cast<double>(batch.mum_items.size()));
    }
    for (const auto& cc : batch.gen_items) {
        nodes.push_back(losses::context_loss_graph(ctx, cc, vocab));
        weights.push_back(lambda_d / static_cast<double>(batch.gen_items.size()));
    }
    return ctx.tape.weighted_sum_scalars(nodes, weights);
}

LossValue batch_loss(const ModelParams& params, const TrainBatch& batch, const Vocabulary& vocab, double lambda_u,
                     double lambda_d) {
    if (batch.mum_items.empty() && batch.gen_items.empty()) throw DataError("batch_loss: empty batch");
    double u_part = 0.0, d_part = 0.0;
    long long tokens = 0;
    for (const auto& [utt, plan] : batch.mum_items) {
        u_part += utterance_loss(params, utt, plan, vocab) / static_cast<double>(batch.mum_items.size());
        tokens += static_cast<long long>(plan.target_tokens.size());
    }
    for (const auto& cc : batch.gen_items) {
        d_part += context_loss(params, cc, vocab) / static_cast<double>(batch.gen_items.size());
        for (const auto& t : cc.targets) tokens += static_cast<long long>(t.ids.size());
    }
    LossValue v = total_loss(u_part, d_part, lambda_u, lambda_d);
    v.token_count = tokens;
    return v;
}

// ------------------------------------------------------------ gradient check

GradCheckResult gradient_check(const ModelParams& params, const TrainBatch& batch, const Vocabulary& vocab,
                               double epsilon, int min_coords, uint64_t seed, ad::Fault fault) {
    // analytic pass
    ad::Tape tape;
    if (fault != ad::Fault::none) tape.inject_fault(fault);
    GraphParams gp(tape, params, true);
    graph::Ctx ctx{tape, gp, params.config, nullptr};
    tape.backward(batch_loss_graph(ctx, batch, vocab));
    const Gradients grads = gp.collect();

    const auto eval = [&](const ModelParams& p) {
        ad::Tape t;
        GraphParams g(t, p, false);
        graph::Ctx c{t, g, p.config, nullptr};
        return t.scalar(batch_loss_graph(c, batch, vocab));
    };

    // flat coordinate space over all tensors
    std::vector<std::size_t> tensor_base{0};
    for (const auto& t : params.tensors) tensor_base.push_back(tensor_base.back() + t.size());
    const std::size_t total = tensor_base.back();
    const std::size_t want = std::min<std::size_t>(total, static_cast<std::size_t>(min_coords));

    Rng rng(substream_seed(seed, "grad_check"));
    std::vector<std::size_t> coords;
    if (want == total) {
        for (std::size_t i = 0; i < total; ++i) coords.push_back(i);
    } else {
        // sample distinct flat indices
        std::vector<int> picks = rng.sample_without_replacement(static_cast<int>(total), static_cast<int>(want));
        for (int p : picks) coords.push_back(static_cast<std::size_t>(p));
    }

    ModelParams work = params;
    GradCheckResult res;
    for (std::size_t flat : coords) {
        const auto ti = static_cast<std::size_t>(
            std::upper_bound(tensor_base.begin(), tensor_base.end(), flat) - tensor_base.begin() - 1);
        const std::size_t off = flat - tensor_base[ti];
        double& coord = work.tensors[ti][off];
        const double keep = coord;
        coord = keep + epsilon;
        const double up = eval(work);
        coord = keep - epsilon;
        const double dn = eval(work);
        coord = keep;
        const double fd = (up - dn) / (2.0 * epsilon);
        const double an = grads.g[ti].empty() ? 0.0 : grads.g[ti][off];
        const double rel = std::fabs(fd - an) / std::max(1e-3, std::fabs(fd) + std::fabs(an));
        res.max_rel_error = std::max(res.max_rel_error, rel);
        ++res.coords_checked;
    }
    return res;
}

}  // namespace dialopre
