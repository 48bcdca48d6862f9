#pragma once

#include <utility>
#include <vector>

#include "dialopre/model.hpp"
#include "dialopre/objectives.hpp"

namespace dialopre {

// -------------------------------------------------------------------- adamw

struct AdamWConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
    int warmup_steps = 100;  // the published setup uses 4000; desk-scale default 100
};

// Adam with decoupled weight decay; linear warmup then inverse-sqrt decay.
// Works over any fixed list of tensors; the ModelParams overloads adapt the
// full model, the vector overloads serve small parameter sets (task heads).
class AdamW {
public:
    AdamW(const std::vector<Matrix>& shapes, AdamWConfig cfg);
    AdamW(const ModelParams& shapes, AdamWConfig cfg);

    // base_lr * min((t+1)/warmup, sqrt(warmup/(t+1))) for 0-based step t.
    double effective_lr(long long t) const;

    // One update; throws NumericError on non-finite gradients. Empty gradient
    // slots count as zero.
    void step(std::vector<Matrix>& params, const std::vector<Matrix>& grads);
    void step(ModelParams& params, const Gradients& grads);

    long long steps_taken() const { return t_; }
    const AdamWConfig& config() const { return cfg_; }

private:
    AdamWConfig cfg_;
    long long t_ = 0;
    std::vector<Matrix> m_, v_;
};

// -------------------------------------------------------------- batch losses

// One pretraining batch: token-level masked items plus corrupted contexts.
struct TrainBatch {
    std::vector<std::pair<std::vector<int>, MaskPlan>> mum_items;
    std::vector<CorruptedContext> gen_items;
};

// lambda_u * mean(utterance losses) + lambda_d * mean(context losses); either
// side may be empty (contributes zero), not both. Returns a 1x1 node.
int batch_loss_graph(graph::Ctx& ctx, const TrainBatch& batch, const Vocabulary& vocab, double lambda_u = 1.0,
                     double lambda_d = 1.0);

// The same quantity without a graph, for eval loops.
LossValue batch_loss(const ModelParams& params, const TrainBatch& batch, const Vocabulary& vocab,
                     double lambda_u = 1.0, double lambda_d = 1.0);

// ------------------------------------------------------------ gradient check

struct GradCheckResult {
    double max_rel_error = 0.0;
    int coords_checked = 0;
};

// Central finite differences over >= min_coords randomly sampled parameter
// coordinates of the batch loss; relative error uses a 1e-3 denominator floor
// so FD noise on near-zero gradients does not read as failure. `fault` injects
// a deliberate backward-pass defect to prove the harness can catch one.
GradCheckResult gradient_check(const ModelParams& params, const TrainBatch& batch, const Vocabulary& vocab,
                               double epsilon = 1e-5, int min_coords = 200, uint64_t seed = 7,
                               ad::Fault fault = ad::Fault::none);

}  // namespace dialopre
