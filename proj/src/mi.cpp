#include "dialopre/mi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dialopre::mi {

namespace {

// Stable ln E_{b~pb}[exp f(a, b)] for one row of scores.
double log_weighted_sumexp(const double* f, const std::vector<double>& pb) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < pb.size(); ++b) {
        if (pb[b] > 0.0 && f[b] > m) m = f[b];
    }
    double s = 0.0;
    for (std::size_t b = 0; b < pb.size(); ++b) {
        if (pb[b] > 0.0) s += pb[b] * std::exp(f[b] - m);
    }
    if (!(s > 0.0) || !std::isfinite(m)) throw NumericError("infonce_bound: candidate normaliser underflowed");
    return m + std::log(s);
}

}  // namespace

std::vector<double> DiscreteJoint::marginal_a() const {
    std::vector<double> pa(static_cast<std::size_t>(p.rows()), 0.0);
    for (int a = 0; a < p.rows(); ++a)
        for (int b = 0; b < p.cols(); ++b) pa[static_cast<std::size_t>(a)] += p.at(a, b);
    return pa;
}

std::vector<double> DiscreteJoint::marginal_b() const {
    std::vector<double> pb(static_cast<std::size_t>(p.cols()), 0.0);
    for (int a = 0; a < p.rows(); ++a)
        for (int b = 0; b < p.cols(); ++b) pb[static_cast<std::size_t>(b)] += p.at(a, b);
    return pb;
}

DiscreteJoint DiscreteJoint::from_matrix(Matrix table) {
    if (table.rows() < 2 || table.cols() < 2) throw DataError("DiscreteJoint: table must be at least 2x2");
    double sum = 0.0;
    for (std::size_t i = 0; i < table.size(); ++i) {
        const double v = table[i];
        if (!std::isfinite(v) || v < 0.0) throw DataError("DiscreteJoint: entries must be finite and non-negative");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw DataError("DiscreteJoint: entries must sum to 1 within 1e-12");
    DiscreteJoint j;
    j.p = std::move(table);
    return j;
}

DiscreteJoint random_joint(int a_size, int b_size, Rng& rng) {
    if (a_size < 2 || b_size < 2) throw DataError("random_joint: sizes must be at least 2");
    Matrix m(a_size, b_size);
    double sum = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        // Exp(1) draws normalised to the simplex (flat Dirichlet).
        m[i] = -std::log(1.0 - rng.uniform01());
        sum += m[i];
    }
    for (std::size_t i = 0; i < m.size(); ++i) m[i] /= sum;
    // Absorb normalisation round-off into the largest cell so the table sums
    // to one exactly.
    double resid = 1.0;
    std::size_t argmax = 0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        resid -= m[i];
        if (m[i] > m[argmax]) argmax = i;
    }
    m[argmax] += resid;
    return DiscreteJoint::from_matrix(std::move(m));
}

DiscreteJoint diagonal_uniform(int k) {
    if (k < 2) throw DataError("diagonal_uniform: k must be at least 2");
    Matrix m(k, k);
    for (int i = 0; i < k; ++i) m.at(i, i) = 1.0 / k;
    return DiscreteJoint::from_matrix(std::move(m));
}

DiscreteJoint product_joint(const std::vector<double>& pa, const std::vector<double>& pb) {
    auto check = [](const std::vector<double>& d, const char* name) {
        if (d.size() < 2) throw DataError(std::string("product_joint: ") + name + " needs at least 2 entries");
        double s = 0.0;
        for (double v : d) {
            if (!std::isfinite(v) || v < 0.0)
                throw DataError(std::string("product_joint: ") + name + " entries must be finite and non-negative");
            s += v;
        }
        if (std::abs(s - 1.0) > 1e-12)
            throw DataError(std::string("product_joint: ") + name + " must sum to 1 within 1e-12");
    };
    check(pa, "pa");
    check(pb, "pb");
    Matrix m(static_cast<int>(pa.size()), static_cast<int>(pb.size()));
    for (std::size_t a = 0; a < pa.size(); ++a)
        for (std::size_t b = 0; b < pb.size(); ++b) m.at(static_cast<int>(a), static_cast<int>(b)) = pa[a] * pb[b];
    return DiscreteJoint::from_matrix(std::move(m));
}

DiscreteJoint mix_joints(const DiscreteJoint& x, const DiscreteJoint& y, double w) {
    if (!x.p.same_shape(y.p)) throw DataError("mix_joints: shape mismatch");
    if (!(w >= 0.0 && w <= 1.0)) throw DataError("mix_joints: weight must lie in [0, 1]");
    Matrix m(x.p.rows(), x.p.cols());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = w * x.p[i] + (1.0 - w) * y.p[i];
    return DiscreteJoint::from_matrix(std::move(m));
}

Critic Critic::full(Matrix scores) {
    if (scores.rows() < 1 || scores.cols() < 2) throw DataError("Critic::full: score table must be |A| x |B| with |B| >= 2");
    if (!scores.all_finite()) throw NumericError("Critic::full: scores must be finite");
    Critic c;
    c.factored = false;
    c.table = std::move(scores);
    return c;
}

Critic Critic::constant(int a_size, int b_size, double c) {
    if (!std::isfinite(c)) throw NumericError("Critic::constant: value must be finite");
    return full(Matrix(a_size, b_size, c));
}

Critic Critic::full_random(int a_size, int b_size, double sd, Rng& rng) {
    return full(Matrix::randn(a_size, b_size, sd, rng));
}

Critic Critic::factored_random(int a_size, int b_size, int d, double sd, Rng& rng) {
    if (d < 1) throw DataError("Critic::factored_random: d must be at least 1");
    if (a_size < 1 || b_size < 2) throw DataError("Critic::factored_random: need |A| >= 1, |B| >= 2");
    Critic c;
    c.factored = true;
    c.g_omega = Matrix::randn(a_size, d, sd, rng);
    c.g_psi = Matrix::randn(b_size, d, sd, rng);
    return c;
}

Matrix Critic::scores() const {
    if (!factored) return table;
    Matrix f(g_omega.rows(), g_psi.rows());
    for (int a = 0; a < f.rows(); ++a) {
        for (int b = 0; b < f.cols(); ++b) {
            double s = 0.0;
            for (int k = 0; k < g_omega.cols(); ++k) s += g_omega.at(a, k) * g_psi.at(b, k);
            f.at(a, b) = s;
        }
    }
    return f;
}

double true_mi(const DiscreteJoint& joint) {
    // Revalidate so values constructed by hand still meet the invariants.
    (void)DiscreteJoint::from_matrix(joint.p);
    const auto pa = joint.marginal_a();
    const auto pb = joint.marginal_b();
    double mi = 0.0;
    for (int a = 0; a < joint.a_size(); ++a) {
        for (int b = 0; b < joint.b_size(); ++b) {
            const double pab = joint.p.at(a, b);
            if (pab > 0.0) mi += pab * std::log(pab / (pa[static_cast<std::size_t>(a)] * pb[static_cast<std::size_t>(b)]));
        }
    }
    return mi;
}

BoundEstimate infonce_bound(const DiscreteJoint& joint, const Critic& critic) {
    const Matrix f = critic.scores();
    if (f.rows() != joint.a_size() || f.cols() != joint.b_size())
        throw DataError("infonce_bound: critic shape does not match joint");
    if (!f.all_finite()) throw NumericError("infonce_bound: critic contains non-finite scores");
    const auto pa = joint.marginal_a();
    const auto pb = joint.marginal_b();
    double value = 0.0;
    for (int a = 0; a < joint.a_size(); ++a) {
        for (int b = 0; b < joint.b_size(); ++b) {
            const double pab = joint.p.at(a, b);
            if (pab > 0.0) value += pab * f.at(a, b);
        }
        if (pa[static_cast<std::size_t>(a)] > 0.0)
            value -= pa[static_cast<std::size_t>(a)] * log_weighted_sumexp(f.row(a), pb);
    }
    if (!std::isfinite(value)) throw NumericError("infonce_bound: bound is non-finite");
    BoundEstimate e;
    e.value = value;
    e.candidate_set_size = joint.b_size();
    e.exact = true;
    return e;
}

BoundEstimate infonce_bound_mc(const DiscreteJoint& joint, const Critic& critic, long long n, Rng& rng) {
    if (n < 2) throw DataError("infonce_bound_mc: need at least 2 samples");
    const Matrix f = critic.scores();
    if (f.rows() != joint.a_size() || f.cols() != joint.b_size())
        throw DataError("infonce_bound_mc: critic shape does not match joint");
    if (!f.all_finite()) throw NumericError("infonce_bound_mc: critic contains non-finite scores");
    const auto pa = joint.marginal_a();
    const auto pb = joint.marginal_b();
    std::vector<double> log_z(static_cast<std::size_t>(joint.a_size()), 0.0);
    for (int a = 0; a < joint.a_size(); ++a) {
        if (pa[static_cast<std::size_t>(a)] > 0.0) log_z[static_cast<std::size_t>(a)] = log_weighted_sumexp(f.row(a), pb);
    }
    // Cumulative distribution over flattened cells for inverse-CDF sampling.
    std::vector<double> cdf(joint.p.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < joint.p.size(); ++i) {
        acc += joint.p[i];
        cdf[i] = acc;
    }
    double mean = 0.0, m2 = 0.0;
    for (long long i = 0; i < n; ++i) {
        const double u = rng.uniform01() * acc;
        const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
        const std::size_t cell = static_cast<std::size_t>(it - cdf.begin());
        const int a = static_cast<int>(cell) / joint.b_size();
        const int b = static_cast<int>(cell) % joint.b_size();
        const double x = f.at(a, b) - log_z[static_cast<std::size_t>(a)];
        // Welford running mean/variance.
        const double delta = x - mean;
        mean += delta / static_cast<double>(i + 1);
        m2 += delta * (x - mean);
    }
    BoundEstimate e;
    e.value = mean;
    e.candidate_set_size = joint.b_size();
    e.exact = false;
    e.sample_count = n;
    e.std_error = std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n));
    return e;
}

namespace {

struct OptimizeTrace {
    Critic critic;
    double bound_initial = 0.0;
    double bound_final = 0.0;
};

OptimizeTrace optimize_critic_traced(const DiscreteJoint& joint, bool factored, int d, int steps, double lr,
                                     std::uint64_t seed) {
    if (d < 1) throw DataError("optimize_critic: d must be at least 1");
    if (steps < 0) throw DataError("optimize_critic: steps must be non-negative");
    if (!(lr > 0.0) || !std::isfinite(lr)) throw DataError("optimize_critic: lr must be positive and finite");
    Rng rng(substream_seed(seed, "critic_init"));
    Critic critic = factored ? Critic::factored_random(joint.a_size(), joint.b_size(), d, 0.1, rng)
                             : Critic::full_random(joint.a_size(), joint.b_size(), 0.1, rng);
    const auto pa = joint.marginal_a();
    const auto pb = joint.marginal_b();

    OptimizeTrace trace;
    trace.critic = critic;
    trace.bound_initial = infonce_bound(joint, critic).value;
    double best = trace.bound_initial;

    for (int step = 0; step < steps; ++step) {
        const Matrix f = critic.scores();
        if (!f.all_finite()) throw NumericError("optimize_critic: diverged to non-finite scores");
        // d(bound)/d f(a,b) = p(a,b) - p(a) p(b) e^{f(a,b)} / Z_a with
        // Z_a = sum_b~ p(b~) e^{f(a,b~)} (softmax of f over b under p(b)).
        Matrix grad(joint.a_size(), joint.b_size());
        for (int a = 0; a < joint.a_size(); ++a) {
            const double paa = pa[static_cast<std::size_t>(a)];
            if (paa <= 0.0) continue;
            const double log_z = log_weighted_sumexp(f.row(a), pb);
            for (int b = 0; b < joint.b_size(); ++b) {
                const double soft = pb[static_cast<std::size_t>(b)] > 0.0
                                        ? pb[static_cast<std::size_t>(b)] * std::exp(f.at(a, b) - log_z)
                                        : 0.0;
                grad.at(a, b) = joint.p.at(a, b) - paa * soft;
            }
        }
        if (critic.factored) {
            // Chain rule through f = g_omega g_psi^T, both deltas from the
            // pre-update tables.
            Matrix d_omega(critic.g_omega.rows(), critic.g_omega.cols());
            Matrix d_psi(critic.g_psi.rows(), critic.g_psi.cols());
            for (int a = 0; a < grad.rows(); ++a)
                for (int b = 0; b < grad.cols(); ++b)
                    for (int k = 0; k < d; ++k) {
                        d_omega.at(a, k) += grad.at(a, b) * critic.g_psi.at(b, k);
                        d_psi.at(b, k) += grad.at(a, b) * critic.g_omega.at(a, k);
                    }
            for (std::size_t i = 0; i < critic.g_omega.size(); ++i) critic.g_omega[i] += lr * d_omega[i];
            for (std::size_t i = 0; i < critic.g_psi.size(); ++i) critic.g_psi[i] += lr * d_psi[i];
        } else {
            for (std::size_t i = 0; i < critic.table.size(); ++i) critic.table[i] += lr * grad[i];
        }
        const double bound = infonce_bound(joint, critic).value;
        if (!std::isfinite(bound)) throw NumericError("optimize_critic: bound diverged");
        if (bound > best) {
            best = bound;
            trace.critic = critic;
        }
    }
    trace.bound_final = best;
    return trace;
}

}  // namespace

Critic optimize_critic(const DiscreteJoint& joint, bool factored, int d, int steps, double lr, std::uint64_t seed) {
    return optimize_critic_traced(joint, factored, d, steps, lr, seed).critic;
}

double log_candidate_count(std::size_t vocab_size, std::size_t utterance_len) {
    if (vocab_size < 2) throw DataError("log_candidate_count: vocab_size must be at least 2");
    if (utterance_len < 1) throw DataError("log_candidate_count: utterance_len must be at least 1");
    return static_cast<double>(utterance_len) * std::log(static_cast<double>(vocab_size));
}

std::vector<ExperimentConfig> preset_experiments(std::uint64_t root_seed) {
    std::vector<ExperimentConfig> out;
    // Masked token against its surrounding utterance context, dense critic.
    out.push_back({"token_in_utterance", 12, 10, false, 1, 300, 0.5, substream_seed(root_seed, "preset", 0)});
    // Masked utterance against its dialog context, factored critic.
    out.push_back({"utterance_in_context", 16, 8, true, 8, 400, 0.5, substream_seed(root_seed, "preset", 1)});
    // Bilingual variant: targets carry a language tag, doubling |B|.
    out.push_back({"bilingual_targets", 12, 16, true, 6, 400, 0.5, substream_seed(root_seed, "preset", 2)});
    return out;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
    if (config.a_size < 2 || config.b_size < 2) throw DataError("run_experiment: sizes must be at least 2");
    // A structured joint at enumerable scale: each context prefers one target
    // cell, mixed with a flat random component so MI sits strictly between 0
    // and ln|B|.
    Rng rng(substream_seed(config.seed, "joint"));
    DiscreteJoint base = random_joint(config.a_size, config.b_size, rng);
    Matrix peaked(config.a_size, config.b_size);
    for (int a = 0; a < config.a_size; ++a) peaked.at(a, a % config.b_size) = 1.0 / config.a_size;
    const DiscreteJoint joint = mix_joints(DiscreteJoint::from_matrix(std::move(peaked)), base, 0.5);

    const auto trace = optimize_critic_traced(joint, config.factored, config.d, config.steps, config.lr, config.seed);
    ExperimentReport r;
    r.joint_id = config.name + "-" + std::to_string(config.seed);
    r.true_mi = true_mi(joint);
    r.bound_initial = trace.bound_initial;
    r.bound_final = trace.bound_final;
    r.candidate_set_size = joint.b_size();
    r.steps = config.steps;
    return r;
}

nlohmann::json report_to_json(const ExperimentReport& report) {
    return nlohmann::json{{"joint_id", report.joint_id},       {"true_mi", report.true_mi},
                          {"bound_initial", report.bound_initial}, {"bound_final", report.bound_final},
                          {"candidate_set_size", report.candidate_set_size}, {"steps", report.steps}};
}

}  // namespace dialopre::mi
