#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dialopre/errors.hpp"
#include "dialopre/matrix.hpp"
#include "dialopre/rng.hpp"
#include "json.hpp"

// Exact mutual information on small discrete joints, and the contrastive
// (InfoNCE-style) lower bound computed by full enumeration.
//
// The bound is evaluated as an exact expectation rather than by sampling:
//
//   bound(f) = E_{p(a,b)}[ f(a,b) ] - E_{p(a)}[ ln E_{p(b~)}[ e^{f(a,b~)} ] ]
//
// i.e. the candidate set B~ is the whole of B, with each candidate weighted
// by its marginal probability p(b~).  Weighting by the marginal (instead of
// enumerating candidates uniformly and adding ln|B~|) is what makes the
// estimate a true lower bound on I(A;B) for *every* finite critic, including
// joints with non-uniform marginals; when the marginal is uniform the two
// forms coincide, since ln E_b[e^f] = ln((1/|B|)·Σ e^f) = ln Σ e^f − ln|B|.
// Equality holds at the optimal critic f*(a,b) = ln p(b|a)/p(b).
namespace dialopre::mi {

// A probability table over a pair of finite alphabets: p(a, b) with a indexing
// rows and b indexing columns.  Entries are non-negative and sum to one.
struct DiscreteJoint {
    Matrix p;

    int a_size() const { return p.rows(); }
    int b_size() const { return p.cols(); }

    // Row marginal p(a) and column marginal p(b).
    std::vector<double> marginal_a() const;
    std::vector<double> marginal_b() const;

    // Validates the table: at least 2x2, non-negative entries summing to one
    // within 1e-12.  Throws DataError otherwise.
    static DiscreteJoint from_matrix(Matrix table);
};

// Joint constructors used by tests and the mi-check / report commands.
DiscreteJoint random_joint(int a_size, int b_size, Rng& rng);
// Uniform mass on the diagonal of a K x K table (perfect dependence, MI = ln K).
DiscreteJoint diagonal_uniform(int k);
// Independent joint p(a,b) = pa(a) * pb(b) (MI = 0).
DiscreteJoint product_joint(const std::vector<double>& pa, const std::vector<double>& pb);
// Convex mixture w * x + (1 - w) * y of two same-shape joints; used to dial
// the MI of a fixture between 0 and ln K.
DiscreteJoint mix_joints(const DiscreteJoint& x, const DiscreteJoint& y, double w);

// A critic scores candidate pairs.  Either a dense table f(a,b), or a
// factored scalar product f(a,b) = <g_omega(a), g_psi(b)> with d-dimensional
// embedding tables.
struct Critic {
    bool factored = false;
    Matrix table;    // |A| x |B| when !factored
    Matrix g_omega;  // |A| x d when factored
    Matrix g_psi;    // |B| x d when factored

    static Critic full(Matrix scores);
    static Critic constant(int a_size, int b_size, double c);
    static Critic full_random(int a_size, int b_size, double sd, Rng& rng);
    static Critic factored_random(int a_size, int b_size, int d, double sd, Rng& rng);

    // Dense |A| x |B| score table (materialises the product when factored).
    Matrix scores() const;
};

struct BoundEstimate {
    double value = 0.0;           // nats
    int candidate_set_size = 0;   // |B~|, here always |B|
    bool exact = true;            // full enumeration vs Monte Carlo
    long long sample_count = 0;   // only meaningful when !exact
    double std_error = 0.0;       // only meaningful when !exact
};

// Exact mutual information in nats: sum p(a,b) ln[p(a,b) / (p(a) p(b))] with
// the 0 ln 0 = 0 convention.  Throws DataError on an invalid joint.
double true_mi(const DiscreteJoint& joint);

// Exact-expectation contrastive lower bound (see file header).  Requires the
// critic's shape to match the joint.  Throws NumericError if the critic or
// the resulting bound is non-finite.
BoundEstimate infonce_bound(const DiscreteJoint& joint, const Critic& critic);

// Monte Carlo variant for larger demos: samples n pairs (a, b) from the
// joint; the per-sample inner expectation over candidates stays exact, so the
// estimator is unbiased for the exact bound.  Reports the standard error.
BoundEstimate infonce_bound_mc(const DiscreteJoint& joint, const Critic& critic, long long n, Rng& rng);

// Gradient ascent on the bound.  factored=false trains a dense table critic;
// factored=true trains d-dimensional embedding tables (d >= 1).  Keeps the
// best critic seen, so the returned critic's bound is never below the initial
// one.  Throws NumericError if the bound diverges to a non-finite value.
Critic optimize_critic(const DiscreteJoint& joint, bool factored, int d, int steps, double lr,
                       std::uint64_t seed);

// ln of the candidate-set size |V|^L for a sentence-level bound: L * ln|V|.
// The count itself overflows for any realistic vocabulary, which is exactly
// why the token-level critic is used; this documents the size without ever
// enumerating it.
double log_candidate_count(std::size_t vocab_size, std::size_t utterance_len);

// Preset toy experiments pairing a masked target (b) with its surrounding
// masked context (a) at enumerable scale: token-in-utterance,
// utterance-in-context, and a bilingual variant with language-tagged targets.
struct ExperimentConfig {
    std::string name;
    int a_size = 0;
    int b_size = 0;
    bool factored = false;
    int d = 1;
    int steps = 300;
    double lr = 0.5;
    std::uint64_t seed = 0;
};

std::vector<ExperimentConfig> preset_experiments(std::uint64_t root_seed);

struct ExperimentReport {
    std::string joint_id;
    double true_mi = 0.0;
    double bound_initial = 0.0;
    double bound_final = 0.0;
    int candidate_set_size = 0;
    int steps = 0;
};

ExperimentReport run_experiment(const ExperimentConfig& config);
nlohmann::json report_to_json(const ExperimentReport& report);

}  // namespace dialopre::mi
