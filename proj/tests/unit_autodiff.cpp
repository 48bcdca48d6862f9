#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>
#include <vector>

#include "dialopre/autodiff.hpp"
#include "dialopre/rng.hpp"

using dialopre::Matrix;
using dialopre::Rng;
using dialopre::ad::Fault;
using dialopre::ad::Tape;

namespace {

// Builds a graph from leaf values and returns the loss node.
using Builder = std::function<int(Tape&, const std::vector<int>&)>;

Matrix randm(int r, int c, Rng& rng, double sd = 1.0) { return Matrix::randn(r, c, sd, rng); }

// Reduce an arbitrary node to 1x1 with a fixed random projection so any matrix
// output can be finite-difference checked through a scalar loss.
int scalarize(Tape& t, int node, uint64_t seed) {
    Rng rng(seed);
    const Matrix& v = t.value(node);
    int w = t.leaf(randm(v.rows(), v.cols(), rng), false);
    // sum(v .* w) = ones_r^T * (v .* w) * ones_c, via mean_rows + matmul
    int prod = t.mul_const(node, t.value(w));
    int mr = t.mean_rows(prod);  // 1 x c, scaled by 1/r
    int ones = t.leaf(Matrix(v.cols(), 1, 1.0), false);
    return t.matmul(mr, ones);  // 1 x 1
}

double run_loss(const Builder& build, const std::vector<Matrix>& inputs) {
    Tape t;
    std::vector<int> ids;
    ids.reserve(inputs.size());
    for (const auto& m : inputs) ids.push_back(t.leaf(m, true));
    return t.scalar(build(t, ids));
}

// Max relative error between analytic and central-difference gradients over
// every coordinate of every input.
double max_grad_rel_err(const Builder& build, std::vector<Matrix> inputs, Fault fault = Fault::none) {
    Tape t;
    if (fault != Fault::none) t.inject_fault(fault);
    std::vector<int> ids;
    for (const auto& m : inputs) ids.push_back(t.leaf(m, true));
    t.backward(build(t, ids));

    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        const Matrix& g = t.grad(ids[k]);  // untouched leaf == zero gradient
        for (std::size_t i = 0; i < inputs[k].size(); ++i) {
            const double keep = inputs[k][i];
            inputs[k][i] = keep + h;
            const double up = run_loss(build, inputs);
            inputs[k][i] = keep - h;
            const double dn = run_loss(build, inputs);
            inputs[k][i] = keep;
            const double fd = (up - dn) / (2.0 * h);
            const double an = g.empty() ? 0.0 : g[i];
            const double rel = std::fabs(fd - an) / std::max(1e-6, std::fabs(fd) + std::fabs(an));
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

}  // namespace

TEST_CASE("add and add_rowvec gradients match finite differences") {
    Rng rng(11);
    Builder badd = [](Tape& t, const std::vector<int>& in) { return scalarize(t, t.add(in[0], in[1]), 77); };
    CHECK(max_grad_rel_err(badd, {randm(3, 4, rng), randm(3, 4, rng)}) < 1e-5);

    Builder brow = [](Tape& t, const std::vector<int>& in) { return scalarize(t, t.add_rowvec(in[0], in[1]), 78); };
    CHECK(max_grad_rel_err(brow, {randm(3, 4, rng), randm(1, 4, rng)}) < 1e-5);
}

TEST_CASE("scale and mul_const gradients match finite differences") {
    Rng rng(12);
    Builder bs = [](Tape& t, const std::vector<int>& in) { return scalarize(t, t.scale(in[0], -2.5), 79); };
    CHECK(max_grad_rel_err(bs, {randm(2, 5, rng)}) < 1e-5);

    Rng mrng(13);
    Matrix mask = randm(2, 5, mrng);
    Builder bm = [mask](Tape& t, const std::vector<int>& in) { return scalarize(t, t.mul_const(in[0], mask), 80); };
    CHECK(max_grad_rel_err(bm, {randm(2, 5, rng)}) < 1e-5);
}

TEST_CASE("matmul and matmul_nt gradients match finite differences") {
    Rng rng(14);
    Builder bm = [](Tape& t, const std::vector<int>& in) { return scalarize(t, t.matmul(in[0], in[1]), 81); };
    CHECK(max_grad_rel_err(bm, {randm(3, 4, rng), randm(4, 2, rng)}) < 1e-5);

    Builder bnt = [](Tape& t, const std::vector<int>& in) { return scalarize(t, t.matmul_nt(in[0], in[1]), 82); };
    CHECK(max_grad_rel_err(bnt, {randm(3, 4, rng), randm(5, 4, rng)}) < 1e-5);
}

TEST_CASE("matmul_nt value equals matmul against explicit transpose") {
    Rng rng(15);
    Matrix a = randm(3, 4, rng), b = randm(5, 4, rng);
    Matrix bt(4, 5);
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 4; ++c) bt.at(c, r) = b.at(r, c);
    Tape t;
    int na = t.leaf(a, false), nb = t.leaf(b, false), nbt = t.leaf(bt, false);
    const Matrix& v1 = t.value(t.matmul_nt(na, nb));
    const Matrix& v2 = t.value(t.matmul(na, nbt));
    for (std::size_t i = 0; i < v1.size(); ++i) CHECK(v1[i] == doctest::Approx(v2[i]).epsilon(1e-12));
}

TEST_CASE("gelu matches closed form at fixed points and in gradient") {
    Tape t;
    Matrix x(1, 4);
    x.at(0, 0) = 0.0;
    x.at(0, 1) = 10.0;
    x.at(0, 2) = -10.0;
    x.at(0, 3) = 1.0;
    const Matrix& y = t.value(t.gelu(t.leaf(x, false)));
    CHECK(y.at(0, 0) == 0.0);
    CHECK(y.at(0, 1) == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(std::fabs(y.at(0, 2)) < 1e-12);
    // 0.5 * (1 + erf(1/sqrt(2))) = Phi(1) = 0.8413447460685429
    CHECK(y.at(0, 3) == doctest::Approx(0.8413447460685429).epsilon(1e-12));

    Rng rng(16);
    Builder b = [](Tape& tt, const std::vector<int>& in) { return scalarize(tt, tt.gelu(in[0]), 83); };
    CHECK(max_grad_rel_err(b, {randm(3, 3, rng)}) < 1e-5);
}

TEST_CASE("layer_norm normalizes rows and all three gradients check out") {
    Rng rng(17);
    Matrix x = randm(4, 6, rng, 2.0);
    Tape t;
    int nx = t.leaf(x, false);
    int ng = t.leaf(Matrix(1, 6, 1.0), false);
    int nb = t.leaf(Matrix(1, 6, 0.0), false);
    const Matrix& y = t.value(t.layer_norm(nx, ng, nb));
    for (int r = 0; r < 4; ++r) {
        double mu = 0.0, var = 0.0;
        for (int c = 0; c < 6; ++c) mu += y.at(r, c);
        mu /= 6;
        for (int c = 0; c < 6; ++c) var += (y.at(r, c) - mu) * (y.at(r, c) - mu);
        var /= 6;
        CHECK(std::fabs(mu) < 1e-12);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-4));  // (1 + eps/sigma^2)^-1 off from 1 by ~eps
    }

    Builder b = [](Tape& tt, const std::vector<int>& in) {
        return scalarize(tt, tt.layer_norm(in[0], in[1], in[2]), 84);
    };
    CHECK(max_grad_rel_err(b, {randm(4, 6, rng), randm(1, 6, rng), randm(1, 6, rng)}) < 1e-5);
}

TEST_CASE("layer_norm of a constant row returns beta") {
    Tape t;
    Matrix x(2, 3, 5.0);
    Matrix beta(1, 3);
    beta.at(0, 0) = -1.0;
    beta.at(0, 1) = 0.5;
    beta.at(0, 2) = 2.0;
    const Matrix& y = t.value(t.layer_norm(t.leaf(x, false), t.leaf(Matrix(1, 3, 1.0), false), t.leaf(beta, false)));
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 3; ++c) CHECK(y.at(r, c) == doctest::Approx(beta.at(0, c)).epsilon(1e-12));
}

TEST_CASE("softmax_rows: rows sum to one, causal mask zeroes the upper triangle") {
    Rng rng(18);
    Matrix x = randm(4, 4, rng, 3.0);
    Tape t;
    const Matrix& p = t.value(t.softmax_rows(t.leaf(x, false), true));
    for (int r = 0; r < 4; ++r) {
        double s = 0.0;
        for (int c = 0; c < 4; ++c) {
            if (c > r) CHECK(p.at(r, c) == 0.0);
            s += p.at(r, c);
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK(p.at(0, 0) == 1.0);

    Builder bplain = [](Tape& tt, const std::vector<int>& in) {
        return scalarize(tt, tt.softmax_rows(in[0], false), 85);
    };
    CHECK(max_grad_rel_err(bplain, {randm(3, 5, rng)}) < 1e-5);

    Builder bcausal = [](Tape& tt, const std::vector<int>& in) {
        return scalarize(tt, tt.softmax_rows(in[0], true), 86);
    };
    CHECK(max_grad_rel_err(bcausal, {randm(4, 4, rng)}) < 1e-5);
}

TEST_CASE("softmax is shift invariant (large logits stay finite)") {
    Tape t;
    Matrix x(1, 3);
    x.at(0, 0) = 1000.0;
    x.at(0, 1) = 1000.0;
    x.at(0, 2) = -1000.0;
    const Matrix& p = t.value(t.softmax_rows(t.leaf(x, false), false));
    CHECK(p.all_finite());
    CHECK(p.at(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(p.at(0, 2) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("mean_rows, concat_rows and select_rows gradients match finite differences") {
    Rng rng(19);
    Builder bmr = [](Tape& t, const std::vector<int>& in) { return scalarize(t, t.mean_rows(in[0]), 87); };
    CHECK(max_grad_rel_err(bmr, {randm(5, 3, rng)}) < 1e-5);

    Builder bcat = [](Tape& t, const std::vector<int>& in) {
        return scalarize(t, t.concat_rows({in[0], in[1], in[2]}), 88);
    };
    CHECK(max_grad_rel_err(bcat, {randm(2, 3, rng), randm(1, 3, rng), randm(4, 3, rng)}) < 1e-5);

    // duplicate indices exercise the scatter-add path
    Builder bsel = [](Tape& t, const std::vector<int>& in) {
        return scalarize(t, t.select_rows(in[0], {0, 2, 0, 3}), 89);
    };
    CHECK(max_grad_rel_err(bsel, {randm(4, 3, rng)}) < 1e-5);
}

TEST_CASE("cross_entropy_sum frozen oracle: logits (1,0,0), target 0") {
    Tape t;
    Matrix logits(1, 3);
    logits.at(0, 0) = 1.0;
    // ln(e + 2) - 1
    int loss = t.cross_entropy_sum(t.leaf(logits, false), {0});
    CHECK(t.scalar(loss) == doctest::Approx(0.5514447139320511).epsilon(1e-15));
}

TEST_CASE("cross_entropy_sum of all-zero logits is exactly ln(vocab) per row") {
    Tape t;
    Matrix logits(4, 7);
    int loss = t.cross_entropy_sum(t.leaf(logits, false), {0, 3, 6, 2});
    CHECK(t.scalar(loss) == doctest::Approx(4.0 * std::log(7.0)).epsilon(1e-15));
}

TEST_CASE("cross_entropy_sum gradient matches finite differences") {
    Rng rng(20);
    Builder b = [](Tape& t, const std::vector<int>& in) { return t.cross_entropy_sum(in[0], {1, 0, 2}); };
    CHECK(max_grad_rel_err(b, {randm(3, 4, rng)}) < 1e-5);
}

TEST_CASE("weighted_sum_scalars combines losses with the given weights") {
    Rng rng(21);
    Builder b = [](Tape& t, const std::vector<int>& in) {
        int l1 = t.cross_entropy_sum(in[0], {0, 1});
        int l2 = t.cross_entropy_sum(in[1], {2});
        return t.weighted_sum_scalars({l1, l2}, {0.7, 1.3});
    };
    std::vector<Matrix> inputs = {randm(2, 3, rng), randm(1, 3, rng)};
    CHECK(max_grad_rel_err(b, inputs) < 1e-5);

    Tape t;
    int a = t.leaf(inputs[0], false), c = t.leaf(inputs[1], false);
    int l1 = t.cross_entropy_sum(a, {0, 1});
    int l2 = t.cross_entropy_sum(c, {2});
    int w = t.weighted_sum_scalars({l1, l2}, {0.7, 1.3});
    CHECK(t.scalar(w) == doctest::Approx(0.7 * t.scalar(l1) + 1.3 * t.scalar(l2)).epsilon(1e-14));
}

TEST_CASE("gradients accumulate through shared subexpressions") {
    Rng rng(22);
    Builder b = [](Tape& t, const std::vector<int>& in) {
        int p1 = t.matmul(in[0], in[1]);
        int p2 = t.matmul(in[0], in[2]);
        return scalarize(t, t.add(p1, p2), 90);  // in[0] feeds two paths
    };
    CHECK(max_grad_rel_err(b, {randm(3, 3, rng), randm(3, 2, rng), randm(3, 2, rng)}) < 1e-5);
}

TEST_CASE("composite transformer-style graph passes the finite-difference check") {
    Rng rng(23);
    Builder b = [](Tape& t, const std::vector<int>& in) {
        // attention-ish: softmax((x Wq)(x Wk)^T) (x Wv), then LN + gelu + CE
        int q = t.matmul(in[0], in[1]);
        int k = t.matmul(in[0], in[2]);
        int v = t.matmul(in[0], in[3]);
        int att = t.softmax_rows(t.scale(t.matmul_nt(q, k), 0.5), true);
        int mix = t.add(in[0], t.matmul(att, v));
        int normed = t.layer_norm(mix, in[4], in[5]);
        int hidden = t.gelu(t.matmul(normed, in[6]));
        int logits = t.matmul_nt(hidden, in[7]);
        return t.cross_entropy_sum(logits, {1, 0, 2, 1});
    };
    std::vector<Matrix> inputs = {randm(4, 4, rng),           randm(4, 4, rng), randm(4, 4, rng), randm(4, 4, rng),
                                  randm(1, 4, rng, 0.2),      randm(1, 4, rng), randm(4, 4, rng), randm(3, 4, rng)};
    inputs[4].at(0, 0) += 1.0;  // keep gamma away from zero
    inputs[4].at(0, 1) += 1.0;
    inputs[4].at(0, 2) += 1.0;
    inputs[4].at(0, 3) += 1.0;
    CHECK(max_grad_rel_err(b, inputs) < 1e-5);
    CHECK(max_grad_rel_err(b, inputs, Fault::drop_softmax_grad) > 1e-2);  // fault must be detectable
}

TEST_CASE("backward rejects a non-scalar loss") {
    Tape t;
    Rng rng(24);
    int a = t.leaf(randm(2, 2, rng), true);
    CHECK_THROWS_AS(t.backward(a), std::invalid_argument);
}
