#include "dialopre/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace dialopre::ad {

namespace {

void matmul_acc(const Matrix& a, const Matrix& b, Matrix& out) {
    // out += a * b, ikj order
    const int n = a.rows(), k = a.cols(), m = b.cols();
    for (int i = 0; i < n; ++i) {
        const double* ai = a.row(i);
        double* oi = out.row(i);
        for (int p = 0; p < k; ++p) {
            const double av = ai[p];
            if (av == 0.0) continue;
            const double* bp = b.row(p);
            for (int j = 0; j < m; ++j) oi[j] += av * bp[j];
        }
    }
}

void matmul_nt_acc(const Matrix& a, const Matrix& b, Matrix& out) {
    // out += a * b^T
    const int n = a.rows(), k = a.cols(), m = b.rows();
    for (int i = 0; i < n; ++i) {
        const double* ai = a.row(i);
        double* oi = out.row(i);
        for (int j = 0; j < m; ++j) {
            const double* bj = b.row(j);
            double s = 0.0;
            for (int p = 0; p < k; ++p) s += ai[p] * bj[p];
            oi[j] += s;
        }
    }
}

void matmul_tn_acc(const Matrix& a, const Matrix& b, Matrix& out) {
    // out += a^T * b   (a: n x k, b: n x m, out: k x m)
    const int n = a.rows(), k = a.cols(), m = b.cols();
    for (int i = 0; i < n; ++i) {
        const double* ai = a.row(i);
        const double* bi = b.row(i);
        for (int p = 0; p < k; ++p) {
            const double av = ai[p];
            if (av == 0.0) continue;
            double* op = out.row(p);
            for (int j = 0; j < m; ++j) op[j] += av * bi[j];
        }
    }
}

double gelu_grad(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return cdf + x * pdf;
}

}  // namespace

int Tape::push(Matrix value, bool requires_grad, std::function<void()> backprop) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

Matrix& Tape::grad_ref(int node) {
    Node& n = nodes_[static_cast<std::size_t>(node)];
    if (n.grad.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
    n.touched = true;
    return n.grad;
}

void Tape::touch_add(int node, int r, int c, double g) { grad_ref(node).at(r, c) += g; }

int Tape::leaf(Matrix value, bool requires_grad) { return push(std::move(value), requires_grad, nullptr); }

#define NEEDS(id) (nodes_[static_cast<std::size_t>(id)].requires_grad)

int Tape::add(int a, int b) {
    const Matrix& va = value(a);
    const Matrix& vb = value(b);
    if (!va.same_shape(vb)) throw std::invalid_argument("add: shape mismatch");
    Matrix out = va;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += vb[i];
    const bool rg = NEEDS(a) || NEEDS(b);
    int id = push(std::move(out), rg, nullptr);
    nodes_[static_cast<std::size_t>(id)].backprop = [this, id, a, b] {
        const Matrix& g = nodes_[static_cast<std::size_t>(id)].grad;
        if (NEEDS(a)) {
            Matrix& ga = grad_ref(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (NEEDS(b)) {
            Matrix& gb = grad_ref(b);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
        }
    };
    return id;
}

int Tape::add_rowvec(int a, int b) {
    const Matrix& va = value(a);
    const Matrix& vb = value(b);
    if (vb.rows() != 1 || vb.cols() != va.cols()) throw std::invalid_argument("add_rowvec: bad row vector");
    Matrix out = va;
    for (int r = 0; r < out.rows(); ++r) {
        double* o = out.row(r);
        const double* bv = vb.row(0);
        for (int c = 0; c < out.cols(); ++c) o[c] += bv[c];
    }
    const bool rg = NEEDS(a) || NEEDS(b);
    int id = push(std::move(out), rg, nullptr);
    nodes_[static_cast<std::size_t>(id)].backprop = [this, id, a, b] {
        const Matrix& g = nodes_[static_cast<std::size_t>(id)].grad;
        if (NEEDS(a)) {
            Matrix& ga = grad_ref(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (NEEDS(b)) {
            Matrix& gb = grad_ref(b);
            for (int r = 0; r < g.rows(); ++r) {
                const double* gr = g.row(r);
                for (int c = 0; c < g.cols(); ++c) gb.at(0, c) += gr[c];
            }
        }
    };
    return id;
}

int Tape::scale(int a, double s) {
    Matrix out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
    int id = push(std::move(out), NEEDS(a), nullptr);
    nodes_[static_cast<std::size_t>(id)].backprop = [this, id, a, s] {
        if (!NEEDS(a)) return;
        const Matrix& g = nodes_[static_cast<std::size_t>(id)].grad;
        Matrix& ga = grad_ref(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
    };
    return id;
}

int Tape::mul_const(int a, Matrix mask) {
    const Matrix& va = value(a);
    if (!va.same_shape(mask)) throw std::invalid_argument("mul_const: shape mismatch");
    Matrix out = va;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
    int id = push(std::move(out), NEEDS(a), nullptr);
    nodes_[static_cast<std::size_t>(id)].backprop = [this, id, a, m = std::move(mask)] {
        if (!NEEDS(a)) return;
        const Matrix& g = nodes_[static_cast<std::size_t>(id)].grad;
        Matrix& ga = grad_ref(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += m[i] * g[i];
    };
    return id;
}

int Tape::matmul(int a, int b) {
    const Matrix& va = value(a);
    const Matrix& vb = value(b);
    if (va.cols() != vb.rows()) throw std::invalid_argument("matmul: inner dim mismatch");
    Matrix out(va.rows(), vb.cols());
    matmul_acc(va, vb, out);
    const bool rg = NEEDS(a) || NEEDS(b);
    int id = push(std::move(out), rg, nullptr);
    nodes_[static_cast<std::size_t>(id)].backprop = [this, id, a, b] {
        const Matrix& g = nodes_[static_cast<std::size_t>(id)].grad;
        if (NEEDS(a)) matmul_nt_acc(g, value(b), grad_ref(a));  // dA += dC * B^T
        if (NEEDS(b)) matmul_tn_acc(value(a), g, grad_ref(b));  // dB += A^T * dC
    };
    return id;
}

int Tape::matmul_nt(int a, int b) {
    const Matrix& va = value(a);
    const Matrix& vb = value(b);
    if (va.cols() != vb.cols()) throw std::invalid_argument("matmul_nt: inner dim mismatch");
    Matrix out(va.rows(), vb.rows());
    matmul_nt_acc(va, vb, out);
    const bool rg = NEEDS(a) || NEEDS(b);
    int id = push(std::move(out), rg, nullptr);
    nodes_[static_cast<std::size_t>(id)].backprop = [this, id, a, b] {
        const Matrix& g = nodes_[static_cast<std::size_t>(id)].grad;
        if (NEEDS(a)) matmul_acc(g, value(b), grad_ref(a));     // dA += dC * B
        if (NEEDS(b)) matmul_tn_acc(g, value(a), grad_ref(b));  // dB += dC^T * A
    };
    return id;
}

int Tape::gelu(int a) {
    const Matrix& va = value(a);
    Matrix out(va.rows(), va.cols());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.5 * va[i] * (1.0 + std::erf(va[i] / std::numbers::sqrt2));
    int id = push(std::move(out), NEEDS(a), nullptr);
    nodes_[static_cast<std::size_t>(id)].backprop = [this, id, a] {
        if (!NEEDS(a)) return;
        const Matrix& g = nodes_[static_cast<std::size_t>(id)].grad;
        const Matrix& x = value(a);
        Matrix& ga = grad_ref(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += gelu_grad(x[i]) * g[i];
    };
    return id;
}

int Tape::layer_norm(int a, int gamma, int beta, double eps) {
    const Matrix& x = value(a);
    const Matrix& gm = value(gamma);
    const Matrix& bt = value(beta);
    const int n = x.rows(), c = x.cols();
    if (gm.rows() != 1 || gm.cols() != c || bt.rows() != 1 || bt.cols() != c)
        throw std::invalid_argument("layer_norm: gamma/beta must be 1 x cols");
    Matrix xhat(n, c);
    Matrix inv_sigma(n, 1);
    Matrix out(n, c);
    for (int r = 0; r < n; ++r) {
        const double* xr = x.row(r);
        double mu = 0.0;
        for (int j = 0; j < c; ++j) mu += xr[j];
        mu /= c;
        double var = 0.0;
        for (int j = 0; j < c; ++j) var += (xr[j] - mu) * (xr[j] - mu);
        var /= c;
        const double is = 1.0 / std::sqrt(var + eps);
        inv_sigma.at(r, 0) = is;
        for (int j = 0; j < c; ++j) {
            const double xh = (xr[j] - mu) * is;
            xhat.at(r, j) = xh;
            out.at(r, j) = gm.at(0, j) * xh + bt.at(0, j);
        }
    }
    const bool rg = NEEDS(a) || NEEDS(gamma) || NEEDS(beta);
    int id = push(std::move(out), rg, nullptr);
    nodes_[static_cast<std::size_t>(id)].backprop = [this, id, a, gamma, beta, xh = std::move(xhat),
                                                     is = std::move(inv_sigma)] {
        const Matrix& g = nodes_[static_cast<std::size_t>(id)].grad;
        const Matrix& gm = value(gamma);
        const int n = g.rows(), c = g.cols();
        if (NEEDS(beta)) {
            Matrix& gb = grad_ref(beta);
            for (int r = 0; r < n; ++r)
                for (int j = 0; j < c; ++j) gb.at(0, j) += g.at(r, j);
        }
        if (NEEDS(gamma)) {
            Matrix& gg = grad_ref(gamma);
            for (int r = 0; r < n; ++r)
                for (int j = 0; j < c; ++j) gg.at(0, j) += g.at(r, j) * xh.at(r, j);
        }
        if (NEEDS(a)) {
            Matrix& ga = grad_ref(a);
            for (int r = 0; r < n; ++r) {
                double mean_h = 0.0, mean_hx = 0.0;
                for (int j = 0; j < c; ++j) {
                    const double h = g.at(r, j) * gm.at(0, j);
                    mean_h += h;
                    mean_hx += h * xh.at(r, j);
                }
                mean_h /= c;
                mean_hx /= c;
                const double s = is.at(r, 0);
                for (int j = 0; j < c; ++j) {
                    const double h = g.at(r, j) * gm.at(0, j);
                    ga.at(r, j) += (h - mean_h - xh.at(r, j) * mean_hx) * s;
                }
            }
        }
    };
    return id;
}

int Tape::softmax_rows(int a, bool causal) {
    const Matrix& x = value(a);
    const int n = x.rows(), m = x.cols();
    if (causal && n != m) throw std::invalid_argument("softmax_rows: causal mask needs a square matrix");
    Matrix out(n, m);
    for (int r = 0; r < n; ++r) {
        const int hi = causal ? r + 1 : m;  // allowed columns [0, hi)
        const double* xr = x.row(r);
        double mx = xr[0];
        for (int j = 1; j < hi; ++j) mx = std::max(mx, xr[j]);
        double z = 0.0;
        for (int j = 0; j < hi; ++j) z += std::exp(xr[j] - mx);
        for (int j = 0; j < hi; ++j) out.at(r, j) = std::exp(xr[j] - mx) / z;
        for (int j = hi; j < m; ++j) out.at(r, j) = 0.0;
    }
    int id = push(std::move(out), NEEDS(a), nullptr);
    nodes_[static_cast<std::size_t>(id)].backprop = [this, id, a] {
        if (!NEEDS(a)) return;
        if (fault_ == Fault::drop_softmax_grad) return;  // harness-sensitivity mutant
        const Matrix& g = nodes_[static_cast<std::size_t>(id)].grad;
        const Matrix& p = nodes_[static_cast<std::size_t>(id)].value;
        Matrix& ga = grad_ref(a);
        for (int r = 0; r < g.rows(); ++r) {
            double dot = 0.0;
            for (int j = 0; j < g.cols(); ++j) dot += g.at(r, j) * p.at(r, j);
            for (int j = 0; j < g.cols(); ++j) ga.at(r, j) += p.at(r, j) * (g.at(r, j) - dot);
        }
    };
    return id;
}

int Tape::mean_rows(int a) {
    const Matrix& x = value(a);
    const int n = x.rows(), c = x.cols();
    if (n == 0) throw std::invalid_argument("mean_rows: empty input");
    Matrix out(1, c);
    for (int r = 0; r < n; ++r)
        for (int j = 0; j < c; ++j) out.at(0, j) += x.at(r, j);
    for (int j = 0; j < c; ++j) out.at(0, j) /= n;
    int id = push(std::move(out), NEEDS(a), nullptr);
    nodes_[static_cast<std::size_t>(id)].backprop = [this, id, a, n] {
        if (!NEEDS(a)) return;
        const Matrix& g = nodes_[static_cast<std::size_t>(id)].grad;
        Matrix& ga = grad_ref(a);
        for (int r = 0; r < ga.rows(); ++r)
            for (int j = 0; j < ga.cols(); ++j) ga.at(r, j) += g.at(0, j) / n;
    };
    return id;
}

int Tape::concat_rows(const std::vector<int>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: no parts");
    int total = 0;
    const int c = value(parts[0]).cols();
    bool rg = false;
    for (int p : parts) {
        if (value(p).cols() != c) throw std::invalid_argument("concat_rows: width mismatch");
        total += value(p).rows();
        rg = rg || NEEDS(p);
    }
    Matrix out(total, c);
    int r0 = 0;
    for (int p : parts) {
        const Matrix& v = value(p);
        for (int r = 0; r < v.rows(); ++r)
            for (int j = 0; j < c; ++j) out.at(r0 + r, j) = v.at(r, j);
        r0 += v.rows();
    }
    int id = push(std::move(out), rg, nullptr);
    nodes_[static_cast<std::size_t>(id)].backprop = [this, id, ps = parts] {
        const Matrix& g = nodes_[static_cast<std::size_t>(id)].grad;
        int r0 = 0;
        for (int p : ps) {
            const int pr = value(p).rows();
            if (NEEDS(p)) {
                Matrix& gp = grad_ref(p);
                for (int r = 0; r < pr; ++r)
                    for (int j = 0; j < g.cols(); ++j) gp.at(r, j) += g.at(r0 + r, j);
            }
            r0 += pr;
        }
    };
    return id;
}

int Tape::select_rows(int a, std::vector<int> idx) {
    const Matrix& x = value(a);
    Matrix out(static_cast<int>(idx.size()), x.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] < 0 || idx[r] >= x.rows()) throw std::invalid_argument("select_rows: index out of range");
        for (int j = 0; j < x.cols(); ++j) out.at(static_cast<int>(r), j) = x.at(idx[r], j);
    }
    int id = push(std::move(out), NEEDS(a), nullptr);
    nodes_[static_cast<std::size_t>(id)].backprop = [this, id, a, ix = std::move(idx)] {
        if (!NEEDS(a)) return;
        const Matrix& g = nodes_[static_cast<std::size_t>(id)].grad;
        Matrix& ga = grad_ref(a);
        for (std::size_t r = 0; r < ix.size(); ++r)
            for (int j = 0; j < g.cols(); ++j) ga.at(ix[r], j) += g.at(static_cast<int>(r), j);
    };
    return id;
}

int Tape::cross_entropy_sum(int logits, std::vector<int> targets) {
    const Matrix& x = value(logits);
    const int n = x.rows(), v = x.cols();
    if (static_cast<int>(targets.size()) != n) throw std::invalid_argument("cross_entropy_sum: target count mismatch");
    Matrix probs(n, v);
    double loss = 0.0;
    for (int r = 0; r < n; ++r) {
        if (targets[static_cast<std::size_t>(r)] < 0 || targets[static_cast<std::size_t>(r)] >= v)
            throw std::invalid_argument("cross_entropy_sum: target id out of range");
        const double* xr = x.row(r);
        double mx = xr[0];
        for (int j = 1; j < v; ++j) mx = std::max(mx, xr[j]);
        double z = 0.0;
        for (int j = 0; j < v; ++j) z += std::exp(xr[j] - mx);
        const double logz = mx + std::log(z);
        loss += logz - xr[targets[static_cast<std::size_t>(r)]];
        for (int j = 0; j < v; ++j) probs.at(r, j) = std::exp(xr[j] - logz);
    }
    Matrix out(1, 1);
    out.at(0, 0) = loss;
    int id = push(std::move(out), NEEDS(logits), nullptr);
    nodes_[static_cast<std::size_t>(id)].backprop = [this, id, logits, p = std::move(probs), t = std::move(targets)] {
        if (!NEEDS(logits)) return;
        const double up = nodes_[static_cast<std::size_t>(id)].grad.at(0, 0);
        Matrix& gl = grad_ref(logits);
        for (int r = 0; r < p.rows(); ++r) {
            for (int j = 0; j < p.cols(); ++j) gl.at(r, j) += up * p.at(r, j);
            gl.at(r, t[static_cast<std::size_t>(r)]) -= up;
        }
    };
    return id;
}

int Tape::weighted_sum_scalars(const std::vector<int>& nodes, const std::vector<double>& weights) {
    if (nodes.size() != weights.size() || nodes.empty())
        throw std::invalid_argument("weighted_sum_scalars: bad arity");
    double s = 0.0;
    bool rg = false;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const Matrix& v = value(nodes[i]);
        if (v.rows() != 1 || v.cols() != 1) throw std::invalid_argument("weighted_sum_scalars: non-scalar input");
        s += weights[i] * v.at(0, 0);
        rg = rg || NEEDS(nodes[i]);
    }
    Matrix out(1, 1);
    out.at(0, 0) = s;
    int id = push(std::move(out), rg, nullptr);
    nodes_[static_cast<std::size_t>(id)].backprop = [this, id, ns = nodes, ws = weights] {
        const double up = nodes_[static_cast<std::size_t>(id)].grad.at(0, 0);
        for (std::size_t i = 0; i < ns.size(); ++i) {
            if (NEEDS(ns[i])) grad_ref(ns[i]).at(0, 0) += up * ws[i];
        }
    };
    return id;
}

#undef NEEDS

void Tape::backward(int loss) {
    Node& L = nodes_[static_cast<std::size_t>(loss)];
    if (L.value.rows() != 1 || L.value.cols() != 1) throw std::invalid_argument("backward: loss must be 1x1");
    grad_ref(loss).at(0, 0) += 1.0;
    for (int i = loss; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (n.touched && n.requires_grad && n.backprop) n.backprop();
    }
}

}  // namespace dialopre::ad
