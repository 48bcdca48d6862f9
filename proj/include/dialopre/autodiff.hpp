#pragma once

#include <functional>
#include <vector>

#include "dialopre/matrix.hpp"

namespace dialopre::ad {

// Fault injection for harness-sensitivity tests: a deliberately broken
// backward pass must trip the finite-difference checker.
enum class Fault {
    none,
    drop_softmax_grad,  // attention probabilities treated as constants in backward
};

// Dynamic tape of matrix-valued nodes. A graph is built per forward pass and
// discarded after backward; node handles are indices into the tape.
class Tape {
public:
    // ---- graph construction -------------------------------------------------
    int leaf(Matrix value, bool requires_grad);

    int add(int a, int b);                  // same shape
    int add_rowvec(int a, int b);           // b is 1xC, broadcast over rows of a
    int scale(int a, double s);
    int mul_const(int a, Matrix mask);      // elementwise by a constant (dropout)
    int matmul(int a, int b);               // A  (n x k) * B (k x m)
    int matmul_nt(int a, int b);            // A  (n x k) * B^T (m x k) -> n x m
    int gelu(int a);
    int layer_norm(int a, int gamma, int beta, double eps = 1e-5);
    int softmax_rows(int a, bool causal);   // causal: col > row masked out
    int mean_rows(int a);                   // n x c -> 1 x c
    int concat_rows(const std::vector<int>& parts);  // stack same-width rows
    int select_rows(int a, std::vector<int> idx);    // gather rows; grads scatter-add
    // sum over rows of -log softmax(row)[target[row]]; value is 1x1
    int cross_entropy_sum(int logits, std::vector<int> targets);
    // weighted sum of 1x1 nodes; value is 1x1
    int weighted_sum_scalars(const std::vector<int>& nodes, const std::vector<double>& weights);

    // ---- execution ----------------------------------------------------------
    void backward(int loss);  // loss must be 1x1; accumulates into leaf grads

    const Matrix& value(int node) const { return nodes_[static_cast<std::size_t>(node)].value; }
    const Matrix& grad(int node) const { return nodes_[static_cast<std::size_t>(node)].grad; }

    double scalar(int node) const { return value(node).at(0, 0); }

    void inject_fault(Fault f) { fault_ = f; }

    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        bool requires_grad = false;
        bool touched = false;  // received a gradient contribution
        std::function<void()> backprop;
    };

    int push(Matrix value, bool requires_grad, std::function<void()> backprop);
    Matrix& grad_ref(int node);
    void touch_add(int node, int r, int c, double g);

    std::vector<Node> nodes_;
    Fault fault_ = Fault::none;

    friend struct TapeAccess;
};

}  // namespace dialopre::ad
