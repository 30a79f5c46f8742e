#pragma once

#include "cgl/graph.hpp"

#include <deque>
#include <functional>
#include <vector>

namespace cgl::ad {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const MatrixXd& value() const;
    /// Accumulated gradient; zero-sized until backward reaches the node.
    const MatrixXd& grad() const;
    Index rows() const { return value().rows(); }
    Index cols() const { return value().cols(); }
};

/// Reverse-mode tape over dense matrices. Nodes are appended in evaluation
/// order, so a single reverse sweep is a valid topological order.
class Tape {
public:
    Var variable(MatrixXd value);
    Var constant(MatrixXd value);
    Var push(MatrixXd value, bool needs_grad, std::function<void()> backprop);

    const MatrixXd& value(std::size_t id) const { return nodes_[id].value; }
    const MatrixXd& grad(std::size_t id) const { return nodes_[id].grad; }
    bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
    /// Adds delta into the gradient of a node that needs one.
    void accumulate(std::size_t id, const MatrixXd& delta);

    /// Seeds d(loss)/d(loss) = 1 for a 1x1 node and sweeps backwards.
    void backward(Var loss);
    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        MatrixXd value;
        MatrixXd grad;
        bool needs_grad = false;
        std::function<void()> backprop;
    };
    std::deque<Node> nodes_;
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(double s, Var a);
/// s is 1x1.
Var scale(Var s, Var a);
/// b is 1 x cols(a), broadcast over rows.
Var add_bias(Var a, Var b);
Var relu(Var a);
Var transpose(Var a);
/// Row i multiplied by s[i].
Var row_scale(const VectorXd& s, Var a);
/// s is n x 1.
Var row_scale(Var s, Var a);
/// The sparse matrix must outlive the tape.
Var spmm(const SparseMatrix& s, Var a);
/// Entrywise base^e for a positive column vector and a 1x1 exponent.
Var pow_base(const VectorXd& base, Var e);
Var sum_rows(Var a);
Var mean_rows(Var a);
/// Mean cross-entropy of softmax(logits) over the given rows.
Var softmax_cross_entropy(Var logits, const std::vector<int>& targets, const std::vector<Index>& rows);

}  // namespace cgl::ad
