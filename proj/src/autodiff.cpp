#include "cgl/autodiff.hpp"

#include "cgl/error.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace cgl::ad {

const MatrixXd& Var::value() const { return tape->value(id); }
const MatrixXd& Var::grad() const { return tape->grad(id); }

Var Tape::variable(MatrixXd value) { return push(std::move(value), true, nullptr); }
Var Tape::constant(MatrixXd value) { return push(std::move(value), false, nullptr); }

Var Tape::push(MatrixXd value, bool needs_grad, std::function<void()> backprop) {
    nodes_.push_back(Node{std::move(value), MatrixXd(), needs_grad, std::move(backprop)});
    return Var{this, nodes_.size() - 1};
}

void Tape::accumulate(std::size_t id, const MatrixXd& delta) {
    Node& node = nodes_[id];
    if (!node.needs_grad) return;
    if (node.grad.size() == 0) {
        node.grad = delta;
    } else {
        node.grad += delta;
    }
}

void Tape::backward(Var loss) {
    if (loss.tape != this) throw std::invalid_argument("backward: variable belongs to another tape");
    if (loss.rows() != 1 || loss.cols() != 1) throw ShapeError("backward: loss must be 1x1");
    for (auto& node : nodes_) node.grad.resize(0, 0);
    accumulate(loss.id, MatrixXd::Ones(1, 1));
    for (std::size_t k = loss.id + 1; k-- > 0;) {
        Node& node = nodes_[k];
        if (node.backprop && node.grad.size() != 0) node.backprop();
    }
}

namespace {

void same_tape(Var a, Var b) {
    if (a.tape != b.tape) throw std::invalid_argument("autodiff: operands on different tapes");
}

bool wants(Var a) { return a.tape->needs_grad(a.id); }

// Pushes an op node. back(g) receives the output gradient and routes it to
// the inputs through Tape::accumulate.
template <class Back>
Var emit(Tape* t, MatrixXd value, bool needs_grad, Back back) {
    if (!needs_grad) return t->push(std::move(value), false, nullptr);
    const std::size_t out = t->size();
    return t->push(std::move(value), true, [t, out, back = std::move(back)]() { back(t->grad(out)); });
}

}  // namespace

Var matmul(Var a, Var b) {
    same_tape(a, b);
    if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions differ");
    Tape* t = a.tape;
    return emit(t, a.value() * b.value(), wants(a) || wants(b), [t, a, b](const MatrixXd& g) {
        if (wants(a)) t->accumulate(a.id, g * b.value().transpose());
        if (wants(b)) t->accumulate(b.id, a.value().transpose() * g);
    });
}

Var add(Var a, Var b) {
    same_tape(a, b);
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("add: shapes differ");
    Tape* t = a.tape;
    return emit(t, a.value() + b.value(), wants(a) || wants(b), [t, a, b](const MatrixXd& g) {
        t->accumulate(a.id, g);
        t->accumulate(b.id, g);
    });
}

Var sub(Var a, Var b) {
    same_tape(a, b);
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("sub: shapes differ");
    Tape* t = a.tape;
    return emit(t, a.value() - b.value(), wants(a) || wants(b), [t, a, b](const MatrixXd& g) {
        t->accumulate(a.id, g);
        t->accumulate(b.id, -g);
    });
}

Var scale(double s, Var a) {
    Tape* t = a.tape;
    return emit(t, s * a.value(), wants(a), [t, a, s](const MatrixXd& g) { t->accumulate(a.id, s * g); });
}

Var scale(Var s, Var a) {
    same_tape(s, a);
    if (s.rows() != 1 || s.cols() != 1) throw ShapeError("scale: factor must be 1x1");
    Tape* t = s.tape;
    return emit(t, s.value()(0, 0) * a.value(), wants(s) || wants(a), [t, s, a](const MatrixXd& g) {
        if (wants(a)) t->accumulate(a.id, s.value()(0, 0) * g);
        if (wants(s)) t->accumulate(s.id, MatrixXd::Constant(1, 1, g.cwiseProduct(a.value()).sum()));
    });
}

Var add_bias(Var a, Var b) {
    same_tape(a, b);
    if (b.rows() != 1 || b.cols() != a.cols()) throw ShapeError("add_bias: bias must be 1 x cols");
    Tape* t = a.tape;
    MatrixXd value = a.value().rowwise() + b.value().row(0);
    return emit(t, std::move(value), wants(a) || wants(b), [t, a, b](const MatrixXd& g) {
        t->accumulate(a.id, g);
        if (wants(b)) t->accumulate(b.id, g.colwise().sum());
    });
}

Var relu(Var a) {
    Tape* t = a.tape;
    return emit(t, a.value().cwiseMax(0.0), wants(a), [t, a](const MatrixXd& g) {
        t->accumulate(a.id, (a.value().array() > 0.0).select(g, 0.0));
    });
}

Var transpose(Var a) {
    Tape* t = a.tape;
    return emit(t, a.value().transpose(), wants(a), [t, a](const MatrixXd& g) { t->accumulate(a.id, g.transpose()); });
}

Var row_scale(const VectorXd& s, Var a) {
    if (s.size() != a.rows()) throw ShapeError("row_scale: length must equal row count");
    Tape* t = a.tape;
    return emit(t, s.asDiagonal() * a.value(), wants(a), [t, a, s](const MatrixXd& g) {
        t->accumulate(a.id, s.asDiagonal() * g);
    });
}

Var row_scale(Var s, Var a) {
    same_tape(s, a);
    if (s.cols() != 1 || s.rows() != a.rows()) throw ShapeError("row_scale: scale must be n x 1");
    Tape* t = a.tape;
    return emit(t, s.value().col(0).asDiagonal() * a.value(), wants(s) || wants(a), [t, s, a](const MatrixXd& g) {
        if (wants(a)) t->accumulate(a.id, s.value().col(0).asDiagonal() * g);
        if (wants(s)) t->accumulate(s.id, g.cwiseProduct(a.value()).rowwise().sum());
    });
}

Var spmm(const SparseMatrix& s, Var a) {
    if (s.cols() != a.rows()) throw ShapeError("spmm: inner dimensions differ");
    Tape* t = a.tape;
    const SparseMatrix* sp = &s;
    return emit(t, MatrixXd(s * a.value()), wants(a), [t, a, sp](const MatrixXd& g) {
        t->accumulate(a.id, MatrixXd(sp->transpose() * g));
    });
}

Var pow_base(const VectorXd& base, Var e) {
    if (e.rows() != 1 || e.cols() != 1) throw ShapeError("pow_base: exponent must be 1x1");
    Tape* t = e.tape;
    VectorXd log_base = base.array().log().matrix();
    MatrixXd value = (e.value()(0, 0) * log_base.array()).exp().matrix();
    if (!value.allFinite()) throw std::domain_error("pow_base: non-finite power");
    return emit(t, std::move(value), wants(e), [t, e, log_base = std::move(log_base)](const MatrixXd& g) {
        const MatrixXd pw = (e.value()(0, 0) * log_base.array()).exp().matrix();
        t->accumulate(e.id, MatrixXd::Constant(1, 1, (g.array() * pw.array() * log_base.array()).sum()));
    });
}

Var sum_rows(Var a) {
    Tape* t = a.tape;
    const Index n = a.rows();
    return emit(t, MatrixXd(a.value().colwise().sum()), wants(a), [t, a, n](const MatrixXd& g) {
        t->accumulate(a.id, g.replicate(n, 1));
    });
}

Var mean_rows(Var a) {
    Tape* t = a.tape;
    const Index n = a.rows();
    if (n == 0) throw ShapeError("mean_rows: no rows");
    const double inv = 1.0 / static_cast<double>(n);
    return emit(t, MatrixXd(a.value().colwise().mean()), wants(a), [t, a, n, inv](const MatrixXd& g) {
        t->accumulate(a.id, inv * g.replicate(n, 1));
    });
}

Var softmax_cross_entropy(Var logits, const std::vector<int>& targets, const std::vector<Index>& rows) {
    const MatrixXd& z = logits.value();
    if (static_cast<Index>(targets.size()) != z.rows()) throw ShapeError("cross entropy: one target per row");
    if (rows.empty()) throw std::invalid_argument("cross entropy: no rows selected");
    const double inv = 1.0 / static_cast<double>(rows.size());
    MatrixXd dz = MatrixXd::Zero(z.rows(), z.cols());
    double loss = 0.0;
    for (Index r : rows) {
        const int y = targets[r];
        if (y < 0 || y >= z.cols()) throw std::out_of_range("cross entropy: target out of range");
        const double m = z.row(r).maxCoeff();
        const Eigen::RowVectorXd e = (z.row(r).array() - m).exp().matrix();
        const double s = e.sum();
        loss += (std::log(s) + m - z(r, y)) * inv;
        dz.row(r) = e / s * inv;
        dz(r, y) -= inv;
    }
    Tape* t = logits.tape;
    return emit(t, MatrixXd::Constant(1, 1, loss), wants(logits), [t, logits, dz = std::move(dz)](const MatrixXd& g) {
        t->accumulate(logits.id, g(0, 0) * dz);
    });
}

}  // namespace cgl::ad
