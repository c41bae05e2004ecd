#include "iled/tape.hpp"

#include "iled/errors.hpp"

namespace iled::diff {

Var Tape::leaf(Tensor value) { return emit(std::move(value), Pull{}); }

Var Tape::emit(Tensor value, Pull pull) {
    Node n;
    n.value = std::move(value);
    n.pull = std::move(pull);
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

double Tape::scalar(Var v) const {
    const Tensor& t = val(v);
    if (t.size() != 1) throw ShapeError("Tape::scalar: node is not a scalar, shape " + t.shape_str());
    return t.data[0];
}

const Tensor& Tape::grad(Var v) {
    Node& n = nodes_[static_cast<std::size_t>(v.id)];
    if (!n.has_grad) {
        n.grad = Tensor::zeros(n.value.shape);
        n.has_grad = true;
    }
    return n.grad;
}

void Tape::accumulate(Var parent, const Tensor& g) {
    Node& n = nodes_[static_cast<std::size_t>(parent.id)];
    if (!n.has_grad) {
        n.grad = g;
        n.has_grad = true;
    } else {
        add_inplace(n.grad, g);
    }
}

void Tape::accumulate_scaled(Var parent, double c, const Tensor& g) {
    Node& n = nodes_[static_cast<std::size_t>(parent.id)];
    if (!n.has_grad) {
        n.grad = Tensor::zeros(n.value.shape);
        n.has_grad = true;
    }
    axpy_inplace(n.grad, c, g);
}

void Tape::backward(Var loss) {
    const Tensor& t = val(loss);
    if (t.size() != 1) throw ShapeError("Tape::backward: loss must be scalar, got shape " + t.shape_str());
    Tensor seed(t.shape);
    seed.data[0] = 1.0;
    backward(loss, seed);
}

void Tape::backward(Var y, const Tensor& seed) {
    if (consumed_) throw Error("Tape::backward: tape already consumed (one backward pass per forward pass)");
    if (y.tape != this) throw Error("Tape::backward: node belongs to a different tape");
    if (!seed.same_shape(val(y))) throw ShapeError("Tape::backward: seed shape mismatch");
    consumed_ = true;

    accumulate(y, seed);
    for (std::size_t i = nodes_.size(); i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.has_grad || !n.pull) continue;
        n.pull(*this, n.grad);
    }
}

}  // namespace iled::diff
