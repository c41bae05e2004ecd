#pragma once

#include <functional>
#include <vector>

#include "iled/tensor.hpp"

namespace iled::diff {

class Tape;

// Handle to a node on a tape. Cheap to copy; invalid by default.
struct Var {
    Tape* tape = nullptr;
    std::int32_t id = -1;
    bool valid() const { return tape != nullptr && id >= 0; }
};

// Define-by-run reverse-mode tape. Every op in ops.hpp appends one node
// holding the forward value and a pull-back that routes the node's cotangent
// into its parents. Gradients accumulate additively, so sharing a leaf
// across many ops (network parameters) works without bookkeeping.
//
// One backward pass per tape: running backward() twice throws, since the
// accumulated gradients would silently double.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var leaf(Tensor value);

    const Tensor& val(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
    double scalar(Var v) const;

    // Gradient of the backward seed w.r.t. node v; zero tensor if the node
    // never received a cotangent. Valid only after backward().
    const Tensor& grad(Var v);

    void backward(Var loss);                     // loss must be scalar; seeds with 1
    void backward(Var y, const Tensor& seed);    // general seed, shape of y

    std::size_t num_nodes() const { return nodes_.size(); }
    bool consumed() const { return consumed_; }

    // --- op-author interface -------------------------------------------
    using Pull = std::function<void(Tape&, const Tensor& g)>;
    Var emit(Tensor value, Pull pull);
    void accumulate(Var parent, const Tensor& g);
    void accumulate_scaled(Var parent, double c, const Tensor& g);

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool has_grad = false;
        Pull pull;  // empty for leaves
    };
    std::vector<Node> nodes_;
    bool consumed_ = false;
    Tensor zero_like_cache_;
};

}  // namespace iled::diff
