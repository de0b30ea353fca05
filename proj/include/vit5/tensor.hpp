#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "vit5/base.hpp"

namespace vit5 {

class Tensor;

// One record of the backward graph. Nodes are created in strictly increasing
// id order, so every node's parents have smaller ids and the graph is acyclic
// by construction. The backward closure captures the output buffers it needs
// directly (not the output tensor) to avoid ownership cycles.
struct Node {
    std::uint64_t id;
    const char* op;
    std::vector<Tensor> parents;
    std::function<void()> backward;
};

// Dense row-major N-d array of reals with optional gradient and autodiff
// lineage. Handles are cheap value types sharing the underlying buffers;
// data is immutable after an op creates it, except gradient accumulation
// during a single-owner backward pass and explicit in-place parameter
// updates between steps.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return data_ != nullptr; }
    const Shape& shape() const { return shape_; }
    int ndim() const { return static_cast<int>(shape_.size()); }
    std::int64_t dim(int i) const;  // negative indices count from the back
    std::int64_t numel() const { return data_ ? static_cast<std::int64_t>(data_->size()) : 0; }

    const std::vector<double>& data() const { return *data_; }
    // In-place access for initialization and optimizer updates; never call on
    // a tensor that already participates in a live graph.
    std::vector<double>& mutable_data() { return *data_; }

    double item() const;
    double at(std::initializer_list<std::int64_t> idx) const;

    bool requires_grad() const { return requires_grad_; }
    bool has_grad() const { return grad_ != nullptr; }
    const std::vector<double>& grad() const;
    std::vector<double>& grad_buffer();
    void zero_grad();

    // Accumulates into the gradient buffer in index order, quantizing per the
    // active precision mode.
    void accumulate_grad(const std::vector<double>& g);

    const std::shared_ptr<Node>& node() const { return node_; }
    void set_node(std::shared_ptr<Node> node) { node_ = std::move(node); }

    std::shared_ptr<std::vector<double>> shared_data() const { return data_; }
    std::shared_ptr<std::vector<double>> shared_grad();

    // Reverse-mode sweep from a scalar output.
    void backward();

    // Copy of this tensor detached from the graph.
    Tensor detached() const;

private:
    Shape shape_;
    std::shared_ptr<std::vector<double>> data_;
    std::shared_ptr<std::vector<double>> grad_;
    bool requires_grad_ = false;
    std::shared_ptr<Node> node_;
};

// Wires an output node if grad mode is on and any parent requires grad.
// backward_builder is only invoked when the node is actually created; it
// receives the shared gradient buffer of the output.
Tensor make_op_output(const char* op, Shape shape, std::vector<double> data,
                      std::vector<Tensor> parents,
                      const std::function<std::function<void()>(
                          std::shared_ptr<std::vector<double>> out_grad,
                          std::shared_ptr<std::vector<double>> out_data)>& backward_builder);

std::uint64_t next_node_id();

}  // namespace vit5
