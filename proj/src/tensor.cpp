#include "vit5/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <unordered_set>

namespace vit5 {

namespace {
std::atomic<std::uint64_t> g_node_counter{0};
}

std::uint64_t next_node_id() { return g_node_counter.fetch_add(1, std::memory_order_relaxed); }

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    const auto n = shape_numel(shape);
    return from_data(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), 0.0),
                     requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    const auto n = shape_numel(shape);
    return from_data(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), value),
                     requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    const auto n = shape_numel(shape);
    if (n != static_cast<std::int64_t>(data.size())) {
        throw ShapeError("tensor: shape " + shape_str(shape) + " expects " + std::to_string(n) +
                         " values, got " + std::to_string(data.size()));
    }
    for (std::int64_t e : shape) {
        if (e <= 0) throw ShapeError("tensor: non-positive extent in shape " + shape_str(shape));
    }
    quantize_buffer(data);
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::make_shared<std::vector<double>>(std::move(data));
    t.requires_grad_ = requires_grad;
    if (requires_grad) {
        t.grad_ = std::make_shared<std::vector<double>>(t.data_->size(), 0.0);
    }
    return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from_data({1}, {value}, requires_grad);
}

std::int64_t Tensor::dim(int i) const {
    const int n = ndim();
    if (i < 0) i += n;
    if (i < 0 || i >= n) {
        throw ShapeError("tensor: axis " + std::to_string(i) + " out of range for " +
                         shape_str(shape_));
    }
    return shape_[static_cast<std::size_t>(i)];
}

double Tensor::item() const {
    if (numel() != 1) {
        throw ShapeError("tensor: item() requires a single element, shape is " +
                         shape_str(shape_));
    }
    return (*data_)[0];
}

double Tensor::at(std::initializer_list<std::int64_t> idx) const {
    if (static_cast<int>(idx.size()) != ndim()) {
        throw ShapeError("tensor: index rank mismatch for " + shape_str(shape_));
    }
    std::int64_t flat = 0;
    int k = 0;
    for (std::int64_t i : idx) {
        const std::int64_t extent = shape_[static_cast<std::size_t>(k)];
        if (i < 0 || i >= extent) {
            throw ShapeError("tensor: index out of bounds for " + shape_str(shape_));
        }
        flat = flat * extent + i;
        ++k;
    }
    return (*data_)[static_cast<std::size_t>(flat)];
}

const std::vector<double>& Tensor::grad() const {
    if (!grad_) throw std::runtime_error("tensor: gradient not allocated");
    return *grad_;
}

std::vector<double>& Tensor::grad_buffer() {
    if (!grad_) grad_ = std::make_shared<std::vector<double>>(data_->size(), 0.0);
    return *grad_;
}

std::shared_ptr<std::vector<double>> Tensor::shared_grad() {
    grad_buffer();
    return grad_;
}

void Tensor::zero_grad() {
    if (grad_) std::fill(grad_->begin(), grad_->end(), 0.0);
}

void Tensor::accumulate_grad(const std::vector<double>& g) {
    auto& buf = grad_buffer();
    if (g.size() != buf.size()) {
        throw ShapeError("tensor: gradient size mismatch (" + std::to_string(g.size()) + " vs " +
                         std::to_string(buf.size()) + ")");
    }
    const Precision p = precision();
    for (std::size_t i = 0; i < buf.size(); ++i) {
        buf[i] = quantize_value(buf[i] + g[i], p);
    }
}

Tensor Tensor::detached() const {
    Tensor t;
    t.shape_ = shape_;
    t.data_ = std::make_shared<std::vector<double>>(*data_);
    return t;
}

void Tensor::backward() {
    if (numel() != 1) throw std::runtime_error("backward: output must be scalar");
    if (!requires_grad_) throw std::runtime_error("backward: output does not require grad");

    grad_buffer()[0] = 1.0;

    if (!node_) return;

    // Iterative post-order DFS; reversed post-order runs each node before any
    // of its ancestors' nodes have consumed its parents.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    struct Frame {
        Node* node;
        std::size_t next_parent;
    };
    std::vector<Frame> stack;
    stack.push_back({node_.get(), 0});
    visited.insert(node_.get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.node->parents.size()) {
            const Tensor& parent = f.node->parents[f.next_parent++];
            Node* pn = parent.node().get();
            if (pn != nullptr && !visited.count(pn)) {
                visited.insert(pn);
                stack.push_back({pn, 0});
            }
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        (*it)->backward();
    }
}

Tensor make_op_output(const char* op, Shape shape, std::vector<double> data,
                      std::vector<Tensor> parents,
                      const std::function<std::function<void()>(
                          std::shared_ptr<std::vector<double>>,
                          std::shared_ptr<std::vector<double>>)>& backward_builder) {
    bool needs_grad = false;
    if (grad_enabled()) {
        for (const Tensor& p : parents) {
            if (p.requires_grad()) {
                needs_grad = true;
                break;
            }
        }
    }
    Tensor out = Tensor::from_data(std::move(shape), std::move(data), needs_grad);
    if (needs_grad) {
        auto node = std::make_shared<Node>();
        node->id = next_node_id();
        node->op = op;
        node->parents = std::move(parents);
        // The closure shares the output's buffers directly (not the tensor
        // handle), which avoids an ownership cycle through the node.
        node->backward = backward_builder(out.shared_grad(), out.shared_data());
        out.set_node(std::move(node));
    }
    return out;
}

}  // namespace vit5
