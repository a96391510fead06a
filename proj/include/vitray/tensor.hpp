#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "vitray/error.hpp"

namespace vitray {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_size(const Shape& shape);

/// log() clamps its argument here so saturated probabilities never produce
/// -Inf loss.
inline constexpr double kLogClamp = 1e-12;

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad; ///< empty until backward() reaches this node
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    /// Pulls this node's grad into its parents. The node is passed in so the
    /// closure never has to own a reference to itself.
    std::function<void(Node&)> backward_fn;
};

void accumulate_grad(Node& node, const double* delta, std::size_t n);

} // namespace detail

/// Dense float64 tensor with reverse-mode autodiff. Values are contiguous
/// row-major and immutable after construction (mutable_data is the explicit
/// optimizer/test escape hatch); the grad slot is the only state backward()
/// writes. Copies are cheap handles onto one shared node.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    /// Validates that data is finite and matches the shape.
    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t size() const;
    std::size_t rank() const;
    std::size_t rows() const; ///< rank-2 tensors only
    std::size_t cols() const; ///< rank-2 tensors only

    const double* data() const;
    const std::vector<double>& values() const;
    /// In-place access for the optimizer and for finite-difference probes.
    double* mutable_data();
    double item() const;
    double operator()(std::size_t i, std::size_t j) const;

    bool requires_grad() const;
    bool has_grad() const;
    const std::vector<double>& grad() const;
    void clear_grad();

    std::shared_ptr<detail::Node> node() const { return node_; }

private:
    detail::Node& n();
    const detail::Node& n() const;
    std::shared_ptr<detail::Node> node_;
};

// Recorded ops. Each checks shapes, rejects non-finite outputs, and wires a
// backward closure when some input requires a gradient.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
/// m[r x c] + bias[c], bias broadcast across rows.
Tensor add_bias_row(const Tensor& m, const Tensor& bias);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Natural log with the argument clamped at kLogClamp.
Tensor log(const Tensor& a);
Tensor softmax(const Tensor& a, std::size_t axis);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);
/// Exact-erf GELU, x * Phi(x).
Tensor gelu(const Tensor& a);

/// Topological ordering of every node reachable from `root`: parents always
/// precede consumers and each node appears exactly once.
class ComputeGraph {
public:
    explicit ComputeGraph(const Tensor& root);
    const std::vector<detail::Node*>& order() const { return order_; }
    std::size_t node_count() const { return order_.size(); }

private:
    std::vector<std::shared_ptr<detail::Node>> keep_alive_;
    std::vector<detail::Node*> order_;
};

/// Reverse-mode sweep from a scalar loss. Visits each reachable node once
/// and accumulates gradients onto every tensor with requires_grad.
void backward(const Tensor& loss);

} // namespace vitray
