#include "vitray/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>
#include <unordered_set>

#include "vitray/kernels.hpp"

namespace vitray {

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << " x ";
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_size(const Shape& shape) {
    std::size_t total = 1;
    for (std::size_t d : shape) total *= d;
    return total;
}

namespace detail {

void accumulate_grad(Node& node, const double* delta, std::size_t n) {
    if (!node.requires_grad) return;
    if (node.grad.empty()) node.grad.assign(node.value.size(), 0.0);
    kernels::axpy(1.0, delta, node.grad.data(), n);
}

} // namespace detail

namespace {

using detail::Node;

std::shared_ptr<Node> make_node(Shape shape) {
    auto node = std::make_shared<Node>();
    node->value.assign(shape_size(shape), 0.0);
    node->shape = std::move(shape);
    return node;
}

void check_finite(const std::vector<double>& values, const char* op) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string("non-finite value at op boundary: ") + op);
        }
    }
}

void require_rank2(const Tensor& t, const char* op) {
    if (t.rank() != 2) {
        throw ShapeError(std::string(op) + ": expected a rank-2 tensor, got " +
                         shape_str(t.shape()));
    }
}

void require_defined(const Tensor& t, const char* op) {
    if (!t.defined()) throw ContractError(std::string(op) + ": undefined tensor");
}

/// Wires parents and the backward closure iff some input carries gradient.
template <typename Fn>
Tensor finish(std::shared_ptr<Node> out, std::vector<std::shared_ptr<Node>> parents,
              const char* op, Fn&& backward_fn) {
    check_finite(out->value, op);
    bool needs_grad = false;
    for (const auto& p : parents) needs_grad = needs_grad || p->requires_grad;
    if (needs_grad) {
        out->requires_grad = true;
        out->parents = std::move(parents);
        out->backward_fn = std::forward<Fn>(backward_fn);
    }
    return Tensor(std::move(out));
}

void ensure_grad(Node& node) {
    if (node.grad.empty()) node.grad.assign(node.value.size(), 0.0);
}

} // namespace

// ---------------------------------------------------------------------------
// Tensor handle
// ---------------------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    auto node = make_node(std::move(shape));
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    if (!std::isfinite(value)) throw NumericError("non-finite fill value");
    auto node = make_node(std::move(shape));
    std::fill(node->value.begin(), node->value.end(), value);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    if (shape_size(shape) != data.size()) {
        throw ShapeError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
    }
    check_finite(data, "tensor construction");
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(data);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from_data({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const { return n().shape; }
std::size_t Tensor::size() const { return n().value.size(); }
std::size_t Tensor::rank() const { return n().shape.size(); }

std::size_t Tensor::rows() const {
    require_rank2(*this, "rows");
    return n().shape[0];
}

std::size_t Tensor::cols() const {
    require_rank2(*this, "cols");
    return n().shape[1];
}

const double* Tensor::data() const { return n().value.data(); }
const std::vector<double>& Tensor::values() const { return n().value; }
double* Tensor::mutable_data() { return n().value.data(); }

double Tensor::item() const {
    if (size() != 1) {
        throw ContractError("item(): tensor has " + std::to_string(size()) + " elements");
    }
    return n().value[0];
}

double Tensor::operator()(std::size_t i, std::size_t j) const {
    require_rank2(*this, "operator()");
    return n().value[i * n().shape[1] + j];
}

bool Tensor::requires_grad() const { return n().requires_grad; }
bool Tensor::has_grad() const { return !n().grad.empty(); }

const std::vector<double>& Tensor::grad() const {
    if (!has_grad()) throw ContractError("gradient not populated; run backward() first");
    return n().grad;
}

void Tensor::clear_grad() { n().grad.clear(); }

detail::Node& Tensor::n() {
    if (!node_) throw ContractError("use of an undefined tensor");
    return *node_;
}

const detail::Node& Tensor::n() const {
    if (!node_) throw ContractError("use of an undefined tensor");
    return *node_;
}

// ---------------------------------------------------------------------------
// Recorded ops
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_defined(a, "matmul");
    require_defined(b, "matmul");
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions disagree: " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    }
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    auto out = make_node({m, n});
    kernels::matmul(a.data(), b.data(), out->value.data(), m, k, n);
    return finish(
        std::move(out), {a.node(), b.node()}, "matmul",
        [m, k, n](Node& self) {
            auto& an = *self.parents[0];
            auto& bn = *self.parents[1];
            if (an.requires_grad) {
                std::vector<double> da(m * k);
                kernels::matmul_nt(self.grad.data(), bn.value.data(), da.data(), m, n, k);
                detail::accumulate_grad(an, da.data(), da.size());
            }
            if (bn.requires_grad) {
                std::vector<double> db(k * n);
                kernels::matmul_tn(an.value.data(), self.grad.data(), db.data(), m, k, n);
                detail::accumulate_grad(bn, db.data(), db.size());
            }
        });
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_defined(a, "add");
    require_defined(b, "add");
    if (a.shape() != b.shape()) {
        throw ShapeError("add: shapes disagree: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
    auto out = make_node(a.shape());
    kernels::add(a.data(), b.data(), out->value.data(), a.size());
    return finish(std::move(out), {a.node(), b.node()}, "add", [](Node& self) {
        detail::accumulate_grad(*self.parents[0], self.grad.data(), self.grad.size());
        detail::accumulate_grad(*self.parents[1], self.grad.data(), self.grad.size());
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_defined(a, "mul");
    require_defined(b, "mul");
    if (a.shape() != b.shape()) {
        throw ShapeError("mul: shapes disagree: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
    auto out = make_node(a.shape());
    kernels::mul(a.data(), b.data(), out->value.data(), a.size());
    return finish(std::move(out), {a.node(), b.node()}, "mul", [](Node& self) {
        auto& an = *self.parents[0];
        auto& bn = *self.parents[1];
        std::vector<double> tmp(self.grad.size());
        if (an.requires_grad) {
            kernels::mul(self.grad.data(), bn.value.data(), tmp.data(), tmp.size());
            detail::accumulate_grad(an, tmp.data(), tmp.size());
        }
        if (bn.requires_grad) {
            kernels::mul(self.grad.data(), an.value.data(), tmp.data(), tmp.size());
            detail::accumulate_grad(bn, tmp.data(), tmp.size());
        }
    });
}

Tensor scale(const Tensor& a, double s) {
    require_defined(a, "scale");
    if (!std::isfinite(s)) throw NumericError("non-finite scale factor");
    auto out = make_node(a.shape());
    kernels::scale(a.data(), s, out->value.data(), a.size());
    return finish(std::move(out), {a.node()}, "scale", [s](Node& self) {
        auto& an = *self.parents[0];
        if (!an.requires_grad) return;
        if (an.grad.empty()) an.grad.assign(an.value.size(), 0.0);
        kernels::axpy(s, self.grad.data(), an.grad.data(), self.grad.size());
    });
}

Tensor add_bias_row(const Tensor& m, const Tensor& bias) {
    require_defined(m, "add_bias_row");
    require_defined(bias, "add_bias_row");
    require_rank2(m, "add_bias_row");
    if (bias.rank() != 1 || bias.size() != m.cols()) {
        throw ShapeError("add_bias_row: bias " + shape_str(bias.shape()) +
                         " does not match matrix " + shape_str(m.shape()));
    }
    const std::size_t rows = m.rows(), cols = m.cols();
    auto out = make_node({rows, cols});
    kernels::add_bias_rows(m.data(), bias.data(), out->value.data(), rows, cols);
    return finish(std::move(out), {m.node(), bias.node()}, "add_bias_row",
                  [rows, cols](Node& self) {
                      detail::accumulate_grad(*self.parents[0], self.grad.data(),
                                              self.grad.size());
                      auto& bn = *self.parents[1];
                      if (bn.requires_grad) {
                          std::vector<double> db(cols);
                          kernels::col_sum(self.grad.data(), db.data(), rows, cols);
                          detail::accumulate_grad(bn, db.data(), cols);
                      }
                  });
}

Tensor transpose(const Tensor& a) {
    require_defined(a, "transpose");
    require_rank2(a, "transpose");
    const std::size_t r = a.rows(), c = a.cols();
    auto out = make_node({c, r});
    const double* src = a.data();
    double* dst = out->value.data();
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) dst[j * r + i] = src[i * c + j];
    }
    return finish(std::move(out), {a.node()}, "transpose", [r, c](Node& self) {
        auto& an = *self.parents[0];
        if (!an.requires_grad) return;
        std::vector<double> da(r * c);
        for (std::size_t i = 0; i < c; ++i) {
            for (std::size_t j = 0; j < r; ++j) da[j * c + i] = self.grad[i * r + j];
        }
        detail::accumulate_grad(an, da.data(), da.size());
    });
}

Tensor reshape(const Tensor& a, Shape shape) {
    require_defined(a, "reshape");
    if (shape_size(shape) != a.size()) {
        throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                         shape_str(shape));
    }
    auto out = make_node(std::move(shape));
    out->value = a.values();
    return finish(std::move(out), {a.node()}, "reshape", [](Node& self) {
        detail::accumulate_grad(*self.parents[0], self.grad.data(), self.grad.size());
    });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ContractError("concat_rows: no tensors given");
    std::size_t cols = 0, rows = 0;
    for (const auto& p : parts) {
        require_defined(p, "concat_rows");
        require_rank2(p, "concat_rows");
        if (cols == 0) cols = p.cols();
        if (p.cols() != cols) {
            throw ShapeError("concat_rows: column counts disagree: " +
                             shape_str(parts[0].shape()) + " vs " + shape_str(p.shape()));
        }
        rows += p.rows();
    }
    auto out = make_node({rows, cols});
    std::vector<std::shared_ptr<Node>> parents;
    std::vector<std::size_t> row_counts;
    std::size_t at = 0;
    for (const auto& p : parts) {
        std::memcpy(out->value.data() + at * cols, p.data(), p.size() * sizeof(double));
        at += p.rows();
        parents.push_back(p.node());
        row_counts.push_back(p.rows());
    }
    return finish(std::move(out), std::move(parents), "concat_rows",
                  [row_counts, cols](Node& self) {
                      std::size_t start = 0;
                      for (std::size_t i = 0; i < row_counts.size(); ++i) {
                          detail::accumulate_grad(*self.parents[i],
                                                  self.grad.data() + start * cols,
                                                  row_counts[i] * cols);
                          start += row_counts[i];
                      }
                  });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
    require_defined(a, "slice_rows");
    require_rank2(a, "slice_rows");
    if (begin >= end || end > a.rows()) {
        throw ContractError("slice_rows: range [" + std::to_string(begin) + ", " +
                            std::to_string(end) + ") invalid for " + shape_str(a.shape()));
    }
    const std::size_t cols = a.cols(), out_rows = end - begin;
    auto out = make_node({out_rows, cols});
    std::memcpy(out->value.data(), a.data() + begin * cols,
                out_rows * cols * sizeof(double));
    return finish(std::move(out), {a.node()}, "slice_rows", [begin, cols](Node& self) {
        auto& an = *self.parents[0];
        if (!an.requires_grad) return;
        ensure_grad(an);
        kernels::axpy(1.0, self.grad.data(), an.grad.data() + begin * cols,
                      self.grad.size());
    });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ContractError("concat_cols: no tensors given");
    std::size_t rows = 0, cols = 0;
    for (const auto& p : parts) {
        require_defined(p, "concat_cols");
        require_rank2(p, "concat_cols");
        if (rows == 0) rows = p.rows();
        if (p.rows() != rows) {
            throw ShapeError("concat_cols: row counts disagree: " +
                             shape_str(parts[0].shape()) + " vs " + shape_str(p.shape()));
        }
        cols += p.cols();
    }
    auto out = make_node({rows, cols});
    std::vector<std::shared_ptr<Node>> parents;
    std::vector<std::size_t> col_counts;
    std::size_t at = 0;
    for (const auto& p : parts) {
        const double* src = p.data();
        std::size_t pc = p.cols();
        for (std::size_t i = 0; i < rows; ++i) {
            std::memcpy(out->value.data() + i * cols + at, src + i * pc,
                        pc * sizeof(double));
        }
        at += pc;
        parents.push_back(p.node());
        col_counts.push_back(pc);
    }
    return finish(std::move(out), std::move(parents), "concat_cols",
                  [col_counts, rows, cols](Node& self) {
                      std::size_t start = 0;
                      for (std::size_t idx = 0; idx < col_counts.size(); ++idx) {
                          auto& pn = *self.parents[idx];
                          std::size_t pc = col_counts[idx];
                          if (pn.requires_grad) {
                              ensure_grad(pn);
                              for (std::size_t i = 0; i < rows; ++i) {
                                  kernels::serial::axpy(
                                      1.0, self.grad.data() + i * cols + start,
                                      pn.grad.data() + i * pc, pc);
                              }
                          }
                          start += pc;
                      }
                  });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
    require_defined(a, "slice_cols");
    require_rank2(a, "slice_cols");
    if (begin >= end || end > a.cols()) {
        throw ContractError("slice_cols: range [" + std::to_string(begin) + ", " +
                            std::to_string(end) + ") invalid for " + shape_str(a.shape()));
    }
    const std::size_t rows = a.rows(), cols = a.cols(), out_cols = end - begin;
    auto out = make_node({rows, out_cols});
    for (std::size_t i = 0; i < rows; ++i) {
        std::memcpy(out->value.data() + i * out_cols, a.data() + i * cols + begin,
                    out_cols * sizeof(double));
    }
    return finish(std::move(out), {a.node()}, "slice_cols",
                  [begin, rows, cols, out_cols](Node& self) {
                      auto& an = *self.parents[0];
                      if (!an.requires_grad) return;
                      ensure_grad(an);
                      for (std::size_t i = 0; i < rows; ++i) {
                          kernels::serial::axpy(1.0, self.grad.data() + i * out_cols,
                                                an.grad.data() + i * cols + begin,
                                                out_cols);
                      }
                  });
}

Tensor sum(const Tensor& a) {
    require_defined(a, "sum");
    auto out = make_node({1});
    out->value[0] = kernels::sum(a.data(), a.size());
    return finish(std::move(out), {a.node()}, "sum", [](Node& self) {
        auto& an = *self.parents[0];
        if (!an.requires_grad) return;
        ensure_grad(an);
        double g = self.grad[0];
        for (double& v : an.grad) v += g;
    });
}

Tensor mean(const Tensor& a) {
    require_defined(a, "mean");
    auto out = make_node({1});
    const auto n = static_cast<double>(a.size());
    out->value[0] = kernels::sum(a.data(), a.size()) / n;
    return finish(std::move(out), {a.node()}, "mean", [n](Node& self) {
        auto& an = *self.parents[0];
        if (!an.requires_grad) return;
        ensure_grad(an);
        double g = self.grad[0] / n;
        for (double& v : an.grad) v += g;
    });
}

Tensor log(const Tensor& a) {
    require_defined(a, "log");
    auto out = make_node(a.shape());
    const double* x = a.data();
    for (std::size_t i = 0; i < a.size(); ++i) {
        out->value[i] = std::log(x[i] < kLogClamp ? kLogClamp : x[i]);
    }
    return finish(std::move(out), {a.node()}, "log", [](Node& self) {
        auto& an = *self.parents[0];
        if (!an.requires_grad) return;
        ensure_grad(an);
        // Derivative of log(max(x, clamp)): zero on the clamped flat.
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            double x = an.value[i];
            if (x >= kLogClamp) an.grad[i] += self.grad[i] / x;
        }
    });
}

Tensor softmax(const Tensor& a, std::size_t axis) {
    require_defined(a, "softmax");
    if (axis >= a.rank()) {
        throw ContractError("softmax: axis " + std::to_string(axis) +
                            " out of range for " + shape_str(a.shape()));
    }
    std::size_t outer = 1, inner = 1;
    const std::size_t len = a.shape()[axis];
    for (std::size_t i = 0; i < axis; ++i) outer *= a.shape()[i];
    for (std::size_t i = axis + 1; i < a.rank(); ++i) inner *= a.shape()[i];
    auto out = make_node(a.shape());
    kernels::softmax_slices(a.data(), out->value.data(), outer, len, inner);
    return finish(std::move(out), {a.node()}, "softmax",
                  [outer, len, inner](Node& self) {
                      auto& an = *self.parents[0];
                      if (!an.requires_grad) return;
                      std::vector<double> dx(self.grad.size());
                      kernels::softmax_backward_slices(self.value.data(), self.grad.data(),
                                                       dx.data(), outer, len, inner);
                      detail::accumulate_grad(an, dx.data(), dx.size());
                  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    require_defined(x, "layer_norm");
    require_defined(gamma, "layer_norm");
    require_defined(beta, "layer_norm");
    if (eps <= 0.0) throw ContractError("layer_norm: eps must be positive");
    if (x.rank() == 0) throw ShapeError("layer_norm: scalar input");
    const std::size_t d = x.shape().back();
    if (gamma.rank() != 1 || beta.rank() != 1 || gamma.size() != d || beta.size() != d) {
        throw ShapeError("layer_norm: gamma " + shape_str(gamma.shape()) + " / beta " +
                         shape_str(beta.shape()) + " do not match last dim of " +
                         shape_str(x.shape()));
    }
    const std::size_t rows = x.size() / d;
    auto out = make_node(x.shape());
    auto row_mean = std::make_shared<std::vector<double>>(rows);
    auto row_rstd = std::make_shared<std::vector<double>>(rows);
    kernels::layer_norm_rows(x.data(), gamma.data(), beta.data(), eps, out->value.data(),
                             row_mean->data(), row_rstd->data(), rows, d);
    return finish(std::move(out), {x.node(), gamma.node(), beta.node()}, "layer_norm",
                  [rows, d, row_mean, row_rstd](Node& self) {
                      auto& xn = *self.parents[0];
                      auto& gn = *self.parents[1];
                      auto& bn = *self.parents[2];
                      std::vector<double> dx(rows * d, 0.0);
                      std::vector<double> dgamma(d, 0.0);
                      std::vector<double> dbeta(d, 0.0);
                      kernels::layer_norm_backward_rows(
                          xn.value.data(), gn.value.data(), row_mean->data(),
                          row_rstd->data(), self.grad.data(), dx.data(), dgamma.data(),
                          dbeta.data(), rows, d);
                      if (xn.requires_grad) detail::accumulate_grad(xn, dx.data(), dx.size());
                      if (gn.requires_grad) detail::accumulate_grad(gn, dgamma.data(), d);
                      if (bn.requires_grad) detail::accumulate_grad(bn, dbeta.data(), d);
                  });
}

Tensor gelu(const Tensor& a) {
    require_defined(a, "gelu");
    auto out = make_node(a.shape());
    kernels::gelu(a.data(), out->value.data(), a.size());
    return finish(std::move(out), {a.node()}, "gelu", [](Node& self) {
        auto& an = *self.parents[0];
        if (!an.requires_grad) return;
        std::vector<double> dx(self.grad.size());
        kernels::gelu_backward(an.value.data(), self.grad.data(), dx.data(), dx.size());
        detail::accumulate_grad(an, dx.data(), dx.size());
    });
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

ComputeGraph::ComputeGraph(const Tensor& root) {
    if (!root.defined()) throw ContractError("ComputeGraph: undefined root");
    std::unordered_set<const Node*> visited;
    struct Frame {
        Node* node;
        std::size_t next_parent;
    };
    std::vector<Frame> stack;
    auto discover = [&](const std::shared_ptr<Node>& n) {
        if (visited.insert(n.get()).second) {
            keep_alive_.push_back(n);
            stack.push_back({n.get(), 0});
        }
    };
    discover(root.node());
    while (!stack.empty()) {
        Frame& top = stack.back();
        if (top.next_parent < top.node->parents.size()) {
            discover(top.node->parents[top.next_parent++]);
        } else {
            order_.push_back(top.node);
            stack.pop_back();
        }
    }
}

void backward(const Tensor& loss) {
    require_defined(loss, "backward");
    if (loss.size() != 1) {
        throw ContractError("backward: loss must be scalar, got " +
                            shape_str(loss.shape()));
    }
    ComputeGraph graph(loss);
    loss.node()->grad.assign(1, 1.0);
    const auto& order = graph.order();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
    }
}

} // namespace vitray
