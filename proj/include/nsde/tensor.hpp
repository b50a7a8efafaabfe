#pragma once

// Dense float64 tensors and a tape-based reverse-mode differentiator.
//
// `Tensor` is a plain value: a shape and a flat row-major array. `Tape`
// records the primitive operations applied to `Var` handles; a `Var` is a
// tensor that lives on a tape and carries a gradient slot. Calling
// `Tape::backward` on a scalar output fills the gradient of every node that
// depends on a leaf created with `requires_grad = true`.
//
// A tape and its vars belong to one thread. Plain tensors are immutable
// values once built and may be shared freely.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "nsde/error.hpp"

namespace nsde {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> values);

    static Tensor zeros(Shape shape);
    static Tensor filled(Shape shape, double value);
    static Tensor scalar(double value);
    // Row-major matrix from nested braces: {{1, 2}, {3, 4}}.
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
    static Tensor row(std::span<const double> values);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t size() const noexcept { return values_.size(); }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t rows() const;
    std::size_t cols() const;

    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }
    double at(std::size_t r, std::size_t c) const { return values_[r * shape_[1] + c]; }
    double& at(std::size_t r, std::size_t c) { return values_[r * shape_[1] + c]; }

    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }
    std::span<const double> row_values(std::size_t r) const;

    // Value of a one-element tensor.
    double item() const;
    bool all_finite() const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    std::vector<double> values_;
};

enum class OpKind {
    leaf,
    add,
    sub,
    mul,
    div,
    matmul,
    transpose,
    tanh,
    softplus,
    exp,
    log,
    square,
    sum,
    mean,
    broadcast,
    concat,
    slice,
    scale,
    add_scalar,
    detach,
};

const char* op_name(OpKind kind);

class Tape;

class Var {
public:
    Var() = default;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    bool requires_grad() const;
    // Gradient accumulated by the last backward pass; zeros when the node
    // did not receive any.
    Tensor grad() const;

    Tape* tape() const noexcept { return tape_; }
    std::size_t id() const noexcept { return id_; }
    bool valid() const noexcept { return tape_ != nullptr; }

private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

class Tape {
public:
    struct Node;
    // Adds d(output)/d(inputs) into the input gradients, given the node.
    using BackwardFn = std::function<void(Tape&, const Node&)>;

    struct Node {
        OpKind kind = OpKind::leaf;
        std::vector<std::size_t> inputs;
        Tensor value;
        bool requires_grad = false;
        std::vector<double> grad;
        BackwardFn backward;
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var leaf(Tensor value, bool requires_grad = true);
    Var constant(Tensor value) { return leaf(std::move(value), false); }

    // Reverse sweep from a one-element output. Each recorded op is visited
    // once, newest first. The tape is consumed afterwards: further ops or a
    // second backward throw until reset().
    void backward(const Var& output);
    void reset();

    bool consumed() const noexcept { return consumed_; }
    std::size_t size() const noexcept { return nodes_.size(); }
    const Node& node(std::size_t id) const { return nodes_.at(id); }

    // Records an op. `fn` is dropped when no input requires a gradient.
    Var record(OpKind kind, std::vector<std::size_t> inputs, Tensor value, BackwardFn fn);

    // Gradient buffer of a node, allocated on first use.
    std::span<double> grad_buffer(std::size_t id);
    bool needs_grad(std::size_t id) const { return nodes_[id].requires_grad; }

private:
    friend class Var;
    void check_owned(const Var& v, const char* what) const;

    std::vector<Node> nodes_;
    bool consumed_ = false;
};

// Primitive ops. All shapes are checked and every output is checked for
// finiteness; violations throw ShapeError / DomainError / NonFiniteError.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var tanh(const Var& a);
Var softplus(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var square(const Var& a);
Var sum(const Var& a);
Var mean(const Var& a);
// Repeats a 1×n row `rows` times.
Var broadcast_rows(const Var& row, std::size_t rows);
// Joins rank-2 operands with equal row counts side by side.
Var concat_cols(std::span<const Var> parts);
// Contiguous block of the flat value array, reshaped.
Var slice(const Var& a, std::size_t offset, Shape shape);
Var scale(const Var& a, double factor);
Var add_scalar(const Var& a, double offset);
// Same value, no gradient path.
Var detach(const Var& a);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return div(a, b); }
inline Var operator*(double c, const Var& a) { return scale(a, c); }
inline Var operator*(const Var& a, double c) { return scale(a, c); }
inline Var operator+(const Var& a, double c) { return add_scalar(a, c); }

// Numerically stable ln(1 + e^x).
double softplus(double x);

}  // namespace nsde
