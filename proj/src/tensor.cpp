#include "nsde/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace nsde {

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(std::move(values)) {
    if (shape_size(shape_) != values_.size()) {
        throw ShapeError("tensor shape " + shape_string(shape_) + " does not match " +
                         std::to_string(values_.size()) + " values");
    }
}

Tensor Tensor::zeros(Shape shape) { return filled(std::move(shape), 0.0); }

Tensor Tensor::filled(Shape shape, double value) {
    const auto n = shape_size(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> values;
    values.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw ShapeError("ragged matrix literal");
        values.insert(values.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(values));
}

Tensor Tensor::row(std::span<const double> values) {
    return Tensor({1, values.size()}, std::vector<double>(values.begin(), values.end()));
}

std::size_t Tensor::rows() const {
    if (rank() != 2) throw ShapeError("expected a rank-2 tensor, got " + shape_string(shape_));
    return shape_[0];
}

std::size_t Tensor::cols() const {
    if (rank() != 2) throw ShapeError("expected a rank-2 tensor, got " + shape_string(shape_));
    return shape_[1];
}

std::span<const double> Tensor::row_values(std::size_t r) const {
    const std::size_t c = cols();
    return std::span<const double>(values_).subspan(r * c, c);
}

double Tensor::item() const {
    if (values_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape_));
    return values_[0];
}

bool Tensor::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

const char* op_name(OpKind kind) {
    switch (kind) {
        case OpKind::leaf: return "leaf";
        case OpKind::add: return "add";
        case OpKind::sub: return "sub";
        case OpKind::mul: return "mul";
        case OpKind::div: return "div";
        case OpKind::matmul: return "matmul";
        case OpKind::transpose: return "transpose";
        case OpKind::tanh: return "tanh";
        case OpKind::softplus: return "softplus";
        case OpKind::exp: return "exp";
        case OpKind::log: return "log";
        case OpKind::square: return "square";
        case OpKind::sum: return "sum";
        case OpKind::mean: return "mean";
        case OpKind::broadcast: return "broadcast";
        case OpKind::concat: return "concat";
        case OpKind::slice: return "slice";
        case OpKind::scale: return "scale";
        case OpKind::add_scalar: return "add_scalar";
        case OpKind::detach: return "detach";
    }
    return "?";
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

// ---------------------------------------------------------------------------
// Var / Tape

const Tensor& Var::value() const {
    if (!tape_) throw Error("use of an unbound Var");
    return tape_->nodes_[id_].value;
}

bool Var::requires_grad() const {
    if (!tape_) throw Error("use of an unbound Var");
    return tape_->nodes_[id_].requires_grad;
}

Tensor Var::grad() const {
    const auto& node = tape_->nodes_[id_];
    if (node.grad.empty()) return Tensor::zeros(node.value.shape());
    return Tensor(node.value.shape(), node.grad);
}

Var Tape::leaf(Tensor value, bool requires_grad) {
    if (consumed_) throw Error("tape already consumed by backward(); call reset()");
    if (!value.all_finite()) throw NonFiniteError("leaf tensor holds a non-finite value");
    Node node;
    node.kind = OpKind::leaf;
    node.value = std::move(value);
    node.requires_grad = requires_grad;
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
}

Var Tape::record(OpKind kind, std::vector<std::size_t> inputs, Tensor value, BackwardFn fn) {
    if (consumed_) throw Error("tape already consumed by backward(); call reset()");
    if (!value.all_finite()) {
        throw NonFiniteError(std::string("non-finite output from ") + op_name(kind));
    }
    Node node;
    node.kind = kind;
    node.requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                     [this](std::size_t i) { return nodes_[i].requires_grad; });
    node.inputs = std::move(inputs);
    node.value = std::move(value);
    if (node.requires_grad) node.backward = std::move(fn);
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
}

std::span<double> Tape::grad_buffer(std::size_t id) {
    auto& node = nodes_[id];
    if (node.grad.empty()) node.grad.assign(node.value.size(), 0.0);
    return node.grad;
}

void Tape::check_owned(const Var& v, const char* what) const {
    if (v.tape_ != this || v.id_ >= nodes_.size()) {
        throw Error(std::string(what) + ": variable does not belong to this tape");
    }
}

void Tape::backward(const Var& output) {
    check_owned(output, "backward");
    if (consumed_) throw Error("backward() called twice on the same tape");
    const auto& out = nodes_[output.id_];
    if (out.value.size() != 1) {
        throw ShapeError("backward() needs a one-element output, got " + shape_string(out.value.shape()));
    }
    for (auto& n : nodes_) n.grad.clear();
    consumed_ = true;
    if (!out.requires_grad) return;
    grad_buffer(output.id_)[0] = 1.0;
    for (std::size_t i = output.id_ + 1; i-- > 0;) {
        const Node& node = nodes_[i];
        if (node.backward && !node.grad.empty()) node.backward(*this, node);
    }
}

void Tape::reset() {
    nodes_.clear();
    consumed_ = false;
}

// ---------------------------------------------------------------------------
// Primitive ops

namespace {

Tape& tape_of(const Var& a) {
    if (!a.valid()) throw Error("use of an unbound Var");
    return *a.tape();
}

Tape& tape_of(const Var& a, const Var& b) {
    Tape& t = tape_of(a);
    if (b.tape() != &t) throw Error("operands live on different tapes");
    return t;
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
    }
}

void require_rank2(const Var& a, const char* op) {
    if (a.value().rank() != 2) {
        throw ShapeError(std::string(op) + ": expected rank-2 operand, got " + shape_string(a.shape()));
    }
}

// Elementwise unary op with derivative expressed through input x and output y.
template <class Fwd, class Deriv>
Var unary(const Var& a, OpKind kind, Fwd fwd, Deriv deriv) {
    Tape& t = tape_of(a);
    const Tensor& x = a.value();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(x[i]);
    const std::size_t ia = a.id();
    return t.record(kind, {ia}, Tensor(x.shape(), std::move(out)), [ia, deriv](Tape& tp, const Tape::Node& self) {
        const Tensor& xv = tp.node(ia).value;
        auto g = tp.grad_buffer(ia);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * deriv(xv[i], self.value[i]);
    });
}

}  // namespace

Var add(const Var& a, const Var& b) {
    Tape& t = tape_of(a, b);
    require_same_shape(a, b, "add");
    const Tensor& x = a.value();
    const Tensor& y = b.value();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
    const std::size_t ia = a.id(), ib = b.id();
    return t.record(OpKind::add, {ia, ib}, Tensor(x.shape(), std::move(out)), [ia, ib](Tape& tp, const Tape::Node& self) {
        for (std::size_t id : {ia, ib}) {
            if (!tp.needs_grad(id)) continue;
            auto g = tp.grad_buffer(id);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
    });
}

Var sub(const Var& a, const Var& b) {
    Tape& t = tape_of(a, b);
    require_same_shape(a, b, "sub");
    const Tensor& x = a.value();
    const Tensor& y = b.value();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
    const std::size_t ia = a.id(), ib = b.id();
    return t.record(OpKind::sub, {ia, ib}, Tensor(x.shape(), std::move(out)), [ia, ib](Tape& tp, const Tape::Node& self) {
        if (tp.needs_grad(ia)) {
            auto g = tp.grad_buffer(ia);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (tp.needs_grad(ib)) {
            auto g = tp.grad_buffer(ib);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
        }
    });
}

Var mul(const Var& a, const Var& b) {
    Tape& t = tape_of(a, b);
    require_same_shape(a, b, "mul");
    const Tensor& x = a.value();
    const Tensor& y = b.value();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
    const std::size_t ia = a.id(), ib = b.id();
    return t.record(OpKind::mul, {ia, ib}, Tensor(x.shape(), std::move(out)), [ia, ib](Tape& tp, const Tape::Node& self) {
        const Tensor& xv = tp.node(ia).value;
        const Tensor& yv = tp.node(ib).value;
        if (tp.needs_grad(ia)) {
            auto g = tp.grad_buffer(ia);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * yv[i];
        }
        if (tp.needs_grad(ib)) {
            auto g = tp.grad_buffer(ib);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * xv[i];
        }
    });
}

Var div(const Var& a, const Var& b) {
    Tape& t = tape_of(a, b);
    require_same_shape(a, b, "div");
    const Tensor& x = a.value();
    const Tensor& y = b.value();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] / y[i];
    const std::size_t ia = a.id(), ib = b.id();
    return t.record(OpKind::div, {ia, ib}, Tensor(x.shape(), std::move(out)), [ia, ib](Tape& tp, const Tape::Node& self) {
        const Tensor& yv = tp.node(ib).value;
        if (tp.needs_grad(ia)) {
            auto g = tp.grad_buffer(ia);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / yv[i];
        }
        if (tp.needs_grad(ib)) {
            auto g = tp.grad_buffer(ib);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i] * self.value[i] / yv[i];
        }
    });
}

Var matmul(const Var& a, const Var& b) {
    Tape& t = tape_of(a, b);
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    const Tensor& x = a.value();
    const Tensor& y = b.value();
    const std::size_t m = x.rows(), k = x.cols(), n = y.cols();
    if (y.rows() != k) {
        throw ShapeError("matmul: inner dimensions differ " + shape_string(x.shape()) + " x " + shape_string(y.shape()));
    }
    std::vector<double> out(m * n, 0.0);
    const double* xp = x.values().data();
    const double* yp = y.values().data();
    for (std::size_t i = 0; i < m; ++i) {
        double* row = out.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double s = xp[i * k + p];
            const double* yrow = yp + p * n;
            for (std::size_t j = 0; j < n; ++j) row[j] += s * yrow[j];
        }
    }
    const std::size_t ia = a.id(), ib = b.id();
    return t.record(OpKind::matmul, {ia, ib}, Tensor({m, n}, std::move(out)),
                    [ia, ib, m, k, n](Tape& tp, const Tape::Node& self) {
                        const double* xv = tp.node(ia).value.values().data();
                        const double* yv = tp.node(ib).value.values().data();
                        const double* g = self.grad.data();
                        if (tp.needs_grad(ia)) {
                            // dA = G · Bᵀ
                            auto ga = tp.grad_buffer(ia);
                            for (std::size_t i = 0; i < m; ++i) {
                                for (std::size_t p = 0; p < k; ++p) {
                                    double s = 0.0;
                                    for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * yv[p * n + j];
                                    ga[i * k + p] += s;
                                }
                            }
                        }
                        if (tp.needs_grad(ib)) {
                            // dB = Aᵀ · G
                            auto gb = tp.grad_buffer(ib);
                            for (std::size_t i = 0; i < m; ++i) {
                                for (std::size_t p = 0; p < k; ++p) {
                                    const double s = xv[i * k + p];
                                    for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += s * g[i * n + j];
                                }
                            }
                        }
                    });
}

Var transpose(const Var& a) {
    Tape& t = tape_of(a);
    require_rank2(a, "transpose");
    const Tensor& x = a.value();
    const std::size_t r = x.rows(), c = x.cols();
    std::vector<double> out(r * c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x[i * c + j];
    const std::size_t ia = a.id();
    return t.record(OpKind::transpose, {ia}, Tensor({c, r}, std::move(out)), [ia, r, c](Tape& tp, const Tape::Node& self) {
        auto g = tp.grad_buffer(ia);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j * r + i];
    });
}

Var tanh(const Var& a) {
    return unary(
        a, OpKind::tanh, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var softplus(const Var& a) {
    return unary(
        a, OpKind::softplus, [](double x) { return softplus(x); },
        [](double x, double) {
            // logistic(x), evaluated without overflow
            if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
            const double e = std::exp(x);
            return e / (1.0 + e);
        });
}

Var exp(const Var& a) {
    return unary(
        a, OpKind::exp, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(const Var& a) {
    for (double v : a.value().values()) {
        if (!(v > 0.0)) throw DomainError("log of non-positive value " + std::to_string(v));
    }
    return unary(
        a, OpKind::log, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var square(const Var& a) {
    return unary(
        a, OpKind::square, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var sum(const Var& a) {
    Tape& t = tape_of(a);
    double s = 0.0;
    for (double v : a.value().values()) s += v;
    const std::size_t ia = a.id();
    return t.record(OpKind::sum, {ia}, Tensor::scalar(s), [ia](Tape& tp, const Tape::Node& self) {
        auto g = tp.grad_buffer(ia);
        for (double& v : g) v += self.grad[0];
    });
}

Var mean(const Var& a) {
    Tape& t = tape_of(a);
    const std::size_t n = a.value().size();
    if (n == 0) throw ShapeError("mean of an empty tensor");
    double s = 0.0;
    for (double v : a.value().values()) s += v;
    const std::size_t ia = a.id();
    return t.record(OpKind::mean, {ia}, Tensor::scalar(s / static_cast<double>(n)), [ia, n](Tape& tp, const Tape::Node& self) {
        auto g = tp.grad_buffer(ia);
        const double share = self.grad[0] / static_cast<double>(n);
        for (double& v : g) v += share;
    });
}

Var broadcast_rows(const Var& row, std::size_t rows) {
    Tape& t = tape_of(row);
    require_rank2(row, "broadcast");
    if (row.value().rows() != 1) throw ShapeError("broadcast: expected a 1xn row, got " + shape_string(row.shape()));
    const std::size_t n = row.value().cols();
    std::vector<double> out(rows * n);
    for (std::size_t r = 0; r < rows; ++r) std::copy_n(row.value().values().data(), n, out.data() + r * n);
    const std::size_t ia = row.id();
    return t.record(OpKind::broadcast, {ia}, Tensor({rows, n}, std::move(out)), [ia, rows, n](Tape& tp, const Tape::Node& self) {
        auto g = tp.grad_buffer(ia);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[r * n + j];
    });
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw ShapeError("concat of zero operands");
    Tape& t = tape_of(parts[0]);
    require_rank2(parts[0], "concat");
    const std::size_t rows = parts[0].value().rows();
    std::vector<std::size_t> ids, widths;
    std::size_t total = 0;
    for (const Var& p : parts) {
        if (p.tape() != &t) throw Error("operands live on different tapes");
        require_rank2(p, "concat");
        if (p.value().rows() != rows) throw ShapeError("concat: row counts differ");
        ids.push_back(p.id());
        widths.push_back(p.value().cols());
        total += p.value().cols();
    }
    std::vector<double> out(rows * total);
    std::size_t col = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const Tensor& v = parts[k].value();
        for (std::size_t r = 0; r < rows; ++r)
            std::copy_n(v.values().data() + r * widths[k], widths[k], out.data() + r * total + col);
        col += widths[k];
    }
    return t.record(OpKind::concat, ids, Tensor({rows, total}, std::move(out)),
                    [ids, widths, rows, total](Tape& tp, const Tape::Node& self) {
                        std::size_t c0 = 0;
                        for (std::size_t k = 0; k < ids.size(); ++k) {
                            if (tp.needs_grad(ids[k])) {
                                auto g = tp.grad_buffer(ids[k]);
                                for (std::size_t r = 0; r < rows; ++r)
                                    for (std::size_t j = 0; j < widths[k]; ++j)
                                        g[r * widths[k] + j] += self.grad[r * total + c0 + j];
                            }
                            c0 += widths[k];
                        }
                    });
}

Var slice(const Var& a, std::size_t offset, Shape shape) {
    Tape& t = tape_of(a);
    const std::size_t n = shape_size(shape);
    if (offset + n > a.value().size()) {
        throw ShapeError("slice: range [" + std::to_string(offset) + ", " + std::to_string(offset + n) +
                         ") exceeds tensor of size " + std::to_string(a.value().size()));
    }
    auto src = a.value().values().subspan(offset, n);
    const std::size_t ia = a.id();
    return t.record(OpKind::slice, {ia}, Tensor(std::move(shape), std::vector<double>(src.begin(), src.end())),
                    [ia, offset, n](Tape& tp, const Tape::Node& self) {
                        auto g = tp.grad_buffer(ia);
                        for (std::size_t i = 0; i < n; ++i) g[offset + i] += self.grad[i];
                    });
}

Var scale(const Var& a, double factor) {
    return unary(
        a, OpKind::scale, [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Var add_scalar(const Var& a, double offset) {
    return unary(
        a, OpKind::add_scalar, [offset](double x) { return x + offset; }, [](double, double) { return 1.0; });
}

Var detach(const Var& a) {
    Tape& t = tape_of(a);
    return t.record(OpKind::detach, {}, a.value(), nullptr);
}

}  // namespace nsde
