#include "nsde/nets.hpp"

#include <cmath>
#include <random>

namespace nsde {

const char* to_string(Activation a) { return a == Activation::tanh ? "tanh" : "softplus"; }
const char* to_string(Head h) { return h == Head::linear ? "linear" : "positive"; }

Activation parse_activation(const std::string& s) {
    if (s == "tanh") return Activation::tanh;
    if (s == "softplus") return Activation::softplus;
    throw DomainError("unknown activation '" + s + "'");
}

Head parse_head(const std::string& s) {
    if (s == "linear") return Head::linear;
    if (s == "positive") return Head::positive;
    throw DomainError("unknown head '" + s + "'");
}

void NetSpec::validate() const {
    if (input_dim == 0 || output_dim == 0) throw DomainError("network dimensions must be >= 1");
    for (std::size_t h : hidden_dims) {
        if (h == 0) throw DomainError("hidden layer width must be >= 1");
    }
    if (!(floor >= 0.0) || !std::isfinite(floor)) throw DomainError("positive-head floor must be finite and >= 0");
}

MlpParams::MlpParams(NetSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    dims_.push_back(spec_.input_dim);
    dims_.insert(dims_.end(), spec_.hidden_dims.begin(), spec_.hidden_dims.end());
    dims_.push_back(spec_.output_dim);
    activations_.assign(spec_.hidden_dims.size(), spec_.activation);
    std::size_t total = 0;
    for (std::size_t k = 0; k + 1 < dims_.size(); ++k) {
        offsets_.push_back(total);
        total += dims_[k] * dims_[k + 1] + dims_[k + 1];
    }
    values_.assign(total, 0.0);
}

std::span<double> MlpParams::weight(std::size_t k) {
    return std::span<double>(values_).subspan(weight_offset(k), layer_in(k) * layer_out(k));
}
std::span<const double> MlpParams::weight(std::size_t k) const {
    return std::span<const double>(values_).subspan(weight_offset(k), layer_in(k) * layer_out(k));
}
std::span<double> MlpParams::bias(std::size_t k) {
    return std::span<double>(values_).subspan(bias_offset(k), layer_out(k));
}
std::span<const double> MlpParams::bias(std::size_t k) const {
    return std::span<const double>(values_).subspan(bias_offset(k), layer_out(k));
}

void MlpParams::assign(std::span<const double> values) {
    if (values.size() != values_.size()) {
        throw ShapeError("parameter count mismatch: expected " + std::to_string(values_.size()) + ", got " +
                         std::to_string(values.size()));
    }
    values_.assign(values.begin(), values.end());
}

MlpParams init_params(const NetSpec& spec) {
    MlpParams params(spec);
    std::mt19937_64 rng(spec.init_seed);
    for (std::size_t k = 0; k < params.layer_count(); ++k) {
        const double bound = std::sqrt(3.0 / static_cast<double>(params.layer_in(k)));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (double& w : params.weight(k)) w = dist(rng);
    }
    return params;
}

BoundNet::BoundNet(Tape& tape, const MlpParams& params, bool requires_grad)
    : layout_(&params),
      params_var_(tape.leaf(Tensor({params.parameter_count()},
                                   std::vector<double>(params.values().begin(), params.values().end())),
                            requires_grad)) {}

BoundNet::BoundNet(const MlpParams& layout, Var flat_params) : layout_(&layout), params_var_(flat_params) {
    if (params_var_.value().size() != layout.parameter_count()) {
        throw ShapeError("flat parameter var has " + std::to_string(params_var_.value().size()) +
                         " values, network needs " + std::to_string(layout.parameter_count()));
    }
}

Var BoundNet::forward(const Var& x) const {
    const MlpParams& p = *layout_;
    if (x.value().rank() != 2 || x.value().cols() != p.input_dim()) {
        throw ShapeError("network expects batch x " + std::to_string(p.input_dim()) + " input, got " +
                         shape_string(x.shape()));
    }
    const std::size_t batch = x.value().rows();
    Var h = x;
    for (std::size_t k = 0; k < p.layer_count(); ++k) {
        const Var w = slice(params_var_, p.weight_offset(k), {p.layer_out(k), p.layer_in(k)});
        const Var b = slice(params_var_, p.bias_offset(k), {1, p.layer_out(k)});
        Var z = add(matmul(h, transpose(w)), broadcast_rows(b, batch));
        if (k + 1 < p.layer_count()) {
            h = p.activation(k) == Activation::tanh ? tanh(z) : softplus(z);
        } else {
            h = p.head() == Head::linear ? z : add_scalar(softplus(z), p.floor());
        }
    }
    return h;
}

Tensor mlp_forward(const MlpParams& params, const Tensor& x) {
    Tape tape;
    const BoundNet net(tape, params, false);
    return net.forward(tape.constant(x)).value();
}

NetSpec flow_spec(std::size_t state_dim, std::size_t history, std::vector<std::size_t> hidden, std::uint64_t seed) {
    NetSpec s;
    s.input_dim = state_dim * history;
    s.output_dim = state_dim;
    s.hidden_dims = std::move(hidden);
    s.head = Head::linear;
    s.init_seed = seed;
    return s;
}

NetSpec diffusion_spec(std::size_t state_dim, std::size_t history, std::vector<std::size_t> hidden, double sigma2_min,
                       std::uint64_t seed) {
    NetSpec s = flow_spec(state_dim, history, std::move(hidden), seed);
    s.head = Head::positive;
    s.floor = sigma2_min;
    return s;
}

NetSpec denoiser_spec(std::size_t state_dim, std::size_t history, std::vector<std::size_t> hidden, std::uint64_t seed) {
    NetSpec s = flow_spec(state_dim, history, std::move(hidden), seed);
    // The score lives in the full (windowed) input space.
    s.output_dim = state_dim * history;
    return s;
}

}  // namespace nsde
