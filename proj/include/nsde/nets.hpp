#pragma once

// Feed-forward networks for the drift ("flow"), the diagonal squared
// diffusion and the score denoiser.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nsde/tensor.hpp"

namespace nsde {

enum class Activation { tanh, softplus };
// `positive` outputs softplus(z) + floor, so every coordinate is >= floor.
enum class Head { linear, positive };

const char* to_string(Activation a);
const char* to_string(Head h);
Activation parse_activation(const std::string& s);
Head parse_head(const std::string& s);

struct NetSpec {
    std::size_t input_dim = 1;
    std::vector<std::size_t> hidden_dims{64, 64};
    std::size_t output_dim = 1;
    Activation activation = Activation::tanh;
    Head head = Head::linear;
    double floor = 0.0;  // sigma^2_min, positive head only
    std::uint64_t init_seed = 0;

    void validate() const;
};

// Parameters of one MLP, stored as a single flat array. Layer k holds a
// row-major weight block (out_k x in_k) followed by its bias (out_k).
class MlpParams {
public:
    MlpParams() = default;
    // All-zero parameters with the given architecture.
    explicit MlpParams(NetSpec spec);

    const NetSpec& spec() const noexcept { return spec_; }
    std::size_t input_dim() const noexcept { return spec_.input_dim; }
    std::size_t output_dim() const noexcept { return spec_.output_dim; }
    std::size_t layer_count() const noexcept { return dims_.size() - 1; }
    std::size_t layer_in(std::size_t k) const { return dims_.at(k); }
    std::size_t layer_out(std::size_t k) const { return dims_.at(k + 1); }
    Head head() const noexcept { return spec_.head; }
    double floor() const noexcept { return spec_.floor; }

    Activation activation(std::size_t hidden_layer) const { return activations_.at(hidden_layer); }
    void set_activation(std::size_t hidden_layer, Activation a) { activations_.at(hidden_layer) = a; }

    std::span<double> weight(std::size_t k);
    std::span<const double> weight(std::size_t k) const;
    std::span<double> bias(std::size_t k);
    std::span<const double> bias(std::size_t k) const;

    std::size_t weight_offset(std::size_t k) const { return offsets_.at(k); }
    std::size_t bias_offset(std::size_t k) const { return offsets_.at(k) + layer_in(k) * layer_out(k); }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }
    std::size_t parameter_count() const noexcept { return values_.size(); }
    // Replaces all values; sizes must match.
    void assign(std::span<const double> values);

    friend bool operator==(const MlpParams& a, const MlpParams& b) {
        return a.dims_ == b.dims_ && a.activations_ == b.activations_ && a.spec_.head == b.spec_.head &&
               a.spec_.floor == b.spec_.floor && a.values_ == b.values_;
    }

private:
    NetSpec spec_;
    std::vector<std::size_t> dims_;
    std::vector<Activation> activations_;
    std::vector<std::size_t> offsets_;
    std::vector<double> values_;
};

// Weights uniform in +-sqrt(3 / fan_in) (standard deviation 1/sqrt(fan_in)),
// biases zero. Deterministic in spec.init_seed.
MlpParams init_params(const NetSpec& spec);

// An MLP whose flat parameter vector lives on a tape.
class BoundNet {
public:
    BoundNet(Tape& tape, const MlpParams& params, bool requires_grad);
    // Uses an existing flat var as the parameters (e.g. a grad-check probe).
    BoundNet(const MlpParams& layout, Var flat_params);

    // x: batch x input_dim -> batch x output_dim
    Var forward(const Var& x) const;
    Var operator()(const Var& x) const { return forward(x); }

    const Var& parameters() const noexcept { return params_var_; }
    const MlpParams& layout() const noexcept { return *layout_; }

private:
    const MlpParams* layout_;
    Var params_var_;
};

// Plain evaluation, batch x input_dim -> batch x output_dim.
Tensor mlp_forward(const MlpParams& params, const Tensor& x);

// Architectures of the three networks for a state of dimension `state_dim`
// observed through a window of `history` frames.
NetSpec flow_spec(std::size_t state_dim, std::size_t history, std::vector<std::size_t> hidden, std::uint64_t seed);
NetSpec diffusion_spec(std::size_t state_dim, std::size_t history, std::vector<std::size_t> hidden, double sigma2_min,
                       std::uint64_t seed);
NetSpec denoiser_spec(std::size_t state_dim, std::size_t history, std::vector<std::size_t> hidden, std::uint64_t seed);

}  // namespace nsde
