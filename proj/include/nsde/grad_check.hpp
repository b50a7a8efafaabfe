#pragma once

#include <functional>

#include "nsde/tensor.hpp"

namespace nsde {

// A differentiable scalar objective: builds its graph on `tape` from the
// given input var and returns a one-element var.
using ScalarObjective = std::function<Var(Tape& tape, const Var& input)>;

// Compares the reverse-mode gradient of `objective` at `point` with central
// differences of step `h`. Returns the relative error in the max norm,
//   max_i |autodiff_i - fd_i| / max_i max(|autodiff_i|, |fd_i|),
// so that components near zero, where central differences carry their
// O(h^2) truncation error undivided, do not dominate. Both gradients being
// zero counts as zero error.
double grad_check(const ScalarObjective& objective, const Tensor& point, double h = 1e-5);

// Plain evaluation of an objective (no gradient).
double evaluate(const ScalarObjective& objective, const Tensor& point);

}  // namespace nsde
