#pragma once

#include <cmath>
#include <vector>

#include "nsde/sde.hpp"

namespace nsde::test {

// Inverse of the positive head: the pre-activation giving value `v`.
inline double softplus_inverse(double v) { return std::log(std::expm1(v)); }

// Affine flow f(x) = A x + b, constant sigma^2 per dimension, no denoiser.
inline SdeModel affine_model(const std::vector<double>& a_rowmajor, const std::vector<double>& b,
                             const std::vector<double>& sigma2, double floor = 1e-6) {
    const std::size_t d = b.size();
    SdeModel m;
    m.flow = MlpParams(flow_spec(d, 1, {}, 0));
    auto w = m.flow.weight(0);
    std::copy(a_rowmajor.begin(), a_rowmajor.end(), w.begin());
    std::copy(b.begin(), b.end(), m.flow.bias(0).begin());
    m.diffusion = MlpParams(diffusion_spec(d, 1, {}, floor, 0));
    for (std::size_t i = 0; i < d; ++i) m.diffusion.bias(0)[i] = softplus_inverse(sigma2[i] - floor);
    return m;
}

// Adds a linear denoiser d(x) = C x + e mapping the input space to itself.
inline void set_affine_denoiser(SdeModel& m, const std::vector<double>& c_rowmajor, const std::vector<double>& e) {
    MlpParams p(denoiser_spec(m.state_dim(), m.history(), {}, 0));
    std::copy(c_rowmajor.begin(), c_rowmajor.end(), p.weight(0).begin());
    std::copy(e.begin(), e.end(), p.bias(0).begin());
    m.denoiser = p;
}

}  // namespace nsde::test
