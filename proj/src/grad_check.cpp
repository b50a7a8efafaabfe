#include "nsde/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace nsde {

double evaluate(const ScalarObjective& objective, const Tensor& point) {
    Tape tape;
    const Var x = tape.constant(point);
    return objective(tape, x).value().item();
}

double grad_check(const ScalarObjective& objective, const Tensor& point, double h) {
    if (!(h > 0.0)) throw DomainError("grad_check step must be positive");
    Tensor analytic;
    {
        Tape tape;
        const Var x = tape.leaf(point, true);
        const Var y = objective(tape, x);
        tape.backward(y);
        analytic = x.grad();
    }
    double worst = 0.0;
    double scale = 0.0;
    Tensor probe = point;
    for (std::size_t i = 0; i < point.size(); ++i) {
        probe[i] = point[i] + h;
        const double up = evaluate(objective, probe);
        probe[i] = point[i] - h;
        const double down = evaluate(objective, probe);
        probe[i] = point[i];
        const double fd = (up - down) / (2.0 * h);
        worst = std::max(worst, std::abs(analytic[i] - fd));
        scale = std::max({scale, std::abs(analytic[i]), std::abs(fd)});
    }
    return scale == 0.0 ? 0.0 : worst / scale;
}

}  // namespace nsde
