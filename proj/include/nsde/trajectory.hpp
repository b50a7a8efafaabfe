#pragma once

#include <cstdint>
#include <vector>

namespace nsde {

// Time-stamped sequence of d-dimensional states.
struct Trajectory {
    std::int64_t id = 0;
    std::vector<double> times;
    std::vector<std::vector<double>> states;

    std::size_t size() const noexcept { return states.size(); }
    std::size_t dim() const noexcept { return states.empty() ? 0 : states.front().size(); }

    // Throws FormatError unless times are strictly increasing, finite, and
    // every state has the same dimension.
    void validate() const;

    friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

}  // namespace nsde
