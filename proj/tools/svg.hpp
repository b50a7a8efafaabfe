#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "nsde/trajectory.hpp"

namespace nsde::tools {

// SVG 1.1 line plot with one <path> per trajectory. 2-D states are drawn
// as (x1, x2); 1-D states against time. The viewport is fitted to the
// data bounds.
void write_svg(std::ostream& os, const std::vector<Trajectory>& trajectories, const std::string& title);

}  // namespace nsde::tools
