#include "svg.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <ostream>

namespace nsde::tools {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 480.0;
constexpr double kMargin = 24.0;
constexpr const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                   "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

void write_svg(std::ostream& os, const std::vector<Trajectory>& trajectories, const std::string& title) {
    auto point = [](const Trajectory& t, std::size_t k) {
        return t.dim() >= 2 ? std::pair{t.states[k][0], t.states[k][1]} : std::pair{t.times[k], t.states[k][0]};
    };
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& t : trajectories) {
        for (std::size_t k = 0; k < t.size(); ++k) {
            const auto [x, y] = point(t, k);
            x0 = std::min(x0, x);
            x1 = std::max(x1, x);
            y0 = std::min(y0, y);
            y1 = std::max(y1, y);
        }
    }
    if (trajectories.empty() || !(x1 >= x0)) {
        x0 = y0 = 0.0;
        x1 = y1 = 1.0;
    }
    if (x1 - x0 < 1e-9) x1 = x0 + 1.0;
    if (y1 - y0 < 1e-9) y1 = y0 + 1.0;
    const double sx = (kWidth - 2 * kMargin) / (x1 - x0);
    const double sy = (kHeight - 2 * kMargin) / (y1 - y0);

    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << kWidth << "\" height=\"" << kHeight
       << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
       << "<title>" << escape(title) << "</title>\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
        const auto& t = trajectories[i];
        os << "<path fill=\"none\" stroke-width=\"1\" stroke=\"" << kColors[i % std::size(kColors)] << "\" d=\"";
        for (std::size_t k = 0; k < t.size(); ++k) {
            const auto [x, y] = point(t, k);
            os << (k == 0 ? "M" : " L") << num(kMargin + (x - x0) * sx) << ',' << num(kHeight - kMargin - (y - y0) * sy);
        }
        os << "\"/>\n";
    }
    os << "</svg>\n";
}

}  // namespace nsde::tools
