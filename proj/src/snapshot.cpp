#include "hqn/snapshot.hpp"

#include "hqn/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace hqn {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 640.0;
constexpr double kMargin = 40.0;
constexpr int kContourSegments = 96;

std::string fmt3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

struct Contour {
    std::vector<std::array<double, 2>> points;
};

Contour contour_of(const MixtureComponent& c, const Cholesky& chol) {
    // mu + r L u traces the level set (z - mu)^T (L L^T)^{-1} (z - mu) = r^2
    // as u runs around the unit circle.
    const SquareMatrix& l = chol.lower();
    Contour out;
    for (int s = 0; s < kContourSegments; ++s) {
        const double t = 2.0 * std::numbers::pi * s / kContourSegments;
        const double u0 = kSnapshotEllipseRadius * std::cos(t);
        const double u1 = kSnapshotEllipseRadius * std::sin(t);
        out.points.push_back({c.mean[0] + l(0, 0) * u0, c.mean[1] + l(1, 0) * u0 + l(1, 1) * u1});
    }
    return out;
}

} // namespace

const char* palette_color(std::size_t k) {
    static constexpr std::array<const char*, 10> colors = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                                           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    return colors[k % colors.size()];
}

std::string render_snapshot_svg(const TruncatedMixture& m, const Responsibilities& gamma, const Dataset& data) {
    if (data.dim() != 2 || m.dim() != 2) {
        throw UnsupportedDimension("snapshots need 2-D data, got dimension " + std::to_string(data.dim()));
    }
    if (gamma.rows() != data.size() || gamma.cols() != m.size()) {
        throw DimensionMismatch("responsibilities do not match mixture and data");
    }

    std::vector<Contour> contours;
    for (std::size_t k = 0; k < m.size(); ++k) {
        contours.push_back(contour_of(m[k], m.factor(k)));
    }

    double xmin = data.row(0)[0], xmax = xmin;
    double ymin = data.row(0)[1], ymax = ymin;
    const auto extend = [&](double x, double y) {
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
    };
    for (std::size_t n = 0; n < data.size(); ++n) {
        extend(data.row(n)[0], data.row(n)[1]);
    }
    for (const auto& c : contours) {
        for (const auto& p : c.points) {
            extend(p[0], p[1]);
        }
    }
    const double span = std::max({xmax - xmin, ymax - ymin, 1e-9});
    const double scale = (std::min(kWidth, kHeight) - 2.0 * kMargin) / span;
    const auto px = [&](double x) { return kMargin + (x - xmin) * scale; };
    const auto py = [&](double y) { return kHeight - kMargin - (y - ymin) * scale; };

    std::string svg;
    svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt3(kWidth) + "\" height=\"" + fmt3(kHeight) +
           "\" viewBox=\"0 0 " + fmt3(kWidth) + " " + fmt3(kHeight) + "\">\n";
    svg += "<rect x=\"0\" y=\"0\" width=\"" + fmt3(kWidth) + "\" height=\"" + fmt3(kHeight) +
           "\" fill=\"white\"/>\n";
    svg += "<g id=\"points\">\n";
    for (std::size_t n = 0; n < data.size(); ++n) {
        const std::size_t k = gamma.argmax(n);
        svg += "<circle cx=\"" + fmt3(px(data.row(n)[0])) + "\" cy=\"" + fmt3(py(data.row(n)[1])) +
               "\" r=\"1.5\" fill=\"" + palette_color(k) + "\" fill-opacity=\"0.6\" data-component=\"" + std::to_string(k) +
               "\"/>\n";
    }
    svg += "</g>\n<g id=\"contours\">\n";
    for (std::size_t k = 0; k < contours.size(); ++k) {
        svg += "<polygon fill=\"none\" stroke=\"" + std::string(palette_color(k)) +
               "\" stroke-width=\"2\" data-component=\"" + std::to_string(k) +
               "\" data-shift=\"" + std::to_string(m[k].k) + "\" points=\"";
        for (std::size_t i = 0; i < contours[k].points.size(); ++i) {
            if (i) {
                svg += ' ';
            }
            svg += fmt3(px(contours[k].points[i][0])) + "," + fmt3(py(contours[k].points[i][1]));
        }
        svg += "\"/>\n";
        svg += "<circle cx=\"" + fmt3(px(m[k].mean[0])) + "\" cy=\"" + fmt3(py(m[k].mean[1])) +
               "\" r=\"4\" fill=\"black\" stroke=\"" + palette_color(k) + "\" stroke-width=\"2\"/>\n";
    }
    svg += "</g>\n</svg>\n";
    return svg;
}

void write_snapshot_svg(const TruncatedMixture& m, const Responsibilities& gamma, const Dataset& data,
                        const std::filesystem::path& path) {
    write_text_file(path, render_snapshot_svg(m, gamma, data));
}

} // namespace hqn
