#pragma once

#include "hqn/em.hpp"

#include <filesystem>
#include <string>

namespace hqn {

// Radius of the drawn covariance contour, (z - mu)^T Sigma^{-1} (z - mu) = r^2.
inline constexpr double kSnapshotEllipseRadius = 2.0;

// SVG scatter of 2-D data: each point coloured by its argmax responsibility
// (lowest component wins ties), one Mahalanobis-radius-2 contour per
// component. Throws UnsupportedDimension unless the data are 2-D.
std::string render_snapshot_svg(const TruncatedMixture& m, const Responsibilities& gamma, const Dataset& data);

void write_snapshot_svg(const TruncatedMixture& m, const Responsibilities& gamma, const Dataset& data,
                        const std::filesystem::path& path);

// Categorical colour used for component `k` in snapshots and plots.
const char* palette_color(std::size_t k);

} // namespace hqn
