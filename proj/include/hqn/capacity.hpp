#pragma once

#include "hqn/noise_model.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace hqn {

struct CapacityOptions {
    // Divide weights by their coverage before evaluating. Off by default:
    // the formula takes the truncated Poisson weights as they are.
    bool renormalize = false;
};

// Scalar channel: Gaussian input of variance sigma2_x, noise shifted by the
// retained Poisson indices with classical variance sigma2_z2.
struct ScalarChannelParams {
    double lambda = 2.0;
    TruncationSkeleton skeleton;
    double sigma2_x = 1.0;
    double sigma2_z2 = 1.0;

    void validate() const;
};

// Vector channel of dimension M: the noise mixture plus one received-signal
// covariance per component.
struct VectorChannelParams {
    TruncatedMixture mixture;
    std::vector<SquareMatrix> sigma_y_covs;

    void validate() const;
};

// Bits per channel use:
//   C = sum_i w_i [ -log2 w_i + 1/2 log2(2 pi e (sigma2_x + sigma2_z2))
//                   + log2 sum_j w_j N(i - j; 0, 2 sigma2_z2) ]
// with i, j running over the skeleton's shift indices.
double capacity_scalar(const ScalarChannelParams& p, const CapacityOptions& opts = {});

//   C = sum_i w_i [ -log2 w_i + 1/2 log2((2 pi e)^M |Sigma_i^y|)
//                   + log2 sum_j w_j N(mu_i; mu_j, Sigma_i + Sigma_j) ]
double capacity_vector(const VectorChannelParams& p, const CapacityOptions& opts = {});

// The M = 1 vector instance matching a scalar one: means mu_z2 + i,
// variances sigma2_z2, received variance sigma2_x + sigma2_z2.
VectorChannelParams scalar_as_vector(const ScalarChannelParams& p, double mu_z2 = 0.0);

struct CurvePoint {
    double snr_db = 0.0;
    double capacity_bits = 0.0;

    friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

struct CapacityCurve {
    std::vector<CurvePoint> points;
    std::string fingerprint;

    std::vector<double> grid() const;
    friend bool operator==(const CapacityCurve&, const CapacityCurve&) = default;
};

double snr_from_db(double snr_db);

// One capacity_scalar per grid point with sigma2_x = SNR * sigma2_z2
// (sigma2_z2 and the skeleton held fixed). Grid must be non-empty and
// strictly increasing. Points are written by index, so the curve does not
// depend on `threads`.
CapacityCurve sweep(const ScalarChannelParams& tmpl, std::span<const double> snr_db_grid, unsigned threads = 1,
                    const CapacityOptions& opts = {});

// Parses "min:max:step" (dB) into an inclusive, strictly increasing grid.
std::vector<double> parse_grid(const std::string& spec);

struct ComparisonReport {
    std::vector<double> grid;
    std::vector<double> delta; // a - b per grid point
    bool a_dominates_b = false;
    bool b_dominates_a = false;
    // Grid points where a is not strictly above b.
    std::vector<double> a_not_above_b;
    std::string fingerprint_a;
    std::string fingerprint_b;
    std::vector<std::string> notes;
};

// Throws GridMismatch unless both curves share the same grid exactly.
ComparisonReport compare(const CapacityCurve& a, const CapacityCurve& b);

nlohmann::json comparison_to_json(const ComparisonReport& r);

std::string curve_to_csv(const CapacityCurve& c);
CapacityCurve parse_curve_csv(const std::string& text);
void save_curve(const CapacityCurve& c, const std::filesystem::path& path);
CapacityCurve load_curve(const std::filesystem::path& path);

// Both curves on shared axes.
std::string render_overlay_svg(const CapacityCurve& a, const CapacityCurve& b, const std::string& label_a,
                               const std::string& label_b);

} // namespace hqn
