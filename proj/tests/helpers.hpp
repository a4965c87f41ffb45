#pragma once

#include "hqn/noise_model.hpp"
#include "oracle.hpp"

#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace testing_support {

inline oracle::HpMixture to_hp(const hqn::TruncatedMixture& m) {
    oracle::HpMixture out;
    for (const auto& c : m.components()) {
        out.weights.emplace_back(c.weight);
        out.means.push_back(oracle::to_hp(c.mean));
        oracle::HpMatrix cov{c.cov.dim(), {}};
        for (double v : c.cov.entries()) {
            cov.a.emplace_back(v);
        }
        out.covs.push_back(std::move(cov));
    }
    return out;
}

inline std::vector<std::vector<double>> rows_of(const hqn::Dataset& d) {
    std::vector<std::vector<double>> rows;
    for (std::size_t n = 0; n < d.size(); ++n) {
        rows.emplace_back(d.row(n).begin(), d.row(n).end());
    }
    return rows;
}

inline hqn::Dataset dataset_from_rows(const std::vector<std::vector<double>>& rows) {
    std::vector<double> flat;
    for (const auto& r : rows) {
        flat.insert(flat.end(), r.begin(), r.end());
    }
    return hqn::Dataset(rows.front().size(), std::move(flat));
}

// Fresh per-test scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("hqn_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline double rel_err(double got, double want) {
    return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}

} // namespace testing_support
