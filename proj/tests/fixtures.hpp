#pragma once

#include "hqn/em.hpp"

#include <array>
#include <vector>

namespace testing_support {

// Ten 1-D points with fixed two-component responsibilities.
struct MStepFixture {
    std::vector<double> z;
    std::vector<std::array<double, 2>> gamma;

    hqn::Dataset dataset() const { return hqn::Dataset(1, z); }

    hqn::Responsibilities responsibilities() const {
        hqn::Responsibilities g(z.size(), 2);
        for (std::size_t n = 0; n < z.size(); ++n) {
            g(n, 0) = gamma[n][0];
            g(n, 1) = gamma[n][1];
        }
        return g;
    }
};

inline MStepFixture mstep_fixture() {
    const std::vector<double> z = {-0.81, 0.12, 0.47, 1.05, 1.33, 1.98, 2.41, 2.77, 3.60, 4.25};
    const std::vector<double> g0 = {0.97, 0.91, 0.84, 0.70, 0.55, 0.38, 0.22, 0.15, 0.06, 0.02};
    MStepFixture f{z, {}};
    for (double g : g0) {
        f.gamma.push_back({g, 1.0 - g});
    }
    return f;
}

// Poisson initialization: lambda=2 weights, means (k, k), unit
// covariances.
inline hqn::TruncatedMixture poisson_init(std::size_t dim = 2) {
    return hqn::build_mixture({2.0, 0.0, 1.0, dim}, hqn::truncate(2.0, 0.15));
}

} // namespace testing_support
