#include "hqn/errors.hpp"
#include "hqn/noise_model.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

using namespace hqn;
using testing_support::rel_err;

namespace {

std::map<long long, double> by_index(const TruncationSkeleton& sk) {
    std::map<long long, double> m;
    for (const auto& t : sk.terms) {
        m[t.k] = t.weight;
    }
    return m;
}

// Independent reference: the `count` largest pmf values over 0..limit.
std::vector<std::pair<double, long long>> top_pmf(double lambda, std::size_t count, long long limit = 400) {
    std::vector<std::pair<double, long long>> all;
    for (long long k = 0; k <= limit; ++k) {
        all.emplace_back(std::exp(k * std::log(lambda) - lambda - std::lgamma(k + 1.0)), k);
    }
    std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    all.resize(count);
    return all;
}

} // namespace

TEST_CASE("truncate reproduces the lambda=2 table") {
    const auto sk = truncate(2.0, 0.15);
    REQUIRE(sk.size() == 5);
    CHECK(sk.coverage() == doctest::Approx(0.94735).epsilon(5e-4));
    const auto w = by_index(sk);
    const double listed[] = {0.135, 0.271, 0.271, 0.180, 0.090};
    for (long long k = 0; k < 5; ++k) {
        REQUIRE(w.count(k) == 1);
        CHECK(std::abs(w.at(k) - listed[k]) < 5e-4 + 1e-12);
    }
    CHECK(w.at(4) == doctest::Approx(0.0902).epsilon(1e-3));
    // descending order, tie between k=1 and k=2 broken toward the lower index
    CHECK(sk.indices() == std::vector<long long>{1, 2, 3, 0, 4});
}

TEST_CASE("truncate reproduces the lambda=5 table and the failing top-5 window") {
    const auto sk = truncate(5.0, 0.15);
    REQUIRE(sk.size() == 7);
    CHECK(sk.coverage() == doctest::Approx(0.8914786832836).epsilon(1e-12));
    CHECK(sk.indices() == std::vector<long long>{4, 5, 6, 3, 7, 2, 8});
    const double listed[] = {0.175, 0.175, 0.146, 0.140, 0.104, 0.084, 0.065};
    double rounded_sum = 0.0;
    for (std::size_t i = 0; i < 7; ++i) {
        CHECK(std::abs(sk.terms[i].weight - listed[i]) < 1e-3);
        rounded_sum += std::round(sk.terms[i].weight * 1000.0) / 1000.0;
    }
    // the published 0.889 is the sum of the three-decimal weights
    CHECK(rounded_sum == doctest::Approx(0.889).epsilon(1e-12));
    const auto top5 = most_probable_terms(5.0, 5);
    CHECK(std::abs(top5.coverage() - 0.742) < 5e-4);
    CHECK(top5.coverage() < 0.85);
}

TEST_CASE("absolute rule picks the smallest window with mass >= 1 - tol") {
    const auto two = truncate(2.0, 0.15, TruncationRule::absolute);
    CHECK(two.size() == 4);
    CHECK(two.coverage() == doctest::Approx(0.857123).epsilon(1e-5));
    CHECK(truncate(5.0, 0.15, TruncationRule::absolute).size() == 7);
    CHECK(coverage_bar(0.15, TruncationRule::absolute) == doctest::Approx(0.85));
    CHECK(coverage_bar(0.15, TruncationRule::relative) == doctest::Approx(1.0 / 1.15));
}

TEST_CASE("truncate errors") {
    CHECK_THROWS_AS(truncate(2.0, 0.0), InvalidParameter);
    CHECK_THROWS_AS(truncate(2.0, 1.0), InvalidParameter);
    CHECK_THROWS_AS(truncate(2.0, 1.5), InvalidParameter);
    CHECK_THROWS_AS(truncate(2.0, -0.1), InvalidParameter);
    CHECK_THROWS_AS(truncate(0.0, 0.15), InvalidParameter);
    CHECK_THROWS_AS(truncate(1e9, 0.01), NonConvergence);
}

TEST_CASE("the greedy window equals the top-K pmf values and K is minimal") {
    for (double lambda : {0.3, 1.0, 2.0, 3.7, 5.0, 9.5, 20.0}) {
        for (double tol : {0.01, 0.05, 0.15, 0.4}) {
            for (auto rule : {TruncationRule::relative, TruncationRule::absolute}) {
                CAPTURE(lambda);
                CAPTURE(tol);
                const auto sk = truncate(lambda, tol, rule);
                const double bar = coverage_bar(tol, rule);
                const auto ref = top_pmf(lambda, sk.size());
                double ref_mass = 0.0;
                for (std::size_t i = 0; i < ref.size(); ++i) {
                    CHECK(sk.terms[i].weight == doctest::Approx(ref[i].first).epsilon(1e-12));
                    ref_mass += ref[i].first;
                }
                CHECK(sk.coverage() == doctest::Approx(ref_mass).epsilon(1e-12));
                CHECK(sk.coverage() >= bar);
                // dropping the smallest retained term falls below the bar
                CHECK(sk.coverage() - sk.terms.back().weight < bar);
                // contiguous
                auto idx = sk.indices();
                std::sort(idx.begin(), idx.end());
                CHECK(idx.back() - idx.front() + 1 == static_cast<long long>(idx.size()));
            }
        }
        double prev = 0.0;
        for (std::size_t k = 1; k <= 12; ++k) {
            const double c = most_probable_terms(lambda, k).coverage();
            CHECK(c >= prev);
            prev = c;
        }
    }
}

TEST_CASE("build_mixture places means at (mu_z2 + k) and covariances at sigma2_z2 * I") {
    const auto sk = truncate(2.0, 0.15);
    const auto m = build_mixture({2.0, 0.0, 1.0, 2}, sk);
    REQUIRE(m.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(m[i].k == static_cast<long long>(i));
        CHECK(m[i].mean == Vec{double(i), double(i)});
        CHECK(m[i].cov == SquareMatrix::identity(2));
        CHECK(m[i].weight == doctest::Approx(poisson_pmf(2.0, static_cast<long long>(i))).epsilon(1e-15));
    }
    CHECK(m.coverage() == doctest::Approx(sk.coverage()).epsilon(1e-15));

    const auto shifted = build_mixture({2.0, 1.0, 1.0, 1}, sk);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(shifted[i].mean == Vec{1.0 + double(i)});
    }
    const auto narrow = build_mixture({2.0, 0.0, 0.25, 2}, sk);
    CHECK(narrow[3].cov == SquareMatrix::identity(2, 0.25));
}

TEST_CASE("TruncatedMixture rejects invalid components") {
    const auto cov = SquareMatrix::identity(1);
    CHECK_THROWS_AS(TruncatedMixture({}), InvalidArgument);
    CHECK_THROWS_AS(TruncatedMixture({{0.0, 0, {0.0}, cov}}), InvalidArgument);
    CHECK_THROWS_AS(TruncatedMixture({{0.5, 1, {0.0}, cov}, {0.5, 1, {1.0}, cov}}), InvalidArgument);
    CHECK_THROWS_AS(TruncatedMixture({{0.5, 0, {0.0}, cov}, {0.5, 1, {1.0, 2.0}, SquareMatrix::identity(2)}}),
                    DimensionMismatch);
    CHECK_THROWS_AS(TruncatedMixture({{1.0, 0, {0.0, 0.0}, SquareMatrix(2, {1.0, 0.2, 0.3, 1.0})}}),
                    InvalidArgument);
    CHECK_THROWS_AS(TruncatedMixture({{1.0, 0, {0.0}, SquareMatrix(1, {-1.0})}}), NotPositiveDefinite);
}

TEST_CASE("mixture_logpdf agrees with the 50-digit direct summation") {
    const auto m = build_mixture({2.0, 0.0, 1.0, 2}, truncate(2.0, 0.15));
    const Vec z{0.0, 0.0};
    const double want = static_cast<double>(log(oracle::mixture_pdf(testing_support::to_hp(m), oracle::to_hp(z))));
    CHECK(rel_err(mixture_logpdf(m, z), want) < 1e-12);

    const TruncatedMixture single({{1.0, 0, {0.3, -0.2}, SquareMatrix(2, {1.5, 0.4, 0.4, 0.9})}});
    CHECK(mixture_logpdf(single, Vec{1.0, 2.0}) ==
          doctest::Approx(mvn_logpdf(Vec{1.0, 2.0}, Vec{0.3, -0.2}, SquareMatrix(2, {1.5, 0.4, 0.4, 0.9})))
              .epsilon(1e-15));
    CHECK_THROWS_AS(mixture_logpdf(m, Vec{1.0}), DimensionMismatch);
}

TEST_CASE("mixture_logpdf matches the oracle on random mixtures (K <= 10, D <= 3)") {
    std::mt19937_64 gen(99);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> ud(0.05, 1.0);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t d = 1 + trial % 3;
        const std::size_t kc = 1 + trial % 10;
        std::vector<MixtureComponent> comps;
        for (std::size_t k = 0; k < kc; ++k) {
            Vec mean(d);
            for (auto& v : mean) v = 2.0 * nd(gen);
            SquareMatrix cov(d);
            std::vector<double> f(d * d);
            for (auto& v : f) v = nd(gen);
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < d; ++j) {
                    double acc = i == j ? 0.3 : 0.0;
                    for (std::size_t q = 0; q < d; ++q) acc += f[i * d + q] * f[j * d + q];
                    cov(i, j) = acc;
                }
            comps.push_back({ud(gen), static_cast<long long>(k), mean, cov});
        }
        const TruncatedMixture m(comps);
        const auto hm = testing_support::to_hp(m);
        Vec z(d);
        for (auto& v : z) v = 2.0 * nd(gen);
        const double want = static_cast<double>(log(oracle::mixture_pdf(hm, oracle::to_hp(z))));
        const double got = mixture_logpdf(m, z);
        CAPTURE(trial);
        CHECK(rel_err(got, want) < 1e-12);

        double bound = -INFINITY;
        for (std::size_t k = 0; k < kc; ++k) {
            bound = std::max(bound, std::log(m[k].weight) + mvn_logpdf(z, m[k].mean, m[k].cov));
        }
        CHECK(got <= bound + std::log(static_cast<double>(kc)) + 1e-12);
    }
}

TEST_CASE("sample is deterministic, thread-count independent, and handles n=1") {
    const HybridNoiseSpec spec{2.0, 0.0, 1.0, 2};
    const auto sk = truncate(2.0, 0.15);
    const Dataset a = sample(spec, sk, 3000, 42);
    const Dataset b = sample(spec, sk, 3000, 42);
    CHECK(a == b);
    CHECK(a.size() == 3000);
    CHECK(sample(spec, sk, 3000, 42, 4) == a);
    CHECK_FALSE(sample(spec, sk, 3000, 43) == a);
    REQUIRE(a.meta());
    CHECK(a.meta()->seed == 42);
    CHECK(a.meta()->spec == spec);

    const Dataset one = sample(spec, sk, 1, 7);
    CHECK(one.size() == 1);
    CHECK(one.row(0).size() == 2);
    CHECK_THROWS_AS(sample(spec, sk, 0, 7), InvalidParameter);
}

TEST_CASE("sample mean matches the window-conditional expectation") {
    const HybridNoiseSpec spec{2.0, 0.5, 1.0, 2};
    const auto sk = truncate(2.0, 0.15);
    double mass = 0.0, m1 = 0.0, m2 = 0.0;
    for (const auto& t : sk.terms) {
        mass += t.weight;
        m1 += t.weight * static_cast<double>(t.k);
        m2 += t.weight * static_cast<double>(t.k * t.k);
    }
    const double ek = m1 / mass;
    const double var = spec.sigma2_z2 + (m2 / mass - ek * ek);
    constexpr std::size_t n = 100'000;
    const Dataset data = sample(spec, sk, n, 2718);
    for (std::size_t j = 0; j < 2; ++j) {
        double s = 0.0;
        for (std::size_t r = 0; r < n; ++r) s += data.row(r)[j];
        const double se = std::sqrt(var / n);
        CHECK(std::abs(s / n - (spec.mu_z2 + ek)) < 4.0 * se);
    }
}

TEST_CASE("component draws follow the renormalized skeleton weights (chi-square, p=0.001)") {
    const auto sk = truncate(2.0, 0.15);
    const auto w = sk.weights();
    const double mass = sk.coverage();
    constexpr std::size_t n = 100'000;
    std::vector<double> counts(w.size(), 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        counts[draw_component(w, 31337, r)] += 1.0;
    }
    double chi2 = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
        const double expected = n * w[k] / mass;
        chi2 += (counts[k] - expected) * (counts[k] - expected) / expected;
    }
    // upper 0.001 quantile of chi-square with 4 degrees of freedom
    CHECK(chi2 < 18.4668);
}

TEST_CASE("dataset CSV round trip is bit-exact and keeps metadata") {
    const auto dir = testing_support::scratch_dir("dataset_rt");
    const Dataset a = sample({2.0, -0.25, 0.7, 3}, truncate(2.0, 0.15), 257, 1234);
    save_dataset(a, dir / "a.csv");
    const Dataset b = load_dataset(dir / "a.csv");
    CHECK(a == b);
    const std::string text = read_text_file(dir / "a.csv");
    CHECK(text.rfind("# seed=1234\n", 0) == 0);
    CHECK(text.find("\nx0,x1,x2\n") != std::string::npos);

    const Dataset plain = testing_support::dataset_from_rows({{0.1, 1e-300}, {-3.0, 1.0 / 3.0}});
    save_dataset(plain, dir / "plain.csv");
    CHECK(load_dataset(dir / "plain.csv") == plain);
}

TEST_CASE("dataset parse errors carry line numbers") {
    try {
        parse_dataset("x0,x1\n0.5,NaN\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
    try {
        parse_dataset("# seed=1\nx0,x1\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("no rows") != std::string::npos);
    }
    try {
        parse_dataset("x0,x1\n1,2\n3\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
    try {
        parse_dataset("a,b\n1,2\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 1);
    }
    CHECK_THROWS_AS(parse_dataset("x0\n1.0abc\n"), ParseError);
    CHECK_THROWS_AS(parse_dataset("x0\ninf\n"), ParseError);
    CHECK_THROWS_AS(load_dataset("/nonexistent/path.csv"), Error);
}

TEST_CASE("mixture JSON round trip") {
    const auto dir = testing_support::scratch_dir("mixture_rt");
    const auto m = build_mixture({2.0, 0.0, 1.0, 2}, truncate(2.0, 0.15));
    save_mixture(m, dir / "m.json");
    const auto back = load_mixture(dir / "m.json");
    CHECK(back == m);
    const auto j = mixture_to_json(m);
    CHECK(j["dim"] == 2);
    CHECK(j["components"].size() == 5);
    CHECK(j["components"][0]["cov"][1][1] == 1.0);
    CHECK(j["coverage"].get<double>() == doctest::Approx(0.94735).epsilon(1e-3));
    CHECK_THROWS_AS(mixture_from_json(nlohmann::json{{"dim", 2}}), ParseError);
}
