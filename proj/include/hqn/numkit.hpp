#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace hqn {

using Vec = std::vector<double>;

// Dense row-major dim x dim matrix. Used for covariances and their
// Cholesky factors; no general-purpose algebra beyond what the mixture
// code needs.
class SquareMatrix {
public:
    SquareMatrix() = default;
    explicit SquareMatrix(std::size_t dim, double fill = 0.0);
    SquareMatrix(std::size_t dim, std::vector<double> row_major);

    static SquareMatrix identity(std::size_t dim, double scale = 1.0);
    static SquareMatrix diagonal(std::initializer_list<double> diag);

    std::size_t dim() const noexcept { return dim_; }
    double operator()(std::size_t r, std::size_t c) const { return entries_[r * dim_ + c]; }
    double& operator()(std::size_t r, std::size_t c) { return entries_[r * dim_ + c]; }
    std::span<const double> entries() const noexcept { return entries_; }

    double max_abs() const;
    double max_asymmetry() const;
    // (A + A^T) / 2
    SquareMatrix symmetrized() const;

    friend bool operator==(const SquareMatrix&, const SquareMatrix&) = default;

private:
    std::size_t dim_ = 0;
    std::vector<double> entries_;
};

SquareMatrix operator+(const SquareMatrix& a, const SquareMatrix& b);

// Lower-triangular factor L with A = L L^T. Built from the symmetrized input;
// throws NotPositiveDefinite carrying the failing pivot index.
class Cholesky {
public:
    explicit Cholesky(const SquareMatrix& a);

    std::size_t dim() const noexcept { return lower_.dim(); }
    const SquareMatrix& lower() const noexcept { return lower_; }

    // ln|A| = 2 * sum(ln L_ii)
    double log_det() const noexcept { return log_det_; }
    // Solves L y = b.
    Vec solve_lower(std::span<const double> b) const;
    // Solves A x = b.
    Vec solve(std::span<const double> b) const;
    // x^T A^{-1} x
    double mahalanobis_sq(std::span<const double> x) const;
    // Same, using caller-provided scratch of at least dim() entries.
    double mahalanobis_sq(std::span<const double> x, std::span<double> scratch) const;

private:
    SquareMatrix lower_;
    double log_det_ = 0.0;
};

// Relative symmetry tolerance used to decide whether a matrix can serve
// as a covariance.
inline constexpr double kSymmetryTolerance = 1e-12;

bool is_symmetric(const SquareMatrix& a, double rel_tol = kSymmetryTolerance);

double log_poisson_pmf(double lambda, long long k);
double poisson_pmf(double lambda, long long k);

double mvn_logpdf(std::span<const double> z, std::span<const double> mu, const SquareMatrix& sigma);
// Same density with a precomputed factor of sigma.
double mvn_logpdf(std::span<const double> z, std::span<const double> mu, const Cholesky& chol);
// Allocation-free variant for hot loops; scratch needs 2 * dim entries.
double mvn_logpdf(std::span<const double> z, std::span<const double> mu, const Cholesky& chol,
                  std::span<double> scratch);

double log_sum_exp(std::span<const double> values);

// Fixed-order pairwise summation: the result depends only on the input order,
// never on how the caller partitioned the work that produced the values.
double pairwise_sum(std::span<const double> values);

} // namespace hqn
