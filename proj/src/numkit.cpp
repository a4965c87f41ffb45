#include "hqn/numkit.hpp"

#include "hqn/errors.hpp"

#include <algorithm>
#include <cmath>

namespace hqn {

SquareMatrix::SquareMatrix(std::size_t dim, double fill) : dim_(dim), entries_(dim * dim, fill) {
    if (dim == 0) {
        throw InvalidArgument("matrix dimension must be positive");
    }
}

SquareMatrix::SquareMatrix(std::size_t dim, std::vector<double> row_major)
    : dim_(dim), entries_(std::move(row_major)) {
    if (dim == 0) {
        throw InvalidArgument("matrix dimension must be positive");
    }
    if (entries_.size() != dim * dim) {
        throw DimensionMismatch("matrix entries do not match dimension " + std::to_string(dim));
    }
    for (double v : entries_) {
        if (!std::isfinite(v)) {
            throw InvalidArgument("matrix entries must be finite");
        }
    }
}

SquareMatrix SquareMatrix::identity(std::size_t dim, double scale) {
    SquareMatrix m(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        m(i, i) = scale;
    }
    return m;
}

SquareMatrix SquareMatrix::diagonal(std::initializer_list<double> diag) {
    SquareMatrix m(diag.size());
    std::size_t i = 0;
    for (double d : diag) {
        m(i, i) = d;
        ++i;
    }
    return m;
}

double SquareMatrix::max_abs() const {
    double m = 0.0;
    for (double v : entries_) {
        m = std::max(m, std::abs(v));
    }
    return m;
}

double SquareMatrix::max_asymmetry() const {
    double m = 0.0;
    for (std::size_t r = 0; r < dim_; ++r) {
        for (std::size_t c = r + 1; c < dim_; ++c) {
            m = std::max(m, std::abs((*this)(r, c) - (*this)(c, r)));
        }
    }
    return m;
}

SquareMatrix SquareMatrix::symmetrized() const {
    SquareMatrix s = *this;
    for (std::size_t r = 0; r < dim_; ++r) {
        for (std::size_t c = r + 1; c < dim_; ++c) {
            const double avg = 0.5 * ((*this)(r, c) + (*this)(c, r));
            s(r, c) = avg;
            s(c, r) = avg;
        }
    }
    return s;
}

SquareMatrix operator+(const SquareMatrix& a, const SquareMatrix& b) {
    if (a.dim() != b.dim()) {
        throw DimensionMismatch("matrix sum of different dimensions");
    }
    SquareMatrix s(a.dim());
    for (std::size_t r = 0; r < a.dim(); ++r) {
        for (std::size_t c = 0; c < a.dim(); ++c) {
            s(r, c) = a(r, c) + b(r, c);
        }
    }
    return s;
}

bool is_symmetric(const SquareMatrix& a, double rel_tol) {
    return a.max_asymmetry() <= rel_tol * a.max_abs();
}

Cholesky::Cholesky(const SquareMatrix& a) : lower_(a.dim()) {
    const SquareMatrix s = a.symmetrized();
    const std::size_t n = s.dim();
    for (std::size_t j = 0; j < n; ++j) {
        double diag = s(j, j);
        for (std::size_t k = 0; k < j; ++k) {
            diag -= lower_(j, k) * lower_(j, k);
        }
        if (!(diag > 0.0) || !std::isfinite(diag)) {
            throw NotPositiveDefinite(j);
        }
        const double ljj = std::sqrt(diag);
        lower_(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double v = s(i, j);
            for (std::size_t k = 0; k < j; ++k) {
                v -= lower_(i, k) * lower_(j, k);
            }
            lower_(i, j) = v / ljj;
        }
        log_det_ += 2.0 * std::log(ljj);
    }
}

Vec Cholesky::solve_lower(std::span<const double> b) const {
    const std::size_t n = dim();
    if (b.size() != n) {
        throw DimensionMismatch("right-hand side length differs from matrix dimension");
    }
    Vec y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double v = b[i];
        for (std::size_t k = 0; k < i; ++k) {
            v -= lower_(i, k) * y[k];
        }
        y[i] = v / lower_(i, i);
    }
    return y;
}

Vec Cholesky::solve(std::span<const double> b) const {
    Vec x = solve_lower(b);
    const std::size_t n = dim();
    for (std::size_t ii = n; ii-- > 0;) {
        double v = x[ii];
        for (std::size_t k = ii + 1; k < n; ++k) {
            v -= lower_(k, ii) * x[k];
        }
        x[ii] = v / lower_(ii, ii);
    }
    return x;
}

double Cholesky::mahalanobis_sq(std::span<const double> x) const {
    Vec scratch(dim());
    return mahalanobis_sq(x, scratch);
}

double Cholesky::mahalanobis_sq(std::span<const double> x, std::span<double> scratch) const {
    const std::size_t n = dim();
    if (x.size() != n || scratch.size() < n) {
        throw DimensionMismatch("vector length differs from matrix dimension");
    }
    double q = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double v = x[i];
        for (std::size_t k = 0; k < i; ++k) {
            v -= lower_(i, k) * scratch[k];
        }
        scratch[i] = v / lower_(i, i);
        q += scratch[i] * scratch[i];
    }
    return q;
}

double log_poisson_pmf(double lambda, long long k) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw InvalidParameter("Poisson rate must be positive and finite");
    }
    if (k < 0) {
        throw InvalidParameter("Poisson count must be nonnegative");
    }
    const auto kd = static_cast<double>(k);
    return kd * std::log(lambda) - lambda - std::lgamma(kd + 1.0);
}

double poisson_pmf(double lambda, long long k) {
    return std::exp(log_poisson_pmf(lambda, k));
}

double mvn_logpdf(std::span<const double> z, std::span<const double> mu, const Cholesky& chol,
                  std::span<double> scratch) {
    const std::size_t d = chol.dim();
    if (z.size() != d || mu.size() != d || scratch.size() < 2 * d) {
        throw DimensionMismatch("point, mean, and covariance dimensions differ");
    }
    const auto diff = scratch.first(d);
    for (std::size_t i = 0; i < d; ++i) {
        diff[i] = z[i] - mu[i];
    }
    constexpr double log_two_pi = 1.8378770664093454836;
    return -0.5 * static_cast<double>(d) * log_two_pi - 0.5 * chol.log_det() -
           0.5 * chol.mahalanobis_sq(diff, scratch.subspan(d));
}

double mvn_logpdf(std::span<const double> z, std::span<const double> mu, const Cholesky& chol) {
    Vec scratch(2 * chol.dim());
    return mvn_logpdf(z, mu, chol, scratch);
}

double mvn_logpdf(std::span<const double> z, std::span<const double> mu, const SquareMatrix& sigma) {
    if (z.size() != sigma.dim() || mu.size() != sigma.dim()) {
        throw DimensionMismatch("point, mean, and covariance dimensions differ");
    }
    return mvn_logpdf(z, mu, Cholesky(sigma));
}

double log_sum_exp(std::span<const double> values) {
    if (values.empty()) {
        throw InvalidArgument("log_sum_exp of an empty list");
    }
    const double m = *std::max_element(values.begin(), values.end());
    // all -inf, or a +inf entry
    if (!std::isfinite(m)) {
        return m;
    }
    double acc = 0.0;
    for (double v : values) {
        acc += std::exp(v - m);
    }
    return m + std::log(acc);
}

double pairwise_sum(std::span<const double> values) {
    constexpr std::size_t kBlock = 8;
    if (values.size() <= kBlock) {
        double acc = 0.0;
        for (double v : values) {
            acc += v;
        }
        return acc;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

} // namespace hqn
