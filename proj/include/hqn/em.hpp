#pragma once

#include "hqn/noise_model.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

namespace hqn {

// Posterior component probabilities, rows x cols row-major.
class Responsibilities {
public:
    Responsibilities(std::size_t rows, std::size_t cols);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    double operator()(std::size_t n, std::size_t k) const { return values_[n * cols_ + k]; }
    double& operator()(std::size_t n, std::size_t k) { return values_[n * cols_ + k]; }
    std::span<const double> row(std::size_t n) const {
        return std::span<const double>(values_).subspan(n * cols_, cols_);
    }
    std::span<double> row(std::size_t n) { return std::span<double>(values_).subspan(n * cols_, cols_); }

    // Effective counts N_k, summed over rows in index order.
    std::vector<double> column_sums() const;
    // Column of the largest entry per row; ties go to the lowest column.
    std::size_t argmax(std::size_t n) const;

    friend bool operator==(const Responsibilities&, const Responsibilities&) = default;

private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<double> values_;
};

struct EmConfig {
    std::size_t max_iters = 200;
    double ll_rel_tol = 1e-8;
    double cov_floor = 1e-6;
    std::size_t snapshot_every = 0;
    std::filesystem::path snapshot_dir = ".";
    unsigned threads = 1;

    void validate() const;
};

struct IterationRecord {
    TruncatedMixture mixture;
    double log_likelihood;
    std::vector<double> effective_counts;
};

struct LambdaEstimate {
    double lambda_hat = 0.0; // -ln w0
    double moment = 0.0;     // sum k w_k / sum w_k
};

struct FitReport {
    // Entry 0 is the initial mixture; entry t holds the mixture after t EM
    // updates, its log-likelihood, and the effective counts under it.
    std::vector<IterationRecord> iterations;
    bool converged = false;
    std::size_t iterations_run = 0;
    std::optional<LambdaEstimate> lambda;

    const TruncatedMixture& final_mixture() const { return iterations.back().mixture; }
};

struct Expectation {
    Responsibilities gamma;
    double log_likelihood;
};

// One pass over the rows computing both the responsibilities and the
// log-likelihood. Rows are split across `threads`; per-row log-likelihoods
// are reduced pairwise in row order, so the result does not depend on the
// thread count. Throws DegeneratePoint naming the first row whose every
// component density underflows.
Expectation expectation(const TruncatedMixture& m, const Dataset& data, unsigned threads = 1);

double log_likelihood(const TruncatedMixture& m, const Dataset& data, unsigned threads = 1);
Responsibilities e_step(const TruncatedMixture& m, const Dataset& data, unsigned threads = 1);

// Closed-form maximizer of the expected complete-data log-likelihood:
//   N_k = sum_n gamma_nk,  w_k = N_k / N,  mu_k = sum_n gamma_nk z_n / N_k,
//   Sigma_k = sum_n gamma_nk (z_n - mu_k)(z_n - mu_k)^T / N_k + cov_floor * I.
// Weights are renormalized to sum to one. `shift_indices` labels the output
// components (defaults to 0..K-1). Throws EmptyCluster when some N_k is not
// above K * machine-epsilon * N.
TruncatedMixture m_step(const Dataset& data, const Responsibilities& gamma, const EmConfig& cfg,
                        std::span<const long long> shift_indices = {},
                        std::optional<double> lambda = std::nullopt);

// Runs EM from `init` until the relative log-likelihood change drops below
// cfg.ll_rel_tol or cfg.max_iters updates have run. Errors from the E or M
// step are rethrown as FitError (with the original nested) carrying the
// iteration index.
FitReport fit(const Dataset& data, const TruncatedMixture& init, const EmConfig& cfg);

// Requires a shift-index-0 component with weight in (0, 1).
LambdaEstimate estimate_lambda(const TruncatedMixture& m);

// d(log-likelihood)/d(mu_k) = sum_n gamma_nk Sigma_k^{-1} (z_n - mu_k), one
// vector per component.
std::vector<Vec> mean_gradient(const TruncatedMixture& m, const Dataset& data);

// sum_n sum_k gamma_nk [ln w_k + ln N(z_n; mu_k, Sigma_k)]
double expected_complete_log_likelihood(const TruncatedMixture& m, const Dataset& data,
                                        const Responsibilities& gamma);

nlohmann::json fit_report_to_json(const FitReport& report);
void save_fit_report(const FitReport& report, const std::filesystem::path& path);

} // namespace hqn
