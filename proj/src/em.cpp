#include "hqn/em.hpp"

#include "hqn/errors.hpp"
#include "hqn/parallel.hpp"
#include "hqn/snapshot.hpp"

#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>

namespace hqn {

Responsibilities::Responsibilities(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), values_(rows * cols, 0.0) {}

std::vector<double> Responsibilities::column_sums() const {
    std::vector<double> sums(cols_, 0.0);
    for (std::size_t n = 0; n < rows_; ++n) {
        for (std::size_t k = 0; k < cols_; ++k) {
            sums[k] += (*this)(n, k);
        }
    }
    return sums;
}

std::size_t Responsibilities::argmax(std::size_t n) const {
    std::size_t best = 0;
    for (std::size_t k = 1; k < cols_; ++k) {
        if ((*this)(n, k) > (*this)(n, best)) {
            best = k;
        }
    }
    return best;
}

void EmConfig::validate() const {
    if (max_iters < 1) {
        throw InvalidParameter("max_iters must be at least 1");
    }
    if (!(ll_rel_tol > 0.0) || !std::isfinite(ll_rel_tol)) {
        throw InvalidParameter("ll_rel_tol must be positive");
    }
    if (!(cov_floor >= 0.0) || !std::isfinite(cov_floor)) {
        throw InvalidParameter("cov_floor must be nonnegative");
    }
}

namespace {

void check_dims(const TruncatedMixture& m, const Dataset& data) {
    if (m.dim() != data.dim()) {
        throw DimensionMismatch("mixture dimension " + std::to_string(m.dim()) + " differs from data dimension " +
                                std::to_string(data.dim()));
    }
}

} // namespace

Expectation expectation(const TruncatedMixture& m, const Dataset& data, unsigned threads) {
    check_dims(m, data);
    const std::size_t n_rows = data.size();
    const std::size_t k_comp = m.size();
    const std::size_t d = data.dim();

    std::vector<double> log_w(k_comp);
    for (std::size_t k = 0; k < k_comp; ++k) {
        log_w[k] = std::log(m[k].weight);
    }

    Responsibilities gamma(n_rows, k_comp);
    std::vector<double> row_ll(n_rows);
    parallel_for(n_rows, threads, [&](std::size_t begin, std::size_t end) {
        std::vector<double> scratch(2 * d);
        std::vector<double> terms(k_comp);
        for (std::size_t n = begin; n < end; ++n) {
            const auto z = data.row(n);
            for (std::size_t k = 0; k < k_comp; ++k) {
                terms[k] = log_w[k] + mvn_logpdf(z, m[k].mean, m.factor(k), scratch);
            }
            const double lse = log_sum_exp(terms);
            if (!std::isfinite(lse)) {
                throw DegeneratePoint(n);
            }
            row_ll[n] = lse;
            auto g = gamma.row(n);
            for (std::size_t k = 0; k < k_comp; ++k) {
                g[k] = std::exp(terms[k] - lse);
            }
        }
    });
    return {std::move(gamma), pairwise_sum(row_ll)};
}

double log_likelihood(const TruncatedMixture& m, const Dataset& data, unsigned threads) {
    return expectation(m, data, threads).log_likelihood;
}

Responsibilities e_step(const TruncatedMixture& m, const Dataset& data, unsigned threads) {
    return expectation(m, data, threads).gamma;
}

TruncatedMixture m_step(const Dataset& data, const Responsibilities& gamma, const EmConfig& cfg,
                        std::span<const long long> shift_indices, std::optional<double> lambda) {
    cfg.validate();
    const std::size_t n_rows = data.size();
    const std::size_t k_comp = gamma.cols();
    const std::size_t d = data.dim();
    if (gamma.rows() != n_rows) {
        throw DimensionMismatch("responsibility rows differ from dataset size");
    }
    if (k_comp == 0) {
        throw InvalidArgument("responsibilities have no components");
    }
    if (!shift_indices.empty() && shift_indices.size() != k_comp) {
        throw DimensionMismatch("shift index count differs from component count");
    }

    const std::vector<double> counts = gamma.column_sums();
    const double threshold =
        static_cast<double>(k_comp) * std::numeric_limits<double>::epsilon() * static_cast<double>(n_rows);
    for (std::size_t k = 0; k < k_comp; ++k) {
        if (!(counts[k] > threshold)) {
            throw EmptyCluster(k);
        }
    }

    std::vector<double> weights(k_comp);
    double weight_sum = 0.0;
    for (std::size_t k = 0; k < k_comp; ++k) {
        weights[k] = counts[k] / static_cast<double>(n_rows);
        weight_sum += weights[k];
    }

    std::vector<MixtureComponent> comps;
    comps.reserve(k_comp);
    for (std::size_t k = 0; k < k_comp; ++k) {
        Vec mean(d, 0.0);
        for (std::size_t n = 0; n < n_rows; ++n) {
            const double g = gamma(n, k);
            const auto z = data.row(n);
            for (std::size_t i = 0; i < d; ++i) {
                mean[i] += g * z[i];
            }
        }
        for (double& v : mean) {
            v /= counts[k];
        }

        SquareMatrix cov(d, 0.0);
        Vec diff(d);
        for (std::size_t n = 0; n < n_rows; ++n) {
            const double g = gamma(n, k);
            const auto z = data.row(n);
            for (std::size_t i = 0; i < d; ++i) {
                diff[i] = z[i] - mean[i];
            }
            for (std::size_t i = 0; i < d; ++i) {
                for (std::size_t j = 0; j <= i; ++j) {
                    cov(i, j) += g * diff[i] * diff[j];
                }
            }
        }
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j <= i; ++j) {
                cov(i, j) /= counts[k];
                cov(j, i) = cov(i, j);
            }
            cov(i, i) += cfg.cov_floor;
        }

        const long long label = shift_indices.empty() ? static_cast<long long>(k) : shift_indices[k];
        comps.push_back({weights[k] / weight_sum, label, std::move(mean), std::move(cov)});
    }
    return TruncatedMixture(std::move(comps), lambda);
}

namespace {

void maybe_snapshot(const EmConfig& cfg, std::size_t iteration, const TruncatedMixture& m,
                    const Responsibilities& gamma, const Dataset& data) {
    if (cfg.snapshot_every == 0 || iteration % cfg.snapshot_every != 0) {
        return;
    }
    char name[32];
    std::snprintf(name, sizeof name, "iter_%04zu.svg", iteration);
    write_snapshot_svg(m, gamma, data, cfg.snapshot_dir / name);
}

} // namespace

FitReport fit(const Dataset& data, const TruncatedMixture& init, const EmConfig& cfg) {
    cfg.validate();
    check_dims(init, data);
    if (cfg.snapshot_every > 0 && data.dim() != 2) {
        throw UnsupportedDimension("snapshots need 2-D data, got dimension " + std::to_string(data.dim()));
    }

    FitReport report;
    std::optional<Expectation> step;
    try {
        step = expectation(init, data, cfg.threads);
    } catch (const Error& e) {
        std::throw_with_nested(FitError(0, e.what()));
    }
    report.iterations.push_back({init, step->log_likelihood, step->gamma.column_sums()});
    maybe_snapshot(cfg, 0, init, step->gamma, data);

    const std::vector<long long> labels = init.indices();
    for (std::size_t it = 1; it <= cfg.max_iters; ++it) {
        std::optional<TruncatedMixture> next;
        try {
            next = m_step(data, step->gamma, cfg, labels, init.lambda());
            step = expectation(*next, data, cfg.threads);
        } catch (const Error& e) {
            std::throw_with_nested(FitError(it, e.what()));
        }
        const double prev = report.iterations.back().log_likelihood;
        report.iterations.push_back({*next, step->log_likelihood, step->gamma.column_sums()});
        maybe_snapshot(cfg, it, *next, step->gamma, data);

        const double scale = std::max(std::abs(prev), std::numeric_limits<double>::min());
        if (std::abs(step->log_likelihood - prev) / scale < cfg.ll_rel_tol) {
            report.converged = true;
            break;
        }
    }
    report.iterations_run = report.iterations.size() - 1;
    try {
        report.lambda = estimate_lambda(report.final_mixture());
    } catch (const NotEstimable&) {
        report.lambda.reset();
    }
    return report;
}

LambdaEstimate estimate_lambda(const TruncatedMixture& m) {
    const MixtureComponent* zero = nullptr;
    double mass = 0.0;
    double first_moment = 0.0;
    for (const auto& c : m.components()) {
        if (c.k == 0) {
            zero = &c;
        }
        mass += c.weight;
        first_moment += static_cast<double>(c.k) * c.weight;
    }
    if (zero == nullptr) {
        throw NotEstimable("no component with shift index 0");
    }
    if (!(zero->weight > 0.0 && zero->weight < 1.0)) {
        throw NotEstimable("shift-index-0 weight must lie in (0, 1)");
    }
    return {-std::log(zero->weight), first_moment / mass};
}

std::vector<Vec> mean_gradient(const TruncatedMixture& m, const Dataset& data) {
    const Responsibilities gamma = e_step(m, data);
    const std::size_t d = data.dim();
    std::vector<Vec> grads;
    grads.reserve(m.size());
    for (std::size_t k = 0; k < m.size(); ++k) {
        Vec acc(d, 0.0);
        for (std::size_t n = 0; n < data.size(); ++n) {
            const auto z = data.row(n);
            for (std::size_t i = 0; i < d; ++i) {
                acc[i] += gamma(n, k) * (z[i] - m[k].mean[i]);
            }
        }
        grads.push_back(m.factor(k).solve(acc));
    }
    return grads;
}

double expected_complete_log_likelihood(const TruncatedMixture& m, const Dataset& data,
                                        const Responsibilities& gamma) {
    check_dims(m, data);
    if (gamma.rows() != data.size() || gamma.cols() != m.size()) {
        throw DimensionMismatch("responsibilities do not match mixture and data");
    }
    std::vector<double> per_row(data.size());
    for (std::size_t n = 0; n < data.size(); ++n) {
        double acc = 0.0;
        for (std::size_t k = 0; k < m.size(); ++k) {
            const double g = gamma(n, k);
            if (g > 0.0) {
                acc += g * (std::log(m[k].weight) + mvn_logpdf(data.row(n), m[k].mean, m.factor(k)));
            }
        }
        per_row[n] = acc;
    }
    return pairwise_sum(per_row);
}

nlohmann::json fit_report_to_json(const FitReport& report) {
    nlohmann::json iters = nlohmann::json::array();
    for (const auto& rec : report.iterations) {
        nlohmann::json means = nlohmann::json::array();
        nlohmann::json covs = nlohmann::json::array();
        for (const auto& c : rec.mixture.components()) {
            means.push_back(c.mean);
            nlohmann::json cov = nlohmann::json::array();
            for (std::size_t r = 0; r < c.cov.dim(); ++r) {
                nlohmann::json row = nlohmann::json::array();
                for (std::size_t col = 0; col < c.cov.dim(); ++col) {
                    row.push_back(c.cov(r, col));
                }
                cov.push_back(std::move(row));
            }
            covs.push_back(std::move(cov));
        }
        iters.push_back({{"ll", rec.log_likelihood},
                         {"k", rec.mixture.indices()},
                         {"weights", rec.mixture.weights()},
                         {"means", std::move(means)},
                         {"covs", std::move(covs)},
                         {"Nk", rec.effective_counts}});
    }
    nlohmann::json j;
    j["iterations"] = std::move(iters);
    j["converged"] = report.converged;
    j["iterations_run"] = report.iterations_run;
    j["lambda_hat"] = report.lambda ? nlohmann::json(report.lambda->lambda_hat) : nlohmann::json(nullptr);
    j["lambda_hat_moment"] = report.lambda ? nlohmann::json(report.lambda->moment) : nlohmann::json(nullptr);
    return j;
}

void save_fit_report(const FitReport& report, const std::filesystem::path& path) {
    write_text_file(path, fit_report_to_json(report).dump(2) + "\n");
}

} // namespace hqn
