#pragma once

#include "hqn/numkit.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace hqn {

// Generative model of hybrid noise: a Poisson(lambda) photon count k shifts a
// Gaussian N(mu_z2, sigma2_z2) along every one of `dim` coordinates.
struct HybridNoiseSpec {
    double lambda = 2.0;
    double mu_z2 = 0.0;
    double sigma2_z2 = 1.0;
    std::size_t dim = 2;

    void validate() const;

    friend bool operator==(const HybridNoiseSpec&, const HybridNoiseSpec&) = default;
};

// How the truncation bar is measured for a candidate window with mass S.
//   relative: the dropped mass relative to the kept mass, (1 - S) / S <= tol
//   absolute: the dropped mass itself, 1 - S <= tol
enum class TruncationRule { relative, absolute };

// Mass a window must reach under `rule` for tolerance `tol`.
double coverage_bar(double tol, TruncationRule rule);

struct SkeletonTerm {
    long long k = 0;
    double weight = 0.0;

    friend bool operator==(const SkeletonTerm&, const SkeletonTerm&) = default;
};

// Retained Poisson terms, in descending-pmf order. Weights are raw pmf
// values; their sum is the coverage and stays below one.
struct TruncationSkeleton {
    double lambda = 0.0;
    std::vector<SkeletonTerm> terms;

    std::size_t size() const noexcept { return terms.size(); }
    double coverage() const;
    std::vector<long long> indices() const;
    std::vector<double> weights() const;
};

inline constexpr double kDefaultTruncationTol = 0.15;
inline constexpr std::size_t kMaxTruncationTerms = 10000;

// Grows a contiguous window outward from the Poisson mode, always taking the
// neighbour with the larger pmf (ties go to the lower index), until the
// window's mass meets the bar for `tol`. Throws InvalidParameter for tol
// outside (0, 1) and NonConvergence past kMaxTruncationTerms terms.
TruncationSkeleton truncate(double lambda, double tol = kDefaultTruncationTol,
                            TruncationRule rule = TruncationRule::relative);

// The `count` most probable terms, regardless of any bar.
TruncationSkeleton most_probable_terms(double lambda, std::size_t count);

struct MixtureComponent {
    double weight = 0.0;
    long long k = 0;
    Vec mean;
    SquareMatrix cov;

    friend bool operator==(const MixtureComponent&, const MixtureComponent&) = default;
};

// Finite Gaussian mixture with explicit components. Weights need not sum to
// one. Construction validates every invariant and factors each covariance.
class TruncatedMixture {
public:
    explicit TruncatedMixture(std::vector<MixtureComponent> components,
                              std::optional<double> lambda = std::nullopt);

    std::size_t size() const noexcept { return components_.size(); }
    std::size_t dim() const noexcept { return components_.front().mean.size(); }
    const std::vector<MixtureComponent>& components() const noexcept { return components_; }
    const MixtureComponent& operator[](std::size_t i) const { return components_[i]; }
    const Cholesky& factor(std::size_t i) const { return factors_[i]; }
    std::optional<double> lambda() const noexcept { return lambda_; }

    double coverage() const;
    std::vector<double> weights() const;
    std::vector<long long> indices() const;

    friend bool operator==(const TruncatedMixture& a, const TruncatedMixture& b) {
        return a.components_ == b.components_ && a.lambda_ == b.lambda_;
    }

private:
    std::vector<MixtureComponent> components_;
    std::vector<Cholesky> factors_;
    std::optional<double> lambda_;
};

// mean_k = (mu_z2 + k) * 1, cov_k = sigma2_z2 * I; weights kept as given.
// Components come out in ascending shift-index order.
TruncatedMixture build_mixture(const HybridNoiseSpec& spec, const TruncationSkeleton& skeleton);

double mixture_logpdf(const TruncatedMixture& m, std::span<const double> z);

struct DatasetMeta {
    std::uint64_t seed = 0;
    HybridNoiseSpec spec;
    std::string generator;

    friend bool operator==(const DatasetMeta&, const DatasetMeta&) = default;
};

inline constexpr const char* kGeneratorTag = "hqn-sample/1";

// N x dim samples stored row-major.
class Dataset {
public:
    Dataset(std::size_t dim, std::vector<double> values, std::optional<DatasetMeta> meta = std::nullopt);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return values_.size() / dim_; }
    std::span<const double> row(std::size_t i) const {
        return std::span<const double>(values_).subspan(i * dim_, dim_);
    }
    std::span<const double> values() const noexcept { return values_; }
    const std::optional<DatasetMeta>& meta() const noexcept { return meta_; }

    friend bool operator==(const Dataset&, const Dataset&) = default;

private:
    std::size_t dim_;
    std::vector<double> values_;
    std::optional<DatasetMeta> meta_;
};

// Component ordinal for `row`: inverse CDF over the weights renormalized to
// their sum, driven by the row's keyed uniform.
std::size_t draw_component(std::span<const double> weights, std::uint64_t seed, std::uint64_t row);

Dataset sample(const HybridNoiseSpec& spec, const TruncationSkeleton& skeleton, std::size_t n,
               std::uint64_t seed, unsigned threads = 1);
Dataset sample(const TruncatedMixture& mixture, std::size_t n, std::uint64_t seed, unsigned threads = 1);

// 17 significant digits; parses back to the identical double.
std::string format_real(double v);

void save_dataset(const Dataset& data, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);
Dataset parse_dataset(const std::string& text);

nlohmann::json mixture_to_json(const TruncatedMixture& m);
TruncatedMixture mixture_from_json(const nlohmann::json& j);
void save_mixture(const TruncatedMixture& m, const std::filesystem::path& path);
TruncatedMixture load_mixture(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

} // namespace hqn
