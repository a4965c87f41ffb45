#include "hqn/noise_model.hpp"

#include "hqn/errors.hpp"
#include "hqn/parallel.hpp"
#include "hqn/random.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace hqn {

namespace {

// Stages of the keyed random stream used by the sampler.
constexpr std::uint32_t kStageComponent = 0;
constexpr std::uint32_t kStageGaussian = 1;

bool nearly_equal(double a, double b) {
    return std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b));
}

void sort_descending(std::vector<SkeletonTerm>& terms) {
    std::sort(terms.begin(), terms.end(), [](const SkeletonTerm& a, const SkeletonTerm& b) {
        if (nearly_equal(a.weight, b.weight)) {
            return a.k < b.k;
        }
        return a.weight > b.weight;
    });
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

std::optional<double> parse_real(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') {
        s.remove_prefix(1);
    }
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
        return std::nullopt;
    }
    return v;
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            cells.push_back(line.substr(start));
            return cells;
        }
        cells.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

} // namespace

void HybridNoiseSpec::validate() const {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw InvalidParameter("lambda must be positive and finite");
    }
    if (!std::isfinite(mu_z2)) {
        throw InvalidParameter("mu_z2 must be finite");
    }
    if (!(sigma2_z2 > 0.0) || !std::isfinite(sigma2_z2)) {
        throw InvalidParameter("sigma2_z2 must be positive and finite");
    }
    if (dim < 1) {
        throw InvalidParameter("dim must be at least 1");
    }
}

double coverage_bar(double tol, TruncationRule rule) {
    if (!(tol > 0.0 && tol < 1.0)) {
        throw InvalidParameter("tolerance must lie in (0, 1)");
    }
    return rule == TruncationRule::relative ? 1.0 / (1.0 + tol) : 1.0 - tol;
}

double TruncationSkeleton::coverage() const {
    double s = 0.0;
    for (const auto& t : terms) {
        s += t.weight;
    }
    return s;
}

std::vector<long long> TruncationSkeleton::indices() const {
    std::vector<long long> out;
    out.reserve(terms.size());
    for (const auto& t : terms) {
        out.push_back(t.k);
    }
    return out;
}

std::vector<double> TruncationSkeleton::weights() const {
    std::vector<double> out;
    out.reserve(terms.size());
    for (const auto& t : terms) {
        out.push_back(t.weight);
    }
    return out;
}

namespace {

// Contiguous window grown from the mode; stops when `done(window)` holds.
template <class Done>
TruncationSkeleton grow_window(double lambda, Done&& done) {
    const auto mode = static_cast<long long>(std::floor(lambda));
    long long lo = mode;
    long long hi = mode;
    TruncationSkeleton sk{lambda, {{mode, poisson_pmf(lambda, mode)}}};
    while (!done(sk)) {
        if (sk.terms.size() >= kMaxTruncationTerms) {
            throw NonConvergence("truncation window exceeded " + std::to_string(kMaxTruncationTerms) +
                                 " terms");
        }
        const double below = lo > 0 ? poisson_pmf(lambda, lo - 1) : -1.0;
        const double above = poisson_pmf(lambda, hi + 1);
        if (below >= above || nearly_equal(below, above)) {
            --lo;
            sk.terms.push_back({lo, below});
        } else {
            ++hi;
            sk.terms.push_back({hi, above});
        }
    }
    sort_descending(sk.terms);
    return sk;
}

} // namespace

TruncationSkeleton truncate(double lambda, double tol, TruncationRule rule) {
    const double bar = coverage_bar(tol, rule);
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw InvalidParameter("lambda must be positive and finite");
    }
    return grow_window(lambda, [bar](const TruncationSkeleton& sk) { return sk.coverage() >= bar; });
}

TruncationSkeleton most_probable_terms(double lambda, std::size_t count) {
    if (count == 0) {
        throw InvalidParameter("term count must be positive");
    }
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw InvalidParameter("lambda must be positive and finite");
    }
    return grow_window(lambda, [count](const TruncationSkeleton& sk) { return sk.size() >= count; });
}

TruncatedMixture::TruncatedMixture(std::vector<MixtureComponent> components, std::optional<double> lambda)
    : components_(std::move(components)), lambda_(lambda) {
    if (components_.empty()) {
        throw InvalidArgument("mixture needs at least one component");
    }
    const std::size_t d = components_.front().mean.size();
    if (d == 0) {
        throw InvalidArgument("mixture dimension must be positive");
    }
    std::set<long long> seen;
    factors_.reserve(components_.size());
    for (std::size_t i = 0; i < components_.size(); ++i) {
        const auto& c = components_[i];
        if (!(c.weight > 0.0) || !std::isfinite(c.weight)) {
            throw InvalidArgument("component " + std::to_string(i) + " weight must be positive");
        }
        if (c.k < 0 || !seen.insert(c.k).second) {
            throw InvalidArgument("component " + std::to_string(i) + " shift index is negative or repeated");
        }
        if (c.mean.size() != d || c.cov.dim() != d) {
            throw DimensionMismatch("component " + std::to_string(i) + " has inconsistent dimension");
        }
        for (double v : c.mean) {
            if (!std::isfinite(v)) {
                throw InvalidArgument("component " + std::to_string(i) + " mean is not finite");
            }
        }
        if (!is_symmetric(c.cov)) {
            throw InvalidArgument("component " + std::to_string(i) + " covariance is not symmetric");
        }
        factors_.emplace_back(c.cov);
    }
}

double TruncatedMixture::coverage() const {
    double s = 0.0;
    for (const auto& c : components_) {
        s += c.weight;
    }
    return s;
}

std::vector<double> TruncatedMixture::weights() const {
    std::vector<double> out;
    for (const auto& c : components_) {
        out.push_back(c.weight);
    }
    return out;
}

std::vector<long long> TruncatedMixture::indices() const {
    std::vector<long long> out;
    for (const auto& c : components_) {
        out.push_back(c.k);
    }
    return out;
}

TruncatedMixture build_mixture(const HybridNoiseSpec& spec, const TruncationSkeleton& skeleton) {
    spec.validate();
    std::vector<SkeletonTerm> by_index = skeleton.terms;
    std::sort(by_index.begin(), by_index.end(),
              [](const SkeletonTerm& a, const SkeletonTerm& b) { return a.k < b.k; });
    std::vector<MixtureComponent> comps;
    comps.reserve(by_index.size());
    for (const auto& t : by_index) {
        comps.push_back({t.weight, t.k, Vec(spec.dim, spec.mu_z2 + static_cast<double>(t.k)),
                         SquareMatrix::identity(spec.dim, spec.sigma2_z2)});
    }
    return TruncatedMixture(std::move(comps), spec.lambda);
}

double mixture_logpdf(const TruncatedMixture& m, std::span<const double> z) {
    if (z.size() != m.dim()) {
        throw DimensionMismatch("point dimension " + std::to_string(z.size()) + " differs from mixture dimension " +
                                std::to_string(m.dim()));
    }
    std::vector<double> terms(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
        terms[i] = std::log(m[i].weight) + mvn_logpdf(z, m[i].mean, m.factor(i));
    }
    return log_sum_exp(terms);
}

Dataset::Dataset(std::size_t dim, std::vector<double> values, std::optional<DatasetMeta> meta)
    : dim_(dim), values_(std::move(values)), meta_(std::move(meta)) {
    if (dim_ == 0) {
        throw InvalidArgument("dataset dimension must be positive");
    }
    if (values_.empty() || values_.size() % dim_ != 0) {
        throw InvalidArgument("dataset must hold a positive whole number of rows");
    }
}

std::size_t draw_component(std::span<const double> weights, std::uint64_t seed, std::uint64_t row) {
    double total = 0.0;
    for (double w : weights) {
        total += w;
    }
    const double target = CounterRng(seed).uniform(row, kStageComponent, 0) * total;
    double cum = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        cum += weights[i];
        if (target < cum) {
            return i;
        }
    }
    return weights.size() - 1;
}

Dataset sample(const TruncatedMixture& mixture, std::size_t n, std::uint64_t seed, unsigned threads) {
    if (n == 0) {
        throw InvalidParameter("sample count must be positive");
    }
    const std::size_t d = mixture.dim();
    const std::vector<double> weights = mixture.weights();
    const CounterRng rng(seed);
    std::vector<double> values(n * d);
    parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
        Vec eps(d);
        for (std::size_t r = begin; r < end; ++r) {
            const std::size_t c = draw_component(weights, seed, r);
            for (std::size_t j = 0; j < d; ++j) {
                eps[j] = rng.normal(r, kStageGaussian, static_cast<std::uint32_t>(j));
            }
            const SquareMatrix& l = mixture.factor(c).lower();
            for (std::size_t i = 0; i < d; ++i) {
                double v = mixture[c].mean[i];
                for (std::size_t j = 0; j <= i; ++j) {
                    v += l(i, j) * eps[j];
                }
                values[r * d + i] = v;
            }
        }
    });
    return Dataset(d, std::move(values));
}

Dataset sample(const HybridNoiseSpec& spec, const TruncationSkeleton& skeleton, std::size_t n,
               std::uint64_t seed, unsigned threads) {
    const Dataset raw = sample(build_mixture(spec, skeleton), n, seed, threads);
    std::vector<double> values(raw.values().begin(), raw.values().end());
    return Dataset(spec.dim, std::move(values), DatasetMeta{seed, spec, kGeneratorTag});
}

std::string format_real(double v) {
    char buf[40];
    const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf, static_cast<std::size_t>(len));
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot open " + path.string() + " for writing");
    }
    out << text;
    if (!out) {
        throw Error("failed writing " + path.string());
    }
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
    std::string out;
    if (const auto& meta = data.meta()) {
        out += "# seed=" + std::to_string(meta->seed) + "\n";
        out += "# lambda=" + format_real(meta->spec.lambda) + "\n";
        out += "# mu_z2=" + format_real(meta->spec.mu_z2) + "\n";
        out += "# sigma2_z2=" + format_real(meta->spec.sigma2_z2) + "\n";
        out += "# generator=" + meta->generator + "\n";
    }
    for (std::size_t j = 0; j < data.dim(); ++j) {
        out += (j ? ",x" : "x") + std::to_string(j);
    }
    out += '\n';
    for (std::size_t r = 0; r < data.size(); ++r) {
        const auto row = data.row(r);
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j) {
                out += ',';
            }
            out += format_real(row[j]);
        }
        out += '\n';
    }
    write_text_file(path, out);
}

Dataset parse_dataset(const std::string& text) {
    std::map<std::string, std::string, std::less<>> meta_kv;
    std::size_t dim = 0;
    std::vector<double> values;
    std::size_t line_no = 0;
    bool have_header = false;

    std::istringstream in(text);
    std::string line_buf;
    while (std::getline(in, line_buf)) {
        ++line_no;
        const std::string_view line = trim(line_buf);
        if (line.empty()) {
            continue;
        }
        if (!have_header) {
            if (line.front() == '#') {
                const std::string_view body = trim(line.substr(1));
                const std::size_t eq = body.find('=');
                if (eq != std::string_view::npos) {
                    meta_kv[std::string(trim(body.substr(0, eq)))] = std::string(trim(body.substr(eq + 1)));
                }
                continue;
            }
            const auto cells = split_commas(line);
            for (std::size_t j = 0; j < cells.size(); ++j) {
                if (trim(cells[j]) != "x" + std::to_string(j)) {
                    throw ParseError(line_no, "malformed header, expected x0,x1,...");
                }
            }
            dim = cells.size();
            have_header = true;
            continue;
        }
        const auto cells = split_commas(line);
        if (cells.size() != dim) {
            throw ParseError(line_no, "ragged row: expected " + std::to_string(dim) + " cells, found " +
                                          std::to_string(cells.size()));
        }
        for (std::size_t j = 0; j < dim; ++j) {
            const auto v = parse_real(cells[j]);
            if (!v) {
                throw ParseError(line_no, "non-numeric cell '" + std::string(trim(cells[j])) + "' in column " +
                                              std::to_string(j));
            }
            values.push_back(*v);
        }
    }
    if (!have_header) {
        throw ParseError(line_no, "missing header");
    }
    if (values.empty()) {
        throw ParseError(line_no, "no rows");
    }

    std::optional<DatasetMeta> meta;
    const auto get = [&](std::string_view key) -> std::optional<std::string> {
        const auto it = meta_kv.find(key);
        return it == meta_kv.end() ? std::nullopt : std::optional<std::string>(it->second);
    };
    const auto seed = get("seed");
    const auto lambda = get("lambda");
    const auto mu = get("mu_z2");
    const auto sigma2 = get("sigma2_z2");
    if (seed && lambda && mu && sigma2) {
        DatasetMeta m;
        const auto [ptr, ec] = std::from_chars(seed->data(), seed->data() + seed->size(), m.seed);
        const auto l = parse_real(*lambda);
        const auto u = parse_real(*mu);
        const auto s = parse_real(*sigma2);
        if (ec != std::errc{} || ptr != seed->data() + seed->size() || !l || !u || !s) {
            throw ParseError(0, "malformed metadata comment");
        }
        m.spec = HybridNoiseSpec{*l, *u, *s, dim};
        m.generator = get("generator").value_or("");
        meta = std::move(m);
    }
    return Dataset(dim, std::move(values), std::move(meta));
}

Dataset load_dataset(const std::filesystem::path& path) {
    return parse_dataset(read_text_file(path));
}

nlohmann::json mixture_to_json(const TruncatedMixture& m) {
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& c : m.components()) {
        nlohmann::json cov = nlohmann::json::array();
        for (std::size_t r = 0; r < c.cov.dim(); ++r) {
            nlohmann::json row = nlohmann::json::array();
            for (std::size_t col = 0; col < c.cov.dim(); ++col) {
                row.push_back(c.cov(r, col));
            }
            cov.push_back(std::move(row));
        }
        comps.push_back({{"k", c.k}, {"weight", c.weight}, {"mean", c.mean}, {"cov", std::move(cov)}});
    }
    nlohmann::json j;
    j["lambda"] = m.lambda() ? nlohmann::json(*m.lambda()) : nlohmann::json(nullptr);
    j["dim"] = m.dim();
    j["coverage"] = m.coverage();
    j["components"] = std::move(comps);
    return j;
}

TruncatedMixture mixture_from_json(const nlohmann::json& j) {
    try {
        std::vector<MixtureComponent> comps;
        const auto dim = j.at("dim").get<std::size_t>();
        for (const auto& c : j.at("components")) {
            std::vector<double> cov;
            for (const auto& row : c.at("cov")) {
                for (const auto& v : row) {
                    cov.push_back(v.get<double>());
                }
            }
            comps.push_back({c.at("weight").get<double>(), c.at("k").get<long long>(),
                             c.at("mean").get<std::vector<double>>(), SquareMatrix(dim, std::move(cov))});
        }
        std::optional<double> lambda;
        if (j.contains("lambda") && !j["lambda"].is_null()) {
            lambda = j["lambda"].get<double>();
        }
        return TruncatedMixture(std::move(comps), lambda);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(0, std::string("malformed mixture document: ") + e.what());
    }
}

void save_mixture(const TruncatedMixture& m, const std::filesystem::path& path) {
    write_text_file(path, mixture_to_json(m).dump(2) + "\n");
}

TruncatedMixture load_mixture(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(0, e.what());
    }
    return mixture_from_json(j);
}

} // namespace hqn
