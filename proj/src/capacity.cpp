#include "hqn/capacity.hpp"

#include "hqn/errors.hpp"
#include "hqn/parallel.hpp"
#include "hqn/snapshot.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

namespace hqn {

namespace {

constexpr double kLog2E = std::numbers::log2e;

std::optional<double> parse_number(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
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

std::vector<double> effective_weights(std::vector<double> w, const CapacityOptions& opts) {
    if (opts.renormalize) {
        double total = 0.0;
        for (double v : w) {
            total += v;
        }
        for (double& v : w) {
            v /= total;
        }
    }
    return w;
}

std::string fingerprint_of(const ScalarChannelParams& p, const CapacityOptions& opts) {
    std::string f = "lambda=" + format_real(p.lambda) + ";k=";
    const auto idx = p.skeleton.indices();
    for (std::size_t i = 0; i < idx.size(); ++i) {
        f += (i ? "," : "") + std::to_string(idx[i]);
    }
    f += ";sigma2_z2=" + format_real(p.sigma2_z2);
    f += ";renormalize=" + std::string(opts.renormalize ? "1" : "0");
    return f;
}

} // namespace

void ScalarChannelParams::validate() const {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw InvalidParameter("lambda must be positive and finite");
    }
    if (!(sigma2_x > 0.0) || !std::isfinite(sigma2_x)) {
        throw InvalidParameter("sigma2_x must be positive");
    }
    if (!(sigma2_z2 > 0.0) || !std::isfinite(sigma2_z2)) {
        throw InvalidParameter("sigma2_z2 must be positive");
    }
    if (skeleton.terms.empty()) {
        throw InvalidParameter("skeleton has no terms");
    }
    for (const auto& t : skeleton.terms) {
        if (!(t.weight > 0.0) || t.k < 0) {
            throw InvalidParameter("skeleton terms need positive weights and nonnegative indices");
        }
    }
}

void VectorChannelParams::validate() const {
    if (sigma_y_covs.size() != mixture.size()) {
        throw DimensionMismatch("need one received-signal covariance per component");
    }
    for (const auto& s : sigma_y_covs) {
        if (s.dim() != mixture.dim()) {
            throw DimensionMismatch("received-signal covariance dimension differs from noise dimension");
        }
        Cholesky check(s);
    }
}

double capacity_scalar(const ScalarChannelParams& p, const CapacityOptions& opts) {
    p.validate();
    const std::vector<double> w = effective_weights(p.skeleton.weights(), opts);
    const std::vector<long long> idx = p.skeleton.indices();
    const std::size_t r = w.size();

    const double cross_var = 2.0 * p.sigma2_z2;
    const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi * cross_var);
    const double entropy_term = 0.5 * std::log2(2.0 * std::numbers::pi * std::numbers::e * (p.sigma2_x + p.sigma2_z2));

    std::vector<double> inner(r);
    double c = 0.0;
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < r; ++j) {
            const auto diff = static_cast<double>(idx[i] - idx[j]);
            inner[j] = std::log(w[j]) + log_norm - 0.5 * diff * diff / cross_var;
        }
        c += w[i] * (-std::log2(w[i]) + entropy_term + kLog2E * log_sum_exp(inner));
    }
    return c;
}

double capacity_vector(const VectorChannelParams& p, const CapacityOptions& opts) {
    p.validate();
    const TruncatedMixture& m = p.mixture;
    const std::vector<double> w = effective_weights(m.weights(), opts);
    const std::size_t r = m.size();
    const auto dim = static_cast<double>(m.dim());
    const double log2_two_pi_e = std::log2(2.0 * std::numbers::pi * std::numbers::e);

    std::vector<double> inner(r);
    double c = 0.0;
    for (std::size_t i = 0; i < r; ++i) {
        const double log_det_y = Cholesky(p.sigma_y_covs[i]).log_det();
        for (std::size_t j = 0; j < r; ++j) {
            inner[j] = std::log(w[j]) + mvn_logpdf(m[i].mean, m[j].mean, m[i].cov + m[j].cov);
        }
        c += w[i] * (-std::log2(w[i]) + 0.5 * (dim * log2_two_pi_e + kLog2E * log_det_y) +
                     kLog2E * log_sum_exp(inner));
    }
    return c;
}

VectorChannelParams scalar_as_vector(const ScalarChannelParams& p, double mu_z2) {
    p.validate();
    std::vector<MixtureComponent> comps;
    std::vector<SquareMatrix> ys;
    for (const auto& t : p.skeleton.terms) {
        comps.push_back({t.weight, t.k, Vec{mu_z2 + static_cast<double>(t.k)}, SquareMatrix::identity(1, p.sigma2_z2)});
        ys.push_back(SquareMatrix::identity(1, p.sigma2_x + p.sigma2_z2));
    }
    return {TruncatedMixture(std::move(comps), p.lambda), std::move(ys)};
}

std::vector<double> CapacityCurve::grid() const {
    std::vector<double> g;
    g.reserve(points.size());
    for (const auto& p : points) {
        g.push_back(p.snr_db);
    }
    return g;
}

double snr_from_db(double snr_db) {
    return std::pow(10.0, snr_db / 10.0);
}

CapacityCurve sweep(const ScalarChannelParams& tmpl, std::span<const double> snr_db_grid, unsigned threads,
                    const CapacityOptions& opts) {
    if (snr_db_grid.empty()) {
        throw InvalidParameter("SNR grid is empty");
    }
    for (std::size_t i = 0; i < snr_db_grid.size(); ++i) {
        if (!std::isfinite(snr_db_grid[i]) || (i > 0 && !(snr_db_grid[i] > snr_db_grid[i - 1]))) {
            throw InvalidParameter("SNR grid must be finite and strictly increasing");
        }
    }
    tmpl.validate();

    CapacityCurve curve;
    curve.points.resize(snr_db_grid.size());
    curve.fingerprint = fingerprint_of(tmpl, opts);
    parallel_for(snr_db_grid.size(), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            ScalarChannelParams p = tmpl;
            p.sigma2_x = snr_from_db(snr_db_grid[i]) * tmpl.sigma2_z2;
            curve.points[i] = {snr_db_grid[i], capacity_scalar(p, opts)};
        }
    });
    return curve;
}

std::vector<double> parse_grid(const std::string& spec) {
    std::vector<std::string_view> parts;
    std::string_view rest(spec);
    while (true) {
        const auto colon = rest.find(':');
        parts.push_back(rest.substr(0, colon));
        if (colon == std::string_view::npos) {
            break;
        }
        rest.remove_prefix(colon + 1);
    }
    if (parts.size() != 3) {
        throw InvalidParameter("grid must be min:max:step, got '" + spec + "'");
    }
    const auto lo = parse_number(parts[0]);
    const auto hi = parse_number(parts[1]);
    const auto step = parse_number(parts[2]);
    if (!lo || !hi || !step) {
        throw InvalidParameter("grid must be min:max:step, got '" + spec + "'");
    }
    if (!(*step > 0.0) || *hi < *lo) {
        throw InvalidParameter("grid needs step > 0 and max >= min");
    }
    const double count = std::floor((*hi - *lo) / *step + 1e-9) + 1.0;
    if (count > 1e6) {
        throw InvalidParameter("grid has too many points");
    }
    std::vector<double> grid;
    for (std::size_t i = 0; i < static_cast<std::size_t>(count); ++i) {
        grid.push_back(*lo + static_cast<double>(i) * *step);
    }
    return grid;
}

ComparisonReport compare(const CapacityCurve& a, const CapacityCurve& b) {
    if (a.grid() != b.grid()) {
        throw GridMismatch("curves are evaluated on different SNR grids");
    }
    if (a.points.empty()) {
        throw GridMismatch("curves are empty");
    }
    ComparisonReport r;
    r.grid = a.grid();
    r.fingerprint_a = a.fingerprint;
    r.fingerprint_b = b.fingerprint;
    bool all_above = true;
    bool all_below = true;
    for (std::size_t i = 0; i < a.points.size(); ++i) {
        const double d = a.points[i].capacity_bits - b.points[i].capacity_bits;
        r.delta.push_back(d);
        if (!(d > 0.0)) {
            all_above = false;
            r.a_not_above_b.push_back(r.grid[i]);
        }
        if (!(d < 0.0)) {
            all_below = false;
        }
    }
    r.a_dominates_b = all_above;
    r.b_dominates_a = all_below;
    return r;
}

nlohmann::json comparison_to_json(const ComparisonReport& r) {
    nlohmann::json j;
    j["grid"] = r.grid;
    j["delta"] = r.delta;
    j["a_dominates_b"] = r.a_dominates_b;
    j["b_dominates_a"] = r.b_dominates_a;
    j["a_not_above_b"] = r.a_not_above_b;
    j["fingerprint_a"] = r.fingerprint_a;
    j["fingerprint_b"] = r.fingerprint_b;
    j["notes"] = r.notes;
    return j;
}

std::string curve_to_csv(const CapacityCurve& c) {
    std::string out;
    if (!c.fingerprint.empty()) {
        out += "# " + c.fingerprint + "\n";
    }
    out += "snr_db,capacity_bits\n";
    for (const auto& p : c.points) {
        out += format_real(p.snr_db) + "," + format_real(p.capacity_bits) + "\n";
    }
    return out;
}

CapacityCurve parse_curve_csv(const std::string& text) {
    CapacityCurve c;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        if (!have_header) {
            if (line.front() == '#') {
                std::string_view body(line);
                body.remove_prefix(1);
                while (!body.empty() && body.front() == ' ') {
                    body.remove_prefix(1);
                }
                c.fingerprint = std::string(body);
                continue;
            }
            if (line != "snr_db,capacity_bits") {
                throw ParseError(line_no, "expected header snr_db,capacity_bits");
            }
            have_header = true;
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
            throw ParseError(line_no, "expected two cells");
        }
        const auto x = parse_number(std::string_view(line).substr(0, comma));
        const auto y = parse_number(std::string_view(line).substr(comma + 1));
        if (!x || !y) {
            throw ParseError(line_no, "non-numeric cell");
        }
        if (!c.points.empty() && !(*x > c.points.back().snr_db)) {
            throw ParseError(line_no, "snr_db must be strictly increasing");
        }
        c.points.push_back({*x, *y});
    }
    if (!have_header) {
        throw ParseError(line_no, "missing header");
    }
    if (c.points.empty()) {
        throw ParseError(line_no, "no rows");
    }
    return c;
}

void save_curve(const CapacityCurve& c, const std::filesystem::path& path) {
    write_text_file(path, curve_to_csv(c));
}

CapacityCurve load_curve(const std::filesystem::path& path) {
    return parse_curve_csv(read_text_file(path));
}

namespace {

std::string fmt2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char ch : s) {
        switch (ch) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += ch;
        }
    }
    return out;
}

} // namespace

std::string render_overlay_svg(const CapacityCurve& a, const CapacityCurve& b, const std::string& label_a,
                               const std::string& label_b) {
    constexpr double w = 720.0, h = 480.0, left = 70.0, right = 20.0, top = 20.0, bottom = 50.0;
    double xmin = a.points.front().snr_db, xmax = xmin;
    double ymin = a.points.front().capacity_bits, ymax = ymin;
    for (const auto* c : {&a, &b}) {
        for (const auto& p : c->points) {
            xmin = std::min(xmin, p.snr_db);
            xmax = std::max(xmax, p.snr_db);
            ymin = std::min(ymin, p.capacity_bits);
            ymax = std::max(ymax, p.capacity_bits);
        }
    }
    if (xmax == xmin) {
        xmax = xmin + 1.0;
    }
    if (ymax == ymin) {
        ymax = ymin + 1.0;
    }
    const auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * (w - left - right); };
    const auto py = [&](double y) { return h - bottom - (y - ymin) / (ymax - ymin) * (h - top - bottom); };

    std::string svg = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"480\" viewBox=\"0 0 720 480\">\n";
    svg += "<rect x=\"0\" y=\"0\" width=\"720\" height=\"480\" fill=\"white\"/>\n";
    svg += "<line x1=\"" + fmt2(left) + "\" y1=\"" + fmt2(h - bottom) + "\" x2=\"" + fmt2(w - right) + "\" y2=\"" +
           fmt2(h - bottom) + "\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + fmt2(left) + "\" y1=\"" + fmt2(top) + "\" x2=\"" + fmt2(left) + "\" y2=\"" +
           fmt2(h - bottom) + "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + fmt2(w / 2) + "\" y=\"" + fmt2(h - 12) + "\" text-anchor=\"middle\">SNR (dB)</text>\n";
    svg += "<text x=\"16\" y=\"" + fmt2(h / 2) + "\" transform=\"rotate(-90 16 " + fmt2(h / 2) +
           ")\" text-anchor=\"middle\">capacity (bits)</text>\n";
    svg += "<text x=\"" + fmt2(left - 6) + "\" y=\"" + fmt2(py(ymin)) + "\" text-anchor=\"end\">" + fmt2(ymin) +
           "</text>\n";
    svg += "<text x=\"" + fmt2(left - 6) + "\" y=\"" + fmt2(py(ymax) + 10) + "\" text-anchor=\"end\">" + fmt2(ymax) +
           "</text>\n";
    svg += "<text x=\"" + fmt2(left) + "\" y=\"" + fmt2(h - bottom + 16) + "\" text-anchor=\"middle\">" + fmt2(xmin) +
           "</text>\n";
    svg += "<text x=\"" + fmt2(w - right) + "\" y=\"" + fmt2(h - bottom + 16) + "\" text-anchor=\"middle\">" +
           fmt2(xmax) + "</text>\n";

    const std::pair<const CapacityCurve*, std::string> series[] = {{&a, label_a}, {&b, label_b}};
    for (std::size_t s = 0; s < 2; ++s) {
        svg += "<polyline fill=\"none\" stroke=\"" + std::string(palette_color(s)) + "\" stroke-width=\"2\" points=\"";
        const auto& pts = series[s].first->points;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            svg += (i ? " " : "") + fmt2(px(pts[i].snr_db)) + "," + fmt2(py(pts[i].capacity_bits));
        }
        svg += "\"/>\n";
        svg += "<text x=\"" + fmt2(left + 12) + "\" y=\"" + fmt2(top + 16 + 18.0 * static_cast<double>(s)) +
               "\" fill=\"" + palette_color(s) + "\">" + xml_escape(series[s].second) + "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

} // namespace hqn
