#include "cli.hpp"

#include "hqn/capacity.hpp"
#include "hqn/em.hpp"
#include "hqn/errors.hpp"
#include "hqn/noise_model.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

namespace hqn::cli {

namespace {

// Raised when a flag value fails the owning module's preconditions.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

template <class Fn>
auto as_usage(Fn&& fn) {
    try {
        return fn();
    } catch (const InvalidParameter& e) {
        throw UsageError(e.what());
    }
}

struct GlobalOptions {
    unsigned threads = 1;
    std::string out;
};

struct TruncateOptions {
    double lambda = 0.0;
    double tol = kDefaultTruncationTol;
    std::string rule = "relative";
};

struct GenerateOptions {
    double lambda = 2.0;
    double mu_z2 = 0.0;
    double sigma2_z2 = 1.0;
    std::size_t dim = 2;
    double tol = kDefaultTruncationTol;
    std::string rule = "relative";
    long long n = 0;
    std::optional<std::uint64_t> seed;
};

struct FitOptions {
    std::string data;
    std::string init;
    double lambda = 2.0;
    double mu_z2 = 0.0;
    double sigma2_z2 = 1.0;
    double tol = kDefaultTruncationTol;
    std::string rule = "relative";
    std::size_t max_iters = 200;
    double ll_rel_tol = 1e-8;
    double cov_floor = 1e-6;
    std::size_t snapshot_every = 0;
    std::string snapshot_dir = "snapshots";
    std::string mixture_out;
};

struct CapacityCmdOptions {
    double lambda = 2.0;
    std::size_t k = 0;
    double tol = kDefaultTruncationTol;
    std::string rule = "relative";
    double sigma2_z2 = 1.0;
    std::string grid = "0:20:1";
    bool renormalize = false;
};

struct CompareOptions {
    std::string a;
    std::string b;
    std::string plot;
    std::string label_a;
    std::string label_b;
    std::vector<std::string> notes;
};

TruncationRule parse_rule(const std::string& s) {
    if (s == "relative") {
        return TruncationRule::relative;
    }
    if (s == "absolute") {
        return TruncationRule::absolute;
    }
    throw UsageError("--rule must be 'relative' or 'absolute'");
}

std::string brief(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::string fixed(double v, int digits) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

void require_out(const GlobalOptions& g, const char* cmd) {
    if (g.out.empty()) {
        throw UsageError(std::string(cmd) + " needs --out <path>");
    }
}

int cmd_truncate(const GlobalOptions& g, const TruncateOptions& o, std::ostream& out, bool color) {
    const TruncationRule rule = parse_rule(o.rule);
    const auto sk = as_usage([&] { return truncate(o.lambda, o.tol, rule); });
    const double bar = coverage_bar(o.tol, rule);

    out << "lambda    " << brief(o.lambda) << "\n";
    out << "rule      " << o.rule << " (coverage bar " << fixed(bar, 6) << ")\n";
    out << "K         " << sk.size() << "\n";
    out << "  k   weight\n";
    for (const auto& t : sk.terms) {
        char line[64];
        std::snprintf(line, sizeof line, "%3lld   %.6f\n", t.k, t.weight);
        out << line;
    }
    const std::string cov = fixed(sk.coverage(), 6);
    out << "coverage  " << (color ? "\x1b[32m" + cov + "\x1b[0m" : cov) << "\n";

    if (!g.out.empty()) {
        nlohmann::json terms = nlohmann::json::array();
        for (const auto& t : sk.terms) {
            terms.push_back({{"k", t.k}, {"weight", t.weight}});
        }
        const nlohmann::json j = {{"lambda", o.lambda}, {"tol", o.tol},          {"rule", o.rule},
                                  {"K", sk.size()},     {"coverage", sk.coverage()}, {"terms", terms}};
        write_text_file(g.out, j.dump(2) + "\n");
    }
    return kSuccess;
}

int cmd_generate(const GlobalOptions& g, const GenerateOptions& o, std::ostream& out) {
    if (!o.seed) {
        throw UsageError("--seed is required: generated datasets must be reproducible");
    }
    if (o.n < 1) {
        throw UsageError("--n must be at least 1");
    }
    require_out(g, "generate");
    const HybridNoiseSpec spec{o.lambda, o.mu_z2, o.sigma2_z2, o.dim};
    as_usage([&] { spec.validate(); });
    const auto sk = as_usage([&] { return truncate(o.lambda, o.tol, parse_rule(o.rule)); });

    const Dataset data = sample(spec, sk, static_cast<std::size_t>(o.n), *o.seed, g.threads);
    save_dataset(data, g.out);
    out << "wrote " << data.size() << " x " << data.dim() << " samples (K=" << sk.size() << ", seed=" << *o.seed
        << ") to " << g.out << "\n";
    return kSuccess;
}

int cmd_fit(const GlobalOptions& g, const FitOptions& o, std::ostream& out) {
    require_out(g, "fit");
    EmConfig cfg;
    cfg.max_iters = o.max_iters;
    cfg.ll_rel_tol = o.ll_rel_tol;
    cfg.cov_floor = o.cov_floor;
    cfg.snapshot_every = o.snapshot_every;
    cfg.snapshot_dir = o.snapshot_dir;
    cfg.threads = g.threads;
    as_usage([&] { cfg.validate(); });
    const TruncationRule rule = parse_rule(o.rule);

    std::optional<TruncationSkeleton> sk;
    if (o.init.empty()) {
        as_usage([&] { HybridNoiseSpec{o.lambda, o.mu_z2, o.sigma2_z2, 1}.validate(); });
        sk = as_usage([&] { return truncate(o.lambda, o.tol, rule); });
    }

    const Dataset data = load_dataset(o.data);
    const TruncatedMixture init =
        o.init.empty() ? build_mixture(HybridNoiseSpec{o.lambda, o.mu_z2, o.sigma2_z2, data.dim()}, *sk)
                       : load_mixture(o.init);
    if (cfg.snapshot_every > 0) {
        std::filesystem::create_directories(cfg.snapshot_dir);
    }

    const FitReport report = fit(data, init, cfg);
    save_fit_report(report, g.out);
    if (!o.mixture_out.empty()) {
        save_mixture(report.final_mixture(), o.mixture_out);
    }

    out << "iterations " << report.iterations_run << (report.converged ? " (converged)" : " (not converged)")
        << "\n";
    out << "log-likelihood " << format_real(report.iterations.front().log_likelihood) << " -> "
        << format_real(report.iterations.back().log_likelihood) << "\n";
    const auto& fm = report.final_mixture();
    for (std::size_t i = 0; i < fm.size(); ++i) {
        out << "  k=" << fm[i].k << " w=" << fixed(fm[i].weight, 4) << " mean=(";
        for (std::size_t j = 0; j < fm.dim(); ++j) {
            out << (j ? ", " : "") << fixed(fm[i].mean[j], 4);
        }
        out << ")\n";
    }
    if (report.lambda) {
        out << "lambda_hat " << fixed(report.lambda->lambda_hat, 4) << " (moment " << fixed(report.lambda->moment, 4)
            << ")\n";
    }
    return kSuccess;
}

int cmd_capacity(const GlobalOptions& g, const CapacityCmdOptions& o, std::ostream& out) {
    require_out(g, "capacity");
    const auto grid = as_usage([&] { return parse_grid(o.grid); });
    const auto sk = as_usage([&] {
        return o.k > 0 ? most_probable_terms(o.lambda, o.k) : truncate(o.lambda, o.tol, parse_rule(o.rule));
    });
    ScalarChannelParams p{o.lambda, sk, o.sigma2_z2, o.sigma2_z2};
    as_usage([&] { p.validate(); });

    const CapacityCurve curve = sweep(p, grid, g.threads, CapacityOptions{o.renormalize});
    save_curve(curve, g.out);
    out << "wrote " << curve.points.size() << " points (K=" << sk.size() << ", sigma2_z2=" << brief(o.sigma2_z2)
        << ") to " << g.out << "\n";
    return kSuccess;
}

int cmd_compare(const GlobalOptions& g, const CompareOptions& o, std::ostream& out) {
    require_out(g, "compare");
    const CapacityCurve a = load_curve(o.a);
    const CapacityCurve b = load_curve(o.b);
    ComparisonReport r = compare(a, b);
    r.notes = o.notes;
    write_text_file(g.out, comparison_to_json(r).dump(2) + "\n");

    std::filesystem::path plot = o.plot.empty() ? std::filesystem::path(g.out).replace_extension(".svg")
                                                : std::filesystem::path(o.plot);
    write_text_file(plot, render_overlay_svg(a, b, o.label_a.empty() ? o.a : o.label_a,
                                             o.label_b.empty() ? o.b : o.label_b));

    out << "a_dominates_b " << (r.a_dominates_b ? "true" : "false") << "\n";
    out << "b_dominates_a " << (r.b_dominates_a ? "true" : "false") << "\n";
    out << "points where a is not above b: " << r.a_not_above_b.size() << " of " << r.grid.size() << "\n";
    return kSuccess;
}

void add_truncation_flags(CLI::App* cmd, double& tol, std::string& rule) {
    cmd->add_option("--tol", tol, "truncation tolerance in (0, 1)")->capture_default_str();
    cmd->add_option("--rule", rule, "truncation bar: relative or absolute")->capture_default_str();
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, bool color) {
    CLI::App app{"Hybrid Poisson-Gaussian channel noise: truncation, sampling, EM fitting, capacity", "hqn"};
    app.set_config("--config", "", "TOML config file; command-line flags take precedence");
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions global;
    app.add_option("--threads", global.threads, "worker threads (results do not depend on it)")
        ->check(CLI::Range(1u, 256u))
        ->capture_default_str();
    app.add_option("--out", global.out, "output path");

    TruncateOptions tr;
    auto* truncate_cmd = app.add_subcommand("truncate", "select the Poisson terms kept in the mixture");
    truncate_cmd->add_option("--lambda", tr.lambda, "mean photon count")->required();
    add_truncation_flags(truncate_cmd, tr.tol, tr.rule);

    GenerateOptions gen;
    auto* generate_cmd = app.add_subcommand("generate", "sample a ground-truth dataset");
    generate_cmd->add_option("--lambda", gen.lambda)->capture_default_str();
    generate_cmd->add_option("--mu-z2", gen.mu_z2)->capture_default_str();
    generate_cmd->add_option("--sigma2-z2", gen.sigma2_z2)->capture_default_str();
    generate_cmd->add_option("--dim", gen.dim)->capture_default_str();
    generate_cmd->add_option("--n", gen.n, "number of samples")->required();
    generate_cmd->add_option("--seed", gen.seed, "random seed (mandatory)");
    add_truncation_flags(generate_cmd, gen.tol, gen.rule);

    FitOptions fo;
    auto* fit_cmd = app.add_subcommand("fit", "fit the mixture to a dataset with EM");
    fit_cmd->add_option("--data", fo.data, "dataset CSV")->required();
    fit_cmd->add_option("--init", fo.init, "initial mixture JSON (default: Poisson initialization)");
    fit_cmd->add_option("--lambda", fo.lambda)->capture_default_str();
    fit_cmd->add_option("--mu-z2", fo.mu_z2)->capture_default_str();
    fit_cmd->add_option("--sigma2-z2", fo.sigma2_z2)->capture_default_str();
    add_truncation_flags(fit_cmd, fo.tol, fo.rule);
    fit_cmd->add_option("--max-iters", fo.max_iters)->capture_default_str();
    fit_cmd->add_option("--ll-rel-tol", fo.ll_rel_tol)->capture_default_str();
    fit_cmd->add_option("--cov-floor", fo.cov_floor)->capture_default_str();
    fit_cmd->add_option("--snapshot-every", fo.snapshot_every, "write iter_NNNN.svg every N iterations (0 = off)")
        ->capture_default_str();
    fit_cmd->add_option("--snapshot-dir", fo.snapshot_dir)->capture_default_str();
    fit_cmd->add_option("--mixture-out", fo.mixture_out, "also write the fitted mixture JSON");

    CapacityCmdOptions co;
    auto* capacity_cmd = app.add_subcommand("capacity", "capacity-vs-SNR sweep");
    capacity_cmd->add_option("--lambda", co.lambda)->capture_default_str();
    capacity_cmd->add_option("--k", co.k, "keep the K most probable terms (default: truncate by --tol)");
    add_truncation_flags(capacity_cmd, co.tol, co.rule);
    capacity_cmd->add_option("--sigma2-z2", co.sigma2_z2)->capture_default_str();
    capacity_cmd->add_option("--snr-db", co.grid, "grid min:max:step in dB")->capture_default_str();
    capacity_cmd->add_flag("--renormalize", co.renormalize, "divide weights by their coverage");

    CompareOptions cmp;
    auto* compare_cmd = app.add_subcommand("compare", "compare two capacity curves");
    compare_cmd->add_option("a", cmp.a, "curve A (CSV)")->required();
    compare_cmd->add_option("b", cmp.b, "curve B (CSV)")->required();
    compare_cmd->add_option("--plot", cmp.plot, "overlay SVG path (default: --out with .svg)");
    compare_cmd->add_option("--label-a", cmp.label_a);
    compare_cmd->add_option("--label-b", cmp.label_b);
    compare_cmd->add_option("--note", cmp.notes, "free-text note recorded in the report")->take_all();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kSuccess;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kSuccess;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kUsageError;
    }

    try {
        if (truncate_cmd->parsed()) {
            return cmd_truncate(global, tr, out, color);
        }
        if (generate_cmd->parsed()) {
            return cmd_generate(global, gen, out);
        }
        if (fit_cmd->parsed()) {
            return cmd_fit(global, fo, out);
        }
        if (capacity_cmd->parsed()) {
            return cmd_capacity(global, co, out);
        }
        if (compare_cmd->parsed()) {
            return cmd_compare(global, cmp, out);
        }
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kUsageError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
    return kUsageError;
}

} // namespace hqn::cli
