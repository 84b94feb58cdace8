#pragma once

// Command-line front end. Exit codes: 0 success, 1 usage error, 2 data
// error, 3 soundness violations found (check-soundness only).

#include <cstdio>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "certens/ensemblers.hpp"
#include "certens/figure.hpp"
#include "certens/io.hpp"
#include "certens/metrics.hpp"
#include "certens/toy_lab.hpp"
#include "certens/weight_learner.hpp"

namespace certens::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kViolations = 3 };

namespace detail {

inline std::string percent(double fraction)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * fraction);
    return buf;
}

inline FallbackPolicy parse_fallback(const std::string& s)
{
    if (s == "plurality") return FallbackPolicy::plurality();
    if (s.rfind("random:", 0) == 0) {
        const std::string digits = s.substr(7);
        std::uint64_t seed = 0;
        const auto res = std::from_chars(digits.data(), digits.data() + digits.size(), seed);
        if (!digits.empty() && res.ec == std::errc{} && res.ptr == digits.data() + digits.size())
            return FallbackPolicy::seeded_random(seed);
    }
    throw CLI::ValidationError("--fallback", "expected 'plurality' or 'random:SEED', got '" + s + "'");
}

struct EnsembleFlags {
    std::string method;
    std::string weights_path;
    std::string fallback = "plurality";
    std::string prefix_bound = "literal";
};

inline void add_ensemble_flags(CLI::App* cmd, EnsembleFlags& f, bool method_required)
{
    auto* m = cmd->add_option("--method", f.method, "Ensembler")
                  ->check(CLI::IsMember({"cascade", "uniform", "weighted", "permutation"}));
    if (method_required) m->required();
    cmd->add_option("--weights", f.weights_path, "Weights JSON for --method weighted")->check(CLI::ExistingFile);
    cmd->add_option("--fallback", f.fallback, "Permutation cascade fallback: plurality | random:SEED")
        ->check([](const std::string& s) {
            try {
                parse_fallback(s);
            } catch (const CLI::ValidationError&) {
                return std::string("expected 'plurality' or 'random:SEED'");
            }
            return std::string();
        });
    cmd->add_option("--prefix-bound", f.prefix_bound, "Permutation cascade agreement bound")
        ->check(CLI::IsMember({"literal", "relaxed"}));
}

/// Builds the ensembler; weighted voting without a weights file learns
/// weights on `train` and warns that they are evaluated on the same data.
inline EnsemblerKind make_kind(const EnsembleFlags& f, const RecordSet& train, std::ostream& err)
{
    if (f.method == "cascade") return Cascade{};
    if (f.method == "uniform") return UniformVoting{};
    if (f.method == "permutation")
        return PermutationCascade{parse_fallback(f.fallback),
                                  f.prefix_bound == "relaxed" ? PrefixBound::Relaxed : PrefixBound::Literal};
    if (!f.weights_path.empty()) return WeightedVoting{load_weights(f.weights_path)};
    err << "warning: no --weights given; learning weights on the same records that are evaluated\n";
    return WeightedVoting{learn(train).trace.selected};
}

inline void print_table(std::ostream& out, const EvalReport& report)
{
    std::size_t width = 6;
    for (const auto& r : report.rows) width = std::max(width, r.system.size());
    out << std::left << std::setw(static_cast<int>(width)) << "System" << std::right << "  " << std::setw(8)
        << "CRA(%)" << "  " << std::setw(8) << "Acc(%)" << "  " << std::setw(8) << "k" << '\n';
    for (const auto& r : report.rows) {
        out << std::left << std::setw(static_cast<int>(width)) << r.system << std::right << "  " << std::setw(8)
            << percent(r.cra) << "  " << std::setw(8) << percent(r.acc) << "  " << std::setw(8) << r.support << '\n';
    }
    for (const auto& r : report.rows) {
        if (!r.weights) continue;
        out << r.system << " weights: [";
        for (std::size_t i = 0; i < r.weights->size(); ++i)
            out << (i ? ", " : "") << format_double((*r.weights)[i]);
        out << "]\n";
    }
}

inline void print_csv(std::ostream& out, const EvalReport& report)
{
    out << "system,cra_pct,acc_pct,k\n";
    for (const auto& r : report.rows)
        out << r.system << ',' << percent(r.cra) << ',' << percent(r.acc) << ',' << r.support << '\n';
}

} // namespace detail

/// Runs the command line; output goes to `out`, diagnostics to `err`.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Black-box certified ensembles: cascading, voting and permutation cascading"};
    app.name("certens");
    app.require_subcommand(1);

    // ensemble
    auto* ens = app.add_subcommand("ensemble", "Apply an ensembler to a record file");
    std::string ens_in, ens_out;
    detail::EnsembleFlags ens_flags;
    ens->add_option("--in", ens_in, "Records (JSON lines)")->required()->check(CLI::ExistingFile);
    ens->add_option("--out", ens_out, "Predictions (JSON lines)")->required();
    detail::add_ensemble_flags(ens, ens_flags, true);

    // learn-weights
    auto* lw = app.add_subcommand("learn-weights", "Learn weighted-voting weights");
    std::string lw_in, lw_out, lw_trace, lw_param = "softmax", lw_opt = "adam";
    LearnerConfig cfg;
    lw->add_option("--in", lw_in, "Records (JSON lines)")->required()->check(CLI::ExistingFile);
    lw->add_option("--out", lw_out, "Weights JSON")->required();
    lw->add_option("--trace", lw_trace, "Per-epoch objective CSV");
    lw->add_option("--t", cfg.temperature, "Temperature on negative margins")->check(CLI::PositiveNumber);
    lw->add_option("--lr", cfg.learning_rate, "Learning rate")->check(CLI::PositiveNumber);
    lw->add_option("--epochs", cfg.epochs, "Maximum epochs")->check(CLI::Range(std::size_t{1}, std::size_t{10'000'000}));
    lw->add_option("--param", lw_param, "Simplex handling")->check(CLI::IsMember({"softmax", "projected"}));
    lw->add_option("--optimizer", lw_opt, "Step rule")->check(CLI::IsMember({"adam", "plain"}));
    lw->add_option("--seed", cfg.seed, "Seed for --init-jitter");
    lw->add_option("--init-jitter", cfg.init_jitter, "Std-dev of random initial perturbation")->check(CLI::NonNegativeNumber);
    lw->add_option("--tol", cfg.convergence_tol, "Early-stop tolerance")->check(CLI::NonNegativeNumber);
    lw->add_option("--patience", cfg.patience, "Early-stop window in epochs");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "CRA / accuracy table for every system");
    std::string ev_in, ev_weights, ev_single = "best", ev_format = "table";
    ev->add_option("--in", ev_in, "Records (JSON lines)")->required()->check(CLI::ExistingFile);
    ev->add_option("--weights", ev_weights, "Weights JSON for the weighted-voting row")->check(CLI::ExistingFile);
    ev->add_option("--single-model", ev_single, "Single Model row")->check(CLI::IsMember({"best", "first"}));
    ev->add_option("--format", ev_format, "Output format")->check(CLI::IsMember({"table", "csv"}));

    // gen-toy
    auto* gt = app.add_subcommand("gen-toy", "Generate a 2D toy grid");
    std::string gt_scenario, gt_out, gt_records, gt_norm = "l2";
    std::uint64_t gt_seed = 0;
    double gt_h = 0.01, gt_eps = 0.08;
    gt->set_help_flag("--help", "Print this help message and exit"); // frees the name "h" for the grid step
    gt->add_option("--scenario", gt_scenario, "Scenario")
        ->required()
        ->check(CLI::IsMember({"fig1", "agree", "thm1-minimal", "random"}));
    gt->add_option("--seed", gt_seed, "Seed (random scenario)");
    gt->add_option("--h", gt_h, "Grid step")->check(CLI::PositiveNumber);
    gt->add_option("--epsilon", gt_eps, "Certification radius")->check(CLI::PositiveNumber);
    gt->add_option("--norm", gt_norm, "Norm")->check(CLI::IsMember({"l2", "linf"}));
    gt->add_option("--out", gt_out, "Grid CSV")->required();
    gt->add_option("--records", gt_records, "Also write the grid as records (JSON lines)");

    // check-soundness
    auto* cs = app.add_subcommand("check-soundness", "Search a grid for soundness violations");
    std::string cs_grid, cs_report, cs_norm = "l2";
    double cs_eps = 0.0;
    detail::EnsembleFlags cs_flags;
    cs->add_option("--grid", cs_grid, "Grid CSV")->required()->check(CLI::ExistingFile);
    cs->add_option("--epsilon", cs_eps, "Radius")->required()->check(CLI::PositiveNumber);
    cs->add_option("--norm", cs_norm, "Norm")->check(CLI::IsMember({"l2", "linf"}));
    cs->add_option("--report", cs_report, "Violations CSV");
    detail::add_ensemble_flags(cs, cs_flags, true);

    // export-figure
    auto* ef = app.add_subcommand("export-figure", "Render constituents, cascade and uniform voting as SVG");
    std::string ef_grid, ef_out, ef_csv;
    ef->add_option("--grid", ef_grid, "Grid CSV")->required()->check(CLI::ExistingFile);
    ef->add_option("--out", ef_out, "SVG path")->required();
    ef->add_option("--csv", ef_csv, "Also write every panel's answers as CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kUsage;
    }

    try {
        if (*ens) {
            const RecordSet rs = load_records(ens_in);
            const EnsemblerKind kind = detail::make_kind(ens_flags, rs, err);
            const auto preds = certens::apply(kind, rs);
            auto f = certens::detail::open_out(ens_out);
            write_predictions(f, rs, preds);
        } else if (*lw) {
            const RecordSet rs = load_records(lw_in);
            cfg.parameterization =
                lw_param == "projected" ? Parameterization::ProjectedAscent : Parameterization::SoftmaxReparam;
            cfg.optimizer = lw_opt == "plain" ? Optimizer::Plain : Optimizer::Adam;
            const LearnResult result = learn(rs, cfg);
            {
                auto f = certens::detail::open_out(lw_out);
                write_weights(f, result.trace.selected, &result.trace);
            }
            if (!lw_trace.empty()) {
                auto f = certens::detail::open_out(lw_trace);
                write_trace_csv(f, result.trace);
            }
            out << "learned exact objective " << detail::percent(result.trace.learned_exact) << "%, selected "
                << detail::percent(result.trace.selected_exact) << "% ("
                << (result.trace.selected_one_hot < 0 ? std::string("learned weights")
                                                      : "one-hot " + std::to_string(result.trace.selected_one_hot))
                << ")\n";
        } else if (*ev) {
            const RecordSet rs = load_records(ev_in);
            std::optional<WeightVector> w;
            if (!ev_weights.empty())
                w = load_weights(ev_weights);
            else
                err << "warning: no --weights given; weighted voting uses weights learned on the evaluated records\n";
            const auto report =
                evaluate_all(rs, w, ev_single == "first" ? SingleModelRule::First : SingleModelRule::Best);
            if (ev_format == "csv")
                detail::print_csv(out, report);
            else
                detail::print_table(out, report);
        } else if (*gt) {
            const Norm norm = *parse_norm(gt_norm);
            const ToyScenario scenario = gen_toy(gt_scenario, gt_seed, norm);
            GridSpec spec;
            spec.h = gt_h;
            const ToyGrid grid = build_grid(scenario, spec, gt_eps);
            save_grid_csv(gt_out, grid);
            if (!gt_records.empty()) save_records(gt_records, to_records(grid));
            out << "wrote " << grid.size() << " points (" << grid.nx << "x" << grid.ny << "), "
                << grid.constituents << " constituents\n";
        } else if (*cs) {
            ToyGrid grid = load_grid_csv(cs_grid);
            grid.epsilon = cs_eps;
            grid.norm = *parse_norm(cs_norm);
            const EnsemblerKind kind = detail::make_kind(cs_flags, to_records(grid), err);
            const auto violations = find_violations(grid, kind, cs_eps, grid.norm);
            if (!cs_report.empty()) {
                auto f = certens::detail::open_out(cs_report);
                write_violations_csv(f, violations);
            }
            out << ensembler_name(kind) << ": " << violations.size() << " violation(s) on " << grid.size()
                << " grid points\n";
            return violations.empty() ? kOk : kViolations;
        } else if (*ef) {
            const ToyGrid grid = load_grid_csv(ef_grid);
            const auto panels = standard_panels(grid);
            export_figure(grid, panels, ef_csv, ef_out);
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kData;
    }
    return kOk;
}

} // namespace certens::cli
