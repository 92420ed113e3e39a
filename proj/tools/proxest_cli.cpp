// Command-line front end: experiment dispatch, dataset ingestion, CSV/JSON
// result emission. Flags override an optional key-value config file
// (--config), which overrides defaults.

#include <cstdint>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "proxest/edgelist.hpp"
#include "proxest/experiments.hpp"
#include "proxest/reports.hpp"

namespace {

using namespace proxest;

struct CommonOpts {
    std::uint64_t seed = 12345;
    std::string out = "report.json";
    std::string format = "json";
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--seed", opts.seed, "Base RNG seed")->capture_default_str();
    cmd->add_option("--out", opts.out, "Output file path")->capture_default_str();
    cmd->add_option("--format", opts.format, "Output format: csv or json")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
}

int fail(const std::string& category, const std::string& message) {
    std::cerr << "error: " << category << ": " << message << "\n";
    return category == "usage" ? 2 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Scaled proximal one-step estimation toolkit"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Key-value config file (flags take precedence)");

    // prox-check
    CommonOpts prox_opts;
    int prox_trials = 1000;
    auto* prox_cmd = app.add_subcommand("prox-check",
                                        "Scaled-prox nonexpansiveness diagnostics over random "
                                        "convex instances");
    add_common(prox_cmd, prox_opts);
    prox_cmd->add_option("--trials", prox_trials, "Number of random instances")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    // mc-equivalence
    CommonOpts mc_opts;
    std::vector<long> mc_sizes = {200, 800, 3200, 12800};
    int mc_replicates = 500;
    std::string mc_mode = "prox_gradient_map";
    double mc_theta0 = 0.0, mc_sigma0 = 20.0, mc_gamma = 1000.0;
    auto* mc_cmd = app.add_subcommand("mc-equivalence",
                                      "Monte Carlo equivalence diagnostics for Cauchy one-step "
                                      "estimators");
    add_common(mc_cmd, mc_opts);
    mc_cmd->add_option("--sample-sizes", mc_sizes, "Sample sizes (increasing)")
        ->delimiter(',')
        ->capture_default_str();
    mc_cmd->add_option("--replicates", mc_replicates, "Replicates per sample size")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    mc_cmd->add_option("--mode", mc_mode, "prox_gradient_map or prox_descent")
        ->check(CLI::IsMember({"prox_gradient_map", "prox_descent"}))
        ->capture_default_str();
    mc_cmd->add_option("--theta0", mc_theta0, "True location")->capture_default_str();
    mc_cmd->add_option("--sigma0", mc_sigma0, "Known Cauchy scale")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    mc_cmd->add_option("--gamma", mc_gamma, "Laplace prior scale (prox_gradient_map mode)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    // counterexample
    CommonOpts cx_opts;
    double cx_sigma1 = 10.0, cx_sigma2 = 1.0;
    long cx_n = 10000;
    int cx_replicates = 10000;
    std::string cx_mode = "fixed_step";
    auto* cx_cmd = app.add_subcommand("counterexample",
                                      "Gradient-descent one-step counterexample on the bivariate "
                                      "normal mean");
    add_common(cx_cmd, cx_opts);
    cx_cmd->add_option("--sigma1", cx_sigma1, "Larger standard deviation")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cx_cmd->add_option("--sigma2", cx_sigma2, "Smaller standard deviation")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cx_cmd->add_option("--n", cx_n, "Sample size per replicate")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cx_cmd->add_option("--replicates", cx_replicates, "Monte Carlo replicates")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cx_cmd->add_option("--mode", cx_mode, "fixed_step, exact_step, or scaled_newton")
        ->check(CLI::IsMember({"fixed_step", "exact_step", "scaled_newton"}))
        ->capture_default_str();

    // lowrank
    CommonOpts lr_opts;
    std::string lr_dataset;
    std::vector<double> lr_lambdas = {1.0};
    double lr_stopping_c = 1.0;
    int lr_segments = 49, lr_max_iter = 500;
    int lr_synth_nodes = 50, lr_synth_rank = 3;
    bool lr_synthetic = false;
    auto* lr_cmd = app.add_subcommand("lowrank",
                                      "Nuclear-norm penalized logistic fit via proximal Newton");
    add_common(lr_cmd, lr_opts);
    lr_cmd->add_option("--dataset", lr_dataset, "Edge-list file (src dst timestamp per line)");
    lr_cmd->add_flag("--synthetic", lr_synthetic, "Use a synthetic low-rank instance instead");
    lr_cmd->add_option("--nodes", lr_synth_nodes, "Synthetic instance size N")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    lr_cmd->add_option("--rank", lr_synth_rank, "Synthetic ground-truth rank")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    lr_cmd->add_option("--lambda", lr_lambdas, "Penalty value (repeatable for a sweep)")
        ->capture_default_str();
    lr_cmd->add_option("--stopping-c", lr_stopping_c, "Constant c in the c/sqrt(n) rule")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    lr_cmd->add_option("--segments", lr_segments, "Time segments for binning")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    lr_cmd->add_option("--max-iter", lr_max_iter, "Proximal Newton iteration cap")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    // stop-cond-audit
    CommonOpts sc_opts;
    int sc_instances = 100;
    auto* sc_cmd = app.add_subcommand("stop-cond-audit",
                                      "Step-length-to-distance inequality audit on random "
                                      "strongly convex instances");
    add_common(sc_cmd, sc_opts);
    sc_cmd->add_option("--instances", sc_instances, "Number of random instances")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (prox_cmd->parsed()) {
            ProxCheckReport report = prox_nonexpansiveness_check(prox_trials, prox_opts.seed);
            emit_report(report, prox_opts.out, parse_format(prox_opts.format));
            std::cout << "prox-check: " << report.violations << "/" << report.trials
                      << " violations -> " << prox_opts.out << "\n";
            return report.violations == 0 ? 0 : 1;
        }
        if (mc_cmd->parsed()) {
            CauchyModel model(mc_theta0, mc_sigma0,
                              mc_mode == "prox_gradient_map"
                                  ? std::optional<double>(mc_gamma)
                                  : std::nullopt);
            OseKind kind = mc_mode == "prox_gradient_map" ? OseKind::ProxGradientMap
                                                          : OseKind::ProxDescent;
            McReport report =
                mc_equivalence_cauchy(model, mc_sizes, mc_replicates, kind, mc_opts.seed);
            emit_report(report, mc_opts.out, parse_format(mc_opts.format));
            for (const auto& s : report.summaries)
                std::cout << "n=" << s.n << " median sqrt(n)|ose-hat|=" << s.median_ose
                          << " median sqrt(n)|init-hat|=" << s.median_init
                          << " failures=" << s.failures << "\n";
            return 0;
        }
        if (cx_cmd->parsed()) {
            CounterexampleMode mode = cx_mode == "fixed_step" ? CounterexampleMode::FixedStep
                                      : cx_mode == "exact_step" ? CounterexampleMode::ExactStep
                                                                : CounterexampleMode::ScaledNewton;
            CounterexampleReport report = counterexample_monte_carlo(
                cx_sigma1, cx_sigma2, cx_n, cx_replicates, mode, cx_opts.seed);
            emit_report(report, cx_opts.out, parse_format(cx_opts.format));
            std::cout << "counterexample (" << cx_mode << "): empirical=" << report.empirical_prob
                      << " reference=" << report.closed_form_prob
                      << " se=" << report.std_error << "\n";
            return 0;
        }
        if (lr_cmd->parsed()) {
            if (!lr_synthetic && lr_dataset.empty())
                return fail("usage", "lowrank requires --dataset or --synthetic");
            LogisticMatrixModel model = [&] {
                if (lr_synthetic)
                    return make_synthetic_lowrank(lr_synth_nodes, lr_synth_rank, lr_segments,
                                                  lr_opts.seed)
                        .model;
                EdgeListDataset ds = parse_edge_list(lr_dataset, lr_segments);
                return build_frequency_matrix(ds);
            }();
            std::vector<LowRankReport> reports =
                lambda_sweep(model, lr_lambdas, lr_stopping_c, lr_max_iter);
            emit_report(reports, lr_opts.out, parse_format(lr_opts.format));
            for (const auto& r : reports)
                std::cout << "lambda=" << r.lambda << " rank=" << r.final_rank
                          << " iterations=" << r.iterations << " ok=" << r.ok << "\n";
            return 0;
        }
        if (sc_cmd->parsed()) {
            std::vector<StopCondReport> reports = stop_cond_audit(sc_instances, sc_opts.seed);
            int violations = 0;
            for (const auto& r : reports)
                if (!r.holds) ++violations;
            emit_report(reports, sc_opts.out, parse_format(sc_opts.format));
            std::cout << "stop-cond-audit: " << violations << "/" << reports.size()
                      << " violations -> " << sc_opts.out << "\n";
            return violations == 0 ? 0 : 1;
        }
    } catch (const ParseError& e) {
        return fail("parse", e.what());
    } catch (const IoError& e) {
        return fail("io", e.what());
    } catch (const ContractViolation& e) {
        return fail("usage", e.what());
    } catch (const std::exception& e) {
        return fail("solver", e.what());
    }
    return fail("usage", "no subcommand given");
}
