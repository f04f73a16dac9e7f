// Command-line front end: solve, simulate, sweep, verify.
//
// Exit codes: 0 success, 2 invalid parameters, 3 convergence failure,
// 4 verification failure. Set KYLE_EQ_LOG=1 (or higher) for progress notes
// on stderr.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kyleq/kyleq.hpp"

namespace {

using nlohmann::json;

struct Options {
    int n = 5;
    std::vector<int> n_list;
    double sigma_a = 3.0;
    double sigma_v = 1.0;
    double sigma_w = 0.0;  // resolved after the rule is applied
    std::string sigma_w_rule;
    double rho = 1.0 / 3.0;
    std::uint64_t seed = 0;
    long long paths = 100000;
    bool antithetic = false;
    double tol_shoot = 1e-10;
    int perturbations = 100;
    std::string config_path;
    std::string output_dir = ".";
    std::string format = "csv";
    std::string solution_file;
};

struct Command {
    CLI::App* app = nullptr;
    Options opts;
};

void add_common_flags(Command& cmd, bool with_n, bool with_list) {
    CLI::App* app = cmd.app;
    Options& o = cmd.opts;
    if (with_n) app->add_option("--n", o.n, "number of trading dates");
    if (with_list)
        app->add_option("--n-list", o.n_list, "comma-separated list of date counts")
            ->delimiter(',');
    app->add_option("--sigma-a", o.sigma_a, "target standard deviation");
    app->add_option("--sigma-v", o.sigma_v, "asset value standard deviation");
    app->add_option("--sigma-w", o.sigma_w, "noise-trade standard deviation per date");
    app->add_option("--sigma-w-rule", o.sigma_w_rule,
                    "rule for sigma-w as a function of N (inv-sqrt-n)");
    app->add_option("--rho", o.rho, "correlation between target and value");
    app->add_option("--seed", o.seed, "RNG seed");
    app->add_option("--paths", o.paths, "Monte Carlo path count");
    app->add_flag("--antithetic", o.antithetic, "use antithetic path pairs");
    app->add_option("--tol-shoot", o.tol_shoot, "boundary-matching tolerance");
    app->add_option("--perturbations", o.perturbations,
                    "random strategy deviations to test");
    app->add_option("--config", o.config_path, "JSON config file (flags win)");
    app->add_option("--output", o.output_dir, "output directory");
    app->add_option("--format", o.format, "table artifact format: csv or json");
}

// Config-file merge: a key applies only when the matching flag was not given
// on the command line. Unknown keys are rejected so typos surface as errors.
void merge_config(Command& cmd) {
    Options& o = cmd.opts;
    if (o.config_path.empty()) return;
    std::ifstream in(o.config_path);
    if (!in) throw kyleq::invalid_parameter_error("cannot open config file: " + o.config_path);
    json cfg;
    try {
        in >> cfg;
    } catch (const json::exception& e) {
        throw kyleq::invalid_parameter_error(std::string("config file is not valid JSON: ") +
                                             e.what());
    }
    if (!cfg.is_object())
        throw kyleq::invalid_parameter_error("config file must hold a JSON object");

    const auto given = [&](const std::string& flag) {
        return cmd.app->count(flag) > 0;
    };
    for (const auto& [key, value] : cfg.items()) {
        try {
            if (key == "n") {
                if (!given("--n")) o.n = value.get<int>();
            } else if (key == "n_list") {
                if (!given("--n-list")) o.n_list = value.get<std::vector<int>>();
            } else if (key == "sigma_a") {
                if (!given("--sigma-a")) o.sigma_a = value.get<double>();
            } else if (key == "sigma_v") {
                if (!given("--sigma-v")) o.sigma_v = value.get<double>();
            } else if (key == "sigma_w") {
                if (!given("--sigma-w")) {
                    o.sigma_w = value.get<double>();
                    // counts as an explicit sigma-w for exclusivity purposes
                    cmd.app->get_option("--sigma-w")->add_result(kyleq::fmt17(o.sigma_w));
                }
            } else if (key == "sigma_w_rule") {
                if (!given("--sigma-w-rule")) {
                    o.sigma_w_rule = value.get<std::string>();
                    cmd.app->get_option("--sigma-w-rule")->add_result(o.sigma_w_rule);
                }
            } else if (key == "rho") {
                if (!given("--rho")) o.rho = value.get<double>();
            } else if (key == "seed") {
                if (!given("--seed")) o.seed = value.get<std::uint64_t>();
            } else if (key == "paths") {
                if (!given("--paths")) o.paths = value.get<long long>();
            } else if (key == "antithetic") {
                if (!given("--antithetic")) o.antithetic = value.get<bool>();
            } else if (key == "tol_shoot") {
                if (!given("--tol-shoot")) o.tol_shoot = value.get<double>();
            } else if (key == "perturbations") {
                if (!given("--perturbations")) o.perturbations = value.get<int>();
            } else if (key == "output") {
                if (!given("--output")) o.output_dir = value.get<std::string>();
            } else if (key == "format") {
                if (!given("--format")) o.format = value.get<std::string>();
            } else {
                throw kyleq::invalid_parameter_error("unknown config key: " + key);
            }
        } catch (const json::exception& e) {
            throw kyleq::invalid_parameter_error("config key '" + key +
                                                 "' has the wrong type: " + e.what());
        }
    }
}

// Resolves the per-date noise scale. --sigma-w and --sigma-w-rule are
// mutually exclusive; with neither, the inv-sqrt-n rule applies (the default
// parameterization keeps total noise variance at one across horizons).
struct NoiseSpec {
    std::optional<double> fixed;
    std::string rule;  // empty when fixed

    double for_horizon(int n) const {
        if (fixed) return *fixed;
        return 1.0 / std::sqrt(static_cast<double>(n));
    }
};

NoiseSpec resolve_noise(const Command& cmd) {
    const Options& o = cmd.opts;
    const bool has_w = cmd.app->count("--sigma-w") > 0;
    const bool has_rule = cmd.app->count("--sigma-w-rule") > 0;
    if (has_w && has_rule)
        throw kyleq::invalid_parameter_error(
            "--sigma-w and --sigma-w-rule are mutually exclusive");
    if (has_w) return NoiseSpec{o.sigma_w, ""};
    const std::string rule = has_rule ? o.sigma_w_rule : "inv-sqrt-n";
    if (rule != "inv-sqrt-n")
        throw kyleq::invalid_parameter_error("unknown sigma-w rule: " + rule);
    return NoiseSpec{std::nullopt, rule};
}

void check_format(const Options& o) {
    if (o.format != "csv" && o.format != "json")
        throw kyleq::invalid_parameter_error("--format must be csv or json, got: " +
                                             o.format);
}

kyleq::ModelParams make_params(const Options& o, const NoiseSpec& noise, int n) {
    kyleq::ModelParams p;
    p.n = n;
    p.sigma_a = o.sigma_a;
    p.sigma_v = o.sigma_v;
    p.sigma_w = noise.for_horizon(n);
    p.rho = o.rho;
    return p;
}

json common_config(const std::string& command, const Options& o,
                   const NoiseSpec& noise) {
    json cfg = {{"command", command}, {"sigma_a", o.sigma_a}, {"sigma_v", o.sigma_v},
                {"rho", o.rho},       {"tol_shoot", o.tol_shoot},
                {"format", o.format}, {"output", o.output_dir}};
    if (noise.fixed) {
        cfg["sigma_w"] = *noise.fixed;
        cfg["sigma_w_rule"] = nullptr;
    } else {
        cfg["sigma_w"] = nullptr;
        cfg["sigma_w_rule"] = noise.rule;
    }
    return cfg;
}

std::filesystem::path artifact_path(const Options& o, const std::string& name) {
    std::filesystem::create_directories(o.output_dir);
    return std::filesystem::path(o.output_dir) / name;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw kyleq::invalid_parameter_error("cannot write " + path.string());
    out << text;
}

void write_json(const std::filesystem::path& path, const json& j) {
    write_text(path, j.dump(2) + "\n");
}

kyleq::Tolerances make_tol(const Options& o) {
    kyleq::Tolerances tol;
    tol.tol_shoot = o.tol_shoot;
    return tol;
}

int cmd_solve(Command& cmd) {
    const Options& o = cmd.opts;
    const NoiseSpec noise = resolve_noise(cmd);
    check_format(o);
    const kyleq::ModelParams params = make_params(o, noise, o.n);
    const kyleq::EquilibriumSolution sol = kyleq::solve(params, make_tol(o));

    json cfg = common_config("solve", o, noise);
    cfg["n"] = o.n;
    cfg["sigma_w_effective"] = params.sigma_w;

    write_json(artifact_path(o, "solution.json"), json{{"config", cfg}, {"solution", sol}});
    if (o.format == "csv") {
        std::ostringstream os;
        kyleq::write_solution_csv(os, sol, cfg.dump());
        write_text(artifact_path(o, "stages.csv"), os.str());
    } else {
        write_json(artifact_path(o, "stages.json"),
                   json{{"config", cfg}, {"stages", kyleq::solution_table_json(sol)}});
    }

    std::printf("solved n=%d: a_hat=%s b_hat=%s\n", o.n, kyleq::fmt17(sol.a_hat).c_str(),
                kyleq::fmt17(sol.b_hat).c_str());
    std::printf("boundary residuals: phi=%s psi=%s\n",
                kyleq::fmt17(sol.residual_phi).c_str(),
                kyleq::fmt17(sol.residual_psi).c_str());
    for (const std::string& w : sol.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    return 0;
}

int cmd_simulate(Command& cmd) {
    const Options& o = cmd.opts;
    const NoiseSpec noise = resolve_noise(cmd);
    check_format(o);
    const kyleq::ModelParams params = make_params(o, noise, o.n);

    kyleq::SimConfig sim;
    sim.paths = o.paths;
    sim.seed = o.seed;
    sim.antithetic = o.antithetic;
    sim = kyleq::validate(sim);  // reject bad path counts before the solve

    const kyleq::EquilibriumSolution sol = kyleq::solve(params, make_tol(o));

    json cfg = common_config("simulate", o, noise);
    cfg["n"] = o.n;
    cfg["sigma_w_effective"] = params.sigma_w;
    cfg["seed"] = o.seed;
    cfg["paths"] = o.paths;
    cfg["antithetic"] = o.antithetic;

    const kyleq::MomentEstimate est = kyleq::estimate_moments(sol, sim);
    if (o.format == "csv") {
        std::ostringstream os;
        kyleq::write_estimates_csv(os, est, sol.n_dates(), cfg.dump());
        write_text(artifact_path(o, "estimates.csv"), os.str());
    } else {
        write_json(artifact_path(o, "estimates.json"),
                   json{{"config", cfg}, {"estimates", est}});
    }

    const kyleq::SimReport rep = kyleq::verify_statistics(sol, sim);
    write_json(artifact_path(o, "sim_report.json"), json{{"config", cfg}, {"report", rep}});

    for (const kyleq::StatCheck& c : rep.checks) {
        std::printf("%-4s %-36s stat=%s limit=%s%s%s\n", c.pass ? "ok" : "FAIL",
                    c.name.c_str(), kyleq::fmt17(c.stat).c_str(),
                    kyleq::fmt17(c.limit).c_str(), c.note.empty() ? "" : "  ",
                    c.note.c_str());
    }
    std::printf("simulate n=%d paths=%lld seed=%llu: %s\n", o.n, o.paths,
                static_cast<unsigned long long>(o.seed),
                rep.all_pass ? "all checks passed" : "CHECKS FAILED");
    return rep.all_pass ? 0 : 4;
}

int cmd_sweep(Command& cmd) {
    const Options& o = cmd.opts;
    const NoiseSpec noise = resolve_noise(cmd);
    check_format(o);
    if (o.n_list.empty())
        throw kyleq::invalid_parameter_error("sweep needs --n-list with at least one N");

    // Independent pure solves; run them concurrently.
    std::vector<std::future<kyleq::EquilibriumSolution>> jobs;
    jobs.reserve(o.n_list.size());
    for (int n : o.n_list)
        jobs.push_back(std::async(std::launch::async, [&, n] {
            return kyleq::solve(make_params(o, noise, n), make_tol(o));
        }));
    std::vector<kyleq::EquilibriumSolution> sols;
    sols.reserve(jobs.size());
    for (auto& job : jobs) sols.push_back(job.get());

    json cfg = common_config("sweep", o, noise);
    cfg["n_list"] = o.n_list;

    if (o.format == "csv") {
        std::ostringstream lam, rr;
        kyleq::write_sweep_csv(lam, sols, true, cfg.dump());
        kyleq::write_sweep_csv(rr, sols, false, cfg.dump());
        write_text(artifact_path(o, "lambda.csv"), lam.str());
        write_text(artifact_path(o, "r.csv"), rr.str());
    } else {
        const auto rows = [&](bool lambda_column) {
            json arr = json::array();
            for (const auto& sol : sols) {
                const int N = sol.n_dates();
                for (int n = 1; n <= N; ++n)
                    arr.push_back({{"N", N},
                                   {"n", n},
                                   {"t", static_cast<double>(n) / N},
                                   {"value", lambda_column ? sol.stage(n).lambda
                                                           : sol.stage(n).r}});
            }
            return arr;
        };
        write_json(artifact_path(o, "lambda.json"), json{{"config", cfg}, {"rows", rows(true)}});
        write_json(artifact_path(o, "r.json"), json{{"config", cfg}, {"rows", rows(false)}});
    }

    for (const auto& sol : sols)
        std::printf("solved n=%d: a_hat=%s residual_phi=%s\n", sol.n_dates(),
                    kyleq::fmt17(sol.a_hat).c_str(), kyleq::fmt17(sol.residual_phi).c_str());
    return 0;
}

// Scaling probe triples for cmd_verify, seeded off the main RNG.
//
// The scale factor is a power of two on purpose. Scaling by 2^k shifts
// exponents without touching mantissas, so IEEE arithmetic reproduces the
// two backward runs bit for bit and the identity must hold exactly; any
// formula that mixes homogeneity degrees still breaks it loudly. A factor
// with a fractional mantissa would instead inject one ulp of noise that the
// backward recursion amplifies roughly geometrically per stage, which at
// long horizons swamps any fixed tolerance without indicating a bug.
struct ScalingProbe {
    double worst = 0;
    int count = 0;
};

ScalingProbe run_scaling_probes(const kyleq::ModelParams& params, std::uint64_t seed,
                                kyleq::Tolerances tol) {
    ScalingProbe probe;
    probe.count = 20;
    const double a_ref = params.sigma_a * params.sigma_a * 0.5;
    const double b_ref = params.rho * params.sigma_a * params.sigma_v;
    for (int i = 0; i < probe.count; ++i) {
        const auto u = [&](std::uint64_t slot) {
            return kyleq::uniform01(seed ^ 0x7363616cULL, static_cast<std::uint64_t>(i), slot);
        };
        const double a = a_ref * std::pow(10.0, 2.0 * u(0) - 1.0);
        const double b = b_ref * std::pow(10.0, 2.0 * u(1) - 1.0);
        int k = 1 + static_cast<int>(u(2) * 40.0) - 20;  // -19..20
        if (k == 0) k = 20;
        const double c = std::ldexp(1.0, k);
        const kyleq::ScalingResidual sr = kyleq::scaling_residual(a, b, c, params, tol);
        probe.worst = std::max({probe.worst, sr.phi_rel, sr.psi_rel});
    }
    return probe;
}

int cmd_verify(Command& cmd) {
    const Options& o = cmd.opts;
    const NoiseSpec noise = resolve_noise(cmd);
    check_format(o);

    json cfg = common_config("verify", o, noise);
    cfg["n"] = o.n;
    cfg["seed"] = o.seed;
    cfg["perturbations"] = o.perturbations;

    kyleq::IdentityReport report;
    std::optional<kyleq::EquilibriumSolution> sol;

    if (!o.solution_file.empty()) {
        cfg["solution"] = o.solution_file;
        // A broken file is a verification failure (named check), not a usage
        // error: this is the fuzz entry point.
        try {
            std::ifstream in(o.solution_file);
            if (!in)
                throw kyleq::invalid_parameter_error("cannot open " + o.solution_file);
            json j;
            in >> j;
            if (j.contains("solution"))
                sol = j.at("solution").get<kyleq::EquilibriumSolution>();
            else
                sol = j.get<kyleq::EquilibriumSolution>();
            report.add("solution-file-valid", 0.0, 0.0, true);
        } catch (const std::exception& e) {
            report.add("solution-file-valid", 1.0, 0.0, false);
            std::fprintf(stderr, "solution file rejected: %s\n", e.what());
        }
    } else {
        sol = kyleq::solve(make_params(o, noise, o.n), make_tol(o));
    }

    if (sol) {
        const kyleq::IdentityReport identities = kyleq::verify_identities(*sol);
        for (const kyleq::IdentityCheck& c : identities.checks)
            report.add(c.name, c.worst, c.tol);

        const ScalingProbe probe = run_scaling_probes(sol->params, o.seed, make_tol(o));
        report.add("scaling-invariance", probe.worst, 0.0);

        const kyleq::BestResponseReport br =
            kyleq::best_response_check(*sol, o.perturbations, 0.1, o.seed);
        report.add("best-response-gap",
                   br.worst_gap < 0 ? -br.worst_gap : 0.0, br.tol_opt);
        report.add("coordinate-convexity",
                   br.min_second_diff < 0 ? -br.min_second_diff : 0.0, br.tol_opt);
        std::printf("deviations: %d/%d weakly costlier than equilibrium\n",
                    br.perturbations - br.violations, br.perturbations);
    }

    write_json(artifact_path(o, "verify_report.json"),
               json{{"config", cfg}, {"report", report}});

    for (const kyleq::IdentityCheck& c : report.checks)
        std::printf("%-4s %-32s worst=%s tol=%s\n", c.pass ? "ok" : "FAIL",
                    c.name.c_str(), kyleq::fmt17(c.worst).c_str(),
                    kyleq::fmt17(c.tol).c_str());
    std::printf("verify: %s (worst residual %s)\n",
                report.all_pass ? "all checks passed" : "CHECKS FAILED",
                kyleq::fmt17(report.worst_residual).c_str());
    return report.all_pass ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"constrained-trader equilibrium toolkit"};
    app.require_subcommand(1);

    Command solve_cmd, sim_cmd, sweep_cmd, verify_cmd;
    solve_cmd.app = app.add_subcommand("solve", "solve for the equilibrium coefficients");
    sim_cmd.app = app.add_subcommand("simulate", "Monte Carlo moments and invariant checks");
    sweep_cmd.app = app.add_subcommand("sweep", "solve across horizons for comparison plots");
    verify_cmd.app = app.add_subcommand("verify", "run the identity and optimality suite");

    add_common_flags(solve_cmd, true, false);
    add_common_flags(sim_cmd, true, false);
    add_common_flags(sweep_cmd, false, true);
    add_common_flags(verify_cmd, true, false);
    verify_cmd.app->add_option("--solution", verify_cmd.opts.solution_file,
                               "verify an existing solution JSON instead of solving");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (solve_cmd.app->parsed()) {
            merge_config(solve_cmd);
            return cmd_solve(solve_cmd);
        }
        if (sim_cmd.app->parsed()) {
            merge_config(sim_cmd);
            return cmd_simulate(sim_cmd);
        }
        if (sweep_cmd.app->parsed()) {
            merge_config(sweep_cmd);
            return cmd_sweep(sweep_cmd);
        }
        merge_config(verify_cmd);
        return cmd_verify(verify_cmd);
    } catch (const kyleq::invalid_parameter_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const kyleq::dimension_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const kyleq::error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "unexpected error: %s\n", e.what());
        return 3;
    }
}
