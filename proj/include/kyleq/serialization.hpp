#pragma once

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kyleq/equilibrium.hpp"
#include "kyleq/model.hpp"
#include "kyleq/simulator.hpp"

// JSON converters (lower-snake-case field names throughout) and the CSV
// emitters behind the CLI artifacts. All doubles are printed with 17
// significant digits so a written file round-trips bit-exactly.

namespace kyleq {

inline std::string fmt17(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline void to_json(nlohmann::json& j, const ModelParams& p) {
    j = {{"n", p.n},
         {"sigma_a", p.sigma_a},
         {"sigma_v", p.sigma_v},
         {"sigma_w", p.sigma_w},
         {"rho", p.rho}};
}

inline void from_json(const nlohmann::json& j, ModelParams& p) {
    j.at("n").get_to(p.n);
    j.at("sigma_a").get_to(p.sigma_a);
    j.at("sigma_v").get_to(p.sigma_v);
    j.at("sigma_w").get_to(p.sigma_w);
    j.at("rho").get_to(p.rho);
}

inline void to_json(nlohmann::json& j, const Tolerances& t) {
    j = {{"tol_root", t.tol_root}, {"tol_id", t.tol_id}, {"tol_shoot", t.tol_shoot}};
}

inline void from_json(const nlohmann::json& j, Tolerances& t) {
    j.at("tol_root").get_to(t.tol_root);
    j.at("tol_id").get_to(t.tol_id);
    j.at("tol_shoot").get_to(t.tol_shoot);
}

}  // namespace kyleq

namespace nlohmann {

template <>
struct adl_serializer<kyleq::MomentPair> {
    static void to_json(json& j, const kyleq::MomentPair& m) {
        j = {{"sigma1", m.sigma1}, {"sigma2", m.sigma2}};
    }
    static kyleq::MomentPair from_json(const json& j) {
        return kyleq::MomentPair(j.at("sigma1").get<double>(),
                                 j.at("sigma2").get<double>());
    }
};

template <>
struct adl_serializer<kyleq::ValueCoefficients> {
    static void to_json(json& j, const kyleq::ValueCoefficients& v) {
        j = {{"i", v.I}, {"j", v.J}, {"k", v.K}};
    }
    static kyleq::ValueCoefficients from_json(const json& j) {
        return kyleq::ValueCoefficients(j.at("i").get<double>(),
                                        j.at("j").get<double>(),
                                        j.at("k").get<double>());
    }
};

template <>
struct adl_serializer<kyleq::StageCoefficients> {
    static void to_json(json& j, const kyleq::StageCoefficients& s) {
        j = {{"n", s.n},       {"beta", s.beta},     {"alpha", s.alpha},
             {"lambda", s.lambda}, {"r", s.r}};
        if (s.xi)
            j["xi"] = *s.xi;
        else
            j["xi"] = nullptr;
    }
    // Stages are rebuilt through the factories so beta stays derived from xi;
    // stored derived fields must agree exactly with the reconstruction (an
    // honest file round-trips bit-for-bit).
    static kyleq::StageCoefficients from_json(const json& j) {
        const int n = j.at("n").get<int>();
        const double lambda = j.at("lambda").get<double>();
        kyleq::StageCoefficients s =
            j.at("xi").is_null()
                ? kyleq::StageCoefficients::terminal(n, lambda)
                : kyleq::StageCoefficients::interior(
                      n, j.at("xi").get<double>(), j.at("alpha").get<double>(),
                      lambda, j.at("r").get<double>());
        if (j.at("beta").get<double>() != s.beta ||
            j.at("alpha").get<double>() != s.alpha ||
            j.at("r").get<double>() != s.r)
            throw kyleq::invalid_parameter_error(
                "stage fields inconsistent with canonical reconstruction");
        return s;
    }
};

}  // namespace nlohmann

namespace kyleq {

inline void to_json(nlohmann::json& j, const EquilibriumSolution& s) {
    j = {{"params", s.params},
         {"stages", s.stages},
         {"moments", s.moments},
         {"values", s.values},
         {"a_hat", s.a_hat},
         {"b_hat", s.b_hat},
         {"residual_phi", s.residual_phi},
         {"residual_psi", s.residual_psi},
         {"tol", s.tol},
         {"warnings", s.warnings}};
}

inline void from_json(const nlohmann::json& j, EquilibriumSolution& s) {
    j.at("params").get_to(s.params);
    s.stages = j.at("stages").get<std::vector<StageCoefficients>>();
    s.moments = j.at("moments").get<std::vector<MomentPair>>();
    s.values = j.at("values").get<std::vector<ValueCoefficients>>();
    j.at("a_hat").get_to(s.a_hat);
    j.at("b_hat").get_to(s.b_hat);
    j.at("residual_phi").get_to(s.residual_phi);
    j.at("residual_psi").get_to(s.residual_psi);
    j.at("tol").get_to(s.tol);
    j.at("warnings").get_to(s.warnings);
}

inline void to_json(nlohmann::json& j, const IdentityCheck& c) {
    j = {{"name", c.name}, {"worst", c.worst}, {"tol", c.tol}, {"pass", c.pass}};
}

inline void to_json(nlohmann::json& j, const IdentityReport& r) {
    j = {{"checks", r.checks},
         {"all_pass", r.all_pass},
         {"worst_residual", r.worst_residual}};
}

inline void to_json(nlohmann::json& j, const StatCheck& c) {
    j = {{"name", c.name},
         {"stat", c.stat},
         {"limit", c.limit},
         {"pass", c.pass},
         {"statistical", c.statistical},
         {"note", c.note}};
}

inline void to_json(nlohmann::json& j, const SimReport& r) {
    j = {{"checks", r.checks},
         {"all_pass", r.all_pass},
         {"paths", r.paths},
         {"seed", r.seed},
         {"antithetic", r.antithetic}};
}

inline void to_json(nlohmann::json& j, const BestResponseReport& r) {
    j = {{"cost_eq", r.cost_eq},
         {"perturbations", r.perturbations},
         {"violations", r.violations},
         {"worst_gap", r.worst_gap},
         {"min_second_diff", r.min_second_diff},
         {"convexity_ok", r.convexity_ok},
         {"tol_opt", r.tol_opt},
         {"all_pass", r.all_pass}};
}

inline void to_json(nlohmann::json& j, const ProfitEstimate& p) {
    j = {{"profit_mean", p.profit_mean},
         {"profit_se", p.profit_se},
         {"cost_mean", p.cost_mean},
         {"cost_se", p.cost_se},
         {"identity_gap_mean", p.identity_gap_mean},
         {"identity_gap_se", p.identity_gap_se},
         {"identity_within_3se", p.identity_within_3se}};
}

inline void to_json(nlohmann::json& j, const MomentEstimate& m) {
    j = {{"paths", m.paths},
         {"sigma1_mean", m.sigma1_mean},
         {"sigma1_se", m.sigma1_se},
         {"sigma2_mean", m.sigma2_mean},
         {"sigma2_se", m.sigma2_se},
         {"dp_mean", m.dp_mean},
         {"dp_se", m.dp_se}};
}

// Per-date coefficient table. Row n pairs the date-n trade/price constants
// with the pre-trade moments and value constants (date n-1), which are the
// inputs of the date-n stage problem; that convention gives the terminal row
// the solved boundary moments (a_hat, b_hat).
inline void write_solution_csv(std::ostream& os, const EquilibriumSolution& sol,
                               const std::string& config_comment) {
    if (!config_comment.empty()) os << "# config: " << config_comment << "\n";
    os << "n,xi,beta,alpha,lambda,r,sigma1,sigma2,I,J,K\n";
    for (int n = 1; n <= sol.n_dates(); ++n) {
        const StageCoefficients& st = sol.stage(n);
        const MomentPair& m = sol.moment(n - 1);
        const ValueCoefficients& v = sol.value(n - 1);
        os << n << ',' << (st.xi ? fmt17(*st.xi) : std::string()) << ','
           << fmt17(st.beta) << ',' << fmt17(st.alpha) << ',' << fmt17(st.lambda)
           << ',' << fmt17(st.r) << ',' << fmt17(m.sigma1) << ',' << fmt17(m.sigma2)
           << ',' << fmt17(v.I) << ',' << fmt17(v.J) << ',' << fmt17(v.K) << "\n";
    }
}

inline nlohmann::json solution_table_json(const EquilibriumSolution& sol) {
    nlohmann::json rows = nlohmann::json::array();
    for (int n = 1; n <= sol.n_dates(); ++n) {
        const StageCoefficients& st = sol.stage(n);
        const MomentPair& m = sol.moment(n - 1);
        const ValueCoefficients& v = sol.value(n - 1);
        nlohmann::json row = {{"n", n},           {"beta", st.beta},
                              {"alpha", st.alpha}, {"lambda", st.lambda},
                              {"r", st.r},         {"sigma1", m.sigma1},
                              {"sigma2", m.sigma2}, {"i", v.I},
                              {"j", v.J},          {"k", v.K}};
        row["xi"] = st.xi ? nlohmann::json(*st.xi) : nlohmann::json(nullptr);
        rows.push_back(row);
    }
    return rows;
}

// One row per (N, date) pair for a swept per-date quantity; t = n/N puts all
// curves on the unit interval for comparison across N.
inline void write_sweep_csv(std::ostream& os,
                            const std::vector<EquilibriumSolution>& sols,
                            bool lambda_column, const std::string& config_comment) {
    if (!config_comment.empty()) os << "# config: " << config_comment << "\n";
    os << "N,n,t,value\n";
    for (const EquilibriumSolution& sol : sols) {
        const int N = sol.n_dates();
        for (int n = 1; n <= N; ++n) {
            const StageCoefficients& st = sol.stage(n);
            os << N << ',' << n << ','
               << fmt17(static_cast<double>(n) / static_cast<double>(N)) << ','
               << fmt17(lambda_column ? st.lambda : st.r) << "\n";
        }
    }
}

inline void write_estimates_csv(std::ostream& os, const MomentEstimate& est,
                                int n_dates, const std::string& config_comment) {
    if (!config_comment.empty()) os << "# config: " << config_comment << "\n";
    os << "n,sigma1_hat,sigma1_se,sigma2_hat,sigma2_se,dp_hat,dp_se\n";
    for (int n = 0; n <= n_dates; ++n) {
        os << n << ',';
        if (n <= n_dates - 1) {
            const std::size_t i = static_cast<std::size_t>(n);
            os << fmt17(est.sigma1_mean[i]) << ',' << fmt17(est.sigma1_se[i]) << ','
               << fmt17(est.sigma2_mean[i]) << ',' << fmt17(est.sigma2_se[i]);
        } else {
            os << ",,,";
        }
        os << ',';
        if (n >= 1) {
            const std::size_t i = static_cast<std::size_t>(n - 1);
            os << fmt17(est.dp_mean[i]) << ',' << fmt17(est.dp_se[i]);
        } else {
            os << ',';
        }
        os << "\n";
    }
}

}  // namespace kyleq
