#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "kyleq/backward.hpp"
#include "kyleq/errors.hpp"
#include "kyleq/model.hpp"
#include "kyleq/shooting.hpp"

// Assembly of the final equilibrium object from a solved backward run, plus
// the redundant-derivation checks that guard against transcription errors in
// the compounded recursions.

namespace kyleq {

// First-order-condition internals at one date. h_coef is the coefficient of
// the belief state in the price intercept, which must equal -lambda * alpha.
struct Diagnostics {
    double eta;
    double gamma;
    double h_coef;
};

inline EquilibriumSolution assemble(const BackwardRun& run, const ModelParams& params,
                                    const Tolerances& tol = Tolerances{}) {
    const int N = params.n;
    EquilibriumSolution sol;
    sol.params = params;
    sol.tol = tol;
    sol.moments = run.moments;
    sol.values = run.values;
    sol.a_hat = run.a;
    sol.b_hat = run.b;

    sol.stages.reserve(static_cast<std::size_t>(N));
    for (int n = 1; n <= N - 1; ++n) {
        const std::size_t i = static_cast<std::size_t>(n - 1);
        const double lambda = run.lambda[i];
        const double r = run.r[i];
        const double J = run.values[static_cast<std::size_t>(n)].J;
        const double alpha = 1.0 - lambda / ((1.0 + r) * J);
        sol.stages.push_back(
            StageCoefficients::interior(n, run.xi[i], alpha, lambda, r));
    }
    sol.stages.push_back(StageCoefficients::terminal(N, run.lambda_terminal));
    return sol;
}

// Expected remaining cost at date n in state (x, q) = (residual demand,
// market belief).
inline double value_at(const EquilibriumSolution& sol, int n, double x, double q) {
    const ValueCoefficients& v = sol.value(n);
    return v.I * x * x + v.J * x * q + v.K;
}

inline Diagnostics diagnostics_at(const EquilibriumSolution& sol, int n) {
    if (n < 1 || n > sol.n_dates() - 1)
        throw std::out_of_range("diagnostics_at needs an interior date");
    const StageCoefficients& st = sol.stage(n);
    const ValueCoefficients& v = sol.value(n);
    const double denom = (1.0 + st.r) * v.I - st.r * v.J;
    if (denom == 0.0)
        throw domain_error("first-order-condition denominator vanished");
    Diagnostics d{};
    d.eta = ((1.0 + st.r) * v.J - st.lambda) / (2.0 * (1.0 + st.r) * denom);
    d.gamma = ((1.0 + 2.0 * st.r) * v.J - 2.0 * (1.0 + st.r) * v.I) /
              (2.0 * st.lambda * denom);
    d.h_coef = -st.lambda * st.alpha;
    return d;
}

// One-date market: the trader is forced to close the full target immediately,
// so there is nothing to optimize and no boundary search.
inline EquilibriumSolution solve_n1(const ModelParams& params,
                                    const Tolerances& tol = Tolerances{}) {
    const double sa2 = params.sigma_a * params.sigma_a;
    const double sab = params.rho * params.sigma_a * params.sigma_v;
    const double lambda = sab / (sa2 + params.sigma_w2());

    EquilibriumSolution sol;
    sol.params = params;
    sol.tol = tol;
    sol.stages.push_back(StageCoefficients::terminal(1, lambda));
    sol.moments.emplace_back(sa2, sab);
    sol.values.emplace_back(lambda, lambda, 0.0);
    sol.a_hat = sa2;
    sol.b_hat = sab;
    sol.residual_phi = 0.0;
    sol.residual_psi = 0.0;
    return sol;
}

inline EquilibriumSolution solve(const ModelParams& raw,
                                 const Tolerances& tol = Tolerances{}) {
    const ModelParams params = validate(raw);
    if (params.n == 1) return solve_n1(params, tol);
    const ShootingResult shot = solve_boundary(params, tol);
    EquilibriumSolution sol = assemble(shot.run, params, tol);
    sol.residual_phi = shot.residual_phi;
    sol.residual_psi = shot.residual_psi;
    sol.warnings = shot.warnings;
    return sol;
}

// Ex-ante equilibrium cost of the forced liquidation, averaged over the
// target: E[I_0 a^2] + K_0.
inline double equilibrium_cost(const EquilibriumSolution& sol) {
    return sol.value(0).I * sol.params.sigma_a * sol.params.sigma_a + sol.value(0).K;
}

struct IdentityCheck {
    std::string name;
    double worst;  // residual for identity checks, violation margin otherwise
    double tol;    // 0 marks a strict (exact-comparison) check
    bool pass;
};

struct IdentityReport {
    std::vector<IdentityCheck> checks;
    bool all_pass = true;
    double worst_residual = 0;

    void add(std::string name, double worst, double tol, bool pass) {
        checks.push_back({std::move(name), worst, tol, pass});
        all_pass = all_pass && pass;
        worst_residual = std::max(worst_residual, worst);
    }

    void add(std::string name, double worst, double tol) {
        add(std::move(name), worst, tol, worst <= tol);
    }
};

namespace detail {

inline double rel_gap(double x, double y) {
    const double scale = std::max({std::fabs(x), std::fabs(y), 1e-300});
    return std::fabs(x - y) / scale;
}

}  // namespace detail

// Recompute every stored quantity along an independent derivation path and
// report the worst mismatch per identity. All checks are pure functions of
// the solution object.
inline IdentityReport verify_identities(const EquilibriumSolution& sol) {
    const int N = sol.n_dates();
    const double w2 = sol.params.sigma_w2();
    const double tol_id = sol.tol.tol_id;
    IdentityReport rep;

    // Inequality set, strict comparisons.
    {
        bool ok = true;
        for (int n = 1; n <= N; ++n) {
            const StageCoefficients& st = sol.stage(n);
            if (n < N) {
                const double cap = std::sqrt(w2 / sol.moment(n).sigma1);
                ok = ok && st.xi.has_value() && *st.xi > 0.0 && *st.xi < cap;
                ok = ok && st.lambda > 0.0 && st.r > 0.0;
            } else {
                ok = ok && st.lambda > 0.0 && st.r == 0.0;
            }
        }
        for (int n = 0; n <= N - 1; ++n) {
            ok = ok && sol.moment(n).sigma1 > 0.0 && sol.moment(n).sigma2 > 0.0;
            ok = ok && sol.value(n).I > 0.0 && sol.value(n).J >= sol.value(n).I;
        }
        rep.add("inequality-set", ok ? 0.0 : 1.0, 0.0, ok);
    }

    // SOC positivity at interior dates, strict.
    {
        bool ok = true;
        for (int n = 1; n <= N - 1; ++n) {
            const StageCoefficients& st = sol.stage(n);
            const ValueCoefficients& v = sol.value(n);
            ok = ok && (1.0 + st.r) * ((1.0 + st.r) * v.I - st.r * v.J) > 0.0;
        }
        rep.add("soc-positive", ok ? 0.0 : 1.0, 0.0, ok);
    }

    // Price impact and filter gain recomputed from the beta-form.
    {
        double worst_l = 0, worst_r = 0;
        for (int n = 1; n <= N; ++n) {
            const StageCoefficients& st = sol.stage(n);
            const MomentPair& prev = sol.moment(n - 1);
            const double den = st.beta * st.beta * prev.sigma1 + w2;
            worst_l = std::max(worst_l,
                               detail::rel_gap(st.lambda, st.beta * prev.sigma2 / den));
            worst_r = std::max(
                worst_r,
                detail::rel_gap(st.r, (1.0 - st.beta) * st.beta * prev.sigma1 / den));
        }
        rep.add("lambda-beta-form", worst_l, tol_id, worst_l <= tol_id);
        rep.add("r-beta-form", worst_r, tol_id, worst_r <= tol_id);
    }

    // Moment recursions replayed forward.
    {
        double worst = 0;
        for (int n = 1; n <= N - 1; ++n) {
            const StageCoefficients& st = sol.stage(n);
            const MomentPair& prev = sol.moment(n - 1);
            const MomentPair& cur = sol.moment(n);
            const double den = st.beta * st.beta * prev.sigma1 + w2;
            const double s1 =
                (1.0 - st.beta) * (1.0 - st.beta) * w2 * prev.sigma1 / den;
            const double s2 = (1.0 - st.beta) * w2 * prev.sigma2 / den;
            worst = std::max({worst, detail::rel_gap(cur.sigma1, s1),
                              detail::rel_gap(cur.sigma2, s2)});
        }
        rep.add("moment-forward-replay", worst, tol_id, worst <= tol_id);
    }

    // Closed form for the value-coefficient gap. The direct difference
    // I_{n-1} - J_{n-1} cancels almost completely, so compare I_{n-1}
    // against J_{n-1} plus the closed-form gap instead.
    {
        double worst = 0;
        for (int n = 1; n <= N - 1; ++n) {
            const StageCoefficients& st = sol.stage(n);
            const ValueCoefficients& v = sol.value(n);
            const ValueCoefficients& pv = sol.value(n - 1);
            const double soc = (1.0 + st.r) * v.I - st.r * v.J;
            const double gap = st.lambda - st.r * v.J;
            const double closed = -gap * gap / (4.0 * (1.0 + st.r) * soc);
            worst = std::max(worst, detail::rel_gap(pv.I, pv.J + closed));
        }
        rep.add("value-gap-closed-form", worst, tol_id, worst <= tol_id);
    }

    // First-order-condition internals: eta/gamma consistency with the
    // stored alpha, and beta recovered from the optimality ratio.
    {
        double worst_h = 0, worst_b = 0;
        for (int n = 1; n <= N - 1; ++n) {
            const StageCoefficients& st = sol.stage(n);
            const ValueCoefficients& v = sol.value(n);
            const Diagnostics d = diagnostics_at(sol, n);
            const double via_h = d.eta * st.lambda / (1.0 + d.gamma * st.lambda);
            worst_h = std::max(worst_h, detail::rel_gap(via_h, st.lambda * st.alpha));
            const double soc = (1.0 + st.r) * v.I - st.r * v.J;
            const double beta_foc = (2.0 * (1.0 + st.r) * v.I - st.r * v.J - st.lambda) /
                                    (2.0 * (1.0 + st.r) * soc);
            worst_b = std::max(worst_b, detail::rel_gap(beta_foc, st.beta));
        }
        rep.add("intercept-consistency", worst_h, tol_id, worst_h <= tol_id);
        rep.add("beta-foc-form", worst_b, tol_id, worst_b <= tol_id);
    }

    // Moment/value link at every date (limit form at the last one).
    {
        double worst = 0;
        for (int n = 0; n <= N - 1; ++n) {
            const MomentPair& m = sol.moment(n);
            // The left side is a near-cancelling difference deep in long
            // horizons; scale the gap by its operands, not its value.
            const double t1 = m.sigma2 / w2;
            const double t2 = (m.sigma1 / w2) * sol.value(n).J;
            double rhs;
            if (n + 1 <= N - 1) {
                const double xn = *sol.stage(n + 1).xi;
                rhs = (1.0 + xn) * m.sigma2 / ((m.sigma1 + w2) * xn + w2);
            } else {
                rhs = m.sigma2 / (m.sigma1 + w2);
            }
            const double scale =
                std::max({std::fabs(t1), std::fabs(t2), std::fabs(rhs), 1e-300});
            worst = std::max(worst, std::fabs((t1 - t2) - rhs) / scale);
        }
        rep.add("moment-value-link", worst, tol_id, worst <= tol_id);
    }

    // SOC closed form at interior dates.
    {
        double worst = 0;
        for (int n = 1; n <= N - 1; ++n) {
            const StageCoefficients& st = sol.stage(n);
            const ValueCoefficients& v = sol.value(n);
            const MomentPair& m = sol.moment(n);
            const double xi = *st.xi;
            const double term1 = (1.0 + st.r) * v.I;
            const double term2 = st.r * v.J;
            const double den = w2 - m.sigma1 * xi * xi;
            double closed;
            if (n + 1 <= N - 1) {
                const double xn = *sol.stage(n + 1).xi;
                closed = w2 * xi * (1.0 + xi) * (1.0 + xn) * m.sigma2 /
                         (2.0 * den * ((m.sigma1 + w2) * xn + w2));
            } else {
                closed = w2 * xi * (1.0 + xi) * m.sigma2 /
                         (2.0 * den * (m.sigma1 + w2));
            }
            // Same cancellation caveat as the link check above.
            const double scale = std::max(
                {std::fabs(term1), std::fabs(term2), std::fabs(closed), 1e-300});
            worst = std::max(worst, std::fabs((term1 - term2) - closed) / scale);
        }
        rep.add("soc-closed-form", worst, tol_id, worst <= tol_id);
    }

    // Value constants: terminal equalities and the K recursion.
    {
        double worst = 0;
        const ValueCoefficients& last = sol.value(N - 1);
        const double lambda_N = sol.stage(N).lambda;
        worst = std::max({worst, detail::rel_gap(last.I, lambda_N),
                          detail::rel_gap(last.J, lambda_N), std::fabs(last.K)});
        for (int n = 1; n <= N - 1; ++n) {
            const StageCoefficients& st = sol.stage(n);
            const ValueCoefficients& v = sol.value(n);
            const double k_prev = v.K + (v.I - v.J) * st.r * st.r * w2;
            worst = std::max(worst, detail::rel_gap(sol.value(n - 1).K, k_prev));
        }
        rep.add("value-terminal-and-k", worst, tol_id, worst <= tol_id);
    }

    // K is nonpositive and non-increasing backward in time; strict.
    {
        bool ok = true;
        for (int n = 0; n <= N - 1; ++n) ok = ok && sol.value(n).K <= 0.0;
        for (int n = 1; n <= N - 1; ++n) ok = ok && sol.value(n - 1).K <= sol.value(n).K;
        rep.add("k-nonpositive-monotone", ok ? 0.0 : 1.0, 0.0, ok);
    }

    // Boundary residuals stored by the solver.
    {
        const double worst = std::max(sol.residual_phi, sol.residual_psi);
        rep.add("boundary-match", worst, sol.tol.tol_shoot,
                worst <= sol.tol.tol_shoot);
    }

    return rep;
}

}  // namespace kyleq
