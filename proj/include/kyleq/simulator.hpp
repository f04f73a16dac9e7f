#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <future>
#include <limits>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "kyleq/equilibrium.hpp"
#include "kyleq/errors.hpp"
#include "kyleq/model.hpp"
#include "kyleq/rng.hpp"

// Forward simulation under the solved equilibrium (or a deviating linear
// strategy), deterministic Monte Carlo estimation, and the exact
// second-moment cost oracle used to test best-response optimality.

namespace kyleq {

struct SimConfig {
    long long paths = 100000;
    std::uint64_t seed = 0;
    bool antithetic = false;
};

inline SimConfig validate(const SimConfig& cfg) {
    if (cfg.paths < 1) detail::fail_bound("paths", "paths >= 1", cfg.paths);
    if (cfg.antithetic && cfg.paths % 2 != 0)
        throw invalid_parameter_error("antithetic sampling needs an even path count");
    return cfg;
}

struct Primitives {
    double a = 0;
    double v = 0;
    std::vector<double> dw;
};

// Draw slots per path: 0 is the target shock, 1 the value shock, 2+k the
// noise increment at date k+1. Under antithetic sampling, paths 2m and 2m+1
// share draw index m and differ only by sign.
inline Primitives sample_primitives(const ModelParams& params, const SimConfig& cfg,
                                    std::uint64_t path) {
    std::uint64_t base = path;
    double sign = 1.0;
    if (cfg.antithetic) {
        base = path / 2;
        if (path % 2 == 1) sign = -1.0;
    }
    const double g1 = sign * standard_normal(cfg.seed, base, 0);
    const double g2 = sign * standard_normal(cfg.seed, base, 1);
    Primitives out;
    out.a = params.sigma_a * g1;
    out.v = params.sigma_v *
            (params.rho * g1 + std::sqrt(1.0 - params.rho * params.rho) * g2);
    out.dw.resize(static_cast<std::size_t>(params.n));
    for (int k = 0; k < params.n; ++k)
        out.dw[static_cast<std::size_t>(k)] =
            params.sigma_w * sign *
            standard_normal(cfg.seed, base, 2 + static_cast<std::uint64_t>(k));
    return out;
}

namespace detail {

// Shared forward iteration. With a deviating strategy the market side
// (lambda, r, alpha in the price and belief updates) stays at equilibrium:
// the pricing rule is fixed when the trader deviates. The innovation stored
// is the market maker's one, y_n - alpha_n q_{n-1} expected order flow; under
// equilibrium play it is computed in the structural form beta_n x + dw so the
// path satisfies the defining identity bit-for-bit.
inline MarketPath simulate_impl(const EquilibriumSolution& sol, double a, double v,
                                const std::vector<double>& dw,
                                const LinearStrategy* dev) {
    const int N = sol.n_dates();
    if (static_cast<int>(dw.size()) != N)
        throw dimension_error("noise vector must have one increment per date");
    if (dev && static_cast<int>(dev->size()) != N - 1)
        throw dimension_error("strategy must have exactly N-1 entries");

    MarketPath path;
    path.a = a;
    path.v = v;
    path.dw = dw;
    path.theta.assign(static_cast<std::size_t>(N) + 1, 0.0);
    path.p.assign(static_cast<std::size_t>(N) + 1, 0.0);
    path.q.assign(static_cast<std::size_t>(N) + 1, 0.0);
    path.y.resize(static_cast<std::size_t>(N));
    path.z.resize(static_cast<std::size_t>(N));

    for (int n = 1; n <= N; ++n) {
        const std::size_t i = static_cast<std::size_t>(n);
        const StageCoefficients& st = sol.stage(n);
        const double theta_prev = path.theta[i - 1];
        const double q_prev = path.q[i - 1];
        const double x_prev = a - theta_prev - q_prev;

        double dtheta;
        if (n < N) {
            const double beta = dev ? dev->beta_dev[i - 1] : st.beta;
            const double alpha = dev ? dev->alpha_dev[i - 1] : st.alpha;
            dtheta = beta * x_prev + alpha * q_prev;
        } else {
            dtheta = a - theta_prev;  // forced terminal trade
        }

        const double y = dtheta + dw[i - 1];
        path.y[i - 1] = y;
        path.p[i] = path.p[i - 1] + (st.lambda * y - st.lambda * st.alpha * q_prev);
        path.q[i] = q_prev + (st.r * y - (1.0 + st.r) * st.alpha * q_prev);
        path.theta[i] = (n < N) ? theta_prev + dtheta : a;  // target hit exactly
        path.z[i - 1] = dev ? (y - st.alpha * q_prev) : (st.beta * x_prev + dw[i - 1]);
    }
    return path;
}

}  // namespace detail

inline MarketPath simulate_path(const EquilibriumSolution& sol, double a, double v,
                                const std::vector<double>& dw) {
    return detail::simulate_impl(sol, a, v, dw, nullptr);
}

inline MarketPath simulate_path(const EquilibriumSolution& sol, double a, double v,
                                const std::vector<double>& dw,
                                const LinearStrategy& strategy) {
    return detail::simulate_impl(sol, a, v, dw, &strategy);
}

namespace detail {

struct Accumulator {
    std::vector<double> sum;
    std::vector<double> sumsq;
    long long n = 0;

    explicit Accumulator(std::size_t width) : sum(width, 0.0), sumsq(width, 0.0) {}

    void add(const std::vector<double>& f) {
        for (std::size_t i = 0; i < sum.size(); ++i) {
            sum[i] += f[i];
            sumsq[i] += f[i] * f[i];
        }
        ++n;
    }

    void combine(const Accumulator& o) {
        for (std::size_t i = 0; i < sum.size(); ++i) {
            sum[i] += o.sum[i];
            sumsq[i] += o.sumsq[i];
        }
        n += o.n;
    }

    double mean(std::size_t i) const { return sum[i] / static_cast<double>(n); }

    // standard error of the mean
    double se(std::size_t i) const {
        if (n < 2) return std::numeric_limits<double>::infinity();
        const double m = mean(i);
        const double var =
            std::max(0.0, (sumsq[i] - static_cast<double>(n) * m * m) /
                              static_cast<double>(n - 1));
        return std::sqrt(var / static_cast<double>(n));
    }
};

// Deterministic blockwise reduction: units are processed in fixed blocks of
// 8192 and the per-block accumulators are combined in block order, so the
// result is bit-identical no matter how many workers run. Under antithetic
// sampling a unit is a +/- pair and the unit feature is the pair average,
// which also makes the standard errors account for the pairing.
template <typename Extract>
inline Accumulator reduce_units(long long units, std::size_t width,
                                const Extract& extract) {
    constexpr long long kBlock = 8192;
    const long long blocks = (units + kBlock - 1) / kBlock;
    const unsigned max_inflight =
        std::max(1u, std::min(8u, std::thread::hardware_concurrency()));

    Accumulator total(width);
    std::deque<std::future<Accumulator>> window;
    auto drain_front = [&] {
        total.combine(window.front().get());
        window.pop_front();
    };
    for (long long b = 0; b < blocks; ++b) {
        window.push_back(std::async(std::launch::async, [&, b] {
            Accumulator acc(width);
            std::vector<double> f(width);
            const long long end = std::min(units, (b + 1) * kBlock);
            for (long long u = b * kBlock; u < end; ++u) {
                extract(u, f);
                acc.add(f);
            }
            return acc;
        }));
        if (window.size() >= max_inflight) drain_front();
    }
    while (!window.empty()) drain_front();
    return total;
}

template <typename PathFeatures>
inline Accumulator accumulate_paths(const EquilibriumSolution& sol,
                                    const SimConfig& cfg, std::size_t width,
                                    const LinearStrategy* dev,
                                    const PathFeatures& fill) {
    const long long per_unit = cfg.antithetic ? 2 : 1;
    const long long units = cfg.paths / per_unit;
    return reduce_units(units, width, [&](long long u, std::vector<double>& f) {
        std::vector<double> scratch(width);
        std::fill(f.begin(), f.end(), 0.0);
        for (long long j = 0; j < per_unit; ++j) {
            const std::uint64_t path = static_cast<std::uint64_t>(u * per_unit + j);
            const Primitives prim = sample_primitives(sol.params, cfg, path);
            const MarketPath mp = simulate_impl(sol, prim.a, prim.v, prim.dw, dev);
            fill(mp, scratch);
            for (std::size_t i = 0; i < width; ++i)
                f[i] += scratch[i] / static_cast<double>(per_unit);
        }
    });
}

}  // namespace detail

// Per-date sample moments with standard errors. sigma1/sigma2 cover dates
// 0..N-1 (the solver's moment range), dp covers dates 1..N.
struct MomentEstimate {
    long long paths = 0;
    std::vector<double> sigma1_mean, sigma1_se;
    std::vector<double> sigma2_mean, sigma2_se;
    std::vector<double> dp_mean, dp_se;
};

inline MomentEstimate estimate_moments(const EquilibriumSolution& sol,
                                       const SimConfig& raw) {
    const SimConfig cfg = validate(raw);
    const int N = sol.n_dates();
    const std::size_t width = static_cast<std::size_t>(3 * N);

    const auto fill = [&](const MarketPath& mp, std::vector<double>& f) {
        for (int n = 0; n <= N - 1; ++n) {
            const std::size_t i = static_cast<std::size_t>(n);
            const double x = mp.a - mp.theta[i] - mp.q[i];
            f[i] = x * x;
            f[static_cast<std::size_t>(N) + i] = x * (mp.v - mp.p[i]);
        }
        for (int n = 1; n <= N; ++n)
            f[static_cast<std::size_t>(2 * N + n - 1)] =
                mp.p[static_cast<std::size_t>(n)] - mp.p[static_cast<std::size_t>(n - 1)];
    };
    const detail::Accumulator acc =
        detail::accumulate_paths(sol, cfg, width, nullptr, fill);

    MomentEstimate out;
    out.paths = cfg.paths;
    for (int n = 0; n <= N - 1; ++n) {
        const std::size_t i = static_cast<std::size_t>(n);
        out.sigma1_mean.push_back(acc.mean(i));
        out.sigma1_se.push_back(acc.se(i));
        out.sigma2_mean.push_back(acc.mean(static_cast<std::size_t>(N) + i));
        out.sigma2_se.push_back(acc.se(static_cast<std::size_t>(N) + i));
    }
    for (int n = 1; n <= N; ++n) {
        out.dp_mean.push_back(acc.mean(static_cast<std::size_t>(2 * N + n - 1)));
        out.dp_se.push_back(acc.se(static_cast<std::size_t>(2 * N + n - 1)));
    }
    return out;
}

// Exact expected cost E[sum (a - theta_{n-1}) dp_n] of a linear strategy
// against the equilibrium market rule, by propagating the second-moment
// matrix of the state (x_n, q_n). No sampling is involved.
inline double strategy_cost(const EquilibriumSolution& sol,
                            const LinearStrategy& strategy) {
    const int N = sol.n_dates();
    if (static_cast<int>(strategy.size()) != N - 1)
        throw dimension_error("strategy must have exactly N-1 entries");
    const double w2 = sol.params.sigma_w2();

    double m11 = sol.params.sigma_a * sol.params.sigma_a;
    double m12 = 0.0;
    double m22 = 0.0;
    double cost = 0.0;
    for (int n = 1; n <= N - 1; ++n) {
        const StageCoefficients& st = sol.stage(n);
        const double bp = strategy.beta_dev[static_cast<std::size_t>(n - 1)];
        const double ap = strategy.alpha_dev[static_cast<std::size_t>(n - 1)];

        // E[(x+q) dp] with dp = lambda(bp x + ap q + dw) - lambda alpha q
        cost += st.lambda *
                (bp * (m11 + m12) + (ap - st.alpha) * (m12 + m22));

        const double a11 = 1.0 - (1.0 + st.r) * bp;
        const double a12 = (1.0 + st.r) * (st.alpha - ap);
        const double a21 = st.r * bp;
        const double a22 = 1.0 + st.r * ap - (1.0 + st.r) * st.alpha;
        const double noise = w2 * st.r * st.r;
        const double n11 = a11 * a11 * m11 + 2.0 * a11 * a12 * m12 + a12 * a12 * m22 + noise;
        const double n12 = a11 * a21 * m11 + (a11 * a22 + a12 * a21) * m12 +
                           a12 * a22 * m22 - noise;
        const double n22 = a21 * a21 * m11 + 2.0 * a21 * a22 * m12 + a22 * a22 * m22 + noise;
        m11 = n11;
        m12 = n12;
        m22 = n22;
    }
    // forced terminal trade: dp_N = lambda_N (x + dw)
    cost += sol.stage(N).lambda * (m11 + m12);
    return cost;
}

inline LinearStrategy equilibrium_strategy(const EquilibriumSolution& sol) {
    std::vector<double> beta, alpha;
    for (int n = 1; n <= sol.n_dates() - 1; ++n) {
        beta.push_back(sol.stage(n).beta);
        alpha.push_back(sol.stage(n).alpha);
    }
    return LinearStrategy(std::move(beta), std::move(alpha));
}

// Monte Carlo estimate of the same cost functional; used to cross-check the
// deterministic oracle.
struct CostEstimate {
    double mean = 0;
    double se = 0;
};

inline CostEstimate simulated_cost(const EquilibriumSolution& sol, const SimConfig& raw,
                                   const LinearStrategy* dev = nullptr) {
    const SimConfig cfg = validate(raw);
    const int N = sol.n_dates();
    const auto fill = [&](const MarketPath& mp, std::vector<double>& f) {
        double c = 0.0;
        for (int n = 1; n <= N; ++n) {
            const std::size_t i = static_cast<std::size_t>(n);
            c += (mp.a - mp.theta[i - 1]) * (mp.p[i] - mp.p[i - 1]);
        }
        f[0] = c;
    };
    const detail::Accumulator acc = detail::accumulate_paths(sol, cfg, 1, dev, fill);
    return CostEstimate{acc.mean(0), acc.se(0)};
}

struct BestResponseReport {
    double cost_eq = 0;
    int perturbations = 0;
    int violations = 0;
    double worst_gap = 0;        // most negative cost(dev) - cost(eq) seen
    double min_second_diff = 0;  // smallest one-coordinate second difference
    bool convexity_ok = true;
    double tol_opt = 0;
    bool all_pass = true;
};

// Random linear deviations plus per-coordinate second differences. Every
// deviation must cost at least as much as equilibrium play (up to tol_opt),
// and the objective must be convex along each coordinate.
inline BestResponseReport best_response_check(const EquilibriumSolution& sol,
                                              int perturbations, double eps,
                                              std::uint64_t seed,
                                              double tol_opt = 1e-10) {
    if (!(eps > 0)) detail::fail_bound("eps", "eps > 0", eps);
    const int N = sol.n_dates();
    const LinearStrategy eq = equilibrium_strategy(sol);
    const double cost_eq = strategy_cost(sol, eq);

    BestResponseReport rep;
    rep.cost_eq = cost_eq;
    rep.perturbations = perturbations;
    rep.tol_opt = tol_opt;
    rep.worst_gap = std::numeric_limits<double>::infinity();
    rep.min_second_diff = std::numeric_limits<double>::infinity();

    const std::uint64_t salt = 0x70657274ULL;  // keeps these draws off the path streams
    const std::size_t m = eq.size();
    for (int p = 0; p < perturbations; ++p) {
        std::vector<double> beta = eq.beta_dev;
        std::vector<double> alpha = eq.alpha_dev;
        for (std::size_t i = 0; i < m; ++i) {
            beta[i] += eps * (2.0 * uniform01(seed ^ salt, static_cast<std::uint64_t>(p), i) - 1.0);
            alpha[i] += eps * (2.0 * uniform01(seed ^ salt, static_cast<std::uint64_t>(p), m + i) - 1.0);
        }
        const double gap =
            strategy_cost(sol, LinearStrategy(std::move(beta), std::move(alpha))) -
            cost_eq;
        rep.worst_gap = std::min(rep.worst_gap, gap);
        if (gap < -tol_opt) ++rep.violations;
    }

    for (std::size_t i = 0; i < m; ++i) {
        for (int coord = 0; coord < 2; ++coord) {
            double up_cost, dn_cost;
            {
                LinearStrategy up = eq;
                LinearStrategy dn = eq;
                (coord == 0 ? up.beta_dev[i] : up.alpha_dev[i]) += eps;
                (coord == 0 ? dn.beta_dev[i] : dn.alpha_dev[i]) -= eps;
                up_cost = strategy_cost(sol, up);
                dn_cost = strategy_cost(sol, dn);
            }
            const double second = up_cost + dn_cost - 2.0 * cost_eq;
            rep.min_second_diff = std::min(rep.min_second_diff, second);
        }
    }
    if (m == 0) {
        rep.min_second_diff = 0.0;  // nothing to perturb when N = 1
        rep.worst_gap = 0.0;
    }
    rep.convexity_ok = rep.min_second_diff >= -tol_opt;
    rep.all_pass = (rep.violations == 0) && rep.convexity_ok;
    if (N == 1) rep.all_pass = true;
    return rep;
}

// Exact minimizer of the (quadratic) cost along one strategy coordinate via
// a three-point parabola fit. date is 1-based; coord 0 perturbs beta', 1
// perturbs alpha'. Throws if the cost is flat along the coordinate (which
// happens for alpha' at date 1, where the belief state is identically zero).
inline double coordinate_minimum(const EquilibriumSolution& sol, int date, int coord,
                                 double eps = 1e-3) {
    const LinearStrategy eq = equilibrium_strategy(sol);
    if (date < 1 || date > sol.n_dates() - 1)
        throw std::out_of_range("coordinate_minimum needs an interior date");
    const std::size_t i = static_cast<std::size_t>(date - 1);
    const double center = (coord == 0) ? eq.beta_dev[i] : eq.alpha_dev[i];

    const auto cost_at = [&](double value) {
        LinearStrategy s = eq;
        (coord == 0 ? s.beta_dev[i] : s.alpha_dev[i]) = value;
        return strategy_cost(sol, s);
    };
    const double f0 = cost_at(center - eps);
    const double f1 = cost_at(center);
    const double f2 = cost_at(center + eps);
    const double curve = f2 - 2.0 * f1 + f0;
    if (!(std::fabs(curve) > 0))
        throw domain_error("cost is flat along this coordinate");
    return center - 0.5 * eps * (f2 - f0) / curve;
}

struct ProfitEstimate {
    double profit_mean = 0, profit_se = 0;
    double cost_mean = 0, cost_se = 0;
    double identity_gap_mean = 0, identity_gap_se = 0;
    bool identity_within_3se = true;
};

// Estimates E[sum (v - p_n) dtheta_n] and checks it against
// (rho sigma_v / sigma_a) E[a^2] - E[cost]. The per-path gap has mean zero
// but genuine randomness (it equals a (v - E[v|a])), except in the rho = 1,
// sigma_a = sigma_v corner where it degenerates; the standard error is
// floored so the z-statistic stays defined there.
inline ProfitEstimate expected_profit(const EquilibriumSolution& sol,
                                      const SimConfig& raw) {
    const SimConfig cfg = validate(raw);
    const int N = sol.n_dates();
    const double slope = sol.params.rho * sol.params.sigma_v / sol.params.sigma_a;

    const auto fill = [&](const MarketPath& mp, std::vector<double>& f) {
        double cost = 0.0, profit = 0.0;
        for (int n = 1; n <= N; ++n) {
            const std::size_t i = static_cast<std::size_t>(n);
            const double dp = mp.p[i] - mp.p[i - 1];
            cost += (mp.a - mp.theta[i - 1]) * dp;
            profit += (mp.v - mp.p[i]) * (mp.theta[i] - mp.theta[i - 1]);
        }
        f[0] = profit;
        f[1] = cost;
        f[2] = profit - (slope * mp.a * mp.a - cost);
    };
    const detail::Accumulator acc = detail::accumulate_paths(sol, cfg, 3, nullptr, fill);

    ProfitEstimate out;
    out.profit_mean = acc.mean(0);
    out.profit_se = acc.se(0);
    out.cost_mean = acc.mean(1);
    out.cost_se = acc.se(1);
    out.identity_gap_mean = acc.mean(2);
    out.identity_gap_se = acc.se(2);
    const double scale =
        std::max({1.0, std::fabs(out.profit_mean), std::fabs(out.cost_mean)});
    const double se_floor = std::max(out.identity_gap_se, 1e-13 * scale);
    out.identity_within_3se = std::fabs(out.identity_gap_mean) <= 3.0 * se_floor;
    return out;
}

struct StatCheck {
    std::string name;
    double stat = 0;   // worst |z| for statistical checks, magnitude otherwise
    double limit = 0;  // acceptance bound (3 for z-statistics)
    bool pass = true;
    bool statistical = true;  // eligible for the confirm-on-reseed rule
    std::string note;
};

struct SimReport {
    std::vector<StatCheck> checks;
    bool all_pass = true;
    long long paths = 0;
    std::uint64_t seed = 0;
    bool antithetic = false;
};

namespace detail {

inline int pair_index(int n, int k) {  // k < n, both 1-based
    return (n - 2) * (n - 1) / 2 + (k - 1);
}

inline std::vector<StatCheck> run_stat_battery(const EquilibriumSolution& sol,
                                               const SimConfig& cfg) {
    const int N = sol.n_dates();
    const int P2 = N * (N - 1) / 2;
    const std::size_t base_zz = static_cast<std::size_t>(3 * N);
    const std::size_t base_dpy = base_zz + static_cast<std::size_t>(P2);
    const std::size_t base_xz = base_dpy + static_cast<std::size_t>(P2);
    const std::size_t base_scalar = base_xz + static_cast<std::size_t>(P2);
    const std::size_t width = base_scalar + 6;
    const double slope = sol.params.rho * sol.params.sigma_v / sol.params.sigma_a;

    const auto fill = [&](const MarketPath& mp, std::vector<double>& f) {
        for (int n = 0; n <= N - 1; ++n) {
            const std::size_t i = static_cast<std::size_t>(n);
            const double x = mp.a - mp.theta[i] - mp.q[i];
            f[i] = x * x;
            f[static_cast<std::size_t>(N) + i] = x * (mp.v - mp.p[i]);
        }
        for (int n = 1; n <= N; ++n)
            f[static_cast<std::size_t>(2 * N + n - 1)] =
                mp.p[static_cast<std::size_t>(n)] - mp.p[static_cast<std::size_t>(n - 1)];
        for (int n = 2; n <= N; ++n)
            for (int k = 1; k < n; ++k)
                f[base_zz + static_cast<std::size_t>(pair_index(n, k))] =
                    mp.z[static_cast<std::size_t>(n - 1)] *
                    mp.z[static_cast<std::size_t>(k - 1)];
        for (int n = 2; n <= N; ++n)
            for (int k = 1; k < n; ++k)
                f[base_dpy + static_cast<std::size_t>(pair_index(n, k))] =
                    (mp.p[static_cast<std::size_t>(n)] -
                     mp.p[static_cast<std::size_t>(n - 1)]) *
                    mp.y[static_cast<std::size_t>(k - 1)];
        for (int n = 1; n <= N - 1; ++n)
            for (int k = 1; k <= n; ++k)
                f[base_xz + static_cast<std::size_t>(n * (n - 1) / 2 + (k - 1))] =
                    (mp.a - mp.theta[static_cast<std::size_t>(n)] -
                     mp.q[static_cast<std::size_t>(n)]) *
                    mp.z[static_cast<std::size_t>(k - 1)];

        double cost = 0.0, profit = 0.0;
        for (int n = 1; n <= N; ++n) {
            const std::size_t i = static_cast<std::size_t>(n);
            const double dp = mp.p[i] - mp.p[i - 1];
            cost += (mp.a - mp.theta[i - 1]) * dp;
            profit += (mp.v - mp.p[i]) * (mp.theta[i] - mp.theta[i - 1]);
        }
        const double av = mp.a * mp.v;
        f[base_scalar + 0] = cost;
        f[base_scalar + 1] = profit;
        f[base_scalar + 2] = profit - (slope * mp.a * mp.a - cost);
        f[base_scalar + 3] = std::fabs(profit - (av - cost));
        f[base_scalar + 4] =
            std::fabs(mp.theta[static_cast<std::size_t>(N)] - mp.a);
        f[base_scalar + 5] = std::fabs(mp.q[static_cast<std::size_t>(N)]);
    };

    const Accumulator acc = accumulate_paths(sol, cfg, width, nullptr, fill);
    std::vector<StatCheck> checks;

    const auto zstat = [&](std::size_t i, double target) {
        const double se = acc.se(i);
        const double gap = std::fabs(acc.mean(i) - target);
        if (se > 0 && std::isfinite(se)) return gap / se;
        return gap == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    };

    {
        const double worst =
            std::max(acc.mean(base_scalar + 4), acc.mean(base_scalar + 5));
        checks.push_back({"terminal-target-exact", worst, 0.0, worst == 0.0, false, ""});
    }
    {
        double w1 = 0, w2s = 0;
        for (int n = 0; n <= N - 1; ++n) {
            const std::size_t i = static_cast<std::size_t>(n);
            w1 = std::max(w1, zstat(i, sol.moment(n).sigma1));
            w2s = std::max(w2s,
                           zstat(static_cast<std::size_t>(N) + i, sol.moment(n).sigma2));
        }
        checks.push_back({"sigma1-vs-solver", w1, 3.0, w1 <= 3.0, true, ""});
        checks.push_back({"sigma2-vs-solver", w2s, 3.0, w2s <= 3.0, true, ""});
    }
    {
        double worst = 0;
        for (int p = 0; p < P2; ++p)
            worst = std::max(worst, zstat(base_zz + static_cast<std::size_t>(p), 0.0));
        checks.push_back(
            {"innovation-orthogonality", worst, 3.0, worst <= 3.0, true, ""});
    }
    {
        double worst = 0;
        for (int n = 1; n <= N; ++n)
            worst = std::max(worst, zstat(static_cast<std::size_t>(2 * N + n - 1), 0.0));
        for (int p = 0; p < P2; ++p)
            worst = std::max(worst, zstat(base_dpy + static_cast<std::size_t>(p), 0.0));
        checks.push_back({"price-martingale", worst, 3.0, worst <= 3.0, true, ""});
    }
    {
        double worst = 0;
        for (int p = 0; p < P2; ++p)
            worst = std::max(worst, zstat(base_xz + static_cast<std::size_t>(p), 0.0));
        checks.push_back(
            {"residual-innovation-orthogonality", worst, 3.0, worst <= 3.0, true, ""});
    }
    {
        const double z = zstat(base_scalar + 0, equilibrium_cost(sol));
        checks.push_back({"cost-vs-oracle", z, 3.0, z <= 3.0, true, ""});
    }
    {
        const double scale = std::max(
            {1.0, std::fabs(acc.mean(base_scalar + 0)), std::fabs(acc.mean(base_scalar + 1))});
        const double se = std::max(acc.se(base_scalar + 2), 1e-13 * scale);
        const double z = std::fabs(acc.mean(base_scalar + 2)) / se;
        checks.push_back({"profit-identity", z, 3.0, z <= 3.0, true, ""});
        const double abel = acc.mean(base_scalar + 3);
        const double abel_limit = 1e-12 * scale;
        checks.push_back({"profit-decomposition-pathwise", abel, abel_limit,
                          abel <= abel_limit, false, ""});
    }
    return checks;
}

}  // namespace detail

// Full statistical verification. A statistical check that fails at the given
// seed is retried once at a derived seed and only counts as a failure if it
// fails both times; one 3-sigma excursion among dozens of z-statistics is
// expected behavior, two in a row on independent draws is not.
inline SimReport verify_statistics(const EquilibriumSolution& sol,
                                   const SimConfig& raw) {
    const SimConfig cfg = validate(raw);
    SimReport rep;
    rep.paths = cfg.paths;
    rep.seed = cfg.seed;
    rep.antithetic = cfg.antithetic;
    rep.checks = detail::run_stat_battery(sol, cfg);

    bool rerun_needed = false;
    for (const StatCheck& c : rep.checks)
        if (!c.pass && c.statistical) rerun_needed = true;

    if (rerun_needed) {
        SimConfig cfg2 = cfg;
        cfg2.seed = cfg.seed + 0x9E3779B97F4A7C15ULL;
        const std::vector<StatCheck> confirm = detail::run_stat_battery(sol, cfg2);
        for (std::size_t i = 0; i < rep.checks.size(); ++i) {
            StatCheck& c = rep.checks[i];
            if (c.pass || !c.statistical) continue;
            if (confirm[i].pass) {
                c.pass = true;
                c.note = "3-sigma excursion at primary seed; passed on confirmation seed";
            } else {
                c.note = "failed on both primary and confirmation seeds";
            }
        }
    }
    for (const StatCheck& c : rep.checks) rep.all_pass = rep.all_pass && c.pass;
    return rep;
}

}  // namespace kyleq
