#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "kyleq/errors.hpp"

namespace kyleq {

namespace detail {

inline double require_finite(double x, const char* what) {
    if (!std::isfinite(x)) {
        std::ostringstream os;
        os << what << " must be finite (got " << x << ")";
        throw invalid_parameter_error(os.str());
    }
    return x;
}

template <typename T>
[[noreturn]] inline void fail_bound(const char* what, const char* bound, T got) {
    std::ostringstream os;
    os << what << " must satisfy " << bound << " (got " << got << ")";
    throw invalid_parameter_error(os.str());
}

}  // namespace detail

// Exogenous primitives: N trading dates, target ~ N(0, sigma_a^2), value
// ~ N(0, sigma_v^2) with correlation rho, per-date noise variance sigma_w^2.
struct ModelParams {
    int n = 1;
    double sigma_a = 3.0;
    double sigma_v = 1.0;
    double sigma_w = 1.0;
    double rho = 1.0 / 3.0;

    double sigma_w2() const { return sigma_w * sigma_w; }
};

inline ModelParams validate(ModelParams p) {
    if (p.n < 1) detail::fail_bound("n", "n >= 1", p.n);
    detail::require_finite(p.sigma_a, "sigma_a");
    detail::require_finite(p.sigma_v, "sigma_v");
    detail::require_finite(p.sigma_w, "sigma_w");
    detail::require_finite(p.rho, "rho");
    if (!(p.sigma_a > 0)) detail::fail_bound("sigma_a", "sigma_a > 0", p.sigma_a);
    if (!(p.sigma_v > 0)) detail::fail_bound("sigma_v", "sigma_v > 0", p.sigma_v);
    if (!(p.sigma_w > 0)) detail::fail_bound("sigma_w", "sigma_w > 0", p.sigma_w);
    if (!(p.rho > 0 && p.rho <= 1)) detail::fail_bound("rho", "0 < rho <= 1", p.rho);
    return p;
}

// Explicit tolerances; stored alongside every solution so precision is auditable.
struct Tolerances {
    double tol_root = 1e-12;   // scaled residual bound for the per-stage root
    double tol_id = 1e-10;     // relative bound for algebraic identity checks
    double tol_shoot = 1e-10;  // relative bound on the boundary match
};

// Backward-propagated second moments at one date:
//   sigma1 = E[(a - theta_n - q_n)^2], sigma2 = E[(a - theta_n - q_n)(v - p_n)].
struct MomentPair {
    double sigma1;
    double sigma2;

    MomentPair(double s1, double s2) : sigma1(s1), sigma2(s2) {
        detail::require_finite(s1, "sigma1");
        detail::require_finite(s2, "sigma2");
        if (!(s1 > 0)) detail::fail_bound("sigma1", "sigma1 > 0", s1);
        if (!(s2 > 0)) detail::fail_bound("sigma2", "sigma2 > 0", s2);
    }
};

// Quadratic value-function constants: remaining expected cost at date n is
// I*(a-theta_n-q_n)^2 + J*(a-theta_n-q_n)*q_n + K.
struct ValueCoefficients {
    double I;
    double J;
    double K;

    ValueCoefficients(double i, double j, double k) : I(i), J(j), K(k) {
        detail::require_finite(i, "I");
        detail::require_finite(j, "J");
        detail::require_finite(k, "K");
        if (!(i > 0)) detail::fail_bound("I", "I > 0", i);
        if (!(j > 0)) detail::fail_bound("J", "J > 0", j);
        if (!(k <= 0)) detail::fail_bound("K", "K <= 0", k);
    }
};

// Per-date equilibrium constants. xi is the canonical interior unknown; beta
// is always derived from it, so the two cannot drift apart. The terminal date
// has no xi and carries beta = alpha = 1, r = 0.
struct StageCoefficients {
    int n;
    std::optional<double> xi;
    double beta;
    double alpha;
    double lambda;
    double r;

    static StageCoefficients interior(int n, double xi, double alpha, double lambda,
                                      double r) {
        detail::require_finite(xi, "xi");
        detail::require_finite(alpha, "alpha");
        detail::require_finite(lambda, "lambda");
        detail::require_finite(r, "r");
        if (n < 1) detail::fail_bound("n", "n >= 1", n);
        if (!(xi > 0)) detail::fail_bound("xi", "xi > 0", xi);
        if (!(lambda > 0)) detail::fail_bound("lambda", "lambda > 0", lambda);
        if (!(r > 0)) detail::fail_bound("r", "r > 0", r);
        return StageCoefficients{n, xi, xi / (1.0 + xi), alpha, lambda, r};
    }

    static StageCoefficients terminal(int n, double lambda) {
        detail::require_finite(lambda, "lambda");
        if (n < 1) detail::fail_bound("n", "n >= 1", n);
        if (!(lambda > 0)) detail::fail_bound("lambda", "lambda > 0", lambda);
        return StageCoefficients{n, std::nullopt, 1.0, 1.0, lambda, 0.0};
    }

  private:
    StageCoefficients(int n_, std::optional<double> xi_, double beta_, double alpha_,
                      double lambda_, double r_)
        : n(n_), xi(xi_), beta(beta_), alpha(alpha_), lambda(lambda_), r(r_) {}
};

// Complete solved equilibrium: coefficient sequence for dates 1..N, moments and
// value constants for dates 0..N-1, plus the shooting targets and residuals.
struct EquilibriumSolution {
    ModelParams params;
    std::vector<StageCoefficients> stages;  // date n = 1..N at index n-1
    std::vector<MomentPair> moments;        // date n = 0..N-1 at index n
    std::vector<ValueCoefficients> values;  // date n = 0..N-1 at index n
    double a_hat = 0;
    double b_hat = 0;
    double residual_phi = 0;
    double residual_psi = 0;
    Tolerances tol;
    std::vector<std::string> warnings;

    int n_dates() const { return params.n; }

    const StageCoefficients& stage(int n) const {  // date index, 1-based
        if (n < 1 || n > static_cast<int>(stages.size()))
            throw std::out_of_range("stage index out of range");
        return stages[static_cast<std::size_t>(n - 1)];
    }
    const MomentPair& moment(int n) const {  // date index, 0-based
        if (n < 0 || n >= static_cast<int>(moments.size()))
            throw std::out_of_range("moment index out of range");
        return moments[static_cast<std::size_t>(n)];
    }
    const ValueCoefficients& value(int n) const {  // date index, 0-based
        if (n < 0 || n >= static_cast<int>(values.size()))
            throw std::out_of_range("value index out of range");
        return values[static_cast<std::size_t>(n)];
    }
};

// One simulated realization. theta/p/q run over dates 0..N; dw/y/z over 1..N
// (stored at index n-1).
struct MarketPath {
    double a = 0;
    double v = 0;
    std::vector<double> dw;
    std::vector<double> theta;
    std::vector<double> y;
    std::vector<double> p;
    std::vector<double> q;
    std::vector<double> z;
};

// Trade intensities (beta'_n, alpha'_n) for dates 1..N-1. The terminal trade
// is always the forced one, so date N has no entry.
struct LinearStrategy {
    std::vector<double> beta_dev;
    std::vector<double> alpha_dev;

    LinearStrategy(std::vector<double> beta, std::vector<double> alpha)
        : beta_dev(std::move(beta)), alpha_dev(std::move(alpha)) {
        if (beta_dev.size() != alpha_dev.size())
            throw dimension_error("beta_dev and alpha_dev must have equal length");
        for (double b : beta_dev) detail::require_finite(b, "beta_dev entry");
        for (double a : alpha_dev) detail::require_finite(a, "alpha_dev entry");
    }

    std::size_t size() const { return beta_dev.size(); }
};

}  // namespace kyleq
