#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <sstream>
#include <vector>

#include "kyleq/errors.hpp"
#include "kyleq/model.hpp"

// Backward construction of the equilibrium coefficient sequences. Given
// candidate pre-terminal moments (a, b) = (sigma1, sigma2) at date N-1, the
// terminal condition pins down the date-N price impact and the value
// constants at N-1; each earlier date is then obtained by solving a cubic in
// xi_n inside a proven bracket and stepping the moment/value recursions back
// one date. The map (a, b) -> (sigma1_0, sigma2_0) is what the shooting
// layer inverts.

namespace kyleq {

// Inputs to one interior stage: post-trade date-n moments and value constants.
struct StageState {
    int n;
    MomentPair moment;
    ValueCoefficients value;
    double sigma_w2;
};

struct TerminalStage {
    double lambda;            // price impact at the forced final trade
    ValueCoefficients value;  // (I, J, K) at date N-1
    StageCoefficients stage;  // date-N coefficients
};

inline TerminalStage terminal_stage(double a, double b, const ModelParams& params) {
    detail::require_finite(a, "sigma1 at N-1");
    detail::require_finite(b, "sigma2 at N-1");
    if (!(a > 0)) throw domain_error("terminal_stage needs sigma1 > 0");
    if (!(b > 0)) throw domain_error("terminal_stage needs sigma2 > 0");
    const double lambda = b / (a + params.sigma_w2());
    return TerminalStage{lambda, ValueCoefficients(lambda, lambda, 0.0),
                         StageCoefficients::terminal(params.n, lambda)};
}

// Coefficients of the stage cubic in ascending order: c[0] + c[1] x + c[2] x^2
// + c[3] x^3. Expanding them reproduces
//   f(x) = 2 (I + s1 (I-J) x)(s1 x^2 - 1) + x (1+x)(s2 - s1 J),
// with s1 = sigma1/sigma_w^2 and s2 = sigma2/sigma_w^2. The leading
// coefficient 2 s1^2 (I-J) is nonpositive along any valid trajectory.
inline std::array<double, 4> cubic_coefficients(const StageState& s) {
    const double s1 = s.moment.sigma1 / s.sigma_w2;
    const double s2 = s.moment.sigma2 / s.sigma_w2;
    const double I = s.value.I;
    const double J = s.value.J;
    const double g = s2 - s1 * J;  // the (1+x) x group
    return {-2.0 * I, g - 2.0 * s1 * (I - J), 2.0 * s1 * I + g,
            2.0 * s1 * s1 * (I - J)};
}

inline double cubic_eval(const std::array<double, 4>& c, double x) {
    return ((c[3] * x + c[2]) * x + c[1]) * x + c[0];
}

inline double cubic_deriv(const std::array<double, 4>& c, double x) {
    return (3.0 * c[3] * x + 2.0 * c[2]) * x + c[1];
}

// Open upper end of the root bracket, sqrt(sigma_w^2 / sigma1).
inline double xi_upper_bound(const StageState& s) {
    return std::sqrt(s.sigma_w2 / s.moment.sigma1);
}

// Unique root of the stage cubic in (0, xi_upper_bound). Bracketed bisection
// down to a relative width of 1e-14, then a few bracket-safeguarded Newton
// steps. The endpoint signs are rechecked on entry: a wrong sign means the
// incoming state violates the inequalities the construction guarantees.
inline double solve_xi(const StageState& s, double tol_root = Tolerances{}.tol_root) {
    const auto c = cubic_coefficients(s);
    double lo = 0.0;
    double hi = xi_upper_bound(s);
    double flo = cubic_eval(c, lo);
    const double fhi = cubic_eval(c, hi);
    if (!(flo < 0.0) || !(fhi > 0.0)) {
        std::ostringstream os;
        os << "stage " << s.n << ": root bracket invalid, f(0) = " << flo
           << ", f(" << hi << ") = " << fhi;
        throw bracket_error(os.str());
    }

    for (int it = 0; it < 200 && (hi - lo) > 1e-14 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fmid = cubic_eval(c, mid);
        if (fmid < 0.0) {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }

    double x = 0.5 * (lo + hi);
    double fx = cubic_eval(c, x);
    for (int it = 0; it < 4; ++it) {
        const double dfx = cubic_deriv(c, x);
        if (dfx == 0.0) break;
        const double next = x - fx / dfx;
        if (!(next > lo && next < hi)) break;
        const double fnext = cubic_eval(c, next);
        if (!(std::fabs(fnext) < std::fabs(fx))) break;
        x = next;
        fx = fnext;
    }

    const double scale = std::max({std::fabs(s.value.I), std::fabs(s.value.J), 1.0});
    if (!(std::fabs(fx) <= tol_root * scale)) {
        std::ostringstream os;
        os << "stage " << s.n << ": root residual " << fx << " exceeds tolerance";
        throw convergence_error(os.str());
    }
    return x;
}

struct StepBack {
    double lambda;
    double r;
    MomentPair moment;        // at date n-1
    ValueCoefficients value;  // at date n-1
};

// One backward step: price impact and filter gain at date n, then the date
// n-1 moments and value constants.
inline StepBack step_back(const StageState& s, double xi) {
    const double w2 = s.sigma_w2;
    const double s1v = s.moment.sigma1;
    const double s2v = s.moment.sigma2;
    const double denom = w2 - s1v * xi * xi;
    if (denom < 1e-14 * w2) {
        std::ostringstream os;
        os << "stage " << s.n << ": sigma_w^2 - sigma1 xi^2 = " << denom
           << " too close to singular";
        throw domain_error(os.str());
    }

    const double lambda = s2v * xi / w2;
    const double r = s1v * xi / w2;
    const double one_xi = 1.0 + xi;

    const double prev_s1 = w2 * s1v * one_xi * one_xi / denom;
    const double prev_s2 = w2 * s2v * one_xi / denom;

    const double scale = w2 * w2 * one_xi * one_xi;
    const double prev_I = (denom * (w2 + 2.0 * w2 * xi + s1v * xi * xi) * s.value.I +
                           s1v * (w2 + s1v * xi) * xi * xi * xi * s.value.J) /
                          scale;
    const double prev_J = lambda / (1.0 + r);
    const double prev_K = s.value.K + (s.value.I - s.value.J) * r * r * w2;

    return StepBack{lambda, r, MomentPair(prev_s1, prev_s2),
                    ValueCoefficients(prev_I, prev_J, prev_K)};
}

// Second-order condition at a solved stage: (1+r)((1+r)I - r J) must be
// strictly positive. Cross-checked against the closed form that the stage
// cubic implies at its root,
//   (1+r)I - r J = sigma_w^2 xi (1+xi)(1+xi_next) sigma2
//                  / (2 (sigma_w^2 - sigma1 xi^2)((sigma1+sigma_w^2) xi_next + sigma_w^2)),
// taken in the xi_next -> infinity limit when the next date is the terminal
// one. Returns the directly computed value.
inline double check_soc(const StageState& s, double xi, double r,
                        std::optional<double> xi_next,
                        double tol_id = Tolerances{}.tol_id) {
    const double inner = (1.0 + r) * s.value.I - r * s.value.J;
    const double direct = (1.0 + r) * inner;
    if (!(direct > 0.0)) {
        std::ostringstream os;
        os << "stage " << s.n << ": second-order condition violated, value " << direct;
        throw soc_error(os.str());
    }

    const double w2 = s.sigma_w2;
    const double denom = w2 - s.moment.sigma1 * xi * xi;
    double closed;
    if (xi_next) {
        closed = w2 * xi * (1.0 + xi) * (1.0 + *xi_next) * s.moment.sigma2 /
                 (2.0 * denom * ((s.moment.sigma1 + w2) * *xi_next + w2));
    } else {
        closed = w2 * xi * (1.0 + xi) * s.moment.sigma2 /
                 (2.0 * denom * (s.moment.sigma1 + w2));
    }
    // inner is a difference of two like-sized terms, so measure the error
    // against those terms: that is the accuracy the arithmetic can deliver.
    const double err = std::fabs(inner - closed);
    const double scale = std::max({std::fabs((1.0 + r) * s.value.I),
                                   std::fabs(r * s.value.J), std::fabs(closed),
                                   1e-300});
    if (!(err <= tol_id * scale)) {
        std::ostringstream os;
        os << "stage " << s.n << ": second-order closed form disagrees, direct "
           << inner << " vs " << closed;
        throw soc_error(os.str());
    }
    return direct;
}

// Full backward trajectory from a candidate (a, b) at date N-1.
struct BackwardRun {
    double a = 0;
    double b = 0;
    double lambda_terminal = 0;         // price impact at date N
    std::vector<double> xi;             // dates 1..N-1 at index n-1
    std::vector<double> lambda;         // dates 1..N-1 at index n-1
    std::vector<double> r;              // dates 1..N-1 at index n-1
    std::vector<MomentPair> moments;    // dates 0..N-1 at index n
    std::vector<ValueCoefficients> values;  // dates 0..N-1 at index n

    double sigma0_1() const { return moments.front().sigma1; }  // Phi(a, b)
    double sigma0_2() const { return moments.front().sigma2; }  // Psi(a, b)
};

namespace detail {

// The moment/value trajectories must satisfy sigma2/sigma_w^2 - (sigma1/
// sigma_w^2) J = (1+xi_next) sigma2 / ((sigma1+sigma_w^2) xi_next + sigma_w^2)
// at every date (xi_next -> infinity limit at date N-1). A violation beyond
// tol_id means the recursion state is inconsistent.
inline void check_moment_value_link(const StageState& s, std::optional<double> xi_next,
                                    double tol_id) {
    const double w2 = s.sigma_w2;
    const double t1 = s.moment.sigma2 / w2;
    const double t2 = (s.moment.sigma1 / w2) * s.value.J;
    const double lhs = t1 - t2;
    double rhs;
    if (xi_next) {
        rhs = (1.0 + *xi_next) * s.moment.sigma2 /
              ((s.moment.sigma1 + w2) * *xi_next + w2);
    } else {
        rhs = s.moment.sigma2 / (s.moment.sigma1 + w2);
    }
    // lhs cancels heavily when sigma2 ~ sigma1 J, so judge the error against
    // the terms being subtracted rather than the (tiny) result.
    const double err = std::fabs(lhs - rhs);
    const double scale = std::max({std::fabs(t1), std::fabs(t2), std::fabs(rhs), 1e-300});
    if (!(err <= tol_id * scale)) {
        std::ostringstream os;
        os << "stage " << s.n << ": moment/value link identity off by " << err;
        throw domain_error(os.str());
    }
}

}  // namespace detail

inline BackwardRun run_backward(double a, double b, const ModelParams& params,
                                const Tolerances& tol = Tolerances{}) {
    if (params.n < 2)
        throw invalid_parameter_error("run_backward requires n >= 2");
    const int N = params.n;
    const double w2 = params.sigma_w2();

    BackwardRun out;
    out.a = a;
    out.b = b;
    out.xi.resize(static_cast<std::size_t>(N - 1));
    out.lambda.resize(static_cast<std::size_t>(N - 1));
    out.r.resize(static_cast<std::size_t>(N - 1));
    out.moments.reserve(static_cast<std::size_t>(N));
    out.values.reserve(static_cast<std::size_t>(N));

    const TerminalStage term = terminal_stage(a, b, params);
    out.lambda_terminal = term.lambda;

    MomentPair moment(a, b);
    ValueCoefficients value = term.value;
    std::optional<double> xi_next;  // absent only above the terminal date

    std::vector<MomentPair> moments_rev;
    std::vector<ValueCoefficients> values_rev;
    moments_rev.push_back(moment);
    values_rev.push_back(value);

    for (int n = N - 1; n >= 1; --n) {
        const StageState state{n, moment, value, w2};
        detail::check_moment_value_link(state, xi_next, tol.tol_id);
        const double xi = solve_xi(state, tol.tol_root);
        const StepBack step = step_back(state, xi);
        check_soc(state, xi, step.r, xi_next, tol.tol_id);
        if (!(step.moment.sigma1 > moment.sigma1)) {
            std::ostringstream os;
            os << "stage " << n << ": sigma1 failed to grow backward";
            throw domain_error(os.str());
        }
        if (!(step.value.J >= step.value.I)) {
            std::ostringstream os;
            os << "stage " << n << ": J < I after step";
            throw domain_error(os.str());
        }

        out.xi[static_cast<std::size_t>(n - 1)] = xi;
        out.lambda[static_cast<std::size_t>(n - 1)] = step.lambda;
        out.r[static_cast<std::size_t>(n - 1)] = step.r;
        moments_rev.push_back(step.moment);
        values_rev.push_back(step.value);

        moment = step.moment;
        value = step.value;
        xi_next = xi;
    }

    // Recorded deepest-first; flip to date order 0..N-1.
    for (auto it = moments_rev.rbegin(); it != moments_rev.rend(); ++it)
        out.moments.push_back(*it);
    for (auto it = values_rev.rbegin(); it != values_rev.rend(); ++it)
        out.values.push_back(*it);
    return out;
}

}  // namespace kyleq
