#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "kyleq/backward.hpp"
#include "kyleq/errors.hpp"
#include "kyleq/log.hpp"
#include "kyleq/model.hpp"

// Boundary matching. The backward map takes the pre-terminal moments (a, b)
// to the implied date-0 moments (Phi(a,b), Psi(a,b)); the equilibrium needs
// Phi = sigma_a^2 and Psi = rho sigma_a sigma_v. Because Phi(a, cb) =
// Phi(a, b) and Psi(a, cb) = c Psi(a, b), it suffices to search over a with
// b = 1 fixed, then rescale b afterwards. That collapses the 2-d boundary
// value problem to a 1-d bracketed root search.

namespace kyleq {

inline double phi_of_a(double a, const ModelParams& params,
                       const Tolerances& tol = Tolerances{}) {
    return run_backward(a, 1.0, params, tol).sigma0_1();
}

struct ShootingResult {
    double a_hat = 0;
    double b_hat = 0;
    BackwardRun run;  // replay at (a_hat, b_hat)
    double residual_phi = 0;
    double residual_psi = 0;
    std::vector<std::string> warnings;
};

// Relative mismatches of the scaling identity at one random probe; used by
// the verification suite.
struct ScalingResidual {
    double phi_rel = 0;
    double psi_rel = 0;
};

inline ScalingResidual scaling_residual(double a, double b, double c,
                                        const ModelParams& params,
                                        const Tolerances& tol = Tolerances{}) {
    const BackwardRun base = run_backward(a, b, params, tol);
    const BackwardRun scaled = run_backward(a, c * b, params, tol);
    ScalingResidual out;
    out.phi_rel = std::fabs(scaled.sigma0_1() - base.sigma0_1()) /
                  std::fabs(base.sigma0_1());
    out.psi_rel = std::fabs(scaled.sigma0_2() - c * base.sigma0_2()) /
                  std::fabs(c * base.sigma0_2());
    return out;
}

inline ShootingResult solve_boundary(const ModelParams& params,
                                     const Tolerances& tol = Tolerances{}) {
    if (params.n < 2)
        throw invalid_parameter_error("solve_boundary requires n >= 2");
    const double target = params.sigma_a * params.sigma_a;
    const auto residual = [&](double a) { return phi_of_a(a, params, tol) - target; };

    ShootingResult out;

    // Geometric scan from a0 = sigma_a^2 / 2. Phi(a, 1) > a forces the
    // residual positive for large a and (by the vanishing small-a limit)
    // negative for small a, so marching in the indicated direction must
    // produce a sign change.
    const double a0 = 0.5 * target;
    const double f0 = residual(a0);
    double lo = 0, hi = 0, flo = 0;
    const int max_steps = 200;
    const double factor = (f0 < 0.0) ? 2.0 : 0.5;
    bool bracketed = false;
    double a_prev = a0, f_prev = f0;
    int steps_used = 0;
    for (int k = 1; k <= max_steps; ++k) {
        const double a_next = a_prev * factor;
        const double f_next = residual(a_next);
        log(2, "bracket scan: a = ", a_next, " residual = ", f_next);
        if ((f_prev < 0.0) != (f_next < 0.0)) {
            if (f_prev < 0.0) {
                lo = a_prev;
                hi = a_next;
                flo = f_prev;
            } else {
                lo = a_next;
                hi = a_prev;
                flo = f_next;
            }
            bracketed = true;
            steps_used = k;
            break;
        }
        a_prev = a_next;
        f_prev = f_next;
    }
    if (!bracketed)
        throw bracket_error("boundary search found no sign change in 200 steps");

    // Uniqueness of the matching a is not established, only existence. Keep
    // scanning a short way past the first bracket; a further sign change
    // means multiple candidate roots, which the caller should know about.
    {
        double a_scan = (factor > 1.0) ? hi : lo;
        double f_scan = residual(a_scan);
        for (int k = steps_used + 1; k <= std::min(steps_used + 8, max_steps); ++k) {
            const double a_next = a_scan * factor;
            const double f_next = residual(a_next);
            if ((f_scan < 0.0) != (f_next < 0.0)) {
                std::ostringstream os;
                os << "boundary residual changes sign again near a = " << a_next
                   << "; using the root from the first bracket";
                out.warnings.push_back(os.str());
                break;
            }
            a_scan = a_next;
            f_scan = f_next;
        }
    }

    // Plain bisection: the per-evaluation cost is tiny and the bracket is
    // guaranteed, so robustness wins over iteration count.
    double fmid = 0;
    double mid = 0.5 * (lo + hi);
    for (int it = 0; it < 300; ++it) {
        mid = 0.5 * (lo + hi);
        fmid = residual(mid);
        if (std::fabs(fmid) <= 0.5 * tol.tol_shoot * target) break;
        if ((fmid < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
        if (hi - lo <= 8.0 * std::numeric_limits<double>::epsilon() * mid) break;
    }
    out.a_hat = mid;
    log(1, "boundary root a_hat = ", out.a_hat, " residual ", fmid);

    const double psi1 = run_backward(out.a_hat, 1.0, params, tol).sigma0_2();
    out.b_hat = params.rho * params.sigma_a * params.sigma_v / psi1;

    out.run = run_backward(out.a_hat, out.b_hat, params, tol);
    out.residual_phi = std::fabs(out.run.sigma0_1() - target) / target;
    const double target2 = params.rho * params.sigma_a * params.sigma_v;
    out.residual_psi = std::fabs(out.run.sigma0_2() - target2) / target2;
    if (!(out.residual_phi <= tol.tol_shoot) || !(out.residual_psi <= tol.tol_shoot)) {
        std::ostringstream os;
        os << "boundary match residuals " << out.residual_phi << ", "
           << out.residual_psi << " exceed tolerance " << tol.tol_shoot;
        throw convergence_error(os.str());
    }
    return out;
}

}  // namespace kyleq
