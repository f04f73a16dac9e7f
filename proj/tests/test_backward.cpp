#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "kyleq/backward.hpp"

using namespace kyleq;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

ModelParams params_n(int n, double sigma_w) {
    ModelParams p;
    p.n = n;
    p.sigma_a = 3.0;
    p.sigma_v = 1.0;
    p.sigma_w = sigma_w;
    p.rho = 1.0 / 3.0;
    return p;
}

}  // namespace

TEST_CASE("terminal stage is the conditional-expectation slope", "[backward]") {
    // lambda_N = sigma2 / (sigma1 + sigma_w^2): regression of the value shortfall
    // on the final order flow, whose variance is sigma1 + sigma_w^2.
    const ModelParams p = params_n(3, 1.0);
    const TerminalStage t = terminal_stage(9.0, 1.0, p);
    CHECK(t.lambda == 0.1);
    CHECK(t.value.I == t.lambda);
    CHECK(t.value.J == t.lambda);
    CHECK(t.value.K == 0.0);
    CHECK(t.stage.beta == 1.0);
    CHECK(t.stage.alpha == 1.0);
    CHECK(t.stage.r == 0.0);
    CHECK_FALSE(t.stage.xi.has_value());

    CHECK(terminal_stage(1.0, 1.0, p).lambda == 0.5);

    CHECK_THROWS_AS(terminal_stage(0.0, 1.0, p), domain_error);
    CHECK_THROWS_AS(terminal_stage(-1.0, 1.0, p), domain_error);
    CHECK_THROWS_AS(terminal_stage(1.0, 0.0, p), domain_error);
}

TEST_CASE("cubic coefficients expand the factored stage polynomial", "[backward]") {
    const StageState s{2, MomentPair(2.0, 0.7), ValueCoefficients(0.35, 0.5, -0.1),
                       1.69};
    const auto c = cubic_coefficients(s);
    const double s1 = 2.0 / 1.69;
    const double s2 = 0.7 / 1.69;
    for (double x : {0.0, 0.05, 0.31, 0.5, 0.77, 0.9}) {
        const double factored = 2.0 * (0.35 + s1 * (0.35 - 0.5) * x) * (s1 * x * x - 1.0) +
                                x * (1.0 + x) * (s2 - s1 * 0.5);
        CHECK_THAT(cubic_eval(c, x), WithinAbs(factored, 1e-15));
    }
    CHECK(cubic_eval(c, 0.0) == -2.0 * 0.35);  // f(0) = -2I exactly
    CHECK_THAT(cubic_deriv(c, 0.4), WithinRel((cubic_eval(c, 0.4 + 1e-7) -
                                               cubic_eval(c, 0.4 - 1e-7)) /
                                                  2e-7,
                                              1e-6));
}

// At the step just below the terminal date, I = J makes the cubic degenerate
// to lambda ((1 + 2 s1) xi^2 + xi - 2). Two consequences pin the anchors: at
// sigma1 = sigma_w^2 the root is exactly 2/3, and as sigma1 -> 0 it tends to 1.
TEST_CASE("first backward stage reduces to a quadratic with known roots",
          "[backward]") {
    const ModelParams p = params_n(2, 1.0);

    SECTION("xi = 2/3 anchor at sigma1 = sigma_w^2") {
        for (double b : {0.1, 0.5, 1.0, 2.3}) {
            const TerminalStage t = terminal_stage(1.0, b, p);
            const StageState s{1, MomentPair(1.0, b), t.value, 1.0};
            const auto c = cubic_coefficients(s);
            CHECK_THAT(c[3], WithinAbs(0.0, 1e-18));  // cubic term vanishes when I = J
            // quadratic form lambda ((1+2 s1) xi^2 + xi - 2) with s1 = 1
            for (double x : {0.1, 0.3, 0.6}) {
                CHECK_THAT(cubic_eval(c, x),
                           WithinRel(t.lambda * (3.0 * x * x + x - 2.0), 1e-13));
            }
            CHECK_THAT(solve_xi(s), WithinAbs(2.0 / 3.0, 1e-12));
        }
    }

    SECTION("xi -> 1 as the informational state vanishes") {
        const double a = 1e-12;
        const TerminalStage t = terminal_stage(a, 1.0, p);
        const StageState s{1, MomentPair(a, 1.0), t.value, 1.0};
        CHECK_THAT(solve_xi(s), WithinAbs(1.0, 1e-11));
    }
}

TEST_CASE("solve_xi brackets, converges, and rejects impossible states",
          "[backward]") {
    // Admissible by construction: sigma2 > sigma1 J keeps the cubic positive
    // at the upper endpoint, and J >= I as the recursion maintains.
    const StageState s{3, MomentPair(2.0, 0.7), ValueCoefficients(0.25, 0.3, -0.1),
                       1.0};
    const double xi = solve_xi(s);
    CHECK(xi > 0.0);
    CHECK(xi < xi_upper_bound(s));
    CHECK(std::fabs(cubic_eval(cubic_coefficients(s), xi)) <= 1e-12);

    // With sigma2 <= sigma1 J the polynomial is negative at the upper endpoint
    // too, so no admissible root exists and the solver must say so.
    const StageState bad{3, MomentPair(1.0, 0.1), ValueCoefficients(0.05, 10.0, 0.0),
                         1.0};
    CHECK_THROWS_AS(solve_xi(bad), bracket_error);
    CHECK_THROWS_WITH(solve_xi(bad), Catch::Matchers::ContainsSubstring("bracket"));
}

// Hand-worked rational step: sigma_w = 1, (sigma1, sigma2) = (1, 1/2) at the
// pre-terminal date. Then lambda_N = 1/4, I = J = 1/4, xi = 2/3, and the
// backward step gives lambda = 1/3, r = 2/3, previous moments (5, 3/2),
// previous values I = 11/60, J = 1/5, K = 0.
TEST_CASE("step_back matches a fully hand-computed stage", "[backward]") {
    const ModelParams p = params_n(2, 1.0);
    const TerminalStage t = terminal_stage(1.0, 0.5, p);
    REQUIRE(t.lambda == 0.25);
    const StageState s{1, MomentPair(1.0, 0.5), t.value, 1.0};
    const double xi = solve_xi(s);
    REQUIRE_THAT(xi, WithinAbs(2.0 / 3.0, 1e-12));

    const StepBack step = step_back(s, xi);
    CHECK_THAT(step.lambda, WithinRel(1.0 / 3.0, 1e-12));
    CHECK_THAT(step.r, WithinRel(2.0 / 3.0, 1e-12));
    CHECK_THAT(step.moment.sigma1, WithinRel(5.0, 1e-12));
    CHECK_THAT(step.moment.sigma2, WithinRel(1.5, 1e-12));
    CHECK_THAT(step.value.I, WithinRel(11.0 / 60.0, 1e-12));
    CHECK_THAT(step.value.J, WithinRel(0.2, 1e-12));
    CHECK(step.value.K == 0.0);

    // closed-form value gap: I' - J' = -(lambda - r J)^2 / (4 (1+r)((1+r) I - r J))
    const double num = -(step.lambda - step.r * s.value.J) *
                       (step.lambda - step.r * s.value.J);
    const double den = 4.0 * (1.0 + step.r) *
                       ((1.0 + step.r) * s.value.I - step.r * s.value.J);
    CHECK_THAT(step.value.I - step.value.J, WithinRel(num / den, 1e-12));
    CHECK_THAT(step.value.I - step.value.J, WithinRel(-1.0 / 60.0, 1e-12));

    // second-order condition agrees with its closed form (terminal limit)
    const double soc = check_soc(s, xi, step.r, std::nullopt);
    CHECK(soc > 0.0);
    CHECK_THAT(soc, WithinRel((1.0 + step.r) *
                                  ((1.0 + step.r) * s.value.I - step.r * s.value.J),
                              1e-15));
}

TEST_CASE("step_back refuses the singular filter denominator", "[backward]") {
    const StageState s{2, MomentPair(1.0, 0.5), ValueCoefficients(0.25, 0.25, 0.0),
                       1.0};
    CHECK_THROWS_AS(step_back(s, 1.0), domain_error);  // sigma_w^2 - sigma1 xi^2 = 0
}

TEST_CASE("run_backward inflates sigma1 and keeps J >= I", "[backward]") {
    const ModelParams p = params_n(6, 0.8);
    const BackwardRun run = run_backward(0.4, 0.9, p);
    REQUIRE(run.moments.size() == 6);
    REQUIRE(run.values.size() == 6);
    REQUIRE(run.xi.size() == 5);

    CHECK(run.moments.back().sigma1 == 0.4);
    CHECK(run.moments.back().sigma2 == 0.9);
    CHECK(run.sigma0_1() > 0.4);  // Phi(a, b) > a
    for (std::size_t i = 0; i + 1 < run.moments.size(); ++i) {
        CHECK(run.moments[i].sigma1 > run.moments[i + 1].sigma1);
        CHECK(run.moments[i].sigma2 > run.moments[i + 1].sigma2);
    }
    for (const ValueCoefficients& v : run.values) {
        CHECK(v.J >= v.I);
        CHECK(v.K <= 0.0);
    }
    for (std::size_t i = 0; i < run.xi.size(); ++i) {
        CHECK(run.xi[i] > 0.0);
        CHECK(run.lambda[i] > 0.0);
        CHECK(run.r[i] > 0.0);
    }
}

TEST_CASE("backward map ignores sigma2 scale except through sigma2 itself",
          "[backward]") {
    // Phi(a, c b) = Phi(a, b) and Psi(a, c b) = c Psi(a, b): the second moment
    // enters every xi equation only through ratios that cancel the scale.
    const ModelParams p = params_n(7, 0.6);
    const BackwardRun base = run_backward(0.3, 0.8, p);
    for (double c : {1e-3, 0.2, 5.0, 4e3}) {
        const BackwardRun scaled = run_backward(0.3, c * 0.8, p);
        CHECK_THAT(scaled.sigma0_1(), WithinRel(base.sigma0_1(), 1e-12));
        CHECK_THAT(scaled.sigma0_2(), WithinRel(c * base.sigma0_2(), 1e-12));
        for (std::size_t i = 0; i < base.xi.size(); ++i) {
            CHECK_THAT(scaled.xi[i], WithinRel(base.xi[i], 1e-12));
            CHECK_THAT(scaled.r[i], WithinRel(base.r[i], 1e-12));
            CHECK_THAT(scaled.lambda[i], WithinRel(c * base.lambda[i], 1e-12));
        }
    }
}

TEST_CASE("run_backward handles a nearly exhausted boundary", "[backward]") {
    // As a -> 0 the map Phi(a, 1) must stay finite and small: the trader with
    // nothing left to hide produces almost no information.
    const ModelParams p = params_n(5, 1.0 / std::sqrt(5.0));
    const BackwardRun run = run_backward(1e-10, 1.0, p);
    CHECK(run.sigma0_1() < 1e-6);
    CHECK(run.sigma0_1() > 1e-10);
}

TEST_CASE("run_backward requires at least two dates", "[backward]") {
    CHECK_THROWS_AS(run_backward(1.0, 1.0, params_n(1, 1.0)),
                    invalid_parameter_error);
}
