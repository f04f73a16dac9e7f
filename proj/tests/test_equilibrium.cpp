#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <stdexcept>

#include "kyleq/equilibrium.hpp"

using namespace kyleq;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

ModelParams benchmark_params(int n) {
    ModelParams p;
    p.n = n;
    p.sigma_a = 3.0;
    p.sigma_v = 1.0;
    p.sigma_w = 1.0 / std::sqrt(static_cast<double>(n));
    p.rho = 1.0 / 3.0;
    return p;
}

}  // namespace

TEST_CASE("parameter validation rejects out-of-domain inputs", "[model]") {
    ModelParams good = benchmark_params(5);
    CHECK_NOTHROW(validate(good));

    const auto expect_reject = [](ModelParams p) {
        CHECK_THROWS_AS(validate(p), invalid_parameter_error);
    };
    ModelParams p = good;
    p.n = 0;
    expect_reject(p);
    p = good;
    p.sigma_a = 0.0;
    expect_reject(p);
    p = good;
    p.sigma_v = -1.0;
    expect_reject(p);
    p = good;
    p.sigma_w = 0.0;
    expect_reject(p);
    p = good;
    p.rho = 0.0;
    expect_reject(p);
    p = good;
    p.rho = 1.0 + 1e-12;
    expect_reject(p);
    p = good;
    p.rho = -0.5;
    expect_reject(p);
    p = good;
    p.sigma_a = std::nan("");
    expect_reject(p);
}

TEST_CASE("assemble produces a complete, internally consistent solution",
          "[equilibrium]") {
    const ModelParams p = benchmark_params(5);
    const EquilibriumSolution sol = solve(p);

    REQUIRE(sol.n_dates() == 5);
    REQUIRE(sol.stages.size() == 5);
    REQUIRE(sol.moments.size() == 5);
    REQUIRE(sol.values.size() == 5);

    const StageCoefficients& last = sol.stage(5);
    CHECK(last.beta == 1.0);
    CHECK(last.alpha == 1.0);
    CHECK(last.r == 0.0);
    CHECK_FALSE(last.xi.has_value());
    CHECK(sol.value(4).K == 0.0);  // no continuation beyond the last date

    for (int n = 1; n <= 4; ++n) {
        const StageCoefficients& st = sol.stage(n);
        CHECK(st.beta > 0.0);
        CHECK(st.beta < 1.0);
        CHECK(st.alpha > 0.0);
        CHECK(st.alpha < 1.0);
        // alpha is defined by lambda_n = (1 - alpha_n)(1 + r_n) J_n
        CHECK_THAT(st.lambda,
                   WithinRel((1.0 - st.alpha) * (1.0 + st.r) * sol.value(n).J, 1e-14));
        // beta is xi / (1 + xi)
        CHECK_THAT(st.beta, WithinRel(*st.xi / (1.0 + *st.xi), 1e-15));
    }

    // trading accelerates toward the deadline
    for (int n = 1; n <= 3; ++n) CHECK(sol.stage(n).beta < sol.stage(n + 1).beta);

    CHECK_THROWS_AS(sol.stage(0), std::out_of_range);
    CHECK_THROWS_AS(sol.stage(6), std::out_of_range);
    CHECK_THROWS_AS(sol.moment(5), std::out_of_range);
    CHECK_THROWS_AS(sol.value(-1), std::out_of_range);
}

TEST_CASE("single-date market has the closed-form projection slope",
          "[equilibrium]") {
    ModelParams p;
    p.n = 1;
    p.sigma_a = 3.0;
    p.sigma_v = 1.0;
    p.sigma_w = 1.0;
    p.rho = 1.0 / 3.0;
    const EquilibriumSolution sol = solve(p);
    REQUIRE(sol.n_dates() == 1);
    CHECK(sol.stage(1).lambda == 0.1);  // rho sa sv / (sa^2 + sw^2) = 1/10
    CHECK(sol.stage(1).beta == 1.0);
    CHECK(sol.stage(1).r == 0.0);
    CHECK(sol.residual_phi == 0.0);
    CHECK_THAT(equilibrium_cost(sol), WithinRel(0.1 * 9.0, 1e-14));

    ModelParams q;
    q.n = 1;
    q.sigma_a = 1.0;
    q.sigma_v = 1.0;
    q.sigma_w = 1.0;
    q.rho = 1.0;
    CHECK(solve(q).stage(1).lambda == 0.5);

    CHECK(verify_identities(sol).all_pass);
}

TEST_CASE("value function accessor evaluates the stored quadratic",
          "[equilibrium]") {
    const EquilibriumSolution sol = solve(benchmark_params(3));
    const ValueCoefficients& v = sol.value(1);
    CHECK_THAT(value_at(sol, 1, 0.7, -0.2),
               WithinRel(v.I * 0.49 - v.J * 0.14 + v.K, 1e-15));
    CHECK(value_at(sol, 2, 0.0, 5.0) == sol.value(2).K);  // no x, no quadratic part
    CHECK_THROWS_AS(value_at(sol, 3, 1.0, 0.0), std::out_of_range);
}

TEST_CASE("first-order-condition diagnostics are mutually consistent",
          "[equilibrium]") {
    const EquilibriumSolution sol = solve(benchmark_params(6));
    for (int n = 1; n <= 5; ++n) {
        const Diagnostics d = diagnostics_at(sol, n);
        const StageCoefficients& st = sol.stage(n);
        // the price-intercept coefficient equals the strategy intercept pushed
        // through the market response: eta lambda / (1 + gamma lambda)
        CHECK_THAT(d.eta * st.lambda / (1.0 + d.gamma * st.lambda),
                   WithinRel(st.lambda * st.alpha, 1e-10));
        CHECK(d.h_coef == -st.lambda * st.alpha);
    }
    CHECK_THROWS_AS(diagnostics_at(sol, 0), std::out_of_range);
    CHECK_THROWS_AS(diagnostics_at(sol, 6), std::out_of_range);
}

TEST_CASE("identity battery passes across the parameter grid", "[equilibrium]") {
    for (int n : {2, 3, 5, 10}) {
        for (double rho : {0.1, 1.0 / 3.0, 0.9, 1.0}) {
            ModelParams p = benchmark_params(n);
            p.rho = rho;
            const EquilibriumSolution sol = solve(p);
            const IdentityReport rep = verify_identities(sol);
            INFO("n = " << n << ", rho = " << rho);
            for (const IdentityCheck& c : rep.checks) {
                INFO(c.name << ": worst = " << c.worst << ", tol = " << c.tol);
                CHECK(c.pass);
            }
            CHECK(rep.all_pass);
            CHECK(rep.worst_residual <= 1e-8);
        }
    }
}

TEST_CASE("identity battery flags a corrupted solution", "[equilibrium]") {
    const EquilibriumSolution good = solve(benchmark_params(4));
    EquilibriumSolution bad = good;
    // nudge one price impact well past every tolerance
    bad.stages[1] = StageCoefficients::interior(
        2, *good.stage(2).xi, good.stage(2).alpha, good.stage(2).lambda * 1.01,
        good.stage(2).r);
    const IdentityReport rep = verify_identities(bad);
    CHECK_FALSE(rep.all_pass);
    bool found = false;
    for (const IdentityCheck& c : rep.checks)
        if (!c.pass && c.name == "lambda-beta-form") found = true;
    CHECK(found);
}

TEST_CASE("equilibrium cost matches its ingredients", "[equilibrium]") {
    const EquilibriumSolution sol = solve(benchmark_params(5));
    CHECK_THAT(equilibrium_cost(sol),
               WithinRel(sol.value(0).I * 9.0 + sol.value(0).K, 1e-15));
    CHECK(equilibrium_cost(sol) > 0.0);
    // the forced trader does worse than dumping everything at once only
    // through the price-impact term; cost below the one-shot upper bound
    const double one_shot = sol.stage(1).lambda * 9.0;
    CHECK(equilibrium_cost(sol) < one_shot * 3.0);
}
