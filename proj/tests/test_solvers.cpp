#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "proxest/models.hpp"
#include "proxest/proxops.hpp"
#include "proxest/random.hpp"
#include "proxest/solvers.hpp"

using namespace proxest;

namespace {

InnerSolveConfig tight() {
    InnerSolveConfig cfg;
    cfg.tolerance = 1e-12;
    return cfg;
}

Matrix random_spd(Rng& rng, int d) {
    Matrix A(d, d);
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < d; ++i) A(i, j) = rng.normal();
    return A.transpose() * A + Matrix::Identity(d, d);
}

Vector random_vec(Rng& rng, int d, double s = 1.0) {
    Vector v(d);
    for (int i = 0; i < d; ++i) v[i] = s * rng.normal();
    return v;
}

}  // namespace

TEST_CASE("one Newton step with C = Hessian solves a quadratic exactly") {
    Rng rng(1);
    for (int t = 0; t < 40; ++t) {
        const int d = 1 + t % 10;
        Matrix H = random_spd(rng, d);
        Vector b = random_vec(rng, d, 2.0);
        SmoothTerm g = SmoothTerm::quadratic(H, b);
        ParamPoint start{random_vec(rng, d, 5.0)};

        Vector ose = ose_prox_gradient(g, NonsmoothTerm::zero(d), ScalingMatrix{H}, start).coords();
        CHECK((ose - b).norm() < 1e-10 * (1.0 + b.norm()));

        // one_newton_step agrees with the h == 0 prox-gradient map
        Vector newton = one_newton_step(g, ScalingMatrix{H}, start).coords();
        CHECK((newton - ose).norm() == 0.0);
    }
}

TEST_CASE("ose_prox_gradient fixes the composite minimizer") {
    Matrix Q(2, 2);
    Q << 2, 0, 0, 1;
    Vector b(2);
    b << 3, -1;
    CompositeObjective obj(SmoothTerm::quadratic(Q, b), NonsmoothTerm::l1(2, 0.5));
    ScalingMatrix C = ScalingMatrix::identity(2);
    EstimatorTrace trace =
        run_prox_gradient(obj, C, ParamPoint{Vector::Zero(2)}, StoppingRule{1e-12, 200000});
    const ParamPoint& theta_hat = trace.final_point();
    Vector again =
        ose_prox_gradient(obj.smooth, obj.nonsmooth, C, theta_hat, tight()).coords();
    CHECK((again - theta_hat.coords()).norm() <= 1e-8);
}

TEST_CASE("1D lasso one-step soft-thresholds") {
    Matrix Q(1, 1);
    Q << 1;
    Vector b(1);
    b << 3;
    SmoothTerm g = SmoothTerm::quadratic(Q, b);
    ParamPoint start{Vector::Zero(1)};
    Vector out =
        ose_prox_gradient(g, NonsmoothTerm::l1(1, 1.0), ScalingMatrix::identity(1), start).coords();
    CHECK(out[0] == Catch::Approx(2.0));  // prox_{|.|}(3)
}

TEST_CASE("ose_prox_descent examples") {
    Matrix Q(1, 1);
    Q << 1;
    CompositeObjective f(SmoothTerm::quadratic(Q, Vector::Zero(1)), NonsmoothTerm::zero(1));
    ScalingMatrix C = ScalingMatrix::identity(1);

    // from the minimizer: fixed point
    CHECK(ose_prox_descent(f, C, ParamPoint{Vector::Zero(1)}, tight()).coords().norm() < 1e-10);

    // from 2 with c = 1: analytic prox of the quadratic gives 1
    Vector x(1);
    x << 2;
    CHECK(ose_prox_descent(f, C, ParamPoint{x}, tight()).coords()[0] ==
          Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("prox descent equals a scaled gradient step on the envelope") {
    Rng rng(55);
    for (int t = 0; t < 15; ++t) {
        const int d = 1 + t % 3;
        CompositeObjective f(SmoothTerm::quadratic(random_spd(rng, d), random_vec(rng, d, 2.0)),
                             NonsmoothTerm::l1(d, 0.3));
        ScalingMatrix C{random_spd(rng, d)};
        ParamPoint x{random_vec(rng, d, 3.0)};
        Vector descent = ose_prox_descent(f, C, x, tight()).coords();
        Vector via_envelope = x.coords() - C.solve(moreau_gradient(f, C, x, tight()).coords());
        CHECK((descent - via_envelope).norm() <= 1e-12 * (1.0 + descent.norm()));
    }
}

TEST_CASE("run_prox_gradient on the separable lasso") {
    // g = 1/2 ||theta - b||^2 with b = (3, 0.5), h = ||theta||_1: limit (2, 0)
    Matrix Q = Matrix::Identity(2, 2);
    Vector b(2);
    b << 3, 0.5;
    CompositeObjective obj(SmoothTerm::quadratic(Q, b), NonsmoothTerm::l1(2, 1.0));
    EstimatorTrace trace = run_prox_gradient(obj, ScalingMatrix::identity(2),
                                             ParamPoint{Vector::Zero(2)},
                                             StoppingRule{1e-12, 100000});
    CHECK(trace.final_point().coords()[0] == Catch::Approx(2.0).margin(1e-10));
    CHECK(trace.final_point().coords()[1] == Catch::Approx(0.0).margin(1e-10));
    CHECK(trace.stopping_reason != StoppingReason::MaxIterations);
    CHECK(trace.step_norms.size() + 1 == trace.iterates.size());
    CHECK(trace.objective_values.size() == trace.iterates.size());
}

TEST_CASE("run_prox_gradient with infinite threshold stops after one iteration") {
    Matrix Q = Matrix::Identity(2, 2);
    CompositeObjective obj(SmoothTerm::quadratic(Q, Vector::Ones(2)), NonsmoothTerm::zero(2));
    EstimatorTrace trace = run_prox_gradient(obj, ScalingMatrix::identity(2),
                                             ParamPoint{Vector::Zero(2)},
                                             StoppingRule{kInf, 100});
    CHECK(trace.iterations() == 1);
    CHECK(trace.stopping_reason == StoppingReason::StepBelowThreshold);
}

TEST_CASE("quadratic with Newton scaling converges in one iteration") {
    Rng rng(8);
    Matrix H = random_spd(rng, 3);
    Vector b = random_vec(rng, 3, 2.0);
    CompositeObjective obj(SmoothTerm::quadratic(H, b), NonsmoothTerm::zero(3));
    EstimatorTrace trace = run_prox_gradient(obj, ScalingMatrix{H},
                                             ParamPoint{random_vec(rng, 3, 4.0)},
                                             StoppingRule{1e-10, 100});
    CHECK(trace.iterations() <= 2);
    CHECK((trace.final_point().coords() - b).norm() < 1e-9);
}

TEST_CASE("monotone descent with backtracking on convex composites") {
    Rng rng(66);
    for (int t = 0; t < 10; ++t) {
        const int d = 2 + t % 3;
        CompositeObjective obj(SmoothTerm::quadratic(random_spd(rng, d), random_vec(rng, d, 2.0)),
                               NonsmoothTerm::l1(d, 0.4));
        EstimatorTrace trace = run_prox_gradient(obj, ScalingMatrix::identity(d),
                                                 ParamPoint{random_vec(rng, d, 5.0)},
                                                 StoppingRule{1e-10, 50000});
        for (std::size_t k = 1; k < trace.objective_values.size(); ++k)
            CHECK(trace.objective_values[k] <= trace.objective_values[k - 1] + 1e-12);
    }
}

TEST_CASE("run_prox_newton solves a smooth quadratic in one iteration") {
    Rng rng(4);
    Matrix H = random_spd(rng, 4);
    Vector b = random_vec(rng, 4, 2.0);
    CompositeObjective obj(SmoothTerm::quadratic(H, b), NonsmoothTerm::zero(4));
    EstimatorTrace trace = run_prox_newton(obj, ParamPoint{random_vec(rng, 4, 5.0)},
                                           StoppingRule{1e-8, 50});
    CHECK((trace.final_point().coords() - b).norm() < 1e-7);
    CHECK(trace.iterations() <= 2);
}

TEST_CASE("run_prox_newton requires a Hessian") {
    SmoothTerm g;
    g.dim = 1;
    g.value = [](const Vector&) { return 0.0; };
    g.gradient = [](const Vector&) { return Vector::Zero(1).eval(); };
    CompositeObjective obj(g, NonsmoothTerm::zero(1));
    CHECK_THROWS_AS(run_prox_newton(obj, ParamPoint{Vector::Zero(1)}, StoppingRule{1e-6, 10}),
                    ContractViolation);
}

TEST_CASE("prox Newton stops immediately at a stationary start") {
    Matrix freq = Matrix::Constant(4, 4, 0.5);
    LogisticMatrixModel model(freq, 49, 0.0);
    CompositeObjective obj = logistic_objective(model);
    EstimatorTrace trace = run_prox_newton(obj, ParamPoint{Vector::Zero(16), 4, 4},
                                           StoppingRule{1e-6, 50});
    CHECK(trace.iterations() == 1);
    CHECK(trace.final_point().coords().norm() == 0.0);
    CHECK(trace.stopping_reason == StoppingReason::Stationary);
}

TEST_CASE("gd_step_fixed applies theta - alpha * grad") {
    Matrix Q(1, 1);
    Q << 1;
    SmoothTerm g = SmoothTerm::quadratic(Q, Vector::Zero(1));
    Vector th(1);
    th << 5;
    CHECK(gd_step_fixed(g, 1.0, ParamPoint{th}).coords()[0] == Catch::Approx(0.0));

    // stationary start is a fixed point
    CHECK(gd_step_fixed(g, 0.3, ParamPoint{Vector::Zero(1)}).coords().norm() == 0.0);
    CHECK_THROWS_AS(gd_step_fixed(g, 0.0, ParamPoint{th}), ContractViolation);
}

TEST_CASE("gd_step_exact on quadratics") {
    // isotropic: one step lands on the minimizer with alpha = 1
    Matrix Q = Matrix::Identity(2, 2);
    Vector b(2);
    b << 1, -2;
    SmoothTerm g = SmoothTerm::quadratic(Q, b);
    GdExactStep s = gd_step_exact(g, ParamPoint{Vector::Zero(2)});
    CHECK(s.alpha_defined);
    CHECK(s.alpha == Catch::Approx(1.0));
    CHECK((s.point.coords() - b).norm() < 1e-12);

    // 1D: exact line search solves any curvature in one step
    Matrix Q1(1, 1);
    Q1 << 7.5;
    SmoothTerm g1 = SmoothTerm::quadratic(Q1, Vector::Ones(1));
    Vector th(1);
    th << -4;
    CHECK((gd_step_exact(g1, ParamPoint{th}).point.coords() - Vector::Ones(1)).norm() < 1e-12);

    // alpha is a Rayleigh quotient of Q^{-1} = diag(s1^2, s2^2): within [s2^2, s1^2]
    const double s1 = 10.0, s2 = 1.0;
    Matrix Qc(2, 2);
    Qc << 1.0 / (s1 * s1), 0, 0, 1.0 / (s2 * s2);
    SmoothTerm gc = SmoothTerm::quadratic(Qc, Vector::Zero(2));
    Rng rng(77);
    for (int t = 0; t < 50; ++t) {
        Vector p = random_vec(rng, 2, 3.0);
        if (p.norm() == 0.0) continue;
        const double alpha = gd_step_exact(gc, ParamPoint{p}).alpha;
        CHECK(alpha >= s2 * s2 - 1e-9);
        CHECK(alpha <= s1 * s1 + 1e-9);
    }

    // zero gradient: step is undefined, point unchanged
    GdExactStep stat = gd_step_exact(g, ParamPoint{b});
    CHECK_FALSE(stat.alpha_defined);
    CHECK((stat.point.coords() - b).norm() == 0.0);
}

TEST_CASE("check_stop_cond_inequality examples") {
    Matrix Q(1, 1);
    Q << 1;
    CompositeObjective obj(SmoothTerm::quadratic(Q, Vector::Zero(1)), NonsmoothTerm::zero(1));
    RegularityConstants constants(1.0, 1.0, 1.0);

    // theta_init = theta_hat: both sides vanish, inequality holds with equality
    ParamPoint zero{Vector::Zero(1)};
    StopCondReport r = check_stop_cond_inequality(obj, constants, zero, zero, zero);
    CHECK(r.holds);
    CHECK(r.step_norm == 0.0);

    // m = M = L = 1: kappa = min{sqrt(1/6), 1/6} = 1/6; step 1 vs required 1/6
    Vector one(1);
    one << 1;
    r = check_stop_cond_inequality(obj, constants, ParamPoint{one}, zero, zero);
    CHECK(r.kappa_conservative == Catch::Approx(1.0 / 6.0));
    CHECK(r.kappa_stated_max == Catch::Approx(std::sqrt(1.0 / 6.0)));
    CHECK(r.step_norm == Catch::Approx(1.0));
    CHECK(r.required == Catch::Approx(1.0 / 6.0));
    CHECK(r.holds);
}

TEST_CASE("stopping soundness on random strongly convex instances") {
    // when the step norm falls below t, the distance to the minimizer is
    // below t / kappa (conservative constant)
    Rng rng(90);
    for (int t = 0; t < 20; ++t) {
        const int d = 1 + t % 4;
        Matrix Q = random_spd(rng, d);
        CompositeObjective obj(SmoothTerm::quadratic(Q, random_vec(rng, d, 2.0)),
                               NonsmoothTerm::l1(d, 0.2));
        ScalingMatrix C{random_spd(rng, d)};
        Eigen::SelfAdjointEigenSolver<Matrix> es(Q, Eigen::EigenvaluesOnly);
        RegularityConstants constants(es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff(),
                                      C.lambda_max());
        const double threshold = 1e-3;
        EstimatorTrace run = run_prox_gradient(obj, C, ParamPoint{random_vec(rng, d, 4.0)},
                                               StoppingRule{threshold, 100000});
        REQUIRE(run.stopping_reason == StoppingReason::StepBelowThreshold);
        EstimatorTrace exact = run_prox_gradient(obj, C, run.final_point(),
                                                 StoppingRule{1e-13, 300000});
        const double base = constants.strong_convexity_m /
                            (2.0 * (2.0 * constants.scaling_bound_L + constants.grad_lipschitz_M));
        const double kappa = std::min(std::sqrt(base), base);
        const double dist =
            (run.final_point().coords() - exact.final_point().coords()).norm();
        CHECK(dist <= threshold / kappa + 1e-9);
    }
}

TEST_CASE("divergence detection raises with the trace attached") {
    // gradient pointing away from the minimizer forever: a pathological
    // "smooth" term whose gradient is constant and nonzero while the value
    // increases along the step, defeating the line search
    SmoothTerm g;
    g.dim = 1;
    g.value = [](const Vector& x) { return -x[0]; };
    g.gradient = [](const Vector&) {
        Vector v(1);
        v << 1.0;  // wrong sign: steps increase the objective
        return v;
    };
    CompositeObjective obj(g, NonsmoothTerm::zero(1));
    try {
        run_prox_gradient(obj, ScalingMatrix::identity(1), ParamPoint{Vector::Zero(1)},
                          StoppingRule{1e-12, 1000});
        FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
        CHECK(e.trace.iterates.size() >= 10);
    }
}

TEST_CASE("sqrt_n_threshold") {
    CHECK(sqrt_n_threshold(1.0, 100) == Catch::Approx(0.1));
    CHECK(sqrt_n_threshold(2.0, 400) == Catch::Approx(0.1));
    CHECK_THROWS_AS(sqrt_n_threshold(1.0, 0), ContractViolation);
}
