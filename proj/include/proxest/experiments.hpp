#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "proxest/core.hpp"
#include "proxest/models.hpp"
#include "proxest/proxops.hpp"
#include "proxest/random.hpp"
#include "proxest/solvers.hpp"

namespace proxest {

// ---------------------------------------------------------------------------
// Small numeric helpers
// ---------------------------------------------------------------------------

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
inline double normal_sf(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

namespace detail {

template <class F>
double adaptive_simpson_rec(const F& f, double a, double b, double fa, double fm, double fb,
                            double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

template <class F>
double adaptive_simpson(const F& f, double a, double b, double tol = 1e-12) {
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return detail::adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48);
}

inline double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double w = pos - static_cast<double>(lo);
    return (1.0 - w) * sorted[lo] + w * sorted[hi];
}

// ---------------------------------------------------------------------------
// Asymptotic-equivalence diagnostics on the Cauchy model
// ---------------------------------------------------------------------------

enum class OseKind { ProxGradientMap, ProxDescent };

inline const char* to_string(OseKind k) {
    return k == OseKind::ProxGradientMap ? "prox_gradient_map" : "prox_descent";
}

struct McRecord {
    long n = 0;
    int replicate = 0;
    double dev_ose = 0.0;   // sqrt(n) ||theta_ose - theta_hat||
    double dev_init = 0.0;  // sqrt(n) ||theta_init - theta_hat||
    bool ok = true;
};

struct McSummary {
    long n = 0;
    double median_ose = 0.0;
    double q90_ose = 0.0;
    double median_init = 0.0;
    double q90_init = 0.0;
    int failures = 0;
    bool ordering_violated = false;  // median_ose > median_init
};

struct McReport {
    std::vector<long> sample_sizes;
    int replicates = 0;
    std::uint64_t base_seed = 0;
    OseKind ose_kind = OseKind::ProxGradientMap;
    std::vector<McRecord> records;
    std::vector<McSummary> summaries;
};

namespace detail {

/// Reference minimizer of the 1D Cauchy objective: two-stage grid around the
/// sample median, then a long prox-gradient polish. The stationarity residual
/// gate rejects replicates whose reference did not converge.
struct CauchyReference {
    double theta_hat = 0.0;
    double residual = 0.0;
    bool ok = false;
};

inline CauchyReference cauchy_reference(const CompositeObjective& obj, double median,
                                        double sigma0) {
    auto grid_argmin = [&](double lo, double hi, int pts) {
        double best_x = lo, best_v = kInf;
        for (int i = 0; i < pts; ++i) {
            const double x = lo + (hi - lo) * i / (pts - 1);
            Vector th(1);
            th[0] = x;
            const double v = obj.value(th);
            if (v < best_v) {
                best_v = v;
                best_x = x;
            }
        }
        return best_x;
    };
    const double coarse = grid_argmin(median - sigma0, median + sigma0, 81);
    const double spacing = 2.0 * sigma0 / 80.0;
    const double refined = grid_argmin(coarse - spacing, coarse + spacing, 81);

    Vector th(1);
    th[0] = refined;
    ScalingMatrix C = ridge_to_spd(obj.smooth.hessian(th));
    CauchyReference ref;
    try {
        EstimatorTrace trace =
            run_prox_gradient(obj, C, ParamPoint(th), StoppingRule{1e-12, 1000000});
        ref.theta_hat = trace.final_point().coords()[0];
    } catch (const DivergenceError& e) {
        ref.theta_hat = e.trace.final_point().coords()[0];
    }
    Vector sol(1);
    sol[0] = ref.theta_hat;
    const Vector g = obj.smooth.gradient(sol);
    ref.residual = (sol - prox_step(obj.nonsmooth, sol - g, 1.0)).norm();
    ref.ok = ref.residual <= 1e-10;
    return ref;
}

}  // namespace detail

/// Per replicate: draw a batch, compute the reference minimizer, perturb it
/// into a sqrt(n)-consistent initializer theta_hat + scale*U/sqrt(n), apply
/// the one-step map, and record sqrt(n)-scaled deviations. Replicate seeds
/// derive from hash(base_seed, n, replicate) so scheduling cannot matter.
inline McReport mc_equivalence_cauchy(const CauchyModel& model,
                                      const std::vector<long>& sample_sizes, int replicates,
                                      OseKind ose_kind, std::uint64_t base_seed,
                                      double init_deviation_scale = 1.0) {
    if (sample_sizes.empty()) throw ContractViolation("mc_equivalence_cauchy: no sample sizes");
    if (!std::is_sorted(sample_sizes.begin(), sample_sizes.end()))
        throw ContractViolation("mc_equivalence_cauchy: sample sizes must be increasing");
    if (replicates < 1) throw ContractViolation("mc_equivalence_cauchy: replicates must be >= 1");
    if (ose_kind == OseKind::ProxGradientMap && !model.prior_gamma)
        throw ContractViolation("mc_equivalence_cauchy: prox-gradient mode needs the prior");

    McReport report;
    report.sample_sizes = sample_sizes;
    report.replicates = replicates;
    report.base_seed = base_seed;
    report.ose_kind = ose_kind;

    const double fisher = cauchy_fisher(model);
    for (long n : sample_sizes) {
        std::vector<double> devs_ose, devs_init;
        int failures = 0;
        const double sqrt_n = std::sqrt(static_cast<double>(n));
        for (int rep = 0; rep < replicates; ++rep) {
            const std::uint64_t seed =
                derive_seed(base_seed, static_cast<std::uint64_t>(n), rep);
            SampleBatch batch = cauchy_sample(model, n, seed);

            std::vector<double> xs(batch.observations.size());
            for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = batch.observations[i][0];
            std::nth_element(xs.begin(), xs.begin() + xs.size() / 2, xs.end());
            const double median = xs[xs.size() / 2];

            CompositeObjective obj =
                ose_kind == OseKind::ProxGradientMap
                    ? cauchy_map_objective(model, batch)
                    : CompositeObjective(cauchy_nll(model, batch), NonsmoothTerm::zero(1));
            auto ref = detail::cauchy_reference(obj, median, model.scale);
            McRecord rec{n, rep, 0.0, 0.0, ref.ok};
            if (!ref.ok) {
                ++failures;
                report.records.push_back(rec);
                continue;
            }

            Rng rng(derive_seed(seed, 0x1717, 0));
            const double u = rng.uniform(-1.0, 1.0);
            Vector init(1);
            init[0] = ref.theta_hat + init_deviation_scale * u / sqrt_n;
            ParamPoint theta_init{init};

            double theta_ose;
            if (ose_kind == OseKind::ProxGradientMap) {
                ScalingMatrix C = ScalingMatrix::scaled_identity(1, fisher);
                theta_ose =
                    ose_prox_gradient(obj.smooth, obj.nonsmooth, C, theta_init).coords()[0];
            } else {
                ScalingMatrix C = ScalingMatrix::scaled_identity(1, fisher / sqrt_n);
                theta_ose = scaled_prox(obj, C, theta_init, InnerSolveConfig{},
                                        std::optional<Vector>(init))
                                .point.coords()[0];
            }
            rec.dev_ose = sqrt_n * std::abs(theta_ose - ref.theta_hat);
            rec.dev_init = sqrt_n * std::abs(init[0] - ref.theta_hat);
            devs_ose.push_back(rec.dev_ose);
            devs_init.push_back(rec.dev_init);
            report.records.push_back(rec);
        }
        std::sort(devs_ose.begin(), devs_ose.end());
        std::sort(devs_init.begin(), devs_init.end());
        McSummary s;
        s.n = n;
        s.failures = failures;
        s.median_ose = quantile_sorted(devs_ose, 0.5);
        s.q90_ose = quantile_sorted(devs_ose, 0.9);
        s.median_init = quantile_sorted(devs_init, 0.5);
        s.q90_init = quantile_sorted(devs_init, 0.9);
        s.ordering_violated = s.median_ose > s.median_init;
        report.summaries.push_back(s);
    }
    return report;
}

// ---------------------------------------------------------------------------
// Gradient-descent counterexample (bivariate normal mean)
// ---------------------------------------------------------------------------

enum class CounterexampleMode { FixedStep, ExactStep, ScaledNewton };

inline const char* to_string(CounterexampleMode m) {
    switch (m) {
        case CounterexampleMode::FixedStep: return "fixed_step";
        case CounterexampleMode::ExactStep: return "exact_step";
        case CounterexampleMode::ScaledNewton: return "scaled_newton";
    }
    return "?";
}

/// P(Z > M U) for Z standard normal, U uniform on [0, 1], by quadrature.
inline double tail_uniform_probability(double M) {
    return adaptive_simpson([M](double u) { return normal_sf(M * u); }, 0.0, 1.0, 1e-13);
}

struct ClosedFormResult {
    double probability = 0.0;             // quadrature value of P(Z > M U)
    double closed_form_expression = 0.0;  // 1 - Phi(M) + (1 - exp(-M^2/2))/(sqrt(2 pi) M)
    double m_constant = 0.0;
    bool counterexample_regime = false;   // M > 0
};

/// Fixed-step exceedance probability with M = sigma1/sigma2^2 - 1/sigma1.
inline ClosedFormResult counterexample_closed_form(double sigma1, double sigma2) {
    if (!(sigma1 > sigma2 && sigma2 > 0.0))
        throw ContractViolation("counterexample_closed_form: require sigma1 > sigma2 > 0");
    ClosedFormResult r;
    r.m_constant = sigma1 / (sigma2 * sigma2) - 1.0 / sigma1;
    r.counterexample_regime = r.m_constant > 0.0;
    r.probability = tail_uniform_probability(r.m_constant);
    if (r.m_constant != 0.0) {
        const double M = r.m_constant;
        r.closed_form_expression =
            normal_sf(M) + (1.0 - std::exp(-0.5 * M * M)) / (std::sqrt(2.0 * M_PI) * M);
    } else {
        r.closed_form_expression = 0.5;
    }
    return r;
}

struct CounterexampleReport {
    CounterexampleMode mode = CounterexampleMode::FixedStep;
    double sigma1 = 0.0, sigma2 = 0.0;
    double m_constant = 0.0;       // sigma1/alpha - 1/sigma1 for fixed step
    double empirical_prob = 0.0;
    double closed_form_prob = 0.0; // reference value (bound for exact_step)
    double std_error = 0.0;
    int replicates = 0;
    long n = 0;
};

/// One gradient/Newton step from a uniform-box initializer; reports the
/// frequency of the first coordinate exceeding the true mean.
inline CounterexampleReport counterexample_monte_carlo(double sigma1, double sigma2, long n,
                                                       int replicates, CounterexampleMode mode,
                                                       std::uint64_t base_seed) {
    if (!(sigma1 > sigma2 && sigma2 > 0.0))
        throw ContractViolation("counterexample_monte_carlo: require sigma1 > sigma2 > 0");
    if (n < 1 || replicates < 1)
        throw ContractViolation("counterexample_monte_carlo: n and replicates must be >= 1");
    const Vector mu = Vector::Zero(2);
    const double sqrt_n = std::sqrt(static_cast<double>(n));
    const double inv_s1sq = 1.0 / (sigma1 * sigma1);
    const double inv_s2sq = 1.0 / (sigma2 * sigma2);

    long exceed = 0;
    for (int rep = 0; rep < replicates; ++rep) {
        Rng rng(derive_seed(base_seed, static_cast<std::uint64_t>(n), rep));
        double sum0 = 0.0, sum1 = 0.0;
        for (long i = 0; i < n; ++i) {
            sum0 += mu[0] + sigma1 * rng.normal();
            sum1 += mu[1] + sigma2 * rng.normal();
        }
        const double xbar0 = sum0 / n, xbar1 = sum1 / n;
        const double init0 = mu[0] - rng.uniform01() / sqrt_n;
        const double init1 = mu[1] - rng.uniform01() / sqrt_n;

        double theta1;
        switch (mode) {
            case CounterexampleMode::FixedStep: {
                const double alpha = sigma2 * sigma2;
                theta1 = init0 - alpha * inv_s1sq * (init0 - xbar0);
                break;
            }
            case CounterexampleMode::ExactStep: {
                const double g0 = inv_s1sq * (init0 - xbar0);
                const double g1 = inv_s2sq * (init1 - xbar1);
                const double alpha =
                    (g0 * g0 + g1 * g1) / (g0 * g0 * inv_s1sq + g1 * g1 * inv_s2sq);
                theta1 = init0 - alpha * g0;
                break;
            }
            case CounterexampleMode::ScaledNewton:
                theta1 = xbar0;  // full Newton step on a quadratic lands on the mean
                break;
        }
        if (theta1 > mu[0]) ++exceed;
    }

    CounterexampleReport r;
    r.mode = mode;
    r.sigma1 = sigma1;
    r.sigma2 = sigma2;
    r.replicates = replicates;
    r.n = n;
    r.empirical_prob = static_cast<double>(exceed) / replicates;
    r.std_error = std::sqrt(r.empirical_prob * (1.0 - r.empirical_prob) / replicates);
    switch (mode) {
        case CounterexampleMode::FixedStep:
            r.m_constant = sigma1 / (sigma2 * sigma2) - 1.0 / sigma1;
            r.closed_form_prob = tail_uniform_probability(r.m_constant);
            break;
        case CounterexampleMode::ExactStep:
            r.m_constant = sigma1 / (sigma1 + sigma2) - 1.0 / sigma1;
            r.closed_form_prob = tail_uniform_probability(r.m_constant);  // upper bound
            break;
        case CounterexampleMode::ScaledNewton:
            r.m_constant = 0.0;
            r.closed_form_prob = 0.5;
            break;
    }
    return r;
}

// ---------------------------------------------------------------------------
// Low-rank logistic regression
// ---------------------------------------------------------------------------

struct LowRankReport {
    std::vector<double> objective_trajectory;
    int final_rank = 0;  // singular values > 1e-6 * sigma_max
    int iterations = 0;
    double lambda = 0.0;
    double stopping_threshold = 0.0;
    StoppingReason stopping_reason = StoppingReason::MaxIterations;
    Matrix theta;  // final iterate, N x N
    bool ok = true;
    std::string error;
};

/// Proximal Newton on the nuclear-norm penalized logistic objective, stopped
/// at step norm stopping_c / sqrt(N^2 * trials_per_cell).
inline LowRankReport lowrank_fit(const LogisticMatrixModel& model, double stopping_c,
                                 int max_iter,
                                 const std::optional<Matrix>& warm_start = std::nullopt) {
    const long n_eff = model.effective_n();
    LowRankReport report;
    report.lambda = model.penalty;
    report.stopping_threshold = sqrt_n_threshold(stopping_c, n_eff);
    CompositeObjective obj = logistic_objective(model);
    const int N = model.dimension;
    Vector th0 = warm_start
                     ? Vector(Eigen::Map<const Vector>(warm_start->data(), warm_start->size()))
                     : Vector(Vector::Zero(N * N));
    try {
        EstimatorTrace trace =
            run_prox_newton(obj, ParamPoint(std::move(th0), N, N),
                            StoppingRule{report.stopping_threshold, max_iter, n_eff});
        report.objective_trajectory = trace.objective_values;
        report.iterations = trace.iterations();
        report.stopping_reason = trace.stopping_reason;
        report.theta = trace.final_point().as_matrix();
        report.final_rank = numeric_rank(report.theta, 1e-6);
    } catch (const DivergenceError& e) {
        report.ok = false;
        report.error = e.what();
        report.objective_trajectory = e.trace.objective_values;
        report.iterations = e.trace.iterations();
        report.theta = e.trace.final_point().as_matrix();
        report.final_rank = numeric_rank(report.theta, 1e-6);
    } catch (const InnerSolveError& e) {
        report.ok = false;
        report.error = e.what();
    }
    return report;
}

/// One fit per lambda, warm-starting each from the previous solution.
inline std::vector<LowRankReport> lambda_sweep(const LogisticMatrixModel& model,
                                               const std::vector<double>& lambdas,
                                               double stopping_c, int max_iter) {
    if (lambdas.empty()) throw ContractViolation("lambda_sweep: no lambdas");
    std::vector<LowRankReport> out;
    std::optional<Matrix> warm;
    for (double lambda : lambdas) {
        LogisticMatrixModel m(model.freq_matrix, model.trials_per_cell, lambda);
        LowRankReport r = lowrank_fit(m, stopping_c, max_iter, warm);
        if (r.ok && r.theta.size() > 0) warm = r.theta;
        out.push_back(std::move(r));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Randomized operator diagnostics
// ---------------------------------------------------------------------------

struct ProxCheckRecord {
    int trial = 0;
    std::string family;  // quadratic | quadratic_l1 | box
    double lhs = 0.0;    // ||prox(x) - prox(y)||_C
    double rhs = 0.0;    // ||x - y||_C
    bool ok = true;
};

struct ProxCheckReport {
    int trials = 0;
    std::uint64_t seed = 0;
    int violations = 0;
    std::vector<ProxCheckRecord> records;
};

namespace detail {

inline Matrix random_spd(Rng& rng, int d, double spread = 1.0) {
    Matrix A(d, d);
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < d; ++i) A(i, j) = spread * rng.normal();
    return A.transpose() * A + Matrix::Identity(d, d);
}

inline Vector random_vector(Rng& rng, int d, double spread = 1.0) {
    Vector v(d);
    for (int i = 0; i < d; ++i) v[i] = spread * rng.normal();
    return v;
}

}  // namespace detail

/// Nonexpansiveness of the scaled prox in the C-norm over random convex
/// instances: quadratic, quadratic + l1, box indicator.
inline ProxCheckReport prox_nonexpansiveness_check(int trials, std::uint64_t seed) {
    if (trials < 1) throw ContractViolation("prox_nonexpansiveness_check: trials >= 1");
    ProxCheckReport report;
    report.trials = trials;
    report.seed = seed;
    Rng rng(seed);
    InnerSolveConfig cfg;
    cfg.tolerance = 1e-12;
    for (int t = 0; t < trials; ++t) {
        const int d = 1 + static_cast<int>(rng.uniform01() * 6);
        ScalingMatrix C{detail::random_spd(rng, d)};
        const int family = t % 3;
        NonsmoothTerm h = NonsmoothTerm::zero(d);
        SmoothTerm g = SmoothTerm::zero(d);
        std::string name;
        switch (family) {
            case 0:
                g = SmoothTerm::quadratic(detail::random_spd(rng, d),
                                          detail::random_vector(rng, d, 2.0));
                name = "quadratic";
                break;
            case 1:
                g = SmoothTerm::quadratic(detail::random_spd(rng, d),
                                          detail::random_vector(rng, d, 2.0));
                h = NonsmoothTerm::l1(d, 0.1 + rng.uniform01());
                name = "quadratic_l1";
                break;
            default: {
                Vector lo = detail::random_vector(rng, d);
                Vector hi = lo.array() + 0.5 + rng.uniform01();
                h = NonsmoothTerm::box(lo, hi);
                name = "box";
                break;
            }
        }
        CompositeObjective f(std::move(g), std::move(h));
        ParamPoint x{detail::random_vector(rng, d, 2.0)};
        ParamPoint y{detail::random_vector(rng, d, 2.0)};
        const Vector px = scaled_prox(f, C, x, cfg).point.coords();
        const Vector py = scaled_prox(f, C, y, cfg).point.coords();
        ProxCheckRecord rec;
        rec.trial = t;
        rec.family = name;
        rec.lhs = weighted_norm(px - py, C);
        rec.rhs = weighted_norm(x.coords() - y.coords(), C);
        rec.ok = rec.lhs <= rec.rhs + 1e-9;
        if (!rec.ok) ++report.violations;
        report.records.push_back(std::move(rec));
    }
    return report;
}

/// Random strongly convex quadratic + l1 instances for the step-length
/// inequality: exact constants m, M from the quadratic's spectrum, L from
/// the scaling used in the one-step map.
inline std::vector<StopCondReport> stop_cond_audit(int instances, std::uint64_t seed) {
    if (instances < 1) throw ContractViolation("stop_cond_audit: instances >= 1");
    Rng rng(seed);
    InnerSolveConfig cfg;
    cfg.tolerance = 1e-12;
    std::vector<StopCondReport> out;
    for (int t = 0; t < instances; ++t) {
        const int d = 1 + static_cast<int>(rng.uniform01() * 8);
        const Matrix Q = detail::random_spd(rng, d);
        const Vector b = detail::random_vector(rng, d, 2.0);
        CompositeObjective obj(SmoothTerm::quadratic(Q, b),
                               NonsmoothTerm::l1(d, 0.05 + 0.5 * rng.uniform01()));
        ScalingMatrix C{detail::random_spd(rng, d)};
        Eigen::SelfAdjointEigenSolver<Matrix> es(Q, Eigen::EigenvaluesOnly);
        RegularityConstants constants(es.eigenvalues().minCoeff(),
                                      es.eigenvalues().maxCoeff(), C.lambda_max());

        ParamPoint theta0{detail::random_vector(rng, d, 3.0)};
        EstimatorTrace trace = run_prox_gradient(obj, C, theta0, StoppingRule{1e-12, 200000}, cfg);
        const ParamPoint& theta_hat = trace.final_point();
        ParamPoint theta_init{
            (theta_hat.coords() + detail::random_vector(rng, d, 0.5)).eval()};
        ParamPoint theta_ose = ose_prox_gradient(obj.smooth, obj.nonsmooth, C, theta_init, cfg);
        out.push_back(check_stop_cond_inequality(obj, constants, theta_init, theta_hat, theta_ose));
    }
    return out;
}

struct SyntheticLowRank {
    LogisticMatrixModel model;
    Matrix theta_star;
};

/// Ground-truth theta* = A B^T with rank-r factors, frequencies sampled as
/// Bernoulli(sigmoid(theta*)) means over trials_per_cell draws.
inline SyntheticLowRank make_synthetic_lowrank(int N, int rank, int trials, std::uint64_t seed,
                                               double logit_scale = 1.5) {
    if (N < 1 || rank < 1 || rank > N)
        throw ContractViolation("make_synthetic_lowrank: need 1 <= rank <= N");
    Rng rng(seed);
    Matrix A(N, rank), B(N, rank);
    for (int j = 0; j < rank; ++j)
        for (int i = 0; i < N; ++i) {
            A(i, j) = rng.normal();
            B(i, j) = rng.normal();
        }
    Matrix theta_star = (A * B.transpose()) * (logit_scale / std::sqrt(double(rank)));
    Matrix freq(N, N);
    for (int j = 0; j < N; ++j)
        for (int i = 0; i < N; ++i) {
            const double p = logistic_sigmoid(theta_star(i, j));
            int hits = 0;
            for (int t = 0; t < trials; ++t)
                if (rng.uniform01() < p) ++hits;
            freq(i, j) = static_cast<double>(hits) / trials;
        }
    return SyntheticLowRank{LogisticMatrixModel(std::move(freq), trials, 0.0),
                            std::move(theta_star)};
}

}  // namespace proxest
