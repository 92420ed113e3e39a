#pragma once

#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "proxest/core.hpp"
#include "proxest/random.hpp"

namespace proxest {

struct SampleBatch {
    std::vector<Vector> observations;
    long n() const { return static_cast<long>(observations.size()); }
};

// ---------------------------------------------------------------------------
// Cauchy location, optionally with a Laplace prior (MAP)
// ---------------------------------------------------------------------------

struct CauchyModel {
    double location = 0.0;
    double scale = 1.0;
    std::optional<double> prior_gamma;  // Laplace prior scale; absent = pure MLE

    CauchyModel(double location, double scale,
                std::optional<double> prior_gamma = std::nullopt)
        : location(location), scale(scale), prior_gamma(prior_gamma) {
        if (!(scale > 0.0)) throw ContractViolation("CauchyModel: scale must be > 0");
        if (prior_gamma && !(*prior_gamma > 0.0))
            throw ContractViolation("CauchyModel: prior scale must be > 0");
    }
};

/// Inverse-CDF sampling: location + scale * tan(pi (U - 1/2)).
inline SampleBatch cauchy_sample(const CauchyModel& model, long n, std::uint64_t seed) {
    if (n < 1) throw ContractViolation("cauchy_sample: n must be >= 1");
    Rng rng(seed);
    SampleBatch batch;
    batch.observations.reserve(n);
    for (long i = 0; i < n; ++i) {
        Vector x(1);
        x[0] = model.location + model.scale * std::tan(M_PI * (rng.uniform01() - 0.5));
        batch.observations.push_back(std::move(x));
    }
    return batch;
}

/// Averaged negative log-likelihood (1/n) sum log(1 + ((X_i - theta)/sigma)^2);
/// additive constants dropped.
inline SmoothTerm cauchy_nll(const CauchyModel& model, const SampleBatch& batch) {
    if (batch.n() < 1) throw ContractViolation("cauchy_nll: empty batch");
    const double sigma2 = model.scale * model.scale;
    std::vector<double> xs;
    xs.reserve(batch.n());
    for (const auto& o : batch.observations) xs.push_back(o[0]);
    const double inv_n = 1.0 / static_cast<double>(xs.size());

    SmoothTerm g;
    g.dim = 1;
    g.value = [xs, sigma2, inv_n](const Vector& th) {
        double s = 0.0;
        for (double x : xs) {
            const double r = x - th[0];
            s += std::log1p(r * r / sigma2);
        }
        return s * inv_n;
    };
    g.gradient = [xs, sigma2, inv_n](const Vector& th) {
        double s = 0.0;
        for (double x : xs) {
            const double r = x - th[0];
            s += -2.0 * r / (sigma2 + r * r);
        }
        Vector out(1);
        out[0] = s * inv_n;
        return out;
    };
    g.hessian = [xs, sigma2, inv_n](const Vector& th) {
        double s = 0.0;
        for (double x : xs) {
            const double r = x - th[0];
            const double d = sigma2 + r * r;
            s += 2.0 * (sigma2 - r * r) / (d * d);
        }
        Matrix out(1, 1);
        out(0, 0) = s * inv_n;
        return out;
    };
    return g;
}

/// MAP composite: cauchy_nll plus the Laplace-prior penalty (1/(n gamma))|theta|.
inline CompositeObjective cauchy_map_objective(const CauchyModel& model,
                                               const SampleBatch& batch) {
    if (!model.prior_gamma)
        throw ContractViolation("cauchy_map_objective: model carries no prior");
    const double weight = 1.0 / (static_cast<double>(batch.n()) * *model.prior_gamma);
    return CompositeObjective(cauchy_nll(model, batch), NonsmoothTerm::l1(1, weight));
}

/// Fisher information of the location parameter: 1/(2 sigma^2).
inline double cauchy_fisher(const CauchyModel& model) {
    return 1.0 / (2.0 * model.scale * model.scale);
}

// ---------------------------------------------------------------------------
// Bivariate normal mean with known diagonal covariance
// ---------------------------------------------------------------------------

struct BivariateNormalModel {
    Vector mean;    // 2-vector
    double sigma1;  // larger standard deviation
    double sigma2;

    BivariateNormalModel(Vector mean, double sigma1, double sigma2)
        : mean(std::move(mean)), sigma1(sigma1), sigma2(sigma2) {
        if (this->mean.size() != 2)
            throw ContractViolation("BivariateNormalModel: mean must be a 2-vector");
        if (!(sigma1 > sigma2 && sigma2 > 0.0))
            throw ContractViolation("BivariateNormalModel: require sigma1 > sigma2 > 0");
    }
};

inline SampleBatch normal_sample(const BivariateNormalModel& model, long n, std::uint64_t seed) {
    if (n < 1) throw ContractViolation("normal_sample: n must be >= 1");
    Rng rng(seed);
    SampleBatch batch;
    batch.observations.reserve(n);
    for (long i = 0; i < n; ++i) {
        Vector x(2);
        x[0] = model.mean[0] + model.sigma1 * rng.normal();
        x[1] = model.mean[1] + model.sigma2 * rng.normal();
        batch.observations.push_back(std::move(x));
    }
    return batch;
}

/// Quadratic NLL (1/n) sum 1/2 (theta - X_i)^T Sigma^{-1} (theta - X_i);
/// gradient Sigma^{-1}(theta - Xbar), constant Hessian Sigma^{-1}.
inline SmoothTerm normal_nll(const BivariateNormalModel& model, const SampleBatch& batch) {
    if (batch.n() < 1) throw ContractViolation("normal_nll: empty batch");
    Vector xbar = Vector::Zero(2);
    double sq0 = 0.0, sq1 = 0.0;
    for (const auto& o : batch.observations) {
        xbar += o;
        sq0 += o[0] * o[0];
        sq1 += o[1] * o[1];
    }
    const double inv_n = 1.0 / static_cast<double>(batch.n());
    xbar *= inv_n;
    Vector prec(2);
    prec[0] = 1.0 / (model.sigma1 * model.sigma1);
    prec[1] = 1.0 / (model.sigma2 * model.sigma2);
    const double mean_sq0 = sq0 * inv_n, mean_sq1 = sq1 * inv_n;

    SmoothTerm g;
    g.dim = 2;
    g.value = [xbar, prec, mean_sq0, mean_sq1](const Vector& th) {
        // (1/n) sum 1/2 (th - x)^T P (th - x) expanded around the sample moments
        const double q0 = th[0] * th[0] - 2.0 * th[0] * xbar[0] + mean_sq0;
        const double q1 = th[1] * th[1] - 2.0 * th[1] * xbar[1] + mean_sq1;
        return 0.5 * (prec[0] * q0 + prec[1] * q1);
    };
    g.gradient = [xbar, prec](const Vector& th) {
        return (prec.cwiseProduct(th - xbar)).eval();
    };
    g.hessian = [prec](const Vector&) { return Matrix(prec.asDiagonal()); };
    return g;
}

inline Vector sample_mean(const SampleBatch& batch) {
    Vector m = Vector::Zero(batch.observations.front().size());
    for (const auto& o : batch.observations) m += o;
    return m / static_cast<double>(batch.n());
}

// ---------------------------------------------------------------------------
// Bernoulli logistic matrix model with nuclear-norm penalty
// ---------------------------------------------------------------------------

struct LogisticMatrixModel {
    int dimension = 0;        // N
    Matrix freq_matrix;       // Xbar, N x N entries in [0, 1]
    int trials_per_cell = 49;
    double penalty = 0.0;     // lambda

    LogisticMatrixModel(Matrix freq, int trials, double lambda)
        : dimension(static_cast<int>(freq.rows())), freq_matrix(std::move(freq)),
          trials_per_cell(trials), penalty(lambda) {
        if (dimension < 1 || freq_matrix.cols() != dimension)
            throw ContractViolation("LogisticMatrixModel: frequency matrix must be square");
        if (trials_per_cell < 1)
            throw ContractViolation("LogisticMatrixModel: trials_per_cell must be >= 1");
        if (penalty < 0.0) throw ContractViolation("LogisticMatrixModel: penalty must be >= 0");
        if ((freq_matrix.array() < 0.0).any() || (freq_matrix.array() > 1.0).any())
            throw ContractViolation("LogisticMatrixModel: frequencies must lie in [0, 1]");
    }

    long effective_n() const {
        return static_cast<long>(dimension) * dimension * trials_per_cell;
    }
};

inline double logistic_sigmoid(double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

/// sum_{ij} { log(exp(theta_ij) + 1) - Xbar_ij theta_ij } + lambda ||theta||_*
/// as a composite; the Hessian of the smooth part is diagonal with entries
/// sigma(theta_ij)(1 - sigma(theta_ij)).
inline CompositeObjective logistic_objective(const LogisticMatrixModel& model) {
    const int N = model.dimension;
    const int d = N * N;
    const Vector xbar = Eigen::Map<const Vector>(model.freq_matrix.data(), d);

    SmoothTerm g;
    g.dim = d;
    g.value = [xbar](const Vector& th) {
        double s = 0.0;
        for (long i = 0; i < th.size(); ++i) {
            // log(exp(t) + 1), overflow-safe
            const double t = th[i];
            s += (t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)));
            s -= xbar[i] * t;
        }
        return s;
    };
    g.gradient = [xbar](const Vector& th) {
        Vector out(th.size());
        for (long i = 0; i < th.size(); ++i) out[i] = logistic_sigmoid(th[i]) - xbar[i];
        return out;
    };
    g.hessian_diag = [](const Vector& th) {
        Vector out(th.size());
        for (long i = 0; i < th.size(); ++i) {
            const double p = logistic_sigmoid(th[i]);
            out[i] = p * (1.0 - p);
        }
        return out;
    };
    g.hessian = [g_diag = g.hessian_diag](const Vector& th) {
        return Matrix(g_diag(th).asDiagonal());
    };
    return CompositeObjective(std::move(g), NonsmoothTerm::nuclear(N, N, model.penalty));
}

/// Elementwise logistic transform exp(theta)/(1 + exp(theta)).
inline Matrix probability_matrix(const ParamPoint& theta) {
    if (!theta.is_matrix_shaped())
        throw ContractViolation("probability_matrix: point must carry a matrix shape");
    Matrix p(theta.rows(), theta.cols());
    const Matrix t = theta.as_matrix();
    for (long j = 0; j < p.cols(); ++j)
        for (long i = 0; i < p.rows(); ++i) p(i, j) = logistic_sigmoid(t(i, j));
    return p;
}

inline Matrix logit_matrix(const Matrix& p) {
    Matrix t(p.rows(), p.cols());
    for (long j = 0; j < p.cols(); ++j)
        for (long i = 0; i < p.rows(); ++i) {
            if (!(p(i, j) > 0.0 && p(i, j) < 1.0))
                throw ContractViolation("logit_matrix: entries must lie in (0, 1)");
            t(i, j) = std::log(p(i, j) / (1.0 - p(i, j)));
        }
    return t;
}

}  // namespace proxest
