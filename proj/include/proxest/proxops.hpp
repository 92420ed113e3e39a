#pragma once

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <utility>
#include <variant>

#include "proxest/core.hpp"

namespace proxest {

/// Output of a (scaled) proximal evaluation. objective_value is the envelope
/// value f(w*) + 1/2 ||x - w*||_C^2 at the prox point.
struct ProxResult {
    ParamPoint point;
    double objective_value = 0.0;
    int inner_iterations = 0;  // 0 exactly when a closed form was used
    double stationarity_residual = 0.0;
};

struct FixedStep {
    double gamma;
};
struct Backtracking {
    double beta = 0.5;
    double c = 1e-4;
};

struct InnerSolveConfig {
    int max_iterations = 10000;
    double tolerance = 1e-10;
    std::variant<FixedStep, Backtracking> step_rule = Backtracking{};

    void validate() const {
        if (max_iterations < 1) throw ContractViolation("InnerSolveConfig: max_iterations >= 1");
        if (!(tolerance > 0.0)) throw ContractViolation("InnerSolveConfig: tolerance > 0");
        if (const auto* f = std::get_if<FixedStep>(&step_rule)) {
            if (!(f->gamma > 0.0)) throw ContractViolation("InnerSolveConfig: gamma > 0");
        } else {
            const auto& b = std::get<Backtracking>(step_rule);
            if (!(b.beta > 0.0 && b.beta < 1.0 && b.c > 0.0 && b.c < 1.0))
                throw ContractViolation("InnerSolveConfig: need 0 < beta < 1 and 0 < c < 1");
        }
    }
};

/// Raised when an iterative prox evaluation exhausts its budget. Carries the
/// best iterate so the caller can inspect how close it got.
class InnerSolveError : public std::runtime_error {
  public:
    InnerSolveError(std::string what, Vector best, double residual)
        : std::runtime_error(std::move(what)), best_iterate(std::move(best)),
          residual(residual) {}

    Vector best_iterate;
    double residual;
};

inline double soft_threshold(double v, double t) {
    return std::copysign(std::max(std::abs(v) - t, 0.0), v);
}

/// Closed-form scaled prox of weight*||.||_1 for diagonal C:
/// w_i = sign(x_i) max(|x_i| - weight/C_ii, 0).
inline ProxResult prox_l1(const ParamPoint& x, double weight, const ScalingMatrix& C) {
    if (weight < 0.0) throw ContractViolation("prox_l1: weight must be >= 0");
    if (!C.is_diagonal_storage())
        throw ContractViolation("prox_l1: closed form requires diagonal scaling");
    if (C.dim() != x.dim()) throw ContractViolation("prox_l1: dimension mismatch");
    const Vector& d = C.diagonal_entries();
    Vector w(x.dim());
    double resid_sq = 0.0;
    for (int i = 0; i < x.dim(); ++i) {
        w[i] = soft_threshold(x.coords()[i], weight / d[i]);
        // subgradient inclusion 0 in weight*sgn(w_i) + C_ii (w_i - x_i)
        double r = (w[i] != 0.0)
                       ? weight * (w[i] > 0 ? 1.0 : -1.0) + d[i] * (w[i] - x.coords()[i])
                       : std::max(0.0, std::abs(d[i] * x.coords()[i]) - weight);
        resid_sq += r * r;
    }
    ProxResult out{x.with_coords(w)};
    out.objective_value = weight * w.lpNorm<1>() + 0.5 * C.quad_form(w - x.coords());
    out.stationarity_residual = std::sqrt(resid_sq);
    return out;
}

/// Euclidean projection onto [lo, hi] (prox of the box indicator; the result
/// is the same for every positive step, so no scaling argument appears).
inline ProxResult project_box(const ParamPoint& x, const ParamPoint& lo, const ParamPoint& hi) {
    if (lo.dim() != x.dim() || hi.dim() != x.dim())
        throw ContractViolation("project_box: dimension mismatch");
    if ((lo.coords().array() > hi.coords().array()).any())
        throw ContractViolation("project_box: lo > hi in some coordinate");
    Vector w = x.coords().cwiseMax(lo.coords()).cwiseMin(hi.coords());
    ProxResult out{x.with_coords(std::move(w))};
    out.objective_value = 0.5 * (out.point.coords() - x.coords()).squaredNorm();
    return out;
}

/// Singular value soft-thresholding: prox of weight*||.||_* under C = scale*I.
inline ProxResult prox_nuclear(const ParamPoint& X, double weight, double scale) {
    if (!X.is_matrix_shaped())
        throw ContractViolation("prox_nuclear: point must carry a matrix shape");
    if (weight < 0.0) throw ContractViolation("prox_nuclear: weight must be >= 0");
    if (!(scale > 0.0)) throw ContractViolation("prox_nuclear: scale must be > 0");
    if (weight == 0.0) {
        ProxResult out{X};
        return out;
    }
    const Matrix m = X.as_matrix();
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Vector sigma = svd.singularValues();
    for (long i = 0; i < sigma.size(); ++i)
        sigma[i] = std::max(sigma[i] - weight / scale, 0.0);
    const Matrix w = svd.matrixU() * sigma.asDiagonal() * svd.matrixV().transpose();
    ProxResult out{ParamPoint::from_matrix(w).with_coords(
        Vector(Eigen::Map<const Vector>(w.data(), w.size())))};
    out.objective_value =
        weight * sigma.sum() + 0.5 * scale * (w - m).squaredNorm();
    return out;
}

/// Rank with singular values below 1e-12 * sigma_max treated as zero unless a
/// different cut is supplied.
inline int numeric_rank(const Matrix& m, double rel_cut = 1e-12) {
    Eigen::JacobiSVD<Matrix> svd(m);
    const Vector& s = svd.singularValues();
    if (s.size() == 0 || s[0] <= 0.0) return 0;
    int r = 0;
    for (long i = 0; i < s.size(); ++i)
        if (s[i] > rel_cut * s[0]) ++r;
    return r;
}

namespace detail {

/// Unscaled prox step argmin_w h(w) + (1/(2t))||w - z||^2 for the closed-form
/// kinds. Building block of the generic inner solver.
inline Vector prox_step(const NonsmoothTerm& h, const Vector& z, double t) {
    switch (h.kind()) {
        case ProxKind::Zero:
            return z;
        case ProxKind::L1: {
            Vector w(z.size());
            for (long i = 0; i < z.size(); ++i) w[i] = soft_threshold(z[i], t * h.weight());
            return w;
        }
        case ProxKind::Box:
            return z.cwiseMax(h.lo()).cwiseMin(h.hi());
        case ProxKind::Nuclear: {
            ParamPoint p(z, h.rows(), h.cols());
            return prox_nuclear(p, h.weight(), 1.0 / t).point.coords();
        }
        case ProxKind::Generic:
            throw ContractViolation("prox_step: generic nonsmooth term has no prox");
    }
    return z;
}

}  // namespace detail

/// Generic scaled prox: minimizes f(w) + 1/2 ||w - x||_C^2 by proximal
/// gradient iterations on w, where f = g + h is a composite whose nonsmooth
/// part has a closed-form prox. The stationarity residual is the norm of the
/// gradient mapping (w - prox_h(w - t*grad, t))/t at the accepted step.
inline ProxResult scaled_prox_generic(const CompositeObjective& f, const ScalingMatrix& C,
                                      const ParamPoint& x, const InnerSolveConfig& cfg,
                                      const std::optional<Vector>& warm_start = std::nullopt) {
    cfg.validate();
    if (f.dim() != x.dim() || C.dim() != x.dim())
        throw ContractViolation("scaled_prox_generic: dimension mismatch");
    const Vector& x0 = x.coords();
    auto smooth_value = [&](const Vector& w) {
        return f.smooth.value(w) + 0.5 * C.quad_form(w - x0);
    };
    auto smooth_grad = [&](const Vector& w) {
        return (f.smooth.gradient(w) + C.apply(w - x0)).eval();
    };

    Vector w = warm_start ? *warm_start : x0;
    double t = std::visit(
        [&](const auto& rule) {
            if constexpr (std::is_same_v<std::decay_t<decltype(rule)>, FixedStep>)
                return rule.gamma;
            else
                return 1.0 / C.lambda_max();
        },
        cfg.step_rule);
    const bool backtrack = std::holds_alternative<Backtracking>(cfg.step_rule);
    const double beta = backtrack ? std::get<Backtracking>(cfg.step_rule).beta : 0.5;

    double phi = smooth_value(w);
    double residual = kInf;
    int iters = 0;
    for (; iters < cfg.max_iterations; ++iters) {
        const Vector grad = smooth_grad(w);
        Vector w_next;
        double phi_next = 0.0;
        if (backtrack) {
            // t is monotone non-increasing: growing it re-admits unstable steps
            // whose line-search rejection is lost in rounding noise near the
            // solution, producing a slowly expanding two-cycle
            for (int bt = 0; bt < 200; ++bt) {
                w_next = detail::prox_step(f.nonsmooth, w - t * grad, t);
                const Vector dw = w_next - w;
                phi_next = smooth_value(w_next);
                const double slack = 1e-12 * (1.0 + std::abs(phi));
                if (phi_next <= phi + grad.dot(dw) + dw.squaredNorm() / (2.0 * t) + slack)
                    break;
                t *= beta;
            }
        } else {
            w_next = detail::prox_step(f.nonsmooth, w - t * grad, t);
            phi_next = smooth_value(w_next);
        }
        residual = (w - w_next).norm() / t;
        w = w_next;
        phi = phi_next;
        if (residual <= cfg.tolerance) {
            ++iters;
            break;
        }
    }
    if (residual > cfg.tolerance)
        throw InnerSolveError("inner solve did not converge", w, residual);

    ProxResult out{x.with_coords(w)};
    out.inner_iterations = iters;
    out.stationarity_residual = residual;
    out.objective_value = f.smooth.value(w) + f.nonsmooth.value(w) + 0.5 * C.quad_form(w - x0);
    return out;
}

inline ProxResult scaled_prox_generic(const NonsmoothTerm& h, const ScalingMatrix& C,
                                      const ParamPoint& x, const InnerSolveConfig& cfg,
                                      const std::optional<Vector>& warm_start = std::nullopt) {
    return scaled_prox_generic(CompositeObjective(SmoothTerm::zero(h.dim()), h), C, x, cfg,
                               warm_start);
}

/// Scaled prox of a nonsmooth term: closed form when the scaling allows it,
/// the generic inner solver otherwise.
inline ProxResult scaled_prox(const NonsmoothTerm& h, const ScalingMatrix& C, const ParamPoint& x,
                              const InnerSolveConfig& cfg = {}) {
    switch (h.kind()) {
        case ProxKind::Zero: {
            ProxResult out{x};
            return out;
        }
        case ProxKind::L1:
            if (C.is_diagonal_storage()) return prox_l1(x, h.weight(), C);
            break;
        case ProxKind::Box:
            if (C.is_diagonal_storage()) {  // separable, so any diagonal metric clamps
                ProxResult r = project_box(x, x.with_coords(h.lo()), x.with_coords(h.hi()));
                r.objective_value = 0.5 * C.quad_form(r.point.coords() - x.coords());
                return r;
            }
            break;
        case ProxKind::Nuclear:
            if (C.is_diagonal_storage() &&
                C.lambda_max() - C.lambda_min() <= 1e-14 * C.lambda_max()) {
                ParamPoint shaped(x.coords(), h.rows(), h.cols());
                ProxResult r = prox_nuclear(shaped, h.weight(), C.lambda_min());
                r.point = x.with_coords(r.point.coords());
                return r;
            }
            break;
        case ProxKind::Generic:
            throw ContractViolation("scaled_prox: generic nonsmooth term has no prox");
    }
    return scaled_prox_generic(h, C, x, cfg);
}

inline ProxResult scaled_prox(const CompositeObjective& f, const ScalingMatrix& C,
                              const ParamPoint& x, const InnerSolveConfig& cfg = {},
                              const std::optional<Vector>& warm_start = std::nullopt) {
    return scaled_prox_generic(f, C, x, cfg, warm_start);
}

/// One prox evaluation shared by the envelope value and gradient.
struct MoreauEval {
    double value;
    ParamPoint gradient;
    ProxResult prox;
};

template <class F>
MoreauEval moreau_eval(const F& f, const ScalingMatrix& C, const ParamPoint& x,
                       const InnerSolveConfig& cfg = {}) {
    ProxResult r = scaled_prox(f, C, x, cfg);
    Vector grad = C.apply(x.coords() - r.point.coords());
    return MoreauEval{r.objective_value, x.with_coords(std::move(grad)), std::move(r)};
}

/// e_C f(x) = inf_w { f(w) + 1/2 ||x - w||_C^2 }
template <class F>
double moreau_value(const F& f, const ScalingMatrix& C, const ParamPoint& x,
                    const InnerSolveConfig& cfg = {}) {
    return scaled_prox(f, C, x, cfg).objective_value;
}

/// grad e_C f(x) = C (x - w*) with w* the prox point.
template <class F>
ParamPoint moreau_gradient(const F& f, const ScalingMatrix& C, const ParamPoint& x,
                           const InnerSolveConfig& cfg = {}) {
    return moreau_eval(f, C, x, cfg).gradient;
}

}  // namespace proxest
