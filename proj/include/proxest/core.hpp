#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

#include "proxest/random.hpp"

namespace proxest {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

class ContractViolation : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Parameter coordinates. Matrix-valued parameters are stored flattened
/// (column-major) with their shape recorded, so solvers stay shape-agnostic.
class ParamPoint {
  public:
    explicit ParamPoint(Vector coords)
        : coords_(std::move(coords)), rows_(static_cast<int>(coords_.size())), cols_(1) {
        validate();
    }

    ParamPoint(Vector coords, int rows, int cols)
        : coords_(std::move(coords)), rows_(rows), cols_(cols) {
        if (rows_ < 1 || cols_ < 1 || static_cast<long>(rows_) * cols_ != coords_.size())
            throw ContractViolation("ParamPoint: shape does not match coordinate count");
        validate();
    }

    static ParamPoint from_matrix(const Matrix& m) {
        return ParamPoint(Vector(Eigen::Map<const Vector>(m.data(), m.size())),
                          static_cast<int>(m.rows()), static_cast<int>(m.cols()));
    }

    const Vector& coords() const { return coords_; }
    int dim() const { return static_cast<int>(coords_.size()); }
    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool is_matrix_shaped() const { return rows_ > 0 && cols_ > 0 && rows_ * cols_ == dim(); }

    Matrix as_matrix() const {
        return Eigen::Map<const Matrix>(coords_.data(), rows_, cols_);
    }

    /// New point with the same recorded shape.
    ParamPoint with_coords(Vector coords) const {
        return ParamPoint(std::move(coords), rows_, cols_);
    }

  private:
    void validate() const {
        if (coords_.size() < 1) throw ContractViolation("ParamPoint: dimension must be >= 1");
        if (!coords_.allFinite()) throw ContractViolation("ParamPoint: non-finite entry");
    }

    Vector coords_;
    int rows_, cols_;
};

/// Symmetric positive definite scaling matrix with a cached Cholesky factor.
/// Diagonal matrices get a compact representation; the Cholesky factorization
/// is the single positive-definiteness oracle for the dense case.
class ScalingMatrix {
  public:
    explicit ScalingMatrix(const Matrix& entries) {
        if (entries.rows() != entries.cols())
            throw ContractViolation("ScalingMatrix: matrix must be square");
        const double scale = entries.cwiseAbs().maxCoeff();
        const double asym = (entries - entries.transpose()).cwiseAbs().maxCoeff();
        if (asym > 1e-12 * std::max(scale, 1e-300))
            throw ContractViolation("ScalingMatrix: matrix is not symmetric");
        if (is_diagonal(entries)) {
            init_diagonal(entries.diagonal());
            return;
        }
        diag_ = false;
        dense_ = 0.5 * (entries + entries.transpose());
        llt_.compute(dense_);
        if (llt_.info() != Eigen::Success)
            throw ContractViolation("ScalingMatrix: not positive definite");
        Eigen::SelfAdjointEigenSolver<Matrix> es(dense_, Eigen::EigenvaluesOnly);
        lmin_ = es.eigenvalues().minCoeff();
        lmax_ = es.eigenvalues().maxCoeff();
        if (lmin_ <= 0.0 || !std::isfinite(lmax_))
            throw ContractViolation("ScalingMatrix: not positive definite");
    }

    static ScalingMatrix diagonal(const Vector& d) { return ScalingMatrix(d, DiagTag{}); }

    static ScalingMatrix scaled_identity(int dim, double s) {
        if (dim < 1) throw ContractViolation("ScalingMatrix: dimension must be >= 1");
        return diagonal(Vector::Constant(dim, s));
    }

    static ScalingMatrix identity(int dim) { return scaled_identity(dim, 1.0); }

    int dim() const { return diag_ ? static_cast<int>(d_.size()) : static_cast<int>(dense_.rows()); }
    bool is_diagonal_storage() const { return diag_; }
    const Vector& diagonal_entries() const {
        if (!diag_) throw std::logic_error("ScalingMatrix: dense storage");
        return d_;
    }

    Matrix to_dense() const {
        if (diag_) return Matrix(d_.asDiagonal());
        return dense_;
    }

    double lambda_min() const { return lmin_; }
    double lambda_max() const { return lmax_; }

    /// C x
    Vector apply(const Vector& x) const {
        check_dim(x);
        if (diag_) return d_.cwiseProduct(x);
        return dense_ * x;
    }

    /// C^{-1} b via the cached factor
    Vector solve(const Vector& b) const {
        check_dim(b);
        if (diag_) return b.cwiseQuotient(d_);
        return llt_.solve(b);
    }

    /// x^T C x
    double quad_form(const Vector& x) const {
        check_dim(x);
        if (diag_) return d_.cwiseProduct(x).dot(x);
        return x.dot(dense_ * x);
    }

    /// Same SPD matrix multiplied by s > 0 (used by step-halving line searches).
    ScalingMatrix times(double s) const {
        if (s <= 0.0) throw ContractViolation("ScalingMatrix: scale factor must be > 0");
        if (diag_) return diagonal(d_ * s);
        return ScalingMatrix(dense_ * s);
    }

  private:
    struct DiagTag {};
    ScalingMatrix(const Vector& d, DiagTag) { init_diagonal(d); }

    void init_diagonal(const Vector& d) {
        if (d.size() < 1) throw ContractViolation("ScalingMatrix: dimension must be >= 1");
        diag_ = true;
        d_ = d;
        lmin_ = d.minCoeff();
        lmax_ = d.maxCoeff();
        if (lmin_ <= 0.0 || !std::isfinite(lmax_))
            throw ContractViolation("ScalingMatrix: not positive definite");
    }

    static bool is_diagonal(const Matrix& m) {
        for (long j = 0; j < m.cols(); ++j)
            for (long i = 0; i < m.rows(); ++i)
                if (i != j && m(i, j) != 0.0) return false;
        return true;
    }

    void check_dim(const Vector& x) const {
        if (x.size() != dim()) throw ContractViolation("ScalingMatrix: dimension mismatch");
    }

    bool diag_ = false;
    Vector d_;
    Matrix dense_;
    Eigen::LLT<Matrix> llt_;
    double lmin_ = 0.0, lmax_ = 0.0;
};

/// ||x||_C = sqrt(x^T C x)
inline double weighted_norm(const ParamPoint& x, const ScalingMatrix& C) {
    return std::sqrt(std::max(0.0, C.quad_form(x.coords())));
}

inline double weighted_norm(const Vector& x, const ScalingMatrix& C) {
    return std::sqrt(std::max(0.0, C.quad_form(x)));
}

inline ParamPoint spd_solve(const ScalingMatrix& C, const ParamPoint& b) {
    return b.with_coords(C.solve(b.coords()));
}

/// Smooth objective term: value, gradient, optional Hessian. Symmetry is
/// required of supplied Hessians; positive definiteness is not (see
/// ridge_to_spd).
struct SmoothTerm {
    int dim = 0;
    std::function<double(const Vector&)> value;
    std::function<Vector(const Vector&)> gradient;
    std::function<Matrix(const Vector&)> hessian;       // may be empty
    std::function<Vector(const Vector&)> hessian_diag;  // diagonal models; may be empty

    bool has_hessian() const { return static_cast<bool>(hessian) || static_cast<bool>(hessian_diag); }

    static SmoothTerm zero(int dim) {
        SmoothTerm g;
        g.dim = dim;
        g.value = [](const Vector&) { return 0.0; };
        g.gradient = [dim](const Vector&) { return Vector::Zero(dim).eval(); };
        g.hessian = [dim](const Vector&) { return Matrix::Zero(dim, dim).eval(); };
        return g;
    }

    /// 1/2 (x-b)^T Q (x-b)
    static SmoothTerm quadratic(const Matrix& Q, const Vector& b) {
        if (Q.rows() != Q.cols() || Q.rows() != b.size())
            throw ContractViolation("SmoothTerm::quadratic: dimension mismatch");
        SmoothTerm g;
        g.dim = static_cast<int>(b.size());
        g.value = [Q, b](const Vector& x) { return 0.5 * (x - b).dot(Q * (x - b)); };
        g.gradient = [Q, b](const Vector& x) { return (Q * (x - b)).eval(); };
        g.hessian = [Q](const Vector&) { return Q; };
        return g;
    }
};

/// Ridge-adapt a symmetric (possibly indefinite) matrix into a valid scaling:
/// add tau*I with tau = max(0, 1e-8 - lambda_min).
inline ScalingMatrix ridge_to_spd(const Matrix& h) {
    if (h.rows() != h.cols()) throw ContractViolation("ridge_to_spd: matrix must be square");
    Matrix sym = 0.5 * (h + h.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues().minCoeff();
    const double tau = std::max(0.0, 1e-8 - lmin);
    if (tau > 0.0) sym.diagonal().array() += tau;
    return ScalingMatrix(sym);
}

inline ScalingMatrix ridge_to_spd_diag(const Vector& h) {
    const double lmin = h.minCoeff();
    const double tau = std::max(0.0, 1e-8 - lmin);
    return ScalingMatrix::diagonal(h.array() + tau);
}

enum class ProxKind { Zero, L1, Box, Nuclear, Generic };

/// Convex (by contract) nonsmooth term. The supported kinds carry closed-form
/// proximal maps; Generic carries only a value and must go through the inner
/// solver machinery of a caller that knows how to handle it.
class NonsmoothTerm {
  public:
    static NonsmoothTerm zero(int dim) {
        NonsmoothTerm h;
        h.kind_ = ProxKind::Zero;
        h.dim_ = dim;
        return h;
    }

    static NonsmoothTerm l1(int dim, double weight) {
        if (weight < 0.0) throw ContractViolation("NonsmoothTerm::l1: weight must be >= 0");
        NonsmoothTerm h;
        h.kind_ = ProxKind::L1;
        h.dim_ = dim;
        h.weight_ = weight;
        return h;
    }

    static NonsmoothTerm box(Vector lo, Vector hi) {
        if (lo.size() != hi.size() || lo.size() < 1)
            throw ContractViolation("NonsmoothTerm::box: bound dimension mismatch");
        if ((lo.array() > hi.array()).any())
            throw ContractViolation("NonsmoothTerm::box: lo > hi in some coordinate");
        NonsmoothTerm h;
        h.kind_ = ProxKind::Box;
        h.dim_ = static_cast<int>(lo.size());
        h.lo_ = std::move(lo);
        h.hi_ = std::move(hi);
        return h;
    }

    static NonsmoothTerm nuclear(int rows, int cols, double weight) {
        if (rows < 1 || cols < 1) throw ContractViolation("NonsmoothTerm::nuclear: bad shape");
        if (weight < 0.0) throw ContractViolation("NonsmoothTerm::nuclear: weight must be >= 0");
        NonsmoothTerm h;
        h.kind_ = ProxKind::Nuclear;
        h.dim_ = rows * cols;
        h.rows_ = rows;
        h.cols_ = cols;
        h.weight_ = weight;
        return h;
    }

    /// Value-only term for diagnostics; prox is unsupported.
    static NonsmoothTerm generic(int dim, std::function<double(const Vector&)> value,
                                 const Vector& feasible_point) {
        NonsmoothTerm h;
        h.kind_ = ProxKind::Generic;
        h.dim_ = dim;
        h.generic_value_ = std::move(value);
        if (!std::isfinite(h.value(feasible_point)))
            throw ContractViolation("NonsmoothTerm::generic: not proper at the supplied point");
        return h;
    }

    ProxKind kind() const { return kind_; }
    int dim() const { return dim_; }
    double weight() const { return weight_; }
    int rows() const { return rows_; }
    int cols() const { return cols_; }
    const Vector& lo() const { return lo_; }
    const Vector& hi() const { return hi_; }

    double value(const Vector& x) const {
        if (x.size() != dim_) throw ContractViolation("NonsmoothTerm::value: dimension mismatch");
        switch (kind_) {
            case ProxKind::Zero:
                return 0.0;
            case ProxKind::L1:
                return weight_ * x.lpNorm<1>();
            case ProxKind::Box: {
                const double slack = 1e-12;
                if ((x.array() < lo_.array() - slack).any() ||
                    (x.array() > hi_.array() + slack).any())
                    return kInf;
                return 0.0;
            }
            case ProxKind::Nuclear: {
                Eigen::Map<const Matrix> m(x.data(), rows_, cols_);
                Eigen::JacobiSVD<Matrix> svd(m);
                return weight_ * svd.singularValues().sum();
            }
            case ProxKind::Generic:
                return generic_value_(x);
        }
        return 0.0;
    }

  private:
    ProxKind kind_ = ProxKind::Zero;
    int dim_ = 0;
    double weight_ = 0.0;
    int rows_ = 0, cols_ = 0;
    Vector lo_, hi_;
    std::function<double(const Vector&)> generic_value_;
};

struct CompositeObjective {
    SmoothTerm smooth;
    NonsmoothTerm nonsmooth;

    CompositeObjective(SmoothTerm g, NonsmoothTerm h)
        : smooth(std::move(g)), nonsmooth(std::move(h)) {
        if (smooth.dim != nonsmooth.dim())
            throw ContractViolation("CompositeObjective: terms disagree on dimension");
    }

    int dim() const { return smooth.dim; }
    double value(const Vector& x) const { return smooth.value(x) + nonsmooth.value(x); }
};

/// m (strong convexity), M (gradient Lipschitz), L (bound on the scaling).
struct RegularityConstants {
    double strong_convexity_m;
    double grad_lipschitz_M;
    double scaling_bound_L;

    RegularityConstants(double m, double M, double L)
        : strong_convexity_m(m), grad_lipschitz_M(M), scaling_bound_L(L) {
        if (m <= 0.0 || M <= 0.0 || L <= 0.0)
            throw ContractViolation("RegularityConstants: constants must be > 0");
        if (m > M) throw ContractViolation("RegularityConstants: m must not exceed M");
    }
};

struct ConvexityReport {
    int trials = 0;
    int violations = 0;
    double worst_gap = 0.0;  // most positive h(mid) - (h(a)+h(b))/2
};

/// Randomized midpoint-convexity diagnostic. Pairs are drawn uniformly from a
/// ball of the given radius; infinite values only count as violations when the
/// midpoint is infinite while both endpoints are finite.
inline ConvexityReport convexity_spot_check(const NonsmoothTerm& h, int trials, double radius,
                                            std::uint64_t rng_seed,
                                            const Vector& center = Vector()) {
    if (trials < 1) throw ContractViolation("convexity_spot_check: trials must be >= 1");
    Rng rng(rng_seed);
    const int d = h.dim();
    Vector c = center.size() == d ? center : Vector::Zero(d);
    ConvexityReport report;
    report.trials = trials;
    auto draw = [&]() {
        Vector v(d);
        for (int i = 0; i < d; ++i) v[i] = rng.normal();
        const double norm = v.norm();
        if (norm == 0.0) return (c + Vector::Zero(d)).eval();
        const double r = radius * std::pow(rng.uniform01(), 1.0 / d);
        return (c + (r / norm) * v).eval();
    };
    for (int t = 0; t < trials; ++t) {
        const Vector a = draw();
        const Vector b = draw();
        const double ha = h.value(a);
        const double hb = h.value(b);
        if (!std::isfinite(ha) || !std::isfinite(hb)) continue;
        const double hm = h.value(0.5 * (a + b));
        const double gap = hm - 0.5 * (ha + hb);
        if (gap > 1e-9) {
            ++report.violations;
            report.worst_gap = std::max(report.worst_gap, gap);
        }
    }
    return report;
}

}  // namespace proxest
