#ifndef OPTINPUT_ESTIMATOR_HPP
#define OPTINPUT_ESTIMATOR_HPP

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "optinput/errors.hpp"
#include "optinput/input_sequence.hpp"
#include "optinput/kernels.hpp"
#include "optinput/matrix_core.hpp"

namespace optinput {

/// Input/output record Y = Phi(u) theta + V.
struct DataRecord {
    InputSequence input;
    Vector y;
    std::optional<double> sigma2;

    void validate() const
    {
        if (y.size() != input.size()) {
            throw DimensionMismatch("output length " + std::to_string(y.size()) + " != input length " +
                                   std::to_string(input.size()));
        }
        if (sigma2 && !(*sigma2 > 0.0)) {
            throw DimensionMismatch("noise variance must be > 0");
        }
    }
};

enum class EstimateMethod { LS, RLS };

struct FirEstimate {
    Vector theta;
    std::optional<SymMatrix> posterior_cov;
    EstimateMethod method = EstimateMethod::LS;
};

/// N x n regressor under circular wraparound: row t holds u_t, u_{t-1}, ..., u_{t-n+1}
/// with indices taken mod N.
inline Matrix build_circulant_regressor(const Vector& u, Eigen::Index n)
{
    const Eigen::Index N = u.size();
    if (n < 1 || n > N) {
        throw OrderTooLarge("regressor order n=" + std::to_string(n) + " with N=" + std::to_string(N));
    }
    Matrix phi(N, n);
    for (Eigen::Index t = 0; t < N; ++t) {
        for (Eigen::Index i = 0; i < n; ++i) {
            phi(t, i) = u(((t - i) % N + N) % N);
        }
    }
    return phi;
}

inline Matrix build_circulant_regressor(const InputSequence& u, Eigen::Index n)
{
    return build_circulant_regressor(u.values, n);
}

namespace detail {

inline Vector ls_solve(const Matrix& phi, const Vector& y)
{
    Eigen::ColPivHouseholderQR<Matrix> qr(phi);
    qr.setThreshold(1e-12);
    if (qr.rank() < phi.cols()) {
        throw SingularRegressor("Phi^T Phi is singular (rank " + std::to_string(qr.rank()) + " < " +
                                std::to_string(phi.cols()) + ")");
    }
    return qr.solve(y);
}

} // namespace detail

inline FirEstimate ls_estimate(const DataRecord& rec, Eigen::Index n)
{
    rec.validate();
    const Matrix phi = build_circulant_regressor(rec.input, n);
    FirEstimate out;
    out.method = EstimateMethod::LS;
    out.theta = detail::ls_solve(phi, rec.y);
    if (rec.sigma2) {
        out.posterior_cov = SymMatrix(*rec.sigma2 * inverse(SymMatrix(phi.transpose() * phi)).matrix());
    }
    return out;
}

/// theta = P Phi^T (Phi P Phi^T + sigma2 I)^-1 Y, covariance P - P Phi^T F^-1 Phi P.
inline FirEstimate rls_estimate(const DataRecord& rec, const SymMatrix& p, double sigma2)
{
    rec.validate();
    if (!(sigma2 > 0.0)) {
        throw NotPositiveDefinite("noise variance must be > 0");
    }
    const Eigen::Index n = p.dim();
    const Matrix phi = build_circulant_regressor(rec.input, n);
    const Matrix p_phit = p.matrix() * phi.transpose();
    Matrix f = phi * p_phit;
    f.diagonal().array() += sigma2;
    const auto llt = detail::factor(SymMatrix(f));
    FirEstimate out;
    out.method = EstimateMethod::RLS;
    out.theta = p_phit * llt.solve(rec.y);
    out.posterior_cov = SymMatrix(p.matrix() - p_phit * llt.solve(p_phit.transpose()));
    return out;
}

/// sigma2 * (Phi^T Phi + sigma2 P^-1)^-1 given P^-1 directly.
inline SymMatrix bayesian_mse_from_inverse(const Vector& u, const SymMatrix& p_inv, double sigma2)
{
    if (!(sigma2 > 0.0)) {
        throw NotPositiveDefinite("noise variance must be > 0");
    }
    const Matrix phi = build_circulant_regressor(u, p_inv.dim());
    const SymMatrix q(phi.transpose() * phi + sigma2 * p_inv.matrix());
    return SymMatrix(sigma2 * inverse(q).matrix());
}

inline SymMatrix bayesian_mse(const InputSequence& u, const SymMatrix& p, double sigma2, Eigen::Index n)
{
    if (p.dim() != n) {
        throw DimensionMismatch("kernel dimension does not match order n");
    }
    return bayesian_mse_from_inverse(u.values, inverse(p), sigma2);
}

namespace detail {

inline double eb_objective_phi(const SymMatrix& p, const Vector& y, const Matrix& phi, double sigma2)
{
    Matrix f = phi * p.matrix() * phi.transpose();
    f.diagonal().array() += sigma2;
    const auto llt = factor(SymMatrix(f));
    const Matrix& lu = llt.matrixLLT();
    double ld = 0.0;
    for (Eigen::Index i = 0; i < lu.rows(); ++i) {
        ld += 2.0 * std::log(lu(i, i));
    }
    return y.dot(llt.solve(y)) + ld;
}

} // namespace detail

/// Negative log marginal likelihood (up to constants): Y^T F^-1 Y + log det F,
/// F = Phi P Phi^T + sigma2 I_N.
inline double eb_objective(const SymMatrix& p, const Vector& y, const Vector& u, Eigen::Index n, double sigma2)
{
    if (y.size() != u.size()) {
        throw DimensionMismatch("y and u lengths differ");
    }
    if (p.dim() != n) {
        throw DimensionMismatch("kernel dimension does not match order n");
    }
    return detail::eb_objective_phi(p, y, build_circulant_regressor(u, n), sigma2);
}

/// Grid-then-simplex search protocol for the EB hyperparameters.
struct SearchOptions {
    std::vector<double> c_grid;      ///< empty: 17 log-spaced points in [1e-4, 1e4]
    std::vector<double> lambda_grid; ///< empty: 10 points in [0.5, 0.99]
    std::vector<double> rho_grid;    ///< empty: 9 points in [-0.95, 0.95]
    bool refine = true;
    int max_evaluations = 600;
    // Refinement box, inside the strict interior of the hyperparameter domain.
    double log10_c_min = -8.0;
    double log10_c_max = 8.0;
    double lambda_min = 0.01;
    double lambda_max = 0.999;
    double rho_abs_max = 0.99;
};

namespace detail {

inline std::vector<double> linspace(double lo, double hi, int count)
{
    std::vector<double> v(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        v[static_cast<std::size_t>(i)] = count == 1 ? lo : lo + (hi - lo) * i / (count - 1);
    }
    return v;
}

/// Hyperparameters as a point in search coordinates (log10 c, lambda, rho).
struct EbCoordinates {
    KernelFamily family;
    int n;

    [[nodiscard]] int dim() const
    {
        switch (family) {
        case KernelFamily::Ridge: return 1;
        case KernelFamily::DI:
        case KernelFamily::TC: return 2;
        case KernelFamily::DC: return 3;
        default: break;
        }
        throw InvalidHyperparameter("EB search supports Ridge, DI, TC and DC");
    }

    [[nodiscard]] KernelSpec to_spec(const std::vector<double>& x) const
    {
        const double c = std::pow(10.0, x[0]);
        switch (family) {
        case KernelFamily::Ridge: return KernelSpec::ridge(n, c);
        case KernelFamily::DI: return KernelSpec::di(n, c, x[1]);
        case KernelFamily::TC: return KernelSpec::tc(n, c, x[1]);
        default: return KernelSpec::dc(n, c, x[1], x[2]);
        }
    }

    void clip(std::vector<double>& x, const SearchOptions& o) const
    {
        x[0] = std::clamp(x[0], o.log10_c_min, o.log10_c_max);
        if (x.size() > 1) {
            x[1] = std::clamp(x[1], o.lambda_min, o.lambda_max);
        }
        if (x.size() > 2) {
            x[2] = std::clamp(x[2], -o.rho_abs_max, o.rho_abs_max);
        }
    }
};

struct NmContext {
    std::function<double(const std::vector<double>&)> fn;
};

inline double nm_trampoline(const gsl_vector* v, void* params)
{
    auto* ctx = static_cast<NmContext*>(params);
    std::vector<double> x(v->size);
    for (std::size_t i = 0; i < v->size; ++i) {
        x[i] = gsl_vector_get(v, i);
    }
    const double f = ctx->fn(x);
    return std::isfinite(f) ? f : GSL_POSINF;
}

} // namespace detail

/// Minimizes eb_objective over the family's hyperparameters: exhaustive grid,
/// then Nelder-Mead from the best grid point with coordinates clipped to the box.
inline KernelSpec fit_hyperparameters(const Vector& y, const Vector& u, int n, double sigma2, KernelFamily family,
                                      const SearchOptions& opts = {})
{
    if (y.size() != u.size()) {
        throw DimensionMismatch("y and u lengths differ");
    }
    if (!(sigma2 > 0.0)) {
        throw SearchFailure("noise variance must be > 0");
    }
    const detail::EbCoordinates coords{family, n};
    const int dim = coords.dim();
    const Matrix phi = build_circulant_regressor(u, n);

    auto objective = [&](std::vector<double> x) {
        coords.clip(x, opts);
        try {
            return detail::eb_objective_phi(build_kernel(coords.to_spec(x)), y, phi, sigma2);
        } catch (const Error&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    std::vector<double> c_grid = opts.c_grid;
    if (c_grid.empty()) {
        for (double e : detail::linspace(-4.0, 4.0, 17)) {
            c_grid.push_back(std::pow(10.0, e));
        }
    }
    const auto lambda_grid = opts.lambda_grid.empty() ? detail::linspace(0.5, 0.99, 10) : opts.lambda_grid;
    const auto rho_grid = opts.rho_grid.empty() ? detail::linspace(-0.95, 0.95, 9) : opts.rho_grid;
    const std::vector<double> unused{0.0};

    std::vector<double> best;
    double best_f = std::numeric_limits<double>::infinity();
    for (double c : c_grid) {
        for (double lam : dim > 1 ? lambda_grid : unused) {
            for (double rho : dim > 2 ? rho_grid : unused) {
                std::vector<double> x{std::log10(c), lam, rho};
                x.resize(static_cast<std::size_t>(dim));
                const double f = objective(x);
                if (f < best_f) {
                    best_f = f;
                    best = x;
                }
            }
        }
    }
    if (best.empty()) {
        throw SearchFailure("every grid probe produced a non positive definite covariance");
    }

    if (opts.refine) {
        static const bool handler_off = [] {
            gsl_set_error_handler_off();
            return true;
        }();
        (void)handler_off;
        detail::NmContext ctx{objective};
        gsl_multimin_function fn{&detail::nm_trampoline, static_cast<std::size_t>(dim), &ctx};
        const std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> x0(gsl_vector_alloc(dim), &gsl_vector_free);
        const std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> step(gsl_vector_alloc(dim), &gsl_vector_free);
        const double steps[3] = {0.25, 0.05, 0.1};
        for (int i = 0; i < dim; ++i) {
            gsl_vector_set(x0.get(), i, best[static_cast<std::size_t>(i)]);
            gsl_vector_set(step.get(), i, steps[i]);
        }
        const std::unique_ptr<gsl_multimin_fminimizer, decltype(&gsl_multimin_fminimizer_free)> nm(
            gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, dim), &gsl_multimin_fminimizer_free);
        gsl_multimin_fminimizer_set(nm.get(), &fn, x0.get(), step.get());
        for (int it = 0; it < opts.max_evaluations; ++it) {
            if (gsl_multimin_fminimizer_iterate(nm.get()) != GSL_SUCCESS) {
                break;
            }
            if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(nm.get()), 1e-7) == GSL_SUCCESS) {
                break;
            }
        }
        if (gsl_multimin_fminimizer_minimum(nm.get()) < best_f) {
            const gsl_vector* xm = gsl_multimin_fminimizer_x(nm.get());
            for (int i = 0; i < dim; ++i) {
                best[static_cast<std::size_t>(i)] = gsl_vector_get(xm, i);
            }
            best_f = gsl_multimin_fminimizer_minimum(nm.get());
        }
    }
    coords.clip(best, opts);
    return coords.to_spec(best);
}

/// Default order of the auxiliary LS fit used for noise estimation.
inline Eigen::Index default_noise_order(Eigen::Index N, Eigen::Index n) { return std::min(N / 2, n); }

/// Residual variance ||Y - Phi_m theta_LS||^2 / (N - m) of an order-m LS fit.
/// Requires at least two residual degrees of freedom.
inline double estimate_noise_variance(const Vector& y, const Vector& u, Eigen::Index m)
{
    const Eigen::Index N = u.size();
    if (y.size() != N) {
        throw DimensionMismatch("y and u lengths differ");
    }
    if (m < 1 || N - m < 2) {
        throw OrderTooLarge("noise order m=" + std::to_string(m) + " leaves fewer than 2 dof with N=" +
                            std::to_string(N));
    }
    const Matrix phi = build_circulant_regressor(u, m);
    const Vector theta = detail::ls_solve(phi, y);
    return (y - phi * theta).squaredNorm() / static_cast<double>(N - m);
}

} // namespace optinput

#endif // OPTINPUT_ESTIMATOR_HPP
