#ifndef OPTINPUT_DESIGN_SOLVER_HPP
#define OPTINPUT_DESIGN_SOLVER_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "optinput/design_map.hpp"
#include "optinput/errors.hpp"
#include "optinput/kernels.hpp"
#include "optinput/matrix_core.hpp"

namespace optinput {

enum class Criterion { D, A, E };

inline std::string_view to_string(Criterion c)
{
    switch (c) {
    case Criterion::D: return "D";
    case Criterion::A: return "A";
    case Criterion::E: return "E";
    }
    return "?";
}

inline Criterion criterion_from_string(std::string_view s)
{
    if (s == "D") return Criterion::D;
    if (s == "A") return Criterion::A;
    if (s == "E") return Criterion::E;
    throw ConfigError("unknown criterion '" + std::string(s) + "' (expected D, A or E)");
}

struct DesignProblem {
    KernelSpec kernel;
    double sigma2 = 1.0;
    int n = 1;
    int N = 1;
    double energy = 1.0;
    Criterion criterion = Criterion::D;

    void validate() const
    {
        if (n < 1 || N < n) {
            throw OrderTooLarge("design needs 1 <= n <= N (n=" + std::to_string(n) + ", N=" + std::to_string(N) + ")");
        }
        if (kernel.n != n) {
            throw DimensionMismatch("kernel order " + std::to_string(kernel.n) + " != n=" + std::to_string(n));
        }
        if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
            throw ConfigError("sigma2 must be a positive finite number");
        }
        if (!(energy > 0.0) || !std::isfinite(energy)) {
            throw ConfigError("energy must be a positive finite number");
        }
        optinput::validate(kernel);
    }
};

struct Certificate {
    double gap = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct DesignSolution {
    Criterion criterion = Criterion::D;
    double energy = 1.0;
    Vector r;
    Vector a; ///< weights over the N columns of S
    InputSequence u;
    double value = 0.0;
    Certificate certificate;
};

struct SolverOptions {
    double tol = 1e-8;        ///< FW stops once gap <= tol * |value|
    int max_iter = 5000;      ///< FW iteration budget
    int line_search_iter = 60;
    int e_max_iter = 20000;   ///< projected subgradient budget
    double e_step0 = 1.0;     ///< step gamma_k = e_step0 / sqrt(k) on the normalized direction
    int e_window = 1000;      ///< iterations between stagnation checks
    double e_tol = 1e-7;      ///< relative improvement of the best value that counts as stagnation
    SignPattern signs = SignPattern::all_positive();
};

/// Q(r) = r_0 I + sum_i r_i Q_i + sigma2 P^-1, i.e. Toeplitz(r) + sigma2 P^-1.
inline SymMatrix q_of_r(const Vector& r, const SymMatrix& p_inv, double sigma2)
{
    if (r.size() != p_inv.dim()) {
        throw DimensionMismatch("r has length " + std::to_string(r.size()) + ", P^-1 is " +
                                std::to_string(p_inv.dim()) + "x" + std::to_string(p_inv.dim()));
    }
    return SymMatrix(toeplitz(r).matrix() + sigma2 * p_inv.matrix());
}

/// sum over the i-th super- and sub-diagonal: Tr(M Q_i) for symmetric M.
inline double band_trace(const Matrix& m, Eigen::Index i)
{
    if (i == 0) {
        return m.trace();
    }
    double acc = 0.0;
    for (Eigen::Index j = 0; j + i < m.rows(); ++j) {
        acc += m(j, j + i) + m(j + i, j);
    }
    return acc;
}

/// Criterion value and (sub)gradient in r for a fixed kernel.
class CriterionModel {
public:
    CriterionModel(SymMatrix p_inv, double sigma2, Criterion crit)
        : p_inv_(std::move(p_inv)), sigma2_(sigma2), crit_(crit)
    {
    }

    explicit CriterionModel(const DesignProblem& p)
        : CriterionModel(kernel_inverse(p.kernel), p.sigma2, p.criterion)
    {
    }

    [[nodiscard]] Eigen::Index n() const noexcept { return p_inv_.dim(); }
    [[nodiscard]] Criterion criterion() const noexcept { return crit_; }
    [[nodiscard]] double sigma2() const noexcept { return sigma2_; }
    [[nodiscard]] const SymMatrix& p_inv() const noexcept { return p_inv_; }

    [[nodiscard]] SymMatrix q(const Vector& r) const { return q_of_r(r, p_inv_, sigma2_); }

    [[nodiscard]] double value(const Vector& r) const
    {
        const SymMatrix qr = q(r);
        switch (crit_) {
        case Criterion::D:
            return static_cast<double>(n()) * std::log(sigma2_) - logdet(qr);
        case Criterion::A:
            return sigma2_ * trace_of_inverse(qr);
        case Criterion::E: {
            const double lmin = min_eigpair(qr).value;
            if (!(lmin > 0.0)) {
                throw NotPositiveDefinite("Q(r) has non-positive smallest eigenvalue");
            }
            return sigma2_ / lmin;
        }
        }
        return 0.0;
    }

    /// Gradient over all of r_0..r_{n-1}; for E a subgradient.
    [[nodiscard]] Vector gradient_full(const Vector& r) const
    {
        const SymMatrix qr = q(r);
        const Eigen::Index nn = n();
        Vector g(nn);
        switch (crit_) {
        case Criterion::D: {
            const Matrix qinv = inverse(qr).matrix();
            for (Eigen::Index i = 0; i < nn; ++i) {
                g(i) = -band_trace(qinv, i);
            }
            break;
        }
        case Criterion::A: {
            const Matrix qinv = inverse(qr).matrix();
            const Matrix qinv2 = qinv * qinv;
            for (Eigen::Index i = 0; i < nn; ++i) {
                g(i) = -sigma2_ * band_trace(qinv2, i);
            }
            break;
        }
        case Criterion::E: {
            const EigenPair ep = min_eigpair(qr);
            if (!(ep.value > 0.0)) {
                throw NotPositiveDefinite("Q(r) has non-positive smallest eigenvalue");
            }
            const Matrix vvt = ep.vector * ep.vector.transpose();
            const double scale = sigma2_ / (ep.value * ep.value);
            for (Eigen::Index i = 0; i < nn; ++i) {
                g(i) = -scale * band_trace(vvt, i);
            }
            break;
        }
        }
        return g;
    }

    /// Hessian over r_0..r_{n-1}; D and A only.
    [[nodiscard]] Matrix hessian_full(const Vector& r) const
    {
        if (crit_ == Criterion::E) {
            throw PreconditionViolated("E criterion has no Hessian");
        }
        const Eigen::Index nn = n();
        const Matrix qinv = inverse(q(r)).matrix();
        // B_i = Q^-1 Q_i, with Q_i the symmetric shift of band i
        std::vector<Matrix> b(static_cast<std::size_t>(nn));
        for (Eigen::Index i = 0; i < nn; ++i) {
            Matrix qi = Matrix::Zero(nn, nn);
            for (Eigen::Index j = 0; j + i < nn; ++j) {
                qi(j, j + i) = 1.0;
                qi(j + i, j) = 1.0;
            }
            b[static_cast<std::size_t>(i)] = qinv * qi;
        }
        Matrix h(nn, nn);
        if (crit_ == Criterion::D) {
            for (Eigen::Index i = 0; i < nn; ++i) {
                for (Eigen::Index j = 0; j <= i; ++j) {
                    const auto& bi = b[static_cast<std::size_t>(i)];
                    const auto& bj = b[static_cast<std::size_t>(j)];
                    h(i, j) = h(j, i) = bi.cwiseProduct(bj.transpose()).sum();
                }
            }
        } else {
            std::vector<Matrix> c(b.size());
            for (std::size_t i = 0; i < b.size(); ++i) {
                c[i] = qinv * b[i];
            }
            for (Eigen::Index i = 0; i < nn; ++i) {
                for (Eigen::Index j = 0; j <= i; ++j) {
                    const auto si = static_cast<std::size_t>(i);
                    const auto sj = static_cast<std::size_t>(j);
                    h(i, j) = h(j, i) = sigma2_ * (c[si].cwiseProduct(b[sj].transpose()).sum() +
                                                   c[sj].cwiseProduct(b[si].transpose()).sum());
                }
            }
        }
        return h;
    }

    /// d/dr_i for i = 1..n-1.
    [[nodiscard]] Vector gradient(const Vector& r) const
    {
        const Vector g = gradient_full(r);
        return g.tail(g.size() - 1);
    }

private:
    SymMatrix p_inv_;
    double sigma2_;
    Criterion crit_;
};

/// r_dagger = [E, 0, ..., 0].
inline Vector r_dagger(Eigen::Index n, double energy)
{
    Vector r = Vector::Zero(n);
    r(0) = energy;
    return r;
}

inline double eval_criterion(const DesignProblem& p, const Vector& r) { return CriterionModel(p).value(r); }

inline Vector gradient_in_r(const DesignProblem& p, const Vector& r) { return CriterionModel(p).gradient(r); }

/// Euclidean projection onto the probability simplex.
inline Vector project_simplex(const Vector& v)
{
    const Eigen::Index k = v.size();
    std::vector<double> sorted(v.data(), v.data() + k);
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double cumsum = 0.0;
    double theta = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) {
        cumsum += sorted[static_cast<std::size_t>(i)];
        const double t = (cumsum - 1.0) / static_cast<double>(i + 1);
        if (sorted[static_cast<std::size_t>(i)] - t > 0.0) {
            theta = t;
        }
    }
    return (v.array() - theta).cwiseMax(0.0).matrix();
}

namespace detail {

/// Vertex weights that reproduce r_dagger: uniform mass over the N columns of S.
inline Vector r_dagger_vertex_weights(Eigen::Index N)
{
    return fold_weights(Vector::Constant(N, 1.0 / static_cast<double>(N)), N);
}

inline Eigen::Index argmin_lowest(const Vector& v)
{
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i) {
        if (v(i) < v(best)) {
            best = i;
        }
    }
    return best;
}

struct VertexIterate {
    Vector a;
    double value;
    double gap;
    int iterations;
    bool converged;
};

/// Away-step Frank-Wolfe over conv(columns of `verts`) for smooth D/A.
inline VertexIterate frank_wolfe(const CriterionModel& model, const Matrix& verts, Vector a,
                                 const SolverOptions& opts)
{
    const Eigen::Index k = verts.cols();
    double value = model.value(verts * a);
    double gap = 0.0;
    int it = 0;
    for (;; ++it) {
        const Vector r = verts * a;
        const Vector ga = verts.transpose() * model.gradient_full(r);
        const Eigen::Index s = argmin_lowest(ga);
        const double ga_dot_a = ga.dot(a);
        gap = std::max(0.0, ga_dot_a - ga(s));
        if (gap <= opts.tol * std::abs(value)) {
            return {a, value, gap, it, true};
        }
        if (it >= opts.max_iter) {
            return {a, value, gap, it, false};
        }

        Eigen::Index v = -1;
        for (Eigen::Index j = 0; j < k; ++j) {
            if (a(j) > 0.0 && (v < 0 || ga(j) > ga(v))) {
                v = j;
            }
        }
        const double away_gap = ga(v) - ga_dot_a;

        Vector dir;
        double gamma_max = 1.0;
        if (gap >= away_gap || a(v) >= 1.0) {
            dir = -a;
            dir(s) += 1.0;
        } else {
            dir = a;
            dir(v) -= 1.0;
            gamma_max = a(v) / (1.0 - a(v));
        }
        const Vector dr = verts * dir;
        auto slope = [&](double g) { return model.gradient_full(r + g * dr).dot(dr); };

        double gamma = gamma_max;
        if (slope(gamma_max) > 0.0) {
            double lo = 0.0;
            double hi = gamma_max;
            for (int b = 0; b < opts.line_search_iter; ++b) {
                const double mid = 0.5 * (lo + hi);
                if (slope(mid) > 0.0) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            gamma = lo;
        }
        Vector next = a + gamma * dir;
        next = next.cwiseMax(0.0);
        next /= next.sum();
        const double next_value = model.value(verts * next);
        if (next_value > value + 1e-14 * std::max(1.0, std::abs(value))) {
            // no descent at working precision
            return {a, value, gap, it, false};
        }
        a = std::move(next);
        value = next_value;
    }
}

/// min g.d + d'Gd/2 over d = x - a, x in the simplex (accelerated projected gradient).
inline Vector simplex_qp(const Matrix& G, const Vector& g, const Vector& a, int iters)
{
    const double lip = G.norm(); // Frobenius bound on the spectral norm
    if (!(lip > 0.0)) {
        Vector e = Vector::Zero(a.size());
        e(argmin_lowest(g)) = 1.0;
        return e;
    }
    Vector x = a;
    Vector y = a;
    double t = 1.0;
    for (int k = 0; k < iters; ++k) {
        const Vector grad = g + G * (y - a);
        const Vector xn = project_simplex(y - grad / lip);
        const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        y = xn + ((t - 1.0) / tn) * (xn - x);
        x = xn;
        t = tn;
    }
    return x;
}

/// Projected Newton over the vertex weights for D/A. Stops on the same
/// Frank-Wolfe gap test; a step that fails to descend ends the phase.
inline VertexIterate projected_newton(const CriterionModel& model, const Matrix& verts, Vector a,
                                      const SolverOptions& opts, int max_iter)
{
    double value = model.value(verts * a);
    double gap = 0.0;
    int it = 0;
    for (;; ++it) {
        const Vector r = verts * a;
        const Vector ga = verts.transpose() * model.gradient_full(r);
        gap = std::max(0.0, ga.dot(a) - ga.minCoeff());
        if (gap <= opts.tol * std::abs(value)) {
            return {a, value, gap, it, true};
        }
        if (it >= max_iter) {
            return {a, value, gap, it, false};
        }
        const Matrix G = verts.transpose() * model.hessian_full(r) * verts;
        const Vector dir = simplex_qp(G, ga, a, 400) - a;
        const Vector dr = verts * dir;
        const double slope0 = ga.dot(dir);
        if (!(slope0 < 0.0)) {
            return {a, value, gap, it, false};
        }
        // backtracking from the full Newton step
        double gamma = 1.0;
        Vector next;
        double next_value = value;
        bool accepted = false;
        for (int b = 0; b < opts.line_search_iter; ++b, gamma *= 0.5) {
            next = (a + gamma * dir).cwiseMax(0.0);
            next /= next.sum();
            try {
                next_value = model.value(verts * next);
            } catch (const NotPositiveDefinite&) {
                continue;
            }
            if (next_value <= value + 1e-4 * gamma * slope0) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            return {a, value, gap, it, false};
        }
        a = std::move(next);
        value = next_value;
    }
}

/// Projected subgradient with best-iterate tracking for the non-smooth E criterion.
inline VertexIterate projected_subgradient(const CriterionModel& model, const Matrix& verts, Vector a,
                                           const SolverOptions& opts)
{
    Vector best_a = a;
    double best = model.value(verts * a);
    double window_start_best = best;
    double spread = std::numeric_limits<double>::infinity();
    for (int it = 1; it <= opts.e_max_iter; ++it) {
        const Vector ga = verts.transpose() * model.gradient_full(verts * a);
        const Vector tangent = (ga.array() - ga.mean()).matrix();
        const double tn = tangent.norm();
        if (!(tn > 0.0)) {
            return {best_a, best, 0.0, it, true};
        }
        a = project_simplex(a - (opts.e_step0 / std::sqrt(static_cast<double>(it))) * tangent / tn);
        const double v = model.value(verts * a);
        if (v < best) {
            best = v;
            best_a = a;
        }
        if (it % opts.e_window == 0) {
            spread = window_start_best - best;
            if (spread <= opts.e_tol * std::abs(best)) {
                return {best_a, best, spread, it, true};
            }
            window_start_best = best;
        }
    }
    return {best_a, best, spread, opts.e_max_iter, false};
}

inline DesignSolution assemble_solution(const DesignProblem& p, const CriterionModel& model, const Vector& a_vertex,
                                        const Certificate& cert, const SignPattern& signs)
{
    DesignSolution sol;
    sol.criterion = p.criterion;
    sol.energy = p.energy;
    sol.a = expand_vertex_weights(a_vertex, p.N);
    sol.r = weights_to_r(sol.a, build_S(p.N, p.n), p.energy);
    sol.u = recover_input(sol.a, p.energy, p.N, signs);
    sol.value = model.value(sol.r);
    sol.certificate = cert;
    return sol;
}

} // namespace detail

/// Solves min over the feasible polytope of the chosen criterion and maps the
/// optimum back to an input. Never throws on budget exhaustion: the best
/// iterate is returned with certificate.converged == false.
inline DesignSolution solve(const DesignProblem& p, const SolverOptions& opts = {})
{
    p.validate();
    const CriterionModel model(p);
    const Matrix verts = vertices(p.N, p.n, p.energy);
    const Vector start = detail::r_dagger_vertex_weights(p.N);
    detail::VertexIterate res;
    if (p.criterion == Criterion::E) {
        res = detail::projected_subgradient(model, verts, start, opts);
    } else {
        res = detail::projected_newton(model, verts, start, opts, std::min(opts.max_iter, 200));
        if (!res.converged) {
            SolverOptions rest = opts;
            rest.max_iter = std::max(0, opts.max_iter - res.iterations);
            auto fw = detail::frank_wolfe(model, verts, res.a, rest);
            fw.iterations += res.iterations;
            res = std::move(fw);
        }
    }
    return detail::assemble_solution(p, model, res.a, {res.gap, res.iterations, res.converged}, opts.signs);
}

struct RdaggerCheck {
    bool is_stationary = false;
    Vector gradient;          ///< d phi / d r_i at r_dagger, i = 1..n-1
    Vector vertex_slopes;   ///< gradient . xi_j(2:n), j = 0..floor(N/2)
};

/// First-order optimality test of r_dagger over the polytope: r_dagger is the
/// D/A optimum iff grad . xi_j(2:n) >= 0 for every vertex frequency j.
inline RdaggerCheck check_rdagger_optimality(const DesignProblem& p)
{
    p.validate();
    if (p.criterion == Criterion::E) {
        throw PreconditionViolated("r_dagger optimality test applies to the smooth D and A criteria");
    }
    const CriterionModel model(p);
    RdaggerCheck out;
    out.gradient = model.gradient(r_dagger(p.n, p.energy));
    const Eigen::Index k = vertex_count(p.N);
    const Matrix s = build_S(p.N, p.n);
    out.vertex_slopes.resize(k);
    for (Eigen::Index j = 0; j < k; ++j) {
        out.vertex_slopes(j) = out.gradient.dot(s.col(j).tail(p.n - 1));
    }
    out.is_stationary = k == 0 || out.vertex_slopes.minCoeff() >= -1e-10;
    return out;
}

/// Exhaustive search over the grid {a : a_j = m_j / resolution} on the vertex
/// simplex. certificate.gap carries a bound on how far the best grid value can
/// sit above the true optimum (convexity + nearest grid point within l1 K/res).
inline DesignSolution brute_force_design(const DesignProblem& p, int resolution)
{
    p.validate();
    if (resolution < 1) {
        throw ConfigError("grid resolution must be >= 1");
    }
    const Eigen::Index k = vertex_count(p.N);
    if (k > 6) {
        throw TooManyVertices("brute force grid supports at most 6 vertices, got " + std::to_string(k));
    }
    const CriterionModel model(p);
    const Matrix verts = vertices(p.N, p.n, p.energy);

    Vector best_a;
    double best = std::numeric_limits<double>::infinity();
    double max_spread = 0.0;
    int points = 0;
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    Vector a(k);

    std::function<void(Eigen::Index, int)> visit = [&](Eigen::Index idx, int remaining) {
        if (idx == k - 1) {
            counts[static_cast<std::size_t>(idx)] = remaining;
            for (Eigen::Index j = 0; j < k; ++j) {
                a(j) = static_cast<double>(counts[static_cast<std::size_t>(j)]) / resolution;
            }
            const Vector r = verts * a;
            const double v = model.value(r);
            const Vector ga = verts.transpose() * model.gradient_full(r);
            max_spread = std::max(max_spread, ga.maxCoeff() - ga.minCoeff());
            ++points;
            if (v < best) {
                best = v;
                best_a = a;
            }
            return;
        }
        for (int m = 0; m <= remaining; ++m) {
            counts[static_cast<std::size_t>(idx)] = m;
            visit(idx + 1, remaining - m);
        }
    };
    visit(0, resolution);

    const double slack = 0.5 * max_spread * static_cast<double>(k) / resolution;
    return detail::assemble_solution(p, model, best_a, {slack, points, true}, SignPattern::all_positive());
}

} // namespace optinput

#endif // OPTINPUT_DESIGN_SOLVER_HPP
