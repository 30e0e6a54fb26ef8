#ifndef OPTINPUT_ANALYSIS_HPP
#define OPTINPUT_ANALYSIS_HPP

// Executable checks of how kernel structure decides whether the impulsive
// design r_dagger = [E, 0, ..., 0] is optimal. Every "r* != r_dagger" verdict
// is confirmed twice: a priori through the first-order vertex test at
// r_dagger, and a posteriori through a strict solver improvement.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "optinput/design_map.hpp"
#include "optinput/design_solver.hpp"
#include "optinput/errors.hpp"
#include "optinput/kernels.hpp"
#include "optinput/matrix_core.hpp"

namespace optinput {

struct AnalyticVerdict {
    std::string claim_id;
    bool holds = false;
    std::vector<double> witness;
    std::string detail;
};

namespace detail {

inline DesignProblem make_problem(const KernelSpec& k, int N, double sigma2, double energy, Criterion c)
{
    return {k, sigma2, k.n, N, energy, c};
}

inline double linf_distance(const Vector& a, const Vector& b) { return (a - b).cwiseAbs().maxCoeff(); }

/// Strictly-better-than-r_dagger test with a margin tied to the solver gap target.
struct Improvement {
    double value_rdagger;
    double value_opt;
    double margin;
    [[nodiscard]] bool strict() const { return value_opt < value_rdagger - margin; }
};

inline Improvement improvement(const DesignProblem& p, const SolverOptions& opts)
{
    const double at_dagger = eval_criterion(p, r_dagger(p.n, p.energy));
    const DesignSolution sol = solve(p, opts);
    return {at_dagger, sol.value, 10.0 * opts.tol * std::abs(at_dagger)};
}

inline bool is_tridiagonal(const SymMatrix& m)
{
    for (Eigen::Index i = 0; i < m.dim(); ++i) {
        for (Eigen::Index j = 0; j < m.dim(); ++j) {
            if (std::abs(i - j) >= 2 && m(i, j) != 0.0) {
                return false;
            }
        }
    }
    return true;
}

} // namespace detail

/// Diagonal kernels (ridge, DI, general diagonal): r_dagger is the unique D and A optimum.
inline AnalyticVerdict verify_ridge_diagonal(const KernelSpec& spec, int N, double sigma2, double energy,
                                             const SolverOptions& opts = {})
{
    if (spec.family != KernelFamily::Ridge && spec.family != KernelFamily::Diagonal &&
        spec.family != KernelFamily::DI) {
        throw PreconditionViolated("verify_ridge_diagonal needs a Ridge, Diagonal or DI kernel, got " +
                                   std::string(to_string(spec.family)));
    }
    AnalyticVerdict v{"ridge_diagonal:" + std::string(to_string(spec.family)), true, {}, {}};
    for (Criterion c : {Criterion::D, Criterion::A}) {
        const DesignProblem p = detail::make_problem(spec, N, sigma2, energy, c);
        const RdaggerCheck chk = check_rdagger_optimality(p);
        const double max_grad = chk.gradient.size() ? chk.gradient.cwiseAbs().maxCoeff() : 0.0;
        const DesignSolution sol = solve(p, opts);
        const double dist = detail::linf_distance(sol.r, r_dagger(p.n, energy));
        const bool ok = chk.is_stationary && max_grad <= 1e-10 && dist <= 1e-6 * energy;
        v.witness.insert(v.witness.end(), {max_grad, dist});
        if (!ok) {
            v.holds = false;
            v.detail += std::string(to_string(c)) + ": r_dagger not recovered; ";
        }
    }
    return v;
}

/// Sign structure of Q(r_dagger)^-1 for a kernel with tridiagonal inverse and
/// off-diagonals -e_j of one sign, followed by the non-optimality of r_dagger.
/// For e_j < 0 with odd N and n >= 3 the outcome is reported, not asserted.
inline AnalyticVerdict verify_tridiagonal_signs(const SymMatrix& p_inv, int N, double sigma2, double energy,
                                                const SolverOptions& opts = {})
{
    const Eigen::Index n = p_inv.dim();
    if (n < 2) {
        throw PreconditionViolated("tridiagonal sign test needs n >= 2");
    }
    if (!detail::is_tridiagonal(p_inv)) {
        throw PreconditionViolated("P^-1 is not tridiagonal");
    }
    int positive = 0;
    int negative = 0;
    for (Eigen::Index j = 1; j < n; ++j) {
        const double e = -p_inv(j - 1, j);
        positive += e > 0.0;
        negative += e < 0.0;
    }
    if (positive != n - 1 && negative != n - 1) {
        throw PreconditionViolated("off-diagonal entries of P^-1 must be nonzero and share one sign");
    }
    const bool e_positive = positive == n - 1;

    const SymMatrix q = q_of_r(r_dagger(n, energy), p_inv, sigma2);
    const Matrix qinv = inverse(q).matrix();
    const Matrix qinv2 = qinv * qinv;
    bool signs_ok = true;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const double expected = (e_positive || (std::abs(i - j) % 2 == 0)) ? 1.0 : -1.0;
            signs_ok = signs_ok && expected * qinv(i, j) > 0.0 && expected * qinv2(i, j) > 0.0;
        }
    }

    const bool asserted = e_positive || N % 2 == 0 || n == 2;
    AnalyticVerdict v{std::string("tridiagonal:") + (e_positive ? "e>0" : "e<0") + ",N=" + std::to_string(N),
                      signs_ok, {signs_ok ? 1.0 : 0.0}, {}};
    if (!signs_ok) {
        v.detail += "sign pattern of Q(r_dagger)^-1 mismatch; ";
    }
    const KernelSpec k = KernelSpec::custom_inverse_of(p_inv);
    for (Criterion c : {Criterion::D, Criterion::A}) {
        const DesignProblem p = detail::make_problem(k, N, sigma2, energy, c);
        const RdaggerCheck chk = check_rdagger_optimality(p);
        const auto imp = detail::improvement(p, opts);
        v.witness.insert(v.witness.end(), {chk.vertex_slopes.minCoeff(), imp.value_rdagger - imp.value_opt});
        if (asserted && (chk.is_stationary || !imp.strict())) {
            v.holds = false;
            v.detail += std::string(to_string(c)) + ": r_dagger not beaten; ";
        }
    }
    if (!asserted) {
        v.detail += "e<0 with odd N: non-optimality reported only; ";
    }
    return v;
}

struct TraceWitness {
    Vector d_traces; ///< Tr(Q^-1 Q_i), i = 1..n-1
    Vector a_traces; ///< Tr(Q^-2 Q_i)
};

inline TraceWitness rdagger_traces(const SymMatrix& p_inv, double sigma2, double energy)
{
    const Eigen::Index n = p_inv.dim();
    const Matrix qinv = inverse(q_of_r(r_dagger(n, energy), p_inv, sigma2)).matrix();
    const Matrix qinv2 = qinv * qinv;
    TraceWitness t{Vector(n - 1), Vector(n - 1)};
    for (Eigen::Index i = 1; i < n; ++i) {
        t.d_traces(i - 1) = band_trace(qinv, i);
        t.a_traces(i - 1) = band_trace(qinv2, i);
    }
    return t;
}

/// Any positive definite kernel with N >= 2n - 2: a nonzero trace
/// Tr(Q(r_dagger)^-k Q_i) means r_dagger is not optimal for that criterion;
/// if all traces vanish r_dagger is stationary and therefore optimal.
inline AnalyticVerdict verify_general_nondiagonal(const KernelSpec& spec, int N, double sigma2, double energy,
                                                  const SolverOptions& opts = {})
{
    const int n = spec.n;
    if (N < 2 * n - 2) {
        throw PreconditionViolated("need N >= 2n - 2 (n=" + std::to_string(n) + ", N=" + std::to_string(N) + ")");
    }
    const SymMatrix p_inv = kernel_inverse(spec);
    AnalyticVerdict v{"general:" + std::string(to_string(spec.family)) + ",N=" + std::to_string(N), true, {}, {}};
    if (n < 2) {
        v.detail = "n = 1: nothing to test";
        return v;
    }
    const TraceWitness t = rdagger_traces(p_inv, sigma2, energy);
    for (Criterion c : {Criterion::D, Criterion::A}) {
        const Vector& traces = c == Criterion::D ? t.d_traces : t.a_traces;
        const bool nonzero = traces.cwiseAbs().maxCoeff() > 1e-10;
        const DesignProblem p = detail::make_problem(spec, N, sigma2, energy, c);
        const DesignSolution sol = solve(p, opts);
        const double at_dagger = eval_criterion(p, r_dagger(n, energy));
        const double dist = detail::linf_distance(sol.r, r_dagger(n, energy));
        bool ok = false;
        if (nonzero) {
            ok = sol.value < at_dagger - 10.0 * opts.tol * std::abs(at_dagger);
        } else {
            ok = dist <= 1e-6 * energy;
        }
        v.witness.insert(v.witness.end(), {traces.cwiseAbs().maxCoeff(), at_dagger - sol.value, dist});
        if (!ok) {
            v.holds = false;
            v.detail += std::string(to_string(c)) + (nonzero ? ": nonzero trace but r_dagger not beaten; "
                                                             : ": zero traces but solver left r_dagger; ");
        }
    }
    return v;
}

/// The 3x3 nondiagonal P^-1 whose D-optimal design is still r_dagger.
inline SymMatrix impulse_optimal_inverse()
{
    Matrix m(3, 3);
    m << 1.0, 0.5, -0.125, 0.5, 1.0, -0.5, -0.125, -0.5, 1.0;
    return SymMatrix(m);
}

/// Q(r_dagger)^-1 for impulse_optimal_inverse() with E = sigma2 = 1, as exact rationals.
inline Matrix impulse_optimal_q_inverse()
{
    Matrix m(3, 3);
    m << 8.0 / 15.0, -2.0 / 15.0, 0.0, -2.0 / 15.0, 17.0 / 30.0, 2.0 / 15.0, 0.0, 2.0 / 15.0, 8.0 / 15.0;
    return m;
}

/// Reproduces the counterexample: zero D-gradient at r_dagger and r*_D = r_dagger.
/// The A criterion is reported in the witness only.
inline AnalyticVerdict verify_impulse_optimal(int N = 6, const SolverOptions& opts = {})
{
    const SymMatrix p_inv = impulse_optimal_inverse();
    const KernelSpec k = KernelSpec::custom_inverse_of(p_inv);
    const Matrix qinv = inverse(q_of_r(r_dagger(3, 1.0), p_inv, 1.0)).matrix();
    const double q_err = (qinv - impulse_optimal_q_inverse()).cwiseAbs().maxCoeff();
    const TraceWitness t = rdagger_traces(p_inv, 1.0, 1.0);
    const double trace_max = t.d_traces.cwiseAbs().maxCoeff();
    const DesignSolution d = solve(detail::make_problem(k, N, 1.0, 1.0, Criterion::D), opts);
    const double dist = detail::linf_distance(d.r, r_dagger(3, 1.0));
    const auto a_imp = detail::improvement(detail::make_problem(k, N, 1.0, 1.0, Criterion::A), opts);

    AnalyticVerdict v{"impulse_optimal:N=" + std::to_string(N), true, {q_err, trace_max, dist, a_imp.value_rdagger - a_imp.value_opt}, {}};
    if (q_err > 1e-12) {
        v.holds = false;
        v.detail += "Q(r_dagger)^-1 differs from the rational matrix; ";
    }
    if (trace_max > 1e-12) {
        v.holds = false;
        v.detail += "D gradient at r_dagger not zero; ";
    }
    if (dist > 1e-6) {
        v.holds = false;
        v.detail += "solver moved away from r_dagger; ";
    }
    return v;
}

struct WhiteNoiseRow {
    int N = 0;
    double median_gap = 0.0;
    double mean_gap = 0.0;
    std::vector<double> gaps;
};

/// criterion(f(u_wn)) - criterion(r_dagger) for white-noise inputs scaled to
/// energy E, over `seeds` draws per N.
inline std::vector<WhiteNoiseRow> asymptotic_white_noise_check(const KernelSpec& spec, double sigma2, double energy,
                                                               const std::vector<int>& N_list, int seeds = 50,
                                                               Criterion criterion = Criterion::D)
{
    if (spec.family != KernelFamily::Ridge && spec.family != KernelFamily::Diagonal &&
        spec.family != KernelFamily::DI) {
        throw PreconditionViolated("white-noise asymptotics apply to diagonal kernels");
    }
    const CriterionModel model(kernel_inverse(spec), sigma2, criterion);
    const double at_dagger = model.value(r_dagger(spec.n, energy));
    std::vector<WhiteNoiseRow> rows;
    for (int N : N_list) {
        WhiteNoiseRow row;
        row.N = N;
        for (int s = 0; s < seeds; ++s) {
            std::mt19937_64 rng(0x9E3779B97F4A7C15ULL ^ (static_cast<std::uint64_t>(N) << 32) ^
                                static_cast<std::uint64_t>(s));
            std::normal_distribution<double> gauss;
            Vector u(N);
            for (auto& x : u) {
                x = gauss(rng);
            }
            const InputSequence wn = InputSequence::rescaled(u, energy);
            row.gaps.push_back(model.value(quadratic_map(wn, spec.n)) - at_dagger);
        }
        std::vector<double> sorted = row.gaps;
        std::sort(sorted.begin(), sorted.end());
        const std::size_t m = sorted.size();
        row.median_gap = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
        for (double g : sorted) {
            row.mean_gap += g / static_cast<double>(m);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

/// Names accepted by run_claim, in suite order.
inline const std::vector<std::string>& claim_names()
{
    static const std::vector<std::string> names{"ridge",       "diagonal",   "dc_positive", "dc_negative",
                                                "two_tap",     "tc_general", "impulse_optimal",    "white_noise"};
    return names;
}

/// Runs one named claim with its default instance(s). Several instances are
/// merged into one verdict that holds only if all of them do.
inline AnalyticVerdict run_claim(const std::string& name, const SolverOptions& opts = {})
{
    auto merge = [&](std::vector<AnalyticVerdict> parts) {
        AnalyticVerdict v{name, true, {}, {}};
        for (auto& p : parts) {
            v.holds = v.holds && p.holds;
            v.witness.insert(v.witness.end(), p.witness.begin(), p.witness.end());
            if (!p.detail.empty()) {
                v.detail += p.claim_id + ": " + p.detail;
            }
        }
        return v;
    };
    if (name == "ridge") {
        return merge({verify_ridge_diagonal(KernelSpec::ridge(4, 3.0), 10, 1.0, 1.0, opts)});
    }
    if (name == "diagonal") {
        return merge({verify_ridge_diagonal(KernelSpec::di(4, 1.0, 0.7), 10, 1.0, 1.0, opts),
                      verify_ridge_diagonal(KernelSpec::diag({1.0, 2.0, 3.0, 0.5}), 10, 0.5, 2.0, opts)});
    }
    if (name == "dc_positive") {
        return merge({verify_tridiagonal_signs(dc_inverse(4, 1.0, 0.9, 0.6), 9, 1.0, 1.0, opts),
                      verify_tridiagonal_signs(dc_inverse(4, 1.0, 0.9, 0.6), 8, 1.0, 1.0, opts)});
    }
    if (name == "dc_negative") {
        return merge({verify_tridiagonal_signs(dc_inverse(4, 1.0, 0.9, -0.6), 8, 1.0, 1.0, opts)});
    }
    if (name == "two_tap") {
        auto two = [](double e) {
            Matrix m(2, 2);
            m << 1.0, -e, -e, 2.0;
            return SymMatrix(m);
        };
        return merge({verify_tridiagonal_signs(two(0.3), 5, 1.0, 1.0, opts),
                      verify_tridiagonal_signs(two(-0.3), 5, 1.0, 1.0, opts)});
    }
    if (name == "tc_general") {
        return merge({verify_general_nondiagonal(KernelSpec::tc(4, 1.0, 0.8), 8, 1.0, 1.0, opts)});
    }
    if (name == "impulse_optimal") {
        return merge({verify_impulse_optimal(3, opts), verify_impulse_optimal(6, opts)});
    }
    if (name == "white_noise") {
        const auto rows = asymptotic_white_noise_check(KernelSpec::ridge(4, 1.0), 1.0, 1.0, {32, 256}, 50);
        AnalyticVerdict v{name, rows.back().median_gap < rows.front().median_gap,
                          {rows.front().median_gap, rows.back().median_gap}, {}};
        if (!v.holds) {
            v.detail = "median gap did not shrink from N=32 to N=256";
        }
        return v;
    }
    throw ConfigError("unknown claim '" + name + "'");
}

} // namespace optinput

#endif // OPTINPUT_ANALYSIS_HPP
