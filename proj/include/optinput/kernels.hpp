#ifndef OPTINPUT_KERNELS_HPP
#define OPTINPUT_KERNELS_HPP

#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "optinput/errors.hpp"
#include "optinput/matrix_core.hpp"

namespace optinput {

enum class KernelFamily { Ridge, Diagonal, DI, TC, DC, CustomInverse };

inline std::string_view to_string(KernelFamily f)
{
    switch (f) {
    case KernelFamily::Ridge: return "Ridge";
    case KernelFamily::Diagonal: return "Diagonal";
    case KernelFamily::DI: return "DI";
    case KernelFamily::TC: return "TC";
    case KernelFamily::DC: return "DC";
    case KernelFamily::CustomInverse: return "CustomInverse";
    }
    return "?";
}

inline KernelFamily kernel_family_from_string(std::string_view s)
{
    for (auto f : {KernelFamily::Ridge, KernelFamily::Diagonal, KernelFamily::DI, KernelFamily::TC,
             KernelFamily::DC, KernelFamily::CustomInverse}) {
        if (s == to_string(f)) {
            return f;
        }
    }
    throw InvalidHyperparameter("unknown kernel family '" + std::string(s) + "'");
}

/// Hyperparameterized prior covariance P(eta) of an order-n FIR model.
///
/// Which fields are meaningful depends on `family`:
///   Ridge         c
///   DI            c, lambda          P = diag(c lambda^k)
///   Diagonal      diagonal           P = diag(lambda_1..lambda_n)
///   TC            c, lambda          P_kj = c lambda^max(k,j)
///   DC            c, lambda, rho     P_kj = c lambda^((k+j)/2) rho^|k-j|
///   CustomInverse custom_inverse     P^-1 given explicitly
struct KernelSpec {
    KernelFamily family = KernelFamily::Ridge;
    int n = 1;
    double c = 1.0;
    double lambda = 1.0;
    double rho = 0.0;
    std::vector<double> diagonal;
    std::optional<SymMatrix> custom_inverse;

    static KernelSpec ridge(int n, double c) { return {KernelFamily::Ridge, n, c, 1.0, 0.0, {}, {}}; }
    static KernelSpec di(int n, double c, double lambda) { return {KernelFamily::DI, n, c, lambda, 0.0, {}, {}}; }
    static KernelSpec tc(int n, double c, double lambda) { return {KernelFamily::TC, n, c, lambda, 0.0, {}, {}}; }
    static KernelSpec dc(int n, double c, double lambda, double rho)
    {
        return {KernelFamily::DC, n, c, lambda, rho, {}, {}};
    }
    static KernelSpec diag(std::vector<double> lambdas)
    {
        const int n = static_cast<int>(lambdas.size());
        return {KernelFamily::Diagonal, n, 1.0, 1.0, 0.0, std::move(lambdas), {}};
    }
    static KernelSpec custom_inverse_of(const SymMatrix& p_inv)
    {
        return {KernelFamily::CustomInverse, static_cast<int>(p_inv.dim()), 1.0, 1.0, 0.0, {}, p_inv};
    }
};

/// Throws InvalidHyperparameter unless the spec lies in the strict interior
/// of its family's domain (c > 0, 0 < lambda <= 1, |rho| < 1, ...).
inline void validate(const KernelSpec& s)
{
    auto fail = [&](const std::string& msg) {
        throw InvalidHyperparameter(std::string(to_string(s.family)) + ": " + msg);
    };
    if (s.n < 1) {
        fail("order n must be >= 1");
    }
    auto finite = [](double v) { return std::isfinite(v); };
    switch (s.family) {
    case KernelFamily::Ridge:
        if (!finite(s.c) || s.c <= 0.0) fail("c must be > 0");
        break;
    case KernelFamily::DI:
        if (!finite(s.c) || s.c <= 0.0) fail("c must be > 0");
        if (!finite(s.lambda) || s.lambda <= 0.0) fail("lambda must be > 0");
        break;
    case KernelFamily::TC:
        if (!finite(s.c) || s.c <= 0.0) fail("c must be > 0");
        if (!finite(s.lambda) || s.lambda <= 0.0 || s.lambda > 1.0) fail("lambda must be in (0, 1]");
        break;
    case KernelFamily::DC:
        if (!finite(s.c) || s.c <= 0.0) fail("c must be > 0");
        if (!finite(s.lambda) || s.lambda <= 0.0 || s.lambda > 1.0) fail("lambda must be in (0, 1]");
        if (!finite(s.rho) || std::abs(s.rho) >= 1.0) fail("|rho| must be < 1");
        break;
    case KernelFamily::Diagonal:
        if (static_cast<int>(s.diagonal.size()) != s.n) fail("diagonal needs exactly n entries");
        for (double v : s.diagonal) {
            if (!finite(v) || v <= 0.0) fail("all diagonal entries must be > 0");
        }
        break;
    case KernelFamily::CustomInverse:
        if (!s.custom_inverse || s.custom_inverse->dim() != s.n) fail("custom inverse must be n x n");
        break;
    }
}

/// P(eta). Indices k, j run over 1..n in the closed forms.
inline SymMatrix build_kernel(const KernelSpec& s)
{
    validate(s);
    const int n = s.n;
    Matrix p = Matrix::Zero(n, n);
    switch (s.family) {
    case KernelFamily::Ridge:
        p.diagonal().setConstant(s.c);
        break;
    case KernelFamily::DI:
        for (int k = 1; k <= n; ++k) {
            p(k - 1, k - 1) = s.c * std::pow(s.lambda, k);
        }
        break;
    case KernelFamily::Diagonal:
        for (int k = 0; k < n; ++k) {
            p(k, k) = s.diagonal[static_cast<std::size_t>(k)];
        }
        break;
    case KernelFamily::TC:
        for (int k = 1; k <= n; ++k) {
            for (int j = 1; j <= n; ++j) {
                p(k - 1, j - 1) = s.c * std::pow(s.lambda, std::max(k, j));
            }
        }
        break;
    case KernelFamily::DC:
        for (int k = 1; k <= n; ++k) {
            for (int j = 1; j <= n; ++j) {
                p(k - 1, j - 1) = s.c * std::pow(s.lambda, 0.5 * (k + j)) * std::pow(s.rho, std::abs(j - k));
            }
        }
        break;
    case KernelFamily::CustomInverse:
        return inverse(*s.custom_inverse);
    }
    return SymMatrix(p);
}

/// Closed-form tridiagonal inverse of the DC kernel.
inline SymMatrix dc_inverse(int n, double c, double lambda, double rho)
{
    validate(KernelSpec::dc(n, c, lambda, rho));
    Matrix inv = Matrix::Zero(n, n);
    if (n == 1) {
        inv(0, 0) = 1.0 / (c * lambda);
        return SymMatrix(inv);
    }
    const double scale = 1.0 / (c * (1.0 - rho * rho));
    for (int k = 1; k <= n; ++k) {
        const double d = (k == 1 || k == n) ? 1.0 : 1.0 + rho * rho;
        inv(k - 1, k - 1) = scale * d / std::pow(lambda, k);
        if (k < n) {
            const double off = -scale * rho / std::pow(lambda, 0.5 * (2 * k + 1));
            inv(k - 1, k) = off;
            inv(k, k - 1) = off;
        }
    }
    return SymMatrix(inv);
}

inline SymMatrix dc_inverse(const KernelSpec& s)
{
    if (s.family != KernelFamily::DC) {
        throw InvalidHyperparameter("dc_inverse requires a DC kernel spec");
    }
    return dc_inverse(s.n, s.c, s.lambda, s.rho);
}

/// P^-1, using a closed form where one exists.
inline SymMatrix kernel_inverse(const KernelSpec& s)
{
    validate(s);
    switch (s.family) {
    case KernelFamily::Ridge:
    case KernelFamily::DI:
    case KernelFamily::Diagonal:
        return SymMatrix(Matrix(build_kernel(s).matrix().diagonal().cwiseInverse().asDiagonal()));
    case KernelFamily::DC:
        return dc_inverse(s);
    case KernelFamily::TC:
        // TC is DC with rho = sqrt(lambda); lambda = 1 makes P rank one.
        if (s.lambda < 1.0) {
            return dc_inverse(s.n, s.c, s.lambda, std::sqrt(s.lambda));
        }
        return inverse(build_kernel(s));
    case KernelFamily::CustomInverse:
        return *s.custom_inverse;
    }
    return inverse(build_kernel(s));
}

} // namespace optinput

#endif // OPTINPUT_KERNELS_HPP
