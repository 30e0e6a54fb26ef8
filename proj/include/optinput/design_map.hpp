#ifndef OPTINPUT_DESIGN_MAP_HPP
#define OPTINPUT_DESIGN_MAP_HPP

// The circular autocorrelation map r = f(u) and its factorization
// f(u) = S * square(W^T u). W is the real Fourier basis that simultaneously
// diagonalizes every symmetric shift L_j; S holds the resulting eigenvalues
// cos(j l w), w = 2 pi / N. The image of the power sphere u^T u = E is the
// polytope conv{E xi_j(1:n)}, so design problems can run over simplex
// weights and map back to inputs through u = W z, z = +-sqrt(E a).

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "optinput/errors.hpp"
#include "optinput/input_sequence.hpp"
#include "optinput/matrix_core.hpp"

namespace optinput {

namespace detail {

inline void require_order(Eigen::Index N, Eigen::Index n)
{
    if (n < 1) {
        throw OrderTooLarge("model order must be >= 1");
    }
    if (n > N) {
        throw OrderTooLarge("order n=" + std::to_string(n) + " exceeds length N=" + std::to_string(N));
    }
}

inline double trig_angle(Eigen::Index N, Eigen::Index l, Eigen::Index j)
{
    // reduce l*j mod N first so that xi_j and xi_{N-j} agree to the last bit
    const auto m = static_cast<double>((l * j) % N);
    return 2.0 * std::numbers::pi * m / static_cast<double>(N);
}

} // namespace detail

/// Cosine / sine vectors at frequency j * 2pi/N.
struct TrigBasis {
    Eigen::Index N = 1;

    [[nodiscard]] Vector xi(Eigen::Index j) const
    {
        Vector v(N);
        for (Eigen::Index l = 0; l < N; ++l) {
            v(l) = std::cos(detail::trig_angle(N, l, j));
        }
        return v;
    }

    [[nodiscard]] Vector zeta(Eigen::Index j) const
    {
        Vector v(N);
        for (Eigen::Index l = 0; l < N; ++l) {
            v(l) = std::sin(detail::trig_angle(N, l, j));
        }
        return v;
    }
};

/// r_j = sum_k u_k u_{(k-j) mod N}, j = 0..n-1.
inline Vector quadratic_map(const Vector& u, Eigen::Index n)
{
    const Eigen::Index N = u.size();
    detail::require_order(N, n);
    Vector r = Vector::Zero(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double acc = 0.0;
        for (Eigen::Index k = 0; k < N; ++k) {
            acc += u(k) * u(((k - j) % N + N) % N);
        }
        r(j) = acc;
    }
    return r;
}

inline Vector quadratic_map(const InputSequence& u, Eigen::Index n) { return quadratic_map(u.values, n); }

/// R(r): symmetric Toeplitz matrix with first row r.
inline SymMatrix toeplitz(const Vector& r)
{
    const Eigen::Index n = r.size();
    Matrix m(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            m(i, j) = r(std::abs(i - j));
        }
    }
    return SymMatrix(m);
}

/// Orthogonal N x N basis. Column 0 is xi_0/sqrt2, columns 1..floor((N-1)/2)
/// the cosines, column N/2 (even N) xi_{N/2}/sqrt2, and column N-j holds
/// zeta_j; everything scaled by sqrt(2/N).
inline Matrix build_W(Eigen::Index N)
{
    if (N < 1) {
        throw DimensionMismatch("build_W requires N >= 1");
    }
    const TrigBasis basis{N};
    const double scale = std::sqrt(2.0 / static_cast<double>(N));
    Matrix w(N, N);
    w.col(0) = basis.xi(0) / std::numbers::sqrt2;
    const Eigen::Index half = (N - 1) / 2;
    for (Eigen::Index j = 1; j <= half; ++j) {
        w.col(j) = basis.xi(j);
        w.col(N - j) = basis.zeta(j);
    }
    if (N % 2 == 0 && N >= 2) {
        w.col(N / 2) = basis.xi(N / 2) / std::numbers::sqrt2;
    }
    return scale * w;
}

/// S[j][l] = cos(j l 2pi/N), j = 0..n-1, l = 0..N-1.
inline Matrix build_S(Eigen::Index N, Eigen::Index n)
{
    detail::require_order(N, n);
    Matrix s(n, N);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index l = 0; l < N; ++l) {
            s(j, l) = std::cos(detail::trig_angle(N, l, j));
        }
    }
    return s;
}

/// Rank of S predicted by the trigonometric structure.
inline Eigen::Index expected_rank_S(Eigen::Index N, Eigen::Index n)
{
    return std::min(N % 2 == 0 ? N / 2 + 1 : (N + 1) / 2, n);
}

/// Number of distinct vertices of the feasible polytope: floor(N/2) + 1.
inline Eigen::Index vertex_count(Eigen::Index N) { return N / 2 + 1; }

/// S * square(W^T u), computed through the factorization.
inline Vector composite_map(const Vector& u, Eigen::Index n)
{
    const Eigen::Index N = u.size();
    const Vector z = build_W(N).transpose() * u;
    return build_S(N, n) * z.array().square().matrix();
}

/// True when the factorized map reproduces the direct correlations to 1e-9 E.
inline bool decompose_check(const Vector& u, Eigen::Index n)
{
    const double e = u.squaredNorm();
    const Vector direct = quadratic_map(u, n);
    const Vector composite = composite_map(u, n);
    const double tol = 1e-9 * std::max(e, std::numeric_limits<double>::min());
    return (direct - composite).cwiseAbs().maxCoeff() <= tol || (e == 0.0 && composite.isZero(0.0));
}

/// Columns E * xi_j(1:n) for j = 0..floor(N/2).
inline Matrix vertices(Eigen::Index N, Eigen::Index n, double energy)
{
    detail::require_order(N, n);
    const Eigen::Index k = vertex_count(N);
    return energy * build_S(N, n).leftCols(k);
}

/// Throws InvalidWeights unless a >= 0 and sum(a) == 1 within 1e-10.
inline void check_simplex(const Vector& a, double tol = 1e-10)
{
    if (a.size() == 0) {
        throw InvalidWeights("empty weight vector");
    }
    if (!a.allFinite()) {
        throw InvalidWeights("non-finite weight");
    }
    if (a.minCoeff() < -tol) {
        throw InvalidWeights("negative weight " + std::to_string(a.minCoeff()));
    }
    if (std::abs(a.sum() - 1.0) > tol) {
        throw InvalidWeights("weights sum to " + std::to_string(a.sum()));
    }
}

/// r = E * S * a over the full N-column S.
inline Vector weights_to_r(const Vector& a, const Matrix& s, double energy)
{
    if (a.size() != s.cols()) {
        throw InvalidWeights("weight length does not match S columns");
    }
    check_simplex(a);
    return energy * (s * a);
}

/// Spread K vertex weights onto the N columns of S. Vertex j in 1..ceil(N/2)-1
/// appears twice in S (columns j and N-j) and its mass is split evenly.
inline Vector expand_vertex_weights(const Vector& a_vertex, Eigen::Index N)
{
    if (a_vertex.size() != vertex_count(N)) {
        throw InvalidWeights("expected floor(N/2)+1 vertex weights");
    }
    Vector a = Vector::Zero(N);
    a(0) = a_vertex(0);
    for (Eigen::Index j = 1; j < a_vertex.size(); ++j) {
        if (N - j == j) {
            a(j) = a_vertex(j);
        } else {
            a(j) = 0.5 * a_vertex(j);
            a(N - j) = 0.5 * a_vertex(j);
        }
    }
    return a;
}

/// Inverse of expand_vertex_weights: sums mirrored columns.
inline Vector fold_weights(const Vector& a, Eigen::Index N)
{
    if (a.size() != N) {
        throw InvalidWeights("expected N weights");
    }
    Vector out = Vector::Zero(vertex_count(N));
    for (Eigen::Index l = 0; l < N; ++l) {
        out(std::min(l, N - l)) += a(l);
    }
    return out;
}

/// Signs applied to z = +-sqrt(x) when recovering an input.
struct SignPattern {
    enum class Kind { AllPositive, Explicit, Random };
    Kind kind = Kind::AllPositive;
    std::vector<int> signs;
    std::uint64_t seed = 0;

    static SignPattern all_positive() { return {}; }
    static SignPattern explicit_signs(std::vector<int> s) { return {Kind::Explicit, std::move(s), 0}; }
    static SignPattern random(std::uint64_t seed) { return {Kind::Random, {}, seed}; }

    [[nodiscard]] std::vector<int> resolve(Eigen::Index N) const
    {
        switch (kind) {
        case Kind::AllPositive:
            return std::vector<int>(static_cast<std::size_t>(N), 1);
        case Kind::Explicit:
            if (static_cast<Eigen::Index>(signs.size()) != N) {
                throw InvalidWeights("sign pattern length must equal N");
            }
            for (int s : signs) {
                if (s != 1 && s != -1) {
                    throw InvalidWeights("signs must be +1 or -1");
                }
            }
            return signs;
        case Kind::Random: {
            std::mt19937_64 rng(seed);
            std::bernoulli_distribution coin(0.5);
            std::vector<int> out(static_cast<std::size_t>(N));
            for (auto& s : out) {
                s = coin(rng) ? 1 : -1;
            }
            return out;
        }
        }
        return {};
    }
};

/// One member of the inverse image f^-1(E S a): x = E a, z = s .* sqrt(x), u = W z.
inline InputSequence recover_input(const Vector& a, double energy, Eigen::Index N,
                                   const SignPattern& signs = SignPattern::all_positive())
{
    if (a.size() != N) {
        throw InvalidWeights("weight length must equal N");
    }
    if (!(energy > 0.0)) {
        throw InvalidWeights("energy must be > 0");
    }
    check_simplex(a);
    const auto s = signs.resolve(N);
    Vector x = energy * a.cwiseMax(0.0);
    x *= energy / x.sum();
    Vector z(N);
    for (Eigen::Index i = 0; i < N; ++i) {
        z(i) = s[static_cast<std::size_t>(i)] * std::sqrt(x(i));
    }
    Vector u = build_W(N) * z;
    // W is orthogonal to rounding; pin the energy exactly
    u *= std::sqrt(energy / u.squaredNorm());
    return {std::move(u), energy, true};
}

/// Orthogonal basis of {x : S x = 0} built from unused cosines and all sines.
inline std::vector<Vector> nullspace_basis(Eigen::Index N, Eigen::Index n)
{
    detail::require_order(N, n);
    const TrigBasis basis{N};
    std::vector<Vector> out;
    const Eigen::Index top_cos = N / 2; // highest distinct cosine index
    for (Eigen::Index j = n; j <= top_cos; ++j) {
        out.push_back(basis.xi(j));
    }
    for (Eigen::Index j = 1; j <= (N - 1) / 2; ++j) {
        out.push_back(basis.zeta(j));
    }
    return out;
}

} // namespace optinput

#endif // OPTINPUT_DESIGN_MAP_HPP
