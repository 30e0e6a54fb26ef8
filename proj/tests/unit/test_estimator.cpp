#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "optinput/design_map.hpp"
#include "optinput/estimator.hpp"
#include "oracles.hpp"

using namespace optinput;

namespace {

DataRecord record(const Vector& u, const Vector& y, std::optional<double> s2 = std::nullopt)
{
    return {InputSequence::from_values(u), y, s2};
}

/// theta ~ N(0, P) via the Cholesky factor of P.
Vector draw_prior(oracle::Gen& gen, const Matrix& p)
{
    Eigen::LLT<Matrix> llt(p);
    return llt.matrixL() * gen.gaussian(p.rows());
}

} // namespace

TEST(CirculantRegressor, Examples)
{
    Vector u(3);
    u << 1, 0, 0;
    Matrix expected(3, 2);
    expected << 1, 0, 0, 1, 0, 0;
    EXPECT_EQ(build_circulant_regressor(u, 2), expected);

    Vector ab(2);
    ab << 2.5, -1.0;
    EXPECT_EQ(build_circulant_regressor(ab, 1), Matrix(ab));

    Vector v(3);
    v << 1, 2, 3;
    const Matrix phi = build_circulant_regressor(v, 2);
    Matrix gram(2, 2);
    gram << 14, 11, 11, 14;
    EXPECT_EQ(phi.transpose() * phi, gram);
    EXPECT_EQ(toeplitz(quadratic_map(v, 2)).matrix(), gram);
    EXPECT_THROW(build_circulant_regressor(v, 4), OrderTooLarge);
}

TEST(LsEstimate, NoiseFreeRecovery)
{
    oracle::Gen gen(41);
    const Vector u = gen.gaussian(30);
    const Vector theta = gen.gaussian(6);
    const Vector y = oracle::regressor(u, 6) * theta;
    EXPECT_LE((ls_estimate(record(u, y), 6).theta - theta).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_EQ(ls_estimate(record(u, Vector::Zero(30)), 6).theta, Vector::Zero(6));
}

TEST(LsEstimate, NormalEquationsHold)
{
    oracle::Gen gen(42);
    const Vector u = gen.gaussian(25);
    const Vector y = gen.gaussian(25);
    const Matrix phi = oracle::regressor(u, 5);
    const Vector th = ls_estimate(record(u, y), 5).theta;
    EXPECT_LE((phi.transpose() * (y - phi * th)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(LsEstimate, SingularRegressor)
{
    EXPECT_THROW(ls_estimate(record(Vector::Ones(8), Vector::Ones(8)), 3), SingularRegressor);
}

TEST(RlsEstimate, VanishingRegularization)
{
    oracle::Gen gen(43);
    const Vector u = gen.gaussian(40);
    const Vector y = gen.gaussian(40);
    const DataRecord rec = record(u, y);
    const Vector ls = ls_estimate(rec, 4).theta;
    const Vector rls = rls_estimate(rec, SymMatrix(1e8 * Matrix::Identity(4, 4)), 0.5).theta;
    EXPECT_LE((rls - ls).norm(), 1e-4 * ls.norm());
    EXPECT_EQ(rls_estimate(record(u, Vector::Zero(40)), SymMatrix::identity(4), 1.0).theta, Vector::Zero(4));
}

TEST(RlsEstimate, TwoByTwoMatchesNormalForm)
{
    Vector u(2);
    u << 1.0, 0.3;
    Vector y(2);
    y << 0.7, -0.2;
    const Matrix phi = oracle::regressor(u, 2);
    const Vector ref = (phi.transpose() * phi + 0.4 * Matrix::Identity(2, 2)).inverse() * phi.transpose() * y;
    EXPECT_LE((rls_estimate(record(u, y), SymMatrix::identity(2), 0.4).theta - ref).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(BayesianMse, ImpulseWithRidge)
{
    const double e = 2.0;
    const double c = 3.0;
    const double s2 = 0.5;
    const Matrix m = bayesian_mse(InputSequence::impulse(8, e), SymMatrix(c * Matrix::Identity(4, 4)), s2, 4).matrix();
    EXPECT_LE((m - (s2 / (e + s2 / c)) * Matrix::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(BayesianMse, ZeroInputGivesPrior)
{
    const SymMatrix p = build_kernel(KernelSpec::tc(3, 1.0, 0.7));
    const Matrix m = bayesian_mse(InputSequence::from_values(Vector::Zero(5)), p, 0.8, 3).matrix();
    EXPECT_LE((m - p.matrix()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BayesianMse, EqualsRlsPosterior)
{
    oracle::Gen gen(44);
    const Vector u = gen.gaussian(12);
    const SymMatrix p = build_kernel(KernelSpec::dc(4, 1.0, 0.8, 0.5));
    const Matrix m = bayesian_mse(InputSequence::from_values(u), p, 0.3, 4).matrix();
    const Matrix post = rls_estimate(record(u, gen.gaussian(12)), p, 0.3).posterior_cov->matrix();
    EXPECT_LE((m - post).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(EbObjective, VanishingPrior)
{
    oracle::Gen gen(45);
    const Vector u = gen.gaussian(20);
    const Vector y = gen.gaussian(20);
    const double s2 = 0.7;
    const double v = eb_objective(SymMatrix(1e-12 * Matrix::Identity(3, 3)), y, u, 3, s2);
    EXPECT_NEAR(v, y.squaredNorm() / s2 + 20 * std::log(s2), 1e-3);
}

TEST(EbObjective, SignSymmetryAndOracle)
{
    oracle::Gen gen(46);
    for (int t = 0; t < 20; ++t) {
        const int n = gen.integer(1, 6);
        const int N = gen.integer(n, 30);
        const Vector u = gen.gaussian(N);
        const Vector y = gen.gaussian(N);
        const KernelSpec k = KernelSpec::tc(n, gen.uniform(0.1, 3.0), gen.uniform(0.5, 0.95));
        const SymMatrix p = build_kernel(k);
        const double s2 = gen.uniform(0.1, 2.0);
        const double v = eb_objective(p, y, u, n, s2);
        EXPECT_NEAR(v, eb_objective(p, -y, u, n, s2), 1e-12 * std::abs(v));
        EXPECT_NEAR(v, oracle::eb_woodbury(p.matrix(), y, u, n, s2), 1e-8 * std::abs(v));
    }
}

TEST(FitHyperparameters, RecoversTcDecay)
{
    oracle::Gen gen(47);
    const int n = 30;
    const int N = 200;
    const Matrix p = build_kernel(KernelSpec::tc(n, 1.0, 0.8)).matrix();
    std::vector<double> lambdas;
    for (int rep = 0; rep < 5; ++rep) {
        const Vector theta = draw_prior(gen, p);
        const Vector u = gen.gaussian(N);
        const double s2 = 1e-3 * (oracle::regressor(u, n) * theta).squaredNorm() / N;
        const Vector y = oracle::regressor(u, n) * theta + std::sqrt(s2) * gen.gaussian(N);
        lambdas.push_back(fit_hyperparameters(y, u, n, s2, KernelFamily::TC).lambda);
    }
    std::sort(lambdas.begin(), lambdas.end());
    EXPECT_NEAR(lambdas[2], 0.8, 0.15);
}

TEST(FitHyperparameters, HugeNoiseShrinksScale)
{
    oracle::Gen gen(48);
    const int n = 10;
    const int N = 100;
    const double c_true = 1.0;
    const Matrix p = build_kernel(KernelSpec::tc(n, c_true, 0.8)).matrix();
    const Vector theta = draw_prior(gen, p);
    const Vector u = gen.gaussian(N);
    const double s2 = 1e6;
    const Vector y = oracle::regressor(u, n) * theta + std::sqrt(s2) * gen.gaussian(N);
    EXPECT_LT(fit_hyperparameters(y, u, n, s2, KernelFamily::TC).c, 0.1 * c_true);
}

TEST(FitHyperparameters, SinglePointGrid)
{
    oracle::Gen gen(49);
    const Vector u = gen.gaussian(30);
    const Vector y = gen.gaussian(30);
    SearchOptions opts;
    opts.c_grid = {2.0};
    opts.lambda_grid = {0.7};
    opts.refine = false;
    const KernelSpec k = fit_hyperparameters(y, u, 5, 1.0, KernelFamily::TC, opts);
    EXPECT_EQ(k.family, KernelFamily::TC);
    EXPECT_NEAR(k.c, 2.0, 1e-12);
    EXPECT_NEAR(k.lambda, 0.7, 1e-15);
}

TEST(FitHyperparameters, AllFamiliesStayInDomain)
{
    oracle::Gen gen(50);
    const Vector u = gen.gaussian(40);
    const Vector y = oracle::regressor(u, 6) * gen.gaussian(6) + 0.1 * gen.gaussian(40);
    for (KernelFamily f : {KernelFamily::Ridge, KernelFamily::DI, KernelFamily::TC, KernelFamily::DC}) {
        const KernelSpec k = fit_hyperparameters(y, u, 6, 0.01, f);
        EXPECT_EQ(k.family, f);
        EXPECT_NO_THROW(validate(k));
    }
    EXPECT_THROW(fit_hyperparameters(y, u, 6, 0.01, KernelFamily::Diagonal), InvalidHyperparameter);
}

TEST(NoiseVariance, Examples)
{
    oracle::Gen gen(51);
    const Vector u = gen.gaussian(60);
    const Vector y = oracle::regressor(u, 5) * gen.gaussian(5);
    EXPECT_LE(estimate_noise_variance(y, u, 10), 1e-12 * y.squaredNorm());

    const int N = 200;
    const double s2 = 0.3;
    const Vector v = std::sqrt(s2) * gen.gaussian(N);
    const double est = estimate_noise_variance(v, gen.gaussian(N), 20);
    EXPECT_NEAR(est, s2, 0.3 * s2);

    EXPECT_THROW(estimate_noise_variance(y, u, 59), OrderTooLarge);
    EXPECT_EQ(default_noise_order(50, 50), 25);
    EXPECT_EQ(default_noise_order(50, 20), 20);
}

// ---- properties -----------------------------------------------------------------

TEST(EstimatorProperty, MatrixInversionLemma)
{
    oracle::Gen gen(52);
    for (int t = 0; t < 50; ++t) {
        const int n = gen.integer(1, 8);
        const int N = gen.integer(n, 30);
        const Vector u = gen.gaussian(N);
        const Vector y = gen.gaussian(N);
        const Matrix p = gen.spd(n);
        const double s2 = gen.uniform(0.05, 3.0);
        const Matrix phi = oracle::regressor(u, n);
        const Vector ref = (phi.transpose() * phi + s2 * p.inverse()).ldlt().solve(phi.transpose() * y);
        const Vector th = rls_estimate(record(u, y), SymMatrix(p), s2).theta;
        EXPECT_LE((th - ref).norm(), 1e-9 * std::max(1.0, ref.norm()));
    }
}

TEST(EstimatorProperty, PosteriorNeverExceedsPrior)
{
    oracle::Gen gen(53);
    for (int t = 0; t < 50; ++t) {
        const int n = gen.integer(1, 8);
        const int N = gen.integer(n, 30);
        const Matrix p = gen.spd(n);
        const double s2 = gen.uniform(0.05, 3.0);
        const Matrix m = bayesian_mse(InputSequence::from_values(gen.gaussian(N)), SymMatrix(p), s2, n).matrix();
        Eigen::SelfAdjointEigenSolver<Matrix> es(p - m);
        EXPECT_GE(es.eigenvalues()(0), -1e-10);
    }
}

TEST(EstimatorProperty, EbObjectiveSmoothInInterior)
{
    oracle::Gen gen(54);
    const int n = 6;
    const int N = 40;
    const Vector u = gen.gaussian(N);
    const Vector y = gen.gaussian(N);
    auto f = [&](double logc, double lam) {
        return eb_objective(build_kernel(KernelSpec::tc(n, std::pow(10.0, logc), lam)), y, u, n, 0.5);
    };
    const double h = 1e-6;
    for (int t = 0; t < 20; ++t) {
        const double lc = gen.uniform(-2.0, 2.0);
        const double lam = gen.uniform(0.55, 0.95);
        const double central_c = (f(lc + h, lam) - f(lc - h, lam)) / (2 * h);
        const double forward_c = (f(lc + h, lam) - f(lc, lam)) / h;
        const double central_l = (f(lc, lam + h) - f(lc, lam - h)) / (2 * h);
        const double forward_l = (f(lc, lam + h) - f(lc, lam)) / h;
        EXPECT_NEAR(central_c, forward_c, 1e-3 * std::max(1.0, std::abs(central_c)));
        EXPECT_NEAR(central_l, forward_l, 1e-3 * std::max(1.0, std::abs(central_l)));
    }
}

TEST(DataRecordValidation, LengthMismatch)
{
    EXPECT_THROW(record(Vector::Ones(4), Vector::Ones(3)).validate(), DimensionMismatch);
    EXPECT_THROW(ls_estimate(record(Vector::Ones(4), Vector::Ones(3)), 2), DimensionMismatch);
}
