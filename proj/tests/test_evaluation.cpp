#include <gtest/gtest.h>

#include <algorithm>

#include "ctds/evaluation.hpp"
#include "test_util.hpp"

using namespace ctds;
using test::rel_err;

namespace {

double brute_force_w2(const Mat& a, const Mat& b) {
    const Index n = a.cols();
    std::vector<Index> perm(n);
    for (Index i = 0; i < n; ++i) perm[i] = i;
    double best = std::numeric_limits<double>::infinity();
    do {
        double c = 0.0;
        for (Index i = 0; i < n; ++i) c += (a.col(i) - b.col(perm[i])).squaredNorm();
        best = std::min(best, c);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return std::sqrt(best / n);
}

Mat random_points(Rng& rng, Index d, Index n, double scale = 2.0) {
    Mat m(d, n);
    for (Index j = 0; j < n; ++j) m.col(j) = scale * rng.gaussian_vec(d);
    return m;
}

}  // namespace

TEST(Wasserstein, IdenticalSetsGiveZero) {
    Rng rng(1);
    Mat a = random_points(rng, 2, 8);
    EXPECT_DOUBLE_EQ(wasserstein2(a, a), 0.0);
}

TEST(Wasserstein, SinglePairIsEuclideanDistance) {
    Mat a(2, 1), b(2, 1);
    a << 0.0, 0.0;
    b << 3.0, 0.0;
    EXPECT_DOUBLE_EQ(wasserstein2(a, b), 3.0);
}

TEST(Wasserstein, MatchesBruteForceOnSmallSets) {
    Rng rng(2);
    for (int trial = 0; trial < 60; ++trial) {
        const Index n = 2 + trial % 5;  // 2..6
        Mat a = random_points(rng, 2, n), b = random_points(rng, 2, n);
        EXPECT_LT(rel_err(wasserstein2(a, b), brute_force_w2(a, b), 1e-9), 1e-10);
    }
}

TEST(Wasserstein, SymmetryTriangleAndScale) {
    Rng rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        Mat a = random_points(rng, 2, 12), b = random_points(rng, 2, 12),
            c = random_points(rng, 2, 12);
        const double ab = wasserstein2(a, b), ba = wasserstein2(b, a);
        EXPECT_LT(rel_err(ab, ba, 1e-9), 1e-10);
        const double ac = wasserstein2(a, c), cb = wasserstein2(c, b);
        EXPECT_LE(ab, ac + cb + 1e-9);
        const double s = 2.5;
        EXPECT_LT(rel_err(wasserstein2(s * a, s * b), s * ab, 1e-9), 1e-10);
    }
}

TEST(Wasserstein, SizeMismatchRejected) {
    Mat a = Mat::Zero(2, 3), b = Mat::Zero(2, 4);
    EXPECT_THROW(wasserstein2(a, b), validation_error);
}

TEST(Generate, ZeroControlReproducesSource) {
    IsotropicGaussian source(2, 5.0);
    auto set = generate(zero_control(2), source, 500, 0.004, 9);
    ASSERT_EQ(set.points.cols(), 500);
    EXPECT_EQ(set.n_diverged, 0);
    for (Index j = 0; j < set.points.cols(); ++j) {
        EXPECT_DOUBLE_EQ(set.log_density[j], source.log_density(set.points.col(j)));
    }
    // samples distributed as the source (variance check, 3 SE)
    double second = 0.0;
    for (Index j = 0; j < 500; ++j) second += set.points.col(j).squaredNorm();
    second /= (2.0 * 500);
    EXPECT_NEAR(second, 5.0, 3.0 * 5.0 * std::sqrt(2.0 / 1000.0));
}

TEST(Generate, OracleControlPushesToTargetCovarianceAndDensity) {
    GaussianOracle oracle;
    IsotropicGaussian source = oracle.source();
    const Index n = 4000;
    auto set = generate(oracle_control(oracle), source, n, 0.001, 11);
    ASSERT_EQ(set.n_diverged, 0);
    double second = 0.0;
    for (Index j = 0; j < set.points.cols(); ++j) second += set.points.col(j).squaredNorm();
    second /= (2.0 * n);
    const double s1sq = oracle.sigma1 * oracle.sigma1;
    EXPECT_NEAR(second, s1sq, 3.0 * s1sq * std::sqrt(2.0 / (2.0 * n)));
    // co-integrated log-density matches the closed-form pushforward N(0, sigma1^2 I);
    // the O(dt) Euler bias grows with |x|^2, so tails get a looser bound
    IsotropicGaussian target = oracle.target();
    double mean_err = 0.0, max_err = 0.0;
    for (Index j = 0; j < set.points.cols(); ++j) {
        const double e = std::abs(set.log_density[j] - target.log_density(set.points.col(j)));
        mean_err += e;
        max_err = std::max(max_err, e);
    }
    mean_err /= set.points.cols();
    EXPECT_LT(mean_err, 5e-3);
    EXPECT_LT(max_err, 3e-2);
}

TEST(Reverse, ZeroControlReturnsSourceLogDensity) {
    IsotropicGaussian source(2, 5.0);
    Rng rng(5);
    Mat x = random_points(rng, 2, 20);
    Vec ld = reverse_log_density(zero_control(2), source, x, 0.004);
    for (Index j = 0; j < 20; ++j) EXPECT_DOUBLE_EQ(ld[j], source.log_density(x.col(j)));
}

TEST(Reverse, RoundTripErrorHalvesWithStep) {
    GaussianOracle oracle;
    IsotropicGaussian source = oracle.source();
    auto control = oracle_control(oracle);
    auto roundtrip_err = [&](double dt) {
        auto set = generate(control, source, 64, dt, 21);
        Vec ld = reverse_log_density(control, source, set.points, dt);
        double worst = 0.0;
        for (Index j = 0; j < set.points.cols(); ++j)
            worst = std::max(worst, std::abs(ld[j] - set.log_density[j]));
        return worst;
    };
    const double e4 = roundtrip_err(0.004);
    const double e2 = roundtrip_err(0.002);
    const double e1 = roundtrip_err(0.001);
    EXPECT_LT(e1, 1e-3);
    // the backward pass inverts the forward map, so the error either halves
    // with dt or already sits at the fixed-point solver floor
    EXPECT_TRUE(e2 <= 0.55 * e4 || e2 < 1e-9) << "e4=" << e4 << " e2=" << e2;
    EXPECT_TRUE(e1 <= 0.55 * e2 || e1 < 1e-9) << "e2=" << e2 << " e1=" << e1;
}

TEST(Reverse, OracleControlMatchesClosedFormAtTargetPoints) {
    GaussianOracle oracle;
    IsotropicGaussian source = oracle.source(), target = oracle.target();
    Rng rng(31);
    Mat x(2, 40);
    for (Index j = 0; j < 40; ++j) x.col(j) = oracle.sigma1 * rng.gaussian_vec(2);
    Vec ld = reverse_log_density(oracle_control(oracle), source, x, 0.001);
    for (Index j = 0; j < 40; ++j) EXPECT_NEAR(ld[j], target.log_density(x.col(j)), 1e-2);
}

TEST(Elbo, PerfectModelGivesZero) {
    GaussianOracle oracle;
    IsotropicGaussian source = oracle.source(), target = oracle.target();
    auto set = generate(oracle_control(oracle), source, 2000, 0.001, 41);
    const double v = elbo(set, [&](const Vec& x) { return target.log_density(x); });
    EXPECT_NEAR(v, 0.0, 0.02);
}

TEST(Eubo, PerfectModelGivesZeroAndSandwichHolds) {
    // model = pushforward through the oracle; "target" = the same Gaussian,
    // wrapped in a mixture container so it is exactly sampleable
    GaussianOracle oracle;
    IsotropicGaussian source = oracle.source();
    Mat mean = Mat::Zero(2, 1);
    GaussianMixture target(mean, oracle.sigma1, 0);  // single-mode mixture
    const double v =
        eubo(oracle_control(oracle), source, target, 2000, 0.001, 43);
    EXPECT_NEAR(v, 0.0, 0.02);

    // Jensen sandwich with an imperfect (zero) control on the same target
    auto set = generate(zero_control(2), source, 1500, 0.002, 45);
    const double lo = elbo(set, [&](const Vec& x) { return target.log_density(x); });
    const double hi = eubo(zero_control(2), source, target, 1500, 0.002, 46);
    EXPECT_LE(lo, hi);
    EXPECT_LT(lo, 0.0);  // strictly below log Z = 0 for a mismatched model
    EXPECT_GT(hi, 0.0);
}

TEST(TemperatureHistogram, PlateauMassAndTotals) {
    TemperatureSchedule sched;
    std::vector<double> xi = {0.0, 0.1, -0.2, 0.05, 0.2};  // all on the beta = 1 plateau
    auto h = temperature_histogram(xi, sched, 10);
    EXPECT_EQ(h.total(), 5);
    EXPECT_EQ(h.counts[9], 5);
    EXPECT_DOUBLE_EQ(h.extreme_fraction(), 1.0);

    std::vector<double> spread = {0.0, 3.0, -3.0, 1.0, 1.2, 0.6};
    auto h2 = temperature_histogram(spread, sched, 10);
    EXPECT_EQ(h2.total(), 6);
}

TEST(MetricsReport, SummaryAndSandwich) {
    MetricsReport r;
    r.w2 = Vec(3);
    r.w2 << 1.0, 1.2, 1.1;
    r.elbo = Vec(3);
    r.elbo << -0.5, -0.4, -0.6;
    r.eubo = Vec(3);
    r.eubo << 2.0, 2.2, 1.8;
    r.trials = 3;
    EXPECT_NEAR(MetricsReport::mean_of(r.w2), 1.1, 1e-12);
    EXPECT_NEAR(MetricsReport::std_of(r.w2), 0.1, 1e-12);
    EXPECT_TRUE(r.sandwich_holds());
}
