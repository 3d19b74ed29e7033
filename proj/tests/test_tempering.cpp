#include <gtest/gtest.h>

#include "ctds/joint_density.hpp"
#include "ctds/tempering.hpp"
#include "test_util.hpp"

using namespace ctds;
using test::rel_err;

TEST(BetaOfXi, SpotValuesAndPlateaus) {
    TemperatureSchedule sched;  // beta_min 0.2, delta 0.25, delta' 1.9
    double b, db;
    sched.beta(0.0, b, db);
    EXPECT_DOUBLE_EQ(b, 1.0);
    EXPECT_DOUBLE_EQ(db, 0.0);
    sched.beta(1.075, b, db);  // midpoint of the smoothstep
    EXPECT_DOUBLE_EQ(b, 0.6);
    sched.beta(3.0, b, db);
    EXPECT_DOUBLE_EQ(b, 0.2);
    EXPECT_DOUBLE_EQ(db, 0.0);
    sched.beta(-3.0, b, db);
    EXPECT_DOUBLE_EQ(b, 0.2);
    EXPECT_DOUBLE_EQ(db, 0.0);
}

TEST(BetaOfXi, MonotoneRangeAndC1) {
    TemperatureSchedule sched;
    double prev = 1.0;
    for (int i = 0; i <= 4000; ++i) {
        const double xi = 4.0 * i / 4000.0;
        double b, db;
        sched.beta(xi, b, db);
        EXPECT_LE(b, prev + 1e-15);
        EXPECT_GE(b, sched.beta_min);
        EXPECT_LE(b, 1.0);
        prev = b;
        // symmetric in xi
        double bm, dbm;
        sched.beta(-xi, bm, dbm);
        EXPECT_DOUBLE_EQ(b, bm);
        EXPECT_DOUBLE_EQ(db, -dbm);
    }
    // C1: finite differences match beta' everywhere including the knots
    for (double xi : {-3.0, -1.9, -1.0, -0.25, 0.0, 0.1, 0.25, 0.6, 1.075, 1.9, 2.5}) {
        const double fd = test::central_diff(
            [&](double v) {
                double bb, dd;
                sched.beta(v, bb, dd);
                return bb;
            },
            xi, 1e-6);
        double b, db;
        sched.beta(xi, b, db);
        EXPECT_NEAR(db, fd, 1e-6) << "xi=" << xi;
    }
}

TEST(Confining, SpotValuesAndSymmetry) {
    ConfiningPotential conf;  // eta 10, delta_tilde 2
    double p, dp;
    conf.eval(1.0, p, dp);
    EXPECT_DOUBLE_EQ(p, 0.0);
    EXPECT_DOUBLE_EQ(dp, 0.0);
    conf.eval(2.5, p, dp);
    EXPECT_DOUBLE_EQ(p, 2.5);
    EXPECT_DOUBLE_EQ(dp, 10.0);
    Rng rng(1);
    for (int i = 0; i < 50; ++i) {
        const double xi = 6.0 * (rng.uniform() - 0.5);
        double pa, da, pb, db;
        conf.eval(xi, pa, da);
        conf.eval(-xi, pb, db);
        EXPECT_DOUBLE_EQ(pa, pb);
        EXPECT_GE(pa, 0.0);
        const double fd = test::central_diff(
            [&](double v) {
                double pp, dd;
                conf.eval(v, pp, dd);
                return pp;
            },
            xi, 1e-6);
        EXPECT_NEAR(da, fd, 2e-5);
    }
}

TEST(Kinetic, SpotValuesAndGradients) {
    KineticSpec kin;
    TemperatureSchedule sched;
    Vec px(2);
    px << 3.0, 4.0;
    KineticEval ke;
    kinetic(kin, sched, 0.0, px, 0.0, ke);  // beta(0) = 1
    EXPECT_DOUBLE_EQ(ke.value, 12.5);
    EXPECT_TRUE(ke.grad_px.isApprox(px));
    EXPECT_DOUBLE_EQ(ke.grad_pxi, 0.0);
    EXPECT_DOUBLE_EQ(ke.d_dxi, 0.0);  // plateau: beta' = 0

    Vec zero = Vec::Zero(2);
    kinetic(kin, sched, 1.0, zero, 0.0, ke);
    EXPECT_DOUBLE_EQ(ke.value, 0.0);
    EXPECT_TRUE(ke.grad_px.isZero());
    EXPECT_DOUBLE_EQ(ke.grad_pxi, 0.0);

    // off-plateau d/dxi against finite differences
    Rng rng(2);
    for (int i = 0; i < 20; ++i) {
        const double xi = 0.3 + 1.5 * rng.uniform();
        Vec p = rng.gaussian_vec(2);
        const double pxi = rng.gaussian();
        kinetic(kin, sched, xi, p, pxi, ke);
        const double fd = test::central_diff(
            [&](double v) {
                KineticEval k2;
                kinetic(kin, sched, v, p, pxi, k2);
                return k2.value;
            },
            xi);
        EXPECT_LT(rel_err(ke.d_dxi, fd), 1e-5);
        const double fd_pxi = test::central_diff(
            [&](double v) {
                KineticEval k2;
                kinetic(kin, sched, xi, p, v, k2);
                return k2.value;
            },
            pxi);
        EXPECT_LT(rel_err(ke.grad_pxi, fd_pxi), 1e-5);
    }
}

namespace {

ModelArch tiny_arch() {
    ModelArch a;
    a.width = 12;
    a.depth = 2;
    a.fourier.position_features = 4;
    a.fourier.position_scale = 0.5;
    a.fourier.time_features = 3;
    a.fourier.time_scale = 2.0;
    a.fourier.temperature_features = 3;
    a.fourier.temperature_scale = 1.0;
    return a;
}

}  // namespace

TEST(JointEnergy, PartialsMatchFiniteDifferences) {
    auto models = Models::create(2, 1.0, true, TemperatureSchedule{}, tiny_arch(), 5);
    Rng prng(6);
    for (Index i = 0; i < models.params.size(); ++i) models.params[i] = 0.3 * prng.gaussian();
    GaussianOracle oracle;
    IsotropicGaussian os = oracle.source(), ot = oracle.target();
    TemperatureSchedule sched;
    ConfiningPotential conf;
    Path path(PathKind::LinearContinuum, os, ot, nullptr, &sched);

    Rng rng(7);
    for (int trial = 0; trial < 12; ++trial) {
        Vec x = rng.gaussian_vec(2);
        const double t = 0.05 + 0.9 * rng.uniform();
        const double xi = 5.0 * (rng.uniform() - 0.5);
        auto je = joint_energy(path, models, conf, x, xi, t);
        for (Index c = 0; c < 2; ++c) {
            const double fd = test::central_diff(
                [&](double v) {
                    Vec xp = x;
                    xp[c] = v;
                    return joint_energy(path, models, conf, xp, xi, t).U;
                },
                x[c]);
            EXPECT_LT(rel_err(je.grad_x[c], fd), 1e-5);
        }
        const double fd_t = test::central_diff(
            [&](double v) { return joint_energy(path, models, conf, x, xi, v).U; }, t);
        EXPECT_LT(rel_err(je.d_dt, fd_t), 1e-5);
        const double fd_xi = test::central_diff(
            [&](double v) { return joint_energy(path, models, conf, x, v, t).U; }, xi);
        EXPECT_LT(rel_err(je.d_dxi, fd_xi), 1e-5);
    }
}

TEST(JointEnergy, SingleTemperaturePathRejected) {
    auto models = Models::create(2, 1.0, true, TemperatureSchedule{}, tiny_arch(), 5);
    GaussianOracle oracle;
    IsotropicGaussian os = oracle.source(), ot = oracle.target();
    Path path(PathKind::Linear, os, ot);
    Vec x = Vec::Zero(2);
    EXPECT_THROW(joint_energy(path, models, ConfiningPotential{}, x, 0.0, 0.5), validation_error);
}

// At t = 0 the anchored free energy cancels the source normalization exactly,
// so the x-integral of exp(-Utilde) is exp(-psi_conf(xi)) for any parameters.
TEST(JointEnergy, InitialXiMarginalIsConfiningWeight) {
    auto models = Models::create(2, 1.0, true, TemperatureSchedule{}, tiny_arch(), 15);
    Rng prng(16);
    for (Index i = 0; i < models.params.size(); ++i) models.params[i] = 0.3 * prng.gaussian();
    ConfiningPotential conf;
    KineticSpec kin;
    PiDaggerSampler sampler(models, conf, kin, 512);
    const Vec& grid = sampler.grid();
    const Vec& dens = sampler.density();
    for (Index i = 0; i < grid.size(); ++i) {
        EXPECT_LT(rel_err(dens[i], std::exp(-conf.value(grid[i])), 1e-12), 1e-12) << grid[i];
    }
}

TEST(PiDagger, DegenerateScheduleRecoversSource) {
    TemperatureSchedule flat;
    flat.beta_min = 1.0;  // beta == 1 everywhere
    auto models = Models::create(2, 5.0, true, flat, tiny_arch(), 25);
    ConfiningPotential conf;
    KineticSpec kin;
    PiDaggerSampler sampler(models, conf, kin, 1024);
    const Index n = 20000;
    auto states = sampler.sample(n, 77);
    double sum = 0.0, sum2 = 0.0;
    for (const auto& s : states) {
        sum += s.x[0];
        sum2 += s.x[0] * s.x[0];
    }
    const double var = sum2 / n - (sum / n) * (sum / n);
    // var of x-coordinate should be sigma0^2 = 5; se of sample var ~ var*sqrt(2/n)
    EXPECT_NEAR(var, 5.0, 3.0 * 5.0 * std::sqrt(2.0 / n));
}

TEST(PiDagger, MomentumVarianceAndXiHistogram) {
    auto models = Models::create(2, 1.0, true, TemperatureSchedule{}, tiny_arch(), 35);
    ConfiningPotential conf;
    KineticSpec kin;
    kin.mass_xi = 1.7;
    PiDaggerSampler sampler(models, conf, kin, 4096);
    const Index n = 100000;
    auto states = sampler.sample(n, 123);

    double sum = 0.0, sum2 = 0.0;
    for (const auto& s : states) {
        sum += s.pxi;
        sum2 += s.pxi * s.pxi;
    }
    const double var = sum2 / n - (sum / n) * (sum / n);
    EXPECT_NEAR(var, kin.mass_xi, 3.0 * kin.mass_xi * std::sqrt(2.0 / n));

    // chi-square of the xi histogram against the grid marginal at 1%
    const Vec& grid = sampler.grid();
    const Vec& dens = sampler.density();
    const int bins = 20;
    const double lo = grid[0], hi = grid[grid.size() - 1];
    std::vector<double> expected(bins, 0.0), observed(bins, 0.0);
    double total = 0.0;
    for (Index i = 0; i + 1 < grid.size(); ++i) {
        const double mass = 0.5 * (dens[i] + dens[i + 1]) * (grid[i + 1] - grid[i]);
        const double mid = 0.5 * (grid[i] + grid[i + 1]);
        int b = std::min(bins - 1, static_cast<int>((mid - lo) / (hi - lo) * bins));
        expected[b] += mass;
        total += mass;
    }
    for (auto& e : expected) e *= n / total;
    for (const auto& s : states) {
        int b = std::min(bins - 1, std::max(0, static_cast<int>((s.xi - lo) / (hi - lo) * bins)));
        observed[b] += 1.0;
    }
    double chi2 = 0.0;
    int df = 0;
    for (int b = 0; b < bins; ++b) {
        if (expected[b] < 5.0) continue;  // merge-tiny-bins convention: skip
        chi2 += (observed[b] - expected[b]) * (observed[b] - expected[b]) / expected[b];
        ++df;
    }
    EXPECT_LT(chi2, test::chi2_crit_1pct(df - 1));
}
