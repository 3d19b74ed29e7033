#include <gtest/gtest.h>

#include "ctds/training.hpp"
#include "test_util.hpp"

using namespace ctds;
using test::rel_err;

namespace {

ModelArch small_arch(Index width = 16, Index depth = 2) {
    ModelArch a;
    a.width = width;
    a.depth = depth;
    a.fourier.position_features = 6;
    a.fourier.position_scale = 0.4;
    a.fourier.time_features = 4;
    a.fourier.time_scale = 2.0;
    a.fourier.temperature_features = 4;
    a.fourier.temperature_scale = 1.0;
    return a;
}

void randomize(Models& m, std::uint64_t seed, double scale = 0.3) {
    Rng rng(seed);
    for (Index i = 0; i < m.params.size(); ++i) m.params[i] = scale * rng.gaussian();
}

}  // namespace

TEST(PinnResidual, OracleControlAndFreeEnergyGiveZeroResidual) {
    GaussianOracle oracle;  // sigma0=1, sigma1=2, d=2
    IsotropicGaussian os = oracle.source(), ot = oracle.target();
    Path path(PathKind::Linear, os, ot);
    Rng rng(3);
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
        Vec x = 2.0 * rng.gaussian_vec(2);
        const double t = rng.uniform();
        Vec mu;
        double div;
        oracle.exact_control(x, t, mu, div);
        const PathEval pe = path.eval(x, t);
        worst = std::max(worst, std::abs(pinn_residual(oracle.free_energy_dt(t), pe, mu, div)));
    }
    EXPECT_LT(worst, 1e-10);
}

TEST(PinnResidual, ZeroWeightsOnStaticPathGiveZeroResidual) {
    auto m = Models::create(2, 1.0, false, TemperatureSchedule{}, small_arch(), 7);
    m.params.setZero();
    IsotropicGaussian os(2, 1.0), ot(2, 1.0);
    Path path(PathKind::Learned, os, ot, &m);
    Rng rng(8);
    for (int i = 0; i < 20; ++i) {
        Vec x = rng.gaussian_vec(2);
        EXPECT_DOUBLE_EQ(pinn_residual(m, path, x, rng.uniform()), 0.0);
    }
}

TEST(PinnResidual, LossGradientMatchesFiniteDifferences) {
    auto m = Models::create(2, 1.0, true, TemperatureSchedule{}, small_arch(8, 1), 11);
    randomize(m, 12);
    GaussianOracle oracle;
    IsotropicGaussian os = oracle.source(), ot = oracle.target();
    Path path(PathKind::LearnedContinuum, os, ot, &m, &m.schedule());
    ResidualEvaluator eval(m, path, 3);  // force chunk boundaries

    const Index B = 7;
    Rng rng(13);
    Mat x(2, B);
    Vec t(B), xi(B), w(B);
    for (Index i = 0; i < B; ++i) {
        x.col(i) = rng.gaussian_vec(2);
        t[i] = 0.1 + 0.8 * rng.uniform();
        xi[i] = 3.0 * (rng.uniform() - 0.5);
        w[i] = 0.5 + rng.uniform();
    }
    w *= B / w.sum();

    Vec grad = Vec::Zero(m.params.size());
    const double loss0 = eval.loss(x, t, xi, w, &grad);
    ASSERT_TRUE(std::isfinite(loss0));

    Index checked = 0;
    for (Index i = 0; i < m.params.size(); i += 11) {
        const double h = 1e-5;
        const double orig = m.params[i];
        m.params[i] = orig + h;
        const double up = eval.loss(x, t, xi, w, nullptr);
        m.params[i] = orig - h;
        const double dn = eval.loss(x, t, xi, w, nullptr);
        m.params[i] = orig;
        const double fd = (up - dn) / (2.0 * h);
        EXPECT_LT(rel_err(grad[i], fd, 1e-2), 1e-4) << "param " << i;
        ++checked;
    }
    EXPECT_GT(checked, 50);
}

TEST(LossBatch, UniformWeightsEqualUnweightedMean) {
    auto m = Models::create(2, 1.0, false, TemperatureSchedule{}, small_arch(), 21);
    randomize(m, 22);
    GaussianOracle oracle;
    IsotropicGaussian os = oracle.source(), ot = oracle.target();
    Path path(PathKind::Linear, os, ot);
    ResidualEvaluator eval(m, path);
    const Index B = 11;
    Rng rng(23);
    Mat x(2, B);
    Vec t(B), xi, w = Vec::Ones(B), r(B);
    for (Index i = 0; i < B; ++i) {
        x.col(i) = rng.gaussian_vec(2);
        t[i] = rng.uniform();
    }
    const double loss = eval.loss(x, t, xi, w, nullptr, &r);
    EXPECT_LT(rel_err(loss, r.squaredNorm() / B, 1e-12), 1e-13);
}

TEST(LossBatch, SingleElementBatchIsSquaredResidual) {
    auto m = Models::create(2, 1.0, false, TemperatureSchedule{}, small_arch(), 31);
    randomize(m, 32);
    GaussianOracle oracle;
    IsotropicGaussian os = oracle.source(), ot = oracle.target();
    Path path(PathKind::Linear, os, ot);
    ResidualEvaluator eval(m, path);
    Mat x(2, 1);
    x << 0.3, -0.8;
    Vec t = Vec::Constant(1, 0.4), xi, w = Vec::Ones(1);
    const double loss = eval.loss(x, t, xi, w, nullptr);
    const double r = pinn_residual(m, path, x.col(0), 0.4);
    EXPECT_DOUBLE_EQ(loss, r * r);
}

TEST(JarzynskiWeights, UniformWorkGivesOnes) {
    Vec t(5), work = Vec::Constant(5, 3.7);
    t << 0.0, 0.2, 0.4, 0.6, 0.8;
    double ess = 0.0;
    Vec w = jarzynski_weights(t, work, 1.0, 4, &ess);
    EXPECT_TRUE(w.isApprox(Vec::Ones(5)));
    EXPECT_NEAR(ess, 5.0, 1e-12);
}

TEST(JarzynskiWeights, InvariantUnderConstantShift) {
    Rng rng(5);
    const Index B = 64;
    Vec t(B), work(B);
    for (Index i = 0; i < B; ++i) {
        t[i] = rng.uniform() * 0.5;
        work[i] = rng.gaussian();
    }
    Vec w1 = jarzynski_weights(t, work, 0.5, 7);
    Vec w2 = jarzynski_weights(t, Vec(work.array() + 123.0), 0.5, 7);
    EXPECT_LT((w1 - w2).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(JarzynskiWeights, NonFiniteWorkRejectedWithDiagnostic) {
    Vec t(3), work(3);
    t << 0.1, 0.2, 0.3;
    work << 0.0, std::numeric_limits<double>::quiet_NaN(), 1.0;
    EXPECT_THROW(jarzynski_weights(t, work, 1.0, 2), numerical_error);
}

TEST(JarzynskiWeights, EssBounded) {
    Rng rng(6);
    const Index B = 200;
    Vec t(B), work(B);
    for (Index i = 0; i < B; ++i) {
        t[i] = rng.uniform();
        work[i] = 3.0 * rng.gaussian();
    }
    double ess = 0.0;
    jarzynski_weights(t, work, 1.0, 10, &ess);
    EXPECT_GT(ess, 0.0);
    EXPECT_LE(ess, static_cast<double>(B) + 1e-9);
}

TEST(Curriculum, PaperScheduleSpotValues) {
    Curriculum c;
    c.validate();
    EXPECT_DOUBLE_EQ(c.horizon_at(0), 0.1);
    EXPECT_DOUBLE_EQ(c.horizon_at(999), 0.1);
    EXPECT_DOUBLE_EQ(c.horizon_at(1000), 0.2);
    EXPECT_DOUBLE_EQ(c.horizon_at(3999), 0.4);
    EXPECT_DOUBLE_EQ(c.horizon_at(4000), 0.5);
    EXPECT_DOUBLE_EQ(c.horizon_at(12999), 0.8);
    EXPECT_DOUBLE_EQ(c.horizon_at(15999), 0.9);
    EXPECT_DOUBLE_EQ(c.horizon_at(16000), 1.0);
    EXPECT_DOUBLE_EQ(c.horizon_at(124999), 1.0);
}

TEST(Optimizer, ZeroGradientLeavesParamsUnchanged) {
    OptimState opt;
    opt.init(5);
    Vec params(5);
    params << 1.0, -2.0, 0.5, 0.0, 3.0;
    const Vec before = params;
    AdamConfig cfg;
    opt.update(params, Vec::Zero(5), 1e-3, cfg);
    EXPECT_TRUE((params.array() == before.array()).all());
}

TEST(Optimizer, LearningRateSchedule) {
    OptimState opt;
    AdamConfig cfg;
    EXPECT_DOUBLE_EQ(opt.lr_at(0, cfg), 1e-3);
    EXPECT_DOUBLE_EQ(opt.lr_at(15000, cfg), 1e-3);
    EXPECT_DOUBLE_EQ(opt.lr_at(15999, cfg), 1e-3);
    EXPECT_DOUBLE_EQ(opt.lr_at(16000, cfg), 1e-3 * 0.97);
    EXPECT_DOUBLE_EQ(opt.lr_at(17000, cfg), 1e-3 * 0.97 * 0.97);
}

TEST(ReplayBuffer, RefillRespectsHorizonAndCapacity) {
    TrajectoryBatch traj;
    traj.dim = 2;
    traj.horizon = 0.3;
    AugmentedState s;
    s.x = Vec::Zero(2);
    for (int p = 0; p < 4; ++p)
        for (int k = 0; k <= 3; ++k) {
            s.t = 0.1 * k;
            s.work = 0.01 * k;
            traj.append(s, p);
        }
    ReplayBuffer buf(2, 100);
    buf.refill(traj);
    EXPECT_EQ(buf.size(), 16);
    EXPECT_LE(buf.max_t(), 0.3 + 1e-12);

    // whole-buffer replacement by default
    TrajectoryBatch traj2 = traj;
    for (auto& tv : traj2.t) tv *= 0.5;
    buf.refill(traj2);
    EXPECT_EQ(buf.size(), 16);
    EXPECT_LE(buf.max_t(), 0.15 + 1e-12);
}

namespace {

TrainOptions oracle_train_options(Index epochs, Index width_hint = 0) {
    (void)width_hint;
    TrainOptions opt;
    opt.scheme = Scheme::Overdamped;
    opt.path_kind = PathKind::Linear;
    opt.jarzynski = false;
    opt.epochs = epochs;
    opt.iters_per_epoch = 100;
    opt.batch_size = 256;
    opt.particles = 128;
    opt.dt = 0.005;
    opt.eps_x = 50.0;
    opt.curriculum = Curriculum::single_stage(1.0);
    opt.checkpoint_every_epochs = 0;
    opt.pretrain_histogram = false;
    opt.seed = 1234;
    return opt;
}

}  // namespace

TEST(Train, SmokeRunTwoEpochsFiniteLoss) {
    auto m = Models::create(2, 1.0, false, TemperatureSchedule{}, small_arch(), 41);
    GaussianOracle oracle;
    IsotropicGaussian src = oracle.source(), tgt = oracle.target();
    auto opt = oracle_train_options(2);
    std::vector<TrainLogRow> rows;
    auto res = train(opt, m, src, tgt, [&](const TrainLogRow& r) { rows.push_back(r); });
    EXPECT_TRUE(res.ok);
    EXPECT_EQ(res.iterations_run, 200);
    ASSERT_EQ(rows.size(), 200u);
    for (const auto& r : rows) {
        EXPECT_TRUE(std::isfinite(r.loss));
        EXPECT_GT(r.ess, 0.0);
        EXPECT_LE(r.ess, opt.batch_size + 1e-9);
    }
}

TEST(Train, DeterministicAcrossRuns) {
    GaussianOracle oracle;
    IsotropicGaussian src = oracle.source(), tgt = oracle.target();
    auto opt = oracle_train_options(2);
    auto run = [&]() {
        auto m = Models::create(2, 1.0, false, TemperatureSchedule{}, small_arch(), 41);
        auto res = train(opt, m, src, tgt);
        EXPECT_TRUE(res.ok);
        return m.params;
    };
    Vec a = run(), b = run();
    EXPECT_TRUE((a.array() == b.array()).all());
}

TEST(Train, OracleResidualDropsUnderTraining) {
    auto m = Models::create(2, 1.0, false, TemperatureSchedule{}, small_arch(24, 2), 43);
    GaussianOracle oracle;
    IsotropicGaussian src = oracle.source(), tgt = oracle.target();
    auto opt = oracle_train_options(8);  // 800 iterations
    std::vector<double> losses;
    auto res = train(opt, m, src, tgt, [&](const TrainLogRow& r) { losses.push_back(r.loss); });
    ASSERT_TRUE(res.ok);
    const double first = losses[0];
    double last_avg = 0.0;
    for (std::size_t i = losses.size() - 20; i < losses.size(); ++i) last_avg += losses[i];
    last_avg /= 20.0;
    EXPECT_LT(last_avg, first / 20.0) << "first=" << first << " last=" << last_avg;
}
