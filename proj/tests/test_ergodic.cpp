#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hypomhd/ergodic.hpp"

using namespace hypomhd;

namespace {

const Mode kForced{Slot::kMagnetic, {0, 1}, Parity::kCos};

// Single forced mode, nonlinearity off: an Ornstein-Uhlenbeck coordinate with
// lambda = |l|^{2 beta} = 1 and the given amplitude.
struct OuSystem {
  EquationParams p;
  std::unique_ptr<GalerkinModel> model;
  std::unique_ptr<StochasticForcing> forcing;

  explicit OuSystem(double amp = 1.0, double dt = 0.01) {
    p.n_cut = 1;
    p.dt = dt;
    p.nonlinearity_enabled = false;
    model = std::make_unique<GalerkinModel>(p);
    NoiseSpec ns;
    ns.entries.push_back({kForced.k, kForced.m, amp});
    forcing = std::make_unique<StochasticForcing>(*model, ns);
  }
};

TrajectoryRecord window(const TrajectoryRecord& rec, double until) {
  TrajectoryRecord out = rec;
  out.times.clear();
  out.states.clear();
  for (std::size_t n = 0; n < rec.times.size() && rec.times[n] <= until + 1e-9; ++n) {
    out.times.push_back(rec.times[n]);
    out.states.push_back(rec.states[n]);
  }
  return out;
}

}  // namespace

TEST(TimeAverage, ConstantObservable) {
  OuSystem ou;
  const TrajectoryRecord rec = simulate(*ou.model, *ou.forcing, ou.model->zero(), 5.0, 1, 10);
  const ErgodicReport r = time_average(rec, BoundObservable(Observable::constant(2.5), ou.model->truncation()), 1.0, 1);
  EXPECT_NEAR(r.estimate, 2.5, 1e-12);
  EXPECT_EQ(r.standard_error, 0.0);
  EXPECT_EQ(r.seed, 1u);
  EXPECT_THROW(time_average(rec, BoundObservable(Observable::constant(1.0), ou.model->truncation()), 5.0),
               PreconditionError);
}

TEST(TimeAverage, OuStationarySecondMoment) {
  OuSystem ou(1.3);
  const TrajectoryRecord rec = simulate(*ou.model, *ou.forcing, ou.model->zero(), 2000.0, 11, 10);
  const ErgodicReport r =
      time_average(rec, BoundObservable(Observable::mode_square(kForced), ou.model->truncation()), 10.0, 11);
  const double want = 1.3 * 1.3 / 2.0;
  EXPECT_NEAR(r.estimate, want, 0.1 * want);
  EXPECT_GT(r.standard_error, 0.0);
}

TEST(TimeAverage, DisjointWindowsAgree) {
  OuSystem ou;
  const TrajectoryRecord rec = simulate(*ou.model, *ou.forcing, ou.model->zero(), 800.0, 12, 10);
  const BoundObservable obs(Observable::mode_square(kForced), ou.model->truncation());
  const ErgodicReport a = time_average(window(rec, 400.0), obs, 10.0);
  const ErgodicReport b = time_average(rec, obs, 400.0);
  EXPECT_LT(std::abs(a.estimate - b.estimate), 3.0 * std::hypot(a.standard_error, b.standard_error));
}

TEST(TimeAverage, ZeroNoiseDecays) {
  EquationParams p;
  p.n_cut = 2;
  p.dt = 1e-3;
  const GalerkinModel m(p);
  const StochasticForcing none(m, NoiseSpec{});
  VectorXd U0 = m.zero();
  U0[Eigen::Index(*m.truncation().index(kForced))] = 2.0;
  const TrajectoryRecord rec = simulate(m, none, U0, 8.0, 0, 10);
  const ErgodicReport r = time_average(rec, BoundObservable(Observable::mode_coefficient(kForced), m.truncation()), 4.0);
  EXPECT_LT(std::abs(r.estimate), std::exp(-4.0) * U0.norm());
}

TEST(Clt, KsCalibratedOnNormals) {
  std::mt19937_64 g(2024);
  std::normal_distribution<double> n;
  std::vector<double> x(1000);
  for (double& v : x) v = n(g);
  const KsResult k = ks_normal_test(x);
  EXPECT_GT(k.p_value, 0.01);
  EXPECT_GE(k.statistic, 0.0);
  std::vector<double> skewed(1000);
  for (std::size_t i = 0; i < skewed.size(); ++i) skewed[i] = std::exp(2.0 * x[i]);
  EXPECT_LT(ks_normal_test(skewed).p_value, 1e-6);
  EXPECT_NEAR(kolmogorov_survival(0.0), 1.0, 1e-15);
  EXPECT_NEAR(kolmogorov_survival(1.36), 0.0494, 5e-4);
}

TEST(Clt, OuLongRunVariance) {
  OuSystem ou;
  const BoundObservable obs(Observable::mode_square(kForced), ou.model->truncation());
  const CltResult r = clt_sample(*ou.model, *ou.forcing, obs, ou.model->zero(), 50.0, 600, 31, 2000.0, 10.0);
  // long-run variance of x^2 for dx = -lambda x dt + a dW: a^4 / (2 lambda^3)
  EXPECT_NEAR(r.sample_variance, 0.5, 0.15 * 0.5);
  EXPECT_NEAR(r.pilot_mean, 0.5, 0.05);
  EXPECT_EQ(r.deviations.size(), 600u);
  EXPECT_THROW(clt_sample(*ou.model, *ou.forcing, obs, ou.model->zero(), 1.0, 10, 1, 1.0), PreconditionError);
}

TEST(Clt, WorkerCountInvariant) {
  OuSystem ou;
  const BoundObservable obs(Observable::mode_coefficient(kForced), ou.model->truncation());
  const CltResult a = clt_sample(*ou.model, *ou.forcing, obs, ou.model->zero(), 2.0, 60, 5, 20.0, 0.0, 1);
  const CltResult b = clt_sample(*ou.model, *ou.forcing, obs, ou.model->zero(), 2.0, 60, 5, 20.0, 0.0, 3);
  EXPECT_EQ(a.deviations, b.deviations);
  EXPECT_EQ(a.ks.p_value, b.ks.p_value);
}

TEST(Mixing, OuMeanDecayRate) {
  OuSystem ou;
  const BoundObservable obs(Observable::mode_coefficient(kForced), ou.model->truncation());
  VectorXd a = ou.model->zero();
  a[Eigen::Index(*ou.model->truncation().index(kForced))] = 5.0;
  const MixingReport r = mixing_decay_estimate(*ou.model, *ou.forcing, obs, a, ou.model->zero(), 400, 6.0, 10, 77);
  ASSERT_TRUE(r.rate.has_value()) << r.status;
  EXPECT_NEAR(*r.rate, 1.0, 0.15);
  EXPECT_GT(r.r_squared, 0.9);
  EXPECT_EQ(r.status, "ok");
}

TEST(Mixing, EqualStartsGiveNoSignal) {
  OuSystem ou;
  const BoundObservable obs(Observable::mode_coefficient(kForced), ou.model->truncation());
  VectorXd a = ou.model->zero();
  a[Eigen::Index(*ou.model->truncation().index(kForced))] = 1.0;
  const MixingReport r = mixing_decay_estimate(*ou.model, *ou.forcing, obs, a, a, 200, 3.0, 10, 3);
  std::size_t above = 0;
  for (std::size_t i = 0; i < r.times.size(); ++i) above += r.difference[i] > 3.0 * r.standard_error[i];
  EXPECT_LE(above, 2u);
  EXPECT_EQ(r.difference[0], 0.0);
}

TEST(Mixing, FitFlagsNoise) {
  const MixingReport r = fit_mixing({0, 1, 2, 3}, {0.1, 0.01, 0.02, 0.01}, {0.05, 0.05, 0.05, 0.05});
  EXPECT_FALSE(r.rate.has_value());
  EXPECT_EQ(r.status, "rate not identifiable");
  const MixingReport s = fit_mixing({0, 1, 2, 3}, {1.0, std::exp(-2.0), std::exp(-4.0), std::exp(-6.0)}, {1e-4, 1e-4, 1e-4, 1e-4});
  ASSERT_TRUE(s.rate.has_value());
  EXPECT_NEAR(*s.rate, 2.0, 1e-9);
  EXPECT_NEAR(s.r_squared, 1.0, 1e-9);
}

TEST(ExpMoment, ZeroStateIsOne) {
  EquationParams p;
  p.n_cut = 2;
  const GalerkinModel m(p);
  const StochasticForcing none(m, NoiseSpec{});
  const TrajectoryRecord rec = simulate(m, none, m.zero(), 1.0, 0, 10);
  for (double v : exp_moment_probe(rec, m, 0.3)) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(exp_moment_probe(rec, m, 0.0), DomainError);
}

TEST(ExpMoment, ZeroNoiseNonincreasing) {
  EquationParams p;
  p.n_cut = 3;
  const GalerkinModel m(p);
  const StochasticForcing none(m, NoiseSpec{});
  std::mt19937_64 g(3);
  std::normal_distribution<double> n;
  VectorXd U0(Eigen::Index(m.dim()));
  for (Eigen::Index i = 0; i < U0.size(); ++i) U0[i] = n(g);
  const TrajectoryRecord rec = simulate(m, none, U0, 2.0, 0, 5);
  const auto s = exp_moment_probe(rec, m, 0.5);
  for (std::size_t i = 1; i < s.size(); ++i) EXPECT_LE(s[i], s[i - 1] + 1e-9 * std::abs(s[0]));
}

TEST(ExpMoment, ForcedEnsembleBounded) {
  EquationParams p;
  p.n_cut = 3;
  p.dt = 2e-3;
  const GalerkinModel m(p);
  const StochasticForcing f(m, NoiseSpec::uniform({{0, 1}, {1, 1}, {1, 0}, {1, 2}}, 1.0));
  std::vector<std::vector<double>> runs;
  for (std::uint64_t s = 0; s < 6; ++s)
    runs.push_back(exp_moment_probe(simulate(m, f, m.zero(), 50.0, derive_seed(9, s), 500), m, 0.05));
  double worst = 0.0;
  for (std::size_t n = 0; n < runs[0].size(); ++n) {
    std::vector<double> col;
    for (const auto& r : runs) col.push_back(r[n]);
    const double lme = log_mean_exp(col);
    ASSERT_TRUE(std::isfinite(lme));
    worst = std::max(worst, lme);
  }
  EXPECT_LT(worst, 5.0);
}

TEST(Rho, Examples) {
  const VectorXd z = VectorXd::Zero(4);
  VectorXd e = z;
  e[2] = 1.0;
  EXPECT_EQ(rho_upper_bound(e, e, 1.0, 1.0), 0.0);
  EXPECT_NEAR(rho_upper_bound(z, e, 1.0, 1.0), 1.4626517459071816, 1e-12);
  EXPECT_NEAR(rho_upper_bound(z, 3.0 * e, 0.0, 0.5), 3.0, 1e-13);
  EXPECT_THROW(rho_upper_bound(z, e, 1.0, 0.0), DomainError);
}

TEST(Rho, BoundsAndSymmetry) {
  std::mt19937_64 g(17);
  std::normal_distribution<double> n;
  for (int t = 0; t < 20; ++t) {
    VectorXd a(6), b(6);
    for (int i = 0; i < 6; ++i) a[i] = n(g), b[i] = n(g);
    const double r = rho_upper_bound(a, b, 0.3, 0.7);
    EXPECT_GE(r, (a - b).norm());
    EXPECT_NEAR(r, rho_upper_bound(b, a, 0.3, 0.7), 1e-12 * r);
  }
}
