#include "mwtele/teleport.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace mwtele;

namespace {

TeleportSetup ideal_setup(double dxi2) {
  TeleportSetup s;
  s.epr = {dxi2, 1.0 / dxi2};
  return s;
}

TeleportSetup noisy_setup() {
  TeleportSetup s;
  s.epr = {0.47, 16.77};
  s.eta_a = 0.9;
  s.eta_b = 0.7;
  s.n_va = 0.1;
  s.n_vb = 0.2;
  s.chain.alpha = 0.933;
  s.chain.beta = 0.891;
  s.chain.g_j = 180;
  s.chain.a_j = 0.05;
  s.chain.g_h = 1e4;
  s.chain.a_h = 7;
  return s;
}

// Numerical overlap 2 pi * integral of W_1 W_2 on a grid, for diagonal covariances.
double grid_overlap(double vx1, double vp1, double vx2, double vp2) {
  const int n = 801;
  const double half = 10.0, h = 2 * half / (n - 1);
  double sum = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double x = -half + i * h, p = -half + j * h;
      const double w1 = std::exp(-x * x / (2 * vx1) - p * p / (2 * vp1)) / (2 * M_PI * std::sqrt(vx1 * vp1));
      const double w2 = std::exp(-x * x / (2 * vx2) - p * p / (2 * vp2)) / (2 * M_PI * std::sqrt(vx2 * vp2));
      sum += w1 * w2;
    }
  return 2 * M_PI * sum * h * h;
}

Eigen::Vector2d ensemble_variance(const TeleportBatch& b) {
  Eigen::Vector2d m = Eigen::Vector2d::Zero(), m2 = Eigen::Vector2d::Zero();
  for (const auto& r : b.runs) {
    m += r.output_mean;
    m2 += r.output_mean.cwiseAbs2();
  }
  const double n = double(b.runs.size());
  m /= n;
  return m2 / n - m.cwiseAbs2() + b.output_cov.diagonal();
}

}  // namespace

TEST(Rng, DeterministicAndDistinctStreams) {
  const CounterRng a(42, 0), b(42, 0), c(42, 1);
  EXPECT_EQ(a.bits(5), b.bits(5));
  EXPECT_NE(a.bits(5), c.bits(5));
  double sum = 0.0, sum2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n / 2; ++i) {
    const auto [x, y] = CounterRng(7, i).normal_pair(0);
    sum += x + y;
    sum2 += x * x + y * y;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sum2 / n, 1.0, 0.01);
}

TEST(Teleport, ClassicalCase) {
  const auto setup = ideal_setup(1.0);
  const auto batch = simulate_teleport(setup, {0.0, 0.0}, 1, 100000);
  // Bob's half of a vacuum pair is untouched; the outcome scatter supplies the rest of 1.5.
  EXPECT_NEAR(batch.output_cov(0, 0), 0.5, 1e-12);
  EXPECT_NEAR(batch.output_cov(1, 1), 0.5, 1e-12);
  const Eigen::Vector2d var = ensemble_variance(batch) - batch.output_cov.diagonal();
  EXPECT_NEAR(var(0), 1.0, 0.02);
  EXPECT_NEAR(var(1), 1.0, 0.02);
  EXPECT_NEAR(batch.estimate.mean, 0.5, 0.005);
}

TEST(Teleport, InfiniteSqueezingReturnsInput) {
  const auto batch = simulate_teleport(ideal_setup(1e-6), {2.0, 1.0}, 3, 1000);
  EXPECT_GT(batch.estimate.mean, 0.999);
  for (const auto& r : batch.runs) {
    EXPECT_NEAR(r.output_mean(0), 2.0 * std::sqrt(2.0), 0.01);
    EXPECT_NEAR(r.output_mean(1), std::sqrt(2.0), 0.01);
  }
}

TEST(Teleport, EmpiricalFidelityMatchesClosedForm) {
  const auto setup = ideal_setup(0.47);
  const auto batch = simulate_teleport(setup, {2.0, 1.0}, 2024, 100000);
  EXPECT_NEAR(batch.closed_form, 1.0 / 1.47, 1e-12);
  EXPECT_LT(std::abs(batch.estimate.mean - batch.closed_form), 3 * batch.estimate.standard_error);
}

TEST(Teleport, LossyChainMatchesClosedForm) {
  const auto batch = simulate_teleport(noisy_setup(), {-1.0, 0.5}, 77, 100000);
  EXPECT_LT(std::abs(batch.estimate.mean - batch.closed_form), 3 * batch.estimate.standard_error);
}

TEST(Teleport, FastPathEqualsReferencePath) {
  const DigitalTeleporter tp(noisy_setup(), {0.3, -0.8});
  for (std::uint64_t i = 0; i < 200; ++i) {
    const auto a = tp.run(9, i), b = tp.run_reference(9, i);
    EXPECT_NEAR(a.a, b.a, 1e-9);
    EXPECT_NEAR(a.b, b.b, 1e-9);
    EXPECT_NEAR((a.output_mean - b.output_mean).norm(), 0.0, 1e-9);
    EXPECT_NEAR(a.fidelity, b.fidelity, 1e-12);
  }
}

TEST(Teleport, OutputCovarianceIndependentOfOutcomes) {
  const DigitalTeleporter tp(noisy_setup(), {0.3, -0.8});
  const auto& pre = tp.pre_measurement();
  std::mt19937_64 g(1);
  std::normal_distribution<double> n01(0.0, 5.0);
  const auto h1 = homodyne(pre, 0, Quadrature::X);
  double dev = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto h2 = homodyne(h1.conditional(n01(g)), 0, Quadrature::P);
    const auto out = h2.conditional(n01(g));
    dev = std::max(dev, (out.cov() - tp.output_cov()).cwiseAbs().maxCoeff());
  }
  EXPECT_LT(dev, 1e-12);
}

TEST(Teleport, FidelityInvariantUnderInputDisplacement) {
  const auto setup = noisy_setup();
  std::vector<FidelityEstimate> e;
  for (auto a : {std::complex<double>(0, 0), std::complex<double>(2, 1), std::complex<double>(0, -3)})
    e.push_back(simulate_teleport(setup, a, 99, 100000).estimate);
  for (std::size_t i = 1; i < e.size(); ++i) {
    const double se = std::hypot(e[0].standard_error, e[i].standard_error);
    EXPECT_LT(std::abs(e[i].mean - e[0].mean), 4 * se);
  }
}

TEST(Teleport, SeedReproducibility) {
  const auto setup = noisy_setup();
  const auto a = simulate_teleport(setup, {1, 1}, 5, 100);
  const auto b = simulate_teleport(setup, {1, 1}, 5, 100);
  const auto c = simulate_teleport(setup, {1, 1}, 6, 100);
  for (std::size_t i = 0; i < 100; ++i) {
    EXPECT_EQ(a.runs[i].a, b.runs[i].a);
    EXPECT_EQ(a.runs[i].fidelity, b.runs[i].fidelity);
  }
  EXPECT_NE(a.runs[0].a, c.runs[0].a);
}

TEST(Teleport, EmptyRunSetRejected) {
  EXPECT_THROW(empirical_fidelity({}), std::invalid_argument);
  EXPECT_THROW(simulate_teleport(ideal_setup(0.5), {0, 0}, 1, 0), std::invalid_argument);
}

TEST(Fidelity, IdenticalPureStates) {
  TeleportRun r;
  r.fidelity = overlap(coherent({1, 2}), coherent({1, 2}));
  EXPECT_NEAR(empirical_fidelity({r, r}).mean, 1.0, 1e-14);
}

TEST(Fidelity, AsymmetricAddedNoiseAgainstGridOverlap) {
  const double f = coherent_fidelity(0.2, 0.4);
  EXPECT_NEAR(f, 1.0 / std::sqrt(1.2 * 1.4), 1e-15);
  EXPECT_NEAR(f, 0.7715, 1e-4);
  EXPECT_NEAR(grid_overlap(0.5, 0.5, 0.5 + 0.2, 0.5 + 0.4), f, 1e-6);
  EXPECT_NEAR(coherent_fidelity(1.0, 1.0), 0.5, 1e-15);
}

TEST(Analog, MatchesDigitalMeanAndDoublesMeasurementNoise) {
  TeleportSetup s;
  s.epr = {0.32, 3.125};
  s.chain.g_j = 180;
  s.chain.a_j = 0.25;
  s.chain.g_h = 1e4;
  s.chain.a_h = 17;
  const std::complex<double> alpha(1.0, -0.5);
  const auto digital = simulate_teleport(s, alpha, 4, 100000);
  TeleportSetup sa = s;
  sa.feedforward.mode = FeedforwardMode::Analog;
  const auto analog = analog_output(sa, alpha);

  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& r : digital.runs) mean += r.output_mean;
  mean /= double(digital.runs.size());
  const Eigen::Vector2d in = coherent(alpha).mean();
  EXPECT_LT((mean - in).norm(), 0.02);
  EXPECT_LT((analog.mean() - in).norm(), 2.0 / s.chain.g_j * in.norm() + 1e-9);

  // Added variance per quadrature, from the closed-form digital fidelity.
  const double added_digital = 1.0 / digital.closed_form - 1.0;
  const Eigen::Vector2d ens = ensemble_variance(digital);
  EXPECT_NEAR(ens(0) - 0.5, added_digital, 0.02 * ens(0));
  EXPECT_NEAR(ens(1) - 0.5, added_digital, 0.02 * ens(1));
  const double meas_digital = added_digital - 0.32;
  const double meas_analog = analog.cov()(0, 0) - 0.5 - 0.32;
  EXPECT_NEAR(meas_analog / meas_digital, 2.0, 2.0 * 2.0 / s.chain.g_j);
  EXPECT_NEAR(meas_digital, total_measurement_noise(s.chain), 1e-9);
}

TEST(Analog, ClosedFormAgreesWithSimulation) {
  TeleportSetup s = noisy_setup();
  s.feedforward.mode = FeedforwardMode::Analog;
  s.feedforward.eta_att = 1e-3;
  const auto batch = simulate_teleport(s, {0.5, 0.5}, 1, 1);
  EXPECT_NEAR(batch.estimate.mean, batch.closed_form, 5e-3);
}

TEST(Convolution, GaussianKernelClosedForm) {
  const double s2 = std::exp(-1.0);
  const auto r = convolution_check({1.0, -0.5}, s2);
  EXPECT_NEAR(r.variance(0), 0.5 + s2, 1e-4);
  EXPECT_NEAR(r.variance(1), 0.5 + s2, 1e-4);
  EXPECT_NEAR(r.mean(0), std::sqrt(2.0), 1e-6);
  EXPECT_NEAR(r.fidelity_grid, 1.0 / (1.0 + s2), 1e-3);
}

TEST(Convolution, NarrowKernelApproachesInput) {
  const auto wide = convolution_check({0, 0}, 0.08, 512, 1e-4, 512);
  const auto narrow = convolution_check({0, 0}, 0.02, 512, 1e-4, 512);
  const double dw = (wide.w_out - wide.w_in).cwiseAbs().maxCoeff();
  const double dn = (narrow.w_out - narrow.w_in).cwiseAbs().maxCoeff();
  EXPECT_LT(dn, dw);
  EXPECT_LT(dn / narrow.w_in.maxCoeff(), 0.05);
}

TEST(Convolution, UnderResolvedKernelRejected) {
  EXPECT_THROW(convolution_check({0, 0}, 1e-6, 256, 1e-4, 256), RegimeError);
}
