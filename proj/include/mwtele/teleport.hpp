#pragma once

// Monte-Carlo simulation of coherent-state teleportation in the Gaussian formalism.

#include "mwtele/budget.hpp"
#include "mwtele/gaussian.hpp"
#include "mwtele/rng.hpp"

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

namespace mwtele {

/// Fully resolved physical parameters of one teleportation experiment.
struct TeleportSetup {
  EprQuality epr;
  double eta_a = 1.0;  // includes any attenuator
  double eta_b = 1.0;
  double n_va = 0.0;
  double n_vb = 0.0;
  MeasChainSpec chain;
  FeedforwardSpec feedforward;

  static TeleportSetup from_config(const ScenarioConfig& cfg) {
    TeleportSetup s;
    s.epr = cfg.epr.quality();
    const bool delay = cfg.feedforward.mode == FeedforwardMode::Digital;
    s.eta_a = cfg.channel.eta_a();
    s.eta_b = cfg.channel.eta_b(delay);
    s.n_va = cfg.channel.n_va;
    s.n_vb = cfg.channel.n_vb;
    if (cfg.optimize_attenuation) {
      const auto att = optimize_attenuation(s.epr, s.eta_a, s.eta_b, s.n_va, s.n_vb);
      (att.on_alice ? s.eta_a : s.eta_b) *= att.attenuation;
    }
    s.chain = cfg.chain;
    s.feedforward = cfg.feedforward;
    return s;
  }

  /// Correlation variance and added noise predicted by the closed-form budget.
  double closed_form_fidelity() const {
    const double dxi = distributed_correlation(epr, eta_a, eta_b, n_va, n_vb);
    double a = total_measurement_noise(chain);
    if (feedforward.mode == FeedforwardMode::Analog)
      a = analog_feedforward_noise(chain, feedforward.eta_att, feedforward.n_att, feedforward.tau).a_analog;
    return xi_and_fidelity(dxi, a).fidelity;
  }

  double chain_gain() const { return chain.alpha * chain.beta * chain.g_j * chain.g_h; }
};

namespace detail {

/// Measurement arm: loss alpha, JPA preamplifier, loss beta, HEMT.
inline GaussianState measurement_arm(GaussianState s, std::size_t mode, const MeasChainSpec& m, Quadrature amplified) {
  s = loss_channel(s, mode, m.alpha, m.n_alpha);
  if (m.g_j > 1.0 || m.a_j > 0.0) s = apply_jpa(s, mode, JpaSpec::preamplifier(m.g_j, m.a_j, amplified));
  s = loss_channel(s, mode, m.beta, m.n_beta);
  if (m.g_h > 1.0 || m.a_h > 0.0) s = phase_insensitive_amp(s, mode, AmpSpec::from_referred_noise(m.g_h, m.a_h));
  return s;
}

/// Modes (T, A, B): input, Alice's and Bob's halves after distribution.
inline GaussianState distributed_input(const TeleportSetup& setup, std::complex<double> alpha) {
  GaussianState s = tensor(coherent(alpha), setup.epr.state());
  s = loss_channel(s, 1, setup.eta_a, setup.n_va);
  s = loss_channel(s, 2, setup.eta_b, setup.n_vb);
  return s;
}

}  // namespace detail

struct TeleportRun {
  std::uint64_t seed = 0;
  std::uint64_t index = 0;
  double a = 0.0;  // displacement applied to Bob's x quadrature
  double b = 0.0;  // displacement applied to Bob's p quadrature
  Eigen::Vector2d output_mean = Eigen::Vector2d::Zero();
  double fidelity = 0.0;
};

struct FidelityEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  std::size_t runs = 0;
};

inline FidelityEstimate empirical_fidelity(const std::vector<TeleportRun>& runs) {
  if (runs.empty()) throw std::invalid_argument("empirical_fidelity: no runs");
  const double n = static_cast<double>(runs.size());
  double sum = 0.0;
  for (const auto& r : runs) sum += r.fidelity;
  const double mean = sum / n;
  double ss = 0.0;
  for (const auto& r : runs) ss += (r.fidelity - mean) * (r.fidelity - mean);
  const double se = runs.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  return {mean, se, runs.size()};
}

/// Digital protocol: Bell measurement on (T, A), homodyne of both arms, displacement of B.
/// All outcome-independent linear algebra is done once at construction.
class DigitalTeleporter {
 public:
  DigitalTeleporter(const TeleportSetup& setup, std::complex<double> alpha) : input_(coherent(alpha)) {
    setup.chain.validate();
    GaussianState s = detail::distributed_input(setup, alpha);
    s = beam_splitter(s, 0, 1, 0.5);
    s = detail::measurement_arm(s, 0, setup.chain, Quadrature::X);
    s = detail::measurement_arm(s, 1, setup.chain, Quadrature::P);
    pre_measurement_ = s;
    first_.emplace(s, 0, Quadrature::X);
    // Remaining modes are (arm 2, B); the second measurement reads p of arm 2.
    second_.emplace(first_->conditional(first_->mean()), 0, Quadrature::P);
    feedforward_scale_ = std::sqrt(2.0 / setup.chain_gain());
    output_cov_ = second_->conditional_cov();
    const Eigen::Matrix2d sum = output_cov_ + input_.cov();
    sum_inverse_ = sum.inverse();
    norm_ = 1.0 / std::sqrt(sum.determinant());
  }

  const GaussianState& pre_measurement() const { return pre_measurement_; }
  const Eigen::Matrix2d& output_cov() const { return output_cov_; }

  /// Sample both homodyne outcomes and displace Bob; deterministic in (seed, index).
  TeleportRun run(std::uint64_t seed, std::uint64_t index) const {
    const CounterRng rng(seed, index);
    const auto [z1, z2] = rng.normal_pair(0);
    const double m1 = first_->mean() + std::sqrt(first_->variance()) * z1;
    // Shift of the remaining modes (arm 2 x, arm 2 p, B x, B p) caused by the first outcome.
    const Eigen::VectorXd shift1 = first_->gain() * (m1 - first_->mean());
    const double m2_mean = second_->mean() + shift1(1);
    const double m2 = m2_mean + std::sqrt(second_->variance()) * z2;
    Eigen::Vector2d bob = second_->conditional(second_->mean()).mean();
    bob += shift1.tail<2>() + second_->gain() * (m2 - m2_mean);

    TeleportRun r;
    r.seed = seed;
    r.index = index;
    r.a = feedforward_scale_ * m1;
    r.b = feedforward_scale_ * m2;
    r.output_mean = bob + Eigen::Vector2d(r.a, r.b);
    const Eigen::Vector2d d = r.output_mean - input_.mean();
    r.fidelity = norm_ * std::exp(-0.5 * d.dot(sum_inverse_ * d));
    return r;
  }

  /// Same run evaluated step by step through the homodyne API (slow reference path).
  TeleportRun run_reference(std::uint64_t seed, std::uint64_t index) const {
    const CounterRng rng(seed, index);
    const auto [z1, z2] = rng.normal_pair(0);
    const auto h1 = homodyne(pre_measurement_, 0, Quadrature::X);
    const double m1 = h1.mean() + std::sqrt(h1.variance()) * z1;
    const GaussianState s1 = h1.conditional(m1);
    const auto h2 = homodyne(s1, 0, Quadrature::P);
    const double m2 = h2.mean() + std::sqrt(h2.variance()) * z2;
    GaussianState bob = h2.conditional(m2);
    TeleportRun r;
    r.seed = seed;
    r.index = index;
    r.a = feedforward_scale_ * m1;
    r.b = feedforward_scale_ * m2;
    bob = displace(bob, 0, r.a, r.b);
    r.output_mean = bob.mean();
    r.fidelity = overlap(bob, input_);
    return r;
  }

 private:
  GaussianState input_;
  GaussianState pre_measurement_ = vacuum(1);
  std::optional<HomodyneMeasurement> first_;
  std::optional<HomodyneMeasurement> second_;
  double feedforward_scale_ = 1.0;
  Eigen::Matrix2d output_cov_;
  Eigen::Matrix2d sum_inverse_;
  double norm_ = 1.0;
};

/// Analog protocol: the amplified arms are recombined and injected into B through a coupler.
inline GaussianState analog_output(const TeleportSetup& setup, std::complex<double> alpha) {
  const auto& m = setup.chain;
  const auto& ff = setup.feedforward;
  const AnalogFeedforward af = analog_feedforward_noise(m, ff.eta_att, ff.n_att, ff.tau);
  GaussianState s = detail::distributed_input(setup, alpha);
  s = beam_splitter(s, 0, 1, 0.5);
  s = detail::measurement_arm(s, 0, m, Quadrature::X);
  s = detail::measurement_arm(s, 1, m, Quadrature::P);
  s = beam_splitter(s, 0, 1, 0.5);
  s = loss_channel(s, 0, ff.eta_att, ff.n_att);
  s = beam_splitter(s, 2, 0, af.tau);
  return reduce(s, {2});
}

struct TeleportBatch {
  std::vector<TeleportRun> runs;
  FidelityEstimate estimate;
  double closed_form = 0.0;
  Eigen::Matrix2d output_cov = Eigen::Matrix2d::Zero();
};

/// Runs `count` shots. Analog feedforward is deterministic, so every shot is identical.
inline TeleportBatch simulate_teleport(const TeleportSetup& setup, std::complex<double> alpha, std::uint64_t seed,
                                       std::size_t count) {
  if (count == 0) throw std::invalid_argument("simulate_teleport: count must be >= 1");
  TeleportBatch batch;
  batch.closed_form = setup.closed_form_fidelity();
  batch.runs.reserve(count);
  if (setup.feedforward.mode == FeedforwardMode::Digital) {
    const DigitalTeleporter tp(setup, alpha);
    batch.output_cov = tp.output_cov();
    for (std::size_t i = 0; i < count; ++i) batch.runs.push_back(tp.run(seed, i));
  } else {
    const GaussianState out = analog_output(setup, alpha);
    const GaussianState in = coherent(alpha);
    batch.output_cov = out.cov();
    TeleportRun r;
    r.seed = seed;
    r.output_mean = out.mean();
    r.fidelity = overlap(out, in);
    for (std::size_t i = 0; i < count; ++i) {
      r.index = i;
      batch.runs.push_back(r);
    }
  }
  batch.estimate = empirical_fidelity(batch.runs);
  return batch;
}

struct ConvolutionResult {
  int grid_points = 0;
  double half_width = 0.0;
  Eigen::VectorXd axis;
  Eigen::MatrixXd w_in;   // rows index x, columns index p; centred on the input mean
  Eigen::MatrixXd w_out;
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Vector2d variance = Eigen::Vector2d::Zero();
  double fidelity_grid = 0.0;
  double fidelity_closed = 0.0;
};

namespace detail {

inline Eigen::VectorXd gaussian_on_axis(const Eigen::VectorXd& axis, double mean, double var) {
  return ((axis.array() - mean).square() / (-2.0 * var)).exp() / std::sqrt(2.0 * std::numbers::pi * var);
}

inline ConvolutionResult convolve_on_grid(std::complex<double> alpha, double sigma2, int n) {
  const double x0 = std::sqrt(2.0) * alpha.real();
  const double p0 = std::sqrt(2.0) * alpha.imag();
  const double out_sd = std::sqrt(kVacuumVariance + sigma2);
  ConvolutionResult r;
  r.grid_points = n;
  r.half_width = 6.0 * out_sd;
  const double h = 2.0 * r.half_width / (n - 1);
  if (std::sqrt(sigma2) < 3.0 * h) throw RegimeError("convolution_check: kernel narrower than 3 grid cells");
  // The grid is centred on the input; offsets are relative to the centre.
  r.axis = Eigen::VectorXd::LinSpaced(n, -r.half_width, r.half_width);
  const Eigen::VectorXd wx = gaussian_on_axis(r.axis, 0.0, kVacuumVariance);
  r.w_in = wx * wx.transpose();
  const Eigen::MatrixXd& w_in = r.w_in;

  const int half = static_cast<int>(std::ceil(8.0 * std::sqrt(sigma2) / h));
  Eigen::VectorXd kernel(2 * half + 1);
  for (int k = -half; k <= half; ++k) {
    const double u = k * h;
    kernel(k + half) = std::exp(-u * u / (2.0 * sigma2)) / std::sqrt(2.0 * std::numbers::pi * sigma2) * h;
  }
  auto convolve_rows = [&](const Eigen::MatrixXd& in) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(in.rows(), in.cols());
    for (int i = 0; i < n; ++i)
      for (int k = -half; k <= half; ++k) {
        const int j = i - k;
        if (j < 0 || j >= n) continue;
        out.row(i) += kernel(k + half) * in.row(j);
      }
    return out;
  };
  r.w_out = convolve_rows(convolve_rows(w_in).transpose()).transpose();

  const double cell = h * h;
  const double total = r.w_out.sum() * cell;
  const Eigen::VectorXd mx = r.w_out.rowwise().sum() * cell;
  const Eigen::VectorXd mp = r.w_out.colwise().sum().transpose() * cell;
  r.mean << mx.dot(r.axis) / total, mp.dot(r.axis) / total;
  r.variance << mx.dot((r.axis.array() - r.mean(0)).square().matrix()) / total,
      mp.dot((r.axis.array() - r.mean(1)).square().matrix()) / total;
  r.mean += Eigen::Vector2d(x0, p0);
  r.fidelity_grid = 2.0 * std::numbers::pi * (r.w_out.cwiseProduct(w_in)).sum() * cell;
  r.fidelity_closed = 1.0 / (1.0 + sigma2);
  return r;
}

}  // namespace detail

/// Convolves a coherent-state Wigner function with a Gaussian kernel of variance sigma2 per
/// quadrature, doubling the grid until the overlap fidelity changes by less than `tol`.
inline ConvolutionResult convolution_check(std::complex<double> alpha, double sigma2, int grid_points = 256,
                                           double tol = 1e-4, int max_grid_points = 2048) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("convolution_check: kernel variance must be > 0");
  if (grid_points < 16) throw std::invalid_argument("convolution_check: grid too small");
  ConvolutionResult prev = detail::convolve_on_grid(alpha, sigma2, grid_points);
  for (int n = 2 * grid_points; n <= max_grid_points; n *= 2) {
    ConvolutionResult next = detail::convolve_on_grid(alpha, sigma2, n);
    const bool converged = std::abs(next.fidelity_grid - prev.fidelity_grid) < tol;
    prev = std::move(next);
    if (converged) break;
  }
  return prev;
}

}  // namespace mwtele
