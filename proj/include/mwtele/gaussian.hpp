#pragma once

// Gaussian-state calculus for bosonic modes.
//
// Conventions used throughout the library:
//   * quadratures are ordered (x1, p1, x2, p2, ...),
//   * [x, p] = i, so the vacuum has Var(x) = Var(p) = 1/2,
//   * a = (x + i p) / sqrt(2).

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mwtele {

inline constexpr double kVacuumVariance = 0.5;

enum class Quadrature { X, P };

/// Raised when homodyne conditioning hits a (numerically) zero marginal variance.
class SingularConditioning : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Power transmissivity of a loss quoted in dB.
inline double db_to_transmissivity(double loss_db) { return std::pow(10.0, -loss_db / 10.0); }

/// Bose-Einstein occupancy for x = hbar*omega / (k*T).
inline double bose_occupancy(double hbar_omega_over_kt) {
  if (!(hbar_omega_over_kt > 0.0)) throw std::invalid_argument("bose_occupancy: ratio must be > 0");
  return 1.0 / std::expm1(hbar_omega_over_kt);
}

/// Block-diagonal symplectic form for n modes.
inline Eigen::MatrixXd symplectic_form(std::size_t n_modes) {
  Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(2 * n_modes, 2 * n_modes);
  for (std::size_t k = 0; k < n_modes; ++k) {
    omega(2 * k, 2 * k + 1) = 1.0;
    omega(2 * k + 1, 2 * k) = -1.0;
  }
  return omega;
}

class GaussianState {
 public:
  GaussianState(Eigen::VectorXd mean, Eigen::MatrixXd cov) : mean_(std::move(mean)), cov_(std::move(cov)) {
    if (mean_.size() == 0 || mean_.size() % 2 != 0)
      throw std::invalid_argument("GaussianState: mean must have even, nonzero length");
    if (cov_.rows() != mean_.size() || cov_.cols() != mean_.size())
      throw std::invalid_argument("GaussianState: covariance shape does not match mean");
    const double scale = std::max(1.0, cov_.cwiseAbs().maxCoeff());
    if ((cov_ - cov_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
      throw std::invalid_argument("GaussianState: covariance is not symmetric");
    cov_ = 0.5 * (cov_ + cov_.transpose()).eval();
  }

  std::size_t n_modes() const { return static_cast<std::size_t>(mean_.size() / 2); }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& cov() const { return cov_; }

  static std::size_t index(std::size_t mode, Quadrature q) { return 2 * mode + (q == Quadrature::P ? 1 : 0); }

  double variance(std::size_t mode, Quadrature q) const {
    const auto i = index(mode, q);
    return cov_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
  }

  /// Variance of sum_k w_k R_k for a weight vector over all quadratures.
  double combination_variance(const Eigen::VectorXd& weights) const { return weights.dot(cov_ * weights); }

  /// Smallest eigenvalue of cov + (i/2) Omega; non-negative for physical states.
  double uncertainty_margin() const {
    Eigen::MatrixXcd m = cov_.cast<std::complex<double>>();
    m += std::complex<double>(0.0, 0.5) * symplectic_form(n_modes()).cast<std::complex<double>>();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(m, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff();
  }

  bool is_physical(double tol = 1e-10) const { return uncertainty_margin() >= -tol; }

  /// Purity Tr(rho^2) = 1 / sqrt(det(2 cov)).
  double purity() const { return 1.0 / std::sqrt((2.0 * cov_).determinant()); }

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
};

inline GaussianState vacuum(std::size_t n_modes) {
  if (n_modes == 0) throw std::invalid_argument("vacuum: n_modes must be >= 1");
  const auto dim = static_cast<Eigen::Index>(2 * n_modes);
  return {Eigen::VectorXd::Zero(dim), kVacuumVariance * Eigen::MatrixXd::Identity(dim, dim)};
}

inline GaussianState thermal(std::size_t n_modes, double occupancy) {
  if (n_modes == 0) throw std::invalid_argument("thermal: n_modes must be >= 1");
  if (!(occupancy >= 0.0)) throw std::invalid_argument("thermal: occupancy must be >= 0");
  const auto dim = static_cast<Eigen::Index>(2 * n_modes);
  return {Eigen::VectorXd::Zero(dim), (occupancy + kVacuumVariance) * Eigen::MatrixXd::Identity(dim, dim)};
}

/// Coherent state |alpha> with <x> = sqrt(2) Re(alpha), <p> = sqrt(2) Im(alpha).
inline GaussianState coherent(std::complex<double> alpha) {
  Eigen::VectorXd mean(2);
  mean << std::sqrt(2.0) * alpha.real(), std::sqrt(2.0) * alpha.imag();
  return {mean, kVacuumVariance * Eigen::MatrixXd::Identity(2, 2)};
}

/// Symmetric two-mode state with Var(xA+xB) = Var(pA-pB) = dxi2 and
/// Var(xA-xB) = Var(pA+pB) = dxi_perp2.
inline GaussianState epr_state(double dxi2, double dxi_perp2) {
  if (!(dxi2 > 0.0) || !(dxi_perp2 > 0.0)) throw std::invalid_argument("epr_state: variances must be > 0");
  const double v = 0.25 * (dxi2 + dxi_perp2);
  const double c = 0.25 * (dxi2 - dxi_perp2);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(4, 4);
  cov(0, 0) = cov(1, 1) = cov(2, 2) = cov(3, 3) = v;
  cov(0, 2) = cov(2, 0) = c;
  cov(1, 3) = cov(3, 1) = -c;
  return {Eigen::VectorXd::Zero(4), cov};
}

/// Two-mode squeezed vacuum with x_A + x_B and p_A - p_B squeezed to e^{-2r}.
inline GaussianState two_mode_squeezed_vacuum(double r) { return epr_state(std::exp(-2.0 * r), std::exp(2.0 * r)); }

/// Direct sum of two states (modes of `a` first).
inline GaussianState tensor(const GaussianState& a, const GaussianState& b) {
  const auto na = a.mean().size();
  const auto nb = b.mean().size();
  Eigen::VectorXd mean(na + nb);
  mean << a.mean(), b.mean();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(na + nb, na + nb);
  cov.topLeftCorner(na, na) = a.cov();
  cov.bottomRightCorner(nb, nb) = b.cov();
  return {mean, cov};
}

/// Apply R_S -> X R_S + noise to the quadratures listed in `idx`, where the
/// noise is uncorrelated with everything else and has covariance Y.
inline GaussianState apply_gaussian_channel(const GaussianState& state, const std::vector<Eigen::Index>& idx,
                                            const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
  const auto k = static_cast<Eigen::Index>(idx.size());
  Eigen::VectorXd mean = state.mean();
  Eigen::MatrixXd cov = state.cov();
  Eigen::VectorXd sub_mean(k);
  for (Eigen::Index i = 0; i < k; ++i) sub_mean(i) = mean(idx[i]);
  sub_mean = X * sub_mean;
  for (Eigen::Index i = 0; i < k; ++i) mean(idx[i]) = sub_mean(i);

  Eigen::MatrixXd rows(k, cov.cols());
  for (Eigen::Index i = 0; i < k; ++i) rows.row(i) = cov.row(idx[i]);
  rows = X * rows;
  for (Eigen::Index i = 0; i < k; ++i) cov.row(idx[i]) = rows.row(i);
  Eigen::MatrixXd cols(cov.rows(), k);
  for (Eigen::Index i = 0; i < k; ++i) cols.col(i) = cov.col(idx[i]);
  cols = cols * X.transpose();
  for (Eigen::Index i = 0; i < k; ++i) cov.col(idx[i]) = cols.col(i);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) cov(idx[i], idx[j]) += Y(i, j);
  return {mean, 0.5 * (cov + cov.transpose())};
}

namespace detail {
inline void check_mode(const GaussianState& s, std::size_t mode, const char* what) {
  if (mode >= s.n_modes()) throw std::out_of_range(std::string(what) + ": mode index out of range");
}
inline std::vector<Eigen::Index> mode_indices(std::size_t mode) {
  return {static_cast<Eigen::Index>(2 * mode), static_cast<Eigen::Index>(2 * mode + 1)};
}
}  // namespace detail

/// Lossy phase-sensitive amplifier:
///   amplified quadrature:   R -> sqrt(g_x) R + sqrt(s_x) h
///   deamplified quadrature: R -> R / sqrt(g_p) - sqrt(s_p) h
/// with h in a thermal state of occupancy n_env.
struct JpaSpec {
  double g_x = 1.0;
  double g_p = 1.0;
  double s_x = 0.0;
  double s_p = 0.0;
  double n_env = 0.0;
  Quadrature amplified = Quadrature::X;

  /// From resonator squeezing rate chi, external coupling k and internal loss gamma.
  static JpaSpec from_physical(double chi, double k, double gamma, double n_env = 0.0,
                               Quadrature amplified = Quadrature::X) {
    if (!(k > 0.0) || !(gamma >= 0.0) || !(chi >= 0.0))
      throw std::invalid_argument("JpaSpec: need chi >= 0, k > 0, gamma >= 0");
    const double below = 2.0 * chi - k - gamma;
    const double above = 2.0 * chi + k + gamma;
    if (std::abs(below) < 1e-14 * above) throw std::invalid_argument("JpaSpec: 2 chi = k + gamma is singular");
    JpaSpec s;
    const double sqrt_gx = (2.0 * chi + k - gamma) / below;
    const double inv_sqrt_gp = (2.0 * chi - k + gamma) / above;
    s.g_x = sqrt_gx * sqrt_gx;
    s.g_p = 1.0 / (inv_sqrt_gp * inv_sqrt_gp);
    s.s_x = 4.0 * k * gamma / (below * below);
    s.s_p = 4.0 * k * gamma / (above * above);
    s.n_env = n_env;
    s.amplified = amplified;
    return s;
  }

  /// Noiseless squeezer with gain e^{2r}.
  static JpaSpec ideal(double r, Quadrature amplified = Quadrature::X) {
    JpaSpec s;
    s.g_x = s.g_p = std::exp(2.0 * r);
    s.amplified = amplified;
    return s;
  }

  /// Noiseless squeezer whose squeezed quadrature ends at `sigma_s2` from vacuum.
  static JpaSpec from_squeezed_variance(double sigma_s2, Quadrature amplified = Quadrature::X) {
    if (!(sigma_s2 > 0.0) || sigma_s2 > kVacuumVariance)
      throw std::invalid_argument("JpaSpec: squeezed variance must be in (0, 0.5]");
    JpaSpec s;
    s.g_x = s.g_p = kVacuumVariance / sigma_s2;
    s.amplified = amplified;
    return s;
  }

  /// Symmetric preamplifier with referred-to-input quadrature noise a_j on both quadratures.
  static JpaSpec preamplifier(double gain, double a_j, Quadrature amplified, double n_env = 0.0) {
    JpaSpec s;
    s.g_x = s.g_p = gain;
    s.s_x = s.s_p = a_j * gain / (n_env + kVacuumVariance);
    s.n_env = n_env;
    s.amplified = amplified;
    return s;
  }

  double noise_variance() const { return n_env + kVacuumVariance; }

  /// s_x s_p - (sqrt(g_x/g_p) - 1)^2; zero for amplifiers built from physical parameters.
  double noise_relation_residual() const {
    const double d = std::sqrt(g_x / g_p) - 1.0;
    return s_x * s_p - d * d;
  }
};

inline GaussianState apply_jpa(const GaussianState& state, std::size_t mode, const JpaSpec& spec) {
  detail::check_mode(state, mode, "apply_jpa");
  if (!(spec.g_x >= 1.0) || !(spec.g_p >= 1.0)) throw std::invalid_argument("apply_jpa: gains must be >= 1");
  if (!(spec.s_x >= 0.0) || !(spec.s_p >= 0.0) || !(spec.n_env >= 0.0))
    throw std::invalid_argument("apply_jpa: noise parameters must be >= 0");
  const double amp = std::sqrt(spec.g_x);
  const double deamp = 1.0 / std::sqrt(spec.g_p);
  const double v = spec.noise_variance();
  Eigen::Matrix2d X = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d Y = Eigen::Matrix2d::Zero();
  const int a = spec.amplified == Quadrature::X ? 0 : 1;
  const int d = 1 - a;
  X(a, a) = amp;
  X(d, d) = deamp;
  Y(a, a) = spec.s_x * v;
  Y(d, d) = spec.s_p * v;
  return apply_gaussian_channel(state, detail::mode_indices(mode), X, Y);
}

/// Pure loss: R -> sqrt(eta) R + sqrt(1 - eta) R_env, environment thermal.
inline GaussianState loss_channel(const GaussianState& state, std::size_t mode, double eta, double env_occupancy = 0.0) {
  detail::check_mode(state, mode, "loss_channel");
  if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("loss_channel: eta must be in [0,1]");
  if (!(env_occupancy >= 0.0)) throw std::invalid_argument("loss_channel: environment occupancy must be >= 0");
  const Eigen::Matrix2d X = std::sqrt(eta) * Eigen::Matrix2d::Identity();
  const Eigen::Matrix2d Y = (1.0 - eta) * (env_occupancy + kVacuumVariance) * Eigen::Matrix2d::Identity();
  return apply_gaussian_channel(state, detail::mode_indices(mode), X, Y);
}

/// Phase-insensitive amplifier a -> sqrt(g) a + sqrt(g-1) h^dagger.
struct AmpSpec {
  double g = 1.0;
  double n_noise = 0.0;

  /// Noise quadrature variance referred to the input: (g-1)/g * (n+1/2).
  double referred_input_noise() const { return (g - 1.0) / g * (n_noise + kVacuumVariance); }

  /// Amplifier whose referred-to-input quadrature noise is `a_h`.
  static AmpSpec from_referred_noise(double gain, double a_h) {
    if (!(gain >= 1.0)) throw std::invalid_argument("AmpSpec: gain must be >= 1");
    AmpSpec s{gain, 0.0};
    if (gain == 1.0) {
      if (a_h != 0.0) throw std::invalid_argument("AmpSpec: unit gain amplifier adds no noise");
      return s;
    }
    s.n_noise = a_h * gain / (gain - 1.0) - kVacuumVariance;
    if (s.n_noise < -1e-12)
      throw std::invalid_argument("AmpSpec: referred noise below the quantum limit (g-1)/(2g)");
    s.n_noise = std::max(0.0, s.n_noise);
    return s;
  }
};

inline GaussianState phase_insensitive_amp(const GaussianState& state, std::size_t mode, const AmpSpec& spec) {
  detail::check_mode(state, mode, "phase_insensitive_amp");
  if (!(spec.g >= 1.0)) throw std::invalid_argument("phase_insensitive_amp: gain must be >= 1");
  if (!(spec.n_noise >= 0.0)) throw std::invalid_argument("phase_insensitive_amp: noise occupancy must be >= 0");
  const Eigen::Matrix2d X = std::sqrt(spec.g) * Eigen::Matrix2d::Identity();
  const Eigen::Matrix2d Y = (spec.g - 1.0) * (spec.n_noise + kVacuumVariance) * Eigen::Matrix2d::Identity();
  return apply_gaussian_channel(state, detail::mode_indices(mode), X, Y);
}

/// Passive 2x2 mixer acting identically on x and p:
///   out_i =  sqrt(tau) in_i + sqrt(1-tau) in_j
///   out_j =  sqrt(1-tau) in_i - sqrt(tau) in_j
inline Eigen::Matrix4d beam_splitter_matrix(double tau) {
  const double c = std::sqrt(tau);
  const double s = std::sqrt(1.0 - tau);
  Eigen::Matrix4d S = Eigen::Matrix4d::Zero();
  S(0, 0) = S(1, 1) = c;
  S(0, 2) = S(1, 3) = s;
  S(2, 0) = S(3, 1) = s;
  S(2, 2) = S(3, 3) = -c;
  return S;
}

/// Beam splitter with internal power loss placed symmetrically on both outputs.
inline GaussianState beam_splitter(const GaussianState& state, std::size_t mode_i, std::size_t mode_j, double tau,
                                   double power_loss_db = 0.0) {
  detail::check_mode(state, mode_i, "beam_splitter");
  detail::check_mode(state, mode_j, "beam_splitter");
  if (mode_i == mode_j) throw std::invalid_argument("beam_splitter: modes must be distinct");
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("beam_splitter: tau must be in [0,1]");
  if (!(power_loss_db >= 0.0)) throw std::invalid_argument("beam_splitter: loss must be >= 0 dB");
  const std::vector<Eigen::Index> idx{static_cast<Eigen::Index>(2 * mode_i), static_cast<Eigen::Index>(2 * mode_i + 1),
                                      static_cast<Eigen::Index>(2 * mode_j), static_cast<Eigen::Index>(2 * mode_j + 1)};
  GaussianState out = apply_gaussian_channel(state, idx, beam_splitter_matrix(tau), Eigen::Matrix4d::Zero());
  if (power_loss_db > 0.0) {
    const double eta = db_to_transmissivity(power_loss_db);
    out = loss_channel(out, mode_i, eta);
    out = loss_channel(out, mode_j, eta);
  }
  return out;
}

inline GaussianState displace(const GaussianState& state, std::size_t mode, double dx, double dp) {
  detail::check_mode(state, mode, "displace");
  Eigen::VectorXd mean = state.mean();
  mean(static_cast<Eigen::Index>(2 * mode)) += dx;
  mean(static_cast<Eigen::Index>(2 * mode + 1)) += dp;
  return {mean, state.cov()};
}

/// Reduced state of the listed modes (in the given order).
inline GaussianState reduce(const GaussianState& state, const std::vector<std::size_t>& modes) {
  std::vector<Eigen::Index> idx;
  for (auto m : modes) {
    detail::check_mode(state, m, "reduce");
    idx.push_back(static_cast<Eigen::Index>(2 * m));
    idx.push_back(static_cast<Eigen::Index>(2 * m + 1));
  }
  return {state.mean()(idx), state.cov()(idx, idx)};
}

/// Tr(rho1 rho2) for Gaussian states; equals the fidelity when either is pure.
inline double overlap(const GaussianState& a, const GaussianState& b) {
  if (a.n_modes() != b.n_modes()) throw std::invalid_argument("overlap: mode counts differ");
  const Eigen::MatrixXd sum = a.cov() + b.cov();
  const Eigen::VectorXd d = a.mean() - b.mean();
  Eigen::LDLT<Eigen::MatrixXd> ldlt(sum);
  return std::exp(-0.5 * d.dot(ldlt.solve(d))) / std::sqrt(sum.determinant());
}

/// Outcome distribution and conditioning map of a homodyne measurement.
class HomodyneMeasurement {
 public:
  HomodyneMeasurement(const GaussianState& state, std::size_t mode, Quadrature q) {
    detail::check_mode(state, mode, "homodyne");
    const auto k = static_cast<Eigen::Index>(GaussianState::index(mode, q));
    mean_ = state.mean()(k);
    variance_ = state.cov()(k, k);
    if (!(variance_ >= 1e-12)) throw SingularConditioning("homodyne: measured quadrature has zero variance");
    std::vector<Eigen::Index> rest;
    for (std::size_t m = 0; m < state.n_modes(); ++m) {
      if (m == mode) continue;
      rest.push_back(static_cast<Eigen::Index>(2 * m));
      rest.push_back(static_cast<Eigen::Index>(2 * m + 1));
    }
    if (rest.empty()) return;
    rest_mean_ = state.mean()(rest);
    const Eigen::VectorXd cross = state.cov()(rest, std::vector<Eigen::Index>{k}).col(0);
    gain_ = cross / variance_;
    rest_cov_ = state.cov()(rest, rest) - cross * cross.transpose() / variance_;
    rest_cov_ = 0.5 * (rest_cov_ + rest_cov_.transpose()).eval();
  }

  double mean() const { return mean_; }
  double variance() const { return variance_; }
  bool has_remaining_modes() const { return rest_mean_.size() > 0; }

  /// State of the unmeasured modes given the outcome; the measured mode is removed.
  GaussianState conditional(double outcome) const {
    if (!has_remaining_modes()) throw std::logic_error("homodyne: no modes remain after measurement");
    return {rest_mean_ + gain_ * (outcome - mean_), rest_cov_};
  }

  /// Conditional mean shift per unit outcome deviation.
  const Eigen::VectorXd& gain() const { return gain_; }
  const Eigen::MatrixXd& conditional_cov() const { return rest_cov_; }

 private:
  double mean_ = 0.0;
  double variance_ = 0.0;
  Eigen::VectorXd rest_mean_;
  Eigen::VectorXd gain_;
  Eigen::MatrixXd rest_cov_;
};

inline HomodyneMeasurement homodyne(const GaussianState& state, std::size_t mode, Quadrature q) {
  return HomodyneMeasurement(state, mode, q);
}

}  // namespace mwtele
