#pragma once

// Truncated Fock-space states of a few bosonic modes.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace mwtele {

using cplx = std::complex<double>;

class FockState {
 public:
  FockState() = default;
  FockState(std::vector<int> dims, Eigen::VectorXcd amps, double leakage = 0.0)
      : dims_(std::move(dims)), amps_(std::move(amps)), leakage_(leakage) {
    if (dims_.empty()) throw std::invalid_argument("FockState: need at least one mode");
    std::size_t total = 1;
    for (int d : dims_) {
      if (d < 1) throw std::invalid_argument("FockState: dimensions must be >= 1");
      total *= static_cast<std::size_t>(d);
    }
    if (static_cast<std::size_t>(amps_.size()) != total) throw std::invalid_argument("FockState: amplitude count mismatch");
  }

  static FockState basis(const std::vector<int>& dims, const std::vector<int>& occupation) {
    if (occupation.size() != dims.size()) throw std::invalid_argument("FockState::basis: occupation size mismatch");
    std::size_t total = 1;
    for (int d : dims) total *= static_cast<std::size_t>(d);
    Eigen::VectorXcd amps = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(total));
    FockState s(dims, amps);
    s.amps_(static_cast<Eigen::Index>(s.index(occupation))) = 1.0;
    return s;
  }

  const std::vector<int>& dims() const { return dims_; }
  std::size_t n_modes() const { return dims_.size(); }
  const Eigen::VectorXcd& amps() const { return amps_; }
  Eigen::VectorXcd& amps() { return amps_; }
  std::size_t size() const { return static_cast<std::size_t>(amps_.size()); }

  /// Norm weight lost to truncation when the state was built (estimate).
  double leakage() const { return leakage_; }
  void set_leakage(double v) { leakage_ = v; }

  /// Row-major: the last mode varies fastest.
  std::size_t stride(std::size_t mode) const {
    std::size_t s = 1;
    for (std::size_t m = mode + 1; m < dims_.size(); ++m) s *= static_cast<std::size_t>(dims_[m]);
    return s;
  }

  std::size_t index(const std::vector<int>& occupation) const {
    std::size_t idx = 0;
    for (std::size_t m = 0; m < dims_.size(); ++m) {
      if (occupation[m] < 0 || occupation[m] >= dims_[m]) throw std::out_of_range("FockState: occupation out of range");
      idx = idx * static_cast<std::size_t>(dims_[m]) + static_cast<std::size_t>(occupation[m]);
    }
    return idx;
  }

  int occupation(std::size_t flat, std::size_t mode) const {
    return static_cast<int>((flat / stride(mode)) % static_cast<std::size_t>(dims_[mode]));
  }

  cplx amp(const std::vector<int>& occupation) const { return amps_(static_cast<Eigen::Index>(index(occupation))); }

  double norm2() const { return amps_.squaredNorm(); }

  FockState normalized() const {
    const double n = std::sqrt(norm2());
    if (!(n > 0.0)) throw std::runtime_error("FockState: cannot normalise a zero vector");
    return FockState(dims_, amps_ / n, leakage_);
  }

 private:
  std::vector<int> dims_;
  Eigen::VectorXcd amps_;
  double leakage_ = 0.0;
};

inline Eigen::MatrixXd annihilation(int dim) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim, dim);
  for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

inline Eigen::MatrixXd number_operator(int dim) {
  return Eigen::VectorXd::LinSpaced(dim, 0.0, static_cast<double>(dim - 1)).asDiagonal();
}

namespace detail {
inline void check_mode(const FockState& s, std::size_t mode) {
  if (mode >= s.n_modes()) throw std::out_of_range("FockState: mode index out of range");
}
}  // namespace detail

/// Apply a single-mode operator (dim x dim) to one mode.
inline FockState apply_single_mode(const FockState& s, std::size_t mode, const Eigen::MatrixXcd& op) {
  detail::check_mode(s, mode);
  const int d = s.dims()[mode];
  if (op.rows() != d || op.cols() != d) throw std::invalid_argument("apply_single_mode: operator size mismatch");
  const std::size_t inner = s.stride(mode);
  const std::size_t outer = s.size() / (inner * static_cast<std::size_t>(d));
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(s.amps().size());
  Eigen::VectorXcd slice(d);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * inner * static_cast<std::size_t>(d) + i;
      for (int n = 0; n < d; ++n) slice(n) = s.amps()(static_cast<Eigen::Index>(base + n * inner));
      const Eigen::VectorXcd r = op * slice;
      for (int n = 0; n < d; ++n) out(static_cast<Eigen::Index>(base + n * inner)) = r(n);
    }
  return FockState(s.dims(), out, s.leakage());
}

/// Multiply each amplitude by f(n) where n is the occupation of `mode`.
inline FockState apply_diagonal(const FockState& s, std::size_t mode, const std::function<cplx(int)>& f) {
  detail::check_mode(s, mode);
  const int d = s.dims()[mode];
  std::vector<cplx> factor(static_cast<std::size_t>(d));
  for (int n = 0; n < d; ++n) factor[static_cast<std::size_t>(n)] = f(n);
  Eigen::VectorXcd out = s.amps();
  for (std::size_t k = 0; k < s.size(); ++k)
    out(static_cast<Eigen::Index>(k)) *= factor[static_cast<std::size_t>(s.occupation(k, mode))];
  return FockState(s.dims(), out, s.leakage());
}

/// Probability distribution of the occupation of one mode.
inline Eigen::VectorXd occupation_distribution(const FockState& s, std::size_t mode) {
  detail::check_mode(s, mode);
  Eigen::VectorXd p = Eigen::VectorXd::Zero(s.dims()[mode]);
  for (std::size_t k = 0; k < s.size(); ++k) p(s.occupation(k, mode)) += std::norm(s.amps()(static_cast<Eigen::Index>(k)));
  return p;
}

inline double mean_photon_number(const FockState& s, std::size_t mode) {
  const Eigen::VectorXd p = occupation_distribution(s, mode);
  return p.dot(Eigen::VectorXd::LinSpaced(p.size(), 0.0, static_cast<double>(p.size() - 1))) / p.sum();
}

/// Two-mode squeezed vacuum sum_n (-lambda)^n |n,n> with x_A + x_B squeezed.
inline FockState tmss(double lambda, int dim) {
  if (!(lambda >= 0.0 && lambda < 1.0)) throw std::invalid_argument("tmss: lambda must be in [0,1)");
  if (dim < 1) throw std::invalid_argument("tmss: dim must be >= 1");
  Eigen::VectorXcd amps = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(dim) * dim);
  double c = 1.0;
  for (int n = 0; n < dim; ++n) {
    amps(static_cast<Eigen::Index>(n) * dim + n) = c;
    c *= -lambda;
  }
  FockState s({dim, dim}, amps, std::pow(lambda, 2.0 * dim));
  return s.normalized();
}

struct DilationOptions {
  std::size_t max_elements = std::size_t{1} << 24;
};

/// Beam-splitter loss with a vacuum ancilla appended as a new last mode:
///   |n> -> sum_k sqrt(C(n,k)) eta^{k/2} (1-eta)^{(n-k)/2} (-1)^{n-k} |k>|n-k>.
inline FockState apply_loss_dilated(const FockState& s, std::size_t mode, double eta, DilationOptions opt = {}) {
  detail::check_mode(s, mode);
  if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("apply_loss_dilated: eta must be in [0,1]");
  const int d = s.dims()[mode];
  std::vector<int> dims = s.dims();
  dims.push_back(d);
  const std::size_t total = s.size() * static_cast<std::size_t>(d);
  if (total > opt.max_elements) throw std::length_error("apply_loss_dilated: dilation exceeds memory bound");

  // Kraus-like coefficient table c[n][k].
  std::vector<std::vector<double>> coef(static_cast<std::size_t>(d));
  for (int n = 0; n < d; ++n) {
    auto& row = coef[static_cast<std::size_t>(n)];
    row.assign(static_cast<std::size_t>(n + 1), 0.0);
    for (int k = 0; k <= n; ++k) {
      const double log_binom = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
      double mag = std::exp(0.5 * log_binom);
      mag *= (k == 0) ? 1.0 : std::pow(eta, 0.5 * k);
      mag *= (n - k == 0) ? 1.0 : std::pow(1.0 - eta, 0.5 * (n - k));
      row[static_cast<std::size_t>(k)] = ((n - k) % 2 == 0) ? mag : -mag;
    }
  }
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(total));
  const std::size_t st = s.stride(mode);
  for (std::size_t flat = 0; flat < s.size(); ++flat) {
    const cplx a = s.amps()(static_cast<Eigen::Index>(flat));
    if (a == 0.0) continue;
    const int n = s.occupation(flat, mode);
    const std::size_t without = flat - static_cast<std::size_t>(n) * st;
    for (int k = 0; k <= n; ++k) {
      const double c = coef[static_cast<std::size_t>(n)][static_cast<std::size_t>(k)];
      if (c == 0.0) continue;
      const std::size_t target = (without + static_cast<std::size_t>(k) * st) * static_cast<std::size_t>(d) +
                                 static_cast<std::size_t>(n - k);
      out(static_cast<Eigen::Index>(target)) += c * a;
    }
  }
  return FockState(dims, out, s.leakage());
}

/// Reduced density matrix of the listed modes, in the listed order.
inline Eigen::MatrixXcd reduced_density(const FockState& s, const std::vector<std::size_t>& keep) {
  std::vector<bool> kept(s.n_modes(), false);
  std::size_t dk = 1;
  for (auto m : keep) {
    detail::check_mode(s, m);
    if (kept[m]) throw std::invalid_argument("reduced_density: duplicate mode");
    kept[m] = true;
    dk *= static_cast<std::size_t>(s.dims()[m]);
  }
  const std::size_t dt = s.size() / dk;
  // Reorganise amplitudes into a (kept x traced) matrix.
  Eigen::MatrixXcd psi = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(dk), static_cast<Eigen::Index>(dt));
  for (std::size_t flat = 0; flat < s.size(); ++flat) {
    std::size_t row = 0;
    for (auto m : keep) row = row * static_cast<std::size_t>(s.dims()[m]) + static_cast<std::size_t>(s.occupation(flat, m));
    std::size_t col = 0;
    for (std::size_t m = 0; m < s.n_modes(); ++m)
      if (!kept[m]) col = col * static_cast<std::size_t>(s.dims()[m]) + static_cast<std::size_t>(s.occupation(flat, m));
    psi(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) = s.amps()(static_cast<Eigen::Index>(flat));
  }
  return psi * psi.adjoint();
}

/// |<a|b>|^2 for normalised pure states of the same shape.
inline double pure_fidelity(const FockState& a, const FockState& b) {
  if (a.dims() != b.dims()) throw std::invalid_argument("pure_fidelity: shapes differ");
  return std::norm(a.amps().dot(b.amps())) / (a.norm2() * b.norm2());
}

/// Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2 of two density matrices.
inline double density_fidelity(const Eigen::MatrixXcd& rho, const Eigen::MatrixXcd& sigma) {
  if (rho.rows() != sigma.rows() || rho.cols() != sigma.cols())
    throw std::invalid_argument("density_fidelity: shapes differ");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho / rho.trace().real());
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXcd sq = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
  const Eigen::MatrixXcd m = sq * (sigma / sigma.trace().real()) * sq;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es2(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
  const double t = es2.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  return t * t;
}

struct NlaResult {
  FockState state;             // renormalised
  double success_weight = 0;   // squared norm after g^n relative to before
  double top_weight = 0;       // weight on the highest retained level after amplification
};

/// Noiseless linear amplification g^n on one mode.
inline NlaResult nla_gn(const FockState& s, std::size_t mode, double g, double max_top_weight = 1e-3) {
  detail::check_mode(s, mode);
  if (!(g >= 1.0)) throw std::invalid_argument("nla_gn: g must be >= 1");
  const FockState raw = apply_diagonal(s, mode, [g](int n) { return cplx(std::pow(g, n), 0.0); });
  const Eigen::VectorXd dist = occupation_distribution(raw, mode);
  NlaResult r;
  r.success_weight = raw.norm2() / s.norm2();
  r.top_weight = dist(dist.size() - 1) / dist.sum();
  if (r.top_weight > max_top_weight)
    throw std::domain_error("nla_gn: amplified state is not captured by the truncation (g*lambda too close to 1)");
  r.state = raw.normalized();
  r.state.set_leakage(std::max(s.leakage(), r.top_weight));
  return r;
}

/// Components <n|p> of the p-quadrature eigenvector, <n|p> = i^n psi_n(p) with psi_n the
/// normalised Hermite functions.
inline Eigen::VectorXcd quadrature_eigenvector(double p, int dim) {
  if (dim < 1) throw std::invalid_argument("quadrature_eigenvector: dim must be >= 1");
  if (std::abs(p) > std::sqrt(2.0 * dim + 1.0))
    throw std::domain_error("quadrature_eigenvector: |p| beyond the range resolved by this truncation");
  Eigen::VectorXd psi(dim);
  // Recursion on rescaled values; `log_scale` carries the factored-out magnitude.
  double log_scale = -0.5 * p * p;
  double prev = 0.0;
  double cur = std::pow(std::numbers::pi, -0.25);
  std::vector<double> logs(static_cast<std::size_t>(dim));
  psi(0) = cur;
  logs[0] = log_scale;
  for (int n = 0; n + 1 < dim; ++n) {
    const double next = std::sqrt(2.0 / (n + 1)) * p * cur - std::sqrt(static_cast<double>(n) / (n + 1)) * prev;
    prev = cur;
    cur = next;
    if (std::abs(cur) > 1e150) {
      cur *= 1e-150;
      prev *= 1e-150;
      log_scale += 150.0 * std::log(10.0);
    }
    psi(n + 1) = cur;
    logs[static_cast<std::size_t>(n + 1)] = log_scale;
  }
  Eigen::VectorXcd out(dim);
  cplx phase(1.0, 0.0);
  for (int n = 0; n < dim; ++n) {
    out(n) = phase * psi(n) * std::exp(logs[static_cast<std::size_t>(n)]);
    phase *= cplx(0.0, 1.0);
  }
  return out;
}

/// Coherent-state amplitudes <n|alpha> truncated at dim.
inline Eigen::VectorXcd coherent_amplitudes(cplx alpha, int dim) {
  Eigen::VectorXcd c(dim);
  cplx v = std::exp(-0.5 * std::norm(alpha));
  for (int n = 0; n < dim; ++n) {
    c(n) = v;
    v *= alpha / std::sqrt(static_cast<double>(n + 1));
  }
  return c;
}

/// Quadrature operator sum_m (wx_m x_m + wp_m p_m) applied to a state.
inline FockState apply_quadrature(const FockState& s, const std::vector<double>& wx, const std::vector<double>& wp) {
  if (wx.size() != s.n_modes() || wp.size() != s.n_modes())
    throw std::invalid_argument("apply_quadrature: weight count must equal mode count");
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(s.amps().size());
  const double r2 = 1.0 / std::sqrt(2.0);
  for (std::size_t m = 0; m < s.n_modes(); ++m) {
    if (wx[m] == 0.0 && wp[m] == 0.0) continue;
    // x = (a + a^dag)/sqrt2, p = -i (a - a^dag)/sqrt2
    const cplx lower = r2 * cplx(wx[m], -wp[m]);
    const cplx raise = r2 * cplx(wx[m], wp[m]);
    const int d = s.dims()[m];
    const std::size_t st = s.stride(m);
    for (std::size_t flat = 0; flat < s.size(); ++flat) {
      const cplx a = s.amps()(static_cast<Eigen::Index>(flat));
      if (a == 0.0) continue;
      const int n = static_cast<int>((flat / st) % static_cast<std::size_t>(d));
      if (n > 0) out(static_cast<Eigen::Index>(flat - st)) += lower * std::sqrt(static_cast<double>(n)) * a;
      if (n + 1 < d) out(static_cast<Eigen::Index>(flat + st)) += raise * std::sqrt(static_cast<double>(n + 1)) * a;
    }
  }
  return FockState(s.dims(), out, s.leakage());
}

struct QuadratureMoments {
  double mean = 0.0;
  double variance = 0.0;
};

/// Mean and variance of a quadrature combination on a pure state.
inline QuadratureMoments quadrature_moments(const FockState& s, const std::vector<double>& wx,
                                            const std::vector<double>& wp) {
  const FockState q = apply_quadrature(s, wx, wp);
  const double n2 = s.norm2();
  QuadratureMoments r;
  r.mean = s.amps().dot(q.amps()).real() / n2;
  r.variance = q.norm2() / n2 - r.mean * r.mean;
  return r;
}

/// First and second quadrature moments of a (possibly unnormalised) pure state,
/// restricted to the listed modes; adds with weight `w` so mixtures can be accumulated.
class MomentAccumulator {
 public:
  explicit MomentAccumulator(std::vector<std::size_t> modes) : modes_(std::move(modes)) {
    const auto n = static_cast<Eigen::Index>(2 * modes_.size());
    m1_ = Eigen::VectorXd::Zero(n);
    m2_ = Eigen::MatrixXd::Zero(n, n);
  }

  void add(const FockState& s, double w = 1.0) {
    const std::size_t n = 2 * modes_.size();
    std::vector<FockState> applied;
    applied.reserve(n);
    const double n2 = s.norm2();
    if (!(n2 > 0.0)) return;
    for (std::size_t k = 0; k < n; ++k) {
      std::vector<double> wx(s.n_modes(), 0.0), wp(s.n_modes(), 0.0);
      (k % 2 == 0 ? wx : wp)[modes_[k / 2]] = 1.0;
      applied.push_back(apply_quadrature(s, wx, wp));
      m1_(static_cast<Eigen::Index>(k)) += w * s.amps().dot(applied.back().amps()).real() / n2;
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) {
        // Symmetrised second moment Re <R_i R_j>.
        const double v = w * applied[i].amps().dot(applied[j].amps()).real() / n2;
        m2_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += v;
        if (i != j) m2_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) += v;
      }
    weight_ += w;
  }

  double weight() const { return weight_; }
  Eigen::VectorXd mean() const { return m1_ / weight_; }
  Eigen::MatrixXd covariance() const {
    const Eigen::VectorXd mu = mean();
    return m2_ / weight_ - mu * mu.transpose();
  }

  /// Raw weighted sums, for combining accumulators linearly.
  const Eigen::VectorXd& first() const { return m1_; }
  const Eigen::MatrixXd& second() const { return m2_; }

 private:
  std::vector<std::size_t> modes_;
  Eigen::VectorXd m1_;
  Eigen::MatrixXd m2_;
  double weight_ = 0.0;
};

/// Quadrature covariance matrix (x1, p1, ..., xn, pn) of a pure state.
inline Eigen::MatrixXd quadrature_covariance(const FockState& s, std::vector<std::size_t> modes = {}) {
  if (modes.empty())
    for (std::size_t m = 0; m < s.n_modes(); ++m) modes.push_back(m);
  MomentAccumulator acc(modes);
  acc.add(s);
  return acc.covariance();
}

/// Lossy two-mode squeezed vacuum as a pure state on (A, B, E_A, E_B).
inline FockState lossy_tmss(double lambda, double eta_a, double eta_b, int dim, DilationOptions opt = {}) {
  FockState s = tmss(lambda, dim);
  s = apply_loss_dilated(s, 0, eta_a, opt);
  s = apply_loss_dilated(s, 1, eta_b, opt);
  return s;
}

/// Effective parameters of g^n acting on Bob's half of a lossy TMSS.
struct NlaEffective {
  double lambda = 0.0;
  double eta_b = 0.0;
};

inline NlaEffective nla_effective_parameters(double lambda, double eta_b, double g) {
  const double den = 1.0 + (g * g - 1.0) * eta_b;
  return {lambda * std::sqrt(den), g * g * eta_b / den};
}

}  // namespace mwtele
