#pragma once

// Adaptive Lanczos propagator for psi(t) = exp(-i H t) psi(0), H real symmetric sparse.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>
#include <vector>

namespace mwtele {

class StepUnderflow : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct KrylovOptions {
  int max_dim = 30;
  double tol = 1e-10;         // error budget over the whole interval
  double min_step = 1e-12;    // relative to the interval length
  long max_steps = 50'000'000;
};

struct KrylovStats {
  long steps = 0;
  long rejected = 0;
  double error_sum = 0.0;
};

namespace detail {

inline double max_abs_entry(const Eigen::SparseMatrix<double>& h) {
  double m = 0.0;
  for (int k = 0; k < h.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(h, k); it; ++it) m = std::max(m, std::abs(it.value()));
  return m;
}

struct LanczosBasis {
  std::vector<Eigen::VectorXcd> v;
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;  // beta(j) couples v[j] and v[j+1]
  double beta_next = 0.0;  // residual norm after the last vector
  double norm = 0.0;
  Eigen::MatrixXd q;       // eigenvectors of the tridiagonal matrix
  Eigen::VectorXd lambda;  // eigenvalues
};

inline LanczosBasis lanczos(const Eigen::SparseMatrix<double>& h, const Eigen::VectorXcd& psi, int max_dim) {
  LanczosBasis b;
  b.norm = psi.norm();
  const int m_cap = std::min<int>(max_dim, static_cast<int>(psi.size()));
  std::vector<double> al, be;
  b.v.push_back(psi / b.norm);
  const double scale = std::max(1.0, max_abs_entry(h));
  for (int j = 0; j < m_cap; ++j) {
    Eigen::VectorXcd w = h * b.v[static_cast<std::size_t>(j)];
    const double a = b.v[static_cast<std::size_t>(j)].dot(w).real();
    al.push_back(a);
    w -= a * b.v[static_cast<std::size_t>(j)];
    if (j > 0) w -= be.back() * b.v[static_cast<std::size_t>(j - 1)];
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& vk : b.v) w -= vk.dot(w) * vk;
    const double bn = w.norm();
    if (bn < 1e-13 * scale || j + 1 == m_cap) {
      b.beta_next = bn < 1e-13 * scale ? 0.0 : bn;
      break;
    }
    be.push_back(bn);
    b.v.push_back(w / bn);
  }
  const int m = static_cast<int>(al.size());
  b.alpha = Eigen::Map<Eigen::VectorXd>(al.data(), m);
  b.beta = Eigen::VectorXd::Zero(std::max(0, m - 1));
  for (int j = 0; j + 1 < m; ++j) b.beta(j) = be[static_cast<std::size_t>(j)];
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
  for (int j = 0; j < m; ++j) t(j, j) = b.alpha(j);
  for (int j = 0; j + 1 < m; ++j) t(j, j + 1) = t(j + 1, j) = b.beta(j);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
  b.q = es.eigenvectors();
  b.lambda = es.eigenvalues();
  return b;
}

/// Coefficients of exp(-i tau T) e1 in the Lanczos basis.
inline Eigen::VectorXcd krylov_coefficients(const LanczosBasis& b, double tau) {
  const Eigen::VectorXd first = b.q.row(0).transpose();
  Eigen::VectorXcd phased(first.size());
  for (Eigen::Index k = 0; k < first.size(); ++k) phased(k) = first(k) * std::exp(std::complex<double>(0.0, -tau * b.lambda(k)));
  return b.q.cast<std::complex<double>>() * phased;
}

}  // namespace detail

/// Evolve `psi` through the sorted time points in `checkpoints` (all > 0); `observe`
/// is called with (time, state) at each checkpoint.
inline Eigen::VectorXcd krylov_evolve(const Eigen::SparseMatrix<double>& h, Eigen::VectorXcd psi,
                                      const std::vector<double>& checkpoints, const KrylovOptions& opt,
                                      const std::function<void(double, const Eigen::VectorXcd&)>& observe = {},
                                      KrylovStats* stats = nullptr) {
  if (h.rows() != h.cols() || h.rows() != psi.size()) throw std::invalid_argument("krylov_evolve: size mismatch");
  if (checkpoints.empty()) return psi;
  const double t_end = checkpoints.back();
  if (!(t_end > 0.0)) throw std::invalid_argument("krylov_evolve: final time must be > 0");
  if (!std::is_sorted(checkpoints.begin(), checkpoints.end()) || checkpoints.front() <= 0.0)
    throw std::invalid_argument("krylov_evolve: checkpoints must be positive and sorted");
  KrylovStats local;
  KrylovStats& st = stats ? *stats : local;
  const double error_rate = opt.tol / t_end;
  const double norm_h = std::max(1e-300, detail::max_abs_entry(h) * 2.0);
  double t = 0.0;
  double tau = std::min(t_end, 1.0 / norm_h);
  std::size_t next = 0;
  while (next < checkpoints.size()) {
    if (st.steps + st.rejected > opt.max_steps) throw StepUnderflow("krylov_evolve: step budget exhausted");
    const detail::LanczosBasis basis = detail::lanczos(h, psi, opt.max_dim);
    const int m = static_cast<int>(basis.alpha.size());
    const double target = checkpoints[next];
    double step = std::min(tau, target - t);
    Eigen::VectorXcd y;
    double err = 0.0;
    for (;;) {
      if (step < opt.min_step * t_end) throw StepUnderflow("krylov_evolve: step size underflow");
      y = detail::krylov_coefficients(basis, step);
      err = basis.beta_next * std::abs(y(m - 1)) * basis.norm;
      if (err <= error_rate * step) break;
      ++st.rejected;
      const double shrink = std::pow(error_rate * step / err, 1.0 / m);
      step *= std::clamp(0.8 * shrink, 0.1, 0.9);
      tau = step;
    }
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(psi.size());
    for (int j = 0; j < m; ++j) out += y(j) * basis.v[static_cast<std::size_t>(j)];
    psi = basis.norm * out;
    t += step;
    ++st.steps;
    st.error_sum += err;
    // Propose the next step from the achieved error.
    const double grow = err > 0.0 ? std::pow(error_rate * step / err, 1.0 / m) : 4.0;
    const bool clipped = step < tau;
    if (!clipped) tau = step * std::clamp(0.8 * grow, 0.5, 4.0);
    if (std::abs(t - target) <= 1e-12 * t_end) {
      t = target;
      if (observe) observe(t, psi);
      ++next;
    }
  }
  return psi;
}

}  // namespace mwtele
