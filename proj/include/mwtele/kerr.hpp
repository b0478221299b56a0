#pragma once

// Three-level transmon dispersively coupled to two modes, and extraction of the
// effective Stark and cross-Kerr coefficients from exact time evolution.

#include "mwtele/budget.hpp"
#include "mwtele/fock.hpp"
#include "mwtele/krylov.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace mwtele {

/// H = Da |2><2| + Db |1><1| + ga (a |2><1| + h.c.) + gb (b |1><0| + h.c.), hbar = 1.
/// Basis ordering: transmon (3 levels) x mode a x mode b, last index fastest.
struct TransmonSystem {
  double delta_a = 100.0;
  double delta_b = 50.0;
  double g_a = 1.0;
  double g_b = 1.0;
  int n_a = 4;
  int n_b = 4;

  void validate() const {
    if (n_a < 2 || n_b < 2) throw std::invalid_argument("transmon: mode dimensions must be >= 2");
    if (delta_a == 0.0 || delta_b == 0.0) throw std::invalid_argument("transmon: detunings must be nonzero");
    if (!(g_a >= 0.0) || !(g_b >= 0.0)) throw std::invalid_argument("transmon: couplings must be >= 0");
  }

  std::vector<int> dims() const { return {3, n_a, n_b}; }
  int size() const { return 3 * n_a * n_b; }
  int index(int level, int na, int nb) const { return (level * n_a + na) * n_b + nb; }

  /// Largest coupling-to-detuning ratio; the dispersive picture needs it small.
  double dispersive_ratio() const {
    const double gap = std::min({std::abs(delta_a), std::abs(delta_b), std::abs(delta_a - delta_b)});
    return std::max(g_a, g_b) / gap;
  }
  bool dispersive_warning() const { return dispersive_ratio() > 0.05; }
};

/// Detunings from lab-frame frequencies of the modes and the transmon levels 1 and 2.
inline std::pair<double, double> detunings_from_lab(double omega_a, double omega_b, double omega_1, double omega_2) {
  return {omega_2 - omega_a, omega_1 - omega_b};
}

inline Eigen::SparseMatrix<double> build_hamiltonian(const TransmonSystem& sys) {
  sys.validate();
  std::vector<Eigen::Triplet<double>> t;
  for (int na = 0; na < sys.n_a; ++na)
    for (int nb = 0; nb < sys.n_b; ++nb) {
      t.emplace_back(sys.index(2, na, nb), sys.index(2, na, nb), sys.delta_a);
      t.emplace_back(sys.index(1, na, nb), sys.index(1, na, nb), sys.delta_b);
      // a |2><1|: |1; na> -> sqrt(na) |2; na-1>
      if (na > 0 && sys.g_a != 0.0) {
        const double v = sys.g_a * std::sqrt(static_cast<double>(na));
        t.emplace_back(sys.index(2, na - 1, nb), sys.index(1, na, nb), v);
        t.emplace_back(sys.index(1, na, nb), sys.index(2, na - 1, nb), v);
      }
      // b |1><0|: |0; nb> -> sqrt(nb) |1; nb-1>
      if (nb > 0 && sys.g_b != 0.0) {
        const double v = sys.g_b * std::sqrt(static_cast<double>(nb));
        t.emplace_back(sys.index(1, na, nb - 1), sys.index(0, na, nb), v);
        t.emplace_back(sys.index(0, na, nb), sys.index(1, na, nb - 1), v);
      }
    }
  Eigen::SparseMatrix<double> h(sys.size(), sys.size());
  h.setFromTriplets(t.begin(), t.end());
  return h;
}

/// Excitation number n_a + n_b + level, conserved by the Hamiltonian.
inline Eigen::VectorXd excitation_number(const TransmonSystem& sys) {
  Eigen::VectorXd n(sys.size());
  for (int l = 0; l < 3; ++l)
    for (int na = 0; na < sys.n_a; ++na)
      for (int nb = 0; nb < sys.n_b; ++nb) n(sys.index(l, na, nb)) = l + na + nb;
  return n;
}

struct EvolveResult {
  FockState state;
  double norm_drift = 0.0;
  double convergence_delta = 0.0;  // max amplitude change when the tolerance is halved
  KrylovStats stats;
};

inline EvolveResult evolve(const TransmonSystem& sys, const FockState& initial, double t, double tol = 1e-10,
                           bool check_convergence = true) {
  if (initial.dims() != sys.dims()) throw std::invalid_argument("evolve: state dimensions do not match the system");
  if (std::abs(initial.norm2() - 1.0) > 1e-10) throw std::invalid_argument("evolve: initial state must be normalised");
  const auto h = build_hamiltonian(sys);
  KrylovOptions opt;
  opt.tol = tol;
  EvolveResult r;
  const Eigen::VectorXcd out = krylov_evolve(h, initial.amps(), {t}, opt, {}, &r.stats);
  r.state = FockState(sys.dims(), out);
  r.norm_drift = std::abs(out.norm() - 1.0);
  if (check_convergence) {
    opt.tol = 0.5 * tol;
    const Eigen::VectorXcd fine = krylov_evolve(h, initial.amps(), {t}, opt);
    r.convergence_delta = (fine - out).cwiseAbs().maxCoeff();
  }
  return r;
}

/// Analytic excited-state population of the isolated |0; n_b=1> <-> |1; n_b=0> pair.
inline double rabi_population(double g, double delta, double t) {
  const double omega = std::sqrt(delta * delta + 4.0 * g * g);
  const double s = std::sin(0.5 * omega * t);
  return 4.0 * g * g / (omega * omega) * s * s;
}

struct KerrReport {
  double chi_stark = 0.0;        // energy per b photon with the transmon in |0>
  double chi_kerr = 0.0;         // energy per (a photon x b photon)
  double chi_stark_dispersive = 0.0;  // -g_b^2 / Delta_b
  double chi_kerr_fourth_order = 0.0;  // -g_a^2 g_b^2 / (Delta_a Delta_b^2)
  double chi_kerr_reference = 0.0;     // 12 g_a^2 g_b^2 / (Delta_a Delta_b) (1/Delta_b - 1/Delta_a)
  double ratio_to_reference = 0.0;
  double residual_rms = 0.0;     // rad
  double probe_time = 0.0;
  int checkpoints = 0;
  double norm_drift = 0.0;
  double min_ground_population = 1.0;
  double convergence_delta = 0.0;  // change of chi_kerr when the tolerance is halved
  bool dispersive_warning = false;
  long steps = 0;
};

namespace detail {

struct PhaseFit {
  double chi_stark = 0.0;
  double chi_kerr = 0.0;
  double residual_rms = 0.0;
  double norm_drift = 0.0;
  double min_ground = 1.0;
  long steps = 0;
};

inline PhaseFit fit_probe_phases(const TransmonSystem& sys, double t_probe, int n_checkpoints, double tol) {
  const auto h = build_hamiltonian(sys);
  const std::vector<std::pair<int, int>> probes{{0, 0}, {1, 0}, {0, 1}, {1, 1}};
  Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(sys.size());
  for (const auto& [na, nb] : probes) psi(sys.index(0, na, nb)) = 0.5;

  std::vector<double> times(static_cast<std::size_t>(n_checkpoints));
  for (int k = 0; k < n_checkpoints; ++k) times[static_cast<std::size_t>(k)] = t_probe * (k + 1) / n_checkpoints;

  // Unwrapped phase of each probe relative to |0;0,0>.
  std::vector<std::vector<double>> phase(probes.size(), std::vector<double>(times.size(), 0.0));
  std::vector<double> last(probes.size(), 0.0);
  std::size_t k = 0;
  PhaseFit fit;
  auto observe = [&](double, const Eigen::VectorXcd& v) {
    const std::complex<double> ref = v(sys.index(0, 0, 0));
    for (std::size_t p = 0; p < probes.size(); ++p) {
      const std::complex<double> c = v(sys.index(0, probes[p].first, probes[p].second)) * std::conj(ref);
      double ph = std::arg(c);
      ph += 2.0 * std::numbers::pi * std::round((last[p] - ph) / (2.0 * std::numbers::pi));
      phase[p][k] = ph;
      last[p] = ph;
    }
    double ground = 0.0;
    for (int na = 0; na < sys.n_a; ++na)
      for (int nb = 0; nb < sys.n_b; ++nb) ground += std::norm(v(sys.index(0, na, nb)));
    fit.min_ground = std::min(fit.min_ground, ground);
    fit.norm_drift = std::max(fit.norm_drift, std::abs(v.norm() - 1.0));
    ++k;
  };
  KrylovOptions opt;
  opt.tol = tol;
  KrylovStats stats;
  krylov_evolve(h, psi, times, opt, observe, &stats);
  fit.steps = stats.steps;

  // Model: phase_p(t) = -t (chi_stark nb + chi_kerr na nb) + offset_p; unknowns (chi_s, chi_k, 3 offsets).
  const auto rows = static_cast<Eigen::Index>((probes.size() - 1) * times.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows, 5);
  Eigen::VectorXd y(rows);
  Eigen::Index r = 0;
  for (std::size_t p = 1; p < probes.size(); ++p)
    for (std::size_t j = 0; j < times.size(); ++j, ++r) {
      const double na = probes[p].first;
      const double nb = probes[p].second;
      a(r, 0) = -times[j] * nb;
      a(r, 1) = -times[j] * na * nb;
      a(r, 1 + static_cast<Eigen::Index>(p)) = 1.0;
      y(r) = phase[p][j];
    }
  const Eigen::VectorXd x = a.colPivHouseholderQr().solve(y);
  fit.chi_stark = x(0);
  fit.chi_kerr = x(1);
  fit.residual_rms = std::sqrt((a * x - y).squaredNorm() / static_cast<double>(rows));
  return fit;
}

}  // namespace detail

/// Fits the Stark and cross-Kerr coefficients from probe phases accumulated up to
/// `t_probe` (0 picks a time giving ~0.3 rad of Kerr phase).
inline KerrReport extract_kerr(const TransmonSystem& sys, double t_probe = 0.0, double tol = 1e-10,
                               double max_residual = 1e-2) {
  sys.validate();
  KerrReport rep;
  const double ga2 = sys.g_a * sys.g_a;
  const double gb2 = sys.g_b * sys.g_b;
  rep.chi_stark_dispersive = -gb2 / sys.delta_b;
  rep.chi_kerr_fourth_order = -ga2 * gb2 / (sys.delta_a * sys.delta_b * sys.delta_b);
  rep.chi_kerr_reference =
      12.0 * ga2 * gb2 / (sys.delta_a * sys.delta_b) * (1.0 / sys.delta_b - 1.0 / sys.delta_a);
  rep.dispersive_warning = sys.dispersive_warning();
  if (t_probe <= 0.0) {
    t_probe = rep.chi_kerr_fourth_order != 0.0 ? 0.3 / std::abs(rep.chi_kerr_fourth_order)
                                              : 10.0 / std::max(std::abs(rep.chi_stark_dispersive), 1e-300);
  }
  rep.probe_time = t_probe;
  // Keep the fastest probe phase below ~1 rad between checkpoints for unwrapping.
  const double fastest = std::abs(rep.chi_stark_dispersive) + std::abs(rep.chi_kerr_fourth_order);
  rep.checkpoints = static_cast<int>(std::max(512.0, std::ceil(fastest * t_probe)));

  const detail::PhaseFit fit = detail::fit_probe_phases(sys, t_probe, rep.checkpoints, tol);
  rep.chi_stark = fit.chi_stark;
  rep.chi_kerr = fit.chi_kerr;
  rep.residual_rms = fit.residual_rms;
  rep.norm_drift = fit.norm_drift;
  rep.min_ground_population = fit.min_ground;
  rep.steps = fit.steps;
  if (rep.chi_kerr_reference != 0.0) rep.ratio_to_reference = rep.chi_kerr / rep.chi_kerr_reference;
  if (rep.residual_rms > max_residual)
    throw RegimeError("extract_kerr: phase fit residual above threshold; outside the dispersive regime");
  const detail::PhaseFit fine = detail::fit_probe_phases(sys, t_probe, rep.checkpoints, 0.5 * tol);
  rep.convergence_delta = std::abs(fine.chi_kerr - fit.chi_kerr);
  return rep;
}

}  // namespace mwtele
