#pragma once

// Probabilistic noiseless amplification through a weak cross-Kerr measurement.

#include "mwtele/budget.hpp"
#include "mwtele/fock.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

namespace mwtele {

/// A_w = <p|n|alpha> / <p|alpha> for a coherent ancilla.
inline cplx weak_value(cplx alpha, double p) {
  const cplx i(0.0, 1.0);
  return alpha * alpha - i * std::sqrt(2.0) * alpha * p;
}

/// Leading-order outcome density |<p|alpha>|^2.
inline double success_density_leading(cplx alpha, double p) {
  const double d = p - std::sqrt(2.0) * alpha.imag();
  return std::exp(-d * d) / std::sqrt(std::numbers::pi);
}

/// Closed form <p|beta> for a coherent state.
inline cplx coherent_p_overlap(cplx beta, double p) {
  const cplx i(0.0, 1.0);
  return std::pow(std::numbers::pi, -0.25) *
         std::exp(-0.5 * p * p - i * std::sqrt(2.0) * beta * p + 0.5 * beta * beta - 0.5 * std::norm(beta));
}

struct WeakMeasSpec {
  cplx alpha{-1.0, 0.0};
  double p0 = 1.0;          // lower edge of the accepted window
  double window = 0.05;     // width; 0 selects the single outcome p0
  double kdt = 0.01;        // interaction strength k * dt
  int ancilla_dim = 48;
  int quadrature_nodes = 6;

  double p_mid() const { return p0 + 0.5 * window; }
  cplx weak_value_mid() const { return weak_value(alpha, p_mid()); }
  double gain() const { return std::exp(kdt * weak_value_mid().imag()); }

  void validate() const {
    if (!(window >= 0.0)) throw std::invalid_argument("weak measurement: window must be >= 0");
    if (!(kdt >= 0.0)) throw std::invalid_argument("weak measurement: kdt must be >= 0");
    if (ancilla_dim < 4) throw std::invalid_argument("weak measurement: ancilla_dim must be >= 4");
    if (quadrature_nodes < 1) throw std::invalid_argument("weak measurement: quadrature_nodes must be >= 1");
    const double tail = 1.0 - coherent_amplitudes(alpha, ancilla_dim).squaredNorm();
    if (tail > 1e-12) throw RegimeError("weak measurement: ancilla truncation too small for |alpha|");
    if (kdt * std::abs(weak_value_mid()) >= 0.1)
      throw RegimeError("weak measurement: k*dt*|A_w| must stay below 0.1");
  }
};

/// Gauss-Legendre nodes and weights on [a, b].
inline std::vector<std::pair<double, double>> gauss_legendre(int n, double a, double b) {
  std::vector<std::pair<double, double>> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 1; i <= n; ++i) {
    double x = std::cos(std::numbers::pi * (i - 0.25) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) {
        p1 = x;
        p0 = 1.0;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    out.emplace_back(0.5 * (a + b) + 0.5 * (b - a) * x, 0.5 * (b - a) * w);
  }
  return out;
}

/// f(n; p) = <p| e^{-i kdt n_anc n} |alpha> for n = 0..dim-1, with a truncated ancilla.
inline Eigen::VectorXcd kerr_conditional_factors(const WeakMeasSpec& spec, double p, int dim) {
  const Eigen::VectorXcd bra = quadrature_eigenvector(p, spec.ancilla_dim).conjugate();
  const Eigen::VectorXcd c = coherent_amplitudes(spec.alpha, spec.ancilla_dim);
  Eigen::VectorXcd f(dim);
  for (int n = 0; n < dim; ++n) {
    cplx acc = 0.0;
    for (int m = 0; m < spec.ancilla_dim; ++m)
      acc += bra(m) * c(m) * std::exp(cplx(0.0, -spec.kdt * m * n));
    f(n) = acc;
  }
  return f;
}

/// Probability that the ancilla outcome falls in [lo, hi] given Bob's photon distribution.
inline double window_probability(const WeakMeasSpec& spec, const Eigen::VectorXd& photon_dist, double lo, double hi,
                                 int panels = 64) {
  if (!(hi > lo)) return 0.0;
  const double limit = std::sqrt(2.0 * spec.ancilla_dim + 1.0);
  lo = std::max(lo, -limit);
  hi = std::min(hi, limit);
  if (!(hi > lo)) return 0.0;
  double total = 0.0;
  const double h = (hi - lo) / panels;
  for (int k = 0; k < panels; ++k)
    for (const auto& [p, w] : gauss_legendre(8, lo + k * h, lo + (k + 1) * h)) {
      const Eigen::VectorXcd f = kerr_conditional_factors(spec, p, static_cast<int>(photon_dist.size()));
      total += w * photon_dist.dot(f.cwiseAbs2());
    }
  return total;
}

struct WeakKerrResult {
  cplx weak_value;
  double g = 1.0;
  double success = 0.0;            // probability for a window, density for a point
  double success_leading = 0.0;    // leading-order prediction of the same quantity
  double fidelity = 1.0;           // to the ideal g^n output
  double approximation_error = 0.0;  // trace distance sqrt(1 - F) for the pure-state target
  double max_unnormalised_weight = 0.0;
  std::vector<double> weights;     // mixture weights of the conditional state (sum to 1)
  std::vector<FockState> components;  // normalised, known phase undone
};

/// Conditional state after the Kerr interaction and ancilla post-selection on `mode`.
/// If `visitor` is set, components are streamed to it instead of being stored.
inline WeakKerrResult weak_kerr_nla(const FockState& state, const WeakMeasSpec& spec, std::size_t mode,
                                    const std::function<void(const FockState&, double)>& visitor = {}) {
  spec.validate();
  const int dim = state.dims().at(mode);
  WeakKerrResult r;
  r.weak_value = spec.weak_value_mid();
  r.g = spec.gain();
  const double known_phase = spec.kdt * r.weak_value.real();
  const double n2 = state.norm2();
  const Eigen::VectorXd dist = occupation_distribution(state, mode) / n2;

  // Ideal target g^n |psi>, normalised.
  Eigen::VectorXd ideal(dim);
  for (int n = 0; n < dim; ++n) ideal(n) = std::pow(r.g, n);
  const double ideal_norm2 = dist.dot(ideal.cwiseAbs2());

  std::vector<std::pair<double, double>> nodes;
  if (spec.window > 0.0) {
    nodes = gauss_legendre(spec.quadrature_nodes, spec.p0, spec.p0 + spec.window);
  } else {
    nodes = {{spec.p0, 1.0}};
  }
  double total = 0.0;
  double overlap_sum = 0.0;
  std::vector<double> raw_weights;
  for (const auto& [p, w] : nodes) {
    Eigen::VectorXcd f = kerr_conditional_factors(spec, p, dim);
    for (int n = 0; n < dim; ++n) f(n) *= std::exp(cplx(0.0, known_phase * n));
    const double norm_p = dist.dot(f.cwiseAbs2());
    const cplx ov = (dist.array() * ideal.array()).matrix().cast<cplx>().dot(f);
    total += w * norm_p;
    overlap_sum += w * std::norm(ov) / ideal_norm2;
    r.max_unnormalised_weight = std::max(r.max_unnormalised_weight, w * norm_p);
    FockState comp = apply_diagonal(state, mode, [&f](int n) { return f(n); });
    comp.amps() /= std::sqrt(n2);
    if (visitor) {
      visitor(comp, w);
    } else {
      raw_weights.push_back(w * norm_p);
      r.components.push_back(comp.normalized());
    }
  }
  if (total < 1e-14) throw RegimeError("weak_kerr_nla: post-selected outcome has vanishing probability");
  r.success = total;
  if (spec.window > 0.0) {
    double lead = 0.0;
    for (const auto& [p, w] : gauss_legendre(spec.quadrature_nodes, spec.p0, spec.p0 + spec.window))
      lead += w * success_density_leading(spec.alpha, p);
    r.success_leading = lead;
  } else {
    r.success_leading = success_density_leading(spec.alpha, spec.p0);
  }
  r.fidelity = std::min(1.0, overlap_sum / total);
  r.approximation_error = std::sqrt(std::max(0.0, 1.0 - r.fidelity));
  for (double w : raw_weights) r.weights.push_back(w / total);
  return r;
}

/// Correlation figures of the (A, B) pair read off a 4x4 covariance over (xA, pA, xB, pB).
struct FockEpr {
  double dxi_x2 = 0.0;       // Var(xA + xB)
  double dxi_p2 = 0.0;       // Var(pA - pB)
  double dxi_perp_x2 = 0.0;  // Var(xA - xB)
  double dxi_perp_p2 = 0.0;  // Var(pA + pB)
  double duan = 0.0;         // dxi_x2 + dxi_p2; below 2 certifies entanglement
  double dxi_opt2 = 0.0;     // mean of the two after the best single-path attenuator
  double attenuation = 1.0;
  bool attenuate_alice = true;
};

inline FockEpr fock_epr(const Eigen::MatrixXd& cov) {
  auto var = [&](double a0, double a1, double b0, double b1) {
    Eigen::Vector4d w(a0, a1, b0, b1);
    return w.dot(cov * w);
  };
  FockEpr e;
  e.dxi_x2 = var(1, 0, 1, 0);
  e.dxi_p2 = var(0, 1, 0, -1);
  e.dxi_perp_x2 = var(1, 0, -1, 0);
  e.dxi_perp_p2 = var(0, 1, 0, 1);
  e.duan = e.dxi_x2 + e.dxi_p2;

  // Attenuator t on one path adds (1 - t)/2 of vacuum per quadrature.
  auto attenuated = [&](double t, bool alice) {
    const double s = std::sqrt(t);
    const double ka = alice ? s : 1.0;
    const double kb = alice ? 1.0 : s;
    return 0.5 * (var(ka, 0, kb, 0) + var(0, ka, 0, -kb)) + (1.0 - t) * kVacuumVariance;
  };
  e.dxi_opt2 = attenuated(1.0, true);
  for (bool alice : {true, false}) {
    // Quadratic in sqrt(t); evaluate the stationary point and the endpoints.
    const double f0 = attenuated(0.0, alice);
    const double f1 = attenuated(1.0, alice);
    const double fh = attenuated(0.25, alice);
    const double c2 = 2.0 * (f1 + f0 - 2.0 * fh);
    const double c1 = f1 - f0 - c2;
    std::vector<double> cands{0.0, 1.0};
    if (c2 > 0.0) cands.push_back(std::clamp(-c1 / (2.0 * c2), 0.0, 1.0));
    for (double u : cands) {
      const double v = attenuated(u * u, alice);
      if (v < e.dxi_opt2 - 1e-15) {
        e.dxi_opt2 = v;
        e.attenuation = u * u;
        e.attenuate_alice = alice;
      }
    }
  }
  return e;
}

struct RepeaterSpec {
  double lambda = 0.5;
  double eta_a = 1.0;
  double eta_b = 0.8;
  double g_ideal = 1.2;
  WeakMeasSpec ancilla;
  int dim = 30;
  double measurement_noise = 0.0;  // A entering the teleportation fidelity
};

struct RepeaterReport {
  int dim = 0;
  FockEpr before;
  FockEpr after_ideal;
  NlaEffective effective;
  FockEpr effective_direct;
  double ideal_success_weight = 0.0;
  FockEpr after_weak;
  FockEpr weak_failure;
  WeakKerrResult weak;
  double fidelity_before = 0.0;
  double fidelity_conditioned = 0.0;
  double fidelity_averaged = 0.0;
  double leakage = 0.0;
};

inline double repeater_fidelity(const FockEpr& e, double noise) {
  return xi_and_fidelity(std::max(0.0, e.dxi_opt2), noise).fidelity;
}

inline RepeaterReport repeater_gain_report(const RepeaterSpec& spec) {
  if (spec.dim < 2) throw std::invalid_argument("repeater: dim must be >= 2");
  RepeaterReport r;
  r.dim = spec.dim;
  const FockState input = lossy_tmss(spec.lambda, spec.eta_a, spec.eta_b, spec.dim);
  r.leakage = input.leakage();
  const std::vector<std::size_t> ab{0, 1};
  r.before = fock_epr(quadrature_covariance(input, ab));

  const NlaResult ideal = nla_gn(input, 1, spec.g_ideal);
  r.ideal_success_weight = ideal.success_weight;
  r.after_ideal = fock_epr(quadrature_covariance(ideal.state, ab));
  r.effective = nla_effective_parameters(spec.lambda, spec.eta_b, spec.g_ideal);
  r.effective_direct =
      fock_epr(quadrature_covariance(lossy_tmss(r.effective.lambda, spec.eta_a, r.effective.eta_b, spec.dim), ab));

  MomentAccumulator success(ab);
  r.weak = weak_kerr_nla(input, spec.ancilla, 1, [&](const FockState& s, double w) { success.add(s, w * s.norm2()); });
  r.after_weak = fock_epr(success.covariance());

  // Failure branch: everything outside the window, from the unconditioned (dephased) state.
  MomentAccumulator all(ab);
  const Eigen::VectorXcd c = coherent_amplitudes(spec.ancilla.alpha, spec.ancilla.ancilla_dim);
  for (int m = 0; m < spec.ancilla.ancilla_dim; ++m) {
    const double pm = std::norm(c(m));
    if (pm < 1e-16) continue;
    const double phase = spec.ancilla.kdt * m;
    all.add(apply_diagonal(input, 1, [phase](int n) { return std::exp(cplx(0.0, -phase * n)); }), pm);
  }
  const double ps = r.weak.success;
  const double pf = all.weight() - ps;
  if (pf > 1e-12) {
    const Eigen::VectorXd mu = (all.first() - success.first()) / pf;
    const Eigen::MatrixXd cov = (all.second() - success.second()) / pf - mu * mu.transpose();
    r.weak_failure = fock_epr(cov);
  } else {
    r.weak_failure = r.after_weak;
  }
  r.fidelity_before = repeater_fidelity(r.before, spec.measurement_noise);
  r.fidelity_conditioned = repeater_fidelity(r.after_weak, spec.measurement_noise);
  r.fidelity_averaged = ps * r.fidelity_conditioned + (1.0 - ps) * repeater_fidelity(r.weak_failure, spec.measurement_noise);
  return r;
}

}  // namespace mwtele
