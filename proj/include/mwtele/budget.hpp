#pragma once

// Closed-form noise budget of the teleportation link.

#include "mwtele/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

namespace mwtele {

/// Raised when a scenario leaves the regime where a model is valid.
class RegimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EprQuality {
  double delta_xi2 = 1.0;       // Var(x_A + x_B) = Var(p_A - p_B)
  double delta_xi_perp2 = 1.0;  // Var(x_A - x_B) = Var(p_A + p_B)

  GaussianState state() const { return epr_state(delta_xi2, delta_xi_perp2); }
};

/// Two identical JPAs squeezing orthogonal quadratures, combined on a hybrid ring.
inline EprQuality epr_quality(const JpaSpec& jpa, double splitter_loss_db = 0.0) {
  if (!(splitter_loss_db >= 0.0)) throw std::invalid_argument("epr_quality: splitter loss must be >= 0 dB");
  const double v = jpa.noise_variance();
  EprQuality q;
  q.delta_xi2 = 1.0 / jpa.g_p + 2.0 * jpa.s_p * v;
  q.delta_xi_perp2 = jpa.g_x + 2.0 * jpa.s_x * v;
  const double eta = db_to_transmissivity(splitter_loss_db);
  q.delta_xi2 = eta * q.delta_xi2 + (1.0 - eta);
  q.delta_xi_perp2 = eta * q.delta_xi_perp2 + (1.0 - eta);
  return q;
}

/// Same quantity computed by pushing two vacua through the Gaussian pipeline.
inline GaussianState epr_pipeline(const JpaSpec& jpa, double splitter_loss_db = 0.0) {
  JpaSpec squeeze_x = jpa;
  squeeze_x.amplified = Quadrature::P;
  JpaSpec squeeze_p = jpa;
  squeeze_p.amplified = Quadrature::X;
  GaussianState s = vacuum(2);
  s = apply_jpa(s, 0, squeeze_x);
  s = apply_jpa(s, 1, squeeze_p);
  return beam_splitter(s, 0, 1, 0.5, splitter_loss_db);
}

struct ChannelSpec {
  double distance_m = 0.0;
  double cable_loss_db_per_m = 0.0;
  double connector_loss_db = 0.0;
  double measurement_time_s = 0.0;
  double group_velocity_m_per_s = 2e8;
  double n_va = 0.0;
  double n_vb = 0.0;
  std::optional<double> eta_a_override;
  std::optional<double> eta_b_override;

  void validate() const {
    if (!(distance_m >= 0.0)) throw std::invalid_argument("channel: distance must be >= 0");
    if (!(cable_loss_db_per_m >= 0.0)) throw std::invalid_argument("channel: cable loss must be >= 0");
    if (!(connector_loss_db >= 0.0)) throw std::invalid_argument("channel: connector loss must be >= 0");
    if (!(measurement_time_s >= 0.0)) throw std::invalid_argument("channel: measurement time must be >= 0");
    if (!(group_velocity_m_per_s > 0.0)) throw std::invalid_argument("channel: group velocity must be > 0");
    if (!(n_va >= 0.0) || !(n_vb >= 0.0)) throw std::invalid_argument("channel: occupancies must be >= 0");
    for (const auto& e : {eta_a_override, eta_b_override})
      if (e && !(*e >= 0.0 && *e <= 1.0)) throw std::invalid_argument("channel: eta must be in [0,1]");
  }

  double delay_line_m() const { return measurement_time_s * group_velocity_m_per_s; }

  double eta_a() const {
    if (eta_a_override) return *eta_a_override;
    return db_to_transmissivity(cable_loss_db_per_m * distance_m + connector_loss_db);
  }

  /// Bob's path carries the delay line only when the feedforward is digitised.
  double eta_b(bool with_delay_line = true) const {
    if (eta_b_override) return *eta_b_override;
    const double length = distance_m + (with_delay_line ? delay_line_m() : 0.0);
    return db_to_transmissivity(cable_loss_db_per_m * length + connector_loss_db);
  }
};

inline double distributed_correlation(const EprQuality& epr, double eta_a, double eta_b, double n_va = 0.0,
                                      double n_vb = 0.0) {
  if (!(eta_a >= 0.0 && eta_a <= 1.0) || !(eta_b >= 0.0 && eta_b <= 1.0))
    throw std::invalid_argument("distributed_correlation: eta must be in [0,1]");
  const double sa = std::sqrt(eta_a);
  const double sb = std::sqrt(eta_b);
  return 0.25 * (sa + sb) * (sa + sb) * epr.delta_xi2 + 0.25 * (sa - sb) * (sa - sb) * epr.delta_xi_perp2 +
         (1.0 - eta_a) * (n_va + kVacuumVariance) + (1.0 - eta_b) * (n_vb + kVacuumVariance);
}

inline double distributed_correlation(const EprQuality& epr, const ChannelSpec& ch, bool with_delay_line = true) {
  return distributed_correlation(epr, ch.eta_a(), ch.eta_b(with_delay_line), ch.n_va, ch.n_vb);
}

struct AttenuationResult {
  double attenuation = 1.0;          // factor applied to the stronger path
  bool on_alice = true;              // which path is attenuated
  double delta_xi_prime2 = 0.0;      // after attenuation
  double delta_xi_prime2_plain = 0.0;  // without attenuation
};

/// Condition under which attenuating the stronger path lowers the correlation variance.
inline bool attenuation_helps(const EprQuality& epr, double eta_strong, double eta_weak, double n_strong) {
  if (!(eta_strong > 0.0)) return false;
  const double lhs = std::sqrt(eta_weak / eta_strong);
  const double num = 0.25 * (epr.delta_xi2 + epr.delta_xi_perp2) - (n_strong + kVacuumVariance);
  const double den = 0.25 * (epr.delta_xi_perp2 - epr.delta_xi2);
  if (den <= 0.0) return num > 0.0;
  return lhs < num / den;
}

/// Minimise the correlation variance over an attenuator t in [0,1] placed on the stronger path.
inline AttenuationResult optimize_attenuation(const EprQuality& epr, double eta_a, double eta_b, double n_va = 0.0,
                                              double n_vb = 0.0) {
  AttenuationResult r;
  r.delta_xi_prime2_plain = distributed_correlation(epr, eta_a, eta_b, n_va, n_vb);
  r.delta_xi_prime2 = r.delta_xi_prime2_plain;
  r.on_alice = eta_a >= eta_b;
  const double eta_s = r.on_alice ? eta_a : eta_b;
  const double eta_w = r.on_alice ? eta_b : eta_a;
  const double n_s = r.on_alice ? n_va : n_vb;
  const double n_w = r.on_alice ? n_vb : n_va;
  if (eta_s <= 0.0 || eta_s == eta_w) return r;

  // In u = sqrt(eta_s) the variance is c2 u^2 + c1 u + const.
  const double v = std::sqrt(eta_w);
  const double c2 = 0.25 * (epr.delta_xi2 + epr.delta_xi_perp2) - (n_s + kVacuumVariance);
  const double c1 = 0.5 * v * (epr.delta_xi2 - epr.delta_xi_perp2);
  const double u_max = std::sqrt(eta_s);
  auto f = [&](double u) { return distributed_correlation(epr, u * u, eta_w, n_s, n_w); };

  double u_best = u_max;
  if (c2 > 0.0) {
    u_best = std::clamp(-c1 / (2.0 * c2), 0.0, u_max);
  } else if (f(0.0) < f(u_max)) {
    u_best = 0.0;
  }
  if (u_best >= u_max) return r;
  const double value = f(u_best);
  if (value < r.delta_xi_prime2_plain) {
    r.attenuation = std::min(1.0, (u_best * u_best) / eta_s);
    r.delta_xi_prime2 = value;
  }
  return r;
}

inline AttenuationResult optimize_attenuation(const EprQuality& epr, const ChannelSpec& ch,
                                              bool with_delay_line = true) {
  return optimize_attenuation(epr, ch.eta_a(), ch.eta_b(with_delay_line), ch.n_va, ch.n_vb);
}

struct MeasChainSpec {
  double alpha = 1.0;
  double beta = 1.0;
  double g_j = 1.0;
  double a_j = 0.0;
  double g_h = 1.0;
  double a_h = 0.0;
  double n_alpha = 0.0;
  double n_beta = 0.0;

  void validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0) || !(beta > 0.0 && beta <= 1.0))
      throw std::invalid_argument("chain: alpha and beta must be in (0,1]");
    if (!(g_j >= 1.0) || !(g_h >= 1.0)) throw std::invalid_argument("chain: gains must be >= 1");
    if (!(a_j >= 0.0) || !(a_h >= 0.0)) throw std::invalid_argument("chain: quadrature noises must be >= 0");
    if (!(n_alpha >= 0.0) || !(n_beta >= 0.0)) throw std::invalid_argument("chain: occupancies must be >= 0");
  }

  double a_alpha() const { return (1.0 - alpha) / alpha * (n_alpha + kVacuumVariance); }
  double a_beta() const { return (1.0 - beta) / beta * (n_beta + kVacuumVariance); }
};

/// Total quadrature noise referred to Bob's output for a digitised feedforward.
inline double total_measurement_noise(const MeasChainSpec& m) {
  return 2.0 * (m.a_alpha() + m.a_j / m.alpha + m.a_beta() / (m.alpha * m.g_j) +
                m.a_h / (m.alpha * m.beta * m.g_j));
}

struct XiFidelity {
  double xi = 0.0;
  double fidelity = 0.0;
};

inline XiFidelity xi_and_fidelity(double delta_xi_prime2, double a_total) {
  if (!(delta_xi_prime2 >= 0.0) || !(a_total >= 0.0))
    throw std::invalid_argument("xi_and_fidelity: inputs must be >= 0");
  const double s = 1.0 + delta_xi_prime2 + a_total;
  return {s * s, 1.0 / s};
}

/// Fidelity for asymmetric added variances on x and p.
inline double coherent_fidelity(double added_x, double added_p) {
  return 1.0 / std::sqrt((1.0 + added_x) * (1.0 + added_p));
}

struct AnalogFeedforward {
  double a_analog = 0.0;
  double tau_required = 1.0;
  double tau = 1.0;
  double coef_t = 1.0;  // weight of the target quadrature at Bob
  double coef_a = 1.0;  // weight of Alice's EPR quadrature
  double coef_b = 1.0;  // weight of Bob's EPR quadrature
};

/// Required coupler transmissivity so the feedforward enters Bob's mode with unit weight.
inline double analog_tau_required(const MeasChainSpec& m, double eta_att) {
  return 1.0 - 4.0 / (eta_att * m.alpha * m.beta * m.g_j * m.g_h);
}

/// Analog feedforward: the two amplified arms are recombined on a hybrid ring,
/// attenuated by eta_att (environment occupancy n_att) and injected into Bob's
/// mode through a directional coupler of transmissivity tau.
inline AnalogFeedforward analog_feedforward_noise(const MeasChainSpec& m, double eta_att, double n_att = 0.0,
                                                  std::optional<double> tau = std::nullopt) {
  m.validate();
  if (!(eta_att > 0.0 && eta_att <= 1.0)) throw std::invalid_argument("analog feedforward: eta_att must be in (0,1]");
  if (!(n_att >= 0.0)) throw std::invalid_argument("analog feedforward: attenuator occupancy must be >= 0");
  AnalogFeedforward r;
  r.tau_required = analog_tau_required(m, eta_att);
  if (!(r.tau_required > 0.0 && r.tau_required < 1.0))
    throw RegimeError("analog feedforward: required coupler transmissivity outside (0,1)");
  r.tau = tau.value_or(r.tau_required);
  if (!(r.tau > 0.0 && r.tau < 1.0)) throw std::invalid_argument("analog feedforward: tau must be in (0,1)");
  const double g_total = m.alpha * m.beta * m.g_j * m.g_h;
  const double kappa2 = (1.0 - r.tau) * eta_att * g_total / 4.0;
  const double kappa = std::sqrt(kappa2);
  r.coef_t = kappa * (1.0 + 1.0 / m.g_j);
  r.coef_a = kappa * (1.0 - 1.0 / m.g_j);
  r.coef_b = std::sqrt(r.tau);
  const double a = total_measurement_noise(m);
  r.a_analog = kappa2 * (2.0 * a - 2.0 * m.a_alpha() * (1.0 - 1.0 / (m.g_j * m.g_j))) +
               (1.0 - r.tau) * (1.0 - eta_att) * (n_att + kVacuumVariance);
  return r;
}

enum class FeedforwardMode { Digital, Analog };

struct FeedforwardSpec {
  FeedforwardMode mode = FeedforwardMode::Digital;
  double eta_att = 1.0;
  double n_att = 0.0;
  std::optional<double> tau;
};

/// EPR source given either by a JPA model or directly by its correlation variances.
struct EprSource {
  std::optional<JpaSpec> jpa;
  double splitter_loss_db = 0.0;
  double delta_xi2 = 1.0;
  double delta_xi_perp2 = 1.0;

  EprQuality quality() const {
    if (jpa) return epr_quality(*jpa, splitter_loss_db);
    if (splitter_loss_db == 0.0) return {delta_xi2, delta_xi_perp2};
    const double eta = db_to_transmissivity(splitter_loss_db);
    return {eta * delta_xi2 + 1.0 - eta, eta * delta_xi_perp2 + 1.0 - eta};
  }
};

struct ScenarioConfig {
  EprSource epr;
  ChannelSpec channel;
  MeasChainSpec chain;
  FeedforwardSpec feedforward;
  bool optimize_attenuation = true;
};

struct LinkBudget {
  EprQuality epr;
  double eta_a = 1.0;
  double eta_b = 1.0;
  double delta_xi_prime2 = 0.0;
  double delta_xi_prime2_plain = 0.0;
  double attenuation_applied = 1.0;
  bool attenuation_on_alice = true;
  double a_alpha = 0.0;
  double a_beta = 0.0;
  double a_total = 0.0;
  double xi = 0.0;
  double fidelity = 0.0;
  std::optional<double> a_j_max;  // empty means unfeasible
  FeedforwardMode mode = FeedforwardMode::Digital;
  std::optional<AnalogFeedforward> analog;

  bool quantum() const { return xi < 4.0; }
};

/// Correlation variance after distribution, optionally with the optimal attenuator.
inline AttenuationResult scenario_correlation(const ScenarioConfig& cfg) {
  cfg.channel.validate();
  const bool delay = cfg.feedforward.mode == FeedforwardMode::Digital;
  const EprQuality epr = cfg.epr.quality();
  if (cfg.optimize_attenuation) return optimize_attenuation(epr, cfg.channel, delay);
  AttenuationResult r;
  r.delta_xi_prime2 = r.delta_xi_prime2_plain = distributed_correlation(epr, cfg.channel, delay);
  return r;
}

/// Added noise as an affine function of A_J: returns (value at A_J = 0, slope).
inline std::pair<double, double> noise_affine_in_aj(const ScenarioConfig& cfg) {
  MeasChainSpec m0 = cfg.chain;
  m0.a_j = 0.0;
  MeasChainSpec m1 = cfg.chain;
  m1.a_j = 1.0;
  if (cfg.feedforward.mode == FeedforwardMode::Digital)
    return {total_measurement_noise(m0), total_measurement_noise(m1) - total_measurement_noise(m0)};
  const auto& ff = cfg.feedforward;
  const double f0 = analog_feedforward_noise(m0, ff.eta_att, ff.n_att, ff.tau).a_analog;
  const double f1 = analog_feedforward_noise(m1, ff.eta_att, ff.n_att, ff.tau).a_analog;
  return {f0, f1 - f0};
}

/// Largest A_J keeping Xi <= 4; empty when even A_J = 0 is not enough.
inline std::optional<double> solve_aj_max(double delta_xi_prime2, double noise_at_zero, double slope) {
  if (!(slope > 0.0)) throw std::invalid_argument("solve_aj_max: slope must be > 0");
  const double value = (1.0 - delta_xi_prime2 - noise_at_zero) / slope;
  if (value < 0.0) return std::nullopt;
  return value;
}

inline std::optional<double> solve_aj_max(const ScenarioConfig& cfg) {
  const auto [f0, slope] = noise_affine_in_aj(cfg);
  return solve_aj_max(scenario_correlation(cfg).delta_xi_prime2, f0, slope);
}

/// Bisection on Xi(A_J) = 4, used to cross-check the closed form.
inline std::optional<double> solve_aj_max_bisection(const ScenarioConfig& cfg, double tol = 1e-12) {
  const double dxi = scenario_correlation(cfg).delta_xi_prime2;
  auto xi_at = [&](double aj) {
    ScenarioConfig c = cfg;
    c.chain.a_j = aj;
    double a = 0.0;
    if (c.feedforward.mode == FeedforwardMode::Digital) {
      a = total_measurement_noise(c.chain);
    } else {
      a = analog_feedforward_noise(c.chain, c.feedforward.eta_att, c.feedforward.n_att, c.feedforward.tau).a_analog;
    }
    return xi_and_fidelity(dxi, a).xi;
  };
  if (xi_at(0.0) > 4.0) return std::nullopt;
  double lo = 0.0;
  double hi = 1.0;
  while (xi_at(hi) <= 4.0) hi *= 2.0;
  while (hi - lo > tol * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    (xi_at(mid) <= 4.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline LinkBudget scenario_budget(const ScenarioConfig& cfg) {
  cfg.chain.validate();
  LinkBudget b;
  b.mode = cfg.feedforward.mode;
  b.epr = cfg.epr.quality();
  const bool delay = cfg.feedforward.mode == FeedforwardMode::Digital;
  b.eta_a = cfg.channel.eta_a();
  b.eta_b = cfg.channel.eta_b(delay);
  const AttenuationResult att = scenario_correlation(cfg);
  b.delta_xi_prime2 = att.delta_xi_prime2;
  b.delta_xi_prime2_plain = att.delta_xi_prime2_plain;
  b.attenuation_applied = att.attenuation;
  b.attenuation_on_alice = att.on_alice;
  b.a_alpha = cfg.chain.a_alpha();
  b.a_beta = cfg.chain.a_beta();
  if (delay) {
    b.a_total = total_measurement_noise(cfg.chain);
  } else {
    const auto& ff = cfg.feedforward;
    b.analog = analog_feedforward_noise(cfg.chain, ff.eta_att, ff.n_att, ff.tau);
    b.a_total = b.analog->a_analog;
  }
  const auto xf = xi_and_fidelity(b.delta_xi_prime2, b.a_total);
  b.xi = xf.xi;
  b.fidelity = xf.fidelity;
  b.a_j_max = solve_aj_max(cfg);
  return b;
}

}  // namespace mwtele
