#pragma once

// Scenario files: JSON parsing with strict validation, report builders and sweeps.

#include "mwtele/budget.hpp"
#include "mwtele/kerr.hpp"
#include "mwtele/repeater.hpp"
#include "mwtele/teleport.hpp"

#include <json.hpp>

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <exception>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace mwtele {

inline constexpr int kSchemaVersion = 1;

using json = nlohmann::json;

/// Invalid configuration; `path` is a JSON pointer to the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& message)
      : std::runtime_error((path.empty() ? std::string("/") : path) + ": " + message), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

struct SweepAxis {
  std::string path;  // dotted, e.g. "channel.distance_m"
  std::vector<double> values;
};

struct TeleportOptions {
  std::size_t runs = 10000;
  cplx input_alpha{0.0, 0.0};
};

struct KerrOptions {
  TransmonSystem system;
  double probe_time = 0.0;  // 0 picks one automatically
  double tol = 1e-10;
  double max_residual = 1e-2;
};

struct FockOptions {
  int truncation = 30;
  int rerun_delta = 10;
};

struct FileConfig {
  std::uint64_t seed = 0;
  ScenarioConfig scenario;
  std::vector<SweepAxis> sweep;
  TeleportOptions teleport;
  RepeaterSpec repeater;
  FockOptions fock;
  KerrOptions kerr;
  json raw;
};

namespace detail {

inline std::string pointer_join(const std::string& base, const std::string& key) {
  std::string escaped;
  for (char c : key) {
    if (c == '~') escaped += "~0";
    else if (c == '/') escaped += "~1";
    else escaped += c;
  }
  return base + "/" + escaped;
}

/// Reads an object, remembering which keys were consumed so leftovers can be rejected.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(&j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(path_, "expected an object");
  }

  const std::string& path() const { return path_; }
  bool has(const std::string& key) const { return j_->contains(key); }
  std::string at(const std::string& key) const { return pointer_join(path_, key); }

  double number(const std::string& key, double def, double lo = -HUGE_VAL, double hi = HUGE_VAL) {
    const auto v = optional_number(key, lo, hi);
    return v ? *v : def;
  }

  std::optional<double> optional_number(const std::string& key, double lo = -HUGE_VAL, double hi = HUGE_VAL) {
    if (!take(key)) return std::nullopt;
    const json& v = (*j_)[key];
    if (!v.is_number()) throw ConfigError(at(key), "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(at(key), "must be finite");
    if (x < lo || x > hi) throw ConfigError(at(key), "must be in [" + fmt(lo) + ", " + fmt(hi) + "]");
    return x;
  }

  double required_number(const std::string& key, double lo = -HUGE_VAL, double hi = HUGE_VAL) {
    const auto v = optional_number(key, lo, hi);
    if (!v) throw ConfigError(at(key), "required key missing");
    return *v;
  }

  std::int64_t integer(const std::string& key, std::int64_t def, std::int64_t lo, std::int64_t hi) {
    if (!take(key)) return def;
    const json& v = (*j_)[key];
    if (!v.is_number_integer()) throw ConfigError(at(key), "expected an integer");
    std::int64_t x = 0;
    if (v.is_number_unsigned()) {
      const auto u = v.get<std::uint64_t>();
      if (u > static_cast<std::uint64_t>(hi)) throw ConfigError(at(key), "out of range");
      x = static_cast<std::int64_t>(u);
    } else {
      x = v.get<std::int64_t>();
    }
    if (x < lo || x > hi) throw ConfigError(at(key), "must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return x;
  }

  bool boolean(const std::string& key, bool def) {
    if (!take(key)) return def;
    const json& v = (*j_)[key];
    if (!v.is_boolean()) throw ConfigError(at(key), "expected true or false");
    return v.get<bool>();
  }

  std::string choice(const std::string& key, const std::string& def, const std::vector<std::string>& allowed) {
    if (!take(key)) return def;
    const json& v = (*j_)[key];
    if (!v.is_string()) throw ConfigError(at(key), "expected a string");
    const auto s = v.get<std::string>();
    for (const auto& a : allowed)
      if (s == a) return s;
    std::string list;
    for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
    throw ConfigError(at(key), "must be one of: " + list);
  }

  cplx complex(const std::string& key, cplx def) {
    if (!take(key)) return def;
    const json& v = (*j_)[key];
    if (v.is_number()) return {v.get<double>(), 0.0};
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
      throw ConfigError(at(key), "expected a number or [re, im]");
    return {v[0].get<double>(), v[1].get<double>()};
  }

  std::optional<Reader> object(const std::string& key) {
    if (!take(key)) return std::nullopt;
    return Reader((*j_)[key], at(key));
  }

  const json& raw(const std::string& key) {
    take(key);
    return (*j_)[key];
  }

  void finish() const {
    for (auto it = j_->begin(); it != j_->end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(at(it.key()), "unknown key");
  }

 private:
  bool take(const std::string& key) {
    seen_.insert(key);
    return j_->contains(key);
  }

  static std::string fmt(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os << x;
    return os.str();
  }

  const json* j_;
  std::string path_;
  std::set<std::string> seen_;
};

/// Runs a validator and reports its failure against `path`.
template <class F>
void checked(const std::string& path, F&& f) {
  try {
    f();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  } catch (const std::domain_error& e) {
    throw ConfigError(path, e.what());
  }
}

inline EprSource parse_epr(Reader r) {
  EprSource e;
  e.splitter_loss_db = r.number("splitter_loss_db", 0.0, 0.0);
  const bool has_jpa = r.has("jpa");
  const bool has_direct = r.has("delta_xi2");
  if (has_jpa == has_direct) throw ConfigError(r.path(), "give exactly one of 'jpa' or 'delta_xi2'");
  if (has_jpa) {
    Reader j = *r.object("jpa");
    const double n_env = j.number("n_env", 0.0, 0.0);
    const int forms = int(j.has("sigma_s2")) + int(j.has("chi")) + int(j.has("g_x"));
    if (forms != 1) throw ConfigError(j.path(), "give exactly one of 'sigma_s2', 'chi' (with k, gamma) or 'g_x' (with g_p, s_x, s_p)");
    checked(j.path(), [&] {
      if (j.has("sigma_s2")) {
        e.jpa = JpaSpec::from_squeezed_variance(j.required_number("sigma_s2", 0.0, kVacuumVariance));
      } else if (j.has("chi")) {
        const double chi = j.required_number("chi", 0.0);
        const double k = j.required_number("k", 0.0);
        const double gamma = j.number("gamma", 0.0, 0.0);
        e.jpa = JpaSpec::from_physical(chi, k, gamma, n_env);
        if (!(e.jpa->g_x >= 1.0 && e.jpa->g_p >= 1.0))
          throw std::invalid_argument("parameters do not describe an amplifier (needs 2 chi > k + gamma and gains >= 1)");
      } else {
        JpaSpec s;
        s.g_x = j.required_number("g_x", 1.0);
        s.g_p = j.required_number("g_p", 1.0);
        s.s_x = j.number("s_x", 0.0, 0.0);
        s.s_p = j.number("s_p", 0.0, 0.0);
        s.n_env = n_env;
        e.jpa = s;
      }
    });
    j.finish();
  } else {
    e.delta_xi2 = r.required_number("delta_xi2", 0.0);
    if (e.delta_xi2 <= 0.0) throw ConfigError(r.at("delta_xi2"), "must be > 0");
    e.delta_xi_perp2 = r.number("delta_xi_perp2", 1.0 / e.delta_xi2, 0.0);
    if (e.delta_xi2 * e.delta_xi_perp2 < 1.0 - 1e-12)
      throw ConfigError(r.path(), "delta_xi2 * delta_xi_perp2 must be >= 1");
  }
  r.finish();
  return e;
}

inline ChannelSpec parse_channel(Reader r, bool& optimize) {
  ChannelSpec c;
  c.distance_m = r.number("distance_m", c.distance_m, 0.0);
  c.cable_loss_db_per_m = r.number("cable_loss_db_per_m", c.cable_loss_db_per_m, 0.0);
  c.connector_loss_db = r.number("connector_loss_db", c.connector_loss_db, 0.0);
  c.measurement_time_s = r.number("measurement_time_s", c.measurement_time_s, 0.0);
  c.group_velocity_m_per_s = r.number("group_velocity_m_per_s", c.group_velocity_m_per_s, 0.0);
  if (c.group_velocity_m_per_s <= 0.0) throw ConfigError(r.at("group_velocity_m_per_s"), "must be > 0");
  c.n_va = r.number("n_va", 0.0, 0.0);
  c.n_vb = r.number("n_vb", 0.0, 0.0);
  c.eta_a_override = r.optional_number("eta_a", 0.0, 1.0);
  c.eta_b_override = r.optional_number("eta_b", 0.0, 1.0);
  optimize = r.boolean("optimize_attenuation", true);
  r.finish();
  checked(r.path(), [&] { c.validate(); });
  return c;
}

inline MeasChainSpec parse_chain(Reader r) {
  MeasChainSpec m;
  m.alpha = r.number("alpha", m.alpha, 0.0, 1.0);
  m.beta = r.number("beta", m.beta, 0.0, 1.0);
  m.g_j = r.number("g_j", m.g_j, 1.0);
  m.a_j = r.number("a_j", m.a_j, 0.0);
  m.g_h = r.number("g_h", m.g_h, 1.0);
  m.a_h = r.number("a_h", m.a_h, 0.0);
  m.n_alpha = r.number("n_alpha", m.n_alpha, 0.0);
  m.n_beta = r.number("n_beta", m.n_beta, 0.0);
  r.finish();
  checked(r.path(), [&] { m.validate(); });
  return m;
}

inline FeedforwardSpec parse_feedforward(Reader r) {
  FeedforwardSpec f;
  f.mode = r.choice("mode", "digital", {"digital", "analog"}) == "analog" ? FeedforwardMode::Analog
                                                                         : FeedforwardMode::Digital;
  f.eta_att = r.number("eta_att", 1.0, 0.0, 1.0);
  if (f.eta_att <= 0.0) throw ConfigError(r.at("eta_att"), "must be > 0");
  f.n_att = r.number("n_att", 0.0, 0.0);
  f.tau = r.optional_number("tau", 0.0, 1.0);
  if (f.tau && (*f.tau <= 0.0 || *f.tau >= 1.0)) throw ConfigError(r.at("tau"), "must be in (0, 1)");
  r.finish();
  return f;
}

inline std::vector<SweepAxis> parse_sweep(Reader r) {
  std::vector<SweepAxis> axes;
  const json& list = r.raw("axes");
  const std::string list_path = r.at("axes");
  if (!list.is_array() || list.empty()) throw ConfigError(list_path, "expected a non-empty array");
  if (list.size() > 2) throw ConfigError(list_path, "at most 2 sweep axes are supported");
  for (std::size_t i = 0; i < list.size(); ++i) {
    Reader a(list[i], list_path + "/" + std::to_string(i));
    SweepAxis ax;
    const json& p = a.raw("path");
    if (!p.is_string() || p.get<std::string>().empty()) throw ConfigError(a.at("path"), "expected a dotted parameter path");
    ax.path = p.get<std::string>();
    if (a.has("values")) {
      if (a.has("start") || a.has("stop") || a.has("steps"))
        throw ConfigError(a.path(), "give either 'values' or 'start'/'stop'/'steps'");
      const json& v = a.raw("values");
      if (!v.is_array() || v.empty()) throw ConfigError(a.at("values"), "expected a non-empty array of numbers");
      for (const auto& x : v) {
        if (!x.is_number()) throw ConfigError(a.at("values"), "expected numbers");
        ax.values.push_back(x.get<double>());
      }
    } else {
      const double start = a.required_number("start");
      const double stop = a.required_number("stop");
      const auto steps = a.integer("steps", 11, 1, 1'000'000);
      for (std::int64_t k = 0; k < steps; ++k)
        ax.values.push_back(steps == 1 ? start : start + (stop - start) * double(k) / double(steps - 1));
    }
    a.finish();
    axes.push_back(std::move(ax));
  }
  r.finish();
  return axes;
}

inline WeakMeasSpec parse_ancilla(Reader r) {
  WeakMeasSpec w;
  w.alpha = r.complex("alpha", w.alpha);
  w.p0 = r.number("p0", w.p0);
  w.window = r.number("window", w.window, 0.0);
  w.kdt = r.number("kdt", w.kdt, 0.0);
  w.ancilla_dim = static_cast<int>(r.integer("ancilla_dim", w.ancilla_dim, 2, 400));
  w.quadrature_nodes = static_cast<int>(r.integer("quadrature_nodes", w.quadrature_nodes, 1, 64));
  r.finish();
  return w;
}

inline RepeaterSpec parse_repeater(Reader r) {
  RepeaterSpec s;
  s.lambda = r.number("lambda", s.lambda, 0.0, 1.0);
  if (s.lambda >= 1.0) throw ConfigError(r.at("lambda"), "must be < 1");
  s.eta_a = r.number("eta_a", s.eta_a, 0.0, 1.0);
  s.eta_b = r.number("eta_b", s.eta_b, 0.0, 1.0);
  s.g_ideal = r.number("g", s.g_ideal, 1.0);
  s.measurement_noise = r.number("measurement_noise", s.measurement_noise, 0.0);
  if (auto a = r.object("ancilla")) s.ancilla = parse_ancilla(*a);
  r.finish();
  return s;
}

inline KerrOptions parse_kerr(Reader r) {
  KerrOptions k;
  auto& s = k.system;
  s.delta_a = r.number("delta_a", s.delta_a);
  s.delta_b = r.number("delta_b", s.delta_b);
  s.g_a = r.number("g_a", s.g_a, 0.0);
  s.g_b = r.number("g_b", s.g_b, 0.0);
  s.n_a = static_cast<int>(r.integer("n_a", s.n_a, 2, 64));
  s.n_b = static_cast<int>(r.integer("n_b", s.n_b, 2, 64));
  k.probe_time = r.number("probe_time", 0.0, 0.0);
  k.tol = r.number("tol", k.tol, 1e-15, 1e-3);
  k.max_residual = r.number("max_residual", k.max_residual, 0.0);
  if (auto lab = r.object("lab")) {
    if (r.has("delta_a") || r.has("delta_b")) throw ConfigError(lab->path(), "give either 'lab' or 'delta_a'/'delta_b'");
    const double wa = lab->required_number("omega_a");
    const double wb = lab->required_number("omega_b");
    const double w1 = lab->required_number("omega_1");
    const double w2 = lab->required_number("omega_2");
    lab->finish();
    std::tie(s.delta_a, s.delta_b) = detunings_from_lab(wa, wb, w1, w2);
  }
  r.finish();
  checked(r.path(), [&] { s.validate(); });
  return k;
}

inline FockOptions parse_fock(Reader r) {
  FockOptions f;
  f.truncation = static_cast<int>(r.integer("truncation", f.truncation, 2, 200));
  f.rerun_delta = static_cast<int>(r.integer("rerun_delta", f.rerun_delta, 0, 100));
  r.finish();
  return f;
}

}  // namespace detail

/// Validates a parsed JSON document and builds the configuration.
inline FileConfig parse_config(const json& j) {
  detail::Reader root(j, "");
  FileConfig c;
  c.raw = j;
  const auto version = root.integer("schema_version", -1, -1, 1'000'000);
  if (version == -1) throw ConfigError("/schema_version", "required key missing");
  if (version != kSchemaVersion)
    throw ConfigError("/schema_version", "unsupported version " + std::to_string(version) + " (expected " +
                                             std::to_string(kSchemaVersion) + ")");
  if (root.has("seed")) {
    const json& s = root.raw("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0))
      throw ConfigError("/seed", "expected a non-negative integer");
    c.seed = s.get<std::uint64_t>();
  }
  if (auto r = root.object("epr")) {
    c.scenario.epr = detail::parse_epr(*r);
  } else {
    throw ConfigError("/epr", "required section missing");
  }
  if (auto r = root.object("channel")) c.scenario.channel = detail::parse_channel(*r, c.scenario.optimize_attenuation);
  if (auto r = root.object("chain")) c.scenario.chain = detail::parse_chain(*r);
  if (auto r = root.object("feedforward")) c.scenario.feedforward = detail::parse_feedforward(*r);
  if (auto r = root.object("sweep")) c.sweep = detail::parse_sweep(*r);
  if (auto r = root.object("teleport")) {
    c.teleport.runs = static_cast<std::size_t>(r->integer("runs", 10000, 1, 100'000'000));
    c.teleport.input_alpha = r->complex("input_alpha", {0.0, 0.0});
    r->finish();
  }
  if (auto r = root.object("repeater")) c.repeater = detail::parse_repeater(*r);
  if (auto r = root.object("fock")) c.fock = detail::parse_fock(*r);
  c.repeater.dim = c.fock.truncation;
  if (auto r = root.object("kerr")) c.kerr = detail::parse_kerr(*r);
  root.finish();
  return c;
}

inline FileConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("malformed JSON: ") + e.what());
  }
  return parse_config(j);
}

inline FileConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", "cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

/// 64-bit FNV-1a over the canonical serialisation (sorted keys, shortest round-trip numbers).
inline std::string config_hash(const json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static const char* hex = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = hex[h & 0xf];
  return out;
}

/// Sets a dotted path inside a JSON document, creating intermediate objects.
inline void set_path(json& j, const std::string& dotted, const json& value) {
  json* cur = &j;
  std::size_t start = 0;
  for (;;) {
    const std::size_t dot = dotted.find('.', start);
    const std::string key = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("/sweep", "malformed parameter path '" + dotted + "'");
    if (!cur->is_object()) throw ConfigError("/sweep", "parameter path '" + dotted + "' does not name an object member");
    if (dot == std::string::npos) {
      (*cur)[key] = value;
      return;
    }
    cur = &(*cur)[key];
    if (cur->is_null()) *cur = json::object();
    start = dot + 1;
  }
}

// ---------------------------------------------------------------- reports

inline json to_json(const EprQuality& e) { return {{"delta_xi2", e.delta_xi2}, {"delta_xi_perp2", e.delta_xi_perp2}}; }

inline json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline json to_json(const LinkBudget& b) {
  json j = {{"epr", to_json(b.epr)},
            {"eta_a", b.eta_a},
            {"eta_b", b.eta_b},
            {"delta_xi_prime2", b.delta_xi_prime2},
            {"delta_xi_prime2_unattenuated", b.delta_xi_prime2_plain},
            {"attenuation", b.attenuation_applied},
            {"attenuated_path", b.attenuation_on_alice ? "alice" : "bob"},
            {"a_alpha", b.a_alpha},
            {"a_beta", b.a_beta},
            {"a_total", b.a_total},
            {"xi", b.xi},
            {"fidelity", b.fidelity},
            {"quantum", b.quantum()},
            {"classical_correlation", b.delta_xi_prime2 >= 1.0},
            {"a_j_max", optional_number(b.a_j_max)},
            {"feasible", b.a_j_max.has_value()},
            {"feedforward", b.mode == FeedforwardMode::Digital ? "digital" : "analog"}};
  if (b.analog) {
    j["analog"] = {{"a_analog", b.analog->a_analog},
                   {"tau_required", b.analog->tau_required},
                   {"tau", b.analog->tau},
                   {"one_minus_tau", 1.0 - b.analog->tau}};
  }
  return j;
}

inline json envelope(const std::string& command, const FileConfig& cfg, std::uint64_t seed, json result) {
  return {{"schema_version", kSchemaVersion},
          {"command", command},
          {"config_hash", config_hash(cfg.raw)},
          {"seed", seed},
          {"result", std::move(result)}};
}

inline json to_json(const FockEpr& e) {
  return {{"delta_xi_x2", e.dxi_x2},          {"delta_xi_p2", e.dxi_p2},
          {"delta_xi_perp_x2", e.dxi_perp_x2}, {"delta_xi_perp_p2", e.dxi_perp_p2},
          {"duan", e.duan},                    {"entangled", e.duan < 2.0},
          {"delta_xi_prime2", e.dxi_opt2},     {"attenuation", e.attenuation},
          {"attenuated_path", e.attenuate_alice ? "alice" : "bob"}};
}

inline json to_json(const RepeaterReport& r) {
  json weak = {{"weak_value", {r.weak.weak_value.real(), r.weak.weak_value.imag()}},
               {"g", r.weak.g},
               {"success_probability", r.weak.success},
               {"success_probability_leading", r.weak.success_leading},
               {"fidelity_to_ideal", r.weak.fidelity},
               {"approximation_error", r.weak.approximation_error},
               {"max_unnormalised_weight", r.weak.max_unnormalised_weight}};
  return {{"truncation", r.dim},
          {"leakage", r.leakage},
          {"before", to_json(r.before)},
          {"after_ideal", to_json(r.after_ideal)},
          {"ideal_success_weight", r.ideal_success_weight},
          {"effective", {{"lambda", r.effective.lambda}, {"eta_b", r.effective.eta_b}}},
          {"effective_direct", to_json(r.effective_direct)},
          {"after_weak", to_json(r.after_weak)},
          {"weak_failure", to_json(r.weak_failure)},
          {"weak", std::move(weak)},
          {"fidelity_before", r.fidelity_before},
          {"fidelity_conditioned", r.fidelity_conditioned},
          {"fidelity_averaged", r.fidelity_averaged}};
}

/// Repeater report at the configured truncation and a coarse convergence check at a larger one.
inline json repeater_json(const FileConfig& cfg) {
  RepeaterSpec spec = cfg.repeater;
  spec.dim = cfg.fock.truncation;
  const RepeaterReport base = repeater_gain_report(spec);
  json j = to_json(base);
  if (cfg.fock.rerun_delta > 0) {
    spec.dim = cfg.fock.truncation + cfg.fock.rerun_delta;
    const RepeaterReport fine = repeater_gain_report(spec);
    j["rerun"] = {
        {"truncation", fine.dim},
        {"delta_before", std::abs(fine.before.dxi_opt2 - base.before.dxi_opt2)},
        {"delta_after_ideal", std::abs(fine.after_ideal.dxi_opt2 - base.after_ideal.dxi_opt2)},
        {"delta_after_weak", std::abs(fine.after_weak.dxi_opt2 - base.after_weak.dxi_opt2)},
        {"delta_success_probability", std::abs(fine.weak.success - base.weak.success)},
        {"delta_fidelity_conditioned", std::abs(fine.fidelity_conditioned - base.fidelity_conditioned)},
    };
  }
  return j;
}

inline json to_json(const KerrReport& k) {
  return {{"chi_stark", k.chi_stark},
          {"chi_stark_dispersive", k.chi_stark_dispersive},
          {"chi_kerr", k.chi_kerr},
          {"chi_kerr_fourth_order", k.chi_kerr_fourth_order},
          {"chi_kerr_reference", k.chi_kerr_reference},
          {"ratio_to_reference", k.ratio_to_reference},
          {"residual_rms_rad", k.residual_rms},
          {"probe_time", k.probe_time},
          {"checkpoints", k.checkpoints},
          {"norm_drift", k.norm_drift},
          {"min_ground_population", k.min_ground_population},
          {"convergence_delta", k.convergence_delta},
          {"dispersive_warning", k.dispersive_warning},
          {"steps", k.steps}};
}

/// Base extraction plus runs with each coupling doubled, giving the scaling exponents.
inline json kerr_validation_json(const KerrOptions& opt) {
  const KerrReport base = extract_kerr(opt.system, opt.probe_time, opt.tol, opt.max_residual);
  json j = to_json(base);
  TransmonSystem sa = opt.system;
  sa.g_a *= 2.0;
  TransmonSystem sb = opt.system;
  sb.g_b *= 2.0;
  if (opt.system.g_a > 0.0 && opt.system.g_b > 0.0) {
    const KerrReport ra = extract_kerr(sa, 0.0, opt.tol, opt.max_residual);
    const KerrReport rb = extract_kerr(sb, 0.0, opt.tol, opt.max_residual);
    const double qa = ra.chi_kerr / base.chi_kerr;
    const double qb = rb.chi_kerr / base.chi_kerr;
    j["scaling"] = {{"g_a_doubled_ratio", qa},
                    {"g_b_doubled_ratio", qb},
                    {"exponent_g_a", std::log2(std::abs(qa))},
                    {"exponent_g_b", std::log2(std::abs(qb))}};
  }
  return j;
}

// ---------------------------------------------------------------- sweeps

struct SweepRow {
  std::vector<double> axis_values;
  LinkBudget budget;
};

/// Grid points in row-major order over the axes (last axis fastest).
inline std::vector<std::vector<double>> sweep_grid(const std::vector<SweepAxis>& axes) {
  std::vector<std::vector<double>> grid{{}};
  for (const auto& ax : axes) {
    std::vector<std::vector<double>> next;
    next.reserve(grid.size() * ax.values.size());
    for (const auto& g : grid)
      for (double v : ax.values) {
        auto p = g;
        p.push_back(v);
        next.push_back(std::move(p));
      }
    grid = std::move(next);
  }
  return grid;
}

/// Evaluates the budget on every grid point; results are ordered independently of thread scheduling.
inline std::vector<SweepRow> run_sweep(const FileConfig& cfg, const std::vector<SweepAxis>& axes,
                                       unsigned threads = 0) {
  if (axes.empty()) throw ConfigError("/sweep", "no sweep axes given");
  if (axes.size() > 2) throw ConfigError("/sweep/axes", "at most 2 sweep axes are supported");
  const auto grid = sweep_grid(axes);
  json base = cfg.raw;
  base.erase("sweep");
  std::vector<SweepRow> rows(grid.size());
  std::vector<std::exception_ptr> errors(grid.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      try {
        json point = base;
        for (std::size_t a = 0; a < axes.size(); ++a) set_path(point, axes[a].path, grid[i][a]);
        const FileConfig pc = parse_config(point);
        rows[i] = {grid[i], scenario_budget(pc.scenario)};
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, grid.size()));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return rows;
}

/// Shortest round-trip decimal form.
inline std::string format_number(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline std::string sweep_csv(const std::vector<SweepAxis>& axes, const std::vector<SweepRow>& rows) {
  std::string out;
  for (const auto& a : axes) out += a.path + ",";
  out += "eta_a,eta_b,delta_xi_prime2,attenuation,a_total,xi,fidelity,a_j_max,classical\n";
  for (const auto& r : rows) {
    for (double v : r.axis_values) out += format_number(v) + ",";
    const auto& b = r.budget;
    for (double v : {b.eta_a, b.eta_b, b.delta_xi_prime2, b.attenuation_applied, b.a_total, b.xi, b.fidelity})
      out += format_number(v) + ",";
    out += (b.a_j_max ? format_number(*b.a_j_max) : std::string("unf")) + ",";
    out += b.delta_xi_prime2 >= 1.0 ? "1\n" : "0\n";
  }
  return out;
}

inline json sweep_json(const std::vector<SweepAxis>& axes, const std::vector<SweepRow>& rows) {
  json ax = json::array();
  for (const auto& a : axes) ax.push_back({{"path", a.path}, {"values", a.values}});
  json pts = json::array();
  for (const auto& r : rows) pts.push_back({{"axis_values", r.axis_values}, {"budget", to_json(r.budget)}});
  return {{"axes", std::move(ax)}, {"points", std::move(pts)}};
}

/// Parses "path=start:stop:steps" or "path=v1,v2,...".
inline SweepAxis parse_axis_spec(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("/sweep", "axis must look like path=start:stop:steps or path=v1,v2");
  SweepAxis ax;
  ax.path = spec.substr(0, eq);
  const std::string rhs = spec.substr(eq + 1);
  auto num = [&](const std::string& s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
      throw ConfigError("/sweep", "bad number '" + s + "' in axis '" + spec + "'");
    return v;
  };
  auto split = [](const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) parts.push_back(cur);
    return parts;
  };
  if (rhs.find(':') != std::string::npos) {
    const auto p = split(rhs, ':');
    if (p.size() != 3) throw ConfigError("/sweep", "range axis needs start:stop:steps");
    const double a = num(p[0]);
    const double b = num(p[1]);
    const double n = num(p[2]);
    if (!(n >= 1.0) || n != std::floor(n) || n > 1e6) throw ConfigError("/sweep", "steps must be a positive integer");
    const auto steps = static_cast<std::int64_t>(n);
    for (std::int64_t k = 0; k < steps; ++k)
      ax.values.push_back(steps == 1 ? a : a + (b - a) * double(k) / double(steps - 1));
  } else {
    for (const auto& s : split(rhs, ',')) ax.values.push_back(num(s));
    if (ax.values.empty()) throw ConfigError("/sweep", "axis '" + spec + "' has no values");
  }
  return ax;
}

// ---------------------------------------------------------------- teleportation

inline json teleport_json(const TeleportBatch& b, const TeleportOptions& opt) {
  const double z = b.estimate.standard_error > 0.0 ? (b.estimate.mean - b.closed_form) / b.estimate.standard_error : 0.0;
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& r : b.runs) mean += r.output_mean;
  mean /= double(b.runs.size());
  return {{"runs", b.estimate.runs},
          {"input_alpha", {opt.input_alpha.real(), opt.input_alpha.imag()}},
          {"fidelity_empirical", b.estimate.mean},
          {"standard_error", b.estimate.standard_error},
          {"fidelity_closed_form", b.closed_form},
          {"z_score", z},
          {"mean_output", {mean(0), mean(1)}},
          {"output_cov", {{b.output_cov(0, 0), b.output_cov(0, 1)}, {b.output_cov(1, 0), b.output_cov(1, 1)}}}};
}

inline std::string teleport_csv(const TeleportBatch& b) {
  std::string out = "seed,index,a,b,fidelity\n";
  for (const auto& r : b.runs) {
    out += std::to_string(r.seed) + "," + std::to_string(r.index) + "," + format_number(r.a) + "," +
           format_number(r.b) + "," + format_number(r.fidelity) + "\n";
  }
  return out;
}

}  // namespace mwtele
