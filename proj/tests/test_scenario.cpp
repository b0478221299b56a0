#include "mwtele/scenario.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace mwtele;

namespace {

std::string config_path(const std::string& name) { return std::string(MWTELE_CONFIG_DIR) + "/" + name; }

json minimal() {
  return json::parse(R"({"schema_version": 1, "epr": {"delta_xi2": 0.47}})");
}

std::string error_path(const json& j) {
  try {
    parse_config(j);
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "<no error>";
}

}  // namespace

TEST(Config, ShippedConfigsParse) {
  const auto ref = load_config(config_path("reference.json"));
  EXPECT_EQ(ref.seed, 20240601u);
  ASSERT_TRUE(ref.scenario.epr.jpa.has_value());
  EXPECT_NEAR(ref.scenario.epr.quality().delta_xi2, 0.32, 1e-12);
  EXPECT_EQ(ref.teleport.runs, 100000u);
  EXPECT_EQ(ref.teleport.input_alpha, cplx(2.0, 1.0));
  EXPECT_EQ(ref.repeater.dim, 30);
  EXPECT_EQ(ref.kerr.system.delta_b, 50.0);

  const auto t1 = load_config(config_path("table1.json"));
  ASSERT_EQ(t1.sweep.size(), 2u);
  EXPECT_EQ(t1.sweep[1].values.size(), 4u);

  const auto f3 = load_config(config_path("fig3a.json"));
  ASSERT_EQ(f3.sweep.size(), 2u);
  EXPECT_EQ(f3.sweep[1].values.size(), 21u);
  EXPECT_FALSE(f3.scenario.optimize_attenuation);

  const auto an = load_config(config_path("analog.json"));
  EXPECT_EQ(an.scenario.feedforward.mode, FeedforwardMode::Analog);
}

TEST(Config, ErrorsCarryPointers) {
  json j = minimal();
  j["chanel"] = json::object();
  EXPECT_EQ(error_path(j), "/chanel");

  j = minimal();
  j["chain"] = {{"alpha", 1.5}};
  EXPECT_EQ(error_path(j), "/chain/alpha");

  j = minimal();
  j.erase("epr");
  EXPECT_EQ(error_path(j), "/epr");

  j = minimal();
  j["schema_version"] = 2;
  EXPECT_EQ(error_path(j), "/schema_version");
  j.erase("schema_version");
  EXPECT_EQ(error_path(j), "/schema_version");

  j = minimal();
  j["epr"] = {{"jpa", {{"sigma_s2", 0.16}, {"chi", 1.0}}}};
  EXPECT_EQ(error_path(j), "/epr/jpa");

  j = minimal();
  j["epr"]["delta_xi_perp2"] = 1.0;
  EXPECT_EQ(error_path(j), "/epr");

  j = minimal();
  j["seed"] = -4;
  EXPECT_EQ(error_path(j), "/seed");

  j = minimal();
  j["teleport"] = {{"runs", 2.5}};
  EXPECT_EQ(error_path(j), "/teleport/runs");

  j = minimal();
  j["feedforward"] = {{"mode", "quantum"}};
  EXPECT_EQ(error_path(j), "/feedforward/mode");
}

TEST(Config, SweepAxisLimits) {
  json j = minimal();
  j["sweep"] = {{"axes", json::array({{{"path", "channel.distance_m"}, {"values", {1}}},
                                      {{"path", "channel.n_va"}, {"values", {0}}},
                                      {{"path", "channel.n_vb"}, {"values", {0}}}})}};
  EXPECT_EQ(error_path(j), "/sweep/axes");
  j["sweep"]["axes"] = json::array({{{"path", "channel.distance_m"}, {"start", 0}, {"stop", 1}, {"steps", 5}}});
  const auto c = parse_config(j);
  ASSERT_EQ(c.sweep.size(), 1u);
  EXPECT_EQ(c.sweep[0].values, (std::vector<double>{0, 0.25, 0.5, 0.75, 1}));
}

TEST(Config, MalformedText) {
  EXPECT_THROW(parse_config_text("{\"schema_version\": 1,"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/file.json"), ConfigError);
}

TEST(Axis, SpecParsing) {
  const auto r = parse_axis_spec("channel.distance_m=0:10:3");
  EXPECT_EQ(r.path, "channel.distance_m");
  EXPECT_EQ(r.values, (std::vector<double>{0, 5, 10}));
  const auto l = parse_axis_spec("epr.delta_xi2=0.1,0.2");
  EXPECT_EQ(l.values, (std::vector<double>{0.1, 0.2}));
  EXPECT_THROW(parse_axis_spec("nothing"), ConfigError);
  EXPECT_THROW(parse_axis_spec("a=1:2"), ConfigError);
  EXPECT_THROW(parse_axis_spec("a=1:2:0"), ConfigError);
  EXPECT_THROW(parse_axis_spec("a=x,2"), ConfigError);
}

TEST(Axis, SetPath) {
  json j = minimal();
  set_path(j, "channel.distance_m", 3.0);
  EXPECT_EQ(j["channel"]["distance_m"], 3.0);
  set_path(j, "epr.delta_xi2", 0.2);
  EXPECT_EQ(j["epr"]["delta_xi2"], 0.2);
  EXPECT_THROW(set_path(j, "epr.delta_xi2.x", 1.0), ConfigError);
  EXPECT_THROW(set_path(j, "a..b", 1.0), ConfigError);
}

TEST(Hash, StableAndSensitive) {
  const json a = minimal();
  const json b = json::parse(R"({"epr": {"delta_xi2": 0.47}, "schema_version": 1})");
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
  json c = a;
  c["epr"]["delta_xi2"] = 0.470001;
  EXPECT_NE(config_hash(a), config_hash(c));
}

TEST(Sweep, GridIsRowMajor) {
  const std::vector<SweepAxis> axes{{"a", {1, 2}}, {"b", {10, 20, 30}}};
  const auto g = sweep_grid(axes);
  ASSERT_EQ(g.size(), 6u);
  EXPECT_EQ(g[0], (std::vector<double>{1, 10}));
  EXPECT_EQ(g[1], (std::vector<double>{1, 20}));
  EXPECT_EQ(g[3], (std::vector<double>{2, 10}));
}

TEST(Sweep, ThreadCountDoesNotChangeOutput) {
  const auto cfg = load_config(config_path("fig3a.json"));
  const auto one = sweep_csv(cfg.sweep, run_sweep(cfg, cfg.sweep, 1));
  const auto four = sweep_csv(cfg.sweep, run_sweep(cfg, cfg.sweep, 4));
  EXPECT_EQ(one, four);
  EXPECT_EQ(sweep_json(cfg.sweep, run_sweep(cfg, cfg.sweep, 1)).dump(),
            sweep_json(cfg.sweep, run_sweep(cfg, cfg.sweep, 3)).dump());
}

TEST(Sweep, EqualLossesGiveAffineCorrelation) {
  json j = minimal();
  j["channel"] = {{"cable_loss_db_per_m", 0.3}};
  const auto cfg = parse_config(j);
  const std::vector<SweepAxis> axes{{"channel.distance_m", {0, 1, 2.5, 7, 20}}};
  for (const auto& row : run_sweep(cfg, axes, 2)) {
    const double eta = row.budget.eta_a;
    EXPECT_DOUBLE_EQ(row.budget.eta_b, eta);
    EXPECT_NEAR(row.budget.delta_xi_prime2, eta * 0.47 + 1 - eta, 1e-13);
    EXPECT_NEAR(eta, std::pow(10.0, -0.03 * row.axis_values[0]), 1e-13);
  }
}

TEST(Sweep, PointsMatchDirectBudget) {
  const auto cfg = load_config(config_path("table1.json"));
  const auto rows = run_sweep(cfg, cfg.sweep, 2);
  ASSERT_EQ(rows.size(), 8u);
  for (const auto& r : rows) {
    ScenarioConfig s = cfg.scenario;
    s.channel.measurement_time_s = r.axis_values[0];
    s.channel.distance_m = r.axis_values[1];
    const auto b = scenario_budget(s);
    EXPECT_EQ(b.delta_xi_prime2, r.budget.delta_xi_prime2);
    EXPECT_EQ(b.a_j_max.has_value(), r.budget.a_j_max.has_value());
    if (b.a_j_max) EXPECT_EQ(*b.a_j_max, *r.budget.a_j_max);
  }
}

TEST(Sweep, BadPointReportsError) {
  json j = minimal();
  const auto cfg = parse_config(j);
  EXPECT_THROW(run_sweep(cfg, {{"channel.distance_m", {1, -1}}}), ConfigError);
  EXPECT_THROW(run_sweep(cfg, {}), ConfigError);
}

TEST(Report, IdealChainFidelity) {
  for (double d : {0.1, 0.47, 1.0, 2.0}) {
    json j = minimal();
    j["epr"]["delta_xi2"] = d;
    const auto b = scenario_budget(parse_config(j).scenario);
    EXPECT_EQ(b.a_total, 0.0);
    EXPECT_NEAR(b.fidelity, 1.0 / (1.0 + d), 1e-15);
    EXPECT_EQ(b.quantum(), d < 1.0);
  }
}

TEST(Report, CsvClassicalFlagAndUnfeasibleMarker) {
  json j = minimal();
  j["chain"] = {{"alpha", 0.9}, {"g_j", 100}, {"a_h", 5}};
  const auto cfg = parse_config(j);
  const std::vector<SweepAxis> axes{{"epr.delta_xi2", {0.3, 1.5}}};
  const std::string csv = sweep_csv(axes, run_sweep(cfg, axes, 1));
  std::istringstream in(csv);
  std::string header, first, second;
  std::getline(in, header);
  std::getline(in, first);
  std::getline(in, second);
  EXPECT_EQ(header.rfind("epr.delta_xi2,eta_a", 0), 0u);
  EXPECT_EQ(first.back(), '0');
  EXPECT_EQ(second.substr(second.size() - 6), ",unf,1");
}

TEST(Report, JsonEnvelopeRoundTrip) {
  const auto cfg = load_config(config_path("reference.json"));
  const json env = envelope("budget", cfg, cfg.seed, to_json(scenario_budget(cfg.scenario)));
  EXPECT_EQ(env["schema_version"], kSchemaVersion);
  EXPECT_EQ(env["command"], "budget");
  EXPECT_EQ(env["config_hash"], config_hash(cfg.raw));
  EXPECT_EQ(env["seed"], 20240601u);
  const json back = json::parse(env.dump(2));
  EXPECT_EQ(back, env);
  EXPECT_EQ(back["result"]["delta_xi_prime2"].get<double>(), scenario_budget(cfg.scenario).delta_xi_prime2);
}

TEST(Report, FormatNumberRoundTrips) {
  for (double x : {0.1, 1.0 / 3.0, 1e-300, 123456789.125, -0.0}) EXPECT_EQ(std::stod(format_number(x)), x);
  EXPECT_EQ(format_number(0.25), "0.25");
}

TEST(Report, TeleportCsvIsDeterministic) {
  const auto cfg = load_config(config_path("reference.json"));
  const auto s = TeleportSetup::from_config(cfg.scenario);
  const auto a = simulate_teleport(s, cfg.teleport.input_alpha, 7, 50);
  const auto b = simulate_teleport(s, cfg.teleport.input_alpha, 7, 50);
  EXPECT_EQ(teleport_csv(a), teleport_csv(b));
  EXPECT_EQ(teleport_json(a, cfg.teleport).dump(), teleport_json(b, cfg.teleport).dump());
}
