#include <cmath>
#include <string>

#include <gtest/gtest.h>

#include "mqam/experiment.hpp"
#include "mqam/io.hpp"

namespace {

using namespace mqam;

std::string error_of(const std::string& text) {
  try {
    parse_spec(text, "t.json");
  } catch (const SpecError& e) {
    return e.what();
  }
  return "";
}

TEST(Spec, EmptyObjectGivesDefaults) {
  const auto s = parse_spec("{}");
  EXPECT_EQ(s.channel.num_states, 8);
  EXPECT_EQ(s.channel.average_snr_db, 0.0);
  EXPECT_EQ(s.system.queue_size, 15);
  EXPECT_EQ(s.system.max_action, 5);
  EXPECT_EQ(s.system.discount, 0.95);
  EXPECT_EQ(s.system.arrivals.rate, 3.0);
  EXPECT_EQ(s.solver.algorithm, Algorithm::kValueIteration);
  EXPECT_EQ(s.solver.epsilon, 1e-4);
  EXPECT_FALSE(s.solver.max_iterations.has_value());
  EXPECT_EQ(s.dspsa.config.A, 0.015);
  EXPECT_EQ(s.dspsa.config.B, 100.0);
  EXPECT_EQ(s.dspsa.config.iterations, 5000);
  EXPECT_TRUE(s.dspsa.config.common_random_numbers);
  EXPECT_TRUE(s.dspsa.schedule.empty());
}

TEST(Spec, ResolvedFormRoundTrips) {
  const std::string text = R"({
    "channel": {"average_snr_db": 3, "num_states": 3},
    "system": {"weight": 7.5, "packet_bits": 64,
               "arrivals": {"kind": "explicit", "pmf": [0.5, 0.25, 0.25]}},
    "solver": {"algorithm": "mpi_lnat", "epsilon": 1e-6, "max_iterations": 900},
    "dspsa": {"iterations": 40, "seed": 18446744073709551615,
              "schedule": [{"at_iteration": 10, "system": {"weight": 2}},
                           {"at_iteration": 30, "system": {"discount": 0.5}}]},
    "overrides": {"channel_rows": [{"state": 2, "row": [0, 0, 1]}]}
  })";
  const auto a = parse_spec(text);
  const auto resolved = resolved_json(a);
  const auto b = parse_spec(resolved.dump());
  EXPECT_EQ(resolved_json(b), resolved);
  EXPECT_EQ(b.dspsa.config.seed, 18446744073709551615ULL);
  EXPECT_EQ(b.solver.max_iterations, 900);
  ASSERT_EQ(b.dspsa.schedule.size(), 2u);
  EXPECT_EQ(b.dspsa.schedule[1].system.weight, 2.0);
  EXPECT_EQ(b.dspsa.schedule[1].system.discount, 0.5);
  ASSERT_EQ(b.channel_rows.size(), 1u);
  EXPECT_EQ(b.channel_rows[0].first, 1);
}

TEST(Spec, ErrorsCarryLineAndColumn) {
  const auto e = error_of("{\n  \"system\": {\n    \"weight\": -1\n  }\n}");
  EXPECT_NE(e.find("t.json:3:"), std::string::npos) << e;
  EXPECT_NE(e.find("/system/weight"), std::string::npos) << e;
  EXPECT_NE(e.find("weight must be > 0"), std::string::npos) << e;
}

TEST(Spec, UnknownKeysAreRejected) {
  const auto e = error_of("{\"system\": {\"wieght\": 3}}");
  EXPECT_NE(e.find("wieght"), std::string::npos) << e;
  EXPECT_NE(e.find("weight"), std::string::npos) << e;
  EXPECT_NE(error_of("{\"extra\": 1}"), "");
}

TEST(Spec, TypeAndSyntaxErrors) {
  EXPECT_NE(error_of("{\"system\": {\"queue_size\": 2.5}}").find("/system/queue_size"),
            std::string::npos);
  EXPECT_NE(error_of("{\"solver\": {\"algorithm\": 3}}"), "");
  const auto syntax = error_of("{\n\"system\": {,}\n}");
  EXPECT_NE(syntax.find("t.json:2:"), std::string::npos) << syntax;
  EXPECT_NE(error_of("[]"), "");
}

TEST(Spec, ValueRangesAreChecked) {
  EXPECT_NE(error_of(R"({"system": {"max_action": 16}})"), "");
  EXPECT_NE(error_of(R"({"system": {"discount": 1}})"), "");
  EXPECT_NE(error_of(R"({"system": {"ber_constraint": 0.3}})"), "");
  EXPECT_NE(error_of(R"({"channel": {"num_states": 0}})"), "");
  EXPECT_NE(error_of(R"({"solver": {"algorithm": "pi"}})"), "");
  EXPECT_NE(error_of(R"({"solver": {"epsilon": 0}})"), "");
  EXPECT_NE(error_of(R"({"dspsa": {"alpha1": 2}})"), "");
  EXPECT_NE(error_of(R"({"compare": {"min_states": 5, "max_states": 3}})"), "");
  EXPECT_NE(error_of(R"({"system": {"arrivals": {"kind": "explicit", "pmf": [0.5, 0.4]}}})"), "");
  EXPECT_NE(error_of(R"({"system": {"arrivals": {"kind": "poisson", "pmf": [1]}}})"), "");
  EXPECT_NE(error_of(R"({"system": {"queue_size": 1, "max_action": 1,
                       "arrivals": {"kind": "explicit", "pmf": [0.5, 0.25, 0.25]}}})"),
            "");
}

TEST(Spec, ScheduleValidation) {
  EXPECT_NE(error_of(R"({"dspsa": {"iterations": 10,
      "schedule": [{"at_iteration": 10, "system": {"weight": 2}}]}})"),
            "");
  EXPECT_NE(error_of(R"({"dspsa": {"iterations": 10,
      "schedule": [{"at_iteration": 5, "system": {"weight": 2}},
                   {"at_iteration": 5, "system": {"weight": 3}}]}})"),
            "");
  EXPECT_NE(error_of(R"({"dspsa": {"schedule": [{"at_iteration": 5,
      "system": {"queue_size": 4}}]}})"),
            "");
  EXPECT_NE(error_of(R"({"dspsa": {"schedule": [{"system": {"weight": 4}}]}})"), "");
}

TEST(Spec, RegimesSplitTheIterationRange) {
  const auto s = parse_spec(R"({"system": {"weight": 300},
      "dspsa": {"iterations": 100, "schedule": [{"at_iteration": 40, "system": {"weight": 20}}]}})");
  const auto r = dspsa_regimes(s);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].first_iteration, 1);
  EXPECT_EQ(r[0].last_iteration, 40);
  EXPECT_EQ(r[0].system.weight, 300.0);
  EXPECT_EQ(r[1].first_iteration, 41);
  EXPECT_EQ(r[1].last_iteration, 100);
  EXPECT_EQ(r[1].system.weight, 20.0);
}

TEST(Spec, OverridesReplaceRows) {
  const auto s = parse_spec(R"({"channel": {"num_states": 3},
      "overrides": {"channel_rows": [{"state": 3, "row": [1, 0, 0]}]}})");
  const auto ch = build_channel(s);
  EXPECT_TRUE(ch.diagnostics().transition_overridden);
  EXPECT_EQ(ch.transition(2, 0), 1.0);
  const auto plain = build_channel(s, 4);
  EXPECT_FALSE(plain.diagnostics().transition_overridden);

  const auto full = parse_spec(R"({"channel": {"num_states": 2},
      "overrides": {"channel_transition": [[0.5, 0.5], [0.25, 0.75]]}})");
  EXPECT_EQ(build_channel(full).transition(1, 1), 0.75);

  EXPECT_NE(error_of(R"({"channel": {"num_states": 2},
      "overrides": {"channel_transition": [[0.5, 0.6], [0.25, 0.75]]}})"),
            "");
  EXPECT_NE(error_of(R"({"channel": {"num_states": 2},
      "overrides": {"channel_rows": [{"state": 3, "row": [1, 0]}]}})"),
            "");
}

TEST(Spec, ExplicitPmfIsPaddedToTheBuffer) {
  const auto s = parse_spec(R"({"system": {"queue_size": 4, "max_action": 2,
      "arrivals": {"kind": "explicit", "pmf": [0.5, 0.5]}}})");
  const auto m = build_model(s);
  EXPECT_EQ(m.config().arrivals.pmf, (std::vector<double>{0.5, 0.5, 0.0, 0.0, 0.0}));
}

TEST(Spec, DecibelsAreConverted) {
  const auto s = parse_spec(R"({"channel": {"average_snr_db": 10}})");
  EXPECT_NEAR(s.channel.params().average_snr, 10.0, 1e-12);
  EXPECT_NEAR(build_channel(s).average_snr(), 10.0, 1e-12);
}

TEST(Io, FormatDoubleRoundTrips) {
  for (double x : {0.1, 1.0 / 3.0, 1e-300, 12345.678, -2.5, 0.0}) {
    const auto s = io::format_double(x);
    EXPECT_EQ(std::strtod(s.c_str(), nullptr), x) << s;
  }
  EXPECT_EQ(io::format_double(0.5), "0.5");
  EXPECT_EQ(io::format_double(std::nan("")), "nan");
  EXPECT_EQ(io::format_double(-INFINITY), "-inf");
  EXPECT_EQ(io::hex64(255), "0x00000000000000ff");
}

TEST(Io, TablesAreOneBasedInChannel) {
  Policy p(2, 3, 1);
  p(1, 2) = 4;
  EXPECT_EQ(io::table_csv(p), "b,h1,h2,h3\n0,1,1,1\n1,1,1,4\n");
  ThresholdVector phi(2, 2, 5, 6);
  phi.at(1, 1) = 3;
  EXPECT_EQ(io::thresholds_csv(phi), "h,i1,i2\n1,6,6\n2,3,6\n");
}

TEST(Io, DocumentsCarryVersionAndSpec) {
  const auto spec = resolved_json(parse_spec("{}"));
  const auto doc = io::document("solve_report", spec, {{"x", 1}});
  EXPECT_EQ(doc["version"], kVersion);
  EXPECT_EQ(doc["spec"], spec);
  EXPECT_EQ(doc["x"], 1);
  const auto csv = io::csv_document("policy", spec, "b\n");
  EXPECT_EQ(csv.rfind("# mqam ", 0), 0u);
  EXPECT_NE(csv.find("\n# spec {"), std::string::npos);
}

}  // namespace
