#include "rpmdag/error.hpp"
#include "rpmdag/rpm.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

using namespace rpmdag;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::InvalidInput;
}

VitalReading hr(double value, SimTime t = 0, const std::string& patient = "p-1") {
  return {patient, Vital::heart_rate, value, "bpm", t, "dev-1"};
}

AggregatedBatch batch_of(std::vector<VitalReading> readings, const std::string& patient = "p-1") {
  return {patient, std::move(readings), 0, 300};
}

ThresholdRule rule(std::string id, double lo, double hi, Severity s = Severity::advisory, Vital v = Vital::heart_rate) {
  return {std::move(id), "p-1", v, lo, hi, s};
}

DeviceProfile profile(double p) { return {80, 5, p, 60, 100, 60, 0, "dev-1"}; }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Units, NormalizationTable) {
  EXPECT_DOUBLE_EQ(normalize_unit(Vital::glucose, 5.5, "mmol/L"), 99.0);
  EXPECT_DOUBLE_EQ(normalize_unit(Vital::systolic_bp, 16, "kPa"), 16 * 7.50062);
  EXPECT_DOUBLE_EQ(normalize_unit(Vital::heart_rate, 70, "bpm"), 70);
  EXPECT_DOUBLE_EQ(normalize_unit(Vital::respiration, 14, "breaths/min"), 14);
  EXPECT_EQ(code_of([] { normalize_unit(Vital::heart_rate, 70, "mmHg"); }), Errc::UnitMismatch);
  EXPECT_EQ(code_of([] { normalize_unit(Vital::glucose, 5, "furlongs"); }), Errc::UnitMismatch);
  EXPECT_EQ(code_of([] { normalize_unit(Vital::glucose, NAN, "mg/dL"); }), Errc::InvalidInput);
}

TEST(SimulateDevice, NoAnomaliesStayWithinFourSigma) {
  auto rs = simulate_device("p-1", Vital::heart_rate, profile(0), 1, 2000);
  ASSERT_EQ(rs.size(), 2000u);
  for (const auto& r : rs) {
    EXPECT_GE(r.value, 80 - 20 - 1e-9);
    EXPECT_LE(r.value, 80 + 20 + 1e-9);
    EXPECT_NEAR(r.value * 10, std::round(r.value * 10), 1e-6);
    EXPECT_EQ(r.unit, "bpm");
  }
  for (std::size_t i = 1; i < rs.size(); ++i) EXPECT_DOUBLE_EQ(rs[i].measured_at - rs[i - 1].measured_at, 60);
}

TEST(SimulateDevice, AllAnomaliesFallOutsideBounds) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (const auto& r : simulate_device("p-1", Vital::heart_rate, profile(1), seed, 500)) {
      EXPECT_TRUE(r.value < 60 || r.value > 100) << r.value;
      EXPECT_GT(r.value, 0);
    }
  }
  DeviceProfile tight{1, 0.1, 1, 0.5, 1.5, 1, 0, "d"};
  for (const auto& r : simulate_device("p-1", Vital::glucose, tight, 3, 300)) EXPECT_TRUE(r.value < 0.5 || r.value > 1.5);
}

TEST(SimulateDevice, ReplayAndValidation) {
  EXPECT_EQ(simulate_device("p-1", Vital::glucose, profile(0.3), 9, 100),
            simulate_device("p-1", Vital::glucose, profile(0.3), 9, 100));
  EXPECT_NE(simulate_device("p-1", Vital::glucose, profile(0.3), 9, 100),
            simulate_device("p-1", Vital::glucose, profile(0.3), 10, 100));
  auto p = profile(0);
  p.stddev = 0;
  EXPECT_EQ(code_of([&] { simulate_device("p", Vital::glucose, p, 1, 1); }), Errc::InvalidProfile);
  p = profile(1.5);
  EXPECT_EQ(code_of([&] { simulate_device("p", Vital::glucose, p, 1, 1); }), Errc::InvalidProfile);
  p = profile(0);
  p.normal_min = 200;
  EXPECT_EQ(code_of([&] { simulate_device("p", Vital::glucose, p, 1, 1); }), Errc::InvalidProfile);
}

TEST(Aggregate, EmptyAndSingleWindow) {
  EXPECT_TRUE(aggregate({}, 300).empty());
  std::vector<VitalReading> rs;
  for (int i = 0; i < 10; ++i) rs.push_back(hr(70 + i, i * 10));
  auto batches = aggregate(rs, 300);
  ASSERT_EQ(batches.size(), 1u);
  EXPECT_EQ(batches[0].readings.size(), 10u);
  EXPECT_EQ(batches[0].readings, rs);
  EXPECT_DOUBLE_EQ(batches[0].window_start, 0);
  EXPECT_DOUBLE_EQ(batches[0].window_end, 300);
}

TEST(Aggregate, BoundarySplitsExactly) {
  std::vector<VitalReading> rs{hr(70, 290), hr(71, 299.9), hr(72, 300), hr(73, 310)};
  auto batches = aggregate(rs, 300);
  ASSERT_EQ(batches.size(), 2u);
  EXPECT_EQ(batches[0].readings, (std::vector<VitalReading>{rs[0], rs[1]}));
  EXPECT_EQ(batches[1].readings, (std::vector<VitalReading>{rs[2], rs[3]}));
  EXPECT_DOUBLE_EQ(batches[1].window_start, 300);
}

TEST(Aggregate, PerPatientAndEmptyWindowsOmitted) {
  std::vector<VitalReading> rs{hr(70, 10, "p-2"), hr(70, 20, "p-1"), hr(70, 1000, "p-1")};
  rs[1].device = "dev-2";
  rs[2].device = "dev-2";
  auto batches = aggregate(rs, 300);
  ASSERT_EQ(batches.size(), 3u);
  EXPECT_EQ(batches[0].patient, "p-1");
  EXPECT_EQ(batches[1].patient, "p-2");
  EXPECT_DOUBLE_EQ(batches[2].window_start, 900);
}

TEST(Aggregate, NormalizesUnitsAndRejectsBadInput) {
  VitalReading g{"p-1", Vital::glucose, 7.0, "mmol/L", 5, "dev-g"};
  auto batches = aggregate({g}, 60);
  EXPECT_DOUBLE_EQ(batches[0].readings[0].value, 126.0);
  EXPECT_EQ(batches[0].readings[0].unit, "mg/dL");
  g.unit = "bpm";
  EXPECT_EQ(code_of([&] { aggregate({g}, 60); }), Errc::UnitMismatch);
  EXPECT_EQ(code_of([&] { aggregate({hr(1, 50), hr(1, 40)}, 60); }), Errc::InvalidInput);
  EXPECT_EQ(code_of([&] { aggregate({}, 0); }), Errc::InvalidParameter);
}

TEST(Evaluate, ClosedIntervalVerdicts) {
  const std::vector<ThresholdRule> rules{rule("r-1", 60, 100)};
  auto out = evaluate(batch_of({hr(72), hr(140), hr(100), hr(60), hr(59.9)}), rules);
  EXPECT_EQ(out[0].verdict, Verdict::Normal);
  EXPECT_EQ(out[1].verdict, Verdict::Abnormal);
  EXPECT_EQ(out[1].rule->rule_id, "r-1");
  EXPECT_EQ(out[2].verdict, Verdict::Normal);
  EXPECT_EQ(out[3].verdict, Verdict::Normal);
  EXPECT_EQ(out[4].verdict, Verdict::Abnormal);
}

TEST(Evaluate, HighestSeverityThenSmallestId) {
  const std::vector<ThresholdRule> rules{rule("r-b", 60, 100, Severity::advisory),
                                         rule("r-c", 50, 110, Severity::urgent),
                                         rule("r-a", 55, 105, Severity::urgent),
                                         rule("r-z", 0, 1000, Severity::urgent)};
  auto out = evaluate(batch_of({hr(120), hr(107), hr(102)}), rules);
  EXPECT_EQ(out[0].rule->rule_id, "r-a");
  EXPECT_EQ(out[1].rule->rule_id, "r-a");
  EXPECT_EQ(out[2].rule->rule_id, "r-b");
}

TEST(Evaluate, MissingRuleIsUnevaluatedAndOtherPatientsIgnored) {
  auto other = rule("r-x", 60, 100);
  other.patient = "p-2";
  VitalReading g{"p-1", Vital::glucose, 500, "mg/dL", 0, "dev-g"};
  auto out = evaluate(batch_of({hr(140), g}), {other, rule("r-g", 70, 140, Severity::urgent, Vital::glucose)});
  EXPECT_EQ(out[0].verdict, Verdict::Unevaluated);
  EXPECT_FALSE(out[0].rule.has_value());
  EXPECT_EQ(out[1].verdict, Verdict::Abnormal);
}

TEST(Serialization, ReadingsAndRulesRoundTrip) {
  std::vector<VitalReading> rs{hr(72.3, 5), {"p-2", Vital::glucose, 6.1, "mmol/L", 7.5, "dev-x"}};
  EXPECT_EQ(parse_readings_jsonl(readings_jsonl(rs)), rs);
  EXPECT_EQ(code_of([] { parse_readings_jsonl("{\"patient\":1}\n"); }), Errc::ParseError);
  auto rules = default_rules(2);
  EXPECT_EQ(rules.size(), 10u);
  auto back = parse_rules_json(rules_json(rules));
  ASSERT_EQ(back.size(), rules.size());
  for (std::size_t i = 0; i < rules.size(); ++i) {
    EXPECT_EQ(back[i].rule_id, rules[i].rule_id);
    EXPECT_EQ(back[i].vital, rules[i].vital);
    EXPECT_DOUBLE_EQ(back[i].max, rules[i].max);
  }
  EXPECT_EQ(code_of([] { parse_rules_json(R"([{"rule_id":"r","patient":"p","vital":"glucose","min":5,"max":1,"severity":"urgent"}])"); }),
            Errc::InvalidInput);
}

class PipelineTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("rpmdag_rpm_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    std::filesystem::remove_all(dir_);
    roster_.add({"p-1", Role::patient, {sha256("pw"), {}}});
    roster_.add({"dr-1", Role::healthcare_provider, {sha256("dr"), {}}});
    roster_.add({"ins", Role::insurer, {sha256("ins"), {}}});
    store_ = std::make_unique<EhrStore>(dir_);
    access_ = std::make_unique<AccessControl>(roster_);
    pipeline_ = std::make_unique<RpmPipeline>(*store_, priv_, pub_, *access_, "contract");
    auto patient = access_->authenticate("p-1", TokenProof{"pw"}, 0);
    access_->grant(patient.token, "dr-1", Scope::alerts_subscribe, 0);
    pipeline_->subscribe("dr-1", access_->authenticate("dr-1", TokenProof{"dr"}, 0).token);
    pipeline_->subscribe("ins", access_->authenticate("ins", TokenProof{"ins"}, 0).token);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }

  std::size_t public_alerts() {
    pub_.seal_block("sealer", 1000);
    std::size_t n = 0;
    for (const auto& c : pub_.confirmed()) n += c.tx.kind == TxKind::AlertEvent;
    return n;
  }

  std::filesystem::path dir_;
  Roster roster_;
  Ledger priv_{Visibility::Private, {"contract", "sealer"}};
  Ledger pub_{Visibility::Public, {"contract", "sealer"}};
  std::unique_ptr<EhrStore> store_;
  std::unique_ptr<AccessControl> access_;
  std::unique_ptr<RpmPipeline> pipeline_;
};

TEST_F(PipelineTest, AbnormalReadingAlertsGrantedProviderOnly) {
  const std::vector<ThresholdRule> rules{rule("r-1", 60, 100, Severity::urgent)};
  auto out = pipeline_->process(batch_of({hr(140, 30)}), rules, 300);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(public_alerts(), 1u);
  ASSERT_EQ(pipeline_->notifications().size(), 1u);
  EXPECT_EQ(pipeline_->notifications()[0].recipient, "dr-1");
  EXPECT_EQ(pipeline_->stats().denied_notifications, 1u);

  const auto ev = pipeline_->notifications()[0].event;
  EXPECT_EQ(ev.occurred_at, 30u);
  EXPECT_EQ(ev.severity, Severity::urgent);
  EXPECT_EQ(ev.ehr_record_hash, sha256(hr(140, 30).canonical_bytes()));
  EXPECT_EQ(ev.event_id, alert_event_id("p-1", "r-1", ev.ehr_record_hash));

  priv_.seal_block("sealer", 300);
  std::size_t evaluations = 0, anchors = 0;
  for (const auto& c : priv_.confirmed()) {
    if (c.tx.kind == TxKind::RuleEvaluation) {
      ++evaluations;
      EXPECT_EQ(c.tx.body.at("verdict"), "Abnormal");
      EXPECT_EQ(c.tx.body.at("event_id"), ev.event_id.hex());
      EXPECT_EQ(c.tx.body.count("value"), 0u);
    }
    anchors += c.tx.kind == TxKind::EhrAnchor;
  }
  EXPECT_EQ(evaluations, 1u);
  EXPECT_EQ(anchors, 1u);
}

TEST_F(PipelineTest, NormalReadingsProduceNoPublicTraffic) {
  pipeline_->process(batch_of({hr(72, 1), hr(80, 2), hr(100, 3)}), {rule("r-1", 60, 100)}, 300);
  EXPECT_EQ(pub_.pending_size(), 0u);
  EXPECT_EQ(public_alerts(), 0u);
  EXPECT_EQ(pipeline_->stats().normal, 3u);
  EXPECT_TRUE(pipeline_->notifications().empty());
}

TEST_F(PipelineTest, RedispatchIsDeduplicated) {
  const auto r = rule("r-1", 60, 100);
  pipeline_->process(batch_of({hr(150, 10)}), {r}, 300);
  const auto id = store_->record_ids().back();
  auto a = pipeline_->dispatch_alert(hr(150, 10), r, id, 400);
  auto b = pipeline_->dispatch_alert(hr(150, 10), r, id, 500);
  EXPECT_EQ(a.event_id, b.event_id);
  EXPECT_EQ(pub_.pending_size(), 3u);
  EXPECT_EQ(public_alerts(), 1u);
  EXPECT_EQ(pipeline_->notifications().size(), 1u);
}

TEST_F(PipelineTest, DispatchRequiresStoredRecord) {
  const auto r = rule("r-1", 60, 100);
  EXPECT_EQ(code_of([&] { pipeline_->dispatch_alert(hr(150), r, "ehr-404", 1); }), Errc::EhrRecordMissing);
  auto rec = store_->store(hr(151).canonical_bytes(), "p-1", RecordKind::vital_reading, 1);
  EXPECT_EQ(code_of([&] { pipeline_->dispatch_alert(hr(150), r, rec.record_id, 1); }), Errc::EhrRecordMissing);
  EXPECT_EQ(pub_.pending_size(), 0u);
}

TEST_F(PipelineTest, LeakyRuleIdIsRejected) {
  auto leaky = rule("heart_rate-max", 60, 100);
  EXPECT_EQ(code_of([&] { pipeline_->process(batch_of({hr(150, 10)}), {leaky}, 300); }), Errc::PhiLeak);
  EXPECT_EQ(pub_.pending_size(), 0u);
}

TEST(LeakScan, FindsTextAndBinaryRenderings) {
  Ledger l(Visibility::Private, {"w"});
  l.submit(Transaction::make(TxKind::RuleEvaluation, {{"note", "value 72.5"}}, 1, "w"), "w");
  CanonicalWriter w;
  w.f64(133.7);
  l.submit(Transaction::make(TxKind::RuleEvaluation, {{"blob", std::string(w.data().begin(), w.data().end())}}, 1, "w"),
           "w");
  l.seal_block("w", 2);
  EXPECT_EQ(leaked_values(l, {72.5, 133.7, 99.9}), (std::vector<double>{72.5, 133.7}));
}

TEST(Demo, EndToEndCountsAndFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "rpmdag_demo_unit";
  std::filesystem::remove_all(dir);
  DemoConfig c;
  c.patients = 3;
  c.readings = 300;
  c.anomaly_probability = 0.2;
  c.seed = 5;
  c.out_dir = dir;
  auto report = run_demo(c);
  EXPECT_EQ(report.stats.readings, 300u);
  EXPECT_EQ(report.stats.normal + report.stats.abnormal + report.stats.unevaluated, 300u);
  EXPECT_GT(report.stats.abnormal, 0u);
  EXPECT_EQ(report.public_events, report.stats.abnormal);
  EXPECT_EQ(report.stats.notifications, report.stats.abnormal);
  EXPECT_LE(report.max_alert_seal_lag, 2u);
  EXPECT_EQ(report.leaked_values, 0u);
  EXPECT_EQ(report.ehr_records, 300u);

  // Independent recount from the files the demo wrote.
  auto readings = parse_readings_jsonl(slurp(dir / "readings.jsonl"));
  auto rules = parse_rules_json(slurp(dir / "rules.json"));
  std::size_t abnormal = 0;
  for (const auto& r : readings) {
    for (const auto& rule : rules)
      if (rule.patient == r.patient && rule.vital == r.vital && (r.value < rule.min || r.value > rule.max)) {
        ++abnormal;
        break;
      }
  }
  EXPECT_EQ(abnormal, report.stats.abnormal);
  auto pub = Ledger::load(dir / "public.ledger", {});
  std::size_t alerts = 0;
  for (const auto& tx : pub.confirmed()) alerts += tx.tx.kind == TxKind::AlertEvent;
  EXPECT_EQ(alerts, abnormal);

  EXPECT_EQ(code_of([&] { run_demo(c); }), Errc::InvalidConfig);
  const auto first = slurp(dir / "summary.json") + slurp(dir / "public.ledger") + slurp(dir / "private.ledger");
  std::filesystem::remove_all(dir);
  run_demo(c);
  EXPECT_EQ(slurp(dir / "summary.json") + slurp(dir / "public.ledger") + slurp(dir / "private.ledger"), first);
  std::filesystem::remove_all(dir);
}
