#pragma once

#include "rpmdag/access.hpp"
#include "rpmdag/ehr.hpp"
#include "rpmdag/ledger.hpp"
#include "rpmdag/vital.hpp"

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace rpmdag {

Vital parse_vital(std::string_view text);

struct VitalReading {
  EntityId patient;
  Vital vital = Vital::heart_rate;
  double value = 0;
  std::string unit;
  SimTime measured_at = 0;
  std::string device;

  Bytes canonical_bytes() const;
  bool operator==(const VitalReading&) const = default;
};

/// Converts `value` in `unit` to the vital's canonical unit. Throws UnitMismatch.
double normalize_unit(Vital vital, double value, std::string_view unit);

std::string readings_jsonl(const std::vector<VitalReading>& readings);
std::vector<VitalReading> parse_readings_jsonl(std::string_view text);

struct DeviceProfile {
  double mean = 0;
  double stddev = 1;
  double anomaly_probability = 0;
  /// Anomalies fall strictly outside [normal_min, normal_max].
  double normal_min = 0;
  double normal_max = 0;
  SimTime interval = 60;
  SimTime start = 0;
  std::string device;

  void validate() const;
};

/// Values are rounded to 0.1 in the vital's canonical unit.
std::vector<VitalReading> simulate_device(const EntityId& patient, Vital vital, const DeviceProfile& profile,
                                          std::uint64_t seed, std::size_t count);

struct AggregatedBatch {
  EntityId patient;
  std::vector<VitalReading> readings;
  SimTime window_start = 0;
  SimTime window_end = 0;
};

/// Groups by (window, patient) in that order; empty windows are omitted.
std::vector<AggregatedBatch> aggregate(const std::vector<VitalReading>& readings, SimTime window);

enum class Severity { advisory, urgent };
std::string_view to_string(Severity s);
Severity parse_severity(std::string_view text);

struct ThresholdRule {
  std::string rule_id;
  EntityId patient;
  Vital vital = Vital::heart_rate;
  double min = 0;
  double max = 0;
  Severity severity = Severity::advisory;

  void validate() const;
};

std::vector<ThresholdRule> parse_rules_json(std::string_view text);
std::string rules_json(const std::vector<ThresholdRule>& rules);

enum class Verdict { Normal, Abnormal, Unevaluated };
std::string_view to_string(Verdict v);

struct Evaluation {
  VitalReading reading;
  Verdict verdict = Verdict::Normal;
  std::optional<ThresholdRule> rule;  // violated rule when Abnormal
};

/// Rules for other patients are ignored. Bounds are inclusive.
std::vector<Evaluation> evaluate(const AggregatedBatch& batch, const std::vector<ThresholdRule>& rules);

Digest alert_event_id(const EntityId& patient, const std::string& rule_id, const Digest& ehr_record_hash);

struct AlertEvent {
  Digest event_id;
  EntityId patient;
  std::string rule_id;
  Digest ehr_record_hash;
  std::uint64_t occurred_at = 0;
  Severity severity = Severity::advisory;

  TxBody body() const;
  static AlertEvent from_body(const TxBody& body);
};

struct Notification {
  EntityId recipient;
  AlertEvent event;
};

struct PipelineStats {
  std::size_t readings = 0;
  std::size_t normal = 0;
  std::size_t abnormal = 0;
  std::size_t unevaluated = 0;
  std::size_t alerts_dispatched = 0;
  std::size_t notifications = 0;
  std::size_t denied_notifications = 0;
};

/// Persists, anchors, evaluates and alerts one batch at a time.
class RpmPipeline {
 public:
  RpmPipeline(EhrStore& store, Ledger& private_ledger, Ledger& public_ledger, AccessControl& access,
              EntityId contract);

  void subscribe(EntityId entity, std::string session_token);
  void update_session(const EntityId& entity, std::string session_token);

  std::vector<Evaluation> process(const AggregatedBatch& batch, const std::vector<ThresholdRule>& rules, SimTime now);
  AlertEvent dispatch_alert(const VitalReading& reading, const ThresholdRule& rule, const std::string& record_id,
                            SimTime now);

  const PipelineStats& stats() const { return stats_; }
  const std::vector<Notification>& notifications() const { return notifications_; }

 private:
  EhrStore& store_;
  Ledger& private_;
  Ledger& public_;
  AccessControl& access_;
  EhrAnchorer anchorer_;
  EntityId contract_;
  std::vector<std::pair<EntityId, std::string>> subscribers_;
  std::set<Digest> dispatched_;
  std::vector<Notification> notifications_;
  PipelineStats stats_;
};

/// Values whose text renderings appear in the serialized ledger, or whose
/// text or binary renderings appear in any transaction field.
std::vector<double> leaked_values(const Ledger& ledger, const std::vector<double>& values);

struct DemoConfig {
  std::uint32_t patients = 5;
  SimTime duration = 2400;
  std::optional<std::size_t> readings;  // total across devices; overrides duration
  double anomaly_probability = 0.1;
  std::uint64_t seed = 1;
  SimTime interval = 60;
  SimTime window = 300;
  std::vector<ThresholdRule> rules;  // empty means default rules
  std::filesystem::path out_dir;

  void validate() const;
};

struct DemoReport {
  PipelineStats stats;
  std::size_t public_events = 0;
  std::size_t private_txs = 0;
  std::size_t private_blocks = 0;
  std::size_t public_blocks = 0;
  std::size_t max_alert_seal_lag = 0;
  std::size_t leaked_values = 0;
  std::size_t ehr_records = 0;

  std::string json() const;
};

std::vector<ThresholdRule> default_rules(std::uint32_t patients);
std::string demo_patient(std::uint32_t i);

/// Runs the full path for all patients and writes the store, both ledgers,
/// the roster and the injected readings under `out_dir`.
DemoReport run_demo(const DemoConfig& config);

}  // namespace rpmdag
