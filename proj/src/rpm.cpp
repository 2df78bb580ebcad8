#include "rpmdag/rpm.hpp"

#include "rpmdag/error.hpp"

#include <json.hpp>

#include <boost/random/bernoulli_distribution.hpp>
#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

namespace rpmdag {

namespace {

double round1(double v) { return std::round(v * 10.0) / 10.0; }

std::string fixed1(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view a, std::string_view b) {
  CanonicalWriter w;
  w.str("rpmdag-seed").u64(seed).str(a).str(b);
  const auto d = sha256(w.data());
  std::uint64_t out = 0;
  for (int i = 0; i < 8; ++i) out = (out << 8) | d.bytes()[static_cast<std::size_t>(i)];
  return out;
}

struct Bounds {
  double min, max;
  Severity severity;
};

Bounds default_bounds(Vital v) {
  switch (v) {
    case Vital::heart_rate: return {60, 100, Severity::urgent};
    case Vital::systolic_bp: return {90, 140, Severity::urgent};
    case Vital::diastolic_bp: return {60, 90, Severity::advisory};
    case Vital::glucose: return {70, 140, Severity::urgent};
    case Vital::respiration: return {12, 20, Severity::advisory};
  }
  return {0, 1, Severity::advisory};
}

}  // namespace

Vital parse_vital(std::string_view text) {
  for (auto v : kAllVitals)
    if (to_string(v) == text) return v;
  throw Error(Errc::InvalidInput, "unknown vital '" + std::string(text) + "'");
}

Bytes VitalReading::canonical_bytes() const {
  CanonicalWriter w;
  w.str("vital_reading").str(patient).str(to_string(vital)).f64(value).str(unit).f64(measured_at).str(device);
  return std::move(w).take();
}

double normalize_unit(Vital vital, double value, std::string_view unit) {
  if (!std::isfinite(value)) throw Error(Errc::InvalidInput, "reading value is not finite");
  if (unit == canonical_unit(vital)) return value;
  switch (vital) {
    case Vital::heart_rate:
      if (unit == "beats/min") return value;
      break;
    case Vital::systolic_bp:
    case Vital::diastolic_bp:
      if (unit == "kPa") return value * 7.50062;
      break;
    case Vital::glucose:
      if (unit == "mmol/L") return value * 18.0;
      break;
    case Vital::respiration:
      break;
  }
  throw Error(Errc::UnitMismatch,
              "cannot convert " + std::string(unit) + " to " + std::string(canonical_unit(vital)) + " for " +
                  std::string(to_string(vital)));
}

std::string readings_jsonl(const std::vector<VitalReading>& readings) {
  std::string out;
  for (const auto& r : readings) {
    nlohmann::ordered_json j;
    j["patient"] = r.patient;
    j["vital"] = to_string(r.vital);
    j["value"] = r.value;
    j["unit"] = r.unit;
    j["measured_at"] = r.measured_at;
    j["device"] = r.device;
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<VitalReading> parse_readings_jsonl(std::string_view text) {
  std::vector<VitalReading> out;
  std::size_t line_no = 0, start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      out.push_back({j.at("patient").get<std::string>(), parse_vital(j.at("vital").get<std::string>()),
                     j.at("value").get<double>(), j.at("unit").get<std::string>(), j.at("measured_at").get<double>(),
                     j.at("device").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ParseError, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void DeviceProfile::validate() const {
  auto bad = [](const std::string& why) { throw Error(Errc::InvalidProfile, why); };
  for (double v : {mean, stddev, anomaly_probability, normal_min, normal_max, interval, start})
    if (!std::isfinite(v)) bad("profile values must be finite");
  if (!(stddev > 0)) bad("stddev must be positive");
  if (anomaly_probability < 0 || anomaly_probability > 1) bad("anomaly probability must be in [0, 1]");
  if (!(normal_min < normal_max)) bad("normal_min must be below normal_max");
  if (!(normal_max > 0)) bad("normal_max must be positive");
  if (!(interval > 0)) bad("interval must be positive");
  if (device.empty()) bad("device id is empty");
}

std::vector<VitalReading> simulate_device(const EntityId& patient, Vital vital, const DeviceProfile& profile,
                                          std::uint64_t seed, std::size_t count) {
  profile.validate();
  boost::random::mt19937_64 rng(seed);
  boost::random::bernoulli_distribution<double> anomalous(profile.anomaly_probability);
  boost::random::bernoulli_distribution<double> low_side(0.5);
  boost::random::normal_distribution<double> baseline(profile.mean, profile.stddev);
  const double lo = profile.mean - 4 * profile.stddev;
  const double hi = profile.mean + 4 * profile.stddev;
  const auto steps = std::max<long long>(1, std::llround((profile.normal_max - profile.normal_min) * 5));
  boost::random::uniform_int_distribution<long long> excursion(1, steps);

  std::vector<VitalReading> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    double value;
    if (anomalous(rng)) {
      const double m = 0.1 * static_cast<double>(excursion(rng));
      const bool low = low_side(rng);
      double below = round1(profile.normal_min - m);
      double above = round1(profile.normal_max + m);
      if (above <= profile.normal_max) above = round1(above + 0.1);
      value = (low && below > 0 && below < profile.normal_min) ? below : above;
    } else {
      value = round1(std::clamp(baseline(rng), lo, hi));
      if (value > hi) value = std::floor(hi * 10) / 10;
      if (value < lo) value = std::ceil(lo * 10) / 10;
    }
    out.push_back({patient, vital, value, std::string(canonical_unit(vital)),
                   profile.start + static_cast<double>(i) * profile.interval, profile.device});
  }
  return out;
}

std::vector<AggregatedBatch> aggregate(const std::vector<VitalReading>& readings, SimTime window) {
  if (!(window > 0) || !std::isfinite(window)) throw Error(Errc::InvalidParameter, "window must be positive");
  std::map<std::string, SimTime> last_seen;
  std::map<std::pair<long long, EntityId>, AggregatedBatch> groups;
  for (const auto& r : readings) {
    auto [it, fresh] = last_seen.emplace(r.device, r.measured_at);
    if (!fresh) {
      if (r.measured_at < it->second)
        throw Error(Errc::InvalidInput, "readings from device '" + r.device + "' are out of order");
      it->second = r.measured_at;
    }
    VitalReading n = r;
    n.value = normalize_unit(r.vital, r.value, r.unit);
    n.unit = std::string(canonical_unit(r.vital));
    const auto idx = static_cast<long long>(std::floor(r.measured_at / window));
    auto& batch = groups[{idx, r.patient}];
    if (batch.readings.empty()) {
      batch.patient = r.patient;
      batch.window_start = static_cast<double>(idx) * window;
      batch.window_end = static_cast<double>(idx + 1) * window;
    }
    batch.readings.push_back(std::move(n));
  }
  std::vector<AggregatedBatch> out;
  out.reserve(groups.size());
  for (auto& [key, batch] : groups) out.push_back(std::move(batch));
  return out;
}

std::string_view to_string(Severity s) { return s == Severity::urgent ? "urgent" : "advisory"; }

Severity parse_severity(std::string_view text) {
  if (text == "urgent") return Severity::urgent;
  if (text == "advisory") return Severity::advisory;
  throw Error(Errc::InvalidInput, "unknown severity '" + std::string(text) + "'");
}

void ThresholdRule::validate() const {
  if (rule_id.empty()) throw Error(Errc::InvalidInput, "rule id is empty");
  if (patient.empty()) throw Error(Errc::InvalidInput, "rule '" + rule_id + "' has no patient");
  if (!std::isfinite(min) || !std::isfinite(max) || !(min < max))
    throw Error(Errc::InvalidInput, "rule '" + rule_id + "' needs min < max");
}

std::vector<ThresholdRule> parse_rules_json(std::string_view text) {
  std::vector<ThresholdRule> rules;
  try {
    for (const auto& j : nlohmann::json::parse(text)) {
      ThresholdRule r{j.at("rule_id").get<std::string>(), j.at("patient").get<std::string>(),
                      parse_vital(j.at("vital").get<std::string>()), j.at("min").get<double>(),
                      j.at("max").get<double>(), parse_severity(j.at("severity").get<std::string>())};
      r.validate();
      rules.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("rules: ") + e.what());
  }
  return rules;
}

std::string rules_json(const std::vector<ThresholdRule>& rules) {
  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  for (const auto& r : rules) {
    nlohmann::ordered_json j;
    j["rule_id"] = r.rule_id;
    j["patient"] = r.patient;
    j["vital"] = to_string(r.vital);
    j["min"] = r.min;
    j["max"] = r.max;
    j["severity"] = to_string(r.severity);
    list.push_back(std::move(j));
  }
  return list.dump(2) + "\n";
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Normal: return "Normal";
    case Verdict::Abnormal: return "Abnormal";
    case Verdict::Unevaluated: return "Unevaluated";
  }
  return "";
}

std::vector<Evaluation> evaluate(const AggregatedBatch& batch, const std::vector<ThresholdRule>& rules) {
  std::vector<Evaluation> out;
  out.reserve(batch.readings.size());
  for (const auto& reading : batch.readings) {
    Evaluation e{reading, Verdict::Unevaluated, std::nullopt};
    for (const auto& rule : rules) {
      if (rule.patient != batch.patient || rule.vital != reading.vital) continue;
      if (e.verdict == Verdict::Unevaluated) e.verdict = Verdict::Normal;
      if (reading.value >= rule.min && reading.value <= rule.max) continue;
      e.verdict = Verdict::Abnormal;
      if (!e.rule || rule.severity > e.rule->severity ||
          (rule.severity == e.rule->severity && rule.rule_id < e.rule->rule_id))
        e.rule = rule;
    }
    out.push_back(std::move(e));
  }
  return out;
}

Digest alert_event_id(const EntityId& patient, const std::string& rule_id, const Digest& ehr_record_hash) {
  CanonicalWriter w;
  w.str("alert-event").str(patient).str(rule_id).digest(ehr_record_hash);
  return sha256(w.data());
}

TxBody AlertEvent::body() const {
  return {{"patient", patient},
          {"rule_id", rule_id},
          {"ehr_record_hash", ehr_record_hash.hex()},
          {"occurred_at", std::to_string(occurred_at)},
          {"severity", std::string(to_string(severity))}};
}

AlertEvent AlertEvent::from_body(const TxBody& body) {
  check_alert_body(body);
  AlertEvent ev;
  ev.patient = body.at("patient");
  ev.rule_id = body.at("rule_id");
  ev.ehr_record_hash = Digest::from_hex(body.at("ehr_record_hash"));
  ev.occurred_at = std::stoull(body.at("occurred_at"));
  ev.severity = parse_severity(body.at("severity"));
  ev.event_id = alert_event_id(ev.patient, ev.rule_id, ev.ehr_record_hash);
  return ev;
}

RpmPipeline::RpmPipeline(EhrStore& store, Ledger& private_ledger, Ledger& public_ledger, AccessControl& access,
                         EntityId contract)
    : store_(store),
      private_(private_ledger),
      public_(public_ledger),
      access_(access),
      anchorer_(private_ledger, contract),
      contract_(std::move(contract)) {
  if (public_.visibility() != Visibility::Public) throw Error(Errc::InvalidInput, "alerts need a public ledger");
}

void RpmPipeline::subscribe(EntityId entity, std::string session_token) {
  subscribers_.emplace_back(std::move(entity), std::move(session_token));
}

void RpmPipeline::update_session(const EntityId& entity, std::string session_token) {
  for (auto& [e, s] : subscribers_)
    if (e == entity) s = session_token;
}

std::vector<Evaluation> RpmPipeline::process(const AggregatedBatch& batch, const std::vector<ThresholdRule>& rules,
                                             SimTime now) {
  auto evaluations = evaluate(batch, rules);
  for (const auto& e : evaluations) {
    const auto rec = store_.store(e.reading.canonical_bytes(), e.reading.patient, RecordKind::vital_reading, now);
    anchorer_.anchor(rec, now);

    std::string rule_id = "none";
    if (e.rule) {
      rule_id = e.rule->rule_id;
    } else if (e.verdict == Verdict::Normal) {
      for (const auto& r : rules)
        if (r.patient == batch.patient && r.vital == e.reading.vital && (rule_id == "none" || r.rule_id < rule_id))
          rule_id = r.rule_id;
    }
    TxBody body{{"patient", e.reading.patient},
                {"ehr_record_hash", rec.content_hash.hex()},
                {"rule_id", rule_id},
                {"verdict", std::string(to_string(e.verdict))},
                {"event_id", alert_event_id(e.reading.patient, rule_id, rec.content_hash).hex()},
                {"evaluated_at", format_number(now)}};
    private_.submit(Transaction::make(TxKind::RuleEvaluation, std::move(body), now, contract_), contract_);

    ++stats_.readings;
    switch (e.verdict) {
      case Verdict::Normal: ++stats_.normal; break;
      case Verdict::Unevaluated: ++stats_.unevaluated; break;
      case Verdict::Abnormal:
        ++stats_.abnormal;
        dispatch_alert(e.reading, *e.rule, rec.record_id, now);
        break;
    }
  }
  return evaluations;
}

AlertEvent RpmPipeline::dispatch_alert(const VitalReading& reading, const ThresholdRule& rule,
                                       const std::string& record_id, SimTime now) {
  if (!store_.contains(record_id)) throw Error(Errc::EhrRecordMissing, "no EHR record '" + record_id + "'");
  const auto rec = store_.read_raw(record_id);
  if (rec.content != reading.canonical_bytes())
    throw Error(Errc::EhrRecordMissing, "EHR record '" + record_id + "' does not hold this reading");
  if (!(reading.measured_at >= 0)) throw Error(Errc::InvalidInput, "reading time is negative");

  AlertEvent ev;
  ev.patient = reading.patient;
  ev.rule_id = rule.rule_id;
  ev.ehr_record_hash = rec.content_hash;
  ev.occurred_at = static_cast<std::uint64_t>(std::floor(reading.measured_at));
  ev.severity = rule.severity;
  ev.event_id = alert_event_id(ev.patient, ev.rule_id, ev.ehr_record_hash);

  // Fully determined by the event, so a re-dispatch yields the same tx id.
  auto tx = Transaction::make(TxKind::AlertEvent, ev.body(), static_cast<double>(ev.occurred_at), contract_);
  public_.submit(tx, contract_);

  if (dispatched_.insert(ev.event_id).second) {
    ++stats_.alerts_dispatched;
    for (const auto& [entity, session] : subscribers_) {
      if (access_.check_access(session, ev.patient, Scope::alerts_subscribe, now)) {
        notifications_.push_back({entity, ev});
        ++stats_.notifications;
      } else {
        ++stats_.denied_notifications;
      }
    }
  }
  return ev;
}

std::vector<double> leaked_values(const Ledger& ledger, const std::vector<double>& values) {
  const std::string text = ledger.to_text();
  // Decoded transaction fields; block and submission times are not vitals.
  std::string fields;
  for (BlockDag::Index i = 1; i < ledger.dag().size(); ++i) {
    for (const auto& p : ledger.dag().at(i).payload) {
      for (const auto& [k, v] : Transaction::decode(p).body) {
        fields += k;
        fields += '\n';
        fields += v;
        fields += '\n';
      }
    }
  }

  std::vector<double> sorted(values);
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<double> leaked;
  for (double v : sorted) {
    std::vector<std::string> needles{fixed1(v)};
    if (auto s = format_number(v); s.find('.') != std::string::npos) needles.push_back(s);
    CanonicalWriter w;
    w.f64(v);
    needles.emplace_back(w.data().begin(), w.data().end());
    const bool found = std::any_of(needles.begin(), needles.end(), [&](const std::string& n) {
      return text.find(n) != std::string::npos || fields.find(n) != std::string::npos;
    });
    if (found) leaked.push_back(v);
  }
  return leaked;
}

void DemoConfig::validate() const {
  auto bad = [](const std::string& why) { throw Error(Errc::InvalidConfig, why); };
  if (patients < 1 || patients > 999) bad("patients must be in [1, 999]");
  if (!readings && !(duration > 0)) bad("duration must be positive");
  if (readings && *readings == 0) bad("readings must be positive");
  if (anomaly_probability < 0 || anomaly_probability > 1) bad("anomaly probability must be in [0, 1]");
  if (!(interval > 0) || !(window > 0)) bad("interval and window must be positive");
  if (out_dir.empty()) bad("an output directory is required");
  for (const auto& r : rules) r.validate();
}

std::string demo_patient(std::uint32_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "p-%03u", i + 1);
  return buf;
}

std::vector<ThresholdRule> default_rules(std::uint32_t patients) {
  std::vector<ThresholdRule> rules;
  for (std::uint32_t p = 0; p < patients; ++p) {
    std::uint32_t n = 0;
    for (auto v : kAllVitals) {
      const auto b = default_bounds(v);
      rules.push_back({"r-" + demo_patient(p) + "-" + std::to_string(++n), demo_patient(p), v, b.min, b.max,
                       b.severity});
    }
  }
  return rules;
}

std::string DemoReport::json() const {
  nlohmann::ordered_json j;
  j["readings"] = stats.readings;
  j["normal"] = stats.normal;
  j["abnormal"] = stats.abnormal;
  j["unevaluated"] = stats.unevaluated;
  j["alerts_dispatched"] = stats.alerts_dispatched;
  j["public_events"] = public_events;
  j["notifications"] = stats.notifications;
  j["denied_notifications"] = stats.denied_notifications;
  j["private_txs"] = private_txs;
  j["private_blocks"] = private_blocks;
  j["public_blocks"] = public_blocks;
  j["max_alert_seal_lag"] = max_alert_seal_lag;
  j["leaked_values"] = leaked_values;
  j["ehr_records"] = ehr_records;
  return j.dump() + "\n";
}

DemoReport run_demo(const DemoConfig& config) {
  config.validate();
  const auto& dir = config.out_dir;
  if (std::filesystem::exists(dir) && !std::filesystem::is_empty(dir))
    throw Error(Errc::InvalidConfig, "output directory " + dir.string() + " is not empty");
  std::filesystem::create_directories(dir);

  const auto rules = config.rules.empty() ? default_rules(config.patients) : config.rules;
  const EntityId contract = "contract-rpm", acl = "acl-service";
  const EntityId private_sealer = "sealer-private", public_sealer = "sealer-public";

  // Roster: token credentials for patients, insurer and services; Ed25519 for providers.
  Roster roster;
  nlohmann::ordered_json credentials;
  auto add_token = [&](const EntityId& id, Role role) {
    CanonicalWriter w;
    w.str("demo-token").u64(config.seed).str(id);
    const auto token = sha256(w.data()).hex();
    roster.add({id, role, {sha256(token), {}}});
    credentials[id] = token;
  };
  std::vector<EntityId> patients;
  std::vector<Ed25519KeyPair> provider_keys;
  for (std::uint32_t p = 0; p < config.patients; ++p) {
    patients.push_back(demo_patient(p));
    add_token(patients.back(), Role::patient);
    CanonicalWriter w;
    w.str("demo-provider-key").u64(config.seed).u64(p);
    provider_keys.push_back(ed25519_from_seed(sha256(w.data()).bytes()));
    roster.add({"dr-" + patients.back().substr(2), Role::healthcare_provider, {std::nullopt, provider_keys.back().public_key}});
  }
  add_token("insurer-01", Role::insurer);
  for (const auto& id : {contract, acl, private_sealer, public_sealer}) add_token(id, Role::sealer_node);

  Ledger priv(Visibility::Private, {contract, acl, private_sealer});
  Ledger pub(Visibility::Public, {contract, public_sealer});
  priv.attach_file(dir / "private.ledger");
  pub.attach_file(dir / "public.ledger");
  EhrStore store(dir / "ehr");

  CanonicalWriter key;
  key.str("demo-session-key").u64(config.seed);
  AccessControl access(roster, Bytes(sha256(key.data()).bytes().begin(), sha256(key.data()).bytes().end()));
  access.attach_ledger(&priv, acl);
  RpmPipeline pipeline(store, priv, pub, access, contract);

  struct Subscriber {
    EntityId id;
    std::optional<Ed25519KeyPair> keys;
    Session session;
  };
  std::vector<Subscriber> subscribers;
  auto login = [&](Subscriber& s, SimTime now) {
    if (s.keys) {
      auto c = access.issue_challenge(s.id);
      s.session = access.authenticate(s.id, SignatureProof{c, ed25519_sign(s.keys->private_key, c)}, now);
    } else {
      s.session = access.authenticate(s.id, TokenProof{credentials[s.id].get<std::string>()}, now);
    }
  };
  for (std::uint32_t p = 0; p < config.patients; ++p) {
    auto session = access.authenticate(patients[p], TokenProof{credentials[patients[p]].get<std::string>()}, 0);
    const EntityId provider = "dr-" + patients[p].substr(2);
    access.grant(session.token, provider, Scope::alerts_subscribe, 0);
    access.grant(session.token, provider, Scope::ehr_read, 0);
    subscribers.push_back({provider, provider_keys[p], {}});
  }
  subscribers.push_back({"insurer-01", std::nullopt, {}});
  for (auto& s : subscribers) {
    login(s, 0);
    pipeline.subscribe(s.id, s.session.token);
  }
  priv.seal_block(private_sealer, 0);

  // Readings: one device per (patient, vital).
  const std::size_t devices = static_cast<std::size_t>(config.patients) * kAllVitals.size();
  std::vector<VitalReading> readings;
  std::size_t d = 0;
  for (const auto& patient : patients) {
    for (auto v : kAllVitals) {
      std::size_t count;
      if (config.readings) {
        count = *config.readings / devices + (d < *config.readings % devices ? 1 : 0);
      } else {
        count = static_cast<std::size_t>(std::ceil(config.duration / config.interval));
      }
      ++d;
      auto b = default_bounds(v);
      for (const auto& r : rules)
        if (r.patient == patient && r.vital == v) {
          b = {r.min, r.max, r.severity};
          break;
        }
      DeviceProfile profile{(b.min + b.max) / 2, (b.max - b.min) / 8, config.anomaly_probability, b.min, b.max,
                            config.interval, 0, "dev-" + patient + "-" + std::string(to_string(v))};
      auto stream = simulate_device(patient, v, profile, derive_seed(config.seed, patient, to_string(v)), count);
      readings.insert(readings.end(), stream.begin(), stream.end());
    }
  }
  std::stable_sort(readings.begin(), readings.end(),
                   [](const VitalReading& a, const VitalReading& b) { return a.measured_at < b.measured_at; });
  write_file(dir / "readings.jsonl", readings_jsonl(readings));
  write_file(dir / "rules.json", rules_json(rules));
  write_file(dir / "roster.json", roster.to_json());
  write_file(dir / "credentials.json", credentials.dump(2) + "\n");

  const auto batches = aggregate(readings, config.window);
  for (std::size_t i = 0; i < batches.size();) {
    const SimTime now = batches[i].window_end;
    for (auto& s : subscribers) {
      if (now >= s.session.expires_at - config.window) {
        login(s, now);
        pipeline.update_session(s.id, s.session.token);
      }
    }
    for (; i < batches.size() && batches[i].window_end == now; ++i) pipeline.process(batches[i], rules, now);
    do {
      priv.seal_block(private_sealer, now);
    } while (priv.pending_size() > 0);
    do {
      pub.seal_block(public_sealer, now);
    } while (pub.pending_size() > 0);
  }

  DemoReport report;
  report.stats = pipeline.stats();
  report.private_txs = priv.confirmed().size();
  report.private_blocks = priv.dag().size() - 1;
  report.public_blocks = pub.dag().size() - 1;
  report.ehr_records = store.size();

  std::map<Digest, SimTime> evaluated_at;
  for (const auto& c : priv.confirmed()) {
    if (c.tx.kind == TxKind::RuleEvaluation && c.tx.body.at("verdict") == "Abnormal")
      evaluated_at.emplace(Digest::from_hex(c.tx.body.at("event_id")), parse_number(c.tx.body.at("evaluated_at")));
  }
  std::vector<SimTime> public_seal_times;
  for (BlockDag::Index i = 1; i < pub.dag().size(); ++i) public_seal_times.push_back(pub.dag().at(i).timestamp);
  for (const auto& c : pub.confirmed()) {
    if (c.tx.kind != TxKind::AlertEvent) continue;
    ++report.public_events;
    const auto ev = AlertEvent::from_body(c.tx.body);
    const SimTime sealed = pub.dag().block(c.block).timestamp;
    auto it = evaluated_at.find(ev.event_id);
    const SimTime from = it == evaluated_at.end() ? 0 : it->second;
    const auto lag = static_cast<std::size_t>(std::count_if(public_seal_times.begin(), public_seal_times.end(),
                                                            [&](SimTime t) { return t >= from && t <= sealed; }));
    report.max_alert_seal_lag = std::max(report.max_alert_seal_lag, lag);
  }
  std::vector<double> values;
  values.reserve(readings.size());
  for (const auto& r : readings) values.push_back(r.value);
  report.leaked_values = leaked_values(pub, values).size();
  write_file(dir / "summary.json", report.json());
  return report;
}

}  // namespace rpmdag
