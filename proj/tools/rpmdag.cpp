#include "cli_config.hpp"

#include "rpmdag/access.hpp"
#include "rpmdag/cluster_oracle.hpp"
#include "rpmdag/dag_text.hpp"
#include "rpmdag/ehr.hpp"
#include "rpmdag/error.hpp"
#include "rpmdag/ghostdag.hpp"
#include "rpmdag/ledger.hpp"
#include "rpmdag/netsim.hpp"
#include "rpmdag/rpm.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <functional>
#include <future>
#include <iostream>

using namespace rpmdag;
namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <typename T>
CLI::Option* add(CLI::App* app, const std::string& flag, T& var, const std::string& desc) {
  return app->add_option(flag, var, desc)->envname(cli::env_name(flag))->capture_default_str();
}

void need(const std::string& value, const std::string& flag) {
  if (value.empty()) throw UsageError(flag + " is required");
}

void write_or_print(const std::string& text, const std::string& out) {
  if (out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(out, std::ios::binary | std::ios::trunc);
  f << text;
  if (!f) throw Error(Errc::IoError, "cannot write " + out);
}

std::vector<std::pair<std::string, BlockId>> sorted_labels(const LabeledDag& d) {
  std::vector<std::pair<std::string, BlockId>> out;
  for (const auto& id : d.dag.insertion_order()) out.emplace_back(d.label(id), id);
  std::sort(out.begin(), out.end());
  return out;
}

// ---- dag / color / oracle -------------------------------------------------

struct DagArgs {
  std::string dag;
  std::string out;
  std::uint32_t k = 3;
};

int cmd_dag_import(const DagArgs& a) {
  need(a.dag, "--dag");
  const auto d = load_dag_file(a.dag);
  std::string text;
  for (const auto& id : d.dag.insertion_order()) text += d.label(id) + " " + id.hex() + "\n";
  write_or_print(text, a.out);
  return 0;
}

int cmd_dag_export(const DagArgs& a) {
  need(a.dag, "--dag");
  write_or_print(to_dag_text(load_dag_file(a.dag)), a.out);
  return 0;
}

int cmd_dag_dot(const DagArgs& a) {
  need(a.dag, "--dag");
  write_or_print(to_dot(load_dag_file(a.dag)), a.out);
  return 0;
}

int cmd_color(const DagArgs& a) {
  need(a.dag, "--dag");
  const auto d = load_dag_file(a.dag);
  const auto coloring = ghostdag_color(d.dag, {a.k});
  std::string text;
  for (const auto& [label, id] : sorted_labels(d))
    text += label + (coloring.is_blue(id) ? " blue " : " red ") + std::to_string(coloring.blue_score.at(id)) + "\n";
  write_or_print(text, a.out);
  return 0;
}

int cmd_oracle(const DagArgs& a) {
  need(a.dag, "--dag");
  const auto d = load_dag_file(a.dag);
  const auto cluster = max_k_cluster_bruteforce(d.dag, a.k);
  std::string text;
  for (const auto& [label, id] : sorted_labels(d)) text += label + (cluster.count(id) ? " blue\n" : " red\n");
  write_or_print(text, a.out);
  return 0;
}

// ---- sim ------------------------------------------------------------------

struct SimArgs {
  SimConfig config;
  std::string mode = "blockdag";
  std::vector<double> lambdas{0.2, 1, 5};
  std::string out;
  std::string trace;
};

int cmd_sim_run(SimArgs a) {
  a.config.mode = parse_sim_mode(a.mode);
  const auto result = run_simulation(a.config);
  const auto json = metrics_json(result.metrics);
  std::cout << json;
  if (!a.out.empty()) write_or_print(json, a.out);
  if (!a.trace.empty()) write_or_print(trace_jsonl(result.trace), a.trace);
  return 0;
}

int cmd_sim_sweep(const SimArgs& a) {
  if (a.lambdas.empty()) throw Error(Errc::InvalidConfig, "lambda sweep is empty");
  a.config.validate();
  std::vector<std::future<std::vector<SweepRow>>> runs;
  for (double lambda : a.lambdas) {
    runs.push_back(std::async(std::launch::async, [config = a.config, lambda] {
      return compare_modes(config, std::span(&lambda, 1));
    }));
  }
  std::vector<SweepRow> rows;
  for (auto& r : runs) {
    auto part = r.get();
    rows.insert(rows.end(), part.begin(), part.end());
  }
  const auto csv = sweep_csv(rows);
  std::cout << csv;
  if (!a.out.empty()) write_or_print(csv, a.out);
  return 0;
}

// ---- ledger ---------------------------------------------------------------

int cmd_ledger_inspect(const std::string& file) {
  need(file, "--file");
  const auto ledger = Ledger::load(file, {});
  for (const auto& c : ledger.confirmed()) {
    nlohmann::ordered_json j;
    j["position"] = c.position;
    j["block"] = c.block.hex();
    j["tx"] = c.tx.id.hex();
    j["kind"] = to_string(c.tx.kind);
    j["author"] = c.tx.author;
    j["submitted_at"] = c.tx.submitted_at;
    j["body"] = c.tx.body;
    std::cout << j.dump() << "\n";
  }
  return 0;
}

// ---- rpm ------------------------------------------------------------------

struct RpmArgs {
  DemoConfig config;
  std::size_t readings = 0;
  std::string rules;
  std::string out_dir;
};

int cmd_rpm_demo(RpmArgs a) {
  need(a.out_dir, "--out-dir");
  a.config.out_dir = a.out_dir;
  if (a.readings > 0) a.config.readings = a.readings;
  if (!a.rules.empty()) a.config.rules = parse_rules_json(read_text_file(a.rules));
  std::cout << run_demo(a.config).json();
  return 0;
}

// ---- ehr ------------------------------------------------------------------

struct EhrArgs {
  std::string dir = ".";
  std::string record;
};

std::string verify_line(const std::string& id, const VerifyResult& r) {
  return id + " " + std::string(to_string(r.status)) + " stored=" + r.stored_hash.hex() +
         " anchored=" + (r.anchored_hash ? r.anchored_hash->hex() : "-") + "\n";
}

int cmd_ehr_verify(const EhrArgs& a) {
  need(a.record, "--record");
  EhrStore store(fs::path(a.dir) / "ehr");
  const auto ledger = Ledger::load(fs::path(a.dir) / "private.ledger", {});
  const auto r = verify(a.record, store, ledger);
  std::cout << verify_line(a.record, r);
  return r.status == VerifyStatus::Tampered ? 1 : 0;
}

int cmd_ehr_audit(const EhrArgs& a) {
  EhrStore store(fs::path(a.dir) / "ehr");
  const auto anchors = AnchorIndex::from_stream(Ledger::load(fs::path(a.dir) / "private.ledger", {}).confirmed());
  std::size_t intact = 0, tampered = 0, missing = 0;
  for (const auto& id : anchors.record_ids()) {
    if (!store.contains(id)) {
      std::cout << id << " Missing\n";
      ++missing;
      continue;
    }
    const auto r = verify(id, store, anchors);
    if (r.status == VerifyStatus::Tampered) {
      std::cout << verify_line(id, r);
      ++tampered;
    } else {
      ++intact;
    }
  }
  const std::size_t unanchored = store.size() - intact - tampered;
  std::cout << "audited " << anchors.size() << " intact " << intact << " tampered " << tampered << " missing "
            << missing << " unanchored " << unanchored << "\n";
  return tampered + missing > 0 ? 1 : 0;
}

// ---- acl ------------------------------------------------------------------

struct AclArgs {
  std::string dir = ".";
  std::string roster;
  std::string ledger;
  std::string patient;
  std::string grantee;
  std::string entity;
  std::string scope;
  std::string grant;
  std::string credential;
  std::string sealer = "sealer-private";
  std::string author = "acl-service";
  double at = -1;
};

struct AclState {
  std::unique_ptr<Ledger> ledger;
  std::unique_ptr<AccessControl> access;
  SimTime now;
};

AclState open_acl(const AclArgs& a) {
  const fs::path roster_path = a.roster.empty() ? fs::path(a.dir) / "roster.json" : fs::path(a.roster);
  const fs::path ledger_path = a.ledger.empty() ? fs::path(a.dir) / "private.ledger" : fs::path(a.ledger);
  auto roster = Roster::from_json(read_text_file(roster_path));
  std::set<EntityId> writers;
  for (const auto& [id, r] : roster.entities())
    if (r.role == Role::sealer_node) writers.insert(id);
  auto ledger = std::make_unique<Ledger>(Ledger::load(ledger_path, writers));
  SimTime latest = 0;
  for (BlockDag::Index i = 0; i < ledger->dag().size(); ++i) latest = std::max(latest, ledger->dag().at(i).timestamp);
  auto access = std::make_unique<AccessControl>(std::move(roster));
  access->restore(fold_access_changes(ledger->confirmed()));
  ledger->attach_file(ledger_path);
  return {std::move(ledger), std::move(access), a.at >= 0 ? a.at : latest};
}

int cmd_acl_grant(const AclArgs& a) {
  need(a.patient, "--patient");
  need(a.grantee, "--grantee");
  need(a.scope, "--scope");
  need(a.credential, "--credential");
  auto s = open_acl(a);
  s.access->attach_ledger(s.ledger.get(), a.author);
  const auto session = s.access->authenticate(a.patient, TokenProof{a.credential}, s.now);
  const auto g = s.access->grant(session.token, a.grantee, parse_scope(a.scope), s.now);
  s.ledger->seal_block(a.sealer, s.now);
  std::cout << g.grant_id << " granted " << g.grantor << " " << g.grantee << " " << to_string(g.scope) << "\n";
  return 0;
}

int cmd_acl_revoke(const AclArgs& a) {
  need(a.grant, "--grant");
  need(a.credential, "--credential");
  auto s = open_acl(a);
  s.access->attach_ledger(s.ledger.get(), a.author);
  const auto table = s.access->grants();
  auto it = table.find(a.grant);
  if (it == table.end()) throw Error(Errc::UnknownGrant, "no grant '" + a.grant + "'");
  const auto session = s.access->authenticate(it->second.grantor, TokenProof{a.credential}, s.now);
  const auto g = s.access->revoke(session.token, a.grant, s.now);
  s.ledger->seal_block(a.sealer, s.now);
  std::cout << g.grant_id << " revoked " << g.grantor << " " << g.grantee << " " << to_string(g.scope) << "\n";
  return 0;
}

int cmd_acl_check(const AclArgs& a) {
  need(a.entity, "--entity");
  need(a.patient, "--patient");
  need(a.scope, "--scope");
  auto s = open_acl(a);
  const auto scope = parse_scope(a.scope);
  bool allowed;
  if (!a.credential.empty()) {
    const auto session = s.access->authenticate(a.entity, TokenProof{a.credential}, s.now);
    allowed = s.access->check_access(session.token, a.patient, scope, s.now);
  } else {
    allowed = s.access->permitted(a.entity, a.patient, scope, s.now);
  }
  std::cout << (allowed ? "allow" : "deny") << "\n";
  return allowed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rpmdag: blockDAG consensus, dual ledgers and remote patient monitoring"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  app.add_option("--config", config_path, "key=value file of flag defaults")->envname("RPMDAG_CONFIG");

  std::function<int()> action;
  auto on = [&](CLI::App* sub, std::function<int()> fn) { sub->callback([&action, fn] { action = fn; }); };

  DagArgs dag_args;
  auto dag_cmd = app.add_subcommand("dag", "DAG text tooling")->require_subcommand(1);
  auto dag_file_opts = [&](CLI::App* sub) {
    add(sub, "--dag", dag_args.dag, "DAG text file");
    add(sub, "--out", dag_args.out, "output file (default stdout)");
  };
  auto dag_import = dag_cmd->add_subcommand("import", "validate a DAG file and list block digests");
  dag_file_opts(dag_import);
  on(dag_import, [&] { return cmd_dag_import(dag_args); });
  auto dag_export = dag_cmd->add_subcommand("export", "re-emit a DAG file in insertion order");
  dag_file_opts(dag_export);
  on(dag_export, [&] { return cmd_dag_export(dag_args); });
  auto dag_dot = dag_cmd->add_subcommand("dot", "Graphviz rendering");
  dag_file_opts(dag_dot);
  on(dag_dot, [&] { return cmd_dag_dot(dag_args); });

  auto color = app.add_subcommand("color", "GHOSTDAG blue/red coloring: <id> <color> <blue_score>");
  dag_file_opts(color);
  add(color, "--k", dag_args.k, "anticone bound k");
  on(color, [&] { return cmd_color(dag_args); });

  auto oracle = app.add_subcommand("oracle", "maximum k-cluster by exhaustive search: <id> <color>");
  dag_file_opts(oracle);
  add(oracle, "--k", dag_args.k, "anticone bound k");
  on(oracle, [&] { return cmd_oracle(dag_args); });

  SimArgs sim_args;
  auto sim = app.add_subcommand("sim", "network simulation")->require_subcommand(1);
  auto sim_common = [&](CLI::App* sub) {
    add(sub, "--nodes", sim_args.config.nodes, "number of miners");
    add(sub, "--delay", sim_args.config.delay_D, "propagation delay");
    add(sub, "--duration", sim_args.config.duration, "simulated time");
    add(sub, "--k", sim_args.config.k, "GHOSTDAG k");
    add(sub, "--seed", sim_args.config.seed, "random seed");
    add(sub, "--txs-per-block", sim_args.config.txs_per_block, "transactions per block");
    add(sub, "--out", sim_args.out, "also write the output here");
  };
  auto sim_run = sim->add_subcommand("run", "one simulation; prints metrics JSON");
  sim_common(sim_run);
  add(sim_run, "--lambda", sim_args.config.rate_lambda, "network block rate");
  add(sim_run, "--mode", sim_args.mode, "blockdag or longest_chain");
  add(sim_run, "--trace", sim_args.trace, "write the event trace as JSON lines");
  on(sim_run, [&] { return cmd_sim_run(sim_args); });
  auto sim_sweep = sim->add_subcommand("sweep", "both modes over a list of rates; prints CSV");
  sim_common(sim_sweep);
  add(sim_sweep, "--lambdas", sim_args.lambdas, "comma-separated rates")->delimiter(',');
  on(sim_sweep, [&] { return cmd_sim_sweep(sim_args); });

  std::string ledger_file;
  auto ledger = app.add_subcommand("ledger", "ledger files")->require_subcommand(1);
  auto inspect = ledger->add_subcommand("inspect", "confirmed stream as JSON lines");
  add(inspect, "--file", ledger_file, "ledger file");
  on(inspect, [&] { return cmd_ledger_inspect(ledger_file); });

  RpmArgs rpm_args;
  auto rpm = app.add_subcommand("rpm", "remote patient monitoring")->require_subcommand(1);
  auto demo = rpm->add_subcommand("demo", "run the full pipeline and print a summary");
  add(demo, "--patients", rpm_args.config.patients, "number of patients");
  add(demo, "--duration", rpm_args.config.duration, "simulated time covered by readings");
  add(demo, "--readings", rpm_args.readings, "total readings (overrides --duration)");
  add(demo, "--anomaly-prob", rpm_args.config.anomaly_probability, "anomaly probability per reading");
  add(demo, "--seed", rpm_args.config.seed, "random seed");
  add(demo, "--window", rpm_args.config.window, "aggregation window");
  add(demo, "--rules", rpm_args.rules, "rules JSON file (default: built-in ranges)");
  add(demo, "--out-dir", rpm_args.out_dir, "empty directory for the store and ledgers");
  on(demo, [&] { return cmd_rpm_demo(rpm_args); });

  EhrArgs ehr_args;
  auto ehr = app.add_subcommand("ehr", "EHR integrity")->require_subcommand(1);
  auto ehr_verify = ehr->add_subcommand("verify", "check one record against its anchor");
  add(ehr_verify, "--dir", ehr_args.dir, "directory written by rpm demo");
  add(ehr_verify, "--record", ehr_args.record, "record id");
  on(ehr_verify, [&] { return cmd_ehr_verify(ehr_args); });
  auto ehr_audit = ehr->add_subcommand("audit", "check every anchored record");
  add(ehr_audit, "--dir", ehr_args.dir, "directory written by rpm demo");
  on(ehr_audit, [&] { return cmd_ehr_audit(ehr_args); });

  AclArgs acl_args;
  auto acl = app.add_subcommand("acl", "access grants")->require_subcommand(1);
  auto acl_common = [&](CLI::App* sub) {
    add(sub, "--dir", acl_args.dir, "directory holding roster.json and private.ledger");
    add(sub, "--roster", acl_args.roster, "roster JSON (default <dir>/roster.json)");
    add(sub, "--ledger", acl_args.ledger, "private ledger (default <dir>/private.ledger)");
    add(sub, "--credential", acl_args.credential, "token of the acting entity");
    add(sub, "--at", acl_args.at, "simulated time (default: latest block)");
    add(sub, "--sealer", acl_args.sealer, "sealer for the audit block");
    add(sub, "--author", acl_args.author, "writer of access-change transactions");
  };
  auto acl_grant = acl->add_subcommand("grant", "patient grants a scope");
  acl_common(acl_grant);
  add(acl_grant, "--patient", acl_args.patient, "granting patient");
  add(acl_grant, "--grantee", acl_args.grantee, "receiving entity");
  add(acl_grant, "--scope", acl_args.scope, "ehr_read, alerts_subscribe or treatment_history");
  on(acl_grant, [&] { return cmd_acl_grant(acl_args); });
  auto acl_revoke = acl->add_subcommand("revoke", "patient revokes a grant");
  acl_common(acl_revoke);
  add(acl_revoke, "--grant", acl_args.grant, "grant id");
  on(acl_revoke, [&] { return cmd_acl_revoke(acl_args); });
  auto acl_check = acl->add_subcommand("check", "exit 0 if allowed, 1 if denied");
  acl_common(acl_check);
  add(acl_check, "--entity", acl_args.entity, "entity asking");
  add(acl_check, "--patient", acl_args.patient, "patient whose data is asked for");
  add(acl_check, "--scope", acl_args.scope, "scope");
  on(acl_check, [&] { return cmd_acl_check(acl_args); });

  try {
    if (auto path = cli::find_config_path(argc, argv)) cli::apply_config(app, cli::load_config_file(*path));
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    return action ? action() : 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\nRun with --help for more information.\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == Errc::InvalidConfig ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
