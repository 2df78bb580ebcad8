#include "rpmdag/error.hpp"
#include "rpmdag/ledger.hpp"

#include <gtest/gtest.h>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include <filesystem>
#include <fstream>

using namespace rpmdag;

namespace {

const std::set<EntityId> kWriters{"sealer-1", "sealer-2", "contract"};

TxBody alert_body() {
  return {{"patient", "p-0001"},
          {"rule_id", "r-7"},
          {"ehr_record_hash", std::string(64, 'a')},
          {"occurred_at", "120"},
          {"severity", "urgent"}};
}

Transaction alert(SimTime t = 1) { return Transaction::make(TxKind::AlertEvent, alert_body(), t, "contract"); }

Transaction note(const std::string& tag, SimTime t = 1) {
  return Transaction::make(TxKind::RuleEvaluation, {{"event", tag}}, t, "contract");
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::InvalidInput;
}

std::vector<TxId> stream_ids(const Ledger& l) {
  std::vector<TxId> out;
  for (const auto& c : l.confirmed()) out.push_back(c.tx.id);
  return out;
}

}  // namespace

TEST(Transaction, IdIsContentDigestAndRoundTrips) {
  auto a = note("x");
  auto b = note("x");
  EXPECT_EQ(a.id, b.id);
  EXPECT_NE(a.id, note("y").id);
  EXPECT_NE(a.id, note("x", 2).id);
  EXPECT_EQ(a.id, sha256(a.canonical_bytes()));
  auto back = Transaction::decode(a.canonical_bytes());
  EXPECT_EQ(back.id, a.id);
  EXPECT_EQ(back.body, a.body);
  EXPECT_EQ(back.author, a.author);
  EXPECT_EQ(back.kind, a.kind);

  auto bytes = a.canonical_bytes();
  bytes.push_back(0);
  EXPECT_EQ(code_of([&] { Transaction::decode(bytes); }), Errc::ParseError);
  bytes = a.canonical_bytes();
  bytes[0] = 9;
  EXPECT_EQ(code_of([&] { Transaction::decode(bytes); }), Errc::ParseError);
  EXPECT_EQ(code_of([&] { Transaction::decode(Bytes{}); }), Errc::ParseError);
}

TEST(AlertSchema, AcceptsHashOnlyBody) { EXPECT_NO_THROW(check_alert_body(alert_body())); }

TEST(AlertSchema, RejectsExtraOrMissingFields) {
  auto body = alert_body();
  body["value"] = "140.0";
  EXPECT_EQ(code_of([&] { check_alert_body(body); }), Errc::PhiLeak);
  body = alert_body();
  body.erase("severity");
  EXPECT_EQ(code_of([&] { check_alert_body(body); }), Errc::PhiLeak);
}

TEST(AlertSchema, RejectsHealthDataSmuggledIntoValues) {
  const std::vector<std::pair<std::string, std::string>> bad{
      {"patient", "140.5"},         {"rule_id", "heart_rate-max"}, {"rule_id", "device-3"},
      {"ehr_record_hash", "abc"},   {"occurred_at", "12.5"},       {"occurred_at", ""},
      {"severity", "critical"},     {"patient", "p 1"},            {"ehr_record_hash", std::string(64, 'G')}};
  for (const auto& [field, value] : bad) {
    auto body = alert_body();
    body[field] = value;
    EXPECT_EQ(code_of([&] { check_alert_body(body); }), Errc::PhiLeak) << field << "=" << value;
  }
}

TEST(Ledger, GenesisNamesDigestAlgorithm) {
  Ledger priv(Visibility::Private, kWriters);
  Ledger pub(Visibility::Public, kWriters);
  EXPECT_NE(priv.dag().genesis(), pub.dag().genesis());
  const auto& payload = priv.dag().block(priv.dag().genesis()).payload;
  ASSERT_EQ(payload.size(), 1u);
  CanonicalReader r(payload[0]);
  r.str();
  EXPECT_EQ(r.str(), "digest=sha256");
  EXPECT_EQ(r.str(), "visibility=private");
}

TEST(Ledger, SubmitChecksWriterKindAndSchema) {
  Ledger pub(Visibility::Public, kWriters);
  Ledger priv(Visibility::Private, kWriters);
  auto r = pub.submit(alert(), "contract");
  EXPECT_EQ(r.tx, alert().id);
  EXPECT_EQ(r.pool_position, 0u);
  EXPECT_EQ(pub.submit(alert(2), "contract").pool_position, 1u);

  EXPECT_EQ(code_of([&] { pub.submit(note("x"), "contract"); }), Errc::KindNotAdmissible);
  EXPECT_EQ(code_of([&] { priv.submit(alert(), "contract"); }), Errc::KindNotAdmissible);
  EXPECT_EQ(code_of([&] { pub.submit(alert(), "sealer-1"); }), Errc::Unauthorized);
  auto stranger = Transaction::make(TxKind::AlertEvent, alert_body(), 1, "mallory");
  EXPECT_EQ(code_of([&] { pub.submit(stranger, "mallory"); }), Errc::Unauthorized);

  auto body = alert_body();
  body["heart_rate"] = "140.0";
  auto leaky = Transaction::make(TxKind::AlertEvent, body, 1, "contract");
  EXPECT_EQ(code_of([&] { pub.submit(leaky, "contract"); }), Errc::PhiLeak);
  EXPECT_EQ(pub.pending_size(), 2u);

  auto forged = note("x");
  forged.body["event"] = "y";
  EXPECT_EQ(code_of([&] { priv.submit(forged, "contract"); }), Errc::InvalidInput);
  EXPECT_NO_THROW(priv.submit(note("x"), "contract"));
}

TEST(Ledger, SealEmptyPoolExtendsAllTips) {
  Ledger l(Visibility::Private, kWriters);
  auto a = l.seal_block("sealer-1", 1, std::vector{l.dag().genesis()});
  auto b = l.seal_block("sealer-2", 1, std::vector{l.dag().genesis()});
  EXPECT_EQ(l.dag().tips().size(), 2u);
  auto c = l.seal_block("sealer-1", 2);
  EXPECT_TRUE(c.payload.empty());
  EXPECT_EQ(std::set<BlockId>(c.parents.begin(), c.parents.end()), (std::set<BlockId>{a.id, b.id}));
  EXPECT_EQ(code_of([&] { l.seal_block("contract-x", 3); }), Errc::Unauthorized);
  EXPECT_EQ(code_of([&] { l.seal_block("sealer-1", 3, std::vector{sha256("nope")}); }), Errc::MissingParent);
}

TEST(Ledger, SealDrainsFifoUpToCap) {
  Ledger l(Visibility::Private, kWriters, {}, 2);
  for (auto tag : {"t1", "t2", "t3"}) l.submit(note(tag), "contract");
  auto b = l.seal_block("sealer-1", 1);
  ASSERT_EQ(b.payload.size(), 2u);
  EXPECT_EQ(Transaction::decode(b.payload[0]).id, note("t1").id);
  EXPECT_EQ(Transaction::decode(b.payload[1]).id, note("t2").id);
  EXPECT_EQ(l.pending_size(), 1u);
}

TEST(Ledger, TwoSealsWithoutSubmissions) {
  Ledger l(Visibility::Private, kWriters);
  l.submit(note("t1"), "contract");
  auto first = l.seal_block("sealer-1", 1);
  auto second = l.seal_block("sealer-1", 2);
  EXPECT_TRUE(second.payload.empty());
  EXPECT_TRUE(l.dag().past(second.id).count(first.id));
}

TEST(Confirmed, EmptyAndChain) {
  Ledger l(Visibility::Private, kWriters);
  EXPECT_TRUE(l.confirmed().empty());
  l.submit(note("t1"), "contract");
  auto b1 = l.seal_block("sealer-1", 1);
  l.submit(note("t2"), "contract");
  auto b2 = l.seal_block("sealer-1", 2);
  auto s = l.confirmed();
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].tx.id, note("t1").id);
  EXPECT_EQ(s[0].block, b1.id);
  EXPECT_EQ(s[0].position, 1u);
  EXPECT_EQ(s[1].tx.id, note("t2").id);
  EXPECT_EQ(s[1].block, b2.id);
  EXPECT_EQ(s[1].position, 2u);
}

TEST(Confirmed, DuplicateInParallelBlocksAppearsOnceAtEarlierPosition) {
  Ledger l(Visibility::Private, kWriters);
  const auto g = l.dag().genesis();
  l.submit(note("dup"), "contract");
  auto a = l.seal_block("sealer-1", 1, std::vector{g});
  l.submit(note("dup"), "contract");
  l.submit(note("other"), "contract");
  auto b = l.seal_block("sealer-2", 1, std::vector{g});
  // Both tips have blue score 2; the order visits the tip with the smaller id
  // first as selected parent, then the other one in the virtual mergeset.
  const BlockId earlier = std::min(a.id, b.id);
  auto s = l.confirmed();
  std::size_t dup_count = 0;
  for (const auto& c : s) {
    if (c.tx.id == note("dup").id) {
      ++dup_count;
      EXPECT_EQ(c.block, earlier);
      EXPECT_EQ(c.position, 1u);
    }
  }
  EXPECT_EQ(dup_count, 1u);
  EXPECT_EQ(s.size(), 2u);
}

TEST(Confirmed, StablePrefixAsDagGrows) {
  boost::random::mt19937_64 rng(17);
  Ledger l(Visibility::Private, kWriters);
  std::map<BlockId, std::vector<TxId>> settled;  // block -> txs confirmed in it
  int counter = 0;
  for (int step = 0; step < 60; ++step) {
    const int fan = boost::random::uniform_int_distribution<int>(1, 3)(rng);
    const auto tips = l.dag().tips();
    for (int f = 0; f < fan; ++f) {
      l.submit(note("s" + std::to_string(counter++)), "contract");
      l.seal_block(f % 2 ? "sealer-2" : "sealer-1", step, std::vector<BlockId>(tips.begin(), tips.end()));
    }
    const auto stream = l.confirmed();
    const auto& current_tips = l.dag().tips();
    std::map<BlockId, std::vector<TxId>> now;
    for (const auto& c : stream) now[c.block].push_back(c.tx.id);
    for (const auto& [block, txs] : settled) EXPECT_EQ(now[block], txs);
    // A block whose anticone holds no tip keeps its position forever.
    for (const auto& [block, txs] : now) {
      const auto anti = l.dag().anticone(block);
      bool deep = std::none_of(current_tips.begin(), current_tips.end(),
                               [&](const BlockId& t) { return anti.count(t) != 0; });
      if (deep && !current_tips.count(block)) settled.emplace(block, txs);
    }
  }
  EXPECT_GT(settled.size(), 20u);
}

TEST(Confirmed, NoFabrication) {
  Ledger l(Visibility::Private, kWriters);
  std::set<TxId> submitted;
  for (int i = 0; i < 25; ++i) {
    auto tx = note("n" + std::to_string(i % 20), i);
    submitted.insert(tx.id);
    l.submit(tx, "contract");
    if (i % 4 == 0) l.seal_block("sealer-1", i);
  }
  l.seal_block("sealer-2", 99);
  auto s = l.confirmed();
  EXPECT_EQ(s.size(), submitted.size());
  for (const auto& c : s) EXPECT_TRUE(submitted.count(c.tx.id));
}

TEST(LedgerFile, TextRoundTripAndAppend) {
  const auto dir = std::filesystem::temp_directory_path() / "rpmdag_test_ledger";
  std::filesystem::create_directories(dir);
  const auto path = dir / "private.ledger";
  Ledger l(Visibility::Private, kWriters);
  l.attach_file(path);
  l.submit(note("t1"), "contract");
  l.submit(note("t2"), "contract");
  l.seal_block("sealer-1", 5);
  l.seal_block("sealer-2", 6);

  auto back = Ledger::load(path, kWriters);
  EXPECT_EQ(back.visibility(), Visibility::Private);
  EXPECT_EQ(back.dag().insertion_order(), l.dag().insertion_order());
  EXPECT_EQ(stream_ids(back), stream_ids(l));
  EXPECT_EQ(back.to_text(), l.to_text());

  auto text = l.to_text();
  auto pos = text.find("\tsealer-1\t");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 10, "\tsealer-9\t");
  EXPECT_EQ(code_of([&] { Ledger::from_text(text, kWriters); }), Errc::InvalidInput);
  EXPECT_EQ(code_of([&] { Ledger::from_text("garbage\n", kWriters); }), Errc::ParseError);
  EXPECT_EQ(code_of([&] { Ledger::from_text("", kWriters); }), Errc::ParseError);
  std::filesystem::remove_all(dir);
}

TEST(LedgerImport, ValidatesForeignBlocks) {
  Ledger a(Visibility::Public, kWriters);
  Ledger b(Visibility::Public, kWriters);
  a.submit(alert(), "contract");
  auto blk = a.seal_block("sealer-1", 1);
  b.import_block(blk);
  EXPECT_EQ(stream_ids(a), stream_ids(b));

  auto leaky_body = alert_body();
  leaky_body["glucose"] = "250.0";
  auto leaky = Transaction::make(TxKind::AlertEvent, leaky_body, 1, "contract");
  auto bad = Block::make({b.dag().genesis()}, {leaky.canonical_bytes()}, 2, "sealer-1");
  EXPECT_EQ(code_of([&] { b.import_block(bad); }), Errc::PhiLeak);
  auto rogue = Block::make({b.dag().genesis()}, {}, 2, "mallory");
  EXPECT_EQ(code_of([&] { b.import_block(rogue); }), Errc::Unauthorized);
}
