#include "doctest.h"
#include "emvsim/card.h"
#include "emvsim/environment.h"
#include "emvsim/fixtures.h"

namespace emvsim {
namespace {

struct Bench {
  explicit Bench(std::string_view card_id, uint64_t seed = 1)
      : world(load_issuer("permissive_2019"), seed), card(world.add_card(load_card(card_id))) {}

  Message send(Message cmd) { return card.handle(cmd); }

  Message select(const Aid& aid) {
    DataElementMap p;
    p.set<Tag::kAid>(aid);
    return send(Message::command(MsgName::kSelect, std::move(p)));
  }

  Message gpo(const Amount& amount, const Ttq& ttq) {
    DataElementMap p;
    put_amount(p, amount);
    p.set<Tag::kTtq>(ttq);
    p.set<Tag::kUnT>({world.rng().u32(), std::nullopt});
    return send(Message::command(MsgName::kGpo, std::move(p)));
  }

  Message verify(std::optional<std::string> guess) {
    DataElementMap p;
    if (guess) p.set<Tag::kPinGuess>({*guess});
    return send(Message::command(MsgName::kVerify, std::move(p)));
  }

  World world;
  Card& card;
};

Ttq reader_ttq(bool cvm_required) {
  Ttq t;
  t.online_pin_supported = true;
  t.signature_supported = true;
  t.cvm_required = cvm_required;
  t.emv_mode_supported = true;
  return t;
}

TEST_CASE("select lists applications and returns the kernel PDOL") {
  Bench b("mastercard_cda");
  Message list = b.send(Message::command(MsgName::kSelect));
  REQUIRE(list.ok());
  CHECK(list.payload.get<Tag::kAidList>().aids == std::vector<Aid>{kAidMastercard});
  Message sel = b.select(kAidMastercard);
  CHECK(sel.payload.get<Tag::kPdol>() == pdol_for_kernel(2));
  CHECK(b.select(kAidVisa).status == sw::kNotFound);
}

TEST_CASE("kernel-3 GPO returns an AC the issuer key reproduces") {
  Bench b("visa_plastic_no_fdda");
  b.select(kAidVisa);
  DataElementMap p;
  put_amount(p, {2000, "EUR"});
  const Ttq ttq = reader_ttq(false);
  p.set<Tag::kTtq>(ttq);
  p.set<Tag::kUnT>({1234, std::nullopt});
  Message rsp = b.send(Message::command(MsgName::kGpo, p));
  REQUIRE(rsp.ok());
  const Atc atc = rsp.payload.get<Tag::kAtc>();
  CHECK(atc.value == 1);

  const CardProfile& prof = b.card.profile();
  const auto cov = ac_coverage(3, prof.ac_covers_ttq, prof.ac_covers_aid);
  DataElementMap in = p.project(cov);
  in.set<Tag::kAip>(rsp.payload.get<Tag::kAip>());
  in.set<Tag::kAtc>(atc);
  in.set<Tag::kIad>(rsp.payload.get<Tag::kIad>());
  const IssuerCardRecord* rec = b.world.issuer().card(prof.pan);
  REQUIRE(rec);
  CHECK(verify_ac(kdf(rec->mk, atc), cov, in, rsp.payload.get<Tag::kAc>().value));
}

TEST_CASE("ATC strictly increases across transactions") {
  Bench b("visa_plastic_no_fdda");
  uint16_t last = 0;
  for (int i = 0; i < 20; ++i) {
    b.select(kAidVisa);
    Message rsp = b.gpo({100, "EUR"}, reader_ttq(false));
    REQUIRE(rsp.ok());
    CHECK(rsp.payload.get<Tag::kAtc>().value == last + 1);
    last = rsp.payload.get<Tag::kAtc>().value;
  }
}

TEST_CASE("plastic card asks for online PIN when the reader requires a CVM") {
  Bench b("visa_plastic_no_fdda");
  b.select(kAidVisa);
  Ctq ctq = b.gpo({10000, "EUR"}, reader_ttq(true)).payload.get<Tag::kCtq>();
  CHECK(ctq.online_pin_required);
  CHECK_FALSE(ctq.cdcvm_performed);
  b.select(kAidVisa);
  ctq = b.gpo({100, "EUR"}, reader_ttq(false)).payload.get<Tag::kCtq>();
  CHECK_FALSE(ctq.online_pin_required);
}

TEST_CASE("foreign-currency waiver only applies to foreign amounts") {
  Bench b("visa_credit_foreign_nocvm");
  b.select(kAidVisa);
  CHECK_FALSE(b.gpo({10000, "USD"}, reader_ttq(true)).payload.get<Tag::kCtq>().online_pin_required);
  b.select(kAidVisa);
  CHECK(b.gpo({10000, "EUR"}, reader_ttq(true)).payload.get<Tag::kCtq>().online_pin_required);
}

TEST_CASE("offline PIN counter, block and reset") {
  Bench b("visa_plastic_no_fdda");
  CHECK(b.verify("0000").status == sw::kNotSupported);
  b.card.mutable_profile().offline_pin_enabled = true;
  const std::string pin = b.card.profile().pin;
  CHECK(b.verify(std::nullopt).payload.get<Tag::kPinTryCounter>().value == 3);
  const std::string wrong = pin == "0000" ? "0001" : "0000";
  CHECK(b.verify(wrong).payload.get<Tag::kVerifyResult>() == VerifyResult{VerifyKind::kWrong, 2});
  CHECK(b.verify(pin).payload.get<Tag::kVerifyResult>().kind == VerifyKind::kCorrect);
  CHECK(b.verify(std::nullopt).payload.get<Tag::kPinTryCounter>().value == 3);
  b.verify(wrong);
  b.verify(wrong);
  CHECK(b.verify(wrong).payload.get<Tag::kVerifyResult>().kind == VerifyKind::kBlocked);
  CHECK(b.card.profile().blocked());
  // Blocked is absorbing even for the right PIN.
  CHECK(b.verify(pin).payload.get<Tag::kVerifyResult>().kind == VerifyKind::kBlocked);
  b.select(kAidVisa);
  CHECK(b.gpo({100, "EUR"}, reader_ttq(false)).status == sw::kBlocked);
  CHECK(b.world.trace().markers(marker::kCardBlocked).size() == 1);
}

TEST_CASE("unlimited-try profile never blocks") {
  Bench b("visa_plastic_no_fdda");
  b.card.mutable_profile().offline_pin_enabled = true;
  b.card.mutable_profile().pin_try_limit = 0;
  for (int i = 0; i < 50; ++i) {
    const std::string g = std::to_string(1000 + i);
    if (g == b.card.profile().pin) continue;
    CHECK(b.verify(g).payload.get<Tag::kVerifyResult>().remaining == 0xFF);
  }
  CHECK_FALSE(b.card.profile().blocked());
}

TEST_CASE("locked wallets") {
  SUBCASE("google-like answers when no CVM is required and claims CDCVM") {
    Bench b("google_like");
    b.card.set_lock(LockState::kLocked);
    b.select(kAidVisa);
    CHECK(b.gpo({10000, "EUR"}, reader_ttq(true)).status == sw::kRefused);
    b.select(kAidVisa);
    Message rsp = b.gpo({10000, "EUR"}, reader_ttq(false));
    REQUIRE(rsp.ok());
    CHECK(rsp.payload.get<Tag::kCtq>().cdcvm_performed);
    // Locked: no genuine CVM happened.
    CHECK(b.world.trace().markers(marker::kCvmEvent).empty());
  }
  SUBCASE("apple-like needs the transit magic bytes and the ODA-for-online bit") {
    Bench b("apple_like");
    b.card.set_lock(LockState::kLocked);
    Ttq ttq = reader_ttq(false);
    ttq.oda_for_online_supported = true;
    b.select(kAidVisa);
    CHECK(b.gpo({10000, "EUR"}, ttq).status == sw::kRefused);
    DataElementMap m;
    m.set<Tag::kMagicBytes>({b.card.profile().transit_magic_bytes});
    b.send(Message::command(MsgName::kMagicBytes, m));
    CHECK(b.world.trace().markers(marker::kMagicGateOpen).size() == 1);
    b.select(kAidVisa);
    CHECK(b.gpo({10000, "EUR"}, reader_ttq(false)).status == sw::kRefused);
    b.select(kAidVisa);
    Message rsp = b.gpo({10000, "EUR"}, ttq);
    REQUIRE(rsp.ok());
    CHECK_FALSE(rsp.payload.get<Tag::kCtq>().cdcvm_performed);
  }
  SUBCASE("samsung-like only answers zero amounts") {
    Bench b("samsung_like");
    b.card.set_lock(LockState::kLocked);
    DataElementMap m;
    m.set<Tag::kMagicBytes>({b.card.profile().transit_magic_bytes});
    b.send(Message::command(MsgName::kMagicBytes, m));
    b.select(kAidVisa);
    CHECK(b.gpo({100, "EUR"}, reader_ttq(false)).status == sw::kRefused);
    b.select(kAidVisa);
    CHECK(b.gpo({0, "EUR"}, reader_ttq(false)).ok());
  }
  SUBCASE("unlocked phone performs CDCVM") {
    Bench b("google_like");
    b.select(kAidVisa);
    REQUIRE(b.gpo({10000, "EUR"}, reader_ttq(true)).ok());
    CHECK(b.world.trace().markers(marker::kCvmEvent).size() == 1);
  }
}

TEST_CASE("track data in EMV records follows the profile") {
  Bench b("visa_plastic_no_fdda");
  CardProfile p = b.card.profile();
  p.track_data_in_emv = false;
  for (const auto& [nr, rec] : build_records(p)) CHECK_FALSE(rec.has(Tag::kTrack2Equivalent));
  p.track_data_in_emv = true;
  bool found = false;
  for (const auto& [nr, rec] : build_records(p)) found = found || rec.has(Tag::kTrack2Equivalent);
  CHECK(found);
}

TEST_CASE("CVC3 answers need the configured UN digit count") {
  Bench b("magstripe_only");
  b.select(kAidMastercard);
  DataElementMap p;
  p.set<Tag::kMagstripeUn>({123, 3});
  Message ok = b.send(Message::command(MsgName::kComputeCc, p));
  REQUIRE(ok.ok());
  CHECK(ok.payload.get<Tag::kCvc3>().value ==
        compute_cvc3(b.card.profile().magstripe->key, ok.payload.get<Tag::kAtc>(), {123, 3}));
  DataElementMap q;
  q.set<Tag::kMagstripeUn>({123, 4});
  CHECK(b.send(Message::command(MsgName::kComputeCc, q)).status == sw::kWrongData);
  Bench e("visa_plastic_no_fdda");
  CHECK(e.send(Message::command(MsgName::kComputeCc, p)).status == sw::kNotSupported);
}

TEST_CASE("mag-stripe clone answers only harvested UNs and hides EMV mode") {
  Cvc3Table table;
  table.n_digits = 3;
  table.entries[7] = {Atc{9}, Bytes(8, 0xAB)};
  HarvestedCard data;
  data.aids = {kAidMastercard};
  data.aip.emv_mode_supported = true;
  MagstripeClone clone = build_magstripe_clone(table, data);
  DataElementMap sel;
  sel.set<Tag::kAid>(kAidMastercard);
  REQUIRE(clone.handle(Message::command(MsgName::kSelect, sel)).ok());
  Message gpo = clone.handle(Message::command(MsgName::kGpo));
  CHECK_FALSE(gpo.payload.get<Tag::kAip>().emv_mode_supported);
  DataElementMap hit;
  hit.set<Tag::kMagstripeUn>({7, 3});
  CHECK(clone.handle(Message::command(MsgName::kComputeCc, hit)).ok());
  DataElementMap miss;
  miss.set<Tag::kMagstripeUn>({8, 3});
  CHECK(clone.handle(Message::command(MsgName::kComputeCc, miss)).status == sw::kWrongData);
}

TEST_CASE("profile consistency checks") {
  CardProfile p = load_card("visa_plastic_no_fdda");
  p.aids.clear();
  CHECK_THROWS_AS(p.check(), ConfigError);
}

}  // namespace
}  // namespace emvsim
