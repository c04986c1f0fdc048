#include "doctest.h"
#include "emvsim/environment.h"
#include "emvsim/fixtures.h"
#include "emvsim/issuer.h"

namespace emvsim {
namespace {

// Runs one honest transaction and returns the authorization request it sent.
struct Captured {
  Captured(std::string_view card_id, std::string_view issuer_id, uint64_t amount = 2000)
      : world(load_issuer(issuer_id), 3),
        card(world.add_card(load_card(card_id))),
        terminal(world.add_terminal(load_terminal("standard_pos"))) {
    world.trace().begin_run("genuine");
    DirectLink link(world.trace(), card, terminal.name());
    outcome = terminal.run_transaction(link, {{amount, "EUR"}, {"cardholder", card.profile().pin}});
    for (const Event* e : world.trace().events()) {
      if (e->sent.name == MsgName::kAuthRequest && e->sent.direction == Direction::kCommand) {
        request = e->delivered.payload;
      }
    }
  }

  Verdict again(const DataElementMap& req) { return world.issuer().authorize(req); }

  World world;
  Card& card;
  Terminal& terminal;
  TerminalOutcome outcome;
  DataElementMap request;
};

TEST_CASE("honest requests are approved") {
  for (const char* id : {"visa_plastic_no_fdda", "mastercard_cda", "magstripe_only"}) {
    Captured c(id, "hardened");
    CHECK(c.outcome.decision == Decision::kAcceptedOnline);
    CHECK_FALSE(c.request.empty());
  }
}

TEST_CASE("a changed covered field invalidates the cryptogram") {
  Captured c("visa_plastic_no_fdda", "permissive_2019");
  DataElementMap req = c.request;
  req.set<Tag::kAmount>({2001});
  CHECK(c.again(req).reason == "ac_invalid");
  req = c.request;
  req.set<Tag::kUnT>({req.get<Tag::kUnT>().value ^ 1, std::nullopt});
  CHECK(c.again(req).reason == "ac_invalid");
}

TEST_CASE("replay acceptance depends on ATC and UN checks") {
  SUBCASE("permissive issuer approves the same request twice") {
    Captured c("visa_plastic_no_fdda", "permissive_2019");
    CHECK(c.again(c.request).approve);
  }
  SUBCASE("ATC ordering rejects a replay") {
    Captured c("visa_plastic_no_fdda", "permissive_2019");
    c.world.issuer().mutable_policy().check_atc_order = true;
    CHECK(c.again(c.request).reason == "atc_order");
  }
  SUBCASE("UN reuse rejects a replay at the same terminal") {
    Captured c("visa_plastic_no_fdda", "permissive_2019");
    c.world.issuer().mutable_policy().check_un_reuse = true;
    DataElementMap req = c.request;
    CHECK(c.again(req).approve);  // first sighting under the new policy
    CHECK(c.again(req).reason == "un_reuse");
  }
}

TEST_CASE("issuer-side flag checks") {
  Captured c("visa_plastic_no_fdda", "permissive_2019", 10000);
  IssuerPolicy& pol = c.world.issuer().mutable_policy();
  const Atc atc = c.request.get<Tag::kAtc>();
  (void)atc;

  DataElementMap no_pin = c.request;
  no_pin.erase(Tag::kPinBlob);
  CHECK(c.again(no_pin).approve);
  pol.enforce_cvm_limit = true;
  CHECK(c.again(no_pin).reason == "cvm_limit");
  CHECK(c.again(c.request).approve);

  DataElementMap bad_pin = c.request;
  Bytes blob = bad_pin.get<Tag::kPinBlob>().value;
  blob.back() ^= 1;
  bad_pin.set<Tag::kPinBlob>({blob});
  CHECK(c.again(bad_pin).reason == "wrong_pin");

  DataElementMap cdcvm = c.request;
  Ctq ctq = cdcvm.get<Tag::kCtq>();
  ctq.cdcvm_performed = true;
  cdcvm.set<Tag::kCtq>(ctq);
  pol.check_plastic_cdcvm = true;
  CHECK(c.again(cdcvm).reason == "plastic_cdcvm");

  pol.check_aid_pan_match = true;
  CHECK(c.again(c.request).approve);
}

TEST_CASE("unknown PAN and incomplete requests decline") {
  Captured c("visa_plastic_no_fdda", "permissive_2019");
  DataElementMap req = c.request;
  req.set<Tag::kPan>(Pan{"4000002234560025"});
  CHECK(c.again(req).reason == "unknown_pan");
  DataElementMap partial;
  partial.set<Tag::kPan>(c.request.get<Tag::kPan>());
  Message rsp = c.world.issuer().handle(Message::command(MsgName::kAuthRequest, partial));
  CHECK(rsp.payload.get<Tag::kAuthDecision>().value == auth::kDecline);
}

TEST_CASE("clearing verifies the cryptogram") {
  Captured c("mastercard_cda", "permissive_2019");
  DataElementMap rec = c.request;
  CHECK(c.world.issuer().clear(rec).approve);
  Bytes ac = rec.get<Tag::kAc>().value;
  ac[0] ^= 0xFF;
  rec.set<Tag::kAc>({ac});
  CHECK(c.world.issuer().clear(rec).reason == "ac_invalid");
}

}  // namespace
}  // namespace emvsim
