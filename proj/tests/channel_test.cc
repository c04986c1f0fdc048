#include <sstream>

#include "doctest.h"
#include "emvsim/channel.h"
#include "emvsim/trace_io.h"

namespace emvsim {
namespace {

// Answers SELECT with a fixed AID and counts what it saw.
class EchoCard : public CardEndpoint {
 public:
  std::string endpoint_name() const override { return "echo"; }
  Message handle(const Message& cmd) override {
    seen.push_back(cmd);
    if (cmd.name == MsgName::kSelect) {
      DataElementMap p;
      p.set<Tag::kAid>(kAidVisa);
      return Message::response(MsgName::kSelect, std::move(p));
    }
    return Message::error(cmd.name, sw::kNotSupported);
  }
  int processing_latency(MsgName) const override { return 2; }
  std::vector<Message> seen;
};

class DropAid : public Interceptor {
 public:
  std::string_view name() const override { return "drop_aid"; }
  Message on_response(const Message&, const Message& rsp) override {
    Message out = rsp;
    out.payload.set<Tag::kAid>(kAidMastercard);
    return out;
  }
};

TEST_CASE("trace indices and runs") {
  Trace t;
  CHECK(t.begin_run("genuine") == 1);
  t.mark("note", "test");
  t.set_recording(false);
  t.mark("hidden", "test");
  t.set_recording(true);
  const Marker& m = t.mark("note", "test");
  CHECK(m.index == 3);
  CHECK(m.run == 1);
  CHECK(t.markers("hidden").empty());
  CHECK(t.markers("note").size() == 2);
  CHECK(t.markers(marker::kSession).front()->attr("kind") == "genuine");
}

TEST_CASE("message legality") {
  DataElementMap p;
  p.set<Tag::kPinGuess>({"1234"});
  CHECK_THROWS_AS(check_legal(Message::command(MsgName::kSelect, p)), CodecError);
  Message err = Message::error(MsgName::kGpo, sw::kRefused);
  err.payload.set<Tag::kAtc>(Atc{1});
  CHECK_THROWS_AS(check_legal(err), CodecError);
}

TEST_CASE("direct link records both directions with latency") {
  Trace t;
  t.begin_run("genuine");
  EchoCard card;
  DirectLink link(t, card, "reader");
  Exchange x = link.exchange(Message::command(MsgName::kSelect));
  CHECK(x.latency() == 3);
  auto ev = t.events();
  REQUIRE(ev.size() == 2);
  CHECK(ev[0]->from == "reader");
  CHECK(ev[1]->to == "reader");
  CHECK(ev[1]->latency == 3);
  CHECK_FALSE(ev[0]->relay_active);
}

TEST_CASE("adversary capabilities and knowledge") {
  Trace t;
  Adversary adv(t, {Capability::kA1});
  CHECK_THROWS_AS(adv.require(Capability::kA5, "rogue"), ConfigError);
  adv.require(Capability::kA1, "relay");
  adv.require(Capability::kA1, "again");
  CHECK(t.markers(marker::kCapabilityUse).size() == 1);
  adv.learn("pan", "4000001234560019");
  adv.learn("pan", "4000001234560019");
  CHECK(t.markers(marker::kKnowledgeAdd).size() == 1);
  CHECK(adv.knows("pan"));
  CHECK_THROWS_AS(adv.visual_read({Pan{"4000001234560019"}, {28, 12}, "123"}), ConfigError);
}

TEST_CASE("eavesdropper needs A1 and learns plaintext fields") {
  Trace t;
  EchoCard card;
  DirectLink link(t, card, "reader");
  Adversary none(t, {});
  CHECK_THROWS_AS(link.attach_eavesdropper(none), ConfigError);
  Adversary adv(t, {Capability::kA1});
  link.attach_eavesdropper(adv);
  DataElementMap p;
  p.set<Tag::kPan>(Pan{"4000001234560019"});
  adv.observe(Message::response(MsgName::kReadRecord, p));
  CHECK(adv.knows("pan"));
}

TEST_CASE("relay link marks relay, adds overhead and applies interceptors") {
  Trace t;
  t.begin_run("attack");
  EchoCard card;
  Adversary adv(t, {Capability::kA1});
  RelayLink link(t, adv, card, "reader");
  link.attach(std::make_shared<DropAid>());
  Exchange x = link.exchange(Message::command(MsgName::kSelect));
  CHECK(x.latency() == 1 + 1 + 2);
  CHECK(x.response.payload.get<Tag::kAid>() == kAidMastercard);
  auto ev = t.events();
  REQUIRE(ev.size() == 2);
  CHECK(ev[1]->relay_active);
  CHECK(ev[1]->sent.payload.get<Tag::kAid>() == kAidVisa);
  CHECK(ev[1]->delivered.payload.get<Tag::kAid>() == kAidMastercard);
}

TEST_CASE("relay sends magic bytes once before the first command") {
  Trace t;
  EchoCard card;
  Adversary adv(t, {Capability::kA1});
  RelayOptions opt;
  opt.magic_bytes = Bytes{0xc0, 0xff, 0xee};
  RelayLink link(t, adv, card, "reader", opt);
  link.exchange(Message::command(MsgName::kSelect));
  link.exchange(Message::command(MsgName::kSelect));
  REQUIRE(card.seen.size() == 3);
  CHECK(card.seen[0].name == MsgName::kMagicBytes);
  CHECK(card.seen[1].name == MsgName::kSelect);
}

TEST_CASE("trace JSON lines round trip byte-identically") {
  Trace t;
  t.begin_run("genuine", {{"k", "v"}});
  EchoCard card;
  DirectLink link(t, card, "reader", true);
  link.exchange(Message::command(MsgName::kSelect));
  DataElementMap d;
  put_amount(d, {2000, "EUR"});
  t.mark("note", "test", d, {{"a", "b"}}, {Tag::kCtq});
  const std::string text = to_jsonl(t);
  std::istringstream in(text);
  Trace back = Trace::from_entries(read_jsonl(in));
  CHECK(back.entries() == t.entries());
  CHECK(to_jsonl(back) == text);
  CHECK_THROWS_AS(entry_from_jsonl("{\"type\":\"event\"}"), CodecError);
  CHECK_THROWS_AS(entry_from_jsonl("not json"), CodecError);
}

}  // namespace
}  // namespace emvsim
