#include "doctest.h"
#include "emvsim/environment.h"
#include "emvsim/fixtures.h"
#include "emvsim/interceptors.h"
#include "emvsim/terminal.h"
#include "test_util.h"

namespace emvsim {
namespace {

// Kernel-3 CVM choice written as a plain decision list.
K3Cvm k3_oracle(const Ttq& ttq, const Ctq& ctq) {
  if (ctq.cdcvm_performed) return K3Cvm::kCdcvm;
  if (ctq.online_pin_required) {
    if (ttq.online_pin_supported) return K3Cvm::kOnlinePin;
  }
  if (ctq.signature_required) return K3Cvm::kSignature;
  return ttq.cvm_required ? K3Cvm::kDecline : K3Cvm::kNoCvm;
}

struct Tap {
  Tap(std::string_view card_id, std::string_view terminal_id,
      std::string_view issuer_id = "permissive_2019", uint64_t seed = 5)
      : world(load_issuer(issuer_id), seed),
        card(world.add_card(load_card(card_id))),
        terminal(world.add_terminal(load_terminal(terminal_id))) {}

  TerminalOutcome run(uint64_t amount, std::string currency = "EUR") {
    world.trace().begin_run("genuine");
    DirectLink link(world.trace(), card, terminal.name());
    return terminal.run_transaction(link, {{amount, currency}, {"cardholder", card.profile().pin}});
  }

  World world;
  Card& card;
  Terminal& terminal;
};

TEST_CASE("kernel-3 CVM selection matches the decision list") {
  for (int m = 0; m < 256; ++m) {
    Ttq t{bool(m & 1), bool(m & 2), bool(m & 4), bool(m & 8), bool(m & 16)};
    Ctq c{bool(m & 32), bool(m & 64), bool(m & 128)};
    CHECK(select_cvm_kernel3(t, c) == k3_oracle(t, c));
  }
}

TEST_CASE("action analysis") {
  TerminalConfig cfg = load_terminal("offline_capable_pos");
  const ActionCodes none{};
  const Tvr failed{true};
  CHECK(action_analysis(cfg, Tvr{}, none, 100, CidKind::kTc) == Action::kOfflineOk);
  CHECK(action_analysis(cfg, Tvr{}, none, cfg.floor_limit + 1, CidKind::kTc) == Action::kGoOnline);
  CHECK(action_analysis(cfg, Tvr{}, none, 100, CidKind::kArqc) == Action::kGoOnline);
  CHECK(action_analysis(cfg, Tvr{}, none, 100, CidKind::kAac) == Action::kDecline);
  // TAC-Online forces a failed ODA online.
  CHECK(action_analysis(cfg, failed, none, 100, CidKind::kTc) == Action::kGoOnline);
  cfg.tac.denial.cda_failed = true;
  CHECK(action_analysis(cfg, failed, none, 100, CidKind::kTc) == Action::kDecline);
  cfg.tac.denial.cda_failed = false;
  CHECK(action_analysis(cfg, failed, {{true}, {}, {}}, 100, CidKind::kTc) == Action::kDecline);
}

TEST_CASE("kernel-2 CVM list") {
  TerminalConfig cfg = load_terminal("standard_pos");
  Aip aip;
  aip.cardholder_verification_supported = true;
  CvmList list{{{CvmMethod::kOnlinePin, CvmCondition::kIfAboveCvmLimit},
                {CvmMethod::kNoCvm, CvmCondition::kAlways}}};
  CHECK(select_cvm_kernel2(cfg, aip, list, cfg.cvm_required_limit + 1).method ==
        CvmMethod::kOnlinePin);
  CHECK(select_cvm_kernel2(cfg, aip, list, cfg.cvm_required_limit).method == CvmMethod::kNoCvm);
  CHECK(select_cvm_kernel2(cfg, aip, CvmList{}, 99999) == CvmResults::none());
  aip.on_device_cvm_supported = true;
  CHECK(select_cvm_kernel2(cfg, aip, list, 99999).method == CvmMethod::kCdcvm);
}

TEST_CASE("kernel selection takes the first shared application") {
  TerminalConfig cfg = load_terminal("offline_capable_pos");
  CHECK(select_kernel(cfg, {kAidMaestro}) == kAidMaestro);
  CHECK(select_kernel(cfg, {kAidMaestro, kAidMastercard}) == kAidMaestro);
  cfg.supported_aids = {kAidVisa};
  CHECK_FALSE(select_kernel(cfg, {kAidMastercard}).has_value());
}

TEST_CASE("genuine transactions complete for each kernel and mode") {
  SUBCASE("kernel 3 high value with online PIN") {
    Tap t("visa_plastic_no_fdda", "standard_pos");
    TerminalOutcome o = t.run(10000);
    CHECK(o.decision == Decision::kAcceptedOnline);
    CHECK(o.cvm_results.method == CvmMethod::kOnlinePin);
    CHECK(t.world.trace().markers(marker::kCvmEvent).size() == 1);
  }
  SUBCASE("kernel 3 with fDDA") {
    Tap t("visa_plastic_fdda", "standard_pos");
    CHECK(t.run(2000).accepted());
  }
  SUBCASE("kernel 2 with CDA") {
    Tap t("mastercard_cda", "standard_pos");
    TerminalOutcome o = t.run(2000);
    CHECK(o.decision == Decision::kAcceptedOnline);
    CHECK_FALSE(o.tvr.cda_failed);
  }
  SUBCASE("kernel 2 offline under the floor limit") {
    Tap t("mastercard_cda", "offline_capable_pos");
    CHECK(t.run(1000).decision == Decision::kAcceptedOffline);
  }
  SUBCASE("mag-stripe mode") {
    Tap t("magstripe_only", "standard_pos");
    TerminalOutcome o = t.run(2000);
    CHECK(o.accepted());
    CHECK(o.magstripe_mode);
  }
  SUBCASE("transit gate charges nothing") {
    Tap t("apple_like", "transit_gate");
    t.card.set_lock(LockState::kLocked);
    TerminalOutcome o = t.run(2000);
    CHECK(o.accepted());
    CHECK(o.amount.value == 0);
  }
}

TEST_CASE("terminal emits its claim and decision") {
  Tap t("visa_plastic_no_fdda", "standard_pos");
  t.run(2000);
  const Marker* d = testing::last_marker(t.world.trace(), marker::kTerminalDecision);
  REQUIRE(d);
  CHECK(d->attr("decision") == "accepted_online");
  CHECK(get_amount(d->data) == Amount{2000, "EUR"});
  CHECK(testing::last_marker(t.world.trace(), marker::kTerminalClaim));
}

TEST_CASE("ceiling and missing mag-stripe support decline") {
  Tap t("visa_plastic_no_fdda", "standard_pos");
  TerminalOutcome o = t.run(t.terminal.config().contactless_ceiling + 1);
  CHECK_FALSE(o.accepted());
  CHECK(o.reason == "over_ceiling");
  Tap m("magstripe_only", "offline_capable_pos");
  CHECK_FALSE(m.run(100).accepted());
}

TEST_CASE("relay protection and latency budget") {
  SUBCASE("relay detected") {
    Tap t("visa_plastic_no_fdda", "standard_pos");
    TerminalConfig cfg = t.terminal.config();
    cfg.id = "protected";
    cfg.relay_protection = true;
    Terminal& guarded = t.world.add_terminal(cfg);
    Adversary adv(t.world.trace(), {Capability::kA1});
    RelayLink link(t.world.trace(), adv, t.card, guarded.name());
    TerminalOutcome o = guarded.run_transaction(link, {{2000, "EUR"}, {"attacker", {}}});
    CHECK(o.reason == "relay_detected");
  }
  SUBCASE("slow records time out over a plain relay but not with the cache") {
    Tap t("apple_like", "standard_pos");
    Adversary adv(t.world.trace(), {Capability::kA1});
    {
      RelayLink link(t.world.trace(), adv, t.card, t.terminal.name());
      CHECK(t.terminal.run_transaction(link, {{2000, "EUR"}, {"cardholder", {}}}).reason ==
            "timeout");
    }
    RelayOptions opt;
    opt.cache_read_record = true;
    RelayLink cached(t.world.trace(), adv, t.card, t.terminal.name(), opt);
    CHECK(t.terminal.run_transaction(cached, {{2000, "EUR"}, {"cardholder", {}}}).accepted());
  }
}

TEST_CASE("CDA failure sets the TVR bit") {
  Tap t("mastercard_cda", "standard_pos");
  Adversary adv(t.world.trace(), {Capability::kA1});
  RelayLink link(t.world.trace(), adv, t.card, t.terminal.name());
  link.attach(std::make_shared<CorruptAc>());
  TerminalOutcome o = t.terminal.run_transaction(link, {{2000, "EUR"}, {"cardholder", {}}});
  CHECK(o.tvr.cda_failed);
  CHECK_FALSE(o.accepted());
}

TEST_CASE("terminal config checks") {
  TerminalConfig cfg = load_terminal("standard_pos");
  cfg.floor_limit = cfg.contactless_ceiling + 1;
  CHECK_THROWS_AS(cfg.check(), ConfigError);
  cfg = load_terminal("standard_pos");
  cfg.supported_aids.clear();
  CHECK_THROWS_AS(cfg.check(), ConfigError);
}

}  // namespace
}  // namespace emvsim
