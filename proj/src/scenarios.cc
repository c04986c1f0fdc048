#include "emvsim/scenarios.h"

#include <cstdio>
#include <memory>

#include "emvsim/fixtures.h"
#include "emvsim/interceptors.h"

namespace emvsim {

namespace {

const Amount kLow{2000, "EUR"};
constexpr uint64_t kHighValue = 10000;
constexpr uint32_t kUnSpace = 1000;
constexpr uint8_t kUnlimitedTries = 0xFF;
constexpr int kPinSpace = 10000;

using Icpt = std::shared_ptr<Interceptor>;

Amount eur(uint64_t minor) { return {minor, "EUR"}; }

void mark_intent(Trace& trace, const Amount& amount) {
  DataElementMap d;
  put_amount(d, amount);
  trace.mark(marker::kCardholderIntent, "cardholder", std::move(d));
}

Presenter cardholder(const Card& card) { return {"cardholder", card.profile().pin}; }
Presenter attacker(std::optional<std::string> pin = std::nullopt) {
  return {"attacker", std::move(pin)};
}

// Amount the terminal will actually charge.
Amount charged(const Terminal& t, const Amount& a) {
  return t.config().transit ? Amount{0, a.currency} : a;
}

TerminalOutcome genuine_tap(World& world, Terminal& terminal, Card& card, const Amount& amount,
                            std::string_view kind = "genuine") {
  Trace& trace = world.trace();
  trace.begin_run(kind);
  mark_intent(trace, charged(terminal, amount));
  DirectLink link(trace, card, terminal.name());
  TerminalOutcome out = terminal.run_transaction(link, {amount, cardholder(card)});
  if (out.decision == Decision::kAcceptedOffline) terminal.submit_clearing(out);
  return out;
}

void availability_probe(ScenarioContext& ctx) {
  const TerminalOutcome out =
      genuine_tap(ctx.world, ctx.terminal, ctx.card, kLow, "availability");
  ctx.world.trace().mark(marker::kAvailabilityProbe, "scenario", {},
                         {{"result", out.accepted() ? "ok" : "failed"}, {"reason", out.reason}});
}

TerminalOutcome relay_attack(ScenarioContext& ctx, const std::vector<Icpt>& interceptors,
                             RelayOptions options, bool cardholder_pays) {
  Trace& trace = ctx.world.trace();
  trace.begin_run("attack");
  if (cardholder_pays) mark_intent(trace, charged(ctx.terminal, ctx.def.amount));
  RelayLink link(trace, ctx.adversary, ctx.card, ctx.terminal.name(), std::move(options));
  for (const auto& i : interceptors) link.attach(i);
  const Presenter who = cardholder_pays ? cardholder(ctx.card) : attacker();
  return ctx.terminal.run_transaction(link, {ctx.def.amount, who});
}

// A rogue reader's kernel inputs for `amount`.
Ttq reader_ttq(const Amount& amount) {
  Ttq t;
  t.online_pin_supported = true;
  t.signature_supported = true;
  t.cvm_required = amount.value > 5000;
  t.emv_mode_supported = true;
  return t;
}

// --- Scenario bodies --------------------------------------------------------

void run_magstripe_cloning(ScenarioContext& ctx) {
  Trace& trace = ctx.world.trace();
  trace.begin_run("skim");
  DirectLink link(trace, ctx.card, "adversary_reader", true);
  link.attach_eavesdropper(ctx.adversary);
  skim(link, ctx.def.amount, reader_ttq(ctx.def.amount), {ctx.world.rng().u32(), std::nullopt});
}

void run_foreign_currency_replay(ScenarioContext& ctx) {
  Trace& trace = ctx.world.trace();
  const Amount& amount = ctx.def.amount;
  trace.begin_run("skim");
  ctx.adversary.require(Capability::kA1, "terminal emulator");
  DirectLink link(trace, ctx.card, "adversary_reader", true);
  const Ttq ttq = reader_ttq(amount);
  const Un un{ctx.world.rng().u32(), std::nullopt};
  const SkimResult s = skim(link, amount, ttq, un);
  if (!s.ok) return;
  const auto ctq = s.gpo_response.payload.find<Tag::kCtq>();
  // A card that asks for a CVM cannot be cashed without it.
  if (!ctq || ctq->online_pin_required || ctq->signature_required) {
    trace.mark("attack_aborted", "adversary", {}, {{"reason", "card_requires_cvm"}});
    return;
  }

  trace.begin_run("attack");
  ctx.adversary.require(Capability::kA5, "rogue merchant submission");
  TerminalConfig rogue = ctx.env.terminal;
  rogue.id = "rogue_merchant";
  rogue.terminal_id = "T-ROGUE-01";
  rogue.merchant_id = "M-ROGUE";
  rogue.mcc = Mcc{5999};
  Terminal& rogue_terminal = ctx.world.add_terminal(rogue);

  DataElementMap req;
  for (const auto& [nr, rec] : s.card.records) {
    req.merge(rec.project({Tag::kPan, Tag::kExpiry}));
  }
  put_amount(req, amount);
  req.set<Tag::kAid>(s.aid);
  req.merge(s.gpo_response.payload.project(
      {Tag::kAtc, Tag::kAc, Tag::kIad, Tag::kCid, Tag::kAip, Tag::kCtq}));
  req.set<Tag::kUnT>(un);
  req.set<Tag::kTtq>(ttq);
  req.set<Tag::kTvr>(Tvr{});
  req.set<Tag::kCvmResults>(CvmResults::none());
  req.set<Tag::kTerminalId>({rogue.terminal_id});
  ctx.world.acquirer().submit(rogue_terminal.name(),
                              Message::command(MsgName::kAuthRequest, std::move(req)));
}

void run_replay_nonce_reuse(ScenarioContext& ctx) {
  Trace& trace = ctx.world.trace();
  const TerminalConfig& cfg = ctx.terminal.config();
  if (!cfg.fixed_un) throw ConfigError("replay_nonce_reuse needs a fixed-UN terminal");
  const int skim_run = trace.begin_run("skim");
  ctx.adversary.require(Capability::kA1, "terminal emulator");
  {
    DirectLink link(trace, ctx.card, "adversary_reader", true);
    if (!skim(link, ctx.def.amount, terminal_ttq(cfg, ctx.def.amount.value), *cfg.fixed_un).ok) {
      return;
    }
  }
  const RecordedTx rec = record_from_trace(trace, skim_run);

  // The cardholder keeps using the card at the same terminal.
  genuine_tap(ctx.world, ctx.terminal, ctx.card, ctx.def.amount);

  trace.begin_run("attack");
  ctx.adversary.require(Capability::kA5, "fixed-UN terminal");
  ReplayEmulator emulator(rec);
  DirectLink link(trace, emulator, ctx.terminal.name(), true);
  ctx.terminal.run_transaction(link, {ctx.def.amount, attacker()});
}

void run_pin_guessing(ScenarioContext& ctx) {
  const PinCampaignResult r =
      pin_guess_campaign(ctx.adversary, ctx.card, {PinStrategy::kFindPin, 1, kPinSpace});
  if (!r.pin) return;
  Trace& trace = ctx.world.trace();
  trace.begin_run("attack");
  DirectLink link(trace, ctx.card, ctx.terminal.name());
  ctx.terminal.run_transaction(link, {ctx.def.amount, attacker(r.pin)});
  availability_probe(ctx);
}

void run_pin_guess_dos(ScenarioContext& ctx) {
  pin_guess_campaign(ctx.adversary, ctx.card, {PinStrategy::kExhaust, 0, 1});
  availability_probe(ctx);
}

void run_ttq_ctq_bypass(ScenarioContext& ctx) {
  TtqPatch ttq;
  ttq.cvm_required = false;
  CtqPatch ctq;
  ctq.cdcvm_performed = true;
  ctq.online_pin_required = false;
  relay_attack(ctx, {std::make_shared<ModifyTtq>(ttq), std::make_shared<ModifyCtq>(ctq, false)},
               {}, false);
}

void run_ctq_bypass(ScenarioContext& ctx) {
  CtqPatch ctq;
  ctq.cdcvm_performed = true;
  ctq.online_pin_required = false;
  relay_attack(ctx, {std::make_shared<ModifyCtq>(ctq, false)}, {}, false);
}

void run_card_brand_mixup(ScenarioContext& ctx) {
  Trace& trace = ctx.world.trace();
  trace.begin_run("attack");
  ctx.adversary.require(Capability::kA1, "relay");
  DirectLink card_leg(trace, ctx.card, "translator", true);
  Translator translator(ctx.adversary, card_leg, ctx.card.profile().aids.front(), kAidVisa);
  DirectLink link(trace, translator, ctx.terminal.name(), true);
  ctx.terminal.run_transaction(link, {ctx.def.amount, attacker()});
  if (translator.aborted()) {
    trace.mark("attack_aborted", "adversary", {}, {{"reason", "card_offers_fdda"}});
  }
}

void run_inducing_auth_failure(ScenarioContext& ctx) {
  relay_attack(ctx, {std::make_shared<InduceAuthFailure>(CvmList{})}, {}, false);
}

void run_googlepay_ttq(ScenarioContext& ctx) {
  ctx.card.set_lock(LockState::kLocked);
  TtqPatch ttq;
  ttq.cvm_required = false;
  relay_attack(ctx, {std::make_shared<ModifyTtq>(ttq)}, {}, false);
}

void run_magic_byte(ScenarioContext& ctx) {
  Trace& trace = ctx.world.trace();
  ctx.card.set_lock(LockState::kLocked);

  // Learn the transit bytes by posing as a card at a gate.
  trace.begin_run("probe");
  ctx.adversary.require(Capability::kA1, "card emulation");
  Terminal& gate = ctx.world.add_terminal(load_terminal("transit_gate"));
  MagicByteRecorder recorder(ctx.adversary);
  {
    DirectLink link(trace, recorder, gate.name(), true);
    gate.run_transaction(link, {eur(0), attacker()});
  }
  if (!recorder.captured()) return;

  RelayOptions options;
  options.magic_bytes = *recorder.captured();
  options.cache_read_record = true;
  TtqPatch ttq;
  ttq.oda_for_online = true;
  ttq.emv_mode = true;
  CtqPatch ctq;
  ctq.cdcvm_performed = true;
  relay_attack(ctx, {std::make_shared<ModifyTtq>(ttq), std::make_shared<ModifyCtq>(ctq, true)},
               std::move(options), false);
}

void run_merchant_bag(ScenarioContext& ctx) {
  const TerminalOutcome out =
      relay_attack(ctx, {std::make_shared<CorruptAc>()}, {}, true);
  if (out.decision == Decision::kAcceptedOffline) ctx.terminal.submit_clearing(out);
}

void run_maestro_downgrade(ScenarioContext& ctx) {
  relay_attack(ctx,
               {std::make_shared<SwapAids>(std::vector<Aid>{kAidMastercard},
                                           std::map<Aid, Aid>{{kAidMastercard, kAidMaestro}})},
               {}, true);
}

void run_eavesdrop_card_data(ScenarioContext& ctx) {
  Trace& trace = ctx.world.trace();
  trace.begin_run("genuine");
  mark_intent(trace, charged(ctx.terminal, ctx.def.amount));
  DirectLink link(trace, ctx.card, ctx.terminal.name());
  link.attach_eavesdropper(ctx.adversary);
  ctx.terminal.run_transaction(link, {ctx.def.amount, cardholder(ctx.card)});
  ctx.adversary.visual_read(printed_face(ctx.card.profile()));
}

void run_magstripe_mode_clone(ScenarioContext& ctx) {
  Trace& trace = ctx.world.trace();
  if (!ctx.card.profile().magstripe) return;
  trace.begin_run("harvest");
  ctx.adversary.require(Capability::kA1, "cvc3 harvest");
  HarvestResult h;
  {
    DirectLink link(trace, ctx.card, "adversary_reader", true);
    h = harvest_cvc3(link, ctx.card.profile().magstripe->n_un_digits, kUnSpace);
  }
  if (!h.available || h.table.entries.empty()) return;
  ctx.adversary.learn(secret::kMagstripeModeData,
                      ctx.card.profile().pan.digits + ":" +
                          std::to_string(h.table.entries.size()) + "x" +
                          std::to_string(h.table.n_digits));

  // The cardholder's next genuine payment moves the ATC past the table.
  genuine_tap(ctx.world, ctx.terminal, ctx.card, ctx.def.amount);

  trace.begin_run("attack");
  MagstripeClone clone = build_magstripe_clone(h.table, h.card);
  DirectLink link(trace, clone, ctx.terminal.name(), true);
  ctx.terminal.run_transaction(link, {ctx.def.amount, attacker()});
}

void run_emv_to_magstripe(ScenarioContext& ctx) {
  relay_attack(ctx, {std::make_shared<ModifyAip>(false)}, {}, true);
}

// --- Catalog ----------------------------------------------------------------

Expectation expect(std::set<std::string> props, std::set<std::string> p1,
                   std::set<std::string> p5, std::set<Capability> caps,
                   std::set<std::string> flaws) {
  return {std::move(props), std::move(p1), std::move(p5), std::move(caps), std::move(flaws)};
}

using C = Capability;

std::vector<ScenarioDef> build_catalog() {
  const std::string P1(kP1), P2(kP2), P3(kP3), P31(kP31), P32(kP32), P5(kP5), P6(kP6);
  std::vector<ScenarioDef> v;
  v.push_back({"magstripe_cloning", "Magnetic stripe cloning", AttackClass::kSecrecy,
               "visa_plastic_no_fdda", "standard_pos", "permissive_2019", eur(2000),
               {"track_data_in_emv"}, {}, {}, {std::string(secret::kTrackData)},
               expect({P5}, {}, {"track_data"}, {C::kA1},
                      {"magstripes_supported", "unencrypted_data", "magstripe_data_in_emv",
                       "paper_signature_weakness"}),
               run_magstripe_cloning});
  v.push_back({"foreign_currency_replay", "No cardholder verification in foreign currencies",
               AttackClass::kReplay, "visa_credit_foreign_nocvm", "standard_pos",
               "permissive_2019", {kHighValue, "USD"}, {"foreign_currency_no_cvm"}, {}, {}, {},
               expect({P3, P31, P32}, {}, {}, {C::kA1, C::kA5},
                      {"no_foreign_currency_limit", "merchant_not_authenticated"}),
               run_foreign_currency_replay});
  v.push_back({"replay_nonce_reuse", "Replay with nonce reuse", AttackClass::kReplay,
               "visa_plastic_no_fdda", "rogue_fixed_un_pos", "permissive_2019", eur(1000),
               {"check_atc_order", "check_un_reuse"}, {}, {std::string(kReplayField)}, {},
               expect({P1, P3, P32}, {std::string(kReplayField)}, {}, {C::kA1, C::kA5},
                      {"atc_out_of_order", "un_reuse_not_prevented"}),
               run_replay_nonce_reuse});
  v.push_back({"pin_guessing", "PIN guessing", AttackClass::kSecrecy, "visa_plastic_no_fdda",
               "standard_pos", "permissive_2019", eur(kHighValue), {"offline_pin_over_nfc"}, {},
               {}, {std::string(secret::kPin)},
               expect({P5, P3}, {}, {"pin"}, {C::kA1}, {"offline_pin_over_nfc"}),
               run_pin_guessing});
  v.push_back({"pin_guess_dos", "PIN guess spamming", AttackClass::kDos, "visa_plastic_no_fdda",
               "standard_pos", "permissive_2019", eur(2000), {"offline_pin_over_nfc"}, {}, {},
               {}, expect({P6}, {}, {}, {C::kA1}, {"offline_pin_over_nfc"}),
               run_pin_guess_dos});
  v.push_back({"ttq_ctq_bypass", "Combined TTQ and CTQ modification", AttackClass::kPinBypass,
               "visa_plastic_no_fdda", "standard_pos", "permissive_2019", eur(kHighValue),
               {"fdda", "check_ttq_in_ac", "check_plastic_cdcvm", "relay_protection",
                "enforce_cvm_limit"},
               {}, {"TTQ", "CTQ"}, {},
               expect({P1, P3, P31, P32}, {"TTQ", "CTQ"}, {}, {C::kA1},
                      {"ctq_not_protected", "ttq_not_protected", "plastic_cdcvm_not_checked",
                       "no_relay_protection"}),
               run_ttq_ctq_bypass});
  v.push_back({"ctq_bypass", "CTQ modification", AttackClass::kPinBypass,
               "visa_plastic_no_fdda", "standard_pos", "permissive_2019", eur(kHighValue),
               {"fdda", "check_plastic_cdcvm", "relay_protection", "enforce_cvm_limit"}, {},
               {"CTQ"}, {},
               expect({P1, P3, P31, P32}, {"CTQ"}, {}, {C::kA1},
                      {"ctq_not_protected", "plastic_cdcvm_not_checked", "no_relay_protection"}),
               run_ctq_bypass});
  v.push_back({"card_brand_mixup", "Card brand mixup", AttackClass::kPinBypass,
               "mastercard_cda", "standard_pos", "permissive_2019", eur(kHighValue),
               {"fdda", "check_aid_pan_match", "check_plastic_cdcvm", "ac_covers_aid",
                "relay_protection", "enforce_cvm_limit"},
               {}, {"AID", "CTQ"}, {},
               expect({P1, P3, P31, P32}, {"AID", "CTQ"}, {}, {C::kA1},
                      {"visa_from_mastercard", "plastic_cdcvm_not_checked", "aid_pan_not_checked",
                       "aid_not_protected", "ctq_not_protected", "no_relay_protection"}),
               run_card_brand_mixup});
  v.push_back({"inducing_auth_failure", "Inducing authentication failure",
               AttackClass::kPinBypass, "mastercard_cda", "standard_pos", "permissive_2019",
               eur(kHighValue),
               {"tac_denial_cda_failed", "decline_on_ca_lookup_failure", "relay_protection",
                "enforce_cvm_limit"},
               {}, {"CA_PK_INDEX", "CVM_LIST", "IAC_DENIAL"}, {},
               expect({P1, P3, P31, P32}, {"CA_PK_INDEX", "CVM_LIST", "IAC_DENIAL"}, {}, {C::kA1},
                      {"tac_denial_zero", "paper_signature_weakness",
                       "ca_lookup_failure_not_declined", "no_relay_protection"}),
               run_inducing_auth_failure});
  v.push_back({"googlepay_ttq", "TTQ modification on a locked Google-like wallet",
               AttackClass::kPinBypass, "google_like", "standard_pos", "permissive_2019",
               eur(kHighValue), {"check_ttq_in_ac", "wallet_always_cdcvm", "relay_protection"},
               {}, {"TTQ"}, {},
               expect({P1, P3, P31, P32}, {"TTQ"}, {}, {C::kA1},
                      {"ttq_not_protected", "phones_always_send_cdcvm", "no_relay_protection"}),
               run_googlepay_ttq});
  v.push_back({"magic_byte", "Magic-byte PIN bypass on a locked Apple-like wallet",
               AttackClass::kPinBypass, "apple_like", "standard_pos", "permissive_2019",
               eur(kHighValue),
               {"fdda", "check_ttq_in_ac", "magic_byte_unlock", "relay_protection",
                "check_mcc_for_wallet_no_cdcvm", "enforce_cvm_limit"},
               {}, {"TTQ", "CTQ"}, {},
               expect({P1, P3, P31, P32}, {"TTQ", "CTQ"}, {}, {C::kA1},
                      {"ctq_not_protected", "ttq_not_protected", "magic_byte_transit",
                       "no_relay_protection"}),
               run_magic_byte});
  v.push_back({"merchant_bag", "Merchant holding the bag", AttackClass::kMerchantBag,
               "mastercard_cda", "offline_capable_pos", "permissive_2019", eur(1000),
               {"cda", "relay_protection"}, {}, {"AC"}, {},
               expect({P1, P2, P32}, {"AC"}, {}, {C::kA1},
                      {"ac_not_authenticated_sda_dda", "no_relay_protection"}),
               run_merchant_bag});
  v.push_back({"maestro_downgrade", "Maestro to Mastercard", AttackClass::kMitmAccept,
               "maestro", "standard_pos", "permissive_2019", eur(2000),
               {"ac_covers_aid", "relay_protection"}, {}, {"AID"}, {},
               expect({P1, P32}, {"AID"}, {}, {C::kA1},
                      {"aid_not_protected", "no_relay_protection"}),
               run_maestro_downgrade});
  v.push_back({"eavesdrop_card_data", "Eavesdropping on card data", AttackClass::kSecrecy,
               "magstripe_only", "standard_pos", "permissive_2019", eur(2000), {}, {}, {},
               {std::string(secret::kPan), std::string(secret::kExpiry),
                std::string(secret::kCsc)},
               expect({P5}, {}, {"csc", "expiry", "pan"}, {C::kA1, C::kA8},
                      {"unencrypted_data"}),
               run_eavesdrop_card_data});
  v.push_back({"magstripe_mode_clone", "Mag-stripe mode cloning", AttackClass::kCloning,
               "magstripe_only", "standard_pos", "permissive_2019", eur(2000),
               {"check_atc_order", "weak_magstripe_un"}, {{"un_retry", true}}, {},
               {std::string(secret::kMagstripeModeData)},
               expect({P5, P3, P32}, {}, {"magstripe_mode_data"}, {C::kA1},
                      {"atc_out_of_order", "weak_random", "un_retry"}),
               run_magstripe_mode_clone});
  v.push_back({"emv_to_magstripe", "EMV mode to mag-stripe mode", AttackClass::kMitmAccept,
               "mastercard_cda", "standard_pos", "permissive_2019", eur(2000),
               {"magstripe_fallback", "relay_protection"}, {}, {"AIP"}, {},
               expect({P1, P32}, {"AIP"}, {}, {C::kA1}, {"aip_not_protected_magstripe"}),
               run_emv_to_magstripe});
  return v;
}

std::map<std::string, std::string> knob_snapshot(const EnvSpec& env) {
  std::map<std::string, std::string> out;
  for (const auto& k : knobs()) out[std::string(k.name)] = k.read(env) ? "on" : "off";
  return out;
}

bool flaw_present(std::string_view id, const EnvSpec& env) {
  const FlawInfo* f = find_flaw(id);
  if (!f) throw ConfigError("unknown flaw id " + std::string(id));
  if (f->structural) return true;
  for (const auto& k : knobs()) {
    if (k.flaw == id) return k.read(env) == k.flawed;
  }
  return false;
}

std::string format_pin(int n) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%04d", n);
  return buf;
}

}  // namespace

const std::vector<ScenarioDef>& scenarios() {
  static const std::vector<ScenarioDef> kCatalog = build_catalog();
  return kCatalog;
}

const ScenarioDef* find_scenario(std::string_view id) {
  for (const auto& s : scenarios()) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

ScenarioResult run_scenario(const ScenarioDef& def, const ScenarioOptions& options) {
  EnvSpec env{load_card(def.card), load_terminal(def.terminal), load_issuer(def.issuer)};
  apply_knobs(env, def.settings);
  for (auto name : def.required) {
    const Knob& k = knob(name);
    k.apply(env, k.flawed);
  }
  apply_knobs(env, options.overrides);

  World world(env.issuer, mix_seed(options.seed, def.id));
  ScenarioMeta meta;
  meta.id = std::string(def.id);
  meta.title = std::string(def.title);
  meta.cls = def.cls;
  meta.agreement = def.agreement;
  meta.secrets = def.secrets;
  meta.cvm_limit = env.issuer.cvm_limit;
  meta.knobs = knob_snapshot(env);
  for (const auto& f : def.expected.flaws) {
    if (flaw_present(f, env)) meta.flaws.push_back(f);
  }
  meta.capabilities = def.expected.capabilities;
  world.trace().mark(marker::kScenarioMeta, "scenario", {}, meta.to_attrs());

  Adversary adversary(world.trace(), def.expected.capabilities);
  Card& card = world.add_card(env.card);
  Terminal& terminal = world.add_terminal(env.terminal);
  ScenarioContext ctx{def, env, world, adversary, card, terminal};
  def.run(ctx);

  ScenarioResult r;
  r.id = meta.id;
  r.trace = world.trace();
  r.meta = meta;
  r.report = evaluate(r.trace, meta);
  r.used = capabilities_used(r.trace);
  r.succeeded = attack_succeeded(r.trace, meta, r.report);
  r.diff = compare_expected(r.report, r.used, meta.flaws, r.succeeded, def.expected);
  return r;
}

// ---------------------------------------------------------------------------

SkimResult skim(CardLink& link, const Amount& amount, const Ttq& ttq, const Un& un_t) {
  SkimResult out;
  Message list = link.exchange(Message::command(MsgName::kSelect)).response;
  auto aids = list.payload.find<Tag::kAidList>();
  if (!list.ok() || !aids || aids->aids.empty()) return out;
  out.card.aids = aids->aids;
  out.aid = aids->aids.front();

  DataElementMap sel;
  sel.set<Tag::kAid>(out.aid);
  Message selected = link.exchange(Message::command(MsgName::kSelect, std::move(sel))).response;
  auto pdol = selected.payload.find<Tag::kPdol>();
  if (!selected.ok() || !pdol) return out;

  DataElementMap env;
  put_amount(env, amount);
  env.set<Tag::kTtq>(ttq);
  env.set<Tag::kUnT>(un_t);
  DataElementMap gpo_data;
  try {
    gpo_data = build_dol_data(*pdol, env);
  } catch (const MissingDolEntry&) {
    return out;
  }
  out.gpo_response = link.exchange(Message::command(MsgName::kGpo, std::move(gpo_data))).response;
  if (!out.gpo_response.ok()) return out;
  out.card.aip = out.gpo_response.payload.get<Tag::kAip>();
  for (uint8_t nr : out.gpo_response.payload.get<Tag::kAfl>().records) {
    DataElementMap p;
    p.set<Tag::kRecordNumber>({nr});
    Message rec = link.exchange(Message::command(MsgName::kReadRecord, std::move(p))).response;
    if (rec.ok()) out.card.records[nr] = rec.payload;
  }
  out.ok = true;
  return out;
}

HarvestResult harvest_cvc3(CardLink& link, uint8_t n_digits, uint32_t count) {
  HarvestResult out;
  out.table.n_digits = n_digits;
  const SkimResult s = skim(link, {0, "EUR"}, Ttq{}, {0, std::nullopt});
  if (!s.ok) return out;
  out.card = s.card;
  for (uint32_t v = 0; v < count; ++v) {
    DataElementMap p;
    p.set<Tag::kMagstripeUn>({v, n_digits});
    Message rsp = link.exchange(Message::command(MsgName::kComputeCc, std::move(p))).response;
    if (!rsp.ok()) {
      if (v == 0) return out;
      continue;
    }
    out.table.entries[v] = {rsp.payload.get<Tag::kAtc>(), rsp.payload.get<Tag::kCvc3>().value};
  }
  out.available = true;
  return out;
}

PinCampaignResult pin_guess_campaign(Adversary& adversary, Card& card, const PinCampaign& plan) {
  Trace& trace = adversary.trace();
  adversary.require(Capability::kA1, "PIN guessing");
  PinCampaignResult out;
  const bool was_recording = trace.recording();
  // Long sweeps are summarised by one marker instead of per-guess events.
  if (plan.strategy == PinStrategy::kFindPin) trace.set_recording(false);

  auto verify = [&](CardLink& link, std::optional<std::string> guess) {
    DataElementMap p;
    if (guess) p.set<Tag::kPinGuess>({*guess});
    return link.exchange(Message::command(MsgName::kVerify, std::move(p))).response;
  };

  int next = 0;
  bool done = false;
  while (!done && out.encounters < plan.max_encounters && next < kPinSpace) {
    trace.begin_run("pin_encounter");
    ++out.encounters;
    DirectLink link(trace, card, "adversary_reader", true);
    Message status = verify(link, std::nullopt);
    if (!status.ok()) {
      out.available = false;
      break;
    }
    int remaining = status.payload.get<Tag::kPinTryCounter>().value;
    const bool unlimited = remaining == kUnlimitedTries;
    while (next < kPinSpace) {
      if (plan.strategy == PinStrategy::kFindPin && !unlimited &&
          remaining <= plan.stop_at_remaining) {
        break;
      }
      const std::string guess = format_pin(next++);
      Message rsp = verify(link, guess);
      ++out.guesses;
      const VerifyResult r = rsp.payload.get<Tag::kVerifyResult>();
      remaining = r.remaining;
      if (r.kind == VerifyKind::kCorrect) {
        out.pin = guess;
        if (plan.strategy == PinStrategy::kFindPin) {
          done = true;
          break;
        }
      } else if (r.kind == VerifyKind::kBlocked) {
        out.blocked = true;
        done = true;
        break;
      }
    }
    // The cardholder's next payment with the right PIN resets the counter.
    if (!done && plan.strategy == PinStrategy::kFindPin) card.reset_pin_counter();
  }

  trace.set_recording(was_recording);
  trace.mark("pin_campaign", "adversary", {},
             {{"strategy", plan.strategy == PinStrategy::kFindPin ? "find_pin" : "exhaust"},
              {"guesses", std::to_string(out.guesses)},
              {"encounters", std::to_string(out.encounters)},
              {"result", !out.available ? "unavailable"
                         : out.blocked  ? "blocked"
                         : out.pin      ? "found"
                                        : "stopped"}});
  if (out.pin) adversary.learn(secret::kPin, *out.pin);
  return out;
}

// ---------------------------------------------------------------------------

std::string GenuineCase::label() const {
  return card + "@" + terminal + "/" + issuer + "/" + std::to_string(amount.value);
}

bool valid_pairing(const CardProfile& card, const TerminalConfig& terminal) {
  const auto aid = select_kernel(terminal, card.aids);
  if (!aid) return false;
  if (!card.aip.emv_mode_supported && !terminal.magstripe_supported) return false;
  if (kernel_of(*aid) == 3 && terminal.kernel3_require_fdda &&
      !card.oda_methods.count(OdaMethod::kFdda)) {
    return false;
  }
  return true;
}

std::vector<GenuineCase> genuine_matrix() {
  std::vector<GenuineCase> out;
  for (const auto& card_id : card_ids()) {
    const CardProfile card = load_card(card_id);
    for (const auto& terminal_id : terminal_ids()) {
      const TerminalConfig terminal = load_terminal(terminal_id);
      if (!valid_pairing(card, terminal)) continue;
      for (const char* issuer : {"permissive_2019", "hardened"}) {
        out.push_back({card_id, terminal_id, issuer, kLow});
        // A transit gate charges nothing, so one amount covers it.
        if (!terminal.transit) out.push_back({card_id, terminal_id, issuer, eur(kHighValue)});
      }
    }
  }
  return out;
}

const std::vector<std::string>& full_agreement() {
  static const std::vector<std::string> kFields = {"AID",        "TTQ",         "CTQ",
                                                   "AIP",        "CVM_LIST",    "IAC_DENIAL",
                                                   "CA_PK_INDEX", "AC"};
  return kFields;
}

ScenarioResult run_genuine(const GenuineCase& c, uint64_t seed) {
  EnvSpec env{load_card(c.card), load_terminal(c.terminal), load_issuer(c.issuer)};
  const std::string label = c.label();
  World world(env.issuer, mix_seed(seed, label));
  ScenarioMeta meta;
  meta.id = "genuine:" + label;
  meta.title = "honest transaction";
  meta.cls = AttackClass::kNone;
  meta.agreement = full_agreement();
  meta.secrets = {std::string(secret::kPan), std::string(secret::kExpiry),
                  std::string(secret::kCsc), std::string(secret::kTrackData),
                  std::string(secret::kMagstripeModeData)};
  meta.cvm_limit = env.issuer.cvm_limit;
  meta.knobs = knob_snapshot(env);
  world.trace().mark(marker::kScenarioMeta, "scenario", {}, meta.to_attrs());

  Card& card = world.add_card(env.card);
  Terminal& terminal = world.add_terminal(env.terminal);
  const TerminalOutcome out = genuine_tap(world, terminal, card, c.amount);

  ScenarioResult r;
  r.id = meta.id;
  r.trace = world.trace();
  r.meta = meta;
  r.report = evaluate(r.trace, meta);
  r.used = capabilities_used(r.trace);
  r.succeeded = out.accepted();
  if (!out.accepted()) r.diff.push_back("declined: " + out.reason);
  for (const auto& v : r.report.violated_labels()) r.diff.push_back("violation: " + v);
  return r;
}

}  // namespace emvsim
