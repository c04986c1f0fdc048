#include "emvsim/terminal.h"

#include <algorithm>

#include "emvsim/card.h"

namespace emvsim {

namespace {

// Ends the transaction with a decline; caught in run_transaction.
struct Stop {
  std::string reason;
};

[[noreturn]] void stop(std::string reason) { throw Stop{std::move(reason)}; }

uint64_t pow10(uint8_t n) {
  uint64_t v = 1;
  for (uint8_t i = 0; i < n; ++i) v *= 10;
  return v;
}

bool rule_applies(const CvmRule& r, uint64_t amount, uint64_t limit) {
  switch (r.condition) {
    case CvmCondition::kAlways: return true;
    case CvmCondition::kIfAboveCvmLimit: return amount > limit;
    case CvmCondition::kIfBelowCvmLimit: return amount <= limit;
  }
  return false;
}

}  // namespace

std::string_view decision_name(Decision d) {
  switch (d) {
    case Decision::kDeclined: return "declined";
    case Decision::kAcceptedOffline: return "accepted_offline";
    case Decision::kAcceptedOnline: return "accepted_online";
  }
  return "?";
}

void TerminalConfig::check() const {
  if (floor_limit > contactless_ceiling) throw ConfigError(id + ": floor limit above ceiling");
  if (transit && !mcc.is_transit()) throw ConfigError(id + ": transit terminal needs a transit MCC");
  if (supported_aids.empty()) throw ConfigError(id + ": no supported kernels");
  if (retry_budget < 1) throw ConfigError(id + ": retry budget must be positive");
  if (latency_budget < 1) throw ConfigError(id + ": latency budget must be positive");
}

std::optional<Aid> select_kernel(const TerminalConfig& cfg, const std::vector<Aid>& card_aids) {
  for (const auto& a : card_aids) {
    if (std::find(cfg.supported_aids.begin(), cfg.supported_aids.end(), a) !=
        cfg.supported_aids.end()) {
      return a;
    }
  }
  return std::nullopt;
}

CvmResults select_cvm_kernel2(const TerminalConfig& cfg, const Aip& aip, const CvmList& cvm_list,
                              uint64_t amount) {
  const bool above = amount > cfg.cvm_required_limit;
  if (aip.on_device_cvm_supported && cfg.kernel2_cdcvm_supported) {
    if (!above) return CvmResults::none();
    return {CvmMethod::kCdcvm, CvmOutcome::kPerformed};
  }
  if (!aip.cardholder_verification_supported) return CvmResults::none();
  for (const auto& r : cvm_list.rules) {
    if (!rule_applies(r, amount, cfg.cvm_required_limit)) continue;
    switch (r.method) {
      case CvmMethod::kOnlinePin: return {CvmMethod::kOnlinePin, CvmOutcome::kPerformed};
      case CvmMethod::kPaperSignature:
        return {CvmMethod::kPaperSignature, CvmOutcome::kPerformed};
      case CvmMethod::kNoCvm: return {CvmMethod::kNoCvm, CvmOutcome::kPerformed};
      default: break;  // not available to a contactless reader
    }
  }
  return CvmResults::none();
}

K3Cvm select_cvm_kernel3(const Ttq& ttq, const Ctq& ctq) {
  if (ctq.cdcvm_performed) return K3Cvm::kCdcvm;
  if (ctq.online_pin_required && ttq.online_pin_supported) return K3Cvm::kOnlinePin;
  if (ctq.signature_required) return K3Cvm::kSignature;
  if (!ttq.cvm_required) return K3Cvm::kNoCvm;
  return K3Cvm::kDecline;
}

Action action_analysis(const TerminalConfig& cfg, const Tvr& tvr, const ActionCodes& iac,
                       uint64_t amount, CidKind cid) {
  if ((tvr & (cfg.tac.denial | iac.denial)).any()) return Action::kDecline;
  if (cid == CidKind::kAac) return Action::kDecline;
  if (cid == CidKind::kTc && amount <= cfg.floor_limit &&
      !(tvr & (cfg.tac.online | iac.online)).any()) {
    return Action::kOfflineOk;
  }
  return Action::kGoOnline;
}

ChainResult verify_card_chain(const TerminalConfig& cfg, const DataElementMap& records,
                              bool need_card_cert) {
  auto index = records.find<Tag::kCaPkIndex>();
  auto issuer = records.find<Tag::kIssuerPkCert>();
  if (!index) return {ChainStatus::kLookupFailure, {}, {}};
  if (!issuer) return {ChainStatus::kBadSignature, {}, {}};
  CertificateChain chain{index->value, *issuer, records.find<Tag::kIccPkCert>()};
  if (need_card_cert && !chain.card_cert) {
    ChainResult r = verify_chain(cfg.ca_store, chain);
    if (r.ok()) r.status = ChainStatus::kBadSignature;
    return r;
  }
  if (!need_card_cert) chain.card_cert.reset();
  return verify_chain(cfg.ca_store, chain);
}

Ttq terminal_ttq(const TerminalConfig& cfg, uint64_t amount) {
  Ttq t;
  t.online_pin_supported = cfg.ttq_online_pin;
  t.signature_supported = cfg.ttq_signature;
  t.cvm_required = amount > cfg.cvm_required_limit;
  t.oda_for_online_supported = cfg.ttq_oda_for_online;
  t.emv_mode_supported = true;
  return t;
}

struct Terminal::Session {
  Transaction tx;
  Amount amount;
  TerminalOutcome out;
  int kernel = 0;
  std::string mode = "emv";
  Aid aid;
  Un un_t;
  DataElementMap gpo;
  DataElementMap records;
  std::optional<Bytes> pin_blob;
  DataElementMap claim;
};

Terminal::Terminal(TerminalConfig cfg, Rng& rng, Trace& trace, Acquirer* acquirer)
    : cfg_(std::move(cfg)), rng_(rng), trace_(trace), acquirer_(acquirer) {
  cfg_.check();
}

Message Terminal::send(CardLink& card, const Message& cmd) {
  Exchange ex = card.exchange(cmd);
  if (cfg_.relay_protection && ex.transport > 1) stop("relay_detected");
  if (ex.latency() > cfg_.latency_budget) stop("timeout");
  return std::move(ex.response);
}

TerminalOutcome Terminal::run_transaction(CardLink& card, const Transaction& tx) {
  Session s;
  s.tx = tx;
  s.amount = tx.amount;
  if (cfg_.transit) s.amount.value = 0;
  s.amount.check();
  s.out.amount = s.amount;
  s.out.merchant_id = cfg_.merchant_id;
  try {
    if (s.amount.value > cfg_.contactless_ceiling) stop("over_ceiling");
    if (cfg_.transit) {
      DataElementMap p;
      p.set<Tag::kMagicBytes>({cfg_.transit->magic_bytes});
      send(card, Message::command(MsgName::kMagicBytes, std::move(p)));
    }

    Message list = send(card, Message::command(MsgName::kSelect));
    auto aids = list.ok() ? list.payload.find<Tag::kAidList>() : std::nullopt;
    if (!aids) stop("select_failed");
    auto aid = select_kernel(cfg_, aids->aids);
    if (!aid) stop("no_common_aid");
    s.aid = *aid;
    s.kernel = kernel_of(*aid);
    s.claim.set<Tag::kAid>(*aid);
    put_amount(s.claim, s.amount);

    DataElementMap sel;
    sel.set<Tag::kAid>(*aid);
    Message selected = send(card, Message::command(MsgName::kSelect, std::move(sel)));
    auto pdol = selected.ok() ? selected.payload.find<Tag::kPdol>() : std::nullopt;
    if (!pdol) stop("select_failed");

    s.un_t = cfg_.fixed_un ? *cfg_.fixed_un : Un{rng_.u32(), std::nullopt};
    DataElementMap env;
    put_amount(env, s.amount);
    env.set<Tag::kUnT>(s.un_t);
    if (s.kernel == 3) {
      const Ttq ttq = terminal_ttq(cfg_, s.amount.value);
      env.set<Tag::kTtq>(ttq);
      s.claim.set<Tag::kTtq>(ttq);
    }
    DataElementMap gpo_data;
    try {
      gpo_data = build_dol_data(*pdol, env);
    } catch (const MissingDolEntry&) {
      stop("pdol_unsatisfiable");
    }
    Message gpo = send(card, Message::command(MsgName::kGpo, std::move(gpo_data)));
    if (gpo.status == sw::kBlocked) stop("card_blocked");
    if (!gpo.ok()) stop("gpo_refused");
    auto aip = gpo.payload.find<Tag::kAip>();
    auto afl = gpo.payload.find<Tag::kAfl>();
    if (!aip || !afl) stop("gpo_incomplete");
    s.claim.set<Tag::kAip>(*aip);
    s.gpo = gpo.payload;

    for (uint8_t nr : afl->records) {
      DataElementMap p;
      p.set<Tag::kRecordNumber>({nr});
      Message rec = send(card, Message::command(MsgName::kReadRecord, std::move(p)));
      if (!rec.ok()) stop("read_record_failed");
      s.records.merge(rec.payload);
    }
    if (auto pan = s.records.find<Tag::kPan>()) s.out.pan = *pan;
    for (Tag t : {Tag::kPan, Tag::kCvmList, Tag::kIacDenial, Tag::kCaPkIndex}) {
      if (t == Tag::kCvmList && s.kernel != 2) continue;
      if (const Bytes* v = s.records.raw(t)) s.claim.set_raw(t, *v);
    }

    if (s.kernel == 2 && !aip->emv_mode_supported) {
      if (!cfg_.magstripe_supported) stop("no_emv_mode");
      s.mode = "magstripe";
      s.out.magstripe_mode = true;
      run_magstripe(card, s);
    } else if (s.kernel == 2) {
      run_kernel2(card, s);
    } else {
      run_kernel3(card, s);
    }
  } catch (const Stop& st) {
    s.out.decision = Decision::kDeclined;
    s.out.reason = st.reason;
  }
  finish(s);
  return s.out;
}

void Terminal::perform_online_pin(Session& s) {
  if (!s.tx.presenter.pin) stop("pin_not_entered");
  s.pin_blob = encrypt_pin(*s.tx.presenter.pin, cfg_.pin_key, rng_);
  trace_.mark(marker::kCvmEvent, name(), {},
              {{"method", "online_pin"}, {"by", s.tx.presenter.who}});
}

bool Terminal::perform_signature(Session& s) {
  if (cfg_.diligent_cashier && !s.tx.presenter.is_cardholder()) stop("signature_rejected");
  if (s.tx.presenter.is_cardholder()) {
    trace_.mark(marker::kCvmEvent, name(), {}, {{"method", "signature"}, {"by", "cardholder"}});
  }
  return true;
}

namespace {

ActionCodes iac_from(const DataElementMap& records) {
  ActionCodes iac{{false}, {false}, {false}};
  if (auto v = records.find<Tag::kIacDenial>()) iac.denial = *v;
  if (auto v = records.find<Tag::kIacOnline>()) iac.online = *v;
  if (auto v = records.find<Tag::kIacDefault>()) iac.default_ = *v;
  return iac;
}

void copy_tags(DataElementMap& to, const DataElementMap& from, std::initializer_list<Tag> tags) {
  for (Tag t : tags) {
    if (const Bytes* v = from.raw(t)) to.set_raw(t, *v);
  }
}

}  // namespace

void Terminal::run_kernel2(CardLink& card, Session& s) {
  const Aip aip = s.gpo.get<Tag::kAip>();
  std::optional<OdaMethod> method;
  if (aip.cda_supported) {
    method = OdaMethod::kCda;
  } else if (aip.dda_supported) {
    method = OdaMethod::kDda;
  } else if (aip.sda_supported) {
    method = OdaMethod::kSda;
  }

  Tvr tvr;
  Bytes card_pk;
  if (method) {
    const ChainResult chain = verify_card_chain(cfg_, s.records, method != OdaMethod::kSda);
    const bool lookup_failed = chain.status == ChainStatus::kLookupFailure;
    if (lookup_failed && cfg_.decline_on_ca_lookup_failure) stop("ca_lookup_failure");
    if (*method == OdaMethod::kCda) {
      if (chain.ok()) {
        card_pk = chain.card_pk;
      } else {
        tvr.cda_failed = true;
      }
    } else if (!chain.ok()) {
      stop("oda_failed");
    } else if (*method == OdaMethod::kDda) {
      auto sdad = s.records.find<Tag::kSdad>();
      auto un_c = s.records.find<Tag::kUnC>();
      if (!sdad || !un_c) stop("oda_failed");
      DataElementMap payload;
      payload.set<Tag::kUnC>(*un_c);
      payload.set<Tag::kUnT>(s.un_t);
      if (!verify_sdad(chain.card_pk, OdaMethod::kDda, payload, sdad->value)) stop("oda_failed");
    } else {
      auto ssad = s.records.find<Tag::kSsad>();
      if (!ssad) stop("oda_failed");
      DataElementMap payload = s.records.project(sda_coverage());
      payload.set<Tag::kAip>(aip);
      if (!verify_ssad(chain.issuer_pk, payload, ssad->value)) stop("oda_failed");
    }
  }
  s.out.tvr = tvr;

  const CvmList cvm_list = s.records.find<Tag::kCvmList>().value_or(CvmList{});
  const CvmResults cvm = select_cvm_kernel2(cfg_, aip, cvm_list, s.amount.value);
  if (cvm.method == CvmMethod::kOnlinePin) perform_online_pin(s);
  if (cvm.method == CvmMethod::kPaperSignature) perform_signature(s);
  s.out.cvm_results = cvm;

  const ActionCodes iac = iac_from(s.records);
  if ((tvr & (cfg_.tac.denial | iac.denial)).any()) stop("tvr_denial");
  const bool offline_candidate = s.amount.value <= cfg_.floor_limit &&
                                 !(tvr & (cfg_.tac.online | iac.online)).any();
  RefControl rc;
  rc.requested = offline_candidate || !cfg_.online_capable ? CidKind::kTc : CidKind::kArqc;
  rc.cda_requested =
      method == OdaMethod::kCda && !(tvr.cda_failed && !aip.on_device_cvm_supported);

  DataElementMap env;
  put_amount(env, s.amount);
  env.set<Tag::kUnT>(s.un_t);
  const Tvr genac_tvr = tvr;
  env.set<Tag::kTvr>(genac_tvr);
  env.set<Tag::kCvmResults>(cvm);
  const Dol cdol = s.records.find<Tag::kCdol1>().value_or(cdol1_for_kernel2());
  DataElementMap cmd;
  try {
    cmd = build_dol_data(cdol, env);
  } catch (const MissingDolEntry&) {
    stop("cdol_unsatisfiable");
  }
  cmd.set<Tag::kRefControl>(rc);
  Message rsp = send(card, Message::command(MsgName::kGenerateAc, std::move(cmd)));
  if (!rsp.ok()) stop("genac_failed");
  auto cid = rsp.payload.find<Tag::kCid>();
  auto atc = rsp.payload.find<Tag::kAtc>();
  auto ac = rsp.payload.find<Tag::kAc>();
  auto iad = rsp.payload.find<Tag::kIad>();
  if (!cid || !atc || !ac || !iad) stop("genac_incomplete");
  s.claim.set<Tag::kAc>(*ac);
  s.claim.set<Tag::kAtc>(*atc);

  if (rc.cda_requested) {
    auto sdad = rsp.payload.find<Tag::kSdad>();
    auto un_c = rsp.payload.find<Tag::kUnC>();
    bool ok = false;
    if (sdad && un_c && !card_pk.empty()) {
      DataElementMap payload;
      payload.set<Tag::kUnC>(*un_c);
      payload.set<Tag::kUnT>(s.un_t);
      payload.set<Tag::kAc>(*ac);
      payload.set<Tag::kAtc>(*atc);
      payload.set<Tag::kIad>(*iad);
      payload.set<Tag::kCid>(*cid);
      payload.set<Tag::kAip>(aip);
      ok = verify_sdad(card_pk, OdaMethod::kCda, payload, sdad->value);
    }
    if (!ok) tvr.cda_failed = true;
  }
  s.out.tvr = tvr;

  DataElementMap req;
  copy_tags(req, s.records, {Tag::kPan, Tag::kExpiry});
  put_amount(req, s.amount);
  req.set<Tag::kAid>(s.aid);
  req.set<Tag::kAtc>(*atc);
  req.set<Tag::kAc>(*ac);
  req.set<Tag::kIad>(*iad);
  req.set<Tag::kCid>(*cid);
  req.set<Tag::kUnT>(s.un_t);
  req.set<Tag::kAip>(aip);
  req.set<Tag::kTvr>(genac_tvr);
  req.set<Tag::kCvmResults>(cvm);
  if (s.pin_blob) req.set<Tag::kPinBlob>({*s.pin_blob});

  switch (action_analysis(cfg_, tvr, iac, s.amount.value, cid->kind)) {
    case Action::kDecline:
      stop(cid->kind == CidKind::kAac ? "card_declined" : "tvr_denial");
    case Action::kOfflineOk:
      s.out.decision = Decision::kAcceptedOffline;
      s.out.reason = "offline";
      s.out.clearing_record = std::move(req);
      return;
    case Action::kGoOnline:
      go_online(s, std::move(req));
      return;
  }
}

void Terminal::run_kernel3(CardLink& card, Session& s) {
  (void)card;
  const Aip aip = s.gpo.get<Tag::kAip>();
  auto iad = s.gpo.find<Tag::kIad>();
  auto ac = s.gpo.find<Tag::kAc>();
  auto cid = s.gpo.find<Tag::kCid>();
  auto atc = s.gpo.find<Tag::kAtc>();
  auto ctq = s.gpo.find<Tag::kCtq>();
  if (!iad || !ac || !cid || !atc || !ctq) stop("gpo_incomplete");
  s.claim.set<Tag::kCtq>(*ctq);
  s.claim.set<Tag::kAc>(*ac);
  s.claim.set<Tag::kAtc>(*atc);
  const Ttq ttq = terminal_ttq(cfg_, s.amount.value);

  bool oda_ok = false;
  if (aip.dda_supported) {
    const ChainResult chain = verify_card_chain(cfg_, s.records, true);
    if (chain.status == ChainStatus::kLookupFailure) stop("ca_lookup_failure");
    if (!chain.ok()) stop("oda_failed");
    auto sdad = s.records.find<Tag::kSdad>();
    auto un_c = s.records.find<Tag::kUnC>();
    if (!sdad || !un_c) stop("oda_failed");
    DataElementMap payload;
    payload.set<Tag::kUnC>(*un_c);
    payload.set<Tag::kUnT>(s.un_t);
    payload.set<Tag::kAtc>(*atc);
    payload.set<Tag::kCtq>(*ctq);
    payload.set<Tag::kAip>(aip);
    if (!verify_sdad(chain.card_pk, OdaMethod::kFdda, payload, sdad->value)) stop("oda_failed");
    oda_ok = true;
  } else if (cfg_.kernel3_require_fdda) {
    stop("fdda_required");
  }

  CvmResults cvm = CvmResults::none();
  switch (select_cvm_kernel3(ttq, *ctq)) {
    case K3Cvm::kCdcvm: cvm = {CvmMethod::kCdcvm, CvmOutcome::kPerformed}; break;
    case K3Cvm::kOnlinePin:
      perform_online_pin(s);
      cvm = {CvmMethod::kOnlinePin, CvmOutcome::kPerformed};
      break;
    case K3Cvm::kSignature:
      perform_signature(s);
      cvm = {CvmMethod::kPaperSignature, CvmOutcome::kPerformed};
      break;
    case K3Cvm::kNoCvm: break;
    case K3Cvm::kDecline: stop("cvm_required");
  }
  s.out.cvm_results = cvm;
  if (cid->kind == CidKind::kAac) stop("card_declined");

  DataElementMap req;
  copy_tags(req, s.records, {Tag::kPan, Tag::kExpiry});
  put_amount(req, s.amount);
  req.set<Tag::kAid>(s.aid);
  req.set<Tag::kAtc>(*atc);
  req.set<Tag::kAc>(*ac);
  req.set<Tag::kIad>(*iad);
  req.set<Tag::kCid>(*cid);
  req.set<Tag::kUnT>(s.un_t);
  req.set<Tag::kAip>(aip);
  req.set<Tag::kTtq>(ttq);
  req.set<Tag::kCtq>(*ctq);
  req.set<Tag::kTvr>(Tvr{});
  req.set<Tag::kCvmResults>(cvm);
  if (s.pin_blob) req.set<Tag::kPinBlob>({*s.pin_blob});

  if (cid->kind == CidKind::kTc && oda_ok && s.amount.value <= cfg_.floor_limit) {
    s.out.decision = Decision::kAcceptedOffline;
    s.out.reason = "offline";
    s.out.clearing_record = std::move(req);
    return;
  }
  go_online(s, std::move(req));
}

void Terminal::run_magstripe(CardLink& card, Session& s) {
  auto track = s.records.find<Tag::kTrack2Data>();
  if (!track || track->discretionary.empty()) stop("no_track2");
  const uint8_t n = track->discretionary[0];
  if (n < 1 || n > 8) stop("no_track2");
  s.out.pan = track->pan;
  s.claim.set<Tag::kPan>(track->pan);

  CvmResults cvm = CvmResults::none();
  if (s.amount.value > cfg_.cvm_required_limit) {
    perform_online_pin(s);
    cvm = {CvmMethod::kOnlinePin, CvmOutcome::kPerformed};
  }
  s.out.cvm_results = cvm;

  const int budget = cfg_.retry_un_on_failure ? cfg_.retry_budget : 1;
  std::optional<Message> rsp;
  Un un;
  for (int i = 0; i < budget && !rsp; ++i) {
    un = Un{static_cast<uint32_t>(rng_.below(pow10(n))), n};
    DataElementMap p;
    p.set<Tag::kMagstripeUn>(un);
    ++s.out.attempts;
    Message r = send(card, Message::command(MsgName::kComputeCc, std::move(p)));
    if (r.ok() && r.payload.has(Tag::kAtc) && r.payload.has(Tag::kCvc3)) rsp = std::move(r);
  }
  if (!rsp) stop("cvc3_unavailable");
  const Atc atc = rsp->payload.get<Tag::kAtc>();
  const Blob cvc3 = rsp->payload.get<Tag::kCvc3>();
  s.claim.set<Tag::kAtc>(atc);
  s.claim.set<Tag::kCvc3>(cvc3);

  DataElementMap req;
  req.set<Tag::kPan>(track->pan);
  req.set<Tag::kExpiry>(track->expiry);
  put_amount(req, s.amount);
  req.set<Tag::kAid>(s.aid);
  req.set<Tag::kAtc>(atc);
  req.set<Tag::kCvc3>(cvc3);
  req.set<Tag::kMagstripeUn>(un);
  req.set<Tag::kAip>(s.gpo.get<Tag::kAip>());
  req.set<Tag::kCvmResults>(cvm);
  if (s.pin_blob) req.set<Tag::kPinBlob>({*s.pin_blob});
  go_online(s, std::move(req));
}

void Terminal::go_online(Session& s, DataElementMap request) {
  if (!cfg_.online_capable) stop("offline_only");
  if (!acquirer_) stop("no_acquirer");
  request.set<Tag::kTerminalId>({cfg_.terminal_id});
  Message rsp = acquirer_->submit(name(), Message::command(MsgName::kAuthRequest, request));
  auto decision = rsp.payload.find<Tag::kAuthDecision>();
  if (!rsp.ok() || !decision || decision->value != auth::kApprove) {
    auto why = rsp.payload.find<Tag::kDeclineReason>();
    stop("issuer_declined" + (why ? ":" + why->value : std::string()));
  }
  s.out.decision = Decision::kAcceptedOnline;
  s.out.reason = "online_approved";
}

void Terminal::finish(Session& s) {
  if (s.claim.has(Tag::kAid)) trace_.mark(marker::kTerminalClaim, name(), s.claim);
  DataElementMap data;
  put_amount(data, s.amount);
  if (s.out.pan) data.set<Tag::kPan>(*s.out.pan);
  std::map<std::string, std::string> attrs = {
      {"decision", std::string(decision_name(s.out.decision))},
      {"reason", s.out.reason},
      {"mode", s.mode},
      {"kernel", std::to_string(s.kernel)},
      {"cvm", std::string(cvm_method_name(s.out.cvm_results.method))},
      {"merchant_id", cfg_.merchant_id},
  };
  trace_.mark(marker::kTerminalDecision, name(), std::move(data), std::move(attrs));
}

bool Terminal::submit_clearing(const TerminalOutcome& outcome) {
  if (outcome.decision != Decision::kAcceptedOffline || !acquirer_) return false;
  DataElementMap req = outcome.clearing_record;
  req.set<Tag::kTerminalId>({cfg_.terminal_id});
  Message rsp = acquirer_->submit(name(), Message::command(MsgName::kClearingSubmit, req));
  auto decision = rsp.payload.find<Tag::kAuthDecision>();
  return rsp.ok() && decision && decision->value == auth::kApprove;
}

}  // namespace emvsim
