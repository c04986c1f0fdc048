#include "emvsim/issuer.h"

#include "emvsim/card.h"

namespace emvsim {

Issuer::Issuer(IssuerPolicy policy, PinKey pin_key, Trace& trace)
    : policy_(std::move(policy)), pin_key_(std::move(pin_key)), trace_(trace) {}

void Issuer::register_card(IssuerCardRecord record) {
  std::string key = record.pan.digits;
  cards_[key] = std::move(record);
}

const IssuerCardRecord* Issuer::card(const Pan& pan) const {
  auto it = cards_.find(pan.digits);
  return it == cards_.end() ? nullptr : &it->second;
}

bool Issuer::verify_pin_online(const Pan& pan, ByteView blob) const {
  const IssuerCardRecord* c = card(pan);
  return c && verify_online_pin(blob, pin_key_, c->pin);
}

bool Issuer::verify_cryptogram(const IssuerCardRecord& c, const DataElementMap& req) const {
  auto atc = req.find<Tag::kAtc>();
  if (!atc) return false;
  if (auto cvc3 = req.find<Tag::kCvc3>()) {
    auto un = req.find<Tag::kMagstripeUn>();
    if (!c.cvc3_key || !un || !un->digits) return false;
    return compute_cvc3(*c.cvc3_key, *atc, *un) == cvc3->value;
  }
  auto ac = req.find<Tag::kAc>();
  if (!ac) return false;
  const auto coverage = ac_coverage(c.kernel, c.covers_ttq, c.covers_aid);
  const DataElementMap inputs = req.project(coverage);
  if (inputs.size() != coverage.size()) return false;
  return verify_ac(kdf(c.mk, *atc), coverage, inputs, ac->value);
}

Verdict Issuer::authorize(const DataElementMap& req) {
  auto pan = req.find<Tag::kPan>();
  auto it = pan ? cards_.find(pan->digits) : cards_.end();
  if (it == cards_.end()) return {false, "unknown_pan"};
  IssuerCardRecord& c = it->second;

  // (1) Cryptogram.
  if (!verify_cryptogram(c, req)) return {false, "ac_invalid"};
  const Atc atc = req.get<Tag::kAtc>();
  const Bytes mac = req.has(Tag::kAc) ? req.get<Tag::kAc>().value : req.get<Tag::kCvc3>().value;

  // (2) ATC ordering.
  if (policy_.check_atc_order && c.last_atc && !(atc > *c.last_atc)) return {false, "atc_order"};
  if (!c.last_atc || atc > *c.last_atc) c.last_atc = atc;
  c.seen_acs.insert({atc.value, mac});

  // (3) UN reuse per terminal.
  if (policy_.check_un_reuse) {
    auto un = req.find<Tag::kUnT>();
    auto tid = req.find<Tag::kTerminalId>();
    if (un && tid) {
      auto key = std::make_pair(tid->value, un->value);
      if (c.seen_uns.count(key)) return {false, "un_reuse"};
      c.seen_uns.insert(key);
    }
  }

  // (4) AID against PAN brand.
  if (policy_.check_aid_pan_match) {
    auto aid = req.find<Tag::kAid>();
    const Brand b = brand_of(*pan);
    const bool ok = aid && (b == Brand::kVisa ? *aid == kAidVisa
                                              : kernel_of(*aid) == 2 && b != Brand::kOther);
    if (!ok) return {false, "aid_pan_mismatch"};
  }

  const auto iad = req.find<Tag::kIad>();
  const bool iad_cdcvm = iad && iad->cdcvm_performed;
  const Amount amount = get_amount(req);
  const bool high_value = amount.value > policy_.cvm_limit;

  // (5) A plastic card cannot perform CDCVM.
  if (policy_.check_plastic_cdcvm && iad && iad->device_type == DeviceType::kPlastic) {
    auto ctq = req.find<Tag::kCtq>();
    auto cvm = req.find<Tag::kCvmResults>();
    const bool claimed = iad->cdcvm_performed || (ctq && ctq->cdcvm_performed) ||
                         (cvm && cvm->method == CvmMethod::kCdcvm);
    if (claimed) return {false, "plastic_cdcvm"};
  }

  // (6) A phone outside transit must have verified the cardholder.
  if (policy_.check_mcc_for_wallet_no_cdcvm && iad && iad->device_type == DeviceType::kPhone &&
      !iad->cdcvm_performed && high_value) {
    auto mcc = req.find<Tag::kMcc>();
    if (!mcc || !mcc->is_transit()) return {false, "wallet_no_cdcvm"};
  }

  // (7) Online PIN.
  bool pin_ok = false;
  if (auto blob = req.find<Tag::kPinBlob>()) {
    pin_ok = verify_online_pin(blob->value, pin_key_, c.pin);
    if (!pin_ok) return {false, "wrong_pin"};
  }

  // (8) High value needs a verified cardholder.
  if (policy_.enforce_cvm_limit && high_value && !pin_ok && !iad_cdcvm) {
    const bool foreign = amount.currency != policy_.home_currency;
    if (!foreign || policy_.foreign_cvm_limit_enforced) return {false, "cvm_limit"};
  }
  return {true, "approved"};
}

Verdict Issuer::clear(const DataElementMap& record) {
  auto pan = record.find<Tag::kPan>();
  auto it = pan ? cards_.find(pan->digits) : cards_.end();
  if (it == cards_.end()) return {false, "unknown_pan"};
  IssuerCardRecord& c = it->second;
  if (!verify_cryptogram(c, record)) return {false, "ac_invalid"};
  const Atc atc = record.get<Tag::kAtc>();
  if (policy_.check_atc_order && c.last_atc && !(atc > *c.last_atc)) return {false, "atc_order"};
  if (!c.last_atc || atc > *c.last_atc) c.last_atc = atc;
  return {true, "approved"};
}

void Issuer::emit(std::string_view kind, const DataElementMap& req, const Verdict& v) {
  DataElementMap claim =
      req.project({Tag::kPan, Tag::kAmount, Tag::kCurrency, Tag::kAid, Tag::kTtq, Tag::kCtq,
                   Tag::kAip, Tag::kAc, Tag::kAtc, Tag::kCvc3});
  trace_.mark(marker::kIssuerClaim, name(), claim);
  std::map<std::string, std::string> attrs = {
      {"kind", std::string(kind)},
      {"decision", v.approve ? "approve" : "decline"},
      {"reason", v.reason},
  };
  if (auto m = req.find<Tag::kMerchantId>()) attrs["merchant_id"] = m->value;
  if (auto m = req.find<Tag::kMcc>()) attrs["mcc"] = std::to_string(m->code);
  if (auto t = req.find<Tag::kTerminalId>()) attrs["terminal_id"] = t->value;
  trace_.mark(marker::kIssuerDecision, name(), std::move(claim), std::move(attrs));
}

Message Issuer::handle(const Message& req) {
  const bool clearing = req.name == MsgName::kClearingSubmit;
  if (!clearing && req.name != MsgName::kAuthRequest) {
    return Message::error(req.name, sw::kNotSupported);
  }
  Verdict v;
  try {
    v = clearing ? clear(req.payload) : authorize(req.payload);
  } catch (const MissingElement&) {
    v = {false, "incomplete_request"};
  }
  emit(clearing ? "clearing" : "auth", req.payload, v);
  DataElementMap p;
  p.set<Tag::kAuthDecision>({v.approve ? auth::kApprove : auth::kDecline});
  if (!v.approve) p.set<Tag::kDeclineReason>({v.reason});
  return Message::response(clearing ? MsgName::kClearingResponse : MsgName::kAuthResponse,
                           std::move(p));
}

}  // namespace emvsim
