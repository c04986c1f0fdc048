#include "emvsim/card.h"

#include <algorithm>

namespace emvsim {

namespace {

bool contains(const std::vector<Tag>& v, Tag t) {
  return std::find(v.begin(), v.end(), t) != v.end();
}

Bytes ascii(std::string_view s) { return Bytes(s.begin(), s.end()); }

}  // namespace

std::string_view wallet_name(WalletBehavior w) {
  switch (w) {
    case WalletBehavior::kNone: return "none";
    case WalletBehavior::kGoogleLike: return "google_like";
    case WalletBehavior::kAppleLike: return "apple_like";
    case WalletBehavior::kSamsungLike: return "samsung_like";
  }
  return "?";
}

std::optional<WalletBehavior> wallet_from(std::string_view s) {
  for (auto w : {WalletBehavior::kNone, WalletBehavior::kGoogleLike, WalletBehavior::kAppleLike,
                 WalletBehavior::kSamsungLike}) {
    if (wallet_name(w) == s) return w;
  }
  return std::nullopt;
}

int kernel_of(const Aid& aid) {
  if (aid == kAidVisa) return 3;
  if (aid == kAidMastercard || aid == kAidMaestro) return 2;
  return 0;
}

Dol pdol_for_kernel(int kernel) {
  if (kernel == 3) return {{Tag::kTtq, Tag::kAmount, Tag::kCurrency, Tag::kUnT}};
  return {{Tag::kUnT}};
}

Dol cdol1_for_kernel2() {
  return {{Tag::kAmount, Tag::kCurrency, Tag::kUnT, Tag::kTvr, Tag::kCvmResults}};
}

std::vector<Tag> ac_coverage(int kernel, bool covers_ttq, bool covers_aid) {
  std::vector<Tag> out;
  for (Tag t : pdol_for_kernel(kernel).tags) {
    if (t == Tag::kTtq && !covers_ttq) continue;
    out.push_back(t);
  }
  if (kernel == 2) {
    for (Tag t : cdol1_for_kernel2().tags) {
      if (!contains(out, t)) out.push_back(t);
    }
  }
  out.push_back(Tag::kAip);
  out.push_back(Tag::kAtc);
  out.push_back(Tag::kIad);
  if (covers_aid) out.push_back(Tag::kAid);
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<OdaMethod> CardProfile::oda_for_kernel(int kernel) const {
  auto has = [&](OdaMethod m) { return oda_methods.count(m) != 0; };
  if (kernel == 3) {
    if (has(OdaMethod::kFdda)) return OdaMethod::kFdda;
    return std::nullopt;
  }
  for (auto m : {OdaMethod::kCda, OdaMethod::kDda, OdaMethod::kSda}) {
    if (has(m)) return m;
  }
  return std::nullopt;
}

void CardProfile::check() const {
  if (!luhn_valid(pan.digits)) throw ConfigError(id + ": PAN fails Luhn");
  if (aids.empty()) throw ConfigError(id + ": no applications");
  const Brand b = brand();
  for (const auto& a : aids) {
    bool ok = b == Brand::kVisa ? a == kAidVisa
                                : (b == Brand::kMastercard || b == Brand::kMaestro) &&
                                      (a == kAidMastercard || a == kAidMaestro);
    if (!ok) throw ConfigError(id + ": AID " + aid_label(a) + " inconsistent with PAN brand");
  }
  if (pin.size() != 4) throw ConfigError(id + ": PIN must have 4 digits");
  if (pin_try_limit != 0 && pin_try_counter > pin_try_limit) {
    throw ConfigError(id + ": PIN try counter above limit");
  }
  for (auto m : {OdaMethod::kDda, OdaMethod::kCda, OdaMethod::kFdda}) {
    if (oda_methods.count(m) && !card_key) {
      throw ConfigError(id + ": " + std::string(oda_method_name(m)) + " needs a card key pair");
    }
  }
  if (magstripe && (magstripe->n_un_digits < 1 || magstripe->n_un_digits > 8)) {
    throw ConfigError(id + ": mag-stripe UN digit count out of range");
  }
}

std::map<uint8_t, DataElementMap> build_records(const CardProfile& p) {
  std::map<uint8_t, DataElementMap> r;
  auto& r1 = r[1];
  r1.set<Tag::kRecordNumber>({1});
  r1.set<Tag::kPan>(p.pan);
  r1.set<Tag::kExpiry>(p.expiry);
  r1.set<Tag::kCardholderName>({p.cardholder_name});
  if (p.track_data_in_emv) {
    r1.set<Tag::kTrack2Equivalent>({p.pan, p.expiry, p.service_code, ascii(p.track_cvv)});
  }

  auto& r2 = r[2];
  r2.set<Tag::kRecordNumber>({2});
  bool has_kernel2 = std::any_of(p.aids.begin(), p.aids.end(),
                                 [](const Aid& a) { return kernel_of(a) == 2; });
  if (has_kernel2) r2.set<Tag::kCdol1>(cdol1_for_kernel2());
  r2.set<Tag::kCvmList>(p.cvm_list);
  r2.set<Tag::kIacDefault>(p.iac.default_);
  r2.set<Tag::kIacDenial>(p.iac.denial);
  r2.set<Tag::kIacOnline>(p.iac.online);

  auto& r3 = r[3];
  r3.set<Tag::kRecordNumber>({3});
  r3.set<Tag::kCaPkIndex>({p.ca_index});
  r3.set<Tag::kIssuerPkCert>(p.chain.issuer_cert);
  if (p.chain.card_cert) r3.set<Tag::kIccPkCert>(*p.chain.card_cert);
  if (p.oda_methods.count(OdaMethod::kSda)) r3.set<Tag::kSsad>({p.ssad});

  if (p.magstripe) {
    auto& r5 = r[Card::kMagstripeRecord];
    r5.set<Tag::kRecordNumber>({Card::kMagstripeRecord});
    r5.set<Tag::kTrack1Data>({p.pan, p.expiry, p.service_code, ascii(p.track_cvv)});
    r5.set<Tag::kTrack2Data>({p.pan, p.expiry, p.service_code, {p.magstripe->n_un_digits}});
  }
  return r;
}

Afl afl_for(const CardProfile& p) {
  Afl afl{{1, 2, 3}};
  bool dynamic = false;
  for (const auto& a : p.aids) {
    auto m = p.oda_for_kernel(kernel_of(a));
    if (m == OdaMethod::kDda || m == OdaMethod::kFdda) dynamic = true;
  }
  if (dynamic) afl.records.push_back(Card::kDynamicRecord);
  if (p.magstripe) afl.records.push_back(Card::kMagstripeRecord);
  return afl;
}

PrintedFace printed_face(const CardProfile& p) { return {p.pan, p.expiry, p.printed_csc}; }

Card::Card(CardProfile profile, Rng& rng, Trace& trace)
    : profile_(std::move(profile)), rng_(rng), trace_(trace) {
  profile_.check();
  records_ = build_records(profile_);
}

int Card::processing_latency(MsgName n) const {
  return n == MsgName::kReadRecord ? profile_.read_record_latency : 0;
}

void Card::reset_pin_counter() {
  profile_.pin_try_counter = profile_.pin_try_limit;
  trace_.mark(marker::kPinCounterReset, endpoint_name());
}

Message Card::handle(const Message& cmd) {
  if (cmd.direction != Direction::kCommand) return Message::error(cmd.name, sw::kNotSupported);
  switch (cmd.name) {
    case MsgName::kSelect: return on_select(cmd);
    case MsgName::kGpo: return on_gpo(cmd);
    case MsgName::kReadRecord: return on_read_record(cmd);
    case MsgName::kGenerateAc: return on_generate_ac(cmd);
    case MsgName::kVerify: return on_verify(cmd);
    case MsgName::kComputeCc: return on_compute_cc(cmd);
    case MsgName::kMagicBytes: return on_magic_bytes(cmd);
    default: return Message::error(cmd.name, sw::kNotSupported);
  }
}

Atc Card::next_atc() {
  if (profile_.atc.value == 0xFFFF) throw ConfigError(profile_.id + ": ATC exhausted");
  ++profile_.atc.value;
  return profile_.atc;
}

Un Card::fresh_un_c() { return {rng_.u32(), std::nullopt}; }

DataElementMap Card::static_claim() const {
  DataElementMap d;
  d.set<Tag::kPan>(profile_.pan);
  if (active_) d.set<Tag::kAid>(*active_);
  d.set<Tag::kCvmList>(profile_.cvm_list);
  d.set<Tag::kIacDenial>(profile_.iac.denial);
  d.set<Tag::kCaPkIndex>({profile_.ca_index});
  return d;
}

void Card::claim(DataElementMap data, std::vector<Tag> absent) {
  trace_.mark(marker::kCardClaim, endpoint_name(), std::move(data), {}, std::move(absent));
}

Message Card::on_select(const Message& cmd) {
  auto aid = cmd.payload.find<Tag::kAid>();
  if (!aid) {
    active_.reset();
    DataElementMap p;
    p.set<Tag::kAidList>({profile_.aids});
    return Message::response(MsgName::kSelect, std::move(p));
  }
  if (std::find(profile_.aids.begin(), profile_.aids.end(), *aid) == profile_.aids.end()) {
    return Message::error(MsgName::kSelect, sw::kNotFound);
  }
  active_ = *aid;
  kernel_ = kernel_of(*aid);
  gpo_done_ = false;
  DataElementMap p;
  p.set<Tag::kAid>(*aid);
  p.set<Tag::kPdol>(pdol_for_kernel(kernel_));
  return Message::response(MsgName::kSelect, std::move(p));
}

bool Card::wallet_accepts(const Ttq& ttq, uint64_t amount) const {
  if (profile_.lock == LockState::kUnlocked) return true;
  switch (profile_.wallet) {
    case WalletBehavior::kNone: return true;
    case WalletBehavior::kGoogleLike: return !ttq.cvm_required;
    case WalletBehavior::kAppleLike: return gate_open_ && ttq.oda_for_online_supported;
    case WalletBehavior::kSamsungLike: return gate_open_ && amount == 0;
  }
  return false;
}

Ctq Card::make_ctq(const Ttq& ttq, const Amount& amount) const {
  Ctq ctq;
  if (profile_.device_type == DeviceType::kPhone) {
    if (profile_.lock == LockState::kUnlocked) {
      ctq.cdcvm_performed = true;
    } else {
      ctq.cdcvm_performed =
          profile_.wallet == WalletBehavior::kGoogleLike && profile_.wallet_always_cdcvm;
    }
    return ctq;
  }
  const bool foreign = amount.currency != profile_.home_currency;
  const bool over_limit = profile_.card_cvm_limit && amount.value > *profile_.card_cvm_limit;
  const bool needed =
      (ttq.cvm_required || over_limit) && !(foreign && profile_.foreign_currency_no_cvm);
  ctq.online_pin_required = needed && ttq.online_pin_supported;
  ctq.signature_required = needed && !ttq.online_pin_supported && ttq.signature_supported;
  return ctq;
}

Message Card::on_gpo(const Message& cmd) {
  if (!active_) return Message::error(MsgName::kGpo, sw::kRefused);
  if (profile_.blocked()) return Message::error(MsgName::kGpo, sw::kBlocked);
  DataElementMap data;
  try {
    data = build_dol_data(pdol_for_kernel(kernel_), cmd.payload);
  } catch (const MissingDolEntry&) {
    return Message::error(MsgName::kGpo, sw::kWrongData);
  }
  pdol_data_ = data;
  sent_aip_ = profile_.aip;
  const Afl afl = afl_for(profile_);

  if (kernel_ == 2) {
    gpo_done_ = true;
    DataElementMap c = static_claim();
    c.set<Tag::kAip>(sent_aip_);
    claim(std::move(c), {Tag::kCtq});
    DataElementMap p;
    p.set<Tag::kAip>(sent_aip_);
    p.set<Tag::kAfl>(afl);
    return Message::response(MsgName::kGpo, std::move(p));
  }

  const Ttq ttq = data.get<Tag::kTtq>();
  const Amount amount = get_amount(data);
  if (!wallet_accepts(ttq, amount.value)) return Message::error(MsgName::kGpo, sw::kRefused);

  const Ctq ctq = make_ctq(ttq, amount);
  const Atc atc = next_atc();
  const Iad iad{ctq.cdcvm_performed, profile_.device_type, {}};
  const Cid cid{profile_.oda_methods.count(OdaMethod::kFdda) ? CidKind::kTc : CidKind::kArqc};

  const auto coverage = ac_coverage(3, profile_.ac_covers_ttq, profile_.ac_covers_aid);
  DataElementMap inputs = data.project(coverage);
  inputs.set<Tag::kAip>(sent_aip_);
  inputs.set<Tag::kAtc>(atc);
  inputs.set<Tag::kIad>(iad);
  if (profile_.ac_covers_aid) inputs.set<Tag::kAid>(*active_);
  const Bytes ac = compute_ac(kdf(profile_.mk, atc), coverage, inputs);

  gpo_atc_ = atc;
  gpo_ctq_ = ctq;
  gpo_done_ = true;

  if (profile_.device_type == DeviceType::kPhone && profile_.lock == LockState::kUnlocked) {
    trace_.mark(marker::kCvmEvent, endpoint_name(), {},
                {{"method", "cdcvm"}, {"by", "cardholder"}});
  }

  DataElementMap c = static_claim();
  c.set<Tag::kAmount>({amount.value});
  c.set<Tag::kCurrency>({amount.currency});
  c.set<Tag::kTtq>(ttq);
  c.set<Tag::kCtq>(ctq);
  c.set<Tag::kAip>(sent_aip_);
  c.set<Tag::kAc>({ac});
  c.set<Tag::kAtc>(atc);
  claim(std::move(c), {});

  DataElementMap p;
  p.set<Tag::kAip>(sent_aip_);
  p.set<Tag::kAfl>(afl);
  p.set<Tag::kIad>(iad);
  p.set<Tag::kAc>({ac});
  p.set<Tag::kCid>(cid);
  p.set<Tag::kAtc>(atc);
  p.set<Tag::kCtq>(ctq);
  return Message::response(MsgName::kGpo, std::move(p));
}

Message Card::on_read_record(const Message& cmd) {
  auto nr = cmd.payload.find<Tag::kRecordNumber>();
  if (!nr) return Message::error(MsgName::kReadRecord, sw::kWrongData);
  const Afl afl = afl_for(profile_);
  if (std::find(afl.records.begin(), afl.records.end(), nr->value) == afl.records.end()) {
    return Message::error(MsgName::kReadRecord, sw::kRecordNotFound);
  }
  if (nr->value != kDynamicRecord) {
    return Message::response(MsgName::kReadRecord, records_.at(nr->value));
  }

  if (!gpo_done_ || !active_) return Message::error(MsgName::kReadRecord, sw::kRefused);
  auto method = profile_.oda_for_kernel(kernel_);
  if (method != OdaMethod::kDda && method != OdaMethod::kFdda) {
    return Message::error(MsgName::kReadRecord, sw::kRecordNotFound);
  }
  const Un un_c = fresh_un_c();
  DataElementMap signed_part;
  signed_part.set<Tag::kUnC>(un_c);
  signed_part.set<Tag::kUnT>(pdol_data_.get<Tag::kUnT>());
  if (method == OdaMethod::kFdda) {
    signed_part.set<Tag::kAtc>(gpo_atc_);
    signed_part.set<Tag::kCtq>(gpo_ctq_);
    signed_part.set<Tag::kAip>(sent_aip_);
  }
  DataElementMap p;
  p.set<Tag::kRecordNumber>({kDynamicRecord});
  p.set<Tag::kUnC>(un_c);
  p.set<Tag::kSdad>({sign_sdad(*profile_.card_key, *method, signed_part)});
  if (method == OdaMethod::kFdda) p.set<Tag::kCtq>(gpo_ctq_);
  return Message::response(MsgName::kReadRecord, std::move(p));
}

Message Card::on_generate_ac(const Message& cmd) {
  if (kernel_ != 2) return Message::error(MsgName::kGenerateAc, sw::kNotSupported);
  if (!gpo_done_) return Message::error(MsgName::kGenerateAc, sw::kRefused);
  DataElementMap cdol;
  try {
    cdol = build_dol_data(cdol1_for_kernel2(), cmd.payload);
  } catch (const MissingDolEntry&) {
    return Message::error(MsgName::kGenerateAc, sw::kWrongData);
  }
  const RefControl rc = cmd.payload.find<Tag::kRefControl>().value_or(RefControl{});
  const CvmResults cvm = cdol.get<Tag::kCvmResults>();

  const Atc atc = next_atc();
  const bool cdcvm = cvm.method == CvmMethod::kCdcvm &&
                     profile_.device_type == DeviceType::kPhone &&
                     profile_.lock == LockState::kUnlocked;
  const Iad iad{cdcvm, profile_.device_type, {}};
  const Cid cid{rc.requested};

  const auto coverage = ac_coverage(2, profile_.ac_covers_ttq, profile_.ac_covers_aid);
  DataElementMap all = pdol_data_;
  all.merge(cdol);
  DataElementMap inputs = all.project(coverage);
  inputs.set<Tag::kAip>(sent_aip_);
  inputs.set<Tag::kAtc>(atc);
  inputs.set<Tag::kIad>(iad);
  if (profile_.ac_covers_aid) inputs.set<Tag::kAid>(*active_);
  const Bytes ac = compute_ac(kdf(profile_.mk, atc), coverage, inputs);

  DataElementMap p;
  p.set<Tag::kCid>(cid);
  p.set<Tag::kAtc>(atc);
  p.set<Tag::kAc>({ac});
  p.set<Tag::kIad>(iad);
  if (rc.cda_requested && profile_.oda_methods.count(OdaMethod::kCda)) {
    const Un un_c = fresh_un_c();
    DataElementMap signed_part;
    signed_part.set<Tag::kUnC>(un_c);
    signed_part.set<Tag::kUnT>(cdol.get<Tag::kUnT>());
    signed_part.set<Tag::kAc>({ac});
    signed_part.set<Tag::kAtc>(atc);
    signed_part.set<Tag::kIad>(iad);
    signed_part.set<Tag::kCid>(cid);
    signed_part.set<Tag::kAip>(sent_aip_);
    p.set<Tag::kUnC>(un_c);
    p.set<Tag::kSdad>({sign_sdad(*profile_.card_key, OdaMethod::kCda, signed_part)});
  }
  gpo_done_ = false;
  if (cdcvm) {
    trace_.mark(marker::kCvmEvent, endpoint_name(), {},
                {{"method", "cdcvm"}, {"by", "cardholder"}});
  }

  DataElementMap c = static_claim();
  c.set<Tag::kAmount>(cdol.get<Tag::kAmount>());
  c.set<Tag::kCurrency>(cdol.get<Tag::kCurrency>());
  c.set<Tag::kAip>(sent_aip_);
  c.set<Tag::kAc>({ac});
  c.set<Tag::kAtc>(atc);
  claim(std::move(c), {Tag::kCtq});
  return Message::response(MsgName::kGenerateAc, std::move(p));
}

Message Card::on_verify(const Message& cmd) {
  if (!profile_.offline_pin_enabled) return Message::error(MsgName::kVerify, sw::kNotSupported);
  const bool unlimited = profile_.pin_try_limit == 0;
  const uint8_t remaining_unlimited = 0xFF;
  auto counter = [&]() -> uint8_t {
    return unlimited ? remaining_unlimited : profile_.pin_try_counter;
  };
  auto guess = cmd.payload.find<Tag::kPinGuess>();
  DataElementMap p;
  if (!guess) {
    p.set<Tag::kPinTryCounter>({counter()});
    return Message::response(MsgName::kVerify, std::move(p));
  }
  VerifyResult r;
  if (profile_.blocked()) {
    r = {VerifyKind::kBlocked, 0};
  } else if (guess->value == profile_.pin) {
    profile_.pin_try_counter = profile_.pin_try_limit;
    r = {VerifyKind::kCorrect, counter()};
  } else {
    if (!unlimited) --profile_.pin_try_counter;
    if (profile_.blocked()) {
      r = {VerifyKind::kBlocked, 0};
      trace_.mark(marker::kCardBlocked, endpoint_name());
    } else {
      r = {VerifyKind::kWrong, counter()};
    }
  }
  p.set<Tag::kVerifyResult>(r);
  p.set<Tag::kPinTryCounter>({counter()});
  return Message::response(MsgName::kVerify, std::move(p));
}

Message Card::on_compute_cc(const Message& cmd) {
  if (!profile_.magstripe) return Message::error(MsgName::kComputeCc, sw::kNotSupported);
  auto un = cmd.payload.find<Tag::kMagstripeUn>();
  if (!un || un->digits != profile_.magstripe->n_un_digits) {
    return Message::error(MsgName::kComputeCc, sw::kWrongData);
  }
  const Atc atc = next_atc();
  const Bytes cvc3 = compute_cvc3(profile_.magstripe->key, atc, *un);

  DataElementMap c;
  c.set<Tag::kPan>(profile_.pan);
  if (active_) c.set<Tag::kAid>(*active_);
  c.set<Tag::kAtc>(atc);
  c.set<Tag::kCvc3>({cvc3});
  claim(std::move(c), {});

  DataElementMap p;
  p.set<Tag::kAtc>(atc);
  p.set<Tag::kCvc3>({cvc3});
  return Message::response(MsgName::kComputeCc, std::move(p));
}

Message Card::on_magic_bytes(const Message& cmd) {
  auto bytes = cmd.payload.find<Tag::kMagicBytes>();
  const bool transit_wallet = profile_.wallet == WalletBehavior::kAppleLike ||
                              profile_.wallet == WalletBehavior::kSamsungLike;
  if (bytes && transit_wallet && profile_.magic_byte_unlock &&
      bytes->value == profile_.transit_magic_bytes && !profile_.transit_magic_bytes.empty()) {
    gate_open_ = true;
    trace_.mark(marker::kMagicGateOpen, endpoint_name());
  }
  return Message::response(MsgName::kMagicBytes);
}

MagstripeClone::MagstripeClone(Cvc3Table table, HarvestedCard data)
    : table_(std::move(table)), data_(std::move(data)) {
  data_.aip.emv_mode_supported = false;
}

MagstripeClone build_magstripe_clone(Cvc3Table table, HarvestedCard data) {
  return MagstripeClone(std::move(table), std::move(data));
}

Message MagstripeClone::handle(const Message& cmd) {
  DataElementMap p;
  switch (cmd.name) {
    case MsgName::kSelect: {
      auto aid = cmd.payload.find<Tag::kAid>();
      if (!aid) {
        p.set<Tag::kAidList>({data_.aids});
        return Message::response(MsgName::kSelect, std::move(p));
      }
      if (std::find(data_.aids.begin(), data_.aids.end(), *aid) == data_.aids.end()) {
        return Message::error(MsgName::kSelect, sw::kNotFound);
      }
      active_ = *aid;
      p.set<Tag::kAid>(*aid);
      p.set<Tag::kPdol>(pdol_for_kernel(2));
      return Message::response(MsgName::kSelect, std::move(p));
    }
    case MsgName::kGpo: {
      if (!active_) return Message::error(MsgName::kGpo, sw::kRefused);
      Afl afl;
      for (const auto& [nr, rec] : data_.records) afl.records.push_back(nr);
      p.set<Tag::kAip>(data_.aip);
      p.set<Tag::kAfl>(afl);
      return Message::response(MsgName::kGpo, std::move(p));
    }
    case MsgName::kReadRecord: {
      auto nr = cmd.payload.find<Tag::kRecordNumber>();
      auto it = nr ? data_.records.find(nr->value) : data_.records.end();
      if (it == data_.records.end()) return Message::error(MsgName::kReadRecord, sw::kRecordNotFound);
      return Message::response(MsgName::kReadRecord, it->second);
    }
    case MsgName::kComputeCc: {
      auto un = cmd.payload.find<Tag::kMagstripeUn>();
      if (!un || un->digits != table_.n_digits) {
        return Message::error(MsgName::kComputeCc, sw::kWrongData);
      }
      auto it = table_.entries.find(un->value);
      if (it == table_.entries.end()) return Message::error(MsgName::kComputeCc, sw::kWrongData);
      p.set<Tag::kAtc>(it->second.atc);
      p.set<Tag::kCvc3>({it->second.cvc3});
      return Message::response(MsgName::kComputeCc, std::move(p));
    }
    default: return Message::error(cmd.name, sw::kNotSupported);
  }
}

}  // namespace emvsim
