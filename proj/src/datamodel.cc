#include "emvsim/datamodel.h"

#include <algorithm>
#include <array>
#include <cstdio>
#include <set>

namespace emvsim {

namespace {

class Writer {
 public:
  void u8(uint8_t v) { out_.push_back(v); }
  void u16(uint16_t v) {
    out_.push_back(static_cast<uint8_t>(v >> 8));
    out_.push_back(static_cast<uint8_t>(v));
  }
  void u32(uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out_.push_back(static_cast<uint8_t>(v >> s));
  }
  void bytes(ByteView b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void str(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
  void short_bytes(ByteView b) {
    if (b.size() > 255) throw CodecError("field longer than 255 bytes");
    u8(static_cast<uint8_t>(b.size()));
    bytes(b);
  }
  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

class Reader {
 public:
  explicit Reader(ByteView b) : b_(b) {}
  uint8_t u8() {
    need(1);
    return b_[pos_++];
  }
  uint16_t u16() {
    need(2);
    uint16_t v = static_cast<uint16_t>(b_[pos_] << 8 | b_[pos_ + 1]);
    pos_ += 2;
    return v;
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = v << 8 | b_[pos_ + i];
    pos_ += 4;
    return v;
  }
  ByteView bytes(size_t n) {
    need(n);
    ByteView v = b_.subspan(pos_, n);
    pos_ += n;
    return v;
  }
  ByteView short_bytes() { return bytes(u8()); }
  ByteView rest() { return bytes(b_.size() - pos_); }
  void done() const {
    if (pos_ != b_.size()) throw CodecError("trailing bytes");
  }

 private:
  void need(size_t n) const {
    if (b_.size() - pos_ < n) throw CodecError("truncated value");
  }
  ByteView b_;
  size_t pos_ = 0;
};

bool all_digits(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::string as_string(ByteView b) { return std::string(b.begin(), b.end()); }

void expect_size(ByteView b, size_t n, const char* what) {
  if (b.size() != n) throw CodecError(std::string(what) + ": wrong length");
}

void reject_bits(uint8_t byte, uint8_t allowed, const char* what) {
  if (byte & ~allowed) throw CodecError(std::string(what) + ": unknown bit set");
}

template <typename T>
void validate_as(ByteView b) {
  (void)T::decode(b);
}

using Validator = void (*)(ByteView);

struct TableRow {
  Tag tag;
  std::string_view name;
  std::string_view schema;
  Validator validate;
};

#define ROW(tag, name, schema) \
  TableRow { Tag::tag, name, schema, &validate_as<tag_t<Tag::tag>> }

const std::array kRows = {
    ROW(kAid, "AID", "bytes[5..16]"),
    ROW(kTrack1Data, "TRACK1_DATA", "track"),
    ROW(kTrack2Equivalent, "TRACK2_EQUIVALENT", "track"),
    ROW(kPan, "PAN", "digits[12..19] luhn"),
    ROW(kAip, "AIP", "flags[2]"),
    ROW(kCdol1, "CDOL1", "dol"),
    ROW(kCvmList, "CVM_LIST", "cvm_rules"),
    ROW(kCaPkIndex, "CA_PK_INDEX", "u8"),
    ROW(kIssuerPkCert, "ISSUER_PK_CERT", "certificate"),
    ROW(kSsad, "SSAD", "bytes"),
    ROW(kAfl, "AFL", "u8*"),
    ROW(kTvr, "TVR", "flags[5]"),
    ROW(kCardholderName, "CARDHOLDER_NAME", "ascii[0..64]"),
    ROW(kExpiry, "EXPIRY", "yymm[2]"),
    ROW(kCurrency, "CURRENCY", "alpha[3]"),
    ROW(kAmount, "AMOUNT", "u48 minor units"),
    ROW(kIacDefault, "IAC_DEFAULT", "flags[5]"),
    ROW(kIacDenial, "IAC_DENIAL", "flags[5]"),
    ROW(kIacOnline, "IAC_ONLINE", "flags[5]"),
    ROW(kIad, "IAD", "iad"),
    ROW(kMcc, "MCC", "u16 <= 9999"),
    ROW(kMerchantId, "MERCHANT_ID", "ascii[0..64]"),
    ROW(kPinTryCounter, "PIN_TRY_COUNTER", "u8"),
    ROW(kTerminalId, "TERMINAL_ID", "ascii[0..64]"),
    ROW(kAc, "AC", "bytes"),
    ROW(kCid, "CID", "u8 {00,40,80}"),
    ROW(kCvmResults, "CVM_RESULTS", "u8 method, u8 outcome"),
    ROW(kAtc, "ATC", "u16"),
    ROW(kUnT, "UN_T", "un"),
    ROW(kPdol, "PDOL", "dol"),
    ROW(kIccPkCert, "ICC_PK_CERT", "certificate"),
    ROW(kSdad, "SDAD", "bytes"),
    ROW(kUnC, "UN_C", "un"),
    ROW(kCvc3, "CVC3", "bytes"),
    ROW(kTtq, "TTQ", "flags[4]"),
    ROW(kTrack2Data, "TRACK2_DATA", "track"),
    ROW(kCtq, "CTQ", "flags[2]"),
    ROW(kAidList, "AID_LIST", "aid*"),
    ROW(kRecordNumber, "RECORD_NUMBER", "u8"),
    ROW(kRefControl, "REF_CONTROL", "u8 cid, u8 cda"),
    ROW(kPinGuess, "PIN_GUESS", "digits"),
    ROW(kPinBlob, "PIN_BLOB", "bytes"),
    ROW(kVerifyResult, "VERIFY_RESULT", "u8 kind, u8 remaining"),
    ROW(kMagicBytes, "MAGIC_BYTES", "bytes"),
    ROW(kAuthDecision, "AUTH_DECISION", "u8"),
    ROW(kDeclineReason, "DECLINE_REASON", "ascii[0..64]"),
    ROW(kCsc, "CSC", "digits"),
    ROW(kMagstripeUn, "MAGSTRIPE_UN", "un"),
};

#undef ROW

const TableRow* row_for(Tag t) {
  for (const auto& r : kRows) {
    if (r.tag == t) return &r;
  }
  return nullptr;
}

uint32_t pow10(int n) {
  uint32_t v = 1;
  while (n-- > 0) v *= 10;
  return v;
}

}  // namespace

std::string to_hex(ByteView b) {
  static const char* kDigits = "0123456789abcdef";
  std::string s;
  s.reserve(b.size() * 2);
  for (uint8_t c : b) {
    s.push_back(kDigits[c >> 4]);
    s.push_back(kDigits[c & 15]);
  }
  return s;
}

Bytes from_hex(std::string_view hex) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw CodecError("bad hex digit");
  };
  if (hex.size() % 2) throw CodecError("odd-length hex");
  Bytes out;
  for (size_t i = 0; i < hex.size(); i += 2) {
    out.push_back(static_cast<uint8_t>(nibble(hex[i]) << 4 | nibble(hex[i + 1])));
  }
  return out;
}

const std::vector<TagInfo>& codec_table() {
  static const std::vector<TagInfo> table = [] {
    std::vector<TagInfo> t;
    for (const auto& r : kRows) t.push_back({r.tag, r.name, r.schema});
    std::sort(t.begin(), t.end(),
              [](const TagInfo& a, const TagInfo& b) { return a.tag < b.tag; });
    return t;
  }();
  return table;
}

std::string_view tag_name(Tag t) {
  const TableRow* r = row_for(t);
  return r ? r->name : std::string_view("?");
}

std::optional<Tag> tag_from_name(std::string_view name) {
  for (const auto& r : kRows) {
    if (r.name == name) return r.tag;
  }
  return std::nullopt;
}

std::optional<Tag> tag_from_code(uint16_t code) {
  for (const auto& r : kRows) {
    if (static_cast<uint16_t>(r.tag) == code) return r.tag;
  }
  return std::nullopt;
}

void validate_value(Tag t, ByteView value) {
  const TableRow* r = row_for(t);
  if (!r) throw CodecError("unknown tag");
  r->validate(value);
}

// ---------------------------------------------------------------------------

Bytes Text::encode() const {
  Writer w;
  w.str(value);
  return w.take();
}

Text Text::decode(ByteView b) {
  if (b.size() > 64) throw CodecError("text too long");
  for (uint8_t c : b) {
    if (c < 0x20 || c > 0x7E) throw CodecError("text not printable ascii");
  }
  return {as_string(b)};
}

Bytes Digits::encode() const {
  Writer w;
  w.str(value);
  return w.take();
}

Digits Digits::decode(ByteView b) {
  std::string s = as_string(b);
  if (s.empty() || s.size() > 19 || !all_digits(s)) throw CodecError("bad digit string");
  return {s};
}

Byte Byte::decode(ByteView b) {
  expect_size(b, 1, "u8");
  return {b[0]};
}

Bytes AmountValue::encode() const {
  if (minor > kMax) throw CodecError("amount out of range");
  Bytes out(6);
  for (int i = 0; i < 6; ++i) out[5 - i] = static_cast<uint8_t>(minor >> (8 * i));
  return out;
}

AmountValue AmountValue::decode(ByteView b) {
  expect_size(b, 6, "amount");
  uint64_t v = 0;
  for (uint8_t c : b) v = v << 8 | c;
  if (v > kMax) throw CodecError("amount out of range");
  return {v};
}

Bytes Currency::encode() const {
  Bytes b(code.begin(), code.end());
  validate_as<Currency>(b);
  return b;
}

Currency Currency::decode(ByteView b) {
  expect_size(b, 3, "currency");
  for (uint8_t c : b) {
    if (c < 'A' || c > 'Z') throw CodecError("currency must be [A-Z]{3}");
  }
  return {as_string(b)};
}

void Amount::check() const {
  if (value > AmountValue::kMax) throw CodecError("amount out of range");
  Currency{currency}.encode();
}

std::string_view brand_name(Brand b) {
  switch (b) {
    case Brand::kVisa: return "visa";
    case Brand::kMastercard: return "mastercard";
    case Brand::kMaestro: return "maestro";
    case Brand::kOther: return "other";
  }
  return "other";
}

bool luhn_valid(std::string_view digits) {
  if (digits.empty() || !all_digits(digits)) return false;
  int sum = 0;
  bool dbl = false;
  for (auto it = digits.rbegin(); it != digits.rend(); ++it) {
    int d = *it - '0';
    if (dbl) {
      d *= 2;
      if (d > 9) d -= 9;
    }
    sum += d;
    dbl = !dbl;
  }
  return sum % 10 == 0;
}

Brand brand_of(const Pan& pan) {
  switch (pan.digits.empty() ? '0' : pan.digits[0]) {
    case '4': return Brand::kVisa;
    case '5': return Brand::kMastercard;
    case '6': return Brand::kMaestro;
    default: return Brand::kOther;
  }
}

Bytes Pan::encode() const {
  Bytes b(digits.begin(), digits.end());
  validate_as<Pan>(b);
  return b;
}

Pan Pan::decode(ByteView b) {
  std::string s = as_string(b);
  if (s.size() < 12 || s.size() > 19 || !all_digits(s)) throw CodecError("PAN must be 12-19 digits");
  if (!luhn_valid(s)) throw CodecError("PAN fails Luhn check");
  return {s};
}

Bytes Expiry::encode() const {
  if (yy < 0 || yy > 99 || mm < 1 || mm > 12) throw CodecError("bad expiry");
  return {static_cast<uint8_t>(yy), static_cast<uint8_t>(mm)};
}

Expiry Expiry::decode(ByteView b) {
  expect_size(b, 2, "expiry");
  Expiry e{b[0], b[1]};
  e.encode();
  return e;
}

Expiry Expiry::parse(std::string_view yymm) {
  if (yymm.size() != 4 || !all_digits(yymm)) throw CodecError("expiry must be YYMM");
  Expiry e{(yymm[0] - '0') * 10 + (yymm[1] - '0'), (yymm[2] - '0') * 10 + (yymm[3] - '0')};
  e.encode();
  return e;
}

std::string Expiry::str() const {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%02d%02d", yy, mm);
  return buf;
}

Bytes Aid::encode() const {
  validate_as<Aid>(bytes);
  return bytes;
}

Aid Aid::decode(ByteView b) {
  if (b.size() < 5 || b.size() > 16) throw CodecError("AID must be 5-16 bytes");
  return {Bytes(b.begin(), b.end())};
}

const Aid kAidVisa{{0xA0, 0x00, 0x00, 0x00, 0x03, 0x10, 0x10}};
const Aid kAidMastercard{{0xA0, 0x00, 0x00, 0x00, 0x04, 0x10, 0x10}};
const Aid kAidMaestro{{0xA0, 0x00, 0x00, 0x00, 0x04, 0x30, 0x60}};

std::string aid_label(const Aid& aid) {
  if (aid == kAidVisa) return "visa";
  if (aid == kAidMastercard) return "mastercard";
  if (aid == kAidMaestro) return "maestro";
  return to_hex(aid.bytes);
}

std::optional<Aid> aid_from_label(std::string_view label) {
  if (label == "visa") return kAidVisa;
  if (label == "mastercard") return kAidMastercard;
  if (label == "maestro") return kAidMaestro;
  return std::nullopt;
}

Bytes AidList::encode() const {
  Writer w;
  if (aids.size() > 255) throw CodecError("too many AIDs");
  w.u8(static_cast<uint8_t>(aids.size()));
  for (const auto& a : aids) w.short_bytes(a.encode());
  return w.take();
}

AidList AidList::decode(ByteView b) {
  Reader r(b);
  AidList l;
  int n = r.u8();
  for (int i = 0; i < n; ++i) l.aids.push_back(Aid::decode(r.short_bytes()));
  r.done();
  return l;
}

Bytes Aip::encode() const {
  uint8_t b0 = (sda_supported ? 0x40 : 0) | (dda_supported ? 0x20 : 0) |
               (cardholder_verification_supported ? 0x10 : 0) | (cda_supported ? 0x01 : 0);
  uint8_t b1 = (emv_mode_supported ? 0x80 : 0) | (on_device_cvm_supported ? 0x02 : 0);
  return {b0, b1};
}

Aip Aip::decode(ByteView b) {
  expect_size(b, 2, "AIP");
  reject_bits(b[0], 0x71, "AIP");
  reject_bits(b[1], 0x82, "AIP");
  Aip a;
  a.sda_supported = b[0] & 0x40;
  a.dda_supported = b[0] & 0x20;
  a.cardholder_verification_supported = b[0] & 0x10;
  a.cda_supported = b[0] & 0x01;
  a.emv_mode_supported = b[1] & 0x80;
  a.on_device_cvm_supported = b[1] & 0x02;
  return a;
}

Bytes Afl::encode() const {
  Bytes b(records.begin(), records.end());
  validate_as<Afl>(b);
  return b;
}

Afl Afl::decode(ByteView b) {
  std::set<uint8_t> seen;
  for (uint8_t r : b) {
    if (r == 0 || r > 30) throw CodecError("AFL record number out of range");
    if (!seen.insert(r).second) throw CodecError("AFL record number repeated");
  }
  return {std::vector<uint8_t>(b.begin(), b.end())};
}

Bytes Ttq::encode() const {
  uint8_t b0 = (emv_mode_supported ? 0x20 : 0) | (online_pin_supported ? 0x04 : 0) |
               (signature_supported ? 0x02 : 0) | (oda_for_online_supported ? 0x01 : 0);
  uint8_t b1 = cvm_required ? 0x40 : 0;
  return {b0, b1, 0, 0};
}

Ttq Ttq::decode(ByteView b) {
  expect_size(b, 4, "TTQ");
  reject_bits(b[0], 0x27, "TTQ");
  reject_bits(b[1], 0x40, "TTQ");
  reject_bits(b[2], 0x00, "TTQ");
  reject_bits(b[3], 0x00, "TTQ");
  Ttq t;
  t.emv_mode_supported = b[0] & 0x20;
  t.online_pin_supported = b[0] & 0x04;
  t.signature_supported = b[0] & 0x02;
  t.oda_for_online_supported = b[0] & 0x01;
  t.cvm_required = b[1] & 0x40;
  return t;
}

Bytes Ctq::encode() const {
  uint8_t b0 = (online_pin_required ? 0x80 : 0) | (signature_required ? 0x40 : 0);
  uint8_t b1 = cdcvm_performed ? 0x80 : 0;
  return {b0, b1};
}

Ctq Ctq::decode(ByteView b) {
  expect_size(b, 2, "CTQ");
  reject_bits(b[0], 0xC0, "CTQ");
  reject_bits(b[1], 0x80, "CTQ");
  return {static_cast<bool>(b[0] & 0x80), static_cast<bool>(b[0] & 0x40),
          static_cast<bool>(b[1] & 0x80)};
}

std::string_view cvm_method_name(CvmMethod m) {
  switch (m) {
    case CvmMethod::kOnlinePin: return "online_pin";
    case CvmMethod::kEncryptedOfflinePin: return "encrypted_offline_pin";
    case CvmMethod::kPaperSignature: return "paper_signature";
    case CvmMethod::kNoCvm: return "no_cvm";
    case CvmMethod::kCdcvm: return "cdcvm";
    case CvmMethod::kNone: return "none";
  }
  return "?";
}

std::optional<CvmMethod> cvm_method_from_name(std::string_view s) {
  for (int i = 1; i <= 6; ++i) {
    auto m = static_cast<CvmMethod>(i);
    if (cvm_method_name(m) == s) return m;
  }
  return std::nullopt;
}

std::string_view cvm_condition_name(CvmCondition c) {
  switch (c) {
    case CvmCondition::kAlways: return "always";
    case CvmCondition::kIfAboveCvmLimit: return "if_above_cvm_limit";
    case CvmCondition::kIfBelowCvmLimit: return "if_below_cvm_limit";
  }
  return "?";
}

std::optional<CvmCondition> cvm_condition_from_name(std::string_view s) {
  for (int i = 1; i <= 3; ++i) {
    auto c = static_cast<CvmCondition>(i);
    if (cvm_condition_name(c) == s) return c;
  }
  return std::nullopt;
}

Bytes CvmList::encode() const {
  Writer w;
  for (const auto& r : rules) {
    w.u8(static_cast<uint8_t>(r.method));
    w.u8(static_cast<uint8_t>(r.condition));
  }
  Bytes b = w.take();
  validate_as<CvmList>(b);
  return b;
}

CvmList CvmList::decode(ByteView b) {
  if (b.size() % 2) throw CodecError("CVM list has odd length");
  CvmList l;
  for (size_t i = 0; i < b.size(); i += 2) {
    if (b[i] < 1 || b[i] > 4) throw CodecError("CVM list method not listable");
    if (b[i + 1] < 1 || b[i + 1] > 3) throw CodecError("CVM list condition unknown");
    l.rules.push_back({static_cast<CvmMethod>(b[i]), static_cast<CvmCondition>(b[i + 1])});
  }
  return l;
}

Bytes CvmResults::encode() const {
  Bytes b{static_cast<uint8_t>(method), static_cast<uint8_t>(outcome)};
  validate_as<CvmResults>(b);
  return b;
}

CvmResults CvmResults::decode(ByteView b) {
  expect_size(b, 2, "CVM results");
  if (b[0] < 1 || b[0] > 6) throw CodecError("CVM results method unknown");
  if (b[1] < 1 || b[1] > 3) throw CodecError("CVM results outcome unknown");
  CvmResults r{static_cast<CvmMethod>(b[0]), static_cast<CvmOutcome>(b[1])};
  if (r.method == CvmMethod::kNone && r.outcome != CvmOutcome::kNotPerformed) {
    throw CodecError("CVM results: None must be NotPerformed");
  }
  return r;
}

Bytes Tvr::encode() const { return {static_cast<uint8_t>(cda_failed ? 0x04 : 0), 0, 0, 0, 0}; }

Tvr Tvr::decode(ByteView b) {
  expect_size(b, 5, "TVR");
  reject_bits(b[0], 0x04, "TVR");
  for (int i = 1; i < 5; ++i) reject_bits(b[i], 0, "TVR");
  return {static_cast<bool>(b[0] & 0x04)};
}

Bytes Atc::encode() const {
  Writer w;
  w.u16(value);
  return w.take();
}

Atc Atc::decode(ByteView b) {
  expect_size(b, 2, "ATC");
  Reader r(b);
  return {r.u16()};
}

Bytes Un::encode() const {
  Writer w;
  if (!digits) {
    w.u8(0);
    w.u32(value);
    return w.take();
  }
  if (*digits < 1 || *digits > 8) throw CodecError("UN digit count out of range");
  if (value >= pow10(*digits)) throw CodecError("UN exceeds digit constraint");
  w.u8(*digits);
  uint32_t bcd = 0;
  uint32_t v = value;
  for (int i = 0; i < 8; ++i) {
    bcd |= (v % 10) << (4 * i);
    v /= 10;
  }
  w.u32(bcd);
  return w.take();
}

Un Un::decode(ByteView b) {
  expect_size(b, 5, "UN");
  Reader r(b);
  uint8_t n = r.u8();
  uint32_t raw = r.u32();
  if (n == 0) return {raw, std::nullopt};
  if (n > 8) throw CodecError("UN digit count out of range");
  uint32_t v = 0;
  for (int i = 7; i >= 0; --i) {
    uint32_t d = raw >> (4 * i) & 0xF;
    if (d > 9) throw CodecError("UN not BCD");
    v = v * 10 + d;
  }
  if (v >= pow10(n)) throw CodecError("UN exceeds digit constraint");
  return {v, n};
}

Bytes Iad::encode() const {
  Writer w;
  w.u8(cdcvm_performed ? 0x01 : 0);
  w.u8(static_cast<uint8_t>(device_type));
  w.bytes(filler);
  Bytes b = w.take();
  validate_as<Iad>(b);
  return b;
}

Iad Iad::decode(ByteView b) {
  Reader r(b);
  uint8_t flags = r.u8();
  uint8_t dev = r.u8();
  reject_bits(flags, 0x01, "IAD");
  if (dev != 1 && dev != 2) throw CodecError("IAD device type unknown");
  ByteView rest = r.rest();
  if (rest.size() > 30) throw CodecError("IAD filler too long");
  return {static_cast<bool>(flags & 1), static_cast<DeviceType>(dev), Bytes(rest.begin(), rest.end())};
}

std::string_view cid_name(CidKind k) {
  switch (k) {
    case CidKind::kAac: return "AAC";
    case CidKind::kTc: return "TC";
    case CidKind::kArqc: return "ARQC";
  }
  return "?";
}

Cid Cid::decode(ByteView b) {
  expect_size(b, 1, "CID");
  if (b[0] != 0x00 && b[0] != 0x40 && b[0] != 0x80) throw CodecError("CID kind unknown");
  return {static_cast<CidKind>(b[0])};
}

Bytes Track::encode() const {
  Writer w;
  w.short_bytes(pan.encode());
  w.bytes(expiry.encode());
  if (service_code.size() != 3 || !all_digits(service_code)) throw CodecError("service code must be 3 digits");
  w.str(service_code);
  w.short_bytes(discretionary);
  return w.take();
}

Track Track::decode(ByteView b) {
  Reader r(b);
  Track t;
  t.pan = Pan::decode(r.short_bytes());
  t.expiry = Expiry::decode(r.bytes(2));
  t.service_code = as_string(r.bytes(3));
  if (!all_digits(t.service_code)) throw CodecError("service code must be 3 digits");
  ByteView d = r.short_bytes();
  t.discretionary.assign(d.begin(), d.end());
  r.done();
  return t;
}

Bytes Dol::encode() const {
  Writer w;
  for (Tag t : tags) w.u16(static_cast<uint16_t>(t));
  Bytes b = w.take();
  validate_as<Dol>(b);
  return b;
}

Dol Dol::decode(ByteView b) {
  if (b.size() % 2) throw CodecError("DOL has odd length");
  Reader r(b);
  Dol d;
  std::set<Tag> seen;
  while (d.tags.size() * 2 < b.size()) {
    auto t = tag_from_code(r.u16());
    if (!t) throw CodecError("DOL names unknown tag");
    if (!seen.insert(*t).second) throw CodecError("DOL repeats a tag");
    d.tags.push_back(*t);
  }
  return d;
}

bool Mcc::is_transit() const {
  // Commuter transport, passenger railways, local transit model set.
  static const std::set<uint16_t> kTransit = {4111, 4112, 4131};
  return kTransit.count(code) != 0;
}

Bytes Mcc::encode() const {
  Writer w;
  if (code > 9999) throw CodecError("MCC must be 4 digits");
  w.u16(code);
  return w.take();
}

Mcc Mcc::decode(ByteView b) {
  expect_size(b, 2, "MCC");
  Reader r(b);
  Mcc m{r.u16()};
  if (m.code > 9999) throw CodecError("MCC must be 4 digits");
  return m;
}

Bytes RefControl::encode() const {
  return {static_cast<uint8_t>(requested), static_cast<uint8_t>(cda_requested ? 1 : 0)};
}

RefControl RefControl::decode(ByteView b) {
  expect_size(b, 2, "reference control");
  if (b[1] > 1) throw CodecError("reference control flag");
  return {Cid::decode(b.subspan(0, 1)).kind, b[1] == 1};
}

Bytes VerifyResult::encode() const { return {static_cast<uint8_t>(kind), remaining}; }

VerifyResult VerifyResult::decode(ByteView b) {
  expect_size(b, 2, "verify result");
  if (b[0] < 1 || b[0] > 3) throw CodecError("verify result kind");
  return {static_cast<VerifyKind>(b[0]), b[1]};
}

Bytes Certificate::signed_part() const {
  Writer w;
  w.short_bytes(Bytes(subject.begin(), subject.end()));
  w.bytes(public_key);
  return w.take();
}

Bytes Certificate::encode() const {
  if (public_key.size() != 32 || signature.size() != 64) throw CodecError("certificate key/signature size");
  Writer w;
  w.bytes(signed_part());
  w.bytes(signature);
  return w.take();
}

Certificate Certificate::decode(ByteView b) {
  Reader r(b);
  Certificate c;
  c.subject = as_string(r.short_bytes());
  ByteView pk = r.bytes(32);
  ByteView sig = r.bytes(64);
  r.done();
  c.public_key.assign(pk.begin(), pk.end());
  c.signature.assign(sig.begin(), sig.end());
  return c;
}

// ---------------------------------------------------------------------------

MissingElement::MissingElement(Tag t)
    : std::runtime_error("missing data element " + std::string(tag_name(t))), tag(t) {}

void DataElementMap::set_raw(Tag t, Bytes value) {
  validate_value(t, value);
  values_[t] = std::move(value);
}

const Bytes* DataElementMap::raw(Tag t) const {
  auto it = values_.find(t);
  return it == values_.end() ? nullptr : &it->second;
}

std::vector<Tag> DataElementMap::tags() const {
  std::vector<Tag> out;
  for (const auto& [t, v] : values_) out.push_back(t);
  return out;
}

void DataElementMap::merge(const DataElementMap& other) {
  for (const auto& [t, v] : other.values_) values_[t] = v;
}

DataElementMap DataElementMap::project(const std::vector<Tag>& tags) const {
  DataElementMap out;
  for (Tag t : tags) {
    auto it = values_.find(t);
    if (it != values_.end()) out.values_[t] = it->second;
  }
  return out;
}

Bytes encode_canonical(const DataElementMap& m) {
  Writer w;
  w.u32(static_cast<uint32_t>(m.size()));
  for (const auto& [t, v] : m) {
    validate_value(t, v);
    w.u16(static_cast<uint16_t>(t));
    w.u32(static_cast<uint32_t>(v.size()));
    w.bytes(v);
  }
  return w.take();
}

DataElementMap decode_canonical(ByteView b) {
  Reader r(b);
  DataElementMap m;
  uint32_t n = r.u32();
  uint16_t last = 0;
  for (uint32_t i = 0; i < n; ++i) {
    uint16_t code = r.u16();
    if (i > 0 && code <= last) throw CodecError("canonical map not sorted");
    last = code;
    auto t = tag_from_code(code);
    if (!t) throw CodecError("unknown tag");
    ByteView v = r.bytes(r.u32());
    m.set_raw(*t, Bytes(v.begin(), v.end()));
  }
  r.done();
  return m;
}

MissingDolEntry::MissingDolEntry(Tag t)
    : std::runtime_error("DOL entry not available: " + std::string(tag_name(t))), tag(t) {}

DataElementMap build_dol_data(const Dol& dol, const DataElementMap& env) {
  for (Tag t : dol.tags) {
    if (!env.has(t)) throw MissingDolEntry(t);
  }
  return env.project(dol.tags);
}

void put_amount(DataElementMap& m, const Amount& a) {
  m.set<Tag::kAmount>({a.value});
  m.set<Tag::kCurrency>({a.currency});
}

Amount get_amount(const DataElementMap& m) {
  return {m.get<Tag::kAmount>().minor, m.get<Tag::kCurrency>().code};
}

}  // namespace emvsim
