// Protocol data elements, their byte codecs, and the tag-keyed element map
// that every command, response, MAC input and trace record is built from.
//
// Bit positions and lengths are model conventions fixed in one codec table
// (see codec_table()); they are not EMVCo encodings.

#ifndef EMVSIM_DATAMODEL_H_
#define EMVSIM_DATAMODEL_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace emvsim {

using Bytes = std::vector<uint8_t>;
using ByteView = std::span<const uint8_t>;

class CodecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string to_hex(ByteView b);
Bytes from_hex(std::string_view hex);

// Codes below 0xDF00 borrow the familiar EMV tag numbers; the 0xDFxx range is
// private to the model.
enum class Tag : uint16_t {
  kAid = 0x004F,
  kTrack1Data = 0x0056,
  kTrack2Equivalent = 0x0057,
  kPan = 0x005A,
  kAip = 0x0082,
  kCdol1 = 0x008C,
  kCvmList = 0x008E,
  kCaPkIndex = 0x008F,
  kIssuerPkCert = 0x0090,
  kSsad = 0x0093,
  kAfl = 0x0094,
  kTvr = 0x0095,
  kCardholderName = 0x5F20,
  kExpiry = 0x5F24,
  kCurrency = 0x5F2A,
  kAmount = 0x9F02,
  kIacDefault = 0x9F0D,
  kIacDenial = 0x9F0E,
  kIacOnline = 0x9F0F,
  kIad = 0x9F10,
  kMcc = 0x9F15,
  kMerchantId = 0x9F16,
  kPinTryCounter = 0x9F17,
  kTerminalId = 0x9F1C,
  kAc = 0x9F26,
  kCid = 0x9F27,
  kCvmResults = 0x9F34,
  kAtc = 0x9F36,
  kUnT = 0x9F37,
  kPdol = 0x9F38,
  kIccPkCert = 0x9F46,
  kSdad = 0x9F4B,
  kUnC = 0x9F4C,
  kCvc3 = 0x9F61,
  kTtq = 0x9F66,
  kTrack2Data = 0x9F6B,
  kCtq = 0x9F6C,
  kAidList = 0xDF01,
  kRecordNumber = 0xDF02,
  kRefControl = 0xDF03,
  kPinGuess = 0xDF04,
  kPinBlob = 0xDF05,
  kVerifyResult = 0xDF06,
  kMagicBytes = 0xDF07,
  kAuthDecision = 0xDF08,
  kDeclineReason = 0xDF09,
  kCsc = 0xDF0A,
  kMagstripeUn = 0xDF0B,
};

struct TagInfo {
  Tag tag;
  std::string_view name;
  std::string_view schema;
};

const std::vector<TagInfo>& codec_table();
std::string_view tag_name(Tag t);
std::optional<Tag> tag_from_name(std::string_view name);
std::optional<Tag> tag_from_code(uint16_t code);
// Throws CodecError if `value` is not a well-formed encoding for `t`.
void validate_value(Tag t, ByteView value);

// ---------------------------------------------------------------------------
// Value types. Each has encode() and a static decode() that rejects anything
// it would not itself produce.

struct Text {
  std::string value;
  Bytes encode() const;
  static Text decode(ByteView b);
  bool operator==(const Text&) const = default;
};

struct Digits {
  std::string value;
  Bytes encode() const;
  static Digits decode(ByteView b);
  bool operator==(const Digits&) const = default;
};

struct Blob {
  Bytes value;
  Bytes encode() const { return value; }
  static Blob decode(ByteView b) { return {Bytes(b.begin(), b.end())}; }
  bool operator==(const Blob&) const = default;
};

struct Byte {
  uint8_t value = 0;
  Bytes encode() const { return {value}; }
  static Byte decode(ByteView b);
  bool operator==(const Byte&) const = default;
};

struct AmountValue {
  static constexpr uint64_t kMax = 1'000'000'000'000ULL;
  uint64_t minor = 0;
  Bytes encode() const;
  static AmountValue decode(ByteView b);
  bool operator==(const AmountValue&) const = default;
};

struct Currency {
  std::string code;
  Bytes encode() const;
  static Currency decode(ByteView b);
  bool operator==(const Currency&) const = default;
};

struct Amount {
  uint64_t value = 0;
  std::string currency;
  void check() const;
  bool operator==(const Amount&) const = default;
};

enum class Brand { kVisa, kMastercard, kMaestro, kOther };
std::string_view brand_name(Brand b);

struct Pan {
  std::string digits;
  Bytes encode() const;
  static Pan decode(ByteView b);
  bool operator==(const Pan&) const = default;
};

bool luhn_valid(std::string_view digits);
Brand brand_of(const Pan& pan);

struct Expiry {
  int yy = 0;
  int mm = 1;
  Bytes encode() const;
  static Expiry decode(ByteView b);
  static Expiry parse(std::string_view yymm);
  std::string str() const;
  bool operator==(const Expiry&) const = default;
};

struct Aid {
  Bytes bytes;
  Bytes encode() const;
  static Aid decode(ByteView b);
  bool operator==(const Aid&) const = default;
  auto operator<=>(const Aid&) const = default;
};

extern const Aid kAidVisa;
extern const Aid kAidMastercard;
extern const Aid kAidMaestro;
std::string aid_label(const Aid& aid);
std::optional<Aid> aid_from_label(std::string_view label);

struct AidList {
  std::vector<Aid> aids;
  Bytes encode() const;
  static AidList decode(ByteView b);
  bool operator==(const AidList&) const = default;
};

struct Aip {
  bool sda_supported = false;
  bool dda_supported = false;
  bool cda_supported = false;
  bool cardholder_verification_supported = false;
  bool on_device_cvm_supported = false;
  bool emv_mode_supported = false;
  Bytes encode() const;
  static Aip decode(ByteView b);
  bool operator==(const Aip&) const = default;
};

struct Afl {
  std::vector<uint8_t> records;
  Bytes encode() const;
  static Afl decode(ByteView b);
  bool operator==(const Afl&) const = default;
};

struct Ttq {
  bool online_pin_supported = false;
  bool signature_supported = false;
  bool cvm_required = false;
  bool oda_for_online_supported = false;
  bool emv_mode_supported = false;
  Bytes encode() const;
  static Ttq decode(ByteView b);
  bool operator==(const Ttq&) const = default;
};

struct Ctq {
  bool online_pin_required = false;
  bool signature_required = false;
  bool cdcvm_performed = false;
  Bytes encode() const;
  static Ctq decode(ByteView b);
  bool operator==(const Ctq&) const = default;
};

enum class CvmMethod : uint8_t {
  kOnlinePin = 1,
  kEncryptedOfflinePin = 2,
  kPaperSignature = 3,
  kNoCvm = 4,
  kCdcvm = 5,
  kNone = 6,
};
enum class CvmCondition : uint8_t {
  kAlways = 1,
  kIfAboveCvmLimit = 2,
  kIfBelowCvmLimit = 3,
};
enum class CvmOutcome : uint8_t { kPerformed = 1, kNotPerformed = 2, kFailed = 3 };

std::string_view cvm_method_name(CvmMethod m);
std::optional<CvmMethod> cvm_method_from_name(std::string_view s);
std::string_view cvm_condition_name(CvmCondition c);
std::optional<CvmCondition> cvm_condition_from_name(std::string_view s);

struct CvmRule {
  CvmMethod method = CvmMethod::kNoCvm;
  CvmCondition condition = CvmCondition::kAlways;
  bool operator==(const CvmRule&) const = default;
};

struct CvmList {
  std::vector<CvmRule> rules;
  Bytes encode() const;
  static CvmList decode(ByteView b);
  bool operator==(const CvmList&) const = default;
};

struct CvmResults {
  CvmMethod method = CvmMethod::kNone;
  CvmOutcome outcome = CvmOutcome::kNotPerformed;
  static CvmResults none() { return {}; }
  Bytes encode() const;
  static CvmResults decode(ByteView b);
  bool operator==(const CvmResults&) const = default;
};

struct Tvr {
  bool cda_failed = false;
  bool any() const { return cda_failed; }
  Tvr operator&(const Tvr& o) const { return {cda_failed && o.cda_failed}; }
  Tvr operator|(const Tvr& o) const { return {cda_failed || o.cda_failed}; }
  Bytes encode() const;
  static Tvr decode(ByteView b);
  bool operator==(const Tvr&) const = default;
};

struct ActionCodes {
  Tvr denial;
  Tvr online;
  Tvr default_;
  bool operator==(const ActionCodes&) const = default;
};

struct Atc {
  uint16_t value = 0;
  Bytes encode() const;
  static Atc decode(ByteView b);
  bool operator==(const Atc&) const = default;
  auto operator<=>(const Atc&) const = default;
};

struct Un {
  uint32_t value = 0;
  std::optional<uint8_t> digits;
  Bytes encode() const;
  static Un decode(ByteView b);
  bool operator==(const Un&) const = default;
};

enum class DeviceType : uint8_t { kPlastic = 1, kPhone = 2 };

struct Iad {
  bool cdcvm_performed = false;
  DeviceType device_type = DeviceType::kPlastic;
  Bytes filler;
  Bytes encode() const;
  static Iad decode(ByteView b);
  bool operator==(const Iad&) const = default;
};

enum class CidKind : uint8_t { kAac = 0x00, kTc = 0x40, kArqc = 0x80 };
std::string_view cid_name(CidKind k);

struct Cid {
  CidKind kind = CidKind::kAac;
  Bytes encode() const { return {static_cast<uint8_t>(kind)}; }
  static Cid decode(ByteView b);
  bool operator==(const Cid&) const = default;
};

struct Track {
  Pan pan;
  Expiry expiry;
  std::string service_code;  // 3 digits
  Bytes discretionary;
  Bytes encode() const;
  static Track decode(ByteView b);
  bool operator==(const Track&) const = default;
};

struct Dol {
  std::vector<Tag> tags;
  Bytes encode() const;
  static Dol decode(ByteView b);
  bool operator==(const Dol&) const = default;
};

struct Mcc {
  uint16_t code = 0;
  bool is_transit() const;
  Bytes encode() const;
  static Mcc decode(ByteView b);
  bool operator==(const Mcc&) const = default;
};

struct RefControl {
  CidKind requested = CidKind::kArqc;
  bool cda_requested = false;
  Bytes encode() const;
  static RefControl decode(ByteView b);
  bool operator==(const RefControl&) const = default;
};

enum class VerifyKind : uint8_t { kCorrect = 1, kWrong = 2, kBlocked = 3 };

struct VerifyResult {
  VerifyKind kind = VerifyKind::kWrong;
  uint8_t remaining = 0;
  Bytes encode() const;
  static VerifyResult decode(ByteView b);
  bool operator==(const VerifyResult&) const = default;
};

struct Certificate {
  std::string subject;
  Bytes public_key;  // 32 bytes
  Bytes signature;   // 64 bytes
  Bytes signed_part() const;
  Bytes encode() const;
  static Certificate decode(ByteView b);
  bool operator==(const Certificate&) const = default;
};

// ---------------------------------------------------------------------------
// Compile-time tag → value type binding.

template <Tag T>
struct TagType;

#define EMVSIM_TAG_TYPE(tag, type) \
  template <>                      \
  struct TagType<Tag::tag> {       \
    using type_t = type;           \
  }

EMVSIM_TAG_TYPE(kAid, Aid);
EMVSIM_TAG_TYPE(kTrack1Data, Track);
EMVSIM_TAG_TYPE(kTrack2Equivalent, Track);
EMVSIM_TAG_TYPE(kPan, Pan);
EMVSIM_TAG_TYPE(kAip, Aip);
EMVSIM_TAG_TYPE(kCdol1, Dol);
EMVSIM_TAG_TYPE(kCvmList, CvmList);
EMVSIM_TAG_TYPE(kCaPkIndex, Byte);
EMVSIM_TAG_TYPE(kIssuerPkCert, Certificate);
EMVSIM_TAG_TYPE(kSsad, Blob);
EMVSIM_TAG_TYPE(kAfl, Afl);
EMVSIM_TAG_TYPE(kTvr, Tvr);
EMVSIM_TAG_TYPE(kCardholderName, Text);
EMVSIM_TAG_TYPE(kExpiry, Expiry);
EMVSIM_TAG_TYPE(kCurrency, Currency);
EMVSIM_TAG_TYPE(kAmount, AmountValue);
EMVSIM_TAG_TYPE(kIacDefault, Tvr);
EMVSIM_TAG_TYPE(kIacDenial, Tvr);
EMVSIM_TAG_TYPE(kIacOnline, Tvr);
EMVSIM_TAG_TYPE(kIad, Iad);
EMVSIM_TAG_TYPE(kMcc, Mcc);
EMVSIM_TAG_TYPE(kMerchantId, Text);
EMVSIM_TAG_TYPE(kPinTryCounter, Byte);
EMVSIM_TAG_TYPE(kTerminalId, Text);
EMVSIM_TAG_TYPE(kAc, Blob);
EMVSIM_TAG_TYPE(kCid, Cid);
EMVSIM_TAG_TYPE(kCvmResults, CvmResults);
EMVSIM_TAG_TYPE(kAtc, Atc);
EMVSIM_TAG_TYPE(kUnT, Un);
EMVSIM_TAG_TYPE(kPdol, Dol);
EMVSIM_TAG_TYPE(kIccPkCert, Certificate);
EMVSIM_TAG_TYPE(kSdad, Blob);
EMVSIM_TAG_TYPE(kUnC, Un);
EMVSIM_TAG_TYPE(kCvc3, Blob);
EMVSIM_TAG_TYPE(kTtq, Ttq);
EMVSIM_TAG_TYPE(kTrack2Data, Track);
EMVSIM_TAG_TYPE(kCtq, Ctq);
EMVSIM_TAG_TYPE(kAidList, AidList);
EMVSIM_TAG_TYPE(kRecordNumber, Byte);
EMVSIM_TAG_TYPE(kRefControl, RefControl);
EMVSIM_TAG_TYPE(kPinGuess, Digits);
EMVSIM_TAG_TYPE(kPinBlob, Blob);
EMVSIM_TAG_TYPE(kVerifyResult, VerifyResult);
EMVSIM_TAG_TYPE(kMagicBytes, Blob);
EMVSIM_TAG_TYPE(kAuthDecision, Byte);
EMVSIM_TAG_TYPE(kDeclineReason, Text);
EMVSIM_TAG_TYPE(kCsc, Digits);
EMVSIM_TAG_TYPE(kMagstripeUn, Un);

#undef EMVSIM_TAG_TYPE

template <Tag T>
using tag_t = typename TagType<T>::type_t;

class MissingElement : public std::runtime_error {
 public:
  explicit MissingElement(Tag t);
  Tag tag;
};

// Partial map Tag → encoded value. Iteration (and therefore canonical
// encoding) is in ascending tag-code order regardless of insertion order.
class DataElementMap {
 public:
  using Storage = std::map<Tag, Bytes>;

  template <Tag T>
  void set(const tag_t<T>& v) {
    Bytes b = v.encode();
    validate_value(T, b);
    values_[T] = std::move(b);
  }

  template <Tag T>
  tag_t<T> get() const {
    auto it = values_.find(T);
    if (it == values_.end()) throw MissingElement(T);
    return tag_t<T>::decode(it->second);
  }

  template <Tag T>
  std::optional<tag_t<T>> find() const {
    auto it = values_.find(T);
    if (it == values_.end()) return std::nullopt;
    return tag_t<T>::decode(it->second);
  }

  void set_raw(Tag t, Bytes value);
  const Bytes* raw(Tag t) const;
  bool has(Tag t) const { return values_.count(t) != 0; }
  void erase(Tag t) { values_.erase(t); }
  bool empty() const { return values_.empty(); }
  size_t size() const { return values_.size(); }
  std::vector<Tag> tags() const;

  // Entries of `other` overwrite entries here.
  void merge(const DataElementMap& other);
  DataElementMap project(const std::vector<Tag>& tags) const;

  Storage::const_iterator begin() const { return values_.begin(); }
  Storage::const_iterator end() const { return values_.end(); }

  bool operator==(const DataElementMap&) const = default;

 private:
  Storage values_;
};

// Sorted, length-prefixed TLV: u32 entry count, then per entry u16 code,
// u32 length, value. The empty map encodes as four zero bytes.
Bytes encode_canonical(const DataElementMap& m);
DataElementMap decode_canonical(ByteView b);

class MissingDolEntry : public std::runtime_error {
 public:
  explicit MissingDolEntry(Tag t);
  Tag tag;
};

DataElementMap build_dol_data(const Dol& dol, const DataElementMap& env);

void put_amount(DataElementMap& m, const Amount& a);
Amount get_amount(const DataElementMap& m);

}  // namespace emvsim

#endif  // EMVSIM_DATAMODEL_H_
