// Card-side state machines: kernel 2, kernel 3, mag-stripe mode, mobile
// wallet overlays, and the mag-stripe clone.

#ifndef EMVSIM_CARD_H_
#define EMVSIM_CARD_H_

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "emvsim/channel.h"
#include "emvsim/crypto.h"
#include "emvsim/datamodel.h"
#include "emvsim/rng.h"

namespace emvsim {

enum class WalletBehavior : uint8_t { kNone, kGoogleLike, kAppleLike, kSamsungLike };
enum class LockState : uint8_t { kLocked, kUnlocked };

std::string_view wallet_name(WalletBehavior w);
std::optional<WalletBehavior> wallet_from(std::string_view s);

// 2 for Mastercard and Maestro, 3 for Visa, 0 otherwise.
int kernel_of(const Aid& aid);

// DOLs are fixed per kernel.
Dol pdol_for_kernel(int kernel);
Dol cdol1_for_kernel2();

// Tags the AC covers. Card and issuer derive it from the same inputs.
std::vector<Tag> ac_coverage(int kernel, bool covers_ttq, bool covers_aid);

struct MagstripeProfile {
  uint8_t n_un_digits = 3;
  Cvc3Key key;
};

struct CardProfile {
  std::string id;
  Pan pan;
  Expiry expiry;
  std::string cardholder_name;
  std::vector<Aid> aids;
  Aip aip;
  std::set<OdaMethod> oda_methods;
  CvmList cvm_list;
  ActionCodes iac;
  uint8_t ca_index = 1;
  std::string service_code = "201";
  std::string track_cvv = "000";
  std::optional<std::string> printed_csc;
  std::string home_currency = "EUR";
  std::string pin;
  bool offline_pin_enabled = false;
  uint8_t pin_try_limit = 3;  // 0: unlimited
  uint8_t pin_try_counter = 3;
  bool foreign_currency_no_cvm = false;
  std::optional<uint64_t> card_cvm_limit;
  DeviceType device_type = DeviceType::kPlastic;
  WalletBehavior wallet = WalletBehavior::kNone;
  LockState lock = LockState::kUnlocked;
  bool wallet_always_cdcvm = false;
  bool magic_byte_unlock = false;
  Bytes transit_magic_bytes;
  bool track_data_in_emv = false;
  bool ac_covers_ttq = false;
  bool ac_covers_aid = false;
  std::optional<MagstripeProfile> magstripe;
  int read_record_latency = 0;

  // Issued secrets.
  MasterKey mk;
  std::optional<SigningKey> card_key;
  CertificateChain chain;
  Bytes ssad;
  Atc atc{0};  // last value used; a fresh card's first transaction uses 1

  Brand brand() const { return brand_of(pan); }
  bool blocked() const { return pin_try_limit != 0 && pin_try_counter == 0; }
  // Preferred ODA method for the given kernel, if any.
  std::optional<OdaMethod> oda_for_kernel(int kernel) const;
  // Throws ConfigError on an inconsistent profile.
  void check() const;
};

// Static records (1..3, 5) plus the dynamic record number (4) when the card
// signs per transaction through READ RECORD.
std::map<uint8_t, DataElementMap> build_records(const CardProfile& p);
Afl afl_for(const CardProfile& p);
PrintedFace printed_face(const CardProfile& p);

class Card : public CardEndpoint {
 public:
  static constexpr uint8_t kDynamicRecord = 4;
  static constexpr uint8_t kMagstripeRecord = 5;

  Card(CardProfile profile, Rng& rng, Trace& trace);

  std::string endpoint_name() const override { return "card:" + profile_.id; }
  Message handle(const Message& cmd) override;
  int processing_latency(MsgName n) const override;

  const CardProfile& profile() const { return profile_; }
  CardProfile& mutable_profile() { return profile_; }
  const std::map<uint8_t, DataElementMap>& records() const { return records_; }
  void set_lock(LockState s) { profile_.lock = s; }

  // Restores the try counter, as a cardholder's genuine transaction with the
  // correct PIN would.
  void reset_pin_counter();

 private:
  Message on_select(const Message& cmd);
  Message on_gpo(const Message& cmd);
  Message on_read_record(const Message& cmd);
  Message on_generate_ac(const Message& cmd);
  Message on_verify(const Message& cmd);
  Message on_compute_cc(const Message& cmd);
  Message on_magic_bytes(const Message& cmd);

  Atc next_atc();
  Un fresh_un_c();
  bool wallet_accepts(const Ttq& ttq, uint64_t amount) const;
  Ctq make_ctq(const Ttq& ttq, const Amount& amount) const;
  DataElementMap static_claim() const;
  void claim(DataElementMap data, std::vector<Tag> absent);

  CardProfile profile_;
  Rng& rng_;
  Trace& trace_;
  std::map<uint8_t, DataElementMap> records_;

  std::optional<Aid> active_;
  int kernel_ = 0;
  bool gpo_done_ = false;
  DataElementMap pdol_data_;
  Aip sent_aip_;
  Atc gpo_atc_;
  Ctq gpo_ctq_;
  bool gate_open_ = false;
};

struct Cvc3Entry {
  Atc atc;
  Bytes cvc3;
};

struct Cvc3Table {
  uint8_t n_digits = 3;
  std::map<uint32_t, Cvc3Entry> entries;  // keyed by UN value
};

// What a skim yields about a card's static side.
struct HarvestedCard {
  std::vector<Aid> aids;
  Aip aip;
  std::map<uint8_t, DataElementMap> records;
};

// Answers mag-stripe queries from a harvested table and reports no EMV mode.
class MagstripeClone : public CardEndpoint {
 public:
  MagstripeClone(Cvc3Table table, HarvestedCard data);
  std::string endpoint_name() const override { return "clone"; }
  Message handle(const Message& cmd) override;

 private:
  Cvc3Table table_;
  HarvestedCard data_;
  std::optional<Aid> active_;
};

MagstripeClone build_magstripe_clone(Cvc3Table table, HarvestedCard data);

}  // namespace emvsim

#endif  // EMVSIM_CARD_H_
