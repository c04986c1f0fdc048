// Issuer back end: online authorization, clearing and the configurable
// issuer-side checks.

#ifndef EMVSIM_ISSUER_H_
#define EMVSIM_ISSUER_H_

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>

#include "emvsim/channel.h"
#include "emvsim/crypto.h"
#include "emvsim/datamodel.h"

namespace emvsim {

// Every check defaults to off.
struct IssuerPolicy {
  std::string id;
  bool check_atc_order = false;
  bool check_un_reuse = false;
  bool check_aid_pan_match = false;
  bool check_plastic_cdcvm = false;
  bool check_ttq_in_ac = false;
  bool check_mcc_for_wallet_no_cdcvm = false;
  bool foreign_cvm_limit_enforced = false;
  bool enforce_cvm_limit = false;
  uint64_t cvm_limit = 5000;
  std::string home_currency = "EUR";
};

// What the issuer holds per card after issuance.
struct IssuerCardRecord {
  Pan pan;
  MasterKey mk;
  std::string pin;
  int kernel = 2;
  bool covers_ttq = false;
  bool covers_aid = false;
  std::optional<Cvc3Key> cvc3_key;
  std::optional<Atc> last_atc;
  std::set<std::pair<uint16_t, Bytes>> seen_acs;
  std::set<std::pair<std::string, uint32_t>> seen_uns;
};

struct Verdict {
  bool approve = false;
  std::string reason;
};

class Issuer : public IssuerEndpoint {
 public:
  Issuer(IssuerPolicy policy, PinKey pin_key, Trace& trace);

  std::string name() const { return "issuer:" + policy_.id; }
  const IssuerPolicy& policy() const { return policy_; }
  IssuerPolicy& mutable_policy() { return policy_; }
  const PinKey& pin_key() const { return pin_key_; }

  void register_card(IssuerCardRecord record);
  const IssuerCardRecord* card(const Pan& pan) const;

  Message handle(const Message& req) override;

  Verdict authorize(const DataElementMap& req);
  Verdict clear(const DataElementMap& record);
  bool verify_pin_online(const Pan& pan, ByteView blob) const;

 private:
  bool verify_cryptogram(const IssuerCardRecord& c, const DataElementMap& req) const;
  void emit(std::string_view kind, const DataElementMap& req, const Verdict& v);

  IssuerPolicy policy_;
  PinKey pin_key_;
  Trace& trace_;
  std::map<std::string, IssuerCardRecord> cards_;
};

}  // namespace emvsim

#endif  // EMVSIM_ISSUER_H_
