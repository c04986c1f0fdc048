// Terminal state machine: kernel selection, ODA, CVM selection, action
// analysis, online authorization, clearing, mag-stripe mode and transit.

#ifndef EMVSIM_TERMINAL_H_
#define EMVSIM_TERMINAL_H_

#include <optional>
#include <string>
#include <vector>

#include "emvsim/channel.h"
#include "emvsim/crypto.h"
#include "emvsim/datamodel.h"
#include "emvsim/rng.h"

namespace emvsim {

struct TransitSettings {
  Bytes magic_bytes;
};

struct TerminalConfig {
  std::string id;
  std::string terminal_id;
  std::vector<Aid> supported_aids;
  CaKeyStore ca_store;
  // TAC-Online and TAC-Default carry cda_failed; TAC-Denial does not unless
  // configured.
  ActionCodes tac{{false}, {true}, {true}};
  uint64_t cvm_required_limit = 5000;
  uint64_t contactless_ceiling = 100000;
  uint64_t floor_limit = 0;
  std::string currency = "EUR";
  bool online_capable = true;
  bool kernel2_cdcvm_supported = true;
  std::optional<Un> fixed_un;
  bool retry_un_on_failure = false;
  int retry_budget = 10;
  bool magstripe_supported = false;
  std::string merchant_id;
  Mcc mcc;
  std::optional<TransitSettings> transit;
  int latency_budget = 3;
  bool relay_protection = false;
  bool kernel3_require_fdda = false;
  bool decline_on_ca_lookup_failure = false;
  bool diligent_cashier = false;
  bool ttq_online_pin = true;
  bool ttq_signature = true;
  bool ttq_oda_for_online = false;
  PinKey pin_key;

  // Throws ConfigError on an inconsistent configuration.
  void check() const;
};

// Who holds the card at the reader and what they can supply when asked.
struct Presenter {
  std::string who = "cardholder";
  std::optional<std::string> pin;
  bool is_cardholder() const { return who == "cardholder"; }
};

struct Transaction {
  Amount amount;
  Presenter presenter;
};

enum class Decision : uint8_t { kDeclined, kAcceptedOffline, kAcceptedOnline };
std::string_view decision_name(Decision d);

struct TerminalOutcome {
  Decision decision = Decision::kDeclined;
  std::string reason;
  CvmResults cvm_results;
  Tvr tvr;
  Amount amount;
  std::optional<Pan> pan;
  std::string merchant_id;
  bool magstripe_mode = false;
  int attempts = 0;  // COMPUTE_CC attempts in mag-stripe mode
  // Data submitted later for clearing of an offline acceptance.
  DataElementMap clearing_record;

  bool accepted() const { return decision != Decision::kDeclined; }
};

std::optional<Aid> select_kernel(const TerminalConfig& cfg, const std::vector<Aid>& card_aids);

CvmResults select_cvm_kernel2(const TerminalConfig& cfg, const Aip& aip, const CvmList& cvm_list,
                              uint64_t amount);

enum class K3Cvm : uint8_t { kNoCvm, kCdcvm, kOnlinePin, kSignature, kDecline };
K3Cvm select_cvm_kernel3(const Ttq& ttq, const Ctq& ctq);

enum class Action : uint8_t { kDecline, kOfflineOk, kGoOnline };
Action action_analysis(const TerminalConfig& cfg, const Tvr& tvr, const ActionCodes& iac,
                       uint64_t amount, CidKind cid);

struct OdaResult {
  bool ok = false;
  ChainStatus chain = ChainStatus::kOk;
  Bytes card_pk;
};

// Verifies the certificate chain carried in `records`. For SDA the chain ends
// at the issuer certificate.
ChainResult verify_card_chain(const TerminalConfig& cfg, const DataElementMap& records,
                              bool need_card_cert);

Ttq terminal_ttq(const TerminalConfig& cfg, uint64_t amount);

class Terminal {
 public:
  Terminal(TerminalConfig cfg, Rng& rng, Trace& trace, Acquirer* acquirer);

  std::string name() const { return "terminal:" + cfg_.id; }
  const TerminalConfig& config() const { return cfg_; }

  TerminalOutcome run_transaction(CardLink& card, const Transaction& tx);
  // Returns true when the issuer approves clearing.
  bool submit_clearing(const TerminalOutcome& outcome);

 private:
  struct Session;
  Message send(CardLink& card, const Message& cmd);
  void run_kernel2(CardLink& card, Session& s);
  void run_kernel3(CardLink& card, Session& s);
  void run_magstripe(CardLink& card, Session& s);
  void perform_online_pin(Session& s);
  bool perform_signature(Session& s);
  void go_online(Session& s, DataElementMap request);
  void finish(Session& s);

  TerminalConfig cfg_;
  Rng& rng_;
  Trace& trace_;
  Acquirer* acquirer_;
};

}  // namespace emvsim

#endif  // EMVSIM_TERMINAL_H_
