// Messages, the transaction trace, links between agents, and the adversary
// (capabilities, knowledge, interceptors).

#ifndef EMVSIM_CHANNEL_H_
#define EMVSIM_CHANNEL_H_

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "emvsim/datamodel.h"

namespace emvsim {

enum class Direction : uint8_t { kCommand, kResponse };

enum class MsgName : uint8_t {
  kSelect,
  kGpo,
  kReadRecord,
  kGenerateAc,
  kVerify,
  kComputeCc,
  kAuthRequest,
  kAuthResponse,
  kClearingSubmit,
  kClearingResponse,
  kMagicBytes,
};

std::string_view msg_name(MsgName n);
std::optional<MsgName> msg_name_from(std::string_view s);

// Status words. Only success and a handful of error classes are modelled.
namespace sw {
inline constexpr uint16_t kOk = 0x9000;
inline constexpr uint16_t kBlocked = 0x6983;
inline constexpr uint16_t kRefused = 0x6985;
inline constexpr uint16_t kWrongData = 0x6A80;
inline constexpr uint16_t kNotFound = 0x6A82;
inline constexpr uint16_t kRecordNotFound = 0x6A83;
inline constexpr uint16_t kNotSupported = 0x6D00;
}  // namespace sw

struct Message {
  Direction direction = Direction::kCommand;
  MsgName name = MsgName::kSelect;
  DataElementMap payload;
  uint16_t status = sw::kOk;

  bool ok() const { return status == sw::kOk; }
  static Message command(MsgName n, DataElementMap p = {});
  static Message response(MsgName n, DataElementMap p = {});
  static Message error(MsgName n, uint16_t status);
  bool operator==(const Message&) const = default;
};

// Tags a message of this name and direction may carry.
const std::set<Tag>& legal_tags(MsgName n, Direction d);
// Throws CodecError on an illegal tag or an error status with a payload.
void check_legal(const Message& m);

enum class ChannelId : uint8_t { kNfc, kAcquirer, kPayment };
std::string_view channel_name(ChannelId c);
std::optional<ChannelId> channel_from(std::string_view s);

enum class Capability : uint8_t { kA1 = 1, kA2, kA3, kA4, kA5, kA6, kA7, kA8 };
std::string capability_name(Capability c);
std::optional<Capability> capability_from(std::string_view s);

// ---------------------------------------------------------------------------
// Trace.

struct Event {
  int index = 0;
  int run = 0;
  ChannelId channel = ChannelId::kNfc;
  std::string from;
  std::string to;
  Message sent;
  Message delivered;
  bool relay_active = false;
  int latency = 0;
  bool operator==(const Event&) const = default;
};

namespace marker {
inline constexpr std::string_view kScenarioMeta = "scenario_meta";
inline constexpr std::string_view kSession = "session";
inline constexpr std::string_view kCardholderIntent = "cardholder_intent";
inline constexpr std::string_view kCvmEvent = "cvm_event";
inline constexpr std::string_view kTerminalDecision = "terminal_decision";
inline constexpr std::string_view kIssuerDecision = "issuer_decision";
inline constexpr std::string_view kCardClaim = "card_claim";
inline constexpr std::string_view kTerminalClaim = "terminal_claim";
inline constexpr std::string_view kIssuerClaim = "issuer_claim";
inline constexpr std::string_view kKnowledgeAdd = "knowledge_add";
inline constexpr std::string_view kCapabilityUse = "capability_use";
inline constexpr std::string_view kCardBlocked = "card_blocked";
inline constexpr std::string_view kMagicGateOpen = "magic_gate_open";
inline constexpr std::string_view kAvailabilityProbe = "availability_probe";
inline constexpr std::string_view kPinCounterReset = "pin_counter_reset";
}  // namespace marker

// Agent-local observation. `absent` lists tags the agent asserts it does not
// hold (a claimed ⊥), as opposed to tags it makes no statement about.
struct Marker {
  int index = 0;
  int run = 0;
  std::string kind;
  std::string agent;
  DataElementMap data;
  std::vector<Tag> absent;
  std::map<std::string, std::string> attrs;

  std::string attr(const std::string& key) const;
  bool operator==(const Marker&) const = default;
};

using TraceEntry = std::variant<Event, Marker>;

class Trace {
 public:
  Trace() = default;
  static Trace from_entries(std::vector<TraceEntry> entries);

  // Opens a new run and records its session marker.
  int begin_run(std::string_view session_kind, std::map<std::string, std::string> attrs = {});
  int current_run() const { return run_; }

  const Event& add_event(Event e);
  const Marker& mark(std::string_view kind, std::string agent, DataElementMap data = {},
                     std::map<std::string, std::string> attrs = {},
                     std::vector<Tag> absent = {});

  const std::vector<TraceEntry>& entries() const { return entries_; }
  std::vector<const Event*> events() const;
  std::vector<const Marker*> markers(std::string_view kind = {}) const;

  // With recording off, indices still advance but nothing is stored. Used by
  // bulk Monte Carlo loops that only need the agents' return values.
  void set_recording(bool on) { recording_ = on; }
  bool recording() const { return recording_; }

 private:
  std::vector<TraceEntry> entries_;
  int next_index_ = 0;
  int run_ = 0;
  int runs_ = 0;
  bool recording_ = true;
  Event scratch_event_;
  Marker scratch_marker_;
};

// ---------------------------------------------------------------------------
// Adversary.

// Knowledge categories.
namespace secret {
inline constexpr std::string_view kPan = "pan";
inline constexpr std::string_view kExpiry = "expiry";
inline constexpr std::string_view kCardholderName = "cardholder_name";
inline constexpr std::string_view kCsc = "csc";
inline constexpr std::string_view kTrackData = "track_data";
inline constexpr std::string_view kMagstripeModeData = "magstripe_mode_data";
inline constexpr std::string_view kPin = "pin";
inline constexpr std::string_view kPinBlob = "pin_blob";
inline constexpr std::string_view kMk = "mk";
inline constexpr std::string_view kSkC = "sk_c";
inline constexpr std::string_view kMagicBytes = "magic_bytes";
}  // namespace secret

struct PrintedFace {
  Pan pan;
  Expiry expiry;
  std::optional<std::string> csc;
};

class Adversary {
 public:
  Adversary(Trace& trace, std::set<Capability> capabilities);

  bool has(Capability c) const { return capabilities_.count(c) != 0; }
  // Throws ConfigError when `c` is not held; otherwise records first use.
  void require(Capability c, std::string_view what);
  const std::set<Capability>& capabilities() const { return capabilities_; }
  const std::set<Capability>& used() const { return used_; }

  // Adds a value; a knowledge_add marker is emitted only for new values.
  void learn(std::string_view category, std::string value);
  // Adds every plaintext field of `m` that maps to a knowledge category.
  void observe(const Message& m);
  void visual_read(const PrintedFace& face);

  bool knows(std::string_view category) const;
  const std::set<std::string>& values(std::string_view category) const;
  const std::map<std::string, std::set<std::string>, std::less<>>& knowledge() const {
    return knowledge_;
  }

  Trace& trace() { return trace_; }

 private:
  Trace& trace_;
  std::set<Capability> capabilities_;
  std::set<Capability> used_;
  std::map<std::string, std::set<std::string>, std::less<>> knowledge_;
};

class Interceptor {
 public:
  virtual ~Interceptor() = default;
  virtual std::string_view name() const = 0;
  virtual Message on_command(const Message& cmd) { return cmd; }
  // `cmd` is the command as delivered to the card.
  virtual Message on_response(const Message& cmd, const Message& rsp) {
    (void)cmd;
    return rsp;
  }
};

// ---------------------------------------------------------------------------
// Links.

class CardEndpoint {
 public:
  virtual ~CardEndpoint() = default;
  virtual std::string endpoint_name() const = 0;
  virtual Message handle(const Message& cmd) = 0;
  virtual int processing_latency(MsgName n) const {
    (void)n;
    return 0;
  }
  // Extra transport cost added by an endpoint that forwards to another card.
  virtual int transport_overhead() const { return 0; }
};

struct Exchange {
  Message response;
  int transport = 1;
  int processing = 0;
  int latency() const { return transport + processing; }
};

class CardLink {
 public:
  virtual ~CardLink() = default;
  virtual Exchange exchange(const Message& cmd) = 0;
};

// Unmodified NFC link. `relay_active` marks events on a leg the adversary
// controls (an emulated card, or the card side of a translation).
class DirectLink : public CardLink {
 public:
  DirectLink(Trace& trace, CardEndpoint& card, std::string reader, bool relay_active = false);
  // Passive listener; requires A1.
  void attach_eavesdropper(Adversary& adversary);
  Exchange exchange(const Message& cmd) override;

 private:
  Trace& trace_;
  CardEndpoint& card_;
  std::string reader_;
  bool relay_active_;
  Adversary* eavesdropper_ = nullptr;
};

struct RelayOptions {
  int overhead = 1;
  bool cache_read_record = false;
  std::optional<Bytes> magic_bytes;
  bool record = false;
};

// Terminal ↔ adversary ↔ card. Every event carries relay_active.
class RelayLink : public CardLink {
 public:
  RelayLink(Trace& trace, Adversary& adversary, CardEndpoint& card, std::string reader,
            RelayOptions options = {});
  void attach(std::shared_ptr<Interceptor> icpt);
  Exchange exchange(const Message& cmd) override;

 private:
  Message to_card(const Message& cmd, const std::string& from);
  Message intercept_command(const Message& cmd);
  Message intercept_response(const Message& cmd, const Message& rsp);
  void prefetch(const Message& gpo_response);

  Trace& trace_;
  Adversary& adversary_;
  CardEndpoint& card_;
  std::string reader_;
  RelayOptions options_;
  std::vector<std::shared_ptr<Interceptor>> interceptors_;
  std::map<uint8_t, Message> cache_;
  bool magic_sent_ = false;
};

// ---------------------------------------------------------------------------
// Back end.

// AUTH_DECISION values.
namespace auth {
inline constexpr uint8_t kDecline = 0;
inline constexpr uint8_t kApprove = 1;
}  // namespace auth

class IssuerEndpoint {
 public:
  virtual ~IssuerEndpoint() = default;
  virtual Message handle(const Message& req) = 0;
};

struct MerchantAccount {
  std::string merchant_id;
  Mcc mcc;
};

// Honest pass-through that attaches the merchant account registered for the
// submitting terminal id.
class Acquirer {
 public:
  Acquirer(Trace& trace, IssuerEndpoint& issuer) : trace_(trace), issuer_(issuer) {}
  void register_terminal(const std::string& terminal_id, MerchantAccount account);
  Message submit(const std::string& from, const Message& req);

 private:
  Trace& trace_;
  IssuerEndpoint& issuer_;
  std::map<std::string, MerchantAccount> accounts_;
};

}  // namespace emvsim

#endif  // EMVSIM_CHANNEL_H_
