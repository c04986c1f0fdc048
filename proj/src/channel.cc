#include "emvsim/channel.h"

#include <array>
#include <utility>

namespace emvsim {

namespace {

constexpr std::array<std::pair<MsgName, std::string_view>, 11> kMsgNames = {{
    {MsgName::kSelect, "SELECT"},
    {MsgName::kGpo, "GET_PROCESSING_OPTIONS"},
    {MsgName::kReadRecord, "READ_RECORD"},
    {MsgName::kGenerateAc, "GENERATE_AC"},
    {MsgName::kVerify, "VERIFY"},
    {MsgName::kComputeCc, "COMPUTE_CRYPTOGRAPHIC_CHECKSUM"},
    {MsgName::kAuthRequest, "AUTH_REQUEST"},
    {MsgName::kAuthResponse, "AUTH_RESPONSE"},
    {MsgName::kClearingSubmit, "CLEARING_SUBMIT"},
    {MsgName::kClearingResponse, "CLEARING_RESPONSE"},
    {MsgName::kMagicBytes, "MAGIC_BYTES"},
}};

const std::set<Tag> kBackendRequest = {
    Tag::kPan,      Tag::kExpiry,     Tag::kAmount,     Tag::kCurrency, Tag::kAid,
    Tag::kAtc,      Tag::kAc,         Tag::kIad,        Tag::kCid,      Tag::kTtq,
    Tag::kUnT,      Tag::kCtq,        Tag::kAip,        Tag::kTvr,      Tag::kCvmResults,
    Tag::kPinBlob,  Tag::kMerchantId, Tag::kMcc,        Tag::kTerminalId, Tag::kCvc3,
    Tag::kMagstripeUn,
};

const std::set<Tag> kBackendResponse = {Tag::kAuthDecision, Tag::kDeclineReason};

const std::set<Tag> kEmpty;

// Plaintext tags an observer can file into knowledge.
std::string_view category_of(Tag t) {
  switch (t) {
    case Tag::kPan: return secret::kPan;
    case Tag::kExpiry: return secret::kExpiry;
    case Tag::kCardholderName: return secret::kCardholderName;
    case Tag::kTrack1Data:
    case Tag::kTrack2Equivalent:
    case Tag::kTrack2Data: return secret::kTrackData;
    case Tag::kPinBlob: return secret::kPinBlob;
    case Tag::kCsc: return secret::kCsc;
    case Tag::kMagicBytes: return secret::kMagicBytes;
    default: return {};
  }
}

}  // namespace

std::string_view msg_name(MsgName n) {
  for (const auto& [k, v] : kMsgNames) {
    if (k == n) return v;
  }
  return "?";
}

std::optional<MsgName> msg_name_from(std::string_view s) {
  for (const auto& [k, v] : kMsgNames) {
    if (v == s) return k;
  }
  return std::nullopt;
}

Message Message::command(MsgName n, DataElementMap p) {
  return {Direction::kCommand, n, std::move(p), sw::kOk};
}

Message Message::response(MsgName n, DataElementMap p) {
  return {Direction::kResponse, n, std::move(p), sw::kOk};
}

Message Message::error(MsgName n, uint16_t status) {
  return {Direction::kResponse, n, {}, status};
}

const std::set<Tag>& legal_tags(MsgName n, Direction d) {
  static const std::map<std::pair<MsgName, Direction>, std::set<Tag>> kTable = {
      {{MsgName::kSelect, Direction::kCommand}, {Tag::kAid}},
      {{MsgName::kSelect, Direction::kResponse}, {Tag::kAidList, Tag::kAid, Tag::kPdol}},
      {{MsgName::kGpo, Direction::kCommand},
       {Tag::kTtq, Tag::kAmount, Tag::kCurrency, Tag::kUnT}},
      {{MsgName::kGpo, Direction::kResponse},
       {Tag::kAip, Tag::kAfl, Tag::kIad, Tag::kAc, Tag::kCid, Tag::kAtc, Tag::kCtq}},
      {{MsgName::kReadRecord, Direction::kCommand}, {Tag::kRecordNumber}},
      {{MsgName::kReadRecord, Direction::kResponse},
       {Tag::kRecordNumber, Tag::kPan, Tag::kExpiry, Tag::kCardholderName, Tag::kTrack1Data,
        Tag::kTrack2Equivalent, Tag::kTrack2Data, Tag::kCdol1, Tag::kCvmList, Tag::kIacDefault,
        Tag::kIacDenial, Tag::kIacOnline, Tag::kCaPkIndex, Tag::kIssuerPkCert, Tag::kIccPkCert,
        Tag::kSsad, Tag::kSdad, Tag::kUnC, Tag::kCtq}},
      {{MsgName::kGenerateAc, Direction::kCommand},
       {Tag::kAmount, Tag::kCurrency, Tag::kUnT, Tag::kTvr, Tag::kCvmResults,
        Tag::kRefControl}},
      {{MsgName::kGenerateAc, Direction::kResponse},
       {Tag::kCid, Tag::kAtc, Tag::kAc, Tag::kIad, Tag::kSdad, Tag::kUnC}},
      {{MsgName::kVerify, Direction::kCommand}, {Tag::kPinGuess}},
      {{MsgName::kVerify, Direction::kResponse}, {Tag::kVerifyResult, Tag::kPinTryCounter}},
      {{MsgName::kComputeCc, Direction::kCommand}, {Tag::kMagstripeUn}},
      {{MsgName::kComputeCc, Direction::kResponse}, {Tag::kAtc, Tag::kCvc3}},
      {{MsgName::kAuthRequest, Direction::kCommand}, kBackendRequest},
      {{MsgName::kAuthResponse, Direction::kResponse}, kBackendResponse},
      {{MsgName::kClearingSubmit, Direction::kCommand}, kBackendRequest},
      {{MsgName::kClearingResponse, Direction::kResponse}, kBackendResponse},
      {{MsgName::kMagicBytes, Direction::kCommand}, {Tag::kMagicBytes}},
      {{MsgName::kMagicBytes, Direction::kResponse}, {}},
  };
  auto it = kTable.find({n, d});
  return it == kTable.end() ? kEmpty : it->second;
}

void check_legal(const Message& m) {
  if (!m.ok() && !m.payload.empty()) {
    throw CodecError(std::string(msg_name(m.name)) + ": error response carries a payload");
  }
  const auto& legal = legal_tags(m.name, m.direction);
  for (const auto& [tag, value] : m.payload) {
    if (!legal.count(tag)) {
      throw CodecError(std::string(msg_name(m.name)) + " may not carry " +
                       std::string(tag_name(tag)));
    }
  }
}

std::string_view channel_name(ChannelId c) {
  switch (c) {
    case ChannelId::kNfc: return "nfc";
    case ChannelId::kAcquirer: return "acquirer";
    case ChannelId::kPayment: return "payment";
  }
  return "?";
}

std::optional<ChannelId> channel_from(std::string_view s) {
  for (auto c : {ChannelId::kNfc, ChannelId::kAcquirer, ChannelId::kPayment}) {
    if (channel_name(c) == s) return c;
  }
  return std::nullopt;
}

std::string capability_name(Capability c) {
  return "A" + std::to_string(static_cast<int>(c));
}

std::optional<Capability> capability_from(std::string_view s) {
  if (s.size() != 2 || s[0] != 'A' || s[1] < '1' || s[1] > '8') return std::nullopt;
  return static_cast<Capability>(s[1] - '0');
}

std::string Marker::attr(const std::string& key) const {
  auto it = attrs.find(key);
  return it == attrs.end() ? std::string() : it->second;
}

Trace Trace::from_entries(std::vector<TraceEntry> entries) {
  Trace t;
  for (const auto& e : entries) {
    int idx = std::visit([](const auto& x) { return x.index; }, e);
    int run = std::visit([](const auto& x) { return x.run; }, e);
    t.next_index_ = std::max(t.next_index_, idx + 1);
    t.runs_ = std::max(t.runs_, run);
  }
  t.run_ = t.runs_;
  t.entries_ = std::move(entries);
  return t;
}

int Trace::begin_run(std::string_view session_kind, std::map<std::string, std::string> attrs) {
  run_ = ++runs_;
  attrs["kind"] = std::string(session_kind);
  mark(marker::kSession, "scenario", {}, std::move(attrs));
  return run_;
}

const Event& Trace::add_event(Event e) {
  e.index = next_index_++;
  e.run = run_;
  if (!recording_) {
    scratch_event_ = std::move(e);
    return scratch_event_;
  }
  entries_.emplace_back(std::move(e));
  return std::get<Event>(entries_.back());
}

const Marker& Trace::mark(std::string_view kind, std::string agent, DataElementMap data,
                          std::map<std::string, std::string> attrs, std::vector<Tag> absent) {
  Marker m{next_index_++, run_, std::string(kind), std::move(agent), std::move(data),
           std::move(absent), std::move(attrs)};
  if (!recording_) {
    scratch_marker_ = std::move(m);
    return scratch_marker_;
  }
  entries_.emplace_back(std::move(m));
  return std::get<Marker>(entries_.back());
}

std::vector<const Event*> Trace::events() const {
  std::vector<const Event*> out;
  for (const auto& e : entries_) {
    if (const auto* ev = std::get_if<Event>(&e)) out.push_back(ev);
  }
  return out;
}

std::vector<const Marker*> Trace::markers(std::string_view kind) const {
  std::vector<const Marker*> out;
  for (const auto& e : entries_) {
    const auto* m = std::get_if<Marker>(&e);
    if (m && (kind.empty() || m->kind == kind)) out.push_back(m);
  }
  return out;
}

Adversary::Adversary(Trace& trace, std::set<Capability> capabilities)
    : trace_(trace), capabilities_(std::move(capabilities)) {}

void Adversary::require(Capability c, std::string_view what) {
  if (!has(c)) {
    throw ConfigError(std::string(what) + " requires capability " + capability_name(c));
  }
  if (used_.insert(c).second) {
    trace_.mark(marker::kCapabilityUse, "adversary", {},
                {{"capability", capability_name(c)}, {"for", std::string(what)}});
  }
}

void Adversary::learn(std::string_view category, std::string value) {
  auto& bucket = knowledge_[std::string(category)];
  if (!bucket.insert(value).second) return;
  trace_.mark(marker::kKnowledgeAdd, "adversary", {},
              {{"category", std::string(category)}, {"value", std::move(value)}});
}

void Adversary::observe(const Message& m) {
  for (const auto& [tag, value] : m.payload) {
    std::string_view cat = category_of(tag);
    if (!cat.empty()) learn(cat, to_hex(value));
  }
}

void Adversary::visual_read(const PrintedFace& face) {
  require(Capability::kA8, "visual read");
  learn(secret::kPan, face.pan.digits);
  learn(secret::kExpiry, face.expiry.str());
  if (face.csc) learn(secret::kCsc, *face.csc);
}

bool Adversary::knows(std::string_view category) const {
  auto it = knowledge_.find(category);
  return it != knowledge_.end() && !it->second.empty();
}

const std::set<std::string>& Adversary::values(std::string_view category) const {
  static const std::set<std::string> kNone;
  auto it = knowledge_.find(category);
  return it == knowledge_.end() ? kNone : it->second;
}

DirectLink::DirectLink(Trace& trace, CardEndpoint& card, std::string reader, bool relay_active)
    : trace_(trace), card_(card), reader_(std::move(reader)), relay_active_(relay_active) {}

void DirectLink::attach_eavesdropper(Adversary& adversary) {
  adversary.require(Capability::kA1, "eavesdropping");
  eavesdropper_ = &adversary;
}

Exchange DirectLink::exchange(const Message& cmd) {
  check_legal(cmd);
  const int transport = 1 + card_.transport_overhead();
  const int processing = card_.processing_latency(cmd.name);
  trace_.add_event({0, 0, ChannelId::kNfc, reader_, card_.endpoint_name(), cmd, cmd,
                    relay_active_, 0});
  if (eavesdropper_) eavesdropper_->observe(cmd);
  Message rsp = card_.handle(cmd);
  check_legal(rsp);
  trace_.add_event({0, 0, ChannelId::kNfc, card_.endpoint_name(), reader_, rsp, rsp,
                    relay_active_, transport + processing});
  if (eavesdropper_) eavesdropper_->observe(rsp);
  return {std::move(rsp), transport, processing};
}

RelayLink::RelayLink(Trace& trace, Adversary& adversary, CardEndpoint& card, std::string reader,
                     RelayOptions options)
    : trace_(trace),
      adversary_(adversary),
      card_(card),
      reader_(std::move(reader)),
      options_(std::move(options)) {
  adversary_.require(Capability::kA1, "relay");
}

void RelayLink::attach(std::shared_ptr<Interceptor> icpt) {
  adversary_.require(Capability::kA1, std::string("interceptor ") + std::string(icpt->name()));
  interceptors_.push_back(std::move(icpt));
}

Message RelayLink::intercept_command(const Message& cmd) {
  Message out = cmd;
  for (const auto& i : interceptors_) out = i->on_command(out);
  check_legal(out);
  return out;
}

Message RelayLink::intercept_response(const Message& cmd, const Message& rsp) {
  Message out = rsp;
  for (const auto& i : interceptors_) out = i->on_response(cmd, out);
  check_legal(out);
  return out;
}

Message RelayLink::to_card(const Message& cmd, const std::string& from) {
  trace_.add_event({0, 0, ChannelId::kNfc, from, card_.endpoint_name(), cmd, cmd, true, 0});
  Message rsp = card_.handle(cmd);
  check_legal(rsp);
  if (options_.record) adversary_.observe(rsp);
  return rsp;
}

void RelayLink::prefetch(const Message& gpo_response) {
  auto afl = gpo_response.payload.find<Tag::kAfl>();
  if (!afl) return;
  for (uint8_t nr : afl->records) {
    DataElementMap p;
    p.set<Tag::kRecordNumber>({nr});
    Message rsp = to_card(Message::command(MsgName::kReadRecord, std::move(p)), "relay");
    trace_.add_event({0, 0, ChannelId::kNfc, card_.endpoint_name(), "relay", rsp, rsp, true,
                      1 + options_.overhead + card_.processing_latency(MsgName::kReadRecord)});
    cache_[nr] = std::move(rsp);
  }
}

Exchange RelayLink::exchange(const Message& cmd) {
  check_legal(cmd);
  if (options_.record) adversary_.observe(cmd);

  if (options_.magic_bytes && !magic_sent_) {
    magic_sent_ = true;
    DataElementMap p;
    p.set<Tag::kMagicBytes>({*options_.magic_bytes});
    Message rsp = to_card(Message::command(MsgName::kMagicBytes, std::move(p)), "relay");
    trace_.add_event({0, 0, ChannelId::kNfc, card_.endpoint_name(), "relay", rsp, rsp, true,
                      1 + options_.overhead});
  }

  if (cmd.name == MsgName::kReadRecord && options_.cache_read_record) {
    auto nr = cmd.payload.find<Tag::kRecordNumber>();
    auto it = nr ? cache_.find(nr->value) : cache_.end();
    if (it != cache_.end()) {
      Message delivered_cmd = intercept_command(cmd);
      trace_.add_event({0, 0, ChannelId::kNfc, reader_, "relay", cmd, delivered_cmd, true, 0});
      Message rsp = intercept_response(delivered_cmd, it->second);
      trace_.add_event({0, 0, ChannelId::kNfc, "relay", reader_, it->second, rsp, true, 1});
      return {std::move(rsp), 1, 0};
    }
  }

  Message delivered_cmd = intercept_command(cmd);
  const int transport = 1 + options_.overhead;
  const int processing = card_.processing_latency(cmd.name);
  trace_.add_event(
      {0, 0, ChannelId::kNfc, reader_, card_.endpoint_name(), cmd, delivered_cmd, true, 0});
  Message rsp = card_.handle(delivered_cmd);
  check_legal(rsp);
  if (options_.record) adversary_.observe(rsp);
  Message delivered_rsp = intercept_response(delivered_cmd, rsp);
  trace_.add_event({0, 0, ChannelId::kNfc, card_.endpoint_name(), reader_, rsp, delivered_rsp,
                    true, transport + processing});
  if (cmd.name == MsgName::kGpo && options_.cache_read_record && rsp.ok()) prefetch(rsp);
  return {std::move(delivered_rsp), transport, processing};
}

void Acquirer::register_terminal(const std::string& terminal_id, MerchantAccount account) {
  accounts_[terminal_id] = std::move(account);
}

Message Acquirer::submit(const std::string& from, const Message& req) {
  check_legal(req);
  trace_.add_event({0, 0, ChannelId::kAcquirer, from, "acquirer", req, req, false, 0});
  Message forwarded = req;
  if (auto tid = req.payload.find<Tag::kTerminalId>()) {
    auto it = accounts_.find(tid->value);
    if (it != accounts_.end()) {
      forwarded.payload.set<Tag::kMerchantId>({it->second.merchant_id});
      forwarded.payload.set<Tag::kMcc>(it->second.mcc);
    }
  }
  trace_.add_event(
      {0, 0, ChannelId::kPayment, "acquirer", "issuer", forwarded, forwarded, false, 0});
  Message rsp = issuer_.handle(forwarded);
  check_legal(rsp);
  trace_.add_event({0, 0, ChannelId::kPayment, "issuer", "acquirer", rsp, rsp, false, 0});
  trace_.add_event({0, 0, ChannelId::kAcquirer, "acquirer", from, rsp, rsp, false, 0});
  return rsp;
}

}  // namespace emvsim
