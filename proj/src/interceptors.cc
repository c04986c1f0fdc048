#include "emvsim/interceptors.h"

#include <algorithm>

namespace emvsim {

Message ModifyTtq::on_command(const Message& cmd) {
  if (cmd.name != MsgName::kGpo) return cmd;
  auto ttq = cmd.payload.find<Tag::kTtq>();
  if (!ttq) return cmd;
  if (patch_.cvm_required) ttq->cvm_required = *patch_.cvm_required;
  if (patch_.oda_for_online) ttq->oda_for_online_supported = *patch_.oda_for_online;
  if (patch_.emv_mode) ttq->emv_mode_supported = *patch_.emv_mode;
  Message out = cmd;
  out.payload.set<Tag::kTtq>(*ttq);
  return out;
}

Message ModifyCtq::on_response(const Message& cmd, const Message& rsp) {
  (void)cmd;
  const bool target =
      rsp.name == MsgName::kGpo || (in_records_ && rsp.name == MsgName::kReadRecord);
  if (!target || !rsp.ok()) return rsp;
  auto ctq = rsp.payload.find<Tag::kCtq>();
  if (!ctq) return rsp;
  if (patch_.cdcvm_performed) ctq->cdcvm_performed = *patch_.cdcvm_performed;
  if (patch_.online_pin_required) ctq->online_pin_required = *patch_.online_pin_required;
  if (patch_.signature_required) ctq->signature_required = *patch_.signature_required;
  Message out = rsp;
  out.payload.set<Tag::kCtq>(*ctq);
  return out;
}

Message ModifyAip::on_response(const Message& cmd, const Message& rsp) {
  (void)cmd;
  if (rsp.name != MsgName::kGpo || !rsp.ok()) return rsp;
  auto aip = rsp.payload.find<Tag::kAip>();
  if (!aip) return rsp;
  aip->emv_mode_supported = emv_mode_;
  Message out = rsp;
  out.payload.set<Tag::kAip>(*aip);
  return out;
}

Message SwapAids::on_command(const Message& cmd) {
  if (cmd.name != MsgName::kSelect) return cmd;
  auto aid = cmd.payload.find<Tag::kAid>();
  if (!aid) return cmd;
  auto it = to_card_.find(*aid);
  if (it == to_card_.end()) return cmd;
  terminal_choice_ = *aid;
  Message out = cmd;
  out.payload.set<Tag::kAid>(it->second);
  return out;
}

Message SwapAids::on_response(const Message& cmd, const Message& rsp) {
  (void)cmd;
  if (rsp.name != MsgName::kSelect || !rsp.ok()) return rsp;
  Message out = rsp;
  if (rsp.payload.has(Tag::kAidList)) out.payload.set<Tag::kAidList>({terminal_view_});
  if (rsp.payload.has(Tag::kAid) && terminal_choice_) {
    out.payload.set<Tag::kAid>(*terminal_choice_);
  }
  return out;
}

Message InduceAuthFailure::on_response(const Message& cmd, const Message& rsp) {
  (void)cmd;
  if (rsp.name != MsgName::kReadRecord || !rsp.ok()) return rsp;
  Message out = rsp;
  if (out.payload.has(Tag::kCaPkIndex)) out.payload.set<Tag::kCaPkIndex>({kUnknownCaIndex});
  if (out.payload.has(Tag::kIacDenial)) out.payload.set<Tag::kIacDenial>(Tvr{});
  if (out.payload.has(Tag::kCvmList)) out.payload.set<Tag::kCvmList>(replacement_);
  return out;
}

Message CorruptAc::on_response(const Message& cmd, const Message& rsp) {
  (void)cmd;
  if (rsp.name != MsgName::kGenerateAc || !rsp.ok()) return rsp;
  const Bytes* ac = rsp.payload.raw(Tag::kAc);
  if (!ac || ac->empty()) return rsp;
  Bytes bad = *ac;
  bad[0] ^= 0xFF;
  Message out = rsp;
  out.payload.set_raw(Tag::kAc, std::move(bad));
  return out;
}

Bytes mutate_value(Tag tag, const Bytes& value, Rng& rng) {
  constexpr int kAttempts = 4096;
  constexpr int kMaxFlips = 3;
  if (value.empty()) throw ConfigError("cannot mutate an empty " + std::string(tag_name(tag)));
  for (int i = 0; i < kAttempts; ++i) {
    Bytes b = value;
    const int flips = 1 + static_cast<int>(rng.below(kMaxFlips));
    for (int f = 0; f < flips; ++f) {
      const size_t pos = rng.below(static_cast<uint32_t>(b.size()));
      b[pos] ^= static_cast<uint8_t>(1u << rng.below(8));
    }
    if (b == value) continue;
    try {
      validate_value(tag, b);
    } catch (const CodecError&) {
      continue;
    }
    return b;
  }
  throw ConfigError("no valid mutation found for " + std::string(tag_name(tag)));
}

Message TamperField::apply(const Message& m) {
  if (m.name != msg_ || m.direction != direction_ || !m.ok()) return m;
  const Bytes* v = m.payload.raw(tag_);
  if (!v) return m;
  Message out = m;
  out.payload.set_raw(tag_, mutate_value(tag_, *v, rng_));
  ++fired_;
  return out;
}

Message TamperField::on_command(const Message& cmd) { return apply(cmd); }

Message TamperField::on_response(const Message& cmd, const Message& rsp) {
  (void)cmd;
  return apply(rsp);
}

Translator::Translator(Adversary& adversary, CardLink& card_leg, Aid card_aid, Aid terminal_aid)
    : card_(card_leg), card_aid_(std::move(card_aid)), terminal_aid_(std::move(terminal_aid)) {
  adversary.require(Capability::kA1, "kernel translation");
}

Message Translator::handle(const Message& cmd) {
  switch (cmd.name) {
    case MsgName::kSelect: {
      auto aid = cmd.payload.find<Tag::kAid>();
      if (!aid) {
        Message rsp = card_.exchange(cmd).response;
        if (!rsp.ok()) return rsp;
        DataElementMap p;
        p.set<Tag::kAidList>({{terminal_aid_}});
        return Message::response(MsgName::kSelect, std::move(p));
      }
      if (*aid != terminal_aid_) return Message::error(MsgName::kSelect, sw::kNotFound);
      DataElementMap sel;
      sel.set<Tag::kAid>(card_aid_);
      Message rsp = card_.exchange(Message::command(MsgName::kSelect, std::move(sel))).response;
      if (!rsp.ok()) return rsp;
      DataElementMap p;
      p.set<Tag::kAid>(terminal_aid_);
      p.set<Tag::kPdol>(pdol_for_kernel(3));
      return Message::response(MsgName::kSelect, std::move(p));
    }
    case MsgName::kGpo: return on_gpo(cmd);
    case MsgName::kReadRecord: return card_.exchange(cmd).response;
    default: return Message::error(cmd.name, sw::kNotSupported);
  }
}

Message Translator::on_gpo(const Message& cmd) {
  Message gpo = card_.exchange(cmd).response;
  if (!gpo.ok()) return gpo;
  const Aip aip = gpo.payload.get<Tag::kAip>();
  // A card that advertises fDDA would have its kernel-3 signature checked over
  // data the translator cannot produce.
  if (aip.dda_supported) {
    aborted_ = true;
    return Message::error(MsgName::kGpo, sw::kRefused);
  }
  DataElementMap genac;
  genac.merge(cmd.payload.project({Tag::kAmount, Tag::kCurrency, Tag::kUnT}));
  genac.set<Tag::kTvr>(Tvr{});
  genac.set<Tag::kCvmResults>({CvmMethod::kCdcvm, CvmOutcome::kPerformed});
  genac.set<Tag::kRefControl>({CidKind::kArqc, false});
  Message ac = card_.exchange(Message::command(MsgName::kGenerateAc, std::move(genac))).response;
  if (!ac.ok()) return Message::error(MsgName::kGpo, ac.status);

  DataElementMap p;
  p.set<Tag::kAip>(aip);
  p.set<Tag::kAfl>(gpo.payload.get<Tag::kAfl>());
  p.merge(ac.payload.project({Tag::kIad, Tag::kAc, Tag::kCid, Tag::kAtc}));
  Ctq ctq;
  ctq.cdcvm_performed = true;
  p.set<Tag::kCtq>(ctq);
  return Message::response(MsgName::kGpo, std::move(p));
}

RecordedTx record_from_trace(const Trace& trace, int run) {
  RecordedTx tx;
  const Message* last_cmd = nullptr;
  for (const Event* e : trace.events()) {
    if (e->run != run || e->channel != ChannelId::kNfc) continue;
    if (e->delivered.direction == Direction::kCommand) {
      last_cmd = &e->delivered;
      continue;
    }
    if (!last_cmd || last_cmd->name != e->delivered.name || !e->delivered.ok()) continue;
    const Message& rsp = e->delivered;
    switch (rsp.name) {
      case MsgName::kSelect:
        if (auto list = rsp.payload.find<Tag::kAidList>()) tx.aids = list->aids;
        if (auto aid = rsp.payload.find<Tag::kAid>()) tx.aid = *aid;
        if (auto pdol = rsp.payload.find<Tag::kPdol>()) tx.pdol = *pdol;
        break;
      case MsgName::kGpo:
        if (auto un = last_cmd->payload.find<Tag::kUnT>()) tx.un_t = *un;
        tx.gpo_response = rsp;
        break;
      case MsgName::kReadRecord:
        if (auto nr = last_cmd->payload.find<Tag::kRecordNumber>()) tx.records[nr->value] = rsp;
        break;
      case MsgName::kGenerateAc: tx.genac_response = rsp; break;
      default: break;
    }
    last_cmd = nullptr;
  }
  return tx;
}

Message ReplayEmulator::handle(const Message& cmd) {
  switch (cmd.name) {
    case MsgName::kSelect: {
      auto aid = cmd.payload.find<Tag::kAid>();
      DataElementMap p;
      if (!aid) {
        p.set<Tag::kAidList>({tx_.aids});
        return Message::response(MsgName::kSelect, std::move(p));
      }
      if (*aid != tx_.aid) return Message::error(MsgName::kSelect, sw::kNotFound);
      p.set<Tag::kAid>(tx_.aid);
      p.set<Tag::kPdol>(tx_.pdol);
      return Message::response(MsgName::kSelect, std::move(p));
    }
    case MsgName::kGpo: {
      auto un = cmd.payload.find<Tag::kUnT>();
      if (!un || un->value != tx_.un_t.value) {
        un_mismatch_ = true;
        return Message::error(MsgName::kGpo, sw::kWrongData);
      }
      return tx_.gpo_response;
    }
    case MsgName::kReadRecord: {
      auto nr = cmd.payload.find<Tag::kRecordNumber>();
      auto it = nr ? tx_.records.find(nr->value) : tx_.records.end();
      if (it == tx_.records.end()) return Message::error(MsgName::kReadRecord, sw::kRecordNotFound);
      return it->second;
    }
    case MsgName::kGenerateAc:
      if (!tx_.genac_response) return Message::error(MsgName::kGenerateAc, sw::kNotSupported);
      return *tx_.genac_response;
    default: return Message::error(cmd.name, sw::kNotSupported);
  }
}

Message MagicByteRecorder::handle(const Message& cmd) {
  if (cmd.name == MsgName::kMagicBytes) {
    if (auto b = cmd.payload.find<Tag::kMagicBytes>()) {
      captured_ = b->value;
      adversary_.observe(cmd);
    }
    return Message::response(MsgName::kMagicBytes);
  }
  return Message::error(cmd.name, sw::kNotFound);
}

}  // namespace emvsim
