// Man-in-the-middle transformations and adversary-controlled card endpoints.

#ifndef EMVSIM_INTERCEPTORS_H_
#define EMVSIM_INTERCEPTORS_H_

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "emvsim/card.h"
#include "emvsim/channel.h"
#include "emvsim/datamodel.h"
#include "emvsim/rng.h"

namespace emvsim {

struct TtqPatch {
  std::optional<bool> cvm_required;
  std::optional<bool> oda_for_online;
  std::optional<bool> emv_mode;
};

// Rewrites the TTQ inside the GPO command.
class ModifyTtq : public Interceptor {
 public:
  explicit ModifyTtq(TtqPatch patch) : patch_(patch) {}
  std::string_view name() const override { return "modify_ttq"; }
  Message on_command(const Message& cmd) override;

 private:
  TtqPatch patch_;
};

struct CtqPatch {
  std::optional<bool> cdcvm_performed;
  std::optional<bool> online_pin_required;
  std::optional<bool> signature_required;
};

// Rewrites the CTQ in the GPO response and, optionally, in READ RECORD
// responses that carry it.
class ModifyCtq : public Interceptor {
 public:
  ModifyCtq(CtqPatch patch, bool in_records) : patch_(patch), in_records_(in_records) {}
  std::string_view name() const override { return "modify_ctq"; }
  Message on_response(const Message& cmd, const Message& rsp) override;

 private:
  CtqPatch patch_;
  bool in_records_;
};

// Rewrites the AIP in the GPO response.
class ModifyAip : public Interceptor {
 public:
  explicit ModifyAip(bool emv_mode) : emv_mode_(emv_mode) {}
  std::string_view name() const override { return "modify_aip"; }
  Message on_response(const Message& cmd, const Message& rsp) override;

 private:
  bool emv_mode_;
};

// Shows the terminal `terminal_view` and maps the terminal's SELECT back onto
// the card's application.
class SwapAids : public Interceptor {
 public:
  SwapAids(std::vector<Aid> terminal_view, std::map<Aid, Aid> terminal_to_card)
      : terminal_view_(std::move(terminal_view)), to_card_(std::move(terminal_to_card)) {}
  std::string_view name() const override { return "swap_aids"; }
  Message on_command(const Message& cmd) override;
  Message on_response(const Message& cmd, const Message& rsp) override;

 private:
  std::vector<Aid> terminal_view_;
  std::map<Aid, Aid> to_card_;
  std::optional<Aid> terminal_choice_;
};

// Replaces the CA key index with an unknown value, zeroes IAC-Denial and
// substitutes the CVM List in READ RECORD responses.
class InduceAuthFailure : public Interceptor {
 public:
  static constexpr uint8_t kUnknownCaIndex = 0xFF;
  explicit InduceAuthFailure(CvmList replacement) : replacement_(std::move(replacement)) {}
  std::string_view name() const override { return "induce_auth_failure"; }
  Message on_response(const Message& cmd, const Message& rsp) override;

 private:
  CvmList replacement_;
};

// Flips one byte of the AC in the GENERATE AC response.
class CorruptAc : public Interceptor {
 public:
  std::string_view name() const override { return "corrupt_ac"; }
  Message on_response(const Message& cmd, const Message& rsp) override;
};

// Returns a different value that still decodes as `tag`, by random bit flips.
Bytes mutate_value(Tag tag, const Bytes& value, Rng& rng);

// Mutates one tag in every matching message; counts how often it fired.
class TamperField : public Interceptor {
 public:
  TamperField(Tag tag, MsgName msg, Direction direction, Rng& rng)
      : tag_(tag), msg_(msg), direction_(direction), rng_(rng) {}
  std::string_view name() const override { return "tamper_field"; }
  Message on_command(const Message& cmd) override;
  Message on_response(const Message& cmd, const Message& rsp) override;
  int fired() const { return fired_; }

 private:
  Message apply(const Message& m);
  Tag tag_;
  MsgName msg_;
  Direction direction_;
  Rng& rng_;
  int fired_ = 0;
};

// Presents a kernel-2 card to a kernel-3 reader. Drives GPO and GENERATE AC
// on the card and assembles a kernel-3 GPO response with a fabricated CTQ.
class Translator : public CardEndpoint {
 public:
  Translator(Adversary& adversary, CardLink& card_leg, Aid card_aid, Aid terminal_aid);
  std::string endpoint_name() const override { return "translator"; }
  Message handle(const Message& cmd) override;
  int transport_overhead() const override { return 1; }
  bool aborted() const { return aborted_; }

 private:
  Message on_gpo(const Message& cmd);
  CardLink& card_;
  Aid card_aid_;
  Aid terminal_aid_;
  bool aborted_ = false;
};

// Transcript of one card session, keyed by command.
struct RecordedTx {
  std::vector<Aid> aids;
  Aid aid;
  Dol pdol;
  Un un_t;
  Message gpo_response;
  std::map<uint8_t, Message> records;
  std::optional<Message> genac_response;
};

// Rebuilds a transcript from trace events of the given run.
RecordedTx record_from_trace(const Trace& trace, int run);

// Answers from a transcript; the GPO is replayed only for the recorded UN.
class ReplayEmulator : public CardEndpoint {
 public:
  explicit ReplayEmulator(RecordedTx tx) : tx_(std::move(tx)) {}
  std::string endpoint_name() const override { return "replay_emulator"; }
  Message handle(const Message& cmd) override;
  bool un_mismatch() const { return un_mismatch_; }

 private:
  RecordedTx tx_;
  bool un_mismatch_ = false;
};

// Emulated card that files whatever magic bytes a reader sends, then stops
// the session.
class MagicByteRecorder : public CardEndpoint {
 public:
  explicit MagicByteRecorder(Adversary& adversary) : adversary_(adversary) {}
  std::string endpoint_name() const override { return "magic_byte_recorder"; }
  Message handle(const Message& cmd) override;
  const std::optional<Bytes>& captured() const { return captured_; }

 private:
  Adversary& adversary_;
  std::optional<Bytes> captured_;
};

}  // namespace emvsim

#endif  // EMVSIM_INTERCEPTORS_H_
