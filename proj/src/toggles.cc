#include "emvsim/toggles.h"

#include <algorithm>

namespace emvsim {

namespace {

void set_method(CardProfile& c, OdaMethod m, bool on) {
  if (on) {
    c.oda_methods.insert(m);
  } else {
    c.oda_methods.erase(m);
  }
}

constexpr uint8_t kWeakUnDigits = 3;
constexpr uint8_t kStrongUnDigits = 8;

#define CARD_FIELD(field)                                                \
  [](EnvSpec& e, bool v) { e.card.field = v; },                          \
      [](const EnvSpec& e) { return static_cast<bool>(e.card.field); }
#define TERMINAL_FIELD(field)                                            \
  [](EnvSpec& e, bool v) { e.terminal.field = v; },                      \
      [](const EnvSpec& e) { return static_cast<bool>(e.terminal.field); }
#define ISSUER_FIELD(field)                                              \
  [](EnvSpec& e, bool v) { e.issuer.field = v; },                        \
      [](const EnvSpec& e) { return static_cast<bool>(e.issuer.field); }

const std::vector<Knob> kKnobs = {
    // Card.
    {"fdda", Component::kCard, false, "ctq_not_protected",
     "kernel-3 card signs CTQ with fDDA",
     [](EnvSpec& e, bool v) { set_method(e.card, OdaMethod::kFdda, v); },
     [](const EnvSpec& e) { return e.card.oda_methods.count(OdaMethod::kFdda) != 0; }},
    {"cda", Component::kCard, false, "ac_not_authenticated_sda_dda",
     "kernel-2 card signs the AC with CDA; off leaves it on DDA",
     [](EnvSpec& e, bool v) {
       set_method(e.card, OdaMethod::kCda, v);
       if (!v && !e.card.aids.empty() && kernel_of(e.card.aids.front()) == 2) {
         set_method(e.card, OdaMethod::kDda, true);
       }
     },
     [](const EnvSpec& e) { return e.card.oda_methods.count(OdaMethod::kCda) != 0; }},
    {"ac_covers_aid", Component::kCard, false, "aid_not_protected",
     "AC input includes the selected AID", CARD_FIELD(ac_covers_aid)},
    {"track_data_in_emv", Component::kCard, true, "magstripe_data_in_emv",
     "EMV records carry Track 2 equivalent data", CARD_FIELD(track_data_in_emv)},
    {"offline_pin_over_nfc", Component::kCard, true, "offline_pin_over_nfc",
     "card answers VERIFY over the contactless interface", CARD_FIELD(offline_pin_enabled)},
    {"foreign_currency_no_cvm", Component::kCard, true, "no_foreign_currency_limit",
     "card waives CVM for foreign-currency amounts", CARD_FIELD(foreign_currency_no_cvm)},
    {"wallet_always_cdcvm", Component::kCard, true, "phones_always_send_cdcvm",
     "locked wallet reports CDCVM performed", CARD_FIELD(wallet_always_cdcvm)},
    {"magic_byte_unlock", Component::kCard, true, "magic_byte_transit",
     "transit magic bytes open the locked-wallet gate", CARD_FIELD(magic_byte_unlock)},
    {"weak_magstripe_un", Component::kCard, true, "weak_random",
     "mag-stripe UN limited to 3 decimal digits",
     [](EnvSpec& e, bool v) {
       if (e.card.magstripe) e.card.magstripe->n_un_digits = v ? kWeakUnDigits : kStrongUnDigits;
     },
     [](const EnvSpec& e) {
       return e.card.magstripe && e.card.magstripe->n_un_digits <= kWeakUnDigits;
     }},
    // Terminal.
    {"tac_denial_cda_failed", Component::kTerminal, false, "tac_denial_zero",
     "TAC-Denial includes the CDA-failed bit",
     [](EnvSpec& e, bool v) { e.terminal.tac.denial.cda_failed = v; },
     [](const EnvSpec& e) { return e.terminal.tac.denial.cda_failed; }},
    {"decline_on_ca_lookup_failure", Component::kTerminal, false,
     "ca_lookup_failure_not_declined", "unknown CA key index declines",
     TERMINAL_FIELD(decline_on_ca_lookup_failure)},
    {"diligent_cashier", Component::kTerminal, false, "paper_signature_weakness",
     "cashier rejects signatures not made by the cardholder", TERMINAL_FIELD(diligent_cashier)},
    {"relay_protection", Component::kTerminal, false, "no_relay_protection",
     "reader rejects exchanges with relay-scale transport delay",
     TERMINAL_FIELD(relay_protection)},
    {"magstripe_fallback", Component::kTerminal, true, "aip_not_protected_magstripe",
     "reader runs mag-stripe mode when the AIP denies EMV mode",
     TERMINAL_FIELD(magstripe_supported)},
    {"un_retry", Component::kTerminal, true, "un_retry",
     "reader retries COMPUTE CRYPTOGRAPHIC CHECKSUM with fresh UNs",
     TERMINAL_FIELD(retry_un_on_failure)},
    // Issuer.
    {"check_atc_order", Component::kIssuer, false, "atc_out_of_order",
     "issuer rejects non-increasing ATCs", ISSUER_FIELD(check_atc_order)},
    {"check_un_reuse", Component::kIssuer, false, "un_reuse_not_prevented",
     "issuer rejects a repeated UN per terminal", ISSUER_FIELD(check_un_reuse)},
    {"check_aid_pan_match", Component::kIssuer, false, "aid_pan_not_checked",
     "issuer rejects AIDs of another brand than the PAN", ISSUER_FIELD(check_aid_pan_match)},
    {"check_plastic_cdcvm", Component::kIssuer, false, "plastic_cdcvm_not_checked",
     "issuer rejects CDCVM claims for plastic cards", ISSUER_FIELD(check_plastic_cdcvm)},
    {"check_ttq_in_ac", Component::kIssuer, false, "ttq_not_protected",
     "TTQ is part of the verified AC input", ISSUER_FIELD(check_ttq_in_ac)},
    {"check_mcc_for_wallet_no_cdcvm", Component::kIssuer, false, "",
     "issuer rejects high-value wallet payments without CDCVM outside transit",
     ISSUER_FIELD(check_mcc_for_wallet_no_cdcvm)},
    {"enforce_cvm_limit", Component::kIssuer, false, "",
     "issuer requires PIN or CDCVM above the CVM limit", ISSUER_FIELD(enforce_cvm_limit)},
    {"foreign_cvm_limit_enforced", Component::kIssuer, false, "",
     "CVM-limit enforcement also covers foreign currencies",
     ISSUER_FIELD(foreign_cvm_limit_enforced)},
};

#undef CARD_FIELD
#undef TERMINAL_FIELD
#undef ISSUER_FIELD

const std::vector<FlawInfo> kFlaws = {
    {"magstripes_supported", true, "cards still carry a physical magnetic stripe"},
    {"unencrypted_data", true, "card data travels in clear over NFC"},
    {"magstripe_data_in_emv", false, "EMV records expose Track 2 equivalent data"},
    {"paper_signature_weakness", false, "any signature satisfies the paper-signature CVM"},
    {"no_foreign_currency_limit", false, "no CVM for foreign-currency amounts"},
    {"merchant_not_authenticated", true, "acquirer trusts the submitted merchant data"},
    {"atc_out_of_order", false, "issuer accepts out-of-order ATCs"},
    {"un_reuse_not_prevented", false, "issuer accepts repeated UNs"},
    {"offline_pin_over_nfc", false, "offline PIN verification is reachable over NFC"},
    {"ctq_not_protected", false, "CTQ is unauthenticated without fDDA"},
    {"ttq_not_protected", false, "TTQ is not checked in the AC"},
    {"plastic_cdcvm_not_checked", false, "issuer accepts CDCVM from plastic cards"},
    {"no_relay_protection", false, "readers do not detect relays"},
    {"visa_from_mastercard", true, "kernel-3 responses can be built from a kernel-2 card"},
    {"aid_pan_not_checked", false, "issuer does not match AID and PAN brand"},
    {"aid_not_protected", false, "the selected AID is not authenticated"},
    {"tac_denial_zero", false, "TAC-Denial ignores CDA failure"},
    {"ca_lookup_failure_not_declined", false, "unknown CA index does not decline"},
    {"phones_always_send_cdcvm", false, "locked phones report CDCVM performed"},
    {"magic_byte_transit", false, "transit magic bytes unlock a locked wallet"},
    {"ac_not_authenticated_sda_dda", false, "SDA and DDA do not authenticate the AC"},
    {"aip_not_protected_magstripe", false, "AIP is unauthenticated in mag-stripe mode"},
    {"weak_random", false, "mag-stripe UN has only 1000 values"},
    {"un_retry", false, "readers retry with new UNs after a failed checksum"},
};

}  // namespace

std::string_view component_name(Component c) {
  switch (c) {
    case Component::kCard: return "card";
    case Component::kTerminal: return "terminal";
    case Component::kIssuer: return "issuer";
  }
  return "?";
}

const std::vector<Knob>& knobs() { return kKnobs; }

bool is_knob(std::string_view name) {
  return std::any_of(kKnobs.begin(), kKnobs.end(), [&](const Knob& k) { return k.name == name; });
}

const Knob& knob(std::string_view name) {
  for (const auto& k : kKnobs) {
    if (k.name == name) return k;
  }
  throw ConfigError("unknown flaw toggle: " + std::string(name));
}

const std::vector<FlawInfo>& flaws() { return kFlaws; }

const FlawInfo* find_flaw(std::string_view id) {
  for (const auto& f : kFlaws) {
    if (f.id == id) return &f;
  }
  return nullptr;
}

void apply_knobs(EnvSpec& env, const KnobSettings& settings) {
  for (const auto& [name, value] : settings) knob(name).apply(env, value);
}

bool parse_switch(std::string_view value) {
  if (value == "on" || value == "true" || value == "1") return true;
  if (value == "off" || value == "false" || value == "0") return false;
  throw ConfigError("expected on or off, got '" + std::string(value) + "'");
}

}  // namespace emvsim
