#include "emvsim/environment.h"

namespace emvsim {

Pki Pki::generate(Rng& rng) {
  Pki p;
  p.ca = SigningKey::generate(rng);
  p.issuer = SigningKey::generate(rng);
  return p;
}

CaKeyStore Pki::store() const {
  CaKeyStore s;
  s.keys[ca_index] = ca.public_key;
  return s;
}

void derive_aip(CardProfile& card) {
  const auto& m = card.oda_methods;
  card.aip.sda_supported = m.count(OdaMethod::kSda) != 0;
  card.aip.dda_supported = m.count(OdaMethod::kDda) != 0 || m.count(OdaMethod::kFdda) != 0;
  card.aip.cda_supported = m.count(OdaMethod::kCda) != 0;
  card.aip.on_device_cvm_supported = card.device_type == DeviceType::kPhone;
}

IssuerCardRecord issue_card(CardProfile& card, const IssuerPolicy& policy, const Pki& pki,
                            Rng& rng) {
  derive_aip(card);
  card.ac_covers_ttq = policy.check_ttq_in_ac;
  card.mk = MasterKey::generate(rng);
  card.ca_index = pki.ca_index;
  card.chain.ca_index = pki.ca_index;
  card.chain.issuer_cert = issue_certificate(pki.ca, "issuer", pki.issuer.public_key);
  const bool dynamic = card.oda_methods.count(OdaMethod::kDda) ||
                       card.oda_methods.count(OdaMethod::kCda) ||
                       card.oda_methods.count(OdaMethod::kFdda);
  if (dynamic) {
    card.card_key = SigningKey::generate(rng);
    card.chain.card_cert = issue_certificate(pki.issuer, card.pan.digits, card.card_key->public_key);
  } else {
    card.card_key.reset();
    card.chain.card_cert.reset();
  }
  card.ssad.clear();
  if (card.oda_methods.count(OdaMethod::kSda)) {
    DataElementMap static_data;
    static_data.set<Tag::kPan>(card.pan);
    static_data.set<Tag::kExpiry>(card.expiry);
    static_data.set<Tag::kAip>(card.aip);
    card.ssad = sign_ssad(pki.issuer, static_data);
  }
  if (card.magstripe) card.magstripe->key = Cvc3Key::generate(rng);

  IssuerCardRecord rec;
  rec.pan = card.pan;
  rec.mk = card.mk;
  rec.pin = card.pin;
  rec.kernel = kernel_of(card.aids.front());
  rec.covers_ttq = card.ac_covers_ttq;
  rec.covers_aid = card.ac_covers_aid;
  if (card.magstripe) rec.cvc3_key = card.magstripe->key;
  return rec;
}

World::World(IssuerPolicy policy, uint64_t seed) : rng_(seed) {
  pki_ = Pki::generate(rng_);
  pin_key_ = PinKey::generate(rng_);
  issuer_ = std::make_unique<Issuer>(std::move(policy), pin_key_, trace_);
  acquirer_ = std::make_unique<Acquirer>(trace_, *issuer_);
}

Card& World::add_card(CardProfile profile) {
  issuer_->register_card(issue_card(profile, issuer_->policy(), pki_, rng_));
  cards_.push_back(std::make_unique<Card>(std::move(profile), rng_, trace_));
  return *cards_.back();
}

Terminal& World::add_terminal(TerminalConfig cfg) {
  cfg.ca_store = pki_.store();
  cfg.pin_key = pin_key_;
  acquirer_->register_terminal(cfg.terminal_id, {cfg.merchant_id, cfg.mcc});
  terminals_.push_back(std::make_unique<Terminal>(std::move(cfg), rng_, trace_, acquirer_.get()));
  return *terminals_.back();
}

}  // namespace emvsim
